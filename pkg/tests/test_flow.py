import numpy as np
import pytest

from torusflow.fields import line_model_fields, xi_plus_affine, describing_field_s5
from torusflow.flow import (
    FlowError,
    IntegratorConfig,
    basin_census,
    classify_limit,
    equidistribution_discrepancy,
    estimate_order,
    flow_commutation_residual,
    integrate,
)
from torusflow.geometry import TWO_PI, embed_s5

SQRT2 = np.sqrt(2.0)


def test_integrate_exponential_oracle():
    # flow of xi is x exp(t); angles advance linearly
    X = xi_plus_affine(1, (1.0, SQRT2))
    traj = integrate(X, [0.5, 0.1, 0.2], (0.0, 2.0))
    expect = [0.5 * np.e**2, np.mod(0.1 + 2.0, TWO_PI),
              np.mod(0.2 + 2.0 * SQRT2, TWO_PI)]
    assert np.allclose(traj.end, expect, atol=1e-8)
    assert traj.stats["accepted"] > 0


def test_integrate_backward_returns_chronological_order():
    X = xi_plus_affine(1, (1.0,))
    traj = integrate(X, [1.0, 0.0], (0.0, -1.0))
    assert traj.times[0] < traj.times[-1]
    assert np.isclose(traj.points[0][0], np.exp(-1.0), atol=1e-9)


def test_dense_output_accuracy():
    X = xi_plus_affine(1, (1.0,))
    t_eval = np.linspace(0.0, 2.0, 37)
    traj = integrate(X, [1.0, 0.0], (0.0, 2.0), t_eval=t_eval)
    assert np.allclose(traj.points[:, 0], np.exp(t_eval), rtol=1e-7)


def test_time_reversal_roundtrip():
    X = xi_plus_affine(2, (1.0, SQRT2))
    p0 = np.array([0.3, -0.7, 1.0, 2.0])
    fwd = integrate(X, p0, (0.0, 3.0)).end
    # backward runs are stored chronologically: t = 0 is the first sample
    back = integrate(X, fwd, (3.0, 0.0)).points[0]
    assert X.chart.distance(back, X.chart.wrap(p0)) < 1e-7


def test_sphere_renormalization_keeps_unit_norm():
    X5 = describing_field_s5()
    y0 = embed_s5(np.array([0.3, 0.3]), (0.1, 0.2, 0.3))
    traj = integrate(X5, y0, (0.0, 100.0),
                     t_eval=np.linspace(0.0, 100.0, 64))
    drift = np.max(np.abs(np.linalg.norm(traj.points, axis=1) - 1.0))
    assert drift < 1e-8


def test_step_budget_raises():
    X = xi_plus_affine(1, (1.0,))
    cfg = IntegratorConfig(max_steps=3)
    with pytest.raises(FlowError):
        integrate(X, [1.0, 0.0], (0.0, 50.0), cfg)


def test_flow_commutation_residual_product_chart():
    X = xi_plus_affine(1, (1.0, SQRT2))
    r = flow_commutation_residual(X, np.array([1.0, 2.5]),
                                  np.array([0.5, 0.1, 0.2]), 5.0)
    assert r < 1e-8


# ---------------------------------------------------------------------------
# classification


def test_classify_forward_reaches_sink():
    m = line_model_fields("line", n=1, a=(1.0,))
    rep = classify_limit(m.Xprime, np.array([0.4, 0.0]), "forward")
    assert rep.kind == "singular_fiber"
    assert rep.target == "sink_1"
    assert rep.final_distance < 1e-5


def test_classify_backward_reaches_source():
    m = line_model_fields("line", n=1, a=(1.0,))
    rep = classify_limit(m.Xprime, np.array([0.4, 0.0]), "backward")
    assert rep.kind == "singular_fiber" and rep.target == "source_0"


def test_classify_fixed_point_on_dead_fiber():
    m = line_model_fields("line", n=1, a=(1.0,))
    rep = classify_limit(m.Xprime, np.array([1.0, 0.0]), "forward")
    assert rep.kind == "fixed_point"


def test_classify_torus_closure():
    X = xi_plus_affine(1, (1.0, SQRT2))
    rep = classify_limit(X, np.array([0.0, 0.1, 0.2]), "forward",
                         horizon=30.0)
    assert rep.kind == "torus_closure"


def test_classify_escape():
    X = xi_plus_affine(1, (1.0,))
    rep = classify_limit(X, np.array([1.0, 0.0]), "forward", horizon=50.0)
    assert rep.kind == "escape"


# ---------------------------------------------------------------------------
# census


def test_census_line_all_samples_reach_sources():
    m = line_model_fields("line", n=1, a=(1.0,))
    rep = basin_census(m.Xprime, 300, seed=2)
    assert rep.source_fraction >= 0.99
    assert set(rep.counts) <= {"source_0", "source_1", "source_2"}


def test_census_circle_all_samples_reach_sources():
    m = line_model_fields("circle", n=2, a=(1.0, SQRT2))
    rep = basin_census(m.Xprime, 300, seed=2)
    assert rep.source_fraction >= 0.99


def test_census_reproducible():
    m = line_model_fields("line", n=1, a=(1.0,))
    a = basin_census(m.Xprime, 100, seed=5)
    b = basin_census(m.Xprime, 100, seed=5)
    assert a.counts == b.counts


# ---------------------------------------------------------------------------
# order estimation


def test_estimate_order_line_sinks():
    m = line_model_fields("line", n=1, a=(1.0,))
    for loc, order in ((1.0, 2), (3.0, 4)):
        rep = estimate_order(m.Xprime, np.array([loc, 0.0]))
        assert abs(rep.estimated_order - order) < 0.2
        assert rep.r_squared >= 0.99
        assert rep.declared_order == order


def test_estimate_order_flags_degenerate_fit():
    # field with a logarithmic twist has no clean power-law slope
    from torusflow.fields import FieldHandle
    from torusflow.geometry import Chart

    def func(p):
        x = np.asarray(p, dtype=float)[..., :1]
        r = np.abs(x[..., 0])
        mag = np.where(r > 0, np.exp(-1.0 / np.maximum(r, 1e-300)), 0.0)
        return np.stack([mag], axis=-1)

    fld = FieldHandle("flat", Chart("product", k=1, n=0), func)
    rep = estimate_order(fld, np.array([0.0]))
    assert not rep.ok


# ---------------------------------------------------------------------------
# equidistribution


def test_discrepancy_small_for_irrational_flow():
    ts = np.linspace(0.0, 1e5, 100_000)
    angles = ts[:, None] * np.array([1.0, SQRT2])
    assert equidistribution_discrepancy(angles, bins=10) <= 0.05


def test_discrepancy_large_for_rational_flow():
    ts = np.linspace(0.0, 1e5, 100_000)
    angles = ts[:, None] * np.array([1.0, 2.0])
    assert equidistribution_discrepancy(angles, bins=10) >= 0.3


def test_discrepancy_rejects_unconfined_trajectory():
    X = xi_plus_affine(1, (1.0, SQRT2))
    traj = integrate(X, [0.5, 0.0, 0.0], (0.0, 2.0),
                     t_eval=np.linspace(0, 2, 50))
    with pytest.raises(ValueError):
        equidistribution_discrepancy(traj, bins=10)
