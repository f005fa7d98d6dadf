"""Flow integration and trajectory diagnostics.

The integrator is an embedded Dormand-Prince 5(4) pair with PI step
control and cubic Hermite dense output.  Limit-set classification runs on
the direction field (the field divided by its norm, throttled near the
declared target fibers): this reparametrizes trajectories by arc length
without changing their orbits, so the polynomial-order slowdown near
high-order zeros does not stall the classification.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional

import numpy as np

from .fields import FieldHandle
from .geometry import TWO_PI, Chart, in_triangle

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640,
                -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4


class FlowError(RuntimeError):
    """Integration failure: step underflow or step budget exhausted."""


@dataclass
class IntegratorConfig:
    rtol: float = 1e-9
    atol: float = 1e-12
    max_steps: int = 400_000
    safety: float = 0.9
    min_factor: float = 0.2
    max_factor: float = 10.0


@dataclass
class Trajectory:
    """Time-ordered samples of an integrated flow."""

    chart: Optional[Chart]
    times: np.ndarray
    points: np.ndarray
    stats: dict = dc_field(default_factory=dict)

    @property
    def start(self):
        return self.points[0]

    @property
    def end(self):
        return self.points[-1]


def _error_norm(err, y0, y1, rtol, atol):
    scale = atol + rtol * np.maximum(np.abs(y0), np.abs(y1))
    return float(np.sqrt(np.mean((err / scale) ** 2)))


def _initial_step(f0, y0, direction, rtol):
    scale = 1.0 + np.linalg.norm(y0)
    rate = np.linalg.norm(f0)
    if rate < 1e-300:
        return direction * 1e-3
    return direction * min(1e-2 * scale / rate, 1.0) * max(rtol, 1e-12) ** 0.25


def _adaptive_steps(f, t0, y0, t_end, cfg, postprocess=None):
    """Generator of accepted steps (t, y, f(y), err_norm, rejected_before).

    The first yield is the initial condition with err 0.  Raises FlowError
    on step underflow or when cfg.max_steps is exhausted before t_end.
    """
    direction = 1.0 if t_end >= t0 else -1.0
    t = float(t0)
    y = np.array(y0, dtype=float)
    k1 = np.asarray(f(y), dtype=float)
    yield t, y.copy(), k1.copy(), 0.0, 0
    if t_end == t0:
        return
    h = _initial_step(k1, y, direction, cfg.rtol)
    err_prev = 1.0
    n_steps = 0
    while direction * (t_end - t) > 0:
        rejected = 0
        while True:
            n_steps += 1
            if n_steps > cfg.max_steps:
                raise FlowError(
                    f"step budget {cfg.max_steps} exhausted at t={t:g}"
                )
            if direction * (t + h - t_end) > 0:
                h = t_end - t
            if abs(h) < 1e-14 * max(1.0, abs(t)):
                raise FlowError(f"step underflow at t={t:g}, point {y}")
            k = [k1]
            for i in range(1, 7):
                yi = y + h * (np.stack(k, axis=0).T @ _A[i])
                k.append(np.asarray(f(yi), dtype=float))
            karr = np.stack(k, axis=0)
            y_new = y + h * (karr.T @ _B5)
            err_vec = h * (karr.T @ _E)
            err = _error_norm(err_vec, y, y_new, cfg.rtol, cfg.atol)
            if err <= 1.0:
                break
            rejected += 1
            h *= max(cfg.min_factor,
                     cfg.safety * max(err, 1e-10) ** -0.2)
        t = t + h
        if postprocess is not None:
            y_new = postprocess(y_new)
            k1 = np.asarray(f(y_new), dtype=float)
        else:
            k1 = k[6]  # FSAL
        y = y_new
        # PI controller (Hairer's choices)
        if err < 1e-10:
            factor = cfg.max_factor
        else:
            factor = cfg.safety * err ** -0.14 * err_prev ** 0.08
        h *= min(cfg.max_factor, max(cfg.min_factor, factor))
        err_prev = max(err, 1e-10)
        yield t, y.copy(), k1.copy(), err, rejected


def _hermite(t, t0, t1, y0, y1, f0, f1):
    """Cubic Hermite interpolant on [t0, t1] evaluated at times t."""
    h = t1 - t0
    s = (t - t0) / h
    h00 = (1 + 2 * s) * (1 - s) ** 2
    h10 = s * (1 - s) ** 2
    h01 = s**2 * (3 - 2 * s)
    h11 = s**2 * (s - 1)
    return (h00[:, None] * y0 + h10[:, None] * h * f0
            + h01[:, None] * y1 + h11[:, None] * h * f1)


def integrate(field, p0, t_span, cfg=None, t_eval=None):
    """Integrate the flow of a field from p0 over t_span.

    ``field`` is a FieldHandle (sphere charts are renormalized after every
    accepted step) or a plain callable.  With ``t_eval`` the trajectory is
    sampled by dense output at the requested times; otherwise the accepted
    step points are returned.  Angles in the result are wrapped.
    """
    cfg = cfg or IntegratorConfig()
    if isinstance(field, FieldHandle):
        chart = field.chart
        f = field.func
        postprocess = chart.wrap if chart.is_sphere else None
    else:
        chart, f, postprocess = None, field, None
    t0, t1 = float(t_span[0]), float(t_span[1])

    ts, ys, fs = [], [], []
    accepted = rejected = 0
    max_err = 0.0
    for t, y, fy, err, rej in _adaptive_steps(f, t0, np.asarray(p0, float),
                                              t1, cfg, postprocess):
        ts.append(t)
        ys.append(y)
        fs.append(fy)
        accepted += 1
        rejected += rej
        max_err = max(max_err, err)
    times = np.array(ts)
    points = np.stack(ys, axis=0)
    derivs = np.stack(fs, axis=0)

    if t_eval is not None:
        t_eval = np.asarray(t_eval, dtype=float)
        out = np.empty((t_eval.size, points.shape[1]))
        order = np.argsort(times) if t1 >= t0 else np.argsort(-times)
        tt, yy, ff = times[order], points[order], derivs[order]
        key = tt if t1 >= t0 else -tt
        idx = np.clip(np.searchsorted(key, t_eval if t1 >= t0 else -t_eval,
                                      side="right") - 1, 0, len(tt) - 2)
        for seg in np.unique(idx):
            sel = idx == seg
            out[sel] = _hermite(t_eval[sel], tt[seg], tt[seg + 1],
                                yy[seg], yy[seg + 1], ff[seg], ff[seg + 1])
        times, points = t_eval, out

    if chart is not None:
        points = chart.wrap(points)
    if times.size > 1 and times[-1] < times[0]:
        times, points = times[::-1].copy(), points[::-1].copy()
    stats = {"accepted": accepted - 1, "rejected": rejected,
             "max_local_error": max_err}
    return Trajectory(chart=chart, times=times, points=points, stats=stats)


def flow_commutation_residual(field, lam, p0, t, cfg=None):
    """Chart distance between flowing lambda . p0 and acting on the flow of p0."""
    chart = field.chart
    p0 = np.asarray(p0, dtype=float)
    end_a = integrate(field, chart.act(lam, p0), (0.0, t), cfg).end
    end_b = chart.act(lam, integrate(field, p0, (0.0, t), cfg).end)
    return float(chart.distance(end_a, end_b))


# ---------------------------------------------------------------------------
# limit-set classification


@dataclass
class LimitSetReport:
    kind: str  # fixed_point | singular_fiber | torus_closure | escape | inconclusive
    target: Optional[str]
    final_distance: float
    horizon: float
    recurrent: bool = False


def _classification_targets(field, targets=None):
    if targets is not None:
        return list(targets)
    out = [(fib.label, fib.point()) for fib in field.singular_fibers]
    out += [(f"source_{i}", np.asarray(s, dtype=float))
            for i, s in enumerate(field.sources)]
    return out


def _direction_field(field, sign, target_points, slowdown):
    """Unit-speed field, throttled linearly within ``slowdown`` of a target.

    Multiplying by a positive scalar preserves orbits, so alpha/omega limits
    are unchanged; the throttle prevents overshooting a target fiber.
    """
    chart = field.chart

    def func(p):
        v = field.func(p)
        nv = np.linalg.norm(v)
        if nv < 1e-300:
            return np.zeros_like(v)
        u = (sign / nv) * v
        if len(target_points):
            b = chart.base(p)
            d = min(float(chart.base_distance(b, tp)) for tp in target_points)
            u = u * min(1.0, d / slowdown)
        return u

    return func


def classify_limit(field, p0, direction="forward", horizon=200.0, cfg=None,
                   targets=None, fiber_tol=1e-5, recurrence_delta=1e-3,
                   base_tol=1e-6, escape_radius=25.0, slowdown=1e-2):
    """Classify the alpha- (backward) or omega- (forward) limit of a trajectory.

    Integration runs in arc length on the direction field; ``horizon`` is an
    arc-length budget.  ``singular_fiber`` requires final base distance below
    ``fiber_tol`` with monotone decrease over the last decade of the run;
    ``inconclusive`` is an ordinary outcome, not an error.
    """
    cfg = cfg or IntegratorConfig(rtol=1e-8, atol=1e-10, max_steps=200_000)
    chart = field.chart
    p0 = np.asarray(p0, dtype=float)
    sign = 1.0 if direction == "forward" else -1.0
    tgt = _classification_targets(field, targets)
    tgt_points = [tp for _, tp in tgt]

    v0 = np.asarray(field.func(p0), dtype=float)
    if np.linalg.norm(v0) < 1e-300:
        return LimitSetReport("fixed_point", None, 0.0, 0.0)

    f = _direction_field(field, sign, tgt_points, slowdown)
    history = []  # (arc, nearest distance, nearest label)
    base0 = chart.base(p0)
    base_moved = 0.0
    left_ball = False
    returned = False
    s_end = 0.0
    p_end = p0

    def nearest(p):
        b = chart.base(p)
        if not tgt:
            return np.inf, None
        dists = [float(chart.base_distance(b, tp)) for tp in tgt_points]
        j = int(np.argmin(dists))
        return dists[j], tgt[j][0]

    try:
        for s, p, _, _, _ in _adaptive_steps(
            f, 0.0, p0, horizon, cfg,
            postprocess=chart.wrap if chart.is_sphere else None,
        ):
            s_end, p_end = s, p
            d, label = nearest(p)
            history.append((s, d, label))
            base_moved = max(base_moved, float(chart.base_distance(chart.base(p), base0)))
            dist0 = float(chart.distance(p, p0))
            if dist0 > recurrence_delta:
                left_ball = True
            elif left_ball:
                returned = True
            if d < fiber_tol and s > 0:
                tail = [hd for hs, hd, _ in history if hs >= 0.9 * s]
                if all(b <= a + 1e-12 for a, b in zip(tail, tail[1:])):
                    return LimitSetReport("singular_fiber", label, d, s)
            if not chart.base_angular and not chart.is_sphere:
                if np.linalg.norm(p[: chart.k]) > escape_radius:
                    return LimitSetReport("escape", None, d, s)
    except FlowError:
        pass

    d, label = nearest(p_end)
    if base_moved <= base_tol:
        return LimitSetReport("torus_closure", None, d, s_end,
                              recurrent=returned)
    return LimitSetReport("inconclusive", label, d, s_end)


# ---------------------------------------------------------------------------
# basin (outset) census


@dataclass
class CensusReport:
    n_samples: int
    counts: dict
    source_fraction: float
    unclassified_fraction: float
    seed: int


def _default_base_sampler(chart, meta):
    if chart.kind == "circle_product":
        return lambda rng, n: rng.uniform(0.0, TWO_PI, size=(n, 1))
    if chart.is_sphere or meta.get("domain") == "triangle":
        def triangle(rng, n):
            pts = rng.uniform(0.02, 0.98, size=(n, 2))
            bad = pts.sum(axis=1) > 0.98
            while np.any(bad):
                pts[bad] = rng.uniform(0.02, 0.98, size=(int(bad.sum()), 2))
                bad = pts.sum(axis=1) > 0.98
            return pts
        return triangle
    if chart.k == 1:
        return lambda rng, n: rng.uniform(-1.0, 5.0, size=(n, 1))

    def disc(rng, n):
        r = np.sqrt(rng.uniform(0.0, 1.0, size=n)) * 2.0
        ang = rng.uniform(0.0, TWO_PI, size=n)
        return np.stack([r * np.cos(ang), r * np.sin(ang)], axis=-1)

    return disc


def _base_velocity(field, xs):
    """Base components of the field over a batch of base points.

    Valid because every library field is fiber-independent: its base
    dynamics close up under the chart's base projection.
    """
    chart = field.chart
    if chart.is_sphere:
        from .geometry import embed_s5

        ys = embed_s5(xs, np.zeros_like(np.column_stack([xs[:, 0]] * 3)))
        return chart.base_tangent(ys, field.func(ys))
    pad = chart.dim - xs.shape[1]
    pts = np.concatenate([xs, np.zeros((len(xs), pad))], axis=1)
    return field.func(pts)[:, : xs.shape[1]]


def basin_census(field, n_samples, seed=0, sampler=None, fiber_tol=1e-5,
                 slowdown=1e-2, horizon=500.0, max_steps=100_000,
                 rtol=1e-6, atol=1e-9):
    """Backward-classify a sample of base points to their source fibers.

    Uses the (decoupled) base dynamics of the field, run as one batched
    integration of the backward direction field with per-sample freezing.
    """
    chart = field.chart
    rng = np.random.default_rng(seed)
    sampler = sampler or _default_base_sampler(chart, dict(field.meta))
    xs = sampler(rng, n_samples)
    sources = [np.asarray(s, dtype=float) for s in field.sources]
    others = [fib.point() for fib in field.singular_fibers]
    labels = ([f"source_{i}" for i in range(len(sources))]
              + [fib.label for fib in field.singular_fibers])
    tpts = sources + others
    n_src = len(sources)

    assigned = np.full(n_samples, -1, dtype=int)

    def dists(pts):
        return np.stack(
            [chart.base_distance(pts, tp) for tp in tpts], axis=-1
        )

    def velocity(pts):
        v = -_base_velocity(field, pts)
        nv = np.linalg.norm(v, axis=1, keepdims=True)
        nv[nv < 1e-300] = 1.0
        d = dists(pts).min(axis=1, keepdims=True)
        v = v / nv * np.minimum(1.0, d / slowdown)
        v[assigned >= 0] = 0.0
        return v

    t, h = 0.0, 1e-3
    y = xs.copy()
    k1 = velocity(y)
    err_prev = 1.0
    for _ in range(max_steps):
        active = assigned < 0
        if not np.any(active) or t >= horizon:
            break
        k = [k1]
        for i in range(1, 7):
            k.append(velocity(y + h * np.tensordot(np.stack(k, 0), _A[i],
                                                   axes=(0, 0))))
        karr = np.stack(k, 0)
        y_new = y + h * np.tensordot(karr, _B5, axes=(0, 0))
        err_vec = h * np.tensordot(karr, _E, axes=(0, 0))
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        per_row = np.sqrt(np.mean((err_vec / scale) ** 2, axis=1))
        err = float(per_row[active].max()) if np.any(active) else 0.0
        if err <= 1.0:
            t += h
            y = y_new
            dmat = dists(y)
            hit = (dmat.min(axis=1) < fiber_tol) & active
            if np.any(hit):
                assigned[hit] = dmat[hit].argmin(axis=1)
            k1 = velocity(y)
            factor = 0.9 * max(err, 1e-10) ** -0.14 * err_prev ** 0.08
            err_prev = max(err, 1e-10)
        else:
            factor = max(0.2, 0.9 * err**-0.2)
        h *= min(10.0, max(0.2, factor))
        h = min(h, horizon - t) if t < horizon else h

    counts = {}
    for j, lbl in enumerate(labels):
        c = int(np.sum(assigned == j))
        if c:
            counts[lbl] = c
    n_source = int(np.sum((assigned >= 0) & (assigned < n_src)))
    n_unassigned = int(np.sum(assigned < 0))
    return CensusReport(
        n_samples=n_samples,
        counts=counts,
        source_fraction=n_source / n_samples,
        unclassified_fraction=n_unassigned / n_samples,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# singularity order estimation


@dataclass
class SingularityReport:
    location: np.ndarray
    estimated_order: float
    declared_order: Optional[int]
    r_squared: float
    radii: np.ndarray
    slopes: tuple

    @property
    def ok(self):
        return np.isfinite(self.estimated_order) and self.r_squared >= 0.99


def _probe_directions(chart, x0, r_max, n_directions, meta):
    bd = chart.base_dim
    if bd == 1:
        cands = [np.array([1.0]), np.array([-1.0])]
    else:
        angles = 0.4 + np.arange(8) * (np.pi / 4.0)
        cands = [np.array([np.cos(a), np.sin(a)]) for a in angles]
    needs_triangle = chart.is_sphere or meta.get("domain") == "triangle"
    out = []
    for u in cands:
        if needs_triangle and not in_triangle(x0 + r_max * u, margin=0.0):
            continue
        out.append(u)
        if len(out) == n_directions:
            break
    return out


def estimate_order(field, p0, radii=None, n_directions=4, declared_order=None):
    """Estimate the nullity order of a field at a singular point.

    Fits log ||field|| against log(base displacement) along probe rays and
    reports the median slope; r^2 below 0.99 flags a degenerate regression.
    """
    chart = field.chart
    p0 = np.asarray(p0, dtype=float)
    if radii is None:
        radii = np.logspace(-6.0, -4.0, 8)
    radii = np.asarray(radii, dtype=float)
    x0 = chart.base(p0)
    if declared_order is None:
        for fib in field.singular_fibers:
            if chart.base_distance(x0, fib.point()) < 1e-9:
                declared_order = fib.order
                break
    slopes, r2s = [], []
    for u in _probe_directions(chart, x0, float(radii.max()),
                               n_directions, dict(field.meta)):
        vals = np.array([
            np.linalg.norm(field.func(chart.displace_base(p0, r * u)))
            for r in radii
        ])
        if np.any(vals <= 0.0):
            continue
        lr, lv = np.log(radii), np.log(vals)
        slope, intercept = np.polyfit(lr, lv, 1)
        fit = slope * lr + intercept
        ss_res = float(np.sum((lv - fit) ** 2))
        ss_tot = float(np.sum((lv - lv.mean()) ** 2))
        slopes.append(float(slope))
        r2s.append(1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0)
    if not slopes:
        return SingularityReport(p0, np.nan, declared_order, 0.0, radii, ())
    return SingularityReport(
        location=p0,
        estimated_order=float(np.median(slopes)),
        declared_order=declared_order,
        r_squared=float(np.min(r2s)),
        radii=radii,
        slopes=tuple(slopes),
    )


# ---------------------------------------------------------------------------
# equidistribution


def equidistribution_discrepancy(traj_or_angles, bins, base_tol=1e-6):
    """Box-count discrepancy of visited fiber angles against uniform measure.

    Returns half the total-variation distance between the empirical bin
    distribution and uniform, a number in [0, 1].
    """
    if isinstance(traj_or_angles, Trajectory):
        traj = traj_or_angles
        chart = traj.chart
        base_drift = np.max(
            chart.base_distance(chart.base(traj.points), chart.base(traj.points[0]))
        )
        if base_drift > base_tol:
            raise ValueError(
                f"trajectory not fiber-confined: base drift {base_drift:g}"
            )
        angles = chart.fiber_angles(traj.points)
    else:
        angles = np.asarray(traj_or_angles, dtype=float)
    u = np.mod(angles, TWO_PI) / TWO_PI
    n_dim = u.shape[1]
    hist, _ = np.histogramdd(u, bins=[bins] * n_dim,
                             range=[(0.0, 1.0)] * n_dim)
    p = hist.ravel() / len(u)
    return float(0.5 * np.sum(np.abs(p - 1.0 / p.size)))
