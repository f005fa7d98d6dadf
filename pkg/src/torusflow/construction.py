"""Builders for fields whose symmetries are exactly a torus plus the flow.

The recipe shared by every builder: start from base dynamics with a source
whose outset is dense, damp by a nonnegative factor tau that plants zeros
of pairwise distinct even orders on selected fibers, and add a dense
constant drift on the torus fibers.  The distinct orders make the singular
fibers pairwise inequivalent, which kills any extra symmetry.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from .fields import (
    E,
    FieldHandle,
    SingularFiber,
    describing_field_s5,
    field_scale,
    line_model_fields,
    rational_relation,
)
from .geometry import TWO_PI, Chart, embed_s5, torus_act_s5


@dataclass(frozen=True)
class ConstructionManifest:
    """A built field plus the declared inventory that certifies it.

    Validates on creation: the declared orders must be pairwise distinct
    and the field must actually vanish on every declared fiber.
    """

    name: str
    field: FieldHandle
    frequencies: tuple
    notes: Optional[Mapping] = None

    def __post_init__(self):
        orders = [f.order for f in self.field.singular_fibers]
        if len(set(orders)) != len(orders):
            raise ValueError(f"declared orders {orders} are not distinct")
        chart = self.field.chart
        for fib in self.field.singular_fibers:
            p = fib.point()
            if chart.is_sphere:
                p = embed_s5(p, (0.0, 0.0, 0.0))
            elif chart.dim > chart.base_dim:
                p = np.concatenate([p, np.zeros(chart.dim - chart.base_dim)])
            resid = float(np.linalg.norm(self.field.func(p)))
            if resid > 1e-12:
                raise ValueError(
                    f"field does not vanish on declared fiber {fib.label}: "
                    f"|X| = {resid:g}"
                )

    def to_dict(self):
        chart = self.field.chart
        return {
            "name": self.name,
            "chart": {"kind": chart.kind, "k": chart.k, "n": chart.n},
            "frequencies": list(self.frequencies),
            "rational_relation": (
                list(rel)
                if (rel := rational_relation(self.frequencies)) is not None
                else None
            ),
            "singular_fibers": [
                {
                    "label": f.label,
                    "base_point": list(f.base_point),
                    "order": f.order,
                }
                for f in self.field.singular_fibers
            ],
            "sources": [list(s) for s in self.field.sources],
            "notes": dict(self.notes or {}),
        }

    def to_json(self, indent=2):
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)


def build_line_describing(base="line", n=1, freqs=(1.0,)):
    """Describing field over the line or circle base with an n-torus fiber."""
    model = line_model_fields(base, n=n, a=freqs)
    return ConstructionManifest(
        name=f"{base}_x_T{n}",
        field=model.Xprime,
        frequencies=tuple(float(f) for f in freqs),
        notes={"base": base},
    )


def build_s5(freqs=(1.0, E, E * E)):
    """Describing field for the standard T^3 action on the 5-sphere."""
    fld = describing_field_s5(freqs)
    return ConstructionManifest(
        name="s5_t3",
        field=fld,
        frequencies=tuple(float(f) for f in freqs),
        notes={"singular_set_order": fld.meta["singular_set_order"]},
    )


def build_planar_demo(orders=(2, 4, 6), radius=1.0, n=2,
                      freqs=(1.0, np.sqrt(2.0))):
    """Free-action demo on R^2 x T^n: damped Euler flow with planted zeros.

    The base dynamics are the radial field xi damped by
    tau = prod_p |x - p|^(2 m_p) / (1 + |x|^2)^(sum m_p), with the points p
    on pairwise distinct rays at the given radius so their orbits under the
    flow stay disjoint; the full field is X' = tau * (xi + T).
    """
    orders = tuple(int(m) for m in orders)
    if any(m % 2 or m <= 0 for m in orders):
        raise ValueError("artificial orders must be positive and even")
    if len(set(orders)) != len(orders):
        raise ValueError("artificial orders must be pairwise distinct")
    freqs = tuple(float(f) for f in freqs)
    if len(freqs) != n:
        raise ValueError("frequency vector length must equal n")
    m = len(orders)
    angles = 0.3 + np.arange(m) * (TWO_PI / max(m, 1))
    pts = radius * np.stack([np.cos(angles), np.sin(angles)], axis=-1)
    half = np.array(orders, dtype=float) / 2.0
    total = float(half.sum())
    a = np.asarray(freqs, dtype=float)
    chart = Chart("product", k=2, n=n)

    def tau(x):
        x = np.asarray(x, dtype=float)
        d2 = np.stack(
            [np.sum((x[..., :2] - p) ** 2, axis=-1) for p in pts], axis=-1
        )
        # |x - p|^(2 m_p) written on squared distances to stay smooth
        num = np.prod(d2 ** half, axis=-1)
        return num / (1.0 + np.sum(x[..., :2] ** 2, axis=-1)) ** total

    def func(p):
        p = np.asarray(p, dtype=float)
        t = tau(p)
        out = p.copy()
        out[..., 2:] = a
        return t[..., None] * out

    fibers = tuple(
        SingularFiber(f"planted_{i}", tuple(pt), orders[i])
        for i, pt in enumerate(pts)
    )
    fld = FieldHandle(
        "Xprime_planar", chart, func,
        singular_fibers=fibers,
        sources=((0.0, 0.0),),
        meta={"frequencies": freqs, "dense": True},
    )
    return ConstructionManifest(
        name=f"planar_R2_x_T{n}",
        field=fld,
        frequencies=freqs,
        notes={"radius": radius, "orders": list(orders)},
    )


# ---------------------------------------------------------------------------
# effective damping


def damping_h(t):
    """The flat cutoff h(t) = exp(-1/t) for t > 0, zero for t <= 0.

    Smooth on all of R; all derivatives vanish at t = 0, so multiplying by
    h of a smooth nonnegative gauge never lowers smoothness.
    """
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out if out.ndim else float(out)


def apply_effective_damping(fld, gauge, name=None):
    """Scale a field by h(gauge(p)) where h is the flat cutoff.

    ``gauge`` must be nonnegative; the damped field vanishes to infinite
    order wherever the gauge hits zero.  Negative gauge values raise at
    evaluation time.
    """

    def scalar(p):
        g = np.asarray(gauge(p), dtype=float)
        if np.any(g < 0):
            raise ValueError("damping gauge must be nonnegative")
        return damping_h(g)

    out = field_scale(name or f"damped({fld.name})", scalar, fld)
    return out


# ---------------------------------------------------------------------------
# Haar averaging over the torus


def _torus_grid(n, n_nodes):
    axes = [np.arange(n_nodes) * (TWO_PI / n_nodes)] * n
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def haar_average_function(fn, chart, n_nodes=64):
    """Average a scalar function over the torus action.

    Uses the tensor trapezoid rule on the uniform periodic grid, which is
    exact for trigonometric polynomials of degree below n_nodes / 2; a
    function already invariant under the action is reproduced exactly at
    every point.
    """
    lam = _torus_grid(chart.n, n_nodes)

    def averaged(p):
        p = np.asarray(p, dtype=float)
        if p.ndim > 1:
            return np.array([averaged(row) for row in p])
        orbit = _orbit_grid(chart, lam, p)
        return np.mean(np.asarray(fn(orbit), dtype=float), axis=0)

    return averaged


def _orbit_grid(chart, lam, p):
    """Points lam . p for every group element in one stacked batch."""
    if chart.is_sphere:
        return torus_act_s5(lam, p)
    orbit = np.broadcast_to(p, (len(lam), p.size)).copy()
    nb = chart.dim - chart.n
    orbit[:, nb:] = np.mod(orbit[:, nb:] + lam, TWO_PI)
    return orbit


def haar_average_field(fld, n_nodes=64, name=None):
    """Project a field onto its torus-invariant part.

    Z'(p) = average over the group of the pullback of Z along each group
    element: evaluate at the translated point, then transport the vector
    back.  On the sphere chart the transport is the inverse rotation; on
    product charts the action is a translation, so transport is trivial.
    """
    chart = fld.chart
    lam = _torus_grid(chart.n, n_nodes)

    if chart.is_sphere:

        def func(y):
            y = np.asarray(y, dtype=float)
            if y.ndim > 1:
                return np.stack([func(row) for row in y], axis=0)
            vecs = fld.func(torus_act_s5(lam, y))
            return np.mean(torus_act_s5(-lam, vecs), axis=0)

    else:

        def func(p):
            p = np.asarray(p, dtype=float)
            if p.ndim > 1:
                return np.stack([func(row) for row in p], axis=0)
            # translations have identity pushforward
            return np.mean(fld.func(_orbit_grid(chart, lam, p)), axis=0)

    return FieldHandle(
        name or f"haar({fld.name})", chart, func,
        singular_fibers=fld.singular_fibers,
        sources=fld.sources,
        meta=dict(fld.meta),
    )
