"""Vector field library and numerical field calculus.

Field evaluation rules are plain callables operating on the last axis, so
every library field accepts batched points.  Brackets and pushforwards are
computed with central finite differences; nothing here is symbolic.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field as dc_field
from typing import Callable, Mapping

import numpy as np

from .geometry import Chart, base_projection_pi

E = float(np.e)

DEFAULT_FD_STEP = 1e-4


@dataclass(frozen=True)
class SingularFiber:
    """A declared zero fiber of a field: base location plus nullity order."""

    label: str
    base_point: tuple
    order: int

    def point(self):
        return np.asarray(self.base_point, dtype=float)


@dataclass(frozen=True)
class FieldHandle:
    """Named deterministic evaluation rule point -> tangent vector.

    ``singular_fibers`` lists declared zeros with their nullity orders;
    ``sources`` lists base points of invariant tori that act as sources of
    the base dynamics (the field itself does not vanish there).
    """

    name: str
    chart: Chart
    func: Callable[[np.ndarray], np.ndarray]
    singular_fibers: tuple = ()
    sources: tuple = ()
    meta: Mapping = dc_field(default_factory=dict)

    def __call__(self, p):
        return np.asarray(self.func(np.asarray(p, dtype=float)), dtype=float)

    @property
    def dim(self):
        return self.chart.dim


def field_sum(name, *fields):
    """Pointwise sum of fields on a common chart."""
    chart = fields[0].chart
    if any(f.chart != chart for f in fields):
        raise ValueError("fields live on different charts")
    funcs = [f.func for f in fields]

    def func(p):
        out = funcs[0](p)
        for g in funcs[1:]:
            out = out + g(p)
        return out

    return FieldHandle(name, chart, func)


def field_scale(name, scalar_fn, base_field):
    """Multiply a field by a scalar function of the point."""

    def func(p):
        s = np.asarray(scalar_fn(p), dtype=float)
        return s[..., None] * base_field.func(p)

    return FieldHandle(
        name,
        base_field.chart,
        func,
        singular_fibers=base_field.singular_fibers,
        sources=base_field.sources,
        meta=dict(base_field.meta),
    )


# ---------------------------------------------------------------------------
# library fields: product charts


def radial_field(k):
    """The Euler field x -> x on R^k (order-one zero at the origin)."""
    if k < 1:
        raise ValueError("radial field needs k >= 1")
    chart = Chart("product", k=k, n=0)
    origin = SingularFiber("origin", (0.0,) * k, 1)
    return FieldHandle("xi", chart, lambda p: np.array(p, dtype=float),
                       singular_fibers=(origin,))


def rational_relation(a, max_coeff=50, tol=1e-9):
    """Search for a small integer relation sum(m_i a_i) = 0, |m_i| <= max_coeff.

    Returns the first relation found as an integer tuple, or None.  Only a
    heuristic: absence of a small relation proves nothing.
    """
    a = np.asarray(a, dtype=float)
    n = a.size
    if n == 1:
        return None if abs(a[0]) > tol else (1,)
    bound = max_coeff if n <= 3 else 10
    rng = [np.arange(-bound, bound + 1)] * n
    grid = np.stack(np.meshgrid(*rng, indexing="ij"), axis=-1).reshape(-1, n)
    vals = np.abs(grid @ a)
    mask = (vals < tol) & np.any(grid != 0, axis=1)
    if not np.any(mask):
        return None
    hits = grid[mask]
    # report the smallest relation
    best = hits[np.argmin(np.sum(np.abs(hits), axis=1))]
    return tuple(int(m) for m in best)


def affine_torus_field(a, dense=None):
    """Constant field sum a_r d/dtheta_r on T^n.

    ``dense`` is a caller-declared flag (rational independence is not a
    numerically decidable property); when the caller declares density but a
    small integer relation exists, a warning is emitted.
    """
    a = np.asarray(a, dtype=float)
    n = a.size
    if n < 1:
        raise ValueError("need at least one frequency")
    relation = rational_relation(a)
    if dense and relation is not None:
        warnings.warn(
            f"frequencies {tuple(a)} declared dense but admit the integer "
            f"relation {relation}",
            stacklevel=2,
        )
    chart = Chart("product", k=0, n=n)

    def func(p):
        p = np.asarray(p, dtype=float)
        return np.broadcast_to(a, p.shape).copy()

    return FieldHandle("T", chart, func,
                       meta={"frequencies": tuple(a), "dense": bool(dense),
                             "relation": relation})


def xi_plus_affine(k, a, dense=True):
    """X = xi + T on R^k x T^n: radial in x, constant a on the angles."""
    a = np.asarray(a, dtype=float)
    n = a.size
    affine_torus_field(a, dense=dense)  # density heuristic / warning
    chart = Chart("product", k=k, n=n)

    def func(p):
        p = np.asarray(p, dtype=float)
        out = p.copy()
        out[..., k:] = a
        return out

    return FieldHandle("xi+T", chart, func,
                       meta={"frequencies": tuple(a), "dense": bool(dense)})


# ---------------------------------------------------------------------------
# library fields: the 5-sphere

_SPHERE = Chart("sphere5")


def fundamental_fields_s5():
    """The three rotation generators U_j of the T^3-action on S^5."""

    def make(j):
        def func(y):
            y = np.asarray(y, dtype=float)
            out = np.zeros_like(y)
            out[..., 2 * j] = -y[..., 2 * j + 1]
            out[..., 2 * j + 1] = y[..., 2 * j]
            return out

        return FieldHandle(f"U{j + 1}", _SPHERE, func)

    return make(0), make(1), make(2)


def connection_fields_s5():
    """Horizontal fields V_1, V_2 spanning the flat connection off S.

    V_r is tangent to the sphere and projects to 2*x_r*(1-x1-x2) d/dx_r
    under pi.  (The projection picks up the factor x_r from the chain rule;
    it is not constant in x_r.)
    """

    def make(r):
        def func(y):
            y = np.asarray(y, dtype=float)
            top = y[..., 4] ** 2 + y[..., 5] ** 2
            pair = y[..., 2 * r] ** 2 + y[..., 2 * r + 1] ** 2
            out = np.zeros_like(y)
            out[..., 2 * r] = top * y[..., 2 * r]
            out[..., 2 * r + 1] = top * y[..., 2 * r + 1]
            out[..., 4] = -pair * y[..., 4]
            out[..., 5] = -pair * y[..., 5]
            return out

        return FieldHandle(f"V{r + 1}", _SPHERE, func)

    return make(0), make(1)


def base_gradient_field():
    """Y = 2(1-x1-x2) x1 x2 [(x1-1/4) d1 + (x2-1/4) d2] on the base triangle.

    Unique interior zero at (1/4, 1/4) with Jacobian I/16 (a source);
    vanishes on the whole triangle boundary.
    """
    chart = Chart("product", k=2, n=0)

    def func(x):
        x = np.asarray(x, dtype=float)
        g = 2.0 * (1.0 - x[..., 0] - x[..., 1]) * x[..., 0] * x[..., 1]
        return np.stack(
            [g * (x[..., 0] - 0.25), g * (x[..., 1] - 0.25)], axis=-1
        )

    return FieldHandle(
        "Y_triangle", chart, func,
        singular_fibers=(SingularFiber("interior_source", (0.25, 0.25), 1),),
        meta={"domain": "triangle"},
    )


S5_ZERO_FIBERS = (
    SingularFiber("fiber_1/8_1/8", (0.125, 0.125), 2),
    SingularFiber("fiber_1/8_1/4", (0.125, 0.25), 4),
    SingularFiber("fiber_1/4_1/8", (0.25, 0.125), 6),
)


def tau_s5(x):
    """Damping factor on the base triangle.

    Nonnegative, zero exactly on the triangle boundary (order >= 10 through
    the envelope x1^10 x2^10 (1-x1-x2)^10) and at (1/8,1/8), (1/8,1/4),
    (1/4,1/8) with orders 2, 4 and 6.
    """
    x = np.asarray(x, dtype=float)
    x1, x2 = x[..., 0], x[..., 1]
    rho = (x1 * x2 * (1.0 - x1 - x2)) ** 10
    d1 = (x1 - 0.125) ** 2 + (x2 - 0.125) ** 2
    d2 = (x1 - 0.125) ** 2 + (x2 - 0.25) ** 2
    d3 = (x1 - 0.25) ** 2 + (x2 - 0.125) ** 2
    return rho * d1 * d2**2 * d3**3


def lifted_field_s5():
    """Horizontal lift Y' of the base field, extended over all of S^5.

    Y' = (y1^2+y2^2)(y3^2+y4^2) [ (y1^2+y2^2-1/4) V1 + (y3^2+y4^2-1/4) V2 ].
    """
    v1, v2 = connection_fields_s5()

    def func(y):
        y = np.asarray(y, dtype=float)
        x = base_projection_pi(y)
        pref = x[..., 0] * x[..., 1]
        return pref[..., None] * (
            (x[..., 0] - 0.25)[..., None] * v1.func(y)
            + (x[..., 1] - 0.25)[..., None] * v2.func(y)
        )

    return FieldHandle("Yprime", _SPHERE, func)


def describing_field_s5(freqs=(1.0, E, E * E)):
    """X' = (tau o pi) (Y' + f1 U1 + f2 U2 + f3 U3) on S^5.

    Vanishes exactly on the singular set S of the action and on the three
    fibers over the interior zeros of tau; invariant under the action.
    """
    freqs = tuple(float(f) for f in freqs)
    u1, u2, u3 = fundamental_fields_s5()
    yp = lifted_field_s5()
    f1, f2, f3 = freqs

    def func(y):
        y = np.asarray(y, dtype=float)
        t = tau_s5(base_projection_pi(y))
        drift = (
            yp.func(y)
            + f1 * u1.func(y)
            + f2 * u2.func(y)
            + f3 * u3.func(y)
        )
        return t[..., None] * drift

    return FieldHandle(
        "Xprime_s5", _SPHERE, func,
        singular_fibers=S5_ZERO_FIBERS,
        sources=((0.25, 0.25),),
        meta={
            "frequencies": freqs,
            "dense": True,
            "singular_set_order": 10,
        },
    )


# ---------------------------------------------------------------------------
# one-dimensional-base models

LINE_SOURCES = (0.0, 2.0, 4.0)
LINE_SINK_ORDERS = ((1.0, 2), (3.0, 4))
CIRCLE_SOURCES = (0.0, 2.0 * np.pi / 3.0, 4.0 * np.pi / 3.0)
CIRCLE_SINK_ORDERS = (
    (np.pi / 3.0, 2),
    (np.pi, 4),
    (5.0 * np.pi / 3.0, 6),
)


def _q_line(x):
    return x * (x - 1.0) * (x - 2.0) * (x - 3.0) * (x - 4.0)


def _y_line(x):
    q = _q_line(x)
    return q / (q * q + 1.0)


def _tau_line(x):
    # bounded on R: numerator degree 6 against (1+x^2)^3
    return (x - 1.0) ** 2 * (x - 3.0) ** 4 / (1.0 + x * x) ** 3


def _y_circle(alpha):
    return np.sin(3.0 * alpha)


def _tau_circle(alpha):
    # 2 - 2 cos(a - a0) has an exact order-two zero at a0 and is periodic
    d = lambda a0: 2.0 - 2.0 * np.cos(alpha - a0)
    return d(np.pi / 3.0) * d(np.pi) ** 2 * d(5.0 * np.pi / 3.0) ** 3


@dataclass(frozen=True)
class LineModel:
    """The one-dimensional-base field family: Y, tau, Z = tau*Y, X' = tau*(Y+T)."""

    base: str
    Y: FieldHandle
    tau: Callable[[np.ndarray], np.ndarray]
    Z: FieldHandle
    Xprime: FieldHandle


def line_model_fields(base, n=1, a=(1.0,)):
    """Build the line (B = R) or circle (B = S^1) model fields.

    Line: Y = q/(q^2+1), q = x(x-1)(x-2)(x-3)(x-4); sinks 1, 3 get damping
    orders 2, 4.  Circle: Y = sin(3a); sinks pi/3, pi, 5pi/3 get orders
    2, 4, 6.  X' = tau*(Y + T) lives on B x T^n.
    """
    a = np.asarray(a, dtype=float)
    if a.size != n:
        raise ValueError("frequency vector length must equal n")
    if base == "line":
        base_chart = Chart("product", k=1, n=0)
        full_chart = Chart("product", k=1, n=n)
        y_fn, tau_fn = _y_line, _tau_line
        sinks, sources = LINE_SINK_ORDERS, LINE_SOURCES
    elif base == "circle":
        base_chart = Chart("circle_product", n=0)
        full_chart = Chart("circle_product", n=n)
        y_fn, tau_fn = _y_circle, _tau_circle
        sinks, sources = CIRCLE_SINK_ORDERS, CIRCLE_SOURCES
    else:
        raise ValueError(f"unknown base tag {base!r}")

    def y_func(p):
        p = np.asarray(p, dtype=float)
        return y_fn(p[..., 0])[..., None]

    def z_func(p):
        p = np.asarray(p, dtype=float)
        x = p[..., 0]
        return (tau_fn(x) * y_fn(x))[..., None]

    def xprime_func(p):
        p = np.asarray(p, dtype=float)
        x = p[..., 0]
        t = tau_fn(x)
        out = np.empty_like(p)
        out[..., 0] = t * y_fn(x)
        out[..., 1:] = t[..., None] * a
        return out

    fibers = tuple(
        SingularFiber(f"sink_{loc:.6g}", (loc,), order) for loc, order in sinks
    )

    def tau(x):
        return tau_fn(np.asarray(x, dtype=float))

    meta = {"frequencies": tuple(a), "dense": True, "base": base}
    return LineModel(
        base=base,
        Y=FieldHandle(f"Y_{base}", base_chart, y_func),
        tau=tau,
        Z=FieldHandle(f"Z_{base}", base_chart,
                      lambda p: z_func(p),
                      singular_fibers=fibers,
                      sources=tuple((s,) for s in sources)),
        Xprime=FieldHandle(
            f"Xprime_{base}", full_chart, xprime_func,
            singular_fibers=fibers,
            sources=tuple((s,) for s in sources),
            meta=meta,
        ),
    )


# ---------------------------------------------------------------------------
# numerical calculus


def numerical_jacobian(f, p, h=DEFAULT_FD_STEP):
    """Central-difference Jacobian of f at p; columns are coordinate derivatives."""
    p = np.asarray(p, dtype=float)
    cols = []
    for i in range(p.size):
        dp = np.zeros_like(p)
        dp[i] = h
        cols.append((np.asarray(f(p + dp), dtype=float)
                     - np.asarray(f(p - dp), dtype=float)) / (2.0 * h))
    return np.stack(cols, axis=-1)


def lie_bracket(A, B, p, h=DEFAULT_FD_STEP, refine_near=None):
    """FD Lie bracket [A, B](p) = DB(p) A(p) - DA(p) B(p), error O(h^2).

    When ``refine_near`` is given and the first estimate lands within a
    factor 10 of that tolerance, the bracket is recomputed at h/2 and
    Richardson-extrapolated.
    """
    p = np.asarray(p, dtype=float)

    def estimate(hh):
        a_p = np.asarray(A(p), dtype=float)
        b_p = np.asarray(B(p), dtype=float)
        return numerical_jacobian(B, p, hh) @ a_p - numerical_jacobian(A, p, hh) @ b_p

    v = estimate(h)
    if refine_near is not None:
        nv = np.linalg.norm(v)
        if refine_near / 10.0 <= nv <= refine_near * 10.0:
            v = (4.0 * estimate(h / 2.0) - v) / 3.0
    return v


def pushforward_residual(F, A, p, h=DEFAULT_FD_STEP):
    """Residual || DF(p) A(p) - A(F(p)) || of the invariance of A under F."""
    p = np.asarray(p, dtype=float)
    jac = numerical_jacobian(F, p, h)
    a_p = np.asarray(A(p), dtype=float)
    return float(np.linalg.norm(jac @ a_p - np.asarray(A(F(p)), dtype=float)))


def batched_pushforward_residual(F, A, pts, h=DEFAULT_FD_STEP):
    """Pushforward residuals ||DF(p) A(p) - A(F(p))|| over a batch of points.

    Both F and A must accept batched input.  All coordinate perturbations
    are stacked into a single call to F, which matters when every
    evaluation of F is expensive (for example a quadrature).
    """
    pts = np.asarray(pts, dtype=float)
    m, d = pts.shape
    eye = np.eye(d)
    plus = (pts[:, None, :] + h * eye).reshape(-1, d)
    minus = (pts[:, None, :] - h * eye).reshape(-1, d)
    vals = np.asarray(F(np.concatenate([plus, minus, pts], axis=0)),
                      dtype=float)
    fp = vals[: m * d].reshape(m, d, d)
    fm = vals[m * d: 2 * m * d].reshape(m, d, d)
    f_at = vals[2 * m * d:]
    jac = (fp - fm) / (2.0 * h)  # jac[i, c, o] = dF_o/dp_c at pts[i]
    a_at = np.asarray(A(pts), dtype=float)
    push = np.einsum("ico,ic->io", jac, a_at)
    return np.linalg.norm(push - np.asarray(A(f_at), dtype=float), axis=1)


def sphere_tangent_projection(v, y):
    """Project an ambient vector onto the tangent space of S^5 at y."""
    v = np.asarray(v, dtype=float)
    y = np.asarray(y, dtype=float)
    return v - np.sum(v * y, axis=-1, keepdims=True) * y
