"""Solve xi . f = g along radial trajectories, for g with g(0) = 0.

The solution is the truncated trajectory integral

    f(x) = integral_{s_min}^{0} g(exp(s) x) ds,

which converges because g(0) = 0 forces |g(exp(s) x)| <= L exp(s) ||x||.
Only this integral-formula regime is implemented; g(0) != 0 has no
solution in this sense and is rejected.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

_FLOOR_S_MIN = -60.0  # exp(-60) ~ 9e-27: always past double-precision relevance


class RadialSolverError(ValueError):
    pass


def adaptive_simpson(f, a, b, tol, max_depth=40):
    """Adaptive Simpson quadrature for an array-valued integrand f(s).

    The refinement is shared across all components; the error criterion is
    the max-norm, so every component meets ``tol``.
    """
    fa, fm, fb = f(a), f((a + b) / 2.0), f(b)

    def simpson(lo, hi, flo, fmid, fhi):
        return (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi)

    def recurse(lo, hi, flo, fmid, fhi, whole, eps, depth):
        mid = (lo + hi) / 2.0
        flm = f((lo + mid) / 2.0)
        frm = f((mid + hi) / 2.0)
        left = simpson(lo, mid, flo, flm, fmid)
        right = simpson(mid, hi, fmid, frm, fhi)
        err = np.max(np.abs(left + right - whole))
        if depth <= 0 or err <= 15.0 * eps:
            return left + right + (left + right - whole) / 15.0
        return recurse(lo, mid, flo, flm, fmid, left, eps / 2.0, depth - 1) + \
            recurse(mid, hi, fmid, frm, fhi, right, eps / 2.0, depth - 1)

    whole = simpson(a, b, fa, fm, fb)
    return recurse(a, b, fa, fm, fb, whole, tol, max_depth)


def _estimate_gradient_sup(g, k, r_max, n_samples=64, h=1e-6, seed=0):
    """Crude sup of ||grad g|| on the ball of radius r_max, by FD sampling."""
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(n_samples, k))
    pts *= (r_max * rng.uniform(0.05, 1.0, size=(n_samples, 1))
            / np.linalg.norm(pts, axis=1, keepdims=True))
    sup = 0.0
    for i in range(k):
        dp = np.zeros(k)
        dp[i] = h
        di = (np.asarray(g(pts + dp)) - np.asarray(g(pts - dp))) / (2.0 * h)
        sup = max(sup, float(np.max(np.abs(di))))
    return max(sup * np.sqrt(k), 1e-12)


@dataclass(frozen=True)
class RadialSolution:
    """Evaluation rule for f with xi . f = g on the annulus [r_min, r_max]."""

    g: Callable
    k: int
    r_min: float
    r_max: float
    s_min: float
    quad_tol: float

    def __call__(self, x):
        """Evaluate f; accepts a single point (k,) or a batch (m, k)."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        pts = x[None, :] if single else x
        val = adaptive_simpson(
            lambda s: np.asarray(self.g(np.exp(s) * pts), dtype=float),
            self.s_min, 0.0, self.quad_tol,
        )
        # f(0) = 0 by convention
        at_origin = np.all(pts == 0.0, axis=-1)
        val = np.where(at_origin, 0.0, val)
        return float(val[0]) if single else val

    def directional_residual(self, x, h=1e-4):
        """|xi . f - g| measured by FD along the radial direction."""
        x = np.asarray(x, dtype=float)
        pts = x if x.ndim > 1 else x[None, :]
        deriv = (self(np.exp(h) * pts) - self(np.exp(-h) * pts)) / (2.0 * h)
        return np.abs(deriv - np.asarray(self.g(pts), dtype=float))


def solve_radial(g, annulus, tol=1e-8, grad_sup=None, k=None):
    """Construct f with xi . f = g on the annulus, g smooth with g(0) = 0.

    The lower truncation s_min is chosen so the dropped tail, bounded by
    grad_sup * r_max * exp(s_min), stays two orders below ``tol``.
    """
    r_min, r_max = float(annulus[0]), float(annulus[1])
    if not (0.0 < r_min < r_max):
        raise RadialSolverError("annulus must satisfy 0 < r_min < r_max")
    if k is None:
        raise RadialSolverError("pass k, the dimension of the x-space")
    g0 = float(np.asarray(g(np.zeros((1, k)))).ravel()[0])
    if abs(g0) > 1e-12:
        raise RadialSolverError(
            f"g(0) = {g0:g} violates the g(0) = 0 hypothesis"
        )
    if grad_sup is None:
        grad_sup = _estimate_gradient_sup(g, k, r_max)
    s_min = float(np.log(tol * 1e-2 / (grad_sup * r_max)))
    s_min = max(min(s_min, -5.0), _FLOOR_S_MIN)
    return RadialSolution(g=g, k=k, r_min=r_min, r_max=r_max,
                          s_min=s_min, quad_tol=tol * 1e-4)


def annulus_grid(r_min, r_max, k, n_per_axis=32, seed=0):
    """Sample points of the annulus: a grid for k = 2, random points otherwise."""
    if k == 2:
        ax = np.linspace(-r_max, r_max, n_per_axis)
        xx, yy = np.meshgrid(ax, ax)
        pts = np.stack([xx.ravel(), yy.ravel()], axis=-1)
    else:
        rng = np.random.default_rng(seed)
        pts = rng.normal(size=(n_per_axis * n_per_axis, k))
        pts *= rng.uniform(r_min, r_max, size=(len(pts), 1)) \
            / np.linalg.norm(pts, axis=1, keepdims=True)
    r = np.linalg.norm(pts, axis=1)
    return pts[(r >= r_min) & (r <= r_max)]


@dataclass(frozen=True)
class NormalFormReport:
    """Result of straightening the fiber drift of X~ = xi + sum g_r(x) d/dtheta_r.

    ``frequencies`` are b_r = g_r(0); ``correctors`` solve
    xi . phi_r = g_r - b_r, so F(x, theta) = (x, theta - phi(x)) conjugates
    X~ to xi + sum b_r d/dtheta_r.
    """

    frequencies: tuple
    correctors: tuple
    k: int

    def coordinate_change(self):
        """The map F(x, theta) = (x, theta - phi(x)) on R^k x T^n (unwrapped)."""
        k = self.k
        correctors = self.correctors

        def F(p):
            p = np.asarray(p, dtype=float)
            x = p[..., :k]
            out = p.copy()
            for r, phi in enumerate(correctors):
                out[..., k + r] = p[..., k + r] - phi(x)
            return out

        return F

    def conjugation_residual(self, g_list, points, h=1e-4):
        """Residuals ||DF(p) X~(p) - (xi + b)(F(p))|| over full-chart points.

        X~ = xi + sum g_r(x) d/dtheta_r is rebuilt from ``g_list``; the
        Jacobian of F is taken by batched central differences so the
        corrector quadratures run on one stacked batch.
        """
        pts = np.asarray(points, dtype=float)
        k, n = self.k, len(self.correctors)
        b = np.asarray(self.frequencies, dtype=float)
        m, d = pts.shape
        if d != k + n:
            raise RadialSolverError(f"points must have {k + n} coordinates")
        F = self.coordinate_change()
        eye = np.eye(d)
        plus = (pts[:, None, :] + h * eye).reshape(-1, d)
        minus = (pts[:, None, :] - h * eye).reshape(-1, d)
        vals = F(np.concatenate([plus, minus, pts], axis=0))
        jac = (vals[: m * d].reshape(m, d, d)
               - vals[m * d: 2 * m * d].reshape(m, d, d)) / (2.0 * h)
        f_at = vals[2 * m * d:]
        x_tilde = pts.copy()
        for r, g in enumerate(g_list):
            x_tilde[:, k + r] = np.asarray(g(pts[:, :k]), dtype=float)
        target = f_at.copy()
        target[:, k:] = b
        push = np.einsum("ico,ic->io", jac, x_tilde)
        return np.linalg.norm(push - target, axis=1)

    def max_corrector_residual(self, points, h=1e-4):
        out = 0.0
        for r, phi in enumerate(self.correctors):
            out = max(out, float(np.max(phi.directional_residual(points, h=h))))
        return out


def normalize_lifted_field(g_list: Sequence[Callable], annulus, tol=1e-8, k=None):
    """Frequencies and correctors of X~ = xi + sum g_r(x) d/dtheta_r.

    The radial part is assumed to be xi already (the linearization step is
    taken as given); each g_r only needs to be smooth.
    """
    if k is None:
        raise RadialSolverError("pass k, the dimension of the x-space")
    freqs = []
    corrs = []
    for g in g_list:
        b = float(np.asarray(g(np.zeros((1, k)))).ravel()[0])
        freqs.append(b)
        shifted = (lambda gg, bb: lambda x: np.asarray(gg(x), dtype=float) - bb)(g, b)
        corrs.append(solve_radial(shifted, annulus, tol=tol, k=k))
    return NormalFormReport(frequencies=tuple(freqs), correctors=tuple(corrs), k=k)
