"""Charts and group operations.

Three concrete charts are supported:

* the product chart ``R^k x T^n`` (Euclidean block followed by ``n`` torus
  angles; ``k = 0`` gives the pure torus),
* the unit sphere ``S^5 in R^6`` carrying the coordinate-pair rotation
  action of ``T^3``,
* the circle-base product ``S^1 x T^n`` (base angle first, then fiber
  angles).

All functions are pure and operate on the last axis, so they broadcast
over batches of points.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * np.pi

SPHERE_TOL = 1e-12


def wrap_angles(raw):
    """Reduce angles componentwise into [0, 2*pi)."""
    raw = np.asarray(raw, dtype=float)
    if not np.all(np.isfinite(raw)):
        raise ValueError("non-finite angle input")
    out = np.mod(raw, TWO_PI)
    # np.mod of a tiny negative rounds to 2*pi itself; fold it back
    return np.where(out >= TWO_PI, 0.0, out)


def angular_difference(a, b):
    """Signed shortest angular difference a - b, componentwise in [-pi, pi)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return np.mod(a - b + np.pi, TWO_PI) - np.pi


def torus_translate(theta, lam):
    """Group law of T^n: componentwise angle sum, wrapped."""
    theta = np.asarray(theta, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if theta.shape[-1] != lam.shape[-1]:
        raise ValueError(
            f"length mismatch: {theta.shape[-1]} vs {lam.shape[-1]}"
        )
    return wrap_angles(theta + lam)


def sphere_normalize(y):
    """Project onto the unit sphere (last axis)."""
    y = np.asarray(y, dtype=float)
    return y / np.linalg.norm(y, axis=-1, keepdims=True)


def torus_act_s5(lam, y):
    """Rotate the coordinate pairs (y1,y2), (y3,y4), (y5,y6) by lam1..lam3.

    Broadcasts over leading axes of both arguments.
    """
    lam = np.asarray(lam, dtype=float)
    y = np.asarray(y, dtype=float)
    c, s = np.cos(lam), np.sin(lam)
    shape = np.broadcast_shapes(lam.shape[:-1], y.shape[:-1]) + (6,)
    out = np.empty(shape)
    for j in range(3):
        cj, sj = c[..., j], s[..., j]
        a, b = y[..., 2 * j], y[..., 2 * j + 1]
        out[..., 2 * j] = cj * a - sj * b
        out[..., 2 * j + 1] = sj * a + cj * b
    return out


def base_projection_pi(y):
    """Orbit-space projection pi(y) = (y1^2 + y2^2, y3^2 + y4^2)."""
    y = np.asarray(y, dtype=float)
    return np.stack(
        [
            y[..., 0] ** 2 + y[..., 1] ** 2,
            y[..., 2] ** 2 + y[..., 3] ** 2,
        ],
        axis=-1,
    )


def singular_indicator_s5(y):
    """Product of the three pair norms; zero exactly on the singular set."""
    y = np.asarray(y, dtype=float)
    x = base_projection_pi(y)
    return x[..., 0] * x[..., 1] * (y[..., 4] ** 2 + y[..., 5] ** 2)


def embed_s5(x, phis=(0.0, 0.0, 0.0)):
    """Point of S^5 over base point x = (x1, x2) with given pair phases.

    Requires x in the closed triangle x1, x2 >= 0, x1 + x2 <= 1.
    """
    x = np.asarray(x, dtype=float)
    phis = np.asarray(phis, dtype=float)
    rest = 1.0 - x[..., 0] - x[..., 1]
    if np.any(x < -1e-15) or np.any(rest < -1e-15):
        raise ValueError("base point outside the closed triangle")
    radii = np.sqrt(np.clip(np.stack([x[..., 0], x[..., 1], rest], axis=-1), 0.0, None))
    out = np.empty(x.shape[:-1] + (6,))
    for j in range(3):
        out[..., 2 * j] = radii[..., j] * np.cos(phis[..., j])
        out[..., 2 * j + 1] = radii[..., j] * np.sin(phis[..., j])
    return out


def sphere_phases(y):
    """Pair phases (atan2 per coordinate pair) of a sphere point."""
    y = np.asarray(y, dtype=float)
    return np.stack(
        [np.arctan2(y[..., 2 * j + 1], y[..., 2 * j]) for j in range(3)],
        axis=-1,
    )


def in_triangle(x, margin=0.0):
    """True when x lies in the (closed, or margin-shrunk) base triangle."""
    x = np.asarray(x, dtype=float)
    return (
        (x[..., 0] >= margin)
        & (x[..., 1] >= margin)
        & (x[..., 0] + x[..., 1] <= 1.0 - margin)
    )


# ---------------------------------------------------------------------------
# point types


@dataclass(frozen=True)
class ProductPoint:
    """Point of R^k x T^n; angles are stored wrapped into [0, 2*pi)."""

    x: tuple
    theta: tuple

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        theta = wrap_angles(self.theta)
        if theta.size < 1:
            raise ValueError("need at least one torus angle")
        if not np.all(np.isfinite(x)):
            raise ValueError("non-finite Euclidean coordinates")
        object.__setattr__(self, "x", tuple(x))
        object.__setattr__(self, "theta", tuple(theta))

    def coords(self):
        return np.array(self.x + self.theta)


@dataclass(frozen=True)
class SpherePoint:
    """Point of S^5, renormalized at construction."""

    y: tuple

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        if y.shape != (6,):
            raise ValueError("sphere point needs 6 coordinates")
        r = np.linalg.norm(y)
        if not np.isfinite(r) or r == 0.0:
            raise ValueError("degenerate sphere point")
        y = y / r
        if abs(np.linalg.norm(y) - 1.0) > SPHERE_TOL:
            raise ValueError("renormalization failed")
        object.__setattr__(self, "y", tuple(y))

    def coords(self):
        return np.array(self.y)


@dataclass(frozen=True)
class TrianglePoint:
    """Point of the closed base triangle with vertices (0,0), (1,0), (0,1)."""

    x: tuple

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.shape != (2,):
            raise ValueError("triangle point needs 2 coordinates")
        if x[0] < 0 or x[1] < 0 or x[0] + x[1] > 1.0 + 1e-15:
            raise ValueError(f"outside the closed triangle: {tuple(x)}")
        object.__setattr__(self, "x", tuple(x))

    def coords(self):
        return np.array(self.x)


# ---------------------------------------------------------------------------
# chart descriptor


@dataclass(frozen=True)
class Chart:
    """Coordinate chart descriptor used by fields and integrators.

    kind: "product" (R^k x T^n), "sphere5", or "circle_product"
    (S^1 base angle followed by n fiber torus angles).
    """

    kind: str
    k: int = 0
    n: int = 0

    def __post_init__(self):
        if self.kind not in ("product", "sphere5", "circle_product"):
            raise ValueError(f"unknown chart kind {self.kind!r}")
        if self.kind == "sphere5":
            # ambient coordinates, acting torus of rank three
            object.__setattr__(self, "k", 0)
            object.__setattr__(self, "n", 3)

    @property
    def dim(self):
        if self.kind == "sphere5":
            return 6
        if self.kind == "circle_product":
            return 1 + self.n
        return self.k + self.n

    @property
    def base_dim(self):
        if self.kind == "sphere5":
            return 2
        if self.kind == "circle_product":
            return 1
        return self.k

    @property
    def base_angular(self):
        return self.kind == "circle_product"

    @property
    def is_sphere(self):
        return self.kind == "sphere5"

    def base(self, p):
        """Coordinates of the underlying base point."""
        p = np.asarray(p, dtype=float)
        if self.kind == "sphere5":
            return base_projection_pi(p)
        if self.kind == "circle_product":
            return p[..., :1]
        return p[..., : self.k]

    def fiber_angles(self, p):
        p = np.asarray(p, dtype=float)
        if self.kind == "sphere5":
            return sphere_phases(p)
        if self.kind == "circle_product":
            return p[..., 1:]
        return p[..., self.k:]

    def act(self, lam, p):
        """Torus action on the chart (rotation on S^5, fiber translation else)."""
        p = np.asarray(p, dtype=float)
        lam = np.asarray(lam, dtype=float)
        if self.kind == "sphere5":
            return torus_act_s5(lam, p)
        out = p.copy()
        nb = self.dim - self.n
        out[..., nb:] = np.mod(out[..., nb:] + lam, TWO_PI)
        return out

    def wrap(self, p):
        """Normalize a chart point: wrap angles, renormalize on the sphere."""
        p = np.asarray(p, dtype=float)
        if self.kind == "sphere5":
            return sphere_normalize(p)
        out = p.copy()
        start = 0 if self.kind == "circle_product" else self.k
        out[..., start:] = np.mod(out[..., start:], TWO_PI)
        return out

    def distance(self, p, q):
        """Chart distance: Euclidean in R^k / R^6, shortest arc on angles."""
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        if self.kind == "sphere5":
            return np.linalg.norm(p - q, axis=-1)
        start = 0 if self.kind == "circle_product" else self.k
        d_lin = p[..., :start] - q[..., :start]
        d_ang = angular_difference(p[..., start:], q[..., start:])
        return np.sqrt(
            np.sum(d_lin**2, axis=-1) + np.sum(d_ang**2, axis=-1)
        )

    def base_distance(self, b1, b2):
        b1 = np.asarray(b1, dtype=float)
        b2 = np.asarray(b2, dtype=float)
        if self.base_angular:
            return np.linalg.norm(angular_difference(b1, b2), axis=-1)
        return np.linalg.norm(b1 - b2, axis=-1)

    def displace_base(self, p, delta):
        """Move a chart point by a base displacement, keeping the fiber phase.

        On the sphere this re-embeds pi(p) + delta with the phases of p.
        """
        p = np.asarray(p, dtype=float)
        delta = np.asarray(delta, dtype=float)
        if self.kind == "sphere5":
            return embed_s5(base_projection_pi(p) + delta, sphere_phases(p))
        out = p.copy()
        nb = self.base_dim
        out[..., :nb] = out[..., :nb] + delta
        return out

    def base_tangent(self, p, v):
        """Push a chart tangent vector down to the base (d(pi) on the sphere)."""
        p = np.asarray(p, dtype=float)
        v = np.asarray(v, dtype=float)
        if self.kind == "sphere5":
            return np.stack(
                [
                    2 * (p[..., 0] * v[..., 0] + p[..., 1] * v[..., 1]),
                    2 * (p[..., 2] * v[..., 2] + p[..., 3] * v[..., 3]),
                ],
                axis=-1,
            )
        return v[..., : self.base_dim]
