"""Domains in R^d: balls, truncated cones, half-spaces, Lipschitz graph patches.

All membership tests use strict inequalities, so boundary points are never
inside.  ``dist_to_boundary`` returns the distance to the complement, which for
interior points is the distance to the boundary and is 0 outside.

Every domain accepts a single point of shape ``(d,)`` or a batch ``(n, d)``;
the vectorised forms are what the path sampler uses.
"""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import optimize


class GeometryError(ValueError):
    pass


def _as_points(x):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    return np.atleast_2d(x), single


def _ret(v, single):
    return v[0] if single else v


def _unit(v):
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if not np.isfinite(n) or n == 0:
        raise GeometryError("direction vector must be nonzero")
    return v / n


class Domain:
    """Base class; subclasses implement the vectorised primitives."""

    dim: int

    def contains(self, x):
        x, single = _as_points(x)
        return _ret(self._contains(x), single)

    def dist_to_boundary(self, x):
        x, single = _as_points(x)
        d = self._dist(x)
        d = np.where(self._contains(x), d, 0.0)
        return _ret(d, single)

    def project_to_boundary(self, x):
        """Nearest boundary point for interior points (approximate for graph patches)."""
        x, single = _as_points(x)
        return _ret(self._project(x), single)

    # vectorised hooks --------------------------------------------------
    def _contains(self, x):
        raise NotImplementedError

    def _dist(self, x):
        raise NotImplementedError

    def _project(self, x):
        raise NotImplementedError

    def localization_radius(self) -> float:
        return math.inf

    def bounding_box(self):
        raise GeometryError(f"{type(self).__name__} is unbounded")

    def to_json(self) -> dict:
        raise NotImplementedError

    def intersect_ball(self, center, radius) -> "Intersection":
        return Intersection(self, Ball(center, radius))


@dataclass(frozen=True, eq=False)
class Ball(Domain):
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        if not self.radius > 0:
            raise GeometryError("ball radius must be positive")

    @property
    def dim(self):
        return self.center.size

    def _contains(self, x):
        return np.linalg.norm(x - self.center, axis=1) < self.radius

    def _dist(self, x):
        return self.radius - np.linalg.norm(x - self.center, axis=1)

    def _project(self, x):
        v = x - self.center
        n = np.linalg.norm(v, axis=1, keepdims=True)
        e = np.zeros_like(v)
        e[:, -1] = 1.0
        v = np.where(n > 0, v / np.where(n > 0, n, 1.0), e)
        return self.center + self.radius * v

    def localization_radius(self):
        return self.radius

    def bounding_box(self):
        return self.center - self.radius, self.center + self.radius

    def to_json(self):
        return {"kind": "ball", "center": self.center.tolist(), "radius": self.radius}


@dataclass(frozen=True, eq=False)
class HalfSpace(Domain):
    point: np.ndarray
    normal: np.ndarray  # inward

    def __post_init__(self):
        object.__setattr__(self, "point", np.asarray(self.point, dtype=float))
        object.__setattr__(self, "normal", _unit(self.normal))

    @property
    def dim(self):
        return self.point.size

    def _dist(self, x):
        return (x - self.point) @ self.normal

    def _contains(self, x):
        return self._dist(x) > 0

    def _project(self, x):
        return x - np.outer(self._dist(x), self.normal)

    def to_json(self):
        return {"kind": "halfspace", "point": self.point.tolist(), "normal": self.normal.tolist()}


@dataclass(frozen=True, eq=False)
class TruncatedCone(Domain):
    """{x : |x - v| < R and (x - v).axis > |x - v| cos(angle)}."""

    vertex: np.ndarray
    axis: np.ndarray
    angle: float
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "vertex", np.asarray(self.vertex, dtype=float))
        axis = np.asarray(self.axis, dtype=float)
        if abs(np.linalg.norm(axis) - 1.0) > 1e-12:
            raise GeometryError("cone axis must be a unit vector")
        object.__setattr__(self, "axis", axis)
        if not 0 < self.angle < math.pi:
            raise GeometryError("cone angle must lie in (0, pi)")
        if not self.radius > 0:
            raise GeometryError("cone radius must be positive")

    @property
    def dim(self):
        return self.vertex.size

    def _polar(self, x):
        y = x - self.vertex
        rho = np.linalg.norm(y, axis=1)
        c = y @ self.axis
        with np.errstate(invalid="ignore", divide="ignore"):
            psi = np.arccos(np.clip(np.where(rho > 0, c / rho, 1.0), -1.0, 1.0))
        return y, rho, c, psi

    def _contains(self, x):
        y, rho, c, _ = self._polar(x)
        return (rho < self.radius) & (c > rho * math.cos(self.angle))

    def _lateral(self, rho, psi):
        gap = self.angle - psi
        return np.where(gap < math.pi / 2, rho * np.sin(np.clip(gap, 0, None)), rho)

    def _dist(self, x):
        _, rho, _, psi = self._polar(x)
        return np.minimum(self._lateral(rho, psi), self.radius - rho)

    def _project(self, x):
        y, rho, c, psi = self._polar(x)
        lat = self._lateral(rho, psi)
        cap = self.radius - rho
        out = np.empty_like(x)
        # direction perpendicular to the axis in the plane of (axis, y)
        perp = y - np.outer(c, self.axis)
        pn = np.linalg.norm(perp, axis=1, keepdims=True)
        fallback = np.zeros_like(perp)
        fallback[:, 0 if self.axis[0] == 0 else -1] = 1.0
        fallback -= np.outer(fallback @ self.axis, self.axis)
        fallback /= np.linalg.norm(fallback, axis=1, keepdims=True)
        perp = np.where(pn > 1e-300, perp / np.where(pn > 0, pn, 1.0), fallback)
        gen = math.cos(self.angle) * self.axis + math.sin(self.angle) * perp
        gap = self.angle - psi
        foot = np.where(gap < math.pi / 2, rho * np.cos(np.clip(gap, 0, None)), 0.0)
        lat_pt = self.vertex + foot[:, None] * gen
        with np.errstate(invalid="ignore", divide="ignore"):
            radial = np.where(rho[:, None] > 0, y / np.where(rho > 0, rho, 1.0)[:, None], self.axis)
        cap_pt = self.vertex + self.radius * radial
        use_cap = cap < lat
        out[:] = np.where(use_cap[:, None], cap_pt, lat_pt)
        return out

    def localization_radius(self):
        return self.radius

    def bounding_box(self):
        if self.dim != 2:
            return self.vertex - self.radius, self.vertex + self.radius
        # 2D: the sector spanned by axis +- angle
        ang0 = math.atan2(self.axis[1], self.axis[0])
        angs = np.linspace(ang0 - self.angle, ang0 + self.angle, 721)
        pts = np.c_[np.cos(angs), np.sin(angs)] * self.radius
        pts = np.vstack([pts, [[0.0, 0.0]]])
        # include axis-aligned extreme directions that fall inside the sector
        for k in range(4):
            a = k * math.pi / 2
            if abs((a - ang0 + math.pi) % (2 * math.pi) - math.pi) < self.angle:
                pts = np.vstack([pts, self.radius * np.array([[math.cos(a), math.sin(a)]])])
        return self.vertex + pts.min(axis=0), self.vertex + pts.max(axis=0)

    def to_json(self):
        return {
            "kind": "cone",
            "vertex": self.vertex.tolist(),
            "axis": self.axis.tolist(),
            "angle": self.angle,
            "radius": self.radius,
        }


@dataclass(frozen=True, eq=False)
class LipschitzGraphPatch(Domain):
    """Epigraph {y_d > f(y~)} in a local orthonormal frame centred at ``origin``.

    ``frame`` has the local coordinate axes as rows; its last row is the
    inward vertical.  ``f`` maps an ``(n, d-1)`` array to ``(n,)``.
    """

    origin: np.ndarray
    f: Callable[[np.ndarray], np.ndarray]
    lipschitz: float
    window: float
    frame: np.ndarray = None

    def __post_init__(self):
        origin = np.asarray(self.origin, dtype=float)
        object.__setattr__(self, "origin", origin)
        frame = np.eye(origin.size) if self.frame is None else np.asarray(self.frame, dtype=float)
        if not np.allclose(frame @ frame.T, np.eye(origin.size), atol=1e-12):
            raise GeometryError("frame must be orthonormal")
        object.__setattr__(self, "frame", frame)
        if self.lipschitz < 0 or not self.window > 0:
            raise GeometryError("need lipschitz >= 0 and window > 0")

    @property
    def dim(self):
        return self.origin.size

    def to_local(self, x):
        return (x - self.origin) @ self.frame.T

    def to_global(self, y):
        return self.origin + y @ self.frame

    def _gap(self, x):
        y = self.to_local(x)
        return y, y[:, -1] - self.f(y[:, :-1])

    def _contains(self, x):
        return self._gap(x)[1] > 0

    def _nearest(self, x):
        """Nearest graph point; golden-section search along the graph in d=2."""
        y, gap = self._gap(x)
        lo_bound = np.abs(gap) / math.sqrt(1.0 + self.lipschitz**2)
        if self.dim != 2:
            foot = y.copy()
            foot[:, -1] = self.f(y[:, :-1])
            return np.maximum(lo_bound, 0.0), foot
        t0 = y[:, 0]
        a = t0 - np.abs(gap)
        b = t0 + np.abs(gap)
        g = (math.sqrt(5) - 1) / 2

        def dist2(t):
            return (t - t0) ** 2 + (self.f(t[:, None]) - y[:, 1]) ** 2

        for _ in range(60):
            c = b - g * (b - a)
            d = a + g * (b - a)
            left = dist2(c) < dist2(d)
            b = np.where(left, d, b)
            a = np.where(left, a, c)
        t = 0.5 * (a + b)
        dist = np.sqrt(dist2(t))
        # the vertical gap is always an upper bound
        use_vert = np.abs(gap) < dist
        t = np.where(use_vert, t0, t)
        dist = np.clip(np.minimum(dist, np.abs(gap)), lo_bound, None)
        foot = np.c_[t, self.f(t[:, None])]
        return dist, foot

    def _dist(self, x):
        return self._nearest(x)[0]

    def _project(self, x):
        return self.to_global(self._nearest(x)[1])

    def localization_radius(self):
        return self.window

    def check_lipschitz(self, n_pairs=2000, rng=None, scale=None):
        """Spot-check |f(a) - f(b)| <= L |a - b| on random pairs."""
        rng = np.random.default_rng(0) if rng is None else rng
        s = self.window if scale is None else scale
        a = rng.uniform(-s, s, size=(n_pairs, self.dim - 1))
        b = rng.uniform(-s, s, size=(n_pairs, self.dim - 1))
        lhs = np.abs(self.f(a) - self.f(b))
        rhs = self.lipschitz * np.linalg.norm(a - b, axis=1)
        return bool(np.all(lhs <= rhs * (1 + 1e-12) + 1e-14))

    def to_json(self):
        raise GeometryError("graph patches carry a Python callable and cannot be serialised")


@dataclass(frozen=True, eq=False)
class Intersection(Domain):
    """D cap B(z0, r) -- the localised domains D_r(z0) used by every experiment."""

    base: Domain
    ball: Ball

    @property
    def dim(self):
        return self.base.dim

    def _contains(self, x):
        return self.base._contains(x) & self.ball._contains(x)

    def _dist(self, x):
        return np.minimum(self.base._dist(x), self.ball._dist(x))

    def _project(self, x):
        db = self.base._dist(x)
        dc = self.ball._dist(x)
        return np.where((db <= dc)[:, None], self.base._project(x), self.ball._project(x))

    def localization_radius(self):
        return min(self.base.localization_radius(), self.ball.radius)

    def bounding_box(self):
        lo, hi = self.ball.bounding_box()
        try:
            blo, bhi = self.base.bounding_box()
        except GeometryError:
            return lo, hi
        return np.maximum(lo, blo), np.minimum(hi, bhi)

    def to_json(self):
        return {"kind": "intersection", "base": self.base.to_json(), "ball": self.ball.to_json()}


# ---------------------------------------------------------------------------
# constructors and serialisation


def cone(angle: float, radius: float = 1.0, d: int = 2) -> TruncatedCone:
    """Gamma_theta(radius): vertex at 0, axis e_d."""
    axis = np.zeros(d)
    axis[-1] = 1.0
    return TruncatedCone(np.zeros(d), axis, angle, radius)


def upper_halfspace(d: int = 2) -> HalfSpace:
    n = np.zeros(d)
    n[-1] = 1.0
    return HalfSpace(np.zeros(d), n)


def domain_from_json(obj: dict) -> Domain:
    kind = obj.get("kind")
    if kind == "ball":
        return Ball(obj["center"], float(obj["radius"]))
    if kind == "halfspace":
        return HalfSpace(obj["point"], obj["normal"])
    if kind == "cone":
        if "vertex" in obj:
            return TruncatedCone(obj["vertex"], obj["axis"], float(obj["angle"]), float(obj["radius"]))
        return cone(float(obj["angle"]), float(obj.get("radius", 1.0)), int(obj.get("dim", 2)))
    if kind == "intersection":
        ball = domain_from_json(obj["ball"])
        return Intersection(domain_from_json(obj["base"]), ball)
    raise GeometryError(f"unknown domain kind {kind!r}")


def export_boundary_csv(domain: Domain, points, path) -> None:
    """Write boundary projections of ``points`` for debugging."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    proj = domain.project_to_boundary(pts)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i}" for i in range(domain.dim)] + [f"b{i}" for i in range(domain.dim)])
        for p, q in zip(pts, np.atleast_2d(proj)):
            w.writerow([repr(float(v)) for v in (*p, *q)])


# ---------------------------------------------------------------------------
# scalar queries


def critical_angle(d: int) -> float:
    """arccos(1/sqrt(d)); the cone angle at or below which the BHP fails."""
    if d < 2:
        raise GeometryError("critical angle needs d >= 2")
    return math.acos(1.0 / math.sqrt(d))


class ExponentClass(enum.Enum):
    ABOVE_TWO = "q>2"
    TWO = "q=2"
    BELOW_TWO = "q<2"


@dataclass(frozen=True)
class ConeExponent:
    cls: ExponentClass
    q: float | None  # None when only the classification is known


def cone_harmonic_exponent(d: int, angle: float) -> ConeExponent:
    """Axis decay exponent of the killed Brownian Green function near the vertex.

    Exact in d=2 (q = pi / (2 angle)); for d >= 3 only q=2 at the critical
    angle is numeric, otherwise only the side of 2 is reported.
    """
    if not 0 < angle < math.pi:
        raise GeometryError("angle must lie in (0, pi)")
    crit = critical_angle(d)
    if math.isclose(angle, crit, rel_tol=1e-12):
        cls = ExponentClass.TWO
    else:
        cls = ExponentClass.ABOVE_TWO if angle < crit else ExponentClass.BELOW_TWO
    if d == 2:
        return ConeExponent(cls, math.pi / (2 * angle))
    return ConeExponent(cls, 2.0 if cls is ExponentClass.TWO else None)


@dataclass(frozen=True)
class Corkscrew:
    point: np.ndarray
    kappa: float


def corkscrew_point(domain: Domain, z0, r: float) -> Corkscrew:
    """Interior point at distance r from z0 with dist >= kappa r."""
    z0 = np.asarray(z0, dtype=float)
    if not r > 0 or r >= domain.localization_radius():
        raise GeometryError(f"r={r} outside (0, {domain.localization_radius()})")
    if isinstance(domain, Intersection):
        domain = domain.base
    if isinstance(domain, HalfSpace):
        p = z0 + r * domain.normal
    elif isinstance(domain, TruncatedCone):
        if not np.allclose(z0, domain.vertex):
            raise GeometryError("cone corkscrew points are defined at the vertex")
        p = z0 + r * domain.axis
    elif isinstance(domain, LipschitzGraphPatch):
        kappa0 = 1.0 / (2.0 * math.sqrt(1.0 + domain.lipschitz**2))
        p = z0 + r * domain.frame[-1]
        delta = float(domain.dist_to_boundary(p))
        if delta < kappa0 * r:
            raise GeometryError("graph patch violates its declared Lipschitz constant")
        return Corkscrew(p, kappa0)
    elif isinstance(domain, Ball):
        p = z0 + r * _unit(domain.center - z0)
    else:
        raise GeometryError(f"no corkscrew rule for {type(domain).__name__}")
    delta = float(domain.dist_to_boundary(p))
    return Corkscrew(p, delta / r)


def cone_as_graph(c: TruncatedCone, window: float | None = None) -> LipschitzGraphPatch:
    """Graph representation x_d > cot(angle) |x~| of the (untruncated) cone."""
    cot = math.cos(c.angle) / math.sin(c.angle)
    d = c.dim
    # rows: an orthonormal completion of the axis, axis last
    basis = np.linalg.qr(np.c_[c.axis, np.eye(d)])[0][:, :d].T
    basis = np.vstack([basis[1:], c.axis])
    if np.linalg.det(basis) < 0:
        basis[0] *= -1

    def f(yt):
        return cot * np.linalg.norm(np.atleast_2d(yt), axis=1)

    return LipschitzGraphPatch(c.vertex, f, abs(cot), window or c.radius, basis)


def interior_cone_check(domain: Domain, z, axis, angle: float, height: float, n: int = 400, rng=None) -> bool:
    """Sample the open truncated cone at z with the given axis/angle; all samples inside?"""
    rng = np.random.default_rng(0) if rng is None else rng
    probe = TruncatedCone(np.asarray(z, float), _unit(axis), angle, height)
    d = probe.dim
    pts = []
    while sum(len(p) for p in pts) < n:
        cand = z + rng.uniform(-height, height, size=(4 * n, d))
        pts.append(cand[probe.contains(cand)])
    pts = np.vstack(pts)[:n]
    return bool(np.all(domain.contains(pts)))


def boundary_point_check(domain: Domain, p, radii=(1e-2, 1e-3, 1e-4), n: int = 200, rng=None) -> bool:
    """p is outside and every small ball about p meets the domain."""
    rng = np.random.default_rng(0) if rng is None else rng
    p = np.asarray(p, dtype=float)
    if domain.contains(p):
        return False
    for r in radii:
        v = rng.normal(size=(n, p.size))
        v *= (r * rng.uniform(size=(n, 1)) ** (1 / p.size)) / np.linalg.norm(v, axis=1, keepdims=True)
        if not np.any(domain.contains(p + v)):
            return False
    return True
