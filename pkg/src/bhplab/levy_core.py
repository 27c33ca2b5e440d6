"""Lévy triples (A, b, nu), Pruitt's function and the characteristic exponent.

Conventions follow the Lévy-Khintchine form

    psi(u) = -1/2 (u, A u) + i (b, u) + int (e^{i(u,z)} - 1 - i(u,z) 1{|z|<=1}) nu(dz),

so a Brownian motion with generator Delta has A = 2 I.

Jump measures are either isotropic stable, nu(dz) = c |z|^{-d-alpha} dz, which
is handled in closed form, or radial, nu(dz) = rho(|z|) dz, integrated by
adaptive Gauss-Kronrod on the radius.  In d = 1 a radial density may be
one-sided (supported on z > 0); that is the only source of a nonzero
truncated-drift correction.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy import integrate, special

EPSREL = 1e-10
EPSABS = 1e-13


class LevyError(ValueError):
    pass


class IntegrabilityError(LevyError):
    pass


class DegenerateTripleError(LevyError):
    """Phi vanishes identically: A = 0, no jumps and zero drift."""


class PhiDoublingViolation(AssertionError):
    pass


# ---------------------------------------------------------------------------
# jump measures


@dataclass(frozen=True)
class IsotropicStable:
    alpha: float
    c: float = 1.0

    def __post_init__(self):
        if not 0 < self.alpha < 2:
            raise LevyError("stable order must lie in (0, 2)")
        if not self.c > 0:
            raise LevyError("stable intensity must be positive")

    def density(self, s, d):
        return self.c * np.asarray(s, dtype=float) ** (-d - self.alpha)


@dataclass(frozen=True)
class IsotropicRadial:
    """nu(dz) = rho(|z|) dz; ``one_sided`` puts the mass on z > 0 (d = 1 only)."""

    rho: Callable[[float], float]
    one_sided: bool = False
    epsrel: float = EPSREL
    epsabs: float = EPSABS
    limit: int = 500
    meta: dict = field(default_factory=dict, compare=False)
    breaks: tuple = ()  # radii where rho is discontinuous; quadrature splits there

    def density(self, s, d):
        return self.rho(s)


def sphere_area(d: int) -> float:
    """Surface measure of the unit sphere S^{d-1} (2 for d = 1)."""
    return 2 * math.pi ** (d / 2) / math.gamma(d / 2)


def stable_cos_constant(d: int, alpha: float) -> float:
    """int_{R^d} (1 - cos(e.z)) |z|^{-d-alpha} dz for a unit vector e."""
    return math.pi ** (d / 2) * math.gamma(1 - alpha / 2) / (alpha * 2 ** (alpha - 1) * math.gamma((d + alpha) / 2))


# ---------------------------------------------------------------------------
# the triple


@dataclass(frozen=True, eq=False)
class LevyTriple:
    dim: int
    gaussian: np.ndarray
    drift: np.ndarray
    jumps: IsotropicStable | IsotropicRadial | None = None

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise LevyError("dimension restricted to d in {1, 2, 3}")
        A = np.array(self.gaussian, dtype=float).reshape(self.dim, self.dim)
        b = np.array(self.drift, dtype=float).reshape(self.dim)
        if not np.allclose(A, A.T, atol=1e-12):
            raise LevyError("Gaussian matrix must be symmetric")
        tr = max(np.trace(A), 0.0)
        if np.linalg.eigvalsh(A).min() < -1e-12 * max(tr, 1.0):
            raise LevyError("Gaussian matrix must be positive semi-definite")
        if isinstance(self.jumps, IsotropicRadial) and self.jumps.one_sided and self.dim != 1:
            raise LevyError("one-sided radial densities exist only in d = 1")
        A.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "gaussian", A)
        object.__setattr__(self, "drift", b)

    @property
    def omega(self) -> float:
        if isinstance(self.jumps, IsotropicRadial) and self.jumps.one_sided:
            return 1.0
        return sphere_area(self.dim)

    @property
    def is_degenerate(self) -> bool:
        return self.jumps is None and not np.any(self.gaussian) and not np.any(self.drift)

    def check_integrability(self) -> float:
        """int (1 ^ |z|^2) nu(dz); raises if not finite."""
        if self.jumps is None:
            return 0.0
        val = _radial(self, lambda s: np.minimum(s * s, 1.0), 0.0, math.inf, splits=(1.0,))
        if not np.isfinite(val):
            raise IntegrabilityError("jump measure fails int (1 ^ |z|^2) nu(dz) < inf")
        return val


def _quad(f, a, b, jm):
    inner = [p for p in getattr(jm, "breaks", ()) if a < p < b]
    if 0 < a and b < math.inf and b > 16 * a:
        # geometric panels: a narrow bump inside a long interval cannot be stepped over
        inner += list(a * 16.0 ** np.arange(1, math.ceil(math.log(b / a, 16))))
    inner = sorted(p for p in set(inner) if a < p < b)
    if inner:
        pts = [a, *sorted(inner), b]
        plain = replace(jm, breaks=())
        return sum(_quad(f, lo, hi, plain) for lo, hi in zip(pts[:-1], pts[1:]))
    kw = dict(epsrel=jm.epsrel, epsabs=jm.epsabs, limit=jm.limit) if isinstance(jm, IsotropicRadial) else {}
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            if b == math.inf:
                # s = a / t maps the tail onto (0, 1]; power tails become bounded
                if not a > 0:
                    raise LevyError("tail integrals need a positive lower limit")
                val, err = integrate.quad(lambda t: f(a / t) * a / (t * t), 0.0, 1.0, **kw)
            else:
                # QAGS extrapolation copes with the algebraic singularity at s = 0
                val, err = integrate.quad(f, a, b, **kw)
        except integrate.IntegrationWarning as exc:
            raise IntegrabilityError(f"quadrature did not converge on [{a}, {b}]: {exc}") from exc
    if not np.isfinite(val):
        raise IntegrabilityError(f"non-finite radial integral on [{a}, {b}]")
    return val


def _radial(triple: LevyTriple, g, a, b, splits=()):
    """omega * int_a^b g(s) rho(s) s^{d-1} ds, split at the given points."""
    jm = triple.jumps
    d = triple.dim
    pts = sorted({a, b, *[p for p in splits if a < p < b]})
    total = 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        total += _quad(lambda s: g(s) * float(jm.density(s, d)) * s ** (d - 1), lo, hi, jm)
    return triple.omega * total


# ---------------------------------------------------------------------------
# operations


def truncated_drift(triple: LevyTriple, r: float) -> np.ndarray:
    """b~_r = b - 1{r<=1} int_{r<|z|<=1} z nu(dz) + 1{r>1} int_{1<|z|<=r} z nu(dz)."""
    if not r > 0:
        raise LevyError("r must be positive")
    b = np.array(triple.drift, dtype=float)
    jm = triple.jumps
    if jm is None or not (isinstance(jm, IsotropicRadial) and jm.one_sided):
        # rotation symmetry: the correction vanishes identically
        return b
    lo, hi = (r, 1.0) if r <= 1 else (1.0, r)
    if lo == hi:
        return b
    first_moment = _quad(lambda s: s * float(jm.rho(s)), lo, hi, jm)
    return b - first_moment if r <= 1 else b + first_moment


def pruitt_components(triple: LevyTriple, r: float):
    """(K, G, L): Gaussian plus small-jump second moment, big-jump mass, drift term."""
    if not r > 0:
        raise LevyError("r must be positive")
    trace = float(np.trace(triple.gaussian))
    jm = triple.jumps
    if jm is None:
        small = big = 0.0
    elif isinstance(jm, IsotropicStable):
        w = sphere_area(triple.dim) * jm.c * r ** (-jm.alpha)
        small = w / (2 - jm.alpha) * r * r
        big = w / jm.alpha
    else:
        small = _radial(triple, lambda s: s * s, 0.0, r, splits=(1.0,))
        big = _radial(triple, lambda s: 1.0, r, math.inf, splits=(1.0,))
    K = (trace + small) / (r * r)
    L = float(np.linalg.norm(truncated_drift(triple, r))) / r
    return K, big, L


def pruitt_phi(triple: LevyTriple, r: float) -> float:
    """Phi(r) = r^-2 tr A + int (|z|^2/r^2 ^ 1) nu(dz) + |b~_r| / r."""
    if not r > 0:
        raise LevyError("r must be positive")
    if triple.is_degenerate:
        return 0.0
    jm = triple.jumps
    if jm is None:
        jump = 0.0
    elif isinstance(jm, IsotropicStable):
        jump = sphere_area(triple.dim) * jm.c * r ** (-jm.alpha) * (1 / (2 - jm.alpha) + 1 / jm.alpha)
    else:
        # split at r and at 1 so the kink and the drift cut-off are both nodes
        jump = _radial(triple, lambda s: min(s * s / (r * r), 1.0), 0.0, math.inf, splits=(r, 1.0))
    return float(np.trace(triple.gaussian)) / (r * r) + jump + float(np.linalg.norm(truncated_drift(triple, r))) / r


def require_nondegenerate(triple: LevyTriple) -> None:
    if triple.is_degenerate:
        raise DegenerateTripleError("Phi is identically 0; exit-time bounds are void")


@dataclass(frozen=True)
class DoublingReport:
    r: np.ndarray
    ratios: np.ndarray  # Phi(2r)/Phi(r)
    min_ratio: float
    max_ratio: float


def check_phi_doubling(triple: LevyTriple, r_grid) -> DoublingReport:
    """Assert Phi(r)/16 <= Phi(2r) <= 3 Phi(r) on the grid; report Phi(2r)/Phi(r)."""
    r_grid = np.asarray(list(r_grid), dtype=float)
    if r_grid.size == 0:
        raise LevyError("empty r grid")
    require_nondegenerate(triple)
    cache: dict[float, float] = {}

    def phi(r):
        if r not in cache:
            cache[r] = pruitt_phi(triple, r)
        return cache[r]

    ratios = np.empty(r_grid.size)
    for k, r in enumerate(r_grid):
        p1, p2 = phi(float(r)), phi(float(2 * r))
        ratios[k] = p2 / p1
        if not (p1 / 16 * (1 - 1e-9) <= p2 <= 3 * p1 * (1 + 1e-9)):
            raise PhiDoublingViolation(f"Phi doubling violated at r={r}: Phi(2r)/Phi(r)={p2 / p1}")
    return DoublingReport(r_grid, ratios, float(ratios.min()), float(ratios.max()))


def _cos_avg_minus_one(d, x: float) -> float:
    """(average of cos(e.z) over |z| = s) - 1 with x = |u| s, free of cancellation."""
    if x < 0.05:
        x2 = x * x
        return -x2 / (2 * d) + x2 * x2 / (8 * d * (d + 2)) - x2**3 / (48 * d * (d + 2) * (d + 4))
    if d == 1:
        return -2.0 * math.sin(x / 2) ** 2
    if d == 2:
        return float(special.j0(x)) - 1.0
    return math.sin(x) / x - 1.0


def _oscillatory_real(triple: LevyTriple, k: float) -> float:
    """omega * int (avg_cos(k s) - 1) rho(s) s^{d-1} ds for an isotropic radial measure."""
    jm = triple.jumps
    d = triple.dim
    w = lambda s: float(jm.rho(s)) * s ** (d - 1)
    s1 = 1.0 / k
    # near zero the integrand behaves like -k^2 s^2 / (2d) w(s): log substitution
    head = _quad(lambda s: _cos_avg_minus_one(d, k * s) * float(jm.rho(s)) * s ** (d - 1), 0.0, s1, jm)
    tail_mass = _quad(lambda s: w(s), s1, math.inf, jm)
    if d == 1:
        osc, _ = integrate.quad(w, s1, math.inf, weight="cos", wvar=k, limlst=200)
    elif d == 3:
        osc, _ = integrate.quad(lambda s: w(s) / (k * s), s1, math.inf, weight="sin", wvar=k, limlst=200)
    else:
        # integrate between zeros of J0 and average successive partial sums
        zeros = special.jn_zeros(0, 4000) / k
        zeros = zeros[zeros > s1]
        edges = np.r_[s1, zeros]
        partial, sums = 0.0, []
        for lo, hi in zip(edges[:-1], edges[1:]):
            partial += integrate.quad(lambda s: float(special.j0(k * s)) * w(s), lo, hi, limit=100)[0]
            sums.append(partial)
            if len(sums) > 8 and abs(sums[-1] - sums[-2]) < 1e-13 * max(1.0, abs(partial)):
                break
        osc = 0.5 * (sums[-1] + sums[-2]) if len(sums) > 1 else partial
    return triple.omega * (head - tail_mass + osc)


def char_exponent(triple: LevyTriple, u) -> complex:
    """psi(u) from the Lévy-Khintchine formula."""
    u = np.asarray(u, dtype=float).reshape(triple.dim)
    if not np.all(np.isfinite(u)):
        raise LevyError("u must be finite")
    val = complex(-0.5 * u @ triple.gaussian @ u, float(triple.drift @ u))
    k = float(np.linalg.norm(u))
    jm = triple.jumps
    if jm is None or k == 0.0:
        return val
    if isinstance(jm, IsotropicStable):
        return val - jm.c * stable_cos_constant(triple.dim, jm.alpha) * k**jm.alpha
    if jm.one_sided:
        re = _oscillatory_real(triple, k)
        u1 = float(u[0])
        sgn = math.copysign(1.0, u1)
        im_small = _quad(lambda s: (math.sin(k * s) - k * s) * float(jm.rho(s)), 0.0, 1.0, jm)
        im_tail, _ = integrate.quad(lambda s: float(jm.rho(s)), 1.0, math.inf, weight="sin", wvar=k, limlst=200)
        return val + complex(re, sgn * (im_small + im_tail))
    return val + _oscillatory_real(triple, k)


@dataclass(frozen=True)
class HartmanWintnerReport:
    xi: np.ndarray
    ratios: np.ndarray  # |Re psi(xi)| / ln(1 + |xi|)
    verdict: str  # "increasing" or "fails"
    note: str = "finite-grid evidence for a limit statement, not a proof"


def check_hartman_wintner(triple: LevyTriple, xi_magnitudes) -> HartmanWintnerReport:
    xi = np.asarray(list(xi_magnitudes), dtype=float)
    if np.any(np.diff(xi) <= 0):
        raise LevyError("magnitudes must be increasing")
    e = np.zeros(triple.dim)
    e[0] = 1.0
    ratios = np.array([abs(char_exponent(triple, x * e).real) / math.log1p(x) for x in xi])
    growing = bool(np.all(np.diff(ratios) > 0))
    return HartmanWintnerReport(xi, ratios, "increasing" if growing else "fails")


# ---------------------------------------------------------------------------
# JSON


RADIAL_FAMILIES: dict[str, Callable[..., Callable[[float], float]]] = {
    # c s^{-d-alpha} e^{-lam s}: tempered stable in any dimension
    "tempered": lambda d, c, alpha, lam: (lambda s: c * s ** (-d - alpha) * math.exp(-lam * s)),
    # c s^{-d-alpha} 1{s <= cutoff}: truncated stable
    "truncated": lambda d, c, alpha, cutoff: (lambda s: c * s ** (-d - alpha) if s <= cutoff else 0.0),
    # c exp(-s^2 / scale^2): finite measure (compound Poisson)
    "gaussian": lambda d, c, scale: (lambda s: c * math.exp(-(s / scale) ** 2)),
}


def radial_family(name: str, d: int, one_sided: bool = False, **params) -> IsotropicRadial:
    if name not in RADIAL_FAMILIES:
        raise LevyError(f"unknown radial family {name!r}")
    rho = RADIAL_FAMILIES[name](d, **params)
    breaks = (float(params["cutoff"]),) if name == "truncated" else ()
    return IsotropicRadial(rho, one_sided=one_sided, meta={"family": name, "params": params}, breaks=breaks)


def triple_to_json(triple: LevyTriple) -> dict:
    jm = triple.jumps
    if jm is None:
        jobj = {"kind": "none"}
    elif isinstance(jm, IsotropicStable):
        jobj = {"kind": "stable", "alpha": jm.alpha, "c": jm.c}
    elif "family" in jm.meta:
        jobj = {"kind": "radial", "family": jm.meta["family"], "one_sided": jm.one_sided, **jm.meta["params"]}
    else:
        raise LevyError("only named radial families are serialisable")
    return {
        "dim": triple.dim,
        "gaussian": triple.gaussian.tolist(),
        "drift": triple.drift.tolist(),
        "jumps": jobj,
    }


def triple_from_json(obj: dict) -> LevyTriple:
    d = int(obj["dim"])
    j = obj.get("jumps") or {"kind": "none"}
    kind = j.get("kind", "none")
    if kind == "none":
        jumps = None
    elif kind == "stable":
        jumps = IsotropicStable(float(j["alpha"]), float(j.get("c", 1.0)))
    elif kind == "radial":
        params = {k: v for k, v in j.items() if k not in ("kind", "family", "one_sided")}
        jumps = radial_family(j["family"], d, bool(j.get("one_sided", False)), **params)
    else:
        raise LevyError(f"unknown jump kind {kind!r}")
    return LevyTriple(d, obj.get("gaussian", np.zeros((d, d))), obj.get("drift", np.zeros(d)), jumps)


def brownian_triple(d: int, drift=None) -> LevyTriple:
    """Brownian motion with generator Delta (A = 2 I)."""
    return LevyTriple(d, 2 * np.eye(d), np.zeros(d) if drift is None else drift, None)
