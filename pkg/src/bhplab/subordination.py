"""Subordinators, their Laplace exponents and subordinate Brownian motion.

A subordinator S has Laplace exponent

    phi(lam) = b lam + int_0^inf (1 - e^{-lam t}) mu(t) dt,

and X_t = W_{S_t}, where W is Brownian motion generated by the Laplacian
(variance 2t per coordinate).  The jump density of X is

    j(r) = int_0^inf (4 pi t)^{-d/2} exp(-r^2 / (4t)) mu(t) dt,

which has closed forms (power law or Bessel K) for every built-in family.

Stable densities are normalised as mu(t) = alpha / Gamma(1 - alpha) t^{-1-alpha}
so that the jump part of phi is exactly lam^alpha.
"""
from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, special

from . import levy_core


class SubordinatorError(ValueError):
    pass


class ConfigError(SubordinatorError):
    pass


class JumpDensityUnderflow(RuntimeWarning):
    pass


class NoDriftWarning(RuntimeWarning):
    pass


def _stable_const(alpha):
    return alpha / math.gamma(1 - alpha)


# ---------------------------------------------------------------------------
# Lévy densities


def _check_intensity(c):
    if not (c > 0 and math.isfinite(c)):
        raise SubordinatorError("intensity must be positive and finite")


@dataclass(frozen=True)
class Stable:
    """mu(t) = c alpha / Gamma(1 - alpha) t^{-1-alpha}; jump part of phi is c lam^alpha."""

    alpha: float
    c: float = 1.0

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise SubordinatorError("stable index must lie in (0, 1)")
        _check_intensity(self.c)

    def mu(self, t):
        return self.c * _stable_const(self.alpha) * np.asarray(t, dtype=float) ** (-1 - self.alpha)

    def phi(self, lam):
        return self.c * lam**self.alpha

    def tail(self, t):
        """mu((t, inf))."""
        return self.c * np.asarray(t, dtype=float) ** (-self.alpha) / math.gamma(1 - self.alpha)

    def tail_inverse(self, y):
        return (np.asarray(y, dtype=float) * math.gamma(1 - self.alpha) / self.c) ** (-1 / self.alpha)

    def small_mean(self, eps):
        """int_0^eps t mu(t) dt."""
        a = self.alpha
        return self.c * _stable_const(a) * eps ** (1 - a) / (1 - a)

    def jump_density(self, r, d):
        a = self.alpha
        k = self.c * _stable_const(a) * 4**a * math.gamma(d / 2 + a) * math.pi ** (-d / 2)
        return k * np.asarray(r, dtype=float) ** (-d - 2 * a)

    def to_json(self):
        return {"kind": "stable", "alpha": self.alpha, "c": self.c}


@dataclass(frozen=True)
class TemperedStable:
    """mu(t) = c alpha / Gamma(1 - alpha) e^{-mt} t^{-1-alpha}; phi part c((lam + m)^alpha - m^alpha)."""

    alpha: float
    m: float
    c: float = 1.0

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise SubordinatorError("stable index must lie in (0, 1)")
        if not self.m > 0:
            raise SubordinatorError("tempering rate m must be positive")
        _check_intensity(self.c)

    def mu(self, t):
        t = np.asarray(t, dtype=float)
        return self.c * _stable_const(self.alpha) * np.exp(-self.m * t) * t ** (-1 - self.alpha)

    def phi(self, lam):
        return self.c * ((lam + self.m) ** self.alpha - self.m**self.alpha)

    def small_mean(self, eps):
        a, m = self.alpha, self.m
        # int_0^eps t^{-a} e^{-mt} dt = m^{a-1} gamma_lower(1-a, m eps)
        return self.c * _stable_const(a) * m ** (a - 1) * special.gammainc(1 - a, m * eps) * math.gamma(1 - a)

    def tail(self, t):
        a, m = self.alpha, self.m
        t = np.asarray(t, dtype=float)
        # int_t^inf s^{-1-a} e^{-ms} ds = m^a Gamma(-a, m t), via the recursion for Gamma(-a, x)
        x = m * t
        upper = (x ** (-a) * np.exp(-x) - special.gammaincc(1 - a, x) * math.gamma(1 - a)) / a
        return self.c * _stable_const(a) * m**a * upper

    def jump_density(self, r, d):
        a, m = self.alpha, self.m
        r = np.asarray(r, dtype=float)
        nu = d / 2 + a
        # int t^{-d/2-1-a} e^{-r^2/4t - m t} dt = 2 (r^2/(4m))^{-nu/2} K_nu(r sqrt m)
        k = self.c * _stable_const(a) * (4 * math.pi) ** (-d / 2) * 2
        return k * (r * r / (4 * m)) ** (-nu / 2) * special.kv(nu, r * math.sqrt(m))

    def to_json(self):
        return {"kind": "tempered", "alpha": self.alpha, "m": self.m, "c": self.c}


@dataclass(frozen=True)
class SumStable:
    """Sum of two independent stable parts: phi part c_alpha lam^alpha + c_beta lam^beta."""

    alpha: float
    beta: float
    c_alpha: float = 1.0
    c_beta: float = 1.0

    def __post_init__(self):
        self.parts

    @property
    def parts(self):
        return Stable(self.alpha, self.c_alpha), Stable(self.beta, self.c_beta)

    def mu(self, t):
        return sum(p.mu(t) for p in self.parts)

    def phi(self, lam):
        return sum(p.phi(lam) for p in self.parts)

    def tail(self, t):
        return sum(p.tail(t) for p in self.parts)

    def small_mean(self, eps):
        return sum(p.small_mean(eps) for p in self.parts)

    def jump_density(self, r, d):
        return sum(p.jump_density(r, d) for p in self.parts)

    def to_json(self):
        return {"kind": "sum-stable", "alpha": self.alpha, "beta": self.beta,
                "c_alpha": self.c_alpha, "c_beta": self.c_beta}


@dataclass(frozen=True)
class GammaDensity:
    """mu(t) = c e^{-rate t} / t, so that the jump part of phi is c log(1 + lam / rate)."""

    c: float = 1.0
    rate: float = 1.0

    def __post_init__(self):
        _check_intensity(self.c)
        _check_intensity(self.rate)

    def mu(self, t):
        t = np.asarray(t, dtype=float)
        return self.c * np.exp(-self.rate * t) / t

    def phi(self, lam):
        return self.c * math.log1p(lam / self.rate)

    def tail(self, t):
        return self.c * special.exp1(self.rate * np.asarray(t, dtype=float))

    def small_mean(self, eps):
        return -self.c * math.expm1(-self.rate * eps) / self.rate

    def jump_density(self, r, d):
        r = np.asarray(r, dtype=float)
        # int t^{-d/2-1} e^{-r^2/4t - rate t} dt = 2 (r^2/(4 rate))^{-d/4} K_{d/2}(r sqrt(rate))
        s = math.sqrt(self.rate)
        return self.c * (4 * math.pi) ** (-d / 2) * 2 * (r * r / (4 * self.rate)) ** (-d / 4) * special.kv(d / 2, r * s)

    def to_json(self):
        return {"kind": "gamma", "c": self.c, "rate": self.rate}


@dataclass(frozen=True)
class Custom:
    """Arbitrary density; phi, tails and j are obtained by quadrature."""

    density: Callable[[float], float]
    name: str = "custom"

    def mu(self, t):
        return np.vectorize(lambda s: float(self.density(s)), otypes=[float])(t)

    def to_json(self):
        raise SubordinatorError("custom densities are not serialisable")


LevyDensity = Stable | TemperedStable | SumStable | GammaDensity | Custom


@dataclass(frozen=True)
class SamplingControls:
    """Small-jump cut-off for the compound-Poisson sampler.

    ``eps=None`` selects ``eps_per_dt * dt`` for families with known tails and
    is a configuration error for custom densities.
    """

    eps: float | None = None
    eps_per_dt: float = 1e-4
    table_size: int = 4096


@dataclass(frozen=True)
class SubordinatorSpec:
    drift: float = 0.0
    levy: LevyDensity | None = None
    epsrel: float = 1e-11
    epsabs: float = 0.0
    limit: int = 400
    sampling: SamplingControls = field(default_factory=SamplingControls)

    def __post_init__(self):
        if not (self.drift >= 0 and math.isfinite(self.drift)):
            raise SubordinatorError("drift must be a finite nonnegative number")
        if self.levy is None and self.drift == 0:
            raise SubordinatorError("zero subordinator: need a drift or a Lévy density")
        if isinstance(self.levy, Custom):
            # integrability of (1 ^ t) against mu
            m = self._quad(lambda t: min(t, 1.0) * float(self.levy.density(t)), 0.0, 1.0)
            m += self._quad(lambda t: float(self.levy.density(t)), 1.0, math.inf)
            if not math.isfinite(m):
                raise SubordinatorError("int (1 ^ t) mu(t) dt is not finite")

    def _quad(self, f, a, b, points=None):
        with warnings.catch_warnings():
            warnings.simplefilter("error", integrate.IntegrationWarning)
            try:
                if b == math.inf:
                    val, _ = integrate.quad(lambda s: f(a / s) * a / (s * s), 0.0, 1.0,
                                            epsrel=self.epsrel, epsabs=self.epsabs, limit=self.limit)
                else:
                    val, _ = integrate.quad(f, a, b, epsrel=self.epsrel, epsabs=self.epsabs, limit=self.limit, points=points)
            except integrate.IntegrationWarning as exc:
                raise SubordinatorError(f"quadrature failed on [{a}, {b}]: {exc}") from exc
        return val

    def to_json(self) -> dict:
        return {"drift": self.drift, "levy": None if self.levy is None else self.levy.to_json()}


@dataclass(frozen=True)
class ProcessSpec:
    """X_t = W_{S_t} in R^dim."""

    dim: int
    subordinator: SubordinatorSpec

    def __post_init__(self):
        if self.dim < 1:
            raise SubordinatorError("dimension must be at least 1")

    @property
    def drift(self) -> float:
        return self.subordinator.drift

    def to_json(self) -> dict:
        return {"dim": self.dim, "subordinator": self.subordinator.to_json()}


# ---------------------------------------------------------------------------
# exponents


def laplace_exponent(spec: SubordinatorSpec, lam: float, method: str = "auto") -> float:
    """phi(lam); ``method='quad'`` forces quadrature against mu."""
    if not lam >= 0:
        raise SubordinatorError("lambda must be nonnegative")
    if lam == 0:
        return 0.0
    val = spec.drift * lam
    levy = spec.levy
    if levy is None:
        return val
    if method == "auto" and hasattr(levy, "phi"):
        return val + float(levy.phi(lam))
    if method not in ("auto", "quad"):
        raise SubordinatorError(f"unknown method {method!r}")
    mu = lambda t: float(levy.mu(t))
    g = lambda t: -math.expm1(-lam * t) * mu(t)
    knots = sorted({min(1.0 / lam, 1.0), 1.0})
    total = spec._quad(g, 0.0, knots[0])
    if len(knots) > 1:
        total += spec._quad(g, knots[0], knots[1])
    total += spec._quad(g, 1.0, math.inf)
    return val + total


def rescaled_exponent(spec: SubordinatorSpec, lam_scale: float, s: float) -> float:
    """phi^(lam)(s) = lam^-2 phi(lam^2 s); tends to b s as lam grows."""
    if not lam_scale > 0:
        raise SubordinatorError("scale must be positive")
    return laplace_exponent(spec, lam_scale**2 * s) / lam_scale**2


def rescale_subordinator(spec: SubordinatorSpec, lam_scale: float) -> SubordinatorSpec:
    """Spec whose exponent is phi^(lam); W_{S^(lam)} is X viewed at spatial scale 1/lam.

    Concretely X_{t} / r for time measured in units of r^2 has exponent phi^(1/r).
    """
    if not lam_scale > 0:
        raise SubordinatorError("scale must be positive")
    k = lam_scale**2
    levy = spec.levy
    if levy is None:
        new = None
    elif isinstance(levy, Stable):
        new = Stable(levy.alpha, levy.c * k ** (levy.alpha - 1))
    elif isinstance(levy, SumStable):
        new = SumStable(levy.alpha, levy.beta, levy.c_alpha * k ** (levy.alpha - 1), levy.c_beta * k ** (levy.beta - 1))
    elif isinstance(levy, TemperedStable):
        new = TemperedStable(levy.alpha, levy.m / k, levy.c * k ** (levy.alpha - 1))
    elif isinstance(levy, GammaDensity):
        new = GammaDensity(levy.c / k, levy.rate / k)
    else:
        mu = levy.density
        new = Custom(lambda t: k ** -2 * float(mu(t / k)), name=f"{levy.name}@{lam_scale:g}")
    return SubordinatorSpec(spec.drift, new, spec.epsrel, spec.epsabs, spec.limit, spec.sampling)


@dataclass(frozen=True)
class RatioCheck:
    c_small: float | None  # sup mu(t)/mu(2t) on (0, 8), None on failure
    c_shift: float | None  # sup mu(t)/mu(t+1) on (1, t_max]
    fail_small_at: float | None = None
    fail_shift_at: float | None = None

    @property
    def passed(self) -> bool:
        return self.c_small is not None and self.c_shift is not None


def _sup_ratio(f, grid, shift, cap):
    """sup of f(t)/f(shift(t)) over the grid, or the first t where it exceeds cap."""
    num = np.asarray(f(grid), dtype=float)
    den = np.asarray(f(shift(grid)), dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(den > 0, num / den, np.inf)
    bad = ~(ratio <= cap)
    if bad.any():
        return None, float(grid[np.argmax(bad)])
    return float(ratio.max()), None


def check_mu2(spec: SubordinatorSpec, t_max: float = 50.0, n: int = 4001, cap: float = 1e6) -> RatioCheck:
    """Empirical constants in mu(t) <= c mu(2t) on (0, 8) and mu(t) <= c mu(t+1) on (1, t_max]."""
    if spec.levy is None:
        raise SubordinatorError("no jump part")
    mu = spec.levy.mu
    small = np.geomspace(1e-6, 8.0, n, endpoint=False)
    shift = np.linspace(1.0, t_max, n)[1:]
    cs, fs = _sup_ratio(mu, small, lambda t: 2 * t, cap)
    ch, fh = _sup_ratio(mu, shift, lambda t: t + 1, cap)
    return RatioCheck(cs, ch, fs, fh)


def jump_density(spec: SubordinatorSpec, r, d: int, method: str = "auto"):
    """j(r) of the subordinate Brownian motion in R^d (the drift does not enter)."""
    levy = spec.levy
    if levy is None:
        raise SubordinatorError("no jump part")
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr <= 0):
        raise SubordinatorError("r must be positive")
    if method == "auto" and hasattr(levy, "jump_density"):
        out = levy.jump_density(r_arr, d)
    elif method in ("auto", "quad"):
        out = np.vectorize(lambda x: _jump_density_quad(spec, x, d), otypes=[float])(r_arr)
    else:
        raise SubordinatorError(f"unknown method {method!r}")
    out = np.nan_to_num(np.asarray(out, dtype=float), nan=0.0, posinf=np.inf)
    if np.any(out == 0.0):
        warnings.warn("jump density underflowed to 0", JumpDensityUnderflow, stacklevel=2)
    return float(out) if out.ndim == 0 else out


def _jump_density_quad(spec, r, d):
    mu = spec.levy.mu
    heat = lambda t: (4 * math.pi * t) ** (-d / 2) * math.exp(-r * r / (4 * t)) * float(mu(t))
    t0 = r * r / (2 * d + 4)  # near the maximum of the heat factor
    return spec._quad(heat, 0.0, t0) + spec._quad(heat, t0, math.inf)


@dataclass(frozen=True)
class DoublingCheck:
    c1_small: float  # sup j(r)/j(2r) on (0, 2)
    c1_shift: float  # sup j(r)/j(r+1) on (1, r_max]
    monotone: bool
    cap: float
    mu2: RatioCheck

    @property
    def passed(self) -> bool:
        return self.monotone and max(self.c1_small, self.c1_shift) <= self.cap


def check_j_doubling(spec: SubordinatorSpec, d: int, r_max: float = 30.0, n: int = 801, cap: float = 1e4) -> DoublingCheck:
    """Empirical c1 for j(2r) <= j(r) <= c1 j(2r) on (0, 2) and j(r+1) <= j(r) <= c1 j(r+1) on (1, r_max]."""
    if spec.levy is None:
        raise SubordinatorError("no jump part")
    mu2 = check_mu2(spec)
    small = np.geomspace(1e-3, 2.0, n, endpoint=False)
    big = np.linspace(1.0, r_max, n)[1:]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", JumpDensityUnderflow)
        js, js2 = jump_density(spec, small, d), jump_density(spec, 2 * small, d)
        jb, jb1 = jump_density(spec, big, d), jump_density(spec, big + 1, d)
    monotone = bool(np.all(js2 <= js) and np.all(jb1 <= jb))
    with np.errstate(divide="ignore", invalid="ignore"):
        c_small = float(np.max(js / js2))
        c_big = float(np.max(jb / jb1))
    return DoublingCheck(c_small, c_big, monotone, cap, mu2)


def _inside_fraction(d, c, rho, R):
    """Fraction of the sphere |y - x| = rho lying in B(z0, R), where |x - z0| = c."""
    if R == math.inf:
        return 1.0
    if c == 0.0:
        return 1.0 if rho < R else 0.0
    k = (R * R - c * c - rho * rho) / (2 * c * rho)  # inside iff cos(angle) < k
    if d == 1:
        return 0.5 * ((-1.0 < k) + (1.0 < k))
    kc = min(max(k, -1.0), 1.0)
    if d == 2:
        return 1.0 - math.acos(kc) / math.pi
    if d == 3:
        return 0.5 * (kc + 1.0)
    raise SubordinatorError("off-centre kernel mass implemented for d <= 3")


def jump_kernel_mass(spec: SubordinatorSpec, d: int, x, z0, r_in: float, r_out: float = math.inf) -> float:
    """N(x, A) = int_A j(|y - x|) dy for the shell A = {r_in <= |y - z0| < r_out}."""
    x = np.asarray(x, dtype=float).reshape(d)
    z0 = np.asarray(z0, dtype=float).reshape(d)
    if not 0 < r_in < r_out:
        raise SubordinatorError("need 0 < r_in < r_out")
    c = float(np.linalg.norm(x - z0))
    if r_in <= c < r_out:
        raise SubordinatorError("x must lie at positive distance from the shell")
    omega = levy_core.sphere_area(d)

    def integrand(rho):
        frac = _inside_fraction(d, c, rho, r_out) - _inside_fraction(d, c, rho, r_in)
        if frac <= 0:
            return 0.0
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", JumpDensityUnderflow)
            return omega * rho ** (d - 1) * frac * float(jump_density(spec, rho, d))

    lo = r_in - c if c < r_in else c - r_out
    hi = c + r_out if r_out < math.inf else math.inf
    knots = sorted({lo, *(k for k in (abs(r_in - c), r_in + c, abs(r_out - c), r_out + c) if lo < k < hi)})
    total = 0.0
    for a, b in zip(knots, knots[1:] + [hi]):
        if b > a:
            total += spec._quad(integrand, a, b)
    return total


# ---------------------------------------------------------------------------
# sampling


class IncrementSampler:
    """Draws subordinator increments over time steps dt (scalar or per-path array).

    Stable, sum-of-stable and gamma increments are exact.  Other densities use
    compound Poisson jumps larger than eps plus the mean of the discarded small
    jumps, so that every draw satisfies dS >= b dt.  ``dt_ref`` fixes the
    default cut-off eps = eps_per_dt * dt_ref.
    """

    def __init__(self, spec: SubordinatorSpec, dt_ref: float):
        if not dt_ref > 0:
            raise SubordinatorError("dt must be positive")
        self.spec, self.dt_ref = spec, dt_ref
        levy = spec.levy
        self.mode = "drift"
        if levy is None:
            return
        if isinstance(levy, (Stable, SumStable)):
            self.mode = "stable"
            self.parts = levy.parts if isinstance(levy, SumStable) else (levy,)
        elif isinstance(levy, GammaDensity):
            self.mode = "gamma"
        else:
            self.mode = "cpp"
            self.table = JumpTable.build(spec, dt_ref)

    def sample(self, rng: np.random.Generator, size: int | None = None, dt=None):
        """Return (dS, jump part); dS = b dt + jump part."""
        n = 1 if size is None else size
        dt = self.dt_ref if dt is None else dt
        dt = np.broadcast_to(np.asarray(dt, dtype=float), (n,))
        if self.mode == "drift":
            jumps = np.zeros(n)
        elif self.mode == "stable":
            jumps = sum((p.c * dt) ** (1 / p.alpha) * stable_variates(p.alpha, rng, n) for p in self.parts)
        elif self.mode == "gamma":
            levy = self.spec.levy
            jumps = rng.gamma(levy.c * dt, 1.0 / levy.rate)
        else:
            jumps = self.table.sample_sum(rng, n, dt)[0]
        out = self.spec.drift * dt + jumps
        return (out[0], jumps[0]) if size is None else (out, jumps)


def stable_variates(alpha: float, rng: np.random.Generator, n: int) -> np.ndarray:
    """One-sided alpha-stable with E exp(-lam S) = exp(-lam^alpha) (Kanter's representation)."""
    u = rng.uniform(0.0, math.pi, n)
    e = rng.standard_exponential(n)
    a = alpha
    return (np.sin(a * u) / np.sin(u) ** (1 / a)) * (np.sin((1 - a) * u) / e) ** ((1 - a) / a)


@dataclass
class JumpTable:
    """Inverse tail of mu restricted to (eps, inf) for compound-Poisson sampling."""

    eps: float
    rate: float  # mu((eps, inf))
    small_mean: float  # int_0^eps t mu(t) dt
    log_tail: np.ndarray  # decreasing
    log_t: np.ndarray
    exact_inverse: Callable | None = None

    @classmethod
    def build(cls, spec: SubordinatorSpec, dt: float | None = None, eps: float | None = None) -> "JumpTable":
        levy = spec.levy
        ctl = spec.sampling
        eps = eps if eps is not None else ctl.eps
        if eps is None:
            if isinstance(levy, Custom) or dt is None:
                raise ConfigError("small-jump cut-off eps must be configured for custom densities")
            eps = ctl.eps_per_dt * dt
        if isinstance(levy, Stable):
            return cls(eps, float(levy.tail(eps)), levy.small_mean(eps), np.empty(0), np.empty(0), levy.tail_inverse)
        if hasattr(levy, "tail"):
            tail = lambda t: np.asarray(levy.tail(t), dtype=float)
            small = levy.small_mean(eps)
        else:
            mu = lambda t: float(levy.mu(t))
            small = spec._quad(lambda t: t * mu(t), 0.0, eps)
            tail = None
        # tabulate log tail on a log grid until the remaining mass is negligible
        t = eps * np.geomspace(1.0, 1e12, ctl.table_size)
        if tail is not None:
            T = tail(t)
        else:
            seg = [spec._quad(lambda s: float(levy.mu(s)), a, b) for a, b in zip(t[:-1], t[1:])]
            last = spec._quad(lambda s: float(levy.mu(s)), t[-1], math.inf)
            T = np.r_[np.cumsum(np.r_[seg, last][::-1])[::-1]]
        rate = float(T[0])
        if not rate > 0:
            raise SubordinatorError("no jumps above eps")
        keep = T > rate * 1e-15
        return cls(eps, rate, small, np.log(T[keep])[::-1], np.log(t[keep])[::-1])

    def inverse_tail(self, y):
        """t with mu((t, inf)) = y for 0 < y <= rate."""
        if self.exact_inverse is not None:
            return self.exact_inverse(y)
        return np.exp(np.interp(np.log(y), self.log_tail, self.log_t))

    def jumps(self, rng, k):
        return self.inverse_tail(self.rate * (1.0 - rng.uniform(size=k)))

    def sample_sum(self, rng, n, dt):
        dt = np.broadcast_to(np.asarray(dt, dtype=float), (n,))
        counts = rng.poisson(self.rate * dt)
        total = self.small_mean * dt
        biggest = np.zeros(n)
        k = int(counts.sum())
        if k:
            sizes = self.jumps(rng, k)
            owner = np.repeat(np.arange(n), counts)
            total += np.bincount(owner, sizes, minlength=n)
            np.maximum.at(biggest, owner, sizes)
        return total, biggest


def sample_increment(spec: SubordinatorSpec, dt: float, rng: np.random.Generator, size: int | None = None):
    """dS >= b dt over a step of length dt (see :class:`IncrementSampler`)."""
    return IncrementSampler(spec, dt).sample(rng, size)[0]


@dataclass(frozen=True)
class LevelEstimate:
    x: float
    mean: float
    stderr: float
    n: int


def potential_density_estimate(spec: SubordinatorSpec, x_grid, n_paths: int, rng: np.random.Generator,
                               eps: float = 1e-4, chunk: int = 20000) -> list[LevelEstimate]:
    """Estimate u(x), the probability that S hits level x, from the jump record.

    Jumps larger than eps are simulated exactly; between them S moves at rate
    b + m_eps where m_eps is the mean rate of discarded small jumps.  A level in
    such a segment counts with weight b / (b + m_eps), the share of that motion
    due to true drift, which removes the first-order small-jump bias.
    """
    xs = np.asarray(list(x_grid), dtype=float)
    if np.any(xs <= 0):
        raise SubordinatorError("levels must be positive")
    b = spec.drift
    if spec.levy is None:
        return [LevelEstimate(float(x), 1.0, 0.0, n_paths) for x in xs]
    if b == 0:
        warnings.warn("zero drift: points are not hit, returning zeros", NoDriftWarning, stacklevel=2)
        return [LevelEstimate(float(x), 0.0, 0.0, n_paths) for x in xs]
    table = JumpTable.build(spec, eps=eps)
    speed = b + table.small_mean
    weight = b / speed
    xmax = xs.max()
    hits = np.zeros(xs.size)
    hits2 = np.zeros(xs.size)
    done = 0
    while done < n_paths:
        n = min(chunk, n_paths - done)
        s = np.zeros(n)
        crept = np.zeros((n, xs.size), dtype=bool)
        active = np.arange(n)
        while active.size:
            lo = s[active]
            hi = lo + speed * rng.standard_exponential(active.size) / table.rate
            crept[active] |= (lo[:, None] < xs) & (xs <= hi[:, None])
            s[active] = hi + table.jumps(rng, active.size)
            active = active[s[active] < xmax]
        h = crept.sum(axis=0) * weight
        hits += h
        hits2 += h * weight  # indicator squared times weight^2
        done += n
    mean = hits / n_paths
    var = np.maximum(hits2 / n_paths - mean**2, 0.0)
    se = np.sqrt(var / max(n_paths - 1, 1))
    return [LevelEstimate(float(x), float(m), float(e), n_paths) for x, m, e in zip(xs, mean, se)]


# ---------------------------------------------------------------------------
# Lévy triple of X, JSON and presets


def to_levy_triple(proc: ProcessSpec) -> levy_core.LevyTriple:
    """(A, b, nu) of X = W_S: A = 2 b I, no drift, nu(dz) = j(|z|) dz."""
    d = proc.dim
    sub = proc.subordinator
    A = 2 * sub.drift * np.eye(d)
    levy = sub.levy
    if levy is None:
        jumps = None
    elif isinstance(levy, Stable):
        jumps = levy_core.IsotropicStable(2 * levy.alpha, float(levy.jump_density(1.0, d)))
    else:
        def rho(s):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", JumpDensityUnderflow)
                return float(jump_density(sub, s, d))
        jumps = levy_core.IsotropicRadial(rho)
    return levy_core.LevyTriple(d, A, np.zeros(d), jumps)


def levy_from_json(obj: dict | None) -> LevyDensity | None:
    if obj is None:
        return None
    kind = obj.get("kind")
    if kind == "stable":
        return Stable(float(obj["alpha"]), float(obj.get("c", 1.0)))
    if kind == "tempered":
        return TemperedStable(float(obj["alpha"]), float(obj["m"]), float(obj.get("c", 1.0)))
    if kind == "sum-stable":
        return SumStable(float(obj["alpha"]), float(obj["beta"]), float(obj.get("c_alpha", 1.0)),
                         float(obj.get("c_beta", 1.0)))
    if kind == "gamma":
        return GammaDensity(float(obj.get("c", 1.0)), float(obj.get("rate", 1.0)))
    raise SubordinatorError(f"unknown Lévy density kind {kind!r}")


def subordinator_from_json(obj: dict) -> SubordinatorSpec:
    samp = obj.get("sampling") or {}
    return SubordinatorSpec(float(obj.get("drift", 0.0)), levy_from_json(obj.get("levy")), sampling=SamplingControls(**samp))


def process_from_json(obj: dict) -> ProcessSpec:
    return ProcessSpec(int(obj["dim"]), subordinator_from_json(obj["subordinator"]))


_PRESET = re.compile(r"^\s*([a-z+\-]+)\s*(?:\(([^)]*)\))?\s*$")


def preset(name: str, drift: float = 1.0) -> SubordinatorSpec:
    """Named families: 'bm+stable(a)', 'bm+stable+stable(a,b)', 'tempered(a,m)', 'bm+log', 'bm'.

    Every preset carries the given drift (default 1); use drift=0 for pure-jump versions.
    """
    m = _PRESET.match(name)
    if not m:
        raise SubordinatorError(f"bad preset {name!r}")
    key, args = m.group(1), [float(a) for a in (m.group(2) or "").split(",") if a.strip()]
    table = {
        "bm+stable": (1, lambda a: Stable(a)),
        "bm+stable+stable": (2, lambda a, b: SumStable(a, b)),
        "tempered": (2, lambda a, mm: TemperedStable(a, mm)),
        "bm+log": (0, lambda: GammaDensity()),
        "bm": (0, lambda: None),
    }
    if key not in table or len(args) != table[key][0]:
        raise SubordinatorError(f"unknown preset {name!r}")
    return SubordinatorSpec(drift, table[key][1](*args))


PRESET_NAMES = ("bm", "bm+stable(0.5)", "bm+stable+stable(0.3,0.7)", "tempered(0.5,1)", "bm+log")
