"""Monte Carlo engine for first exits of X_t = W_{S_t} from a domain.

Paths are simulated in vectorised blocks.  Each block draws from its own RNG
stream keyed by (seed, stream, block index), and per-block statistics are merged
in block order, so results do not depend on the number of worker threads.

Steps adapt to the local scale: a path at distance delta from the boundary
uses dt_i = clip(adapt / Phi(delta), dt_min, dt), where Phi is the Pruitt
function of X, i.e. the inverse of the natural time scale for leaving a ball
of radius delta.  Continuous crossings inside a step are caught with the
half-space Brownian-bridge estimate, applied to the Gaussian part of the step
only.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import geometry, levy_core
from .subordination import IncrementSampler, ProcessSpec, to_levy_triple


class SamplerError(ValueError):
    pass


class CensoringError(RuntimeError):
    """More than the allowed fraction of paths hit max_steps."""


CENSOR_BUDGET = 1e-3


@dataclass(frozen=True)
class PathConfig:
    dt: float = 1e-3  # largest time step
    max_steps: int = 200_000
    bridge_correction: bool = True
    adapt: float | None = 0.1  # None disables adaptive steps
    dt_min: float | None = None  # default dt * 1e-4
    seed: int = 0
    block_size: int = 4096
    workers: int = 1
    jump_exit_factor: float = 6.0

    def __post_init__(self):
        if not self.dt > 0:
            raise SamplerError("dt must be positive")
        if self.max_steps < 1 or self.block_size < 1 or self.workers < 1:
            raise SamplerError("max_steps, block_size and workers must be positive")
        if self.dt_min is not None and not 0 < self.dt_min <= self.dt:
            raise SamplerError("need 0 < dt_min <= dt")

    @property
    def min_step(self) -> float:
        return self.dt * 1e-4 if self.dt_min is None else self.dt_min

    def scaled(self, **kw) -> "PathConfig":
        return PathConfig(**{**asdict(self), **kw})


@dataclass
class ExitRecord:
    exit_time: float
    exit_position: np.ndarray
    exited_by_jump: bool
    censored: bool
    bridged: bool = False  # mid-step continuous exit, position projected
    occupation: np.ndarray | None = None


@dataclass(frozen=True)
class Estimate:
    mean: float
    stderr: float
    n: int
    censored_frac: float = 0.0

    def __post_init__(self):
        if self.n < 1:
            raise SamplerError("an estimate needs n >= 1")

    def ci(self, k: float = 3.0):
        return self.mean - k * self.stderr, self.mean + k * self.stderr

    def to_json(self):
        return asdict(self)


# ---------------------------------------------------------------------------
# streaming statistics


@dataclass
class Welford:
    """Count, mean and centred second moment for a vector of statistics."""

    n: int
    mean: np.ndarray
    m2: np.ndarray

    @classmethod
    def empty(cls, k: int) -> "Welford":
        return cls(0, np.zeros(k), np.zeros(k))

    @classmethod
    def of(cls, values: np.ndarray) -> "Welford":
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        n = values.shape[0]
        if n == 0:
            return cls.empty(values.shape[1])
        mean = values.mean(axis=0)
        return cls(n, mean, ((values - mean) ** 2).sum(axis=0))

    def merge(self, other: "Welford") -> "Welford":
        if other.n == 0:
            return self
        if self.n == 0:
            return other
        n = self.n + other.n
        delta = other.mean - self.mean
        mean = self.mean + delta * (other.n / n)
        m2 = self.m2 + other.m2 + delta**2 * (self.n * other.n / n)
        return Welford(n, mean, m2)

    def stderr(self) -> np.ndarray:
        if self.n < 2:
            return np.full_like(self.mean, np.inf)
        return np.sqrt(self.m2 / (self.n - 1) / self.n)

    def estimate(self, k: int = 0, censored_frac: float = 0.0, scale: float = 1.0) -> Estimate:
        return Estimate(float(self.mean[k] * scale), float(self.stderr()[k] * scale), self.n, censored_frac)


# ---------------------------------------------------------------------------
# local time scale


class LocalClock:
    """Interpolated Pruitt function r -> Phi(r) of the process (log-log)."""

    def __init__(self, proc: ProcessSpec, r_min: float = 1e-9, r_max: float = 1e5, n: int = 241):
        triple = to_levy_triple(proc)
        self.log_r = np.linspace(math.log(r_min), math.log(r_max), n)
        self.log_phi = np.log([levy_core.pruitt_phi(triple, math.exp(v)) for v in self.log_r])

    def phi(self, r):
        r = np.maximum(np.asarray(r, dtype=float), 1e-300)
        return np.exp(_interp_extrap(np.log(r), self.log_r, self.log_phi))


def _interp_extrap(x, xp, fp):
    y = np.interp(x, xp, fp)
    lo, hi = x < xp[0], x > xp[-1]
    if lo.any():
        y[lo] = fp[0] + (x[lo] - xp[0]) * (fp[1] - fp[0]) / (xp[1] - xp[0])
    if hi.any():
        y[hi] = fp[-1] + (x[hi] - xp[-1]) * (fp[-1] - fp[-2]) / (xp[-1] - xp[-2])
    return y


_CLOCKS: dict[str, LocalClock] = {}


def _clock(proc: ProcessSpec) -> LocalClock:
    key = json.dumps(proc.to_json(), sort_keys=True) if _serialisable(proc) else str(id(proc))
    if key not in _CLOCKS:
        _CLOCKS[key] = LocalClock(proc)
    return _CLOCKS[key]


def _serialisable(proc) -> bool:
    try:
        proc.to_json()
        return True
    except ValueError:
        return False


# ---------------------------------------------------------------------------
# functionals accumulated along paths


Functional = Callable[[np.ndarray], np.ndarray]  # (n, d) -> (n, k)


def ball_occupation(centers, radii) -> Functional:
    """Indicator columns 1{|x - c_i| < r_j} for every centre and radius (centre-major)."""
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    radii = np.asarray(radii, dtype=float).ravel()

    def f(x):
        dist = np.linalg.norm(x[:, None, :] - centers[None, :, :], axis=2)  # (n, m)
        return (dist[:, :, None] < radii[None, None, :]).reshape(x.shape[0], -1).astype(float)

    f.width = centers.shape[0] * radii.size
    return f


def radial_rate(z0, table_r, table_val) -> Functional:
    """x -> g(|x - z0|) by linear interpolation of a tabulated profile."""
    z0 = np.asarray(z0, dtype=float)
    table_r = np.asarray(table_r, dtype=float)
    table_val = np.asarray(table_val, dtype=float)

    def f(x):
        return np.interp(np.linalg.norm(x - z0, axis=1), table_r, table_val)[:, None]

    f.width = 1
    return f


def _width(functional) -> int:
    return 0 if functional is None else int(getattr(functional, "width", 1))


# ---------------------------------------------------------------------------
# block engine


@dataclass
class _Block:
    tau: np.ndarray
    pos: np.ndarray
    by_jump: np.ndarray
    censored: np.ndarray
    bridged: np.ndarray
    occ: np.ndarray | None


def _nudge_outside(domain, pts, inner):
    """Push projected boundary points slightly outward until they leave the domain."""
    direction = pts - inner
    norm = np.linalg.norm(direction, axis=1, keepdims=True)
    direction = np.where(norm > 0, direction / np.where(norm > 0, norm, 1.0), 0.0)
    step = 1e-12 * np.maximum(1.0, np.abs(pts).max(axis=1, keepdims=True))
    out = pts.copy()
    for _ in range(60):
        still = domain._contains(out)
        if not still.any():
            break
        out[still] += step[still] * direction[still]
        step[still] *= 4
    return out


@dataclass(frozen=True)
class Splitting:
    """Fixed-level splitting on the distance from ``center``.

    Levels sit at |x0 - center| * ratio^k; a particle crossing a new level is
    replaced by ``factor`` independent copies carrying 1/factor of its weight.
    Expectations of additive functionals are unchanged while rare excursions
    towards distant probes are sampled far more often.  Exit statistics are
    not defined per path in this mode; only functionals are returned.
    """

    center: np.ndarray
    ratio: float = math.sqrt(2.0)
    factor: int = 2
    max_level: float = math.inf
    max_clones: int = 64

    def levels(self, x0) -> np.ndarray:
        r0 = float(np.linalg.norm(np.asarray(x0, dtype=float) - np.asarray(self.center, dtype=float)))
        if not (r0 > 0 and self.ratio > 1 and self.factor >= 2):
            raise SamplerError("splitting needs a start point away from the centre, ratio > 1 and factor >= 2")
        out, lvl = [], r0 * self.ratio
        while lvl < self.max_level and len(out) < 200:
            out.append(lvl)
            lvl *= self.ratio
        return np.array(out)


def _run_block(proc: ProcessSpec, domain, x0: np.ndarray, cfg: PathConfig, n: int, rng: np.random.Generator,
               functional: Functional | None = None, horizon: float | None = None,
               sampler: IncrementSampler | None = None, clock: LocalClock | None = None,
               splitting: Splitting | None = None) -> _Block:
    d = x0.size
    sampler = sampler or IncrementSampler(proc.subordinator, cfg.min_step)
    clock = clock or _clock(proc)
    b = proc.drift
    k = _width(functional)
    tau = np.full(n, np.nan)
    pos = np.full((n, d), np.nan)
    by_jump = np.zeros(n, dtype=bool)
    censored = np.zeros(n, dtype=bool)
    bridged = np.zeros(n, dtype=bool)
    occ = np.zeros((n, k)) if k else None
    # live particles
    X = np.tile(x0, (n, 1))
    t = np.zeros(n)
    delta = np.full(n, float(domain.dist_to_boundary(x0)))
    parent = np.arange(n)
    if splitting is not None:
        levels = splitting.levels(x0)
        center = np.asarray(splitting.center, dtype=float)
        w = np.ones(n)
        lev = np.zeros(n, dtype=np.int64)
    steps = 0
    while parent.size:
        if steps >= cfg.max_steps:
            censored[parent] = True
            tau[parent] = t
            pos[parent] = X
            break
        steps += 1
        m = parent.size
        if cfg.adapt is None:
            dti = np.full(m, cfg.dt)
        else:
            dti = np.clip(cfg.adapt / clock.phi(delta), cfg.min_step, cfg.dt)
        if horizon is not None:
            dti = np.minimum(dti, horizon - t)
        ds, _ = sampler.sample(rng, m, dti)
        xn = X + np.sqrt(2.0 * ds)[:, None] * rng.standard_normal((m, d))
        if k:
            contrib = functional(X) * dti[:, None]
            if splitting is None:
                occ[parent] += contrib
            else:
                contrib *= w[:, None]
                for c in range(k):
                    occ[:, c] += np.bincount(parent, contrib[:, c], minlength=n)
        inside = domain._contains(xn)
        dn = np.where(inside, domain._dist(xn), 0.0)
        exit_now = ~inside
        bridge = np.zeros(m, dtype=bool)
        if cfg.bridge_correction and b > 0:
            cont = np.maximum(b * dti, 1e-300)
            bridge = inside & (rng.uniform(size=m) < np.exp(-delta * dn / cont))
        tn = t + dti
        if splitting is None:
            if exit_now.any():
                idx = parent[exit_now]
                tau[idx] = tn[exit_now]
                pos[idx] = xn[exit_now]
                if b > 0:
                    disp = np.linalg.norm(xn[exit_now] - X[exit_now], axis=1)
                    by_jump[idx] = (ds[exit_now] > b * dti[exit_now]) & (
                        disp > cfg.jump_exit_factor * np.sqrt(2 * b * dti[exit_now]))
                else:
                    by_jump[idx] = True
            if bridge.any():
                idx = parent[bridge]
                # crossing time unknown: use the step midpoint; position = nearest boundary point
                tau[idx] = t[bridge] + 0.5 * dti[bridge]
                pos[idx] = _nudge_outside(domain, domain.project_to_boundary(xn[bridge]), xn[bridge])
                bridged[idx] = True
        done = exit_now | bridge
        if horizon is not None:
            reached = ~done & (tn >= horizon * (1 - 1e-12))
            if reached.any() and splitting is None:
                idx = parent[reached]
                tau[idx] = np.inf  # survived the horizon
                pos[idx] = xn[reached]
            done |= reached
        keep = ~done
        X, delta, t, parent = xn[keep], dn[keep], tn[keep], parent[keep]
        if splitting is not None:
            w, lev = w[keep], lev[keep]
            reached_lev = np.searchsorted(levels, np.linalg.norm(X - center, axis=1), side="right")
            jump = reached_lev - lev
            if np.any(jump > 0):
                copies = np.ones(parent.size, dtype=np.int64)
                up = jump > 0
                copies[up] = np.minimum(splitting.factor ** np.minimum(jump[up], 30), splitting.max_clones)
                lev = np.maximum(lev, reached_lev)
                w = w / copies
                X, delta, t, parent, w, lev = (np.repeat(v, copies, axis=0) for v in (X, delta, t, parent, w, lev))
    return _Block(tau, pos, by_jump, censored, bridged, occ)


def block_rng(seed: int, stream: Sequence[int], block: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(*stream, block))))


def stream_key(*parts) -> tuple[int, ...]:
    """Stable integer key for a named stream (e.g. experiment id, scale index)."""
    out = []
    for p in parts:
        if isinstance(p, (int, np.integer)):
            out.append(int(p))
        else:
            out.append(int.from_bytes(hashlib.sha256(str(p).encode()).digest()[:4], "little"))
    return tuple(out)


@dataclass
class ExitSummary:
    """Merged statistics of a batch of exits."""

    n: int
    tau: Welford
    censored: int
    by_jump: int
    bridged: int
    occupation: Welford | None = None
    target: Welford | None = None
    records: list[_Block] = field(default_factory=list, repr=False)

    @property
    def censored_frac(self) -> float:
        return self.censored / self.n

    def check_censoring(self, budget: float = CENSOR_BUDGET):
        if self.censored_frac > budget:
            raise CensoringError(f"censored fraction {self.censored_frac:.4g} exceeds {budget}")


def run_exits(proc: ProcessSpec, domain, x0, cfg: PathConfig, n_paths: int, *, stream: Sequence[int] = (),
              functional: Functional | None = None, target: Callable[[np.ndarray], np.ndarray] | None = None,
              horizon: float | None = None, keep_records: bool = False,
              splitting: Splitting | None = None) -> ExitSummary:
    """Simulate n_paths exits from x0 and merge statistics in block order."""
    x0 = np.asarray(x0, dtype=float).ravel()
    if x0.size != proc.dim or getattr(domain, "dim", x0.size) != x0.size:
        raise SamplerError("dimension mismatch between process, domain and start point")
    if not bool(domain.contains(x0)):
        raise SamplerError("start point must lie inside the domain")
    if n_paths < 1:
        raise SamplerError("need at least one path")
    if splitting is not None and (target is not None or functional is None):
        raise SamplerError("splitting estimates additive functionals only")
    sampler = IncrementSampler(proc.subordinator, cfg.min_step)
    clock = _clock(proc)
    sizes = [min(cfg.block_size, n_paths - s) for s in range(0, n_paths, cfg.block_size)]

    def work(i):
        rng = block_rng(cfg.seed, tuple(stream), i)
        return _run_block(proc, domain, x0, cfg, sizes[i], rng, functional, horizon, sampler, clock, splitting)

    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            blocks = list(pool.map(work, range(len(sizes))))
    else:
        blocks = [work(i) for i in range(len(sizes))]
    tau = Welford.empty(1)
    occ = Welford.empty(_width(functional)) if functional is not None else None
    tgt = Welford.empty(1) if target is not None else None
    cens = jumps = bridges = 0
    for blk in blocks:
        ok = ~blk.censored
        tau = tau.merge(Welford.of(np.where(np.isfinite(blk.tau), blk.tau, horizon if horizon else 0.0)))
        if occ is not None:
            occ = occ.merge(Welford.of(blk.occ))
        if tgt is not None:
            hit = np.zeros(blk.tau.size)
            hit[ok] = np.asarray(target(blk.pos[ok]), dtype=float) if ok.any() else 0.0
            tgt = tgt.merge(Welford.of(hit))
        cens += int(blk.censored.sum())
        jumps += int(blk.by_jump.sum())
        bridges += int(blk.bridged.sum())
    return ExitSummary(n_paths, tau, cens, jumps, bridges, occ, tgt, blocks if keep_records else [])


# ---------------------------------------------------------------------------
# public estimators


def simulate_exit(proc: ProcessSpec, domain, x0, cfg: PathConfig, rng: np.random.Generator,
                  functional: Functional | None = None) -> ExitRecord:
    x0 = np.asarray(x0, dtype=float).ravel()
    if not bool(domain.contains(x0)):
        raise SamplerError("start point must lie inside the domain")
    blk = _run_block(proc, domain, x0, cfg, 1, rng, functional)
    return ExitRecord(float(blk.tau[0]), blk.pos[0], bool(blk.by_jump[0]), bool(blk.censored[0]),
                      bool(blk.bridged[0]), None if blk.occ is None else blk.occ[0])


def estimate_mean_exit_time(proc, domain, x0, cfg: PathConfig, n_paths: int, stream=()) -> Estimate:
    s = run_exits(proc, domain, x0, cfg, n_paths, stream=stream)
    s.check_censoring()
    return s.tau.estimate(censored_frac=s.censored_frac)


def estimate_exit_distribution(proc, domain, x0, target, cfg: PathConfig, n_paths: int, stream=()) -> Estimate:
    """P_x0(X_tau in A) for a predicate ``target`` on exit positions (vectorised)."""
    s = run_exits(proc, domain, x0, cfg, n_paths, stream=stream, target=target)
    s.check_censoring()
    return s.target.estimate(censored_frac=s.censored_frac)


@dataclass(frozen=True)
class GreenEstimate:
    value: Estimate  # bandwidth h_b
    wide: Estimate  # bandwidth 2 h_b

    @property
    def bandwidth_sensitivity(self) -> float:
        return self.wide.mean / self.value.mean - 1.0 if self.value.mean > 0 else math.inf


def ball_volume(d: int, r: float) -> float:
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1) * r**d


def check_probe(domain, x0, y, h_b):
    y = np.asarray(y, dtype=float)
    if not h_b > 0:
        raise SamplerError("bandwidth must be positive")
    if not bool(domain.contains(y)) or float(domain.dist_to_boundary(y)) <= 2 * h_b:
        raise SamplerError("probe must lie inside the domain at distance > 2 h_b from the boundary")
    if np.linalg.norm(np.asarray(x0, dtype=float) - y) <= 2 * h_b:
        raise SamplerError("probe must be separated from the start point by more than 2 h_b")


def estimate_green(proc, domain, x0, y, h_b: float, cfg: PathConfig, n_paths: int, stream=()) -> GreenEstimate:
    """G_D(x0, y) as expected occupation time of B(y, h) divided by its volume, h in {h_b, 2 h_b}."""
    check_probe(domain, x0, y, h_b)
    d = proc.dim
    s = run_exits(proc, domain, x0, cfg, n_paths, stream=stream, functional=ball_occupation([y], [h_b, 2 * h_b]))
    s.check_censoring()
    return GreenEstimate(s.occupation.estimate(0, s.censored_frac, 1 / ball_volume(d, h_b)),
                         s.occupation.estimate(1, s.censored_frac, 1 / ball_volume(d, 2 * h_b)))


def estimate_sup_tail(proc, t: float, r: float, cfg: PathConfig, n_paths: int, stream=()) -> Estimate:
    """P(sup_{s <= t} |X_s| >= r) from the origin (discrete monitoring with bridge correction)."""
    if not (t > 0 and r > 0):
        raise SamplerError("t and r must be positive")
    ball = geometry.Ball(np.zeros(proc.dim), r)
    s = run_exits(proc, ball, np.zeros(proc.dim), cfg, n_paths, stream=stream, horizon=t,
                  target=lambda p: np.ones(len(p)), keep_records=True)
    s.check_censoring()
    hits = np.concatenate([np.isfinite(b.tau) & ~b.censored for b in s.records]).astype(float)
    w = Welford.of(hits)
    return w.estimate(censored_frac=s.censored_frac)


# ---------------------------------------------------------------------------
# manifests and CSV


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_json_default)


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(f"not serialisable: {type(o).__name__}")


def run_manifest(proc: ProcessSpec, domain, cfg: PathConfig, extra: dict | None = None) -> dict:
    body = {
        "process": proc.to_json(),
        "domain": domain.to_json() if domain is not None else None,
        "config": {k: v for k, v in asdict(cfg).items() if k != "workers"},
        "seed": cfg.seed,
        **(extra or {}),
    }
    body["content_hash"] = hashlib.sha256(canonical_json(body).encode()).hexdigest()
    return body


CSV_FIELDS = ("experiment", "r", "mean", "stderr", "n", "censored_frac")


def fmt(x) -> str:
    """Floats with 17 significant digits (round-trip exact)."""
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def write_estimates_csv(path, rows) -> None:
    """rows: iterables of (experiment, r, Estimate)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_FIELDS)
        for exp, r, est in rows:
            w.writerow([exp, fmt(float(r)), fmt(est.mean), fmt(est.stderr), est.n, fmt(est.censored_frac)])
