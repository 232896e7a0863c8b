"""Approximation functions, nonresonance checks and resonant-set measure estimates."""

from __future__ import annotations

import itertools
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, optimize

from .fourier import SpatialWeight, _half_indices

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class NoAdmissibleRotation(ValueError):
    pass


class CombinatorialBudget(ValueError):
    pass


@dataclass(frozen=True)
class ApproximationFunction:
    """Delta(t) controlling how fast small divisors may decay.

    The default family is (1+t)^tau. ``normalize`` rescales it so that
    Delta(1) = 1; the unnormalized form keeps Delta(0) = 1.
    """

    tau: float = 2.0
    normalize: bool = False
    family: str = "power"
    fn: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.family == "constant":
            val = np.ones_like(t)
        elif self.family == "power":
            val = (1.0 + t) ** self.tau
            if self.normalize:
                val = val / 2.0 ** self.tau
        elif self.family == "custom":
            val = np.asarray(self.fn(t), dtype=float)
        else:
            raise ValueError(f"unknown approximation family {self.family!r}")
        return val if val.ndim else float(val)

    def log(self, t):
        return np.log(self(t))

    def check_axioms(self) -> list[str]:
        """Violations of the approximation-function axioms, each tagged with its label."""
        out = []
        t = np.geomspace(1.0, 1e8, 400)
        vals = np.asarray(self(t))
        if np.any(~np.isfinite(vals)) or np.any(vals <= 0):
            return ["(b15) Delta must be positive and finite on [1, inf)"]
        if np.any(np.diff(vals) < 0):
            out.append("(b15) Delta is not nondecreasing on [1, inf)")
        ratio = np.log(vals) / t
        if np.any(np.diff(ratio) > 1e-15 * np.abs(ratio[:-1]).max(initial=1.0)):
            out.append("(b15) log Delta(t)/t is not decreasing")
        if abs(ratio[-1]) > 1e-3:
            out.append("(b15) log Delta(t)/t does not tend to 0")
        try:
            # a poor error estimate is reported below, so the quadrature warning is redundant
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", integrate.IntegrationWarning)
                val, err = integrate.quad(lambda s: float(np.log(self(s))) / s ** 2, 1.0, np.inf, limit=200)
            if not np.isfinite(val) or err > 1e-6 * max(1.0, abs(val)):
                out.append("(b15) integral of log Delta(t)/t^2 does not converge")
        except Exception as exc:  # quadrature failure is a violation, not a crash
            out.append(f"(b15) integral of log Delta(t)/t^2 failed: {exc}")
        return out


def gamma0(delta: ApproximationFunction, rho: float) -> float:
    """sup_{t >= 0} Delta(t) exp(-rho t) by bracketing on a grid, then bounded Brent."""
    if rho <= 0:
        raise ValueError("rho must be positive")

    def phi(t):
        return np.log(delta(t)) - rho * t

    base = float(phi(0.0))
    hi = 1.0 / rho
    while phi(hi) > base - 60.0 and hi < 1e12:
        hi *= 2.0
    grid = np.concatenate([[0.0], np.geomspace(1e-9 * hi, hi, 2000)])
    vals = phi(grid)
    i = int(np.argmax(vals))
    best = float(vals[i])
    if 0 < i < len(grid) - 1:
        res = optimize.minimize_scalar(lambda t: -phi(t), bounds=(grid[i - 1], grid[i + 1]),
                                       method="bounded", options={"xatol": 1e-14})
        best = max(best, -float(res.fun))
    return math.exp(max(best, base))


@dataclass(frozen=True)
class DiophantineContext:
    """Frequency vector with the constants of both nonresonance conditions."""

    omega: tuple[float, ...]
    gamma: float = 0.05
    delta: ApproximationFunction = ApproximationFunction()
    c: float = 0.05
    kmax: int = 20
    weight: SpatialWeight = SpatialWeight()
    slots: tuple[int, ...] | None = None
    interval: tuple[float, float] | None = None

    def __post_init__(self):
        object.__setattr__(self, "omega", tuple(float(w) for w in np.atleast_1d(self.omega)))
        if self.slots is None:
            object.__setattr__(self, "slots", tuple(range(len(self.omega))))
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")

    @property
    def n(self) -> int:
        return len(self.omega)

    def with_gamma(self, gamma: float) -> "DiophantineContext":
        return DiophantineContext(self.omega, gamma, self.delta, self.c, self.kmax, self.weight,
                                  self.slots, self.interval)

    def indices(self) -> np.ndarray:
        """All k != 0 with |k| <= K, one representative of each pair {k, -k}."""
        return _half_indices(self.n, self.kmax)[0]

    def divisor_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """(k list, Delta([[k]]) * Delta(|k|)) for the representative indices."""
        ks = self.indices()
        logs = np.array([math.log1p(abs(i)) ** self.weight.rho for i in self.slots])
        supp = 1.0 + (ks != 0).astype(float) @ logs
        order = np.abs(ks).sum(axis=1).astype(float)
        return ks, np.asarray(self.delta(supp)) * np.asarray(self.delta(order))

    def c0(self, alpha_max: float) -> float:
        return max(abs(w) for w in self.omega) * abs(alpha_max) / (2 * math.pi) + 1.0


@dataclass
class FrequencyReport:
    passed: bool
    worst_margin: float
    worst_k: tuple[int, ...]
    min_divisor: float
    violations: list[tuple[int, ...]]
    rationally_independent: bool


def check_frequency(ctx: DiophantineContext, max_listed: int = 50) -> FrequencyReport:
    """|<k,omega>| >= c / (Delta([[k]]) Delta(|k|)) for 0 < |k| <= K."""
    ks, dd = ctx.divisor_bounds()
    kw = np.abs(ks @ np.asarray(ctx.omega))
    margin = kw - ctx.c / dd
    i = int(np.argmin(margin))
    bad = np.nonzero(margin < 0)[0]
    return FrequencyReport(
        passed=bool(bad.size == 0),
        worst_margin=float(margin[i]),
        worst_k=tuple(int(v) for v in ks[i]),
        min_divisor=float(kw.min()),
        violations=[tuple(int(v) for v in ks[j]) for j in bad[:max_listed]],
        rationally_independent=bool(kw.min() > 1e-12),
    )


@dataclass
class RotationReport:
    passed: bool
    margin: float
    worst_k: tuple[int, ...]
    worst_j: int
    in_interval: bool
    alpha: float
    scale: float


def _rotation_table(alphas: np.ndarray, ctx: DiophantineContext, gamma: float, alpha_max: float,
                    relative: bool = False):
    """Margins dist(<k,omega> a/2pi, j) - gamma/(Delta Delta), minimised over k, per alpha.

    With ``relative`` the margin is dist * Delta Delta - gamma instead, i.e. the
    largest passing gamma minus the requested one; the sign agrees with the
    absolute form.
    """
    ks, dd = ctx.divisor_bounds()
    kw = ks @ np.asarray(ctx.omega)
    order = np.abs(ks).sum(axis=1)
    jmax = np.ceil(ctx.c0(alpha_max) * order)
    bound = gamma / dd
    alphas = np.atleast_1d(alphas)
    best = np.full(alphas.shape, np.inf)
    arg = np.zeros(alphas.shape, dtype=int)
    jbest = np.zeros(alphas.shape, dtype=int)
    step = max(1, 2_000_000 // max(len(ks), 1))
    for start in range(0, len(alphas), step):
        sl = slice(start, start + step)
        x = np.outer(alphas[sl], kw) / (2 * math.pi)
        j = np.clip(np.rint(x), -jmax, jmax)
        m = np.abs(x - j) * dd - gamma if relative else np.abs(x - j) - bound
        idx = np.argmin(m, axis=1)
        rows = np.arange(m.shape[0])
        best[sl] = m[rows, idx]
        arg[sl] = idx
        jbest[sl] = j[rows, idx].astype(int)
    return best, ks[arg], jbest


def check_rotation(alpha: float, ctx: DiophantineContext, scale: float = 1.0,
                   gamma: float | None = None) -> RotationReport:
    """|<k,omega> (scale*alpha)/2pi - j| >= gamma/(Delta([[k]]) Delta(|k|)) for 0 < |k| <= K.

    ``scale`` multiplies alpha inside the divisor only, which is the form
    the condition takes for small-twist maps.
    """
    g = ctx.gamma if gamma is None else gamma
    a_eff = scale * alpha
    margin, kk, jj = _rotation_table(np.array([a_eff]), ctx, g, max(abs(a_eff), 1e-300))
    inside = True
    if ctx.interval is not None:
        a, b = ctx.interval
        inside = a + g <= alpha <= b - g
    return RotationReport(passed=bool(margin[0] >= 0 and inside), margin=float(margin[0]),
                          worst_k=tuple(int(v) for v in kk[0]), worst_j=int(jj[0]),
                          in_interval=inside, alpha=float(alpha), scale=float(scale))


def rotation_margins(alphas, ctx: DiophantineContext, gamma: float | None = None,
                     scale: float = 1.0, relative: bool = False) -> np.ndarray:
    g = ctx.gamma if gamma is None else gamma
    a = scale * np.asarray(alphas, dtype=float)
    return _rotation_table(a, ctx, g, float(np.max(np.abs(a))), relative)[0]


def kronecker_sequence(count: int) -> np.ndarray:
    """Additive golden-ratio recurrence in [0, 1)."""
    i = np.arange(1, count + 1, dtype=float)
    return np.mod(0.5 + i * GOLDEN, 1.0)


def find_rotation(interval: tuple[float, float], ctx: DiophantineContext, candidates: int = 10_000,
                  scale: float = 1.0) -> tuple[float, float]:
    """Best alpha among a low-discrepancy scan of [a+gamma, b-gamma]. Returns (alpha, margin).

    Candidates are ranked by the largest gamma they satisfy, which is the
    quantity the small divisors see; the returned margin is the absolute one.
    """
    a, b = interval
    lo, hi = a + ctx.gamma, b - ctx.gamma
    if hi <= lo:
        raise NoAdmissibleRotation("gamma leaves an empty admissible interval")
    alphas = lo + (hi - lo) * kronecker_sequence(candidates)
    rel = rotation_margins(alphas, ctx, scale=scale, relative=True)
    i = int(np.argmax(rel))
    if rel[i] < 0:
        raise NoAdmissibleRotation(f"no admissible rotation among {candidates} candidates")
    return float(alphas[i]), float(rotation_margins(alphas[i : i + 1], ctx, scale=scale)[0])


@dataclass(frozen=True)
class MeasureRow:
    gamma: float
    estimate: float
    ci_halfwidth: float
    n: int
    seed: int


def wilson_halfwidth(hits: int, n: int, z: float = 1.96) -> float:
    p = hits / n
    return z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / (1 + z * z / n)


def measure_resonant(ctx: DiophantineContext, interval: tuple[float, float], gammas: Sequence[float],
                     n_samples: int = 10_000, seed: int = 0, threads: int = 1,
                     shard_size: int = 1000) -> list[MeasureRow]:
    """Monte-Carlo fraction of alpha in [a+gamma, b-gamma] failing the rotation condition.

    Uniform draws are shared across gamma values (common random numbers) and
    produced in fixed shards whose seeds are spawned from the master seed, so
    the result does not depend on the thread count.
    """
    if n_samples < 1000:
        raise ValueError("at least 10^3 samples required")
    a, b = interval
    n_shards = -(-n_samples // shard_size)
    children = np.random.SeedSequence(seed).spawn(n_shards)
    sizes = [min(shard_size, n_samples - i * shard_size) for i in range(n_shards)]
    uniforms = [np.random.default_rng(ch).random(sz) for ch, sz in zip(children, sizes)]

    def shard_hits(u: np.ndarray) -> list[int]:
        hits = []
        for g in gammas:
            lo, hi = a + g, b - g
            if hi <= lo:
                raise NoAdmissibleRotation(f"gamma={g} leaves an empty interval")
            alphas = lo + (hi - lo) * u
            hits.append(int(np.sum(rotation_margins(alphas, ctx, gamma=g) < 0)) if g > 0 else 0)
        return hits

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_shard = list(pool.map(shard_hits, uniforms))
    else:
        per_shard = [shard_hits(u) for u in uniforms]
    totals = np.sum(np.array(per_shard, dtype=np.int64), axis=0)
    return [MeasureRow(float(g), float(h) / n_samples, wilson_halfwidth(int(h), n_samples), n_samples, seed)
            for g, h in zip(gammas, totals)]


def distribution_count(n: int, t: float, w: SpatialWeight, universe: Sequence[int],
                       budget: int = 5_000_000) -> int:
    """Number of n-element subsets A of the universe with [A] <= t."""
    slots = sorted(set(int(i) for i in universe))
    if n < 0 or n > len(slots):
        return 0
    if math.comb(len(slots), n) > budget:
        raise CombinatorialBudget(f"C({len(slots)}, {n}) subsets exceed the enumeration budget")
    logs = {i: math.log1p(abs(i)) ** w.rho for i in slots}
    return sum(1 for A in itertools.combinations(slots, n) if 1.0 + sum(logs[i] for i in A) <= t)
