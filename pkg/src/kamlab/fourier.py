"""Truncated multi-frequency Fourier series with Taylor-polynomial action dependence.

A :class:`ShellSeries` represents a real function

    F(theta, y) = sum_k sum_j a[k, j] (y - alpha)^j exp(i <k, theta>)

on the torus T^n times an action disk about ``alpha``. Along an orbit the
angles are ``theta = omega * x``, which turns F into an almost periodic
function of x with frequency vector ``omega``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from numpy.polynomial import chebyshev as npcheb

# Bound on (points x terms) per evaluation chunk to keep memory modest.
_CHUNK_ELEMS = 2_000_000


class FrequencyMismatch(ValueError):
    pass


class DomainEscape(ValueError):
    pass


class NonMonotone(ValueError):
    pass


@dataclass(frozen=True)
class MultiIndex:
    """Sparse integer vector indexed by frequency slot."""

    entries: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        cleaned = tuple(sorted((int(i), int(v)) for i, v in self.entries if v != 0))
        if len({i for i, _ in cleaned}) != len(cleaned):
            raise ValueError("duplicate slot in multi-index")
        object.__setattr__(self, "entries", cleaned)

    @classmethod
    def from_mapping(cls, table: Mapping[int, int]) -> "MultiIndex":
        return cls(tuple(table.items()))

    @classmethod
    def from_dense(cls, k: Sequence[int], slots: Sequence[int]) -> "MultiIndex":
        return cls(tuple(zip(slots, k)))

    @property
    def support(self) -> frozenset[int]:
        return frozenset(i for i, _ in self.entries)

    @property
    def order(self) -> int:
        return sum(abs(v) for _, v in self.entries)

    def dense(self, slots: Sequence[int]) -> tuple[int, ...]:
        table = dict(self.entries)
        if not set(table) <= set(slots):
            raise FrequencyMismatch(f"slots {sorted(set(table) - set(slots))} not active")
        return tuple(table.get(s, 0) for s in slots)


@dataclass(frozen=True)
class SpatialWeight:
    """The weight [A] = 1 + sum_{i in A} log(1+|i|)^rho of a finite slot set."""

    rho: float = 3.0

    def __post_init__(self):
        if not self.rho > 2:
            raise ValueError("weight exponent must exceed 2")

    def weight_of(self, slots: Iterable[int]) -> float:
        return 1.0 + sum(math.log1p(abs(i)) ** self.rho for i in set(slots))

    def support_weight(self, k: MultiIndex) -> float:
        return self.weight_of(k.support)


def weight_of(slots: Iterable[int], w: SpatialWeight) -> float:
    return w.weight_of(slots)


def support_weight(k: MultiIndex, w: SpatialWeight) -> float:
    return w.support_weight(k)


@dataclass(frozen=True)
class NormParams:
    """Analyticity parameters of the weighted norm on D(r, s)."""

    m: float
    r: float
    s: float
    alpha_center: float = 0.0

    def __post_init__(self):
        if min(self.m, self.r, self.s) <= 0:
            raise ValueError("norm parameters must be positive")


@functools.lru_cache(maxsize=64)
def _index_grid(n: int, kmax: int) -> tuple[np.ndarray, np.ndarray]:
    """Dense integer index grid of shape (n, 2K+1, ..., 2K+1) and its |k| <= K mask."""
    axis = np.arange(-kmax, kmax + 1)
    ks = np.stack(np.meshgrid(*([axis] * n), indexing="ij"))
    mask = np.abs(ks).sum(axis=0) <= kmax
    ks.setflags(write=False)
    mask.setflags(write=False)
    return ks, mask


@functools.lru_cache(maxsize=64)
def _half_indices(n: int, kmax: int) -> tuple[np.ndarray, tuple[np.ndarray, ...]]:
    """Indices k with |k| <= K lying in the 'positive' half (first nonzero entry > 0)."""
    ks, mask = _index_grid(n, kmax)
    flat = ks.reshape(n, -1).T
    keep = []
    for row in flat:
        nz = row[row != 0]
        keep.append(nz.size > 0 and nz[0] > 0)
    keep = np.array(keep).reshape(mask.shape) & mask
    pos = np.nonzero(keep)
    return ks[(slice(None),) + pos].T.copy(), pos


def grid_size(kmax: int) -> int:
    """Angle points per slot: at least 4*K (zero-padding factor 2), kept even."""
    return max(4 * kmax + 2, 8)


def chebyshev_nodes(alpha: float, s: float, count: int) -> np.ndarray:
    j = np.arange(count)
    return alpha + s * np.cos(np.pi * (j + 0.5) / count)


class ShellSeries:
    """Real function on T^n x disk, stored as dense truncated coefficient tables.

    ``coeffs`` has shape ``(2K+1,)*n + (deg+1,)``; the entry at offset ``k+K``
    holds the Taylor coefficients in ``(y - alpha)`` of the k-th harmonic.
    Entries with ``|k| > K`` are kept at zero.
    """

    __slots__ = ("omega", "slots", "alpha", "kmax", "deg", "coeffs")

    def __init__(self, omega, alpha: float, kmax: int, deg: int = 0, coeffs=None, slots=None,
                 *, symmetrize: bool = True):
        omega = np.atleast_1d(np.asarray(omega, dtype=float))
        n = omega.size
        self.omega = omega
        self.omega.setflags(write=False)
        self.slots = tuple(range(n)) if slots is None else tuple(int(s) for s in slots)
        if len(self.slots) != n:
            raise ValueError("one slot index per frequency required")
        self.alpha = float(alpha)
        self.kmax = int(kmax)
        self.deg = int(deg)
        shape = (2 * self.kmax + 1,) * n + (self.deg + 1,)
        if coeffs is None:
            c = np.zeros(shape, dtype=complex)
        else:
            c = np.array(coeffs, dtype=complex)
            if c.shape != shape:
                raise ValueError(f"coefficient table has shape {c.shape}, expected {shape}")
            _, mask = _index_grid(n, self.kmax)
            c[~mask] = 0.0
            if symmetrize:
                c = _symmetrize(c, n)
        c.setflags(write=False)
        self.coeffs = c

    # construction helpers

    @property
    def n(self) -> int:
        return self.omega.size

    def like(self, coeffs=None, *, deg: int | None = None, symmetrize: bool = True) -> "ShellSeries":
        return ShellSeries(self.omega, self.alpha, self.kmax, self.deg if deg is None else deg,
                           coeffs, self.slots, symmetrize=symmetrize)

    def zero(self) -> "ShellSeries":
        return self.like()

    @classmethod
    def from_terms(cls, omega, alpha: float, kmax: int, deg: int,
                   terms: Mapping[Sequence[int] | MultiIndex, Sequence[complex]], slots=None) -> "ShellSeries":
        """Build from {k: [a_0, a_1, ...]}; the conjugate partner of each k is added automatically
        unless it is listed explicitly."""
        proto = cls(omega, alpha, kmax, deg, slots=slots)
        c = np.zeros_like(proto.coeffs)
        explicit = {}
        for k, poly in terms.items():
            kk = k.dense(proto.slots) if isinstance(k, MultiIndex) else tuple(int(v) for v in k)
            if sum(abs(v) for v in kk) > kmax:
                raise ValueError(f"index {kk} exceeds truncation {kmax}")
            p = np.zeros(deg + 1, dtype=complex)
            poly = np.asarray(poly, dtype=complex)
            if poly.size > deg + 1:
                raise ValueError("polynomial degree exceeds truncation")
            p[: poly.size] = poly
            explicit[kk] = p
        for kk, p in explicit.items():
            c[tuple(v + kmax for v in kk)] = p
            neg = tuple(-v for v in kk)
            if neg not in explicit:
                c[tuple(v + kmax for v in neg)] = np.conj(p)
        return proto.like(c)

    @classmethod
    def constant(cls, value: float, omega, alpha: float, kmax: int, deg: int = 0, slots=None) -> "ShellSeries":
        n = np.atleast_1d(omega).size
        return cls.from_terms(omega, alpha, kmax, deg, {(0,) * n: [value]}, slots)

    # algebra

    def _check(self, other: "ShellSeries"):
        if (self.n != other.n or not np.array_equal(self.omega, other.omega)
                or self.slots != other.slots):
            raise FrequencyMismatch("series carry different frequency vectors")
        if self.alpha != other.alpha:
            raise FrequencyMismatch("series are expanded about different action centers")
        if self.kmax != other.kmax:
            raise FrequencyMismatch("series use different truncations")

    def _aligned(self, other: "ShellSeries") -> tuple[np.ndarray, np.ndarray, int]:
        self._check(other)
        deg = max(self.deg, other.deg)
        return _pad_deg(self.coeffs, deg), _pad_deg(other.coeffs, deg), deg

    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = self.constant_like(other)
        a, b, deg = self._aligned(other)
        return self.like(a + b, deg=deg, symmetrize=False)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, (int, float)):
            other = self.constant_like(other)
        a, b, deg = self._aligned(other)
        return self.like(a - b, deg=deg, symmetrize=False)

    def __neg__(self):
        return self.like(-self.coeffs, symmetrize=False)

    def scale(self, factor: float) -> "ShellSeries":
        return self.like(float(factor) * self.coeffs, symmetrize=False)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return self.scale(other)
        return multiply(self, other)

    __rmul__ = __mul__

    def constant_like(self, value: float) -> "ShellSeries":
        return ShellSeries.constant(value, self.omega, self.alpha, self.kmax, 0, self.slots)

    # structure

    def mean(self) -> np.ndarray:
        """Taylor coefficients of the k = 0 term, a polynomial in (y - alpha)."""
        return self.coeffs[(self.kmax,) * self.n].copy()

    def without_mean(self) -> "ShellSeries":
        c = self.coeffs.copy()
        c[(self.kmax,) * self.n] = 0.0
        return self.like(c, symmetrize=False)

    def at_action(self, y: float) -> "ShellSeries":
        """Angle-only series F(., y)."""
        z = y - self.alpha
        c = np.polynomial.polynomial.polyval(z, np.moveaxis(self.coeffs, -1, 0))
        return self.like(c[..., None], deg=0)

    def truncate_degree(self, deg: int) -> "ShellSeries":
        return self.like(_pad_deg(self.coeffs, deg), deg=deg, symmetrize=False)

    def recentered(self, alpha: float) -> "ShellSeries":
        """Same function, Taylor coefficients re-expanded about a new center."""
        shift = alpha - self.alpha
        c = np.moveaxis(self.coeffs, -1, 0)
        out = np.zeros_like(c)
        # a_j (z + shift)^j re-expanded in z
        for j in range(self.deg + 1):
            for i in range(j + 1):
                out[i] += math.comb(j, i) * shift ** (j - i) * c[j]
        return ShellSeries(self.omega, alpha, self.kmax, self.deg, np.moveaxis(out, 0, -1), self.slots)

    def is_conjugate_symmetric(self) -> bool:
        return bool(np.array_equal(self.coeffs, _flip_conj(self.coeffs, self.n)))

    def orbit_frequencies(self) -> np.ndarray:
        """<k, omega> on the dense index grid."""
        ks, _ = _index_grid(self.n, self.kmax)
        return np.tensordot(self.omega, ks, axes=(0, 0))

    # evaluation

    def evaluate(self, x, y=None) -> np.ndarray:
        """Evaluate along the orbit (scalar/array x, theta = omega*x) or on the torus
        (x an array whose last axis has length n)."""
        x = np.asarray(x, dtype=float)
        if x.ndim >= 1 and x.shape[-1] == self.n and self.n > 1:
            theta = x
        elif self.n == 1 and x.ndim >= 1 and x.shape[-1] == 1 and x.ndim > 1:
            theta = x
        else:
            theta = x[..., None] * self.omega
        shape = theta.shape[:-1]
        yy = np.full(shape, self.alpha) if y is None else np.broadcast_to(np.asarray(y, dtype=float), shape)
        out = eval_points(self, theta.reshape(-1, self.n), yy.reshape(-1))
        return out.reshape(shape)

    def evaluate_torus(self, theta, y=None) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        shape = theta.shape[:-1]
        yy = np.full(shape, self.alpha) if y is None else np.broadcast_to(np.asarray(y, dtype=float), shape)
        return eval_points(self, theta.reshape(-1, self.n), yy.reshape(-1)).reshape(shape)

    def terms(self):
        """Iterate over (k, polynomial) for the stored nonzero harmonics."""
        ks, mask = _index_grid(self.n, self.kmax)
        for idx in zip(*np.nonzero(mask)):
            poly = self.coeffs[idx]
            if np.any(poly != 0):
                yield tuple(int(v) - self.kmax for v in idx), poly

    def __repr__(self):
        return (f"ShellSeries(n={self.n}, K={self.kmax}, deg={self.deg}, alpha={self.alpha:g}, "
                f"terms={sum(1 for _ in self.terms())})")


def _pad_deg(c: np.ndarray, deg: int) -> np.ndarray:
    cur = c.shape[-1] - 1
    if cur == deg:
        return c
    if cur > deg:
        return c[..., : deg + 1]
    pad = [(0, 0)] * (c.ndim - 1) + [(0, deg - cur)]
    return np.pad(c, pad)


def _flip_conj(c: np.ndarray, n: int) -> np.ndarray:
    return np.conj(np.flip(c, axis=tuple(range(n))))


def _symmetrize(c: np.ndarray, n: int) -> np.ndarray:
    return 0.5 * (c + _flip_conj(c, n))


def multiply(f: ShellSeries, g: ShellSeries) -> ShellSeries:
    """Product truncated to K and to the larger of the two action degrees."""
    a, b, deg = f._aligned(g)
    N = grid_size(f.kmax)
    fa = _coeffs_to_grid(a, f.n, f.kmax, N)
    gb = _coeffs_to_grid(b, f.n, f.kmax, N)
    prod = np.zeros_like(fa)
    for j in range(deg + 1):
        for i in range(j + 1):
            prod[..., j] += fa[..., i] * gb[..., j - i]
    return f.like(_grid_to_coeffs(prod, f.n, f.kmax), deg=deg)


def _coeffs_to_grid(c: np.ndarray, n: int, kmax: int, N: int) -> np.ndarray:
    """Values of each Taylor coefficient on the N^n equispaced angle grid."""
    if N < 2 * kmax + 1:
        raise ValueError("grid too coarse for truncation")
    deg1 = c.shape[-1]
    spectrum = np.zeros((N,) * n + (deg1,), dtype=complex)
    idx = np.arange(-kmax, kmax + 1) % N
    spectrum[np.ix_(*([idx] * n), np.arange(deg1))] = c
    axes = tuple(range(n))
    return np.fft.ifftn(spectrum, axes=axes) * N ** n


def _grid_to_coeffs(values: np.ndarray, n: int, kmax: int) -> np.ndarray:
    N = values.shape[0]
    axes = tuple(range(n))
    spectrum = np.fft.fftn(values, axes=axes) / N ** n
    idx = np.arange(-kmax, kmax + 1) % N
    c = spectrum[np.ix_(*([idx] * n), np.arange(values.shape[-1]))]
    _, mask = _index_grid(n, kmax)
    c[~mask] = 0.0
    return c


def angle_grid(n: int, N: int) -> np.ndarray:
    """Equispaced torus grid, shape (N,)*n + (n,)."""
    axis = 2 * np.pi * np.arange(N) / N
    return np.stack(np.meshgrid(*([axis] * n), indexing="ij"), axis=-1)


def to_grid(f: ShellSeries, N: int | None = None) -> np.ndarray:
    """Real values of each Taylor coefficient function on the torus grid."""
    N = grid_size(f.kmax) if N is None else N
    return _coeffs_to_grid(f.coeffs, f.n, f.kmax, N).real


def eval_points(f: ShellSeries, theta: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Direct summation at arbitrary points (theta: (P, n), y: (P,))."""
    return eval_many([f], theta, y)[0]


def eval_many(series: Sequence[ShellSeries], theta: np.ndarray, y: np.ndarray) -> list[np.ndarray]:
    """Evaluate several series sharing omega/K at the same points, reusing the phase table."""
    f0 = series[0]
    for s in series[1:]:
        f0._check(s)
    n, K = f0.n, f0.kmax
    ks, pos = _half_indices(n, K)
    zero = (K,) * n
    theta = np.asarray(theta, dtype=float).reshape(-1, n)
    z = np.asarray(y, dtype=float).reshape(-1) - f0.alpha
    P = theta.shape[0]
    outs = [np.empty(P) for _ in series]
    tables = [s.coeffs[pos] for s in series]  # (M, deg+1)
    means = [s.coeffs[zero] for s in series]
    M = max(len(ks), 1)
    step = max(1, _CHUNK_ELEMS // M)
    for start in range(0, P, step):
        sl = slice(start, min(P, start + step))
        phase = _phases(theta[sl], ks, K) if len(ks) else None
        for out, tab, mean, s in zip(outs, tables, means, series):
            zp = np.vander(z[sl], s.deg + 1, increasing=True)
            val = (zp @ mean).real
            if phase is not None:
                val = val + 2.0 * np.einsum("pm,pm->p", zp @ tab.T, phase).real
            out[sl] = val
    return outs


def _phases(theta: np.ndarray, ks: np.ndarray, kmax: int) -> np.ndarray:
    """exp(i <k, theta>) for all rows of ks, from per-slot power tables."""
    P, n = theta.shape
    base = np.exp(1j * theta)
    pw = np.empty((n, P, 2 * kmax + 1), dtype=complex)
    pw[:, :, kmax] = 1.0
    if kmax:
        pw[:, :, kmax + 1:] = np.cumprod(np.broadcast_to(base.T[:, :, None], (n, P, kmax)), axis=2)
        pw[:, :, :kmax] = np.conj(pw[:, :, :kmax:-1])
    out = pw[0][:, ks[:, 0] + kmax]
    for j in range(1, n):
        out *= pw[j][:, ks[:, j] + kmax]
    return out


def from_samples(values: np.ndarray, proto: ShellSeries, s: float, deg: int | None = None) -> ShellSeries:
    """Re-expand samples on (torus grid) x (Chebyshev nodes about alpha, radius s).

    ``values`` has shape (N,)*n + (M,) where the last axis runs over
    ``chebyshev_nodes(alpha, s, M)``. The fit in the action direction is
    polynomial interpolation of degree ``deg`` (default ``M - 1``).
    """
    n, K = proto.n, proto.kmax
    M = values.shape[-1]
    deg = M - 1 if deg is None else deg
    spectrum = np.fft.fftn(values.astype(complex), axes=tuple(range(n))) / values.shape[0] ** n
    idx = np.arange(-K, K + 1) % values.shape[0]
    spectrum = spectrum[np.ix_(*([idx] * n), np.arange(M))]
    nodes_z = np.cos(np.pi * (np.arange(M) + 0.5) / M)
    # interpolate in scaled variable z = (y - alpha)/s, convert to monomials, rescale
    V = npcheb.chebvander(nodes_z, deg)
    cheb = np.linalg.lstsq(V, np.moveaxis(spectrum, -1, 0).reshape(M, -1), rcond=None)[0]
    # cheb2poly trims trailing zeros, so pad every column back to deg + 1
    mono = np.zeros((deg + 1, cheb.shape[1]), dtype=complex)
    for i in range(cheb.shape[1]):
        col = npcheb.cheb2poly(cheb[:, i])
        mono[: col.size, i] = col
    mono /= (s ** np.arange(deg + 1))[:, None]
    coeffs = np.moveaxis(mono.reshape((deg + 1,) + spectrum.shape[:-1]), 0, -1)
    return proto.like(coeffs, deg=deg)


def collocation(proto: ShellSeries, s: float, n_nodes: int | None = None):
    """Grid points (theta, y) of shape (N,)*n + (M,) used by pseudo-spectral operations."""
    N = grid_size(proto.kmax)
    M = (proto.deg + 1) if n_nodes is None else n_nodes
    th = angle_grid(proto.n, N)
    nodes = chebyshev_nodes(proto.alpha, s, M)
    theta = np.broadcast_to(th[..., None, :], (N,) * proto.n + (M, proto.n))
    y = np.broadcast_to(nodes, (N,) * proto.n + (M,))
    return theta, y


# analysis

def norm(f: ShellSeries, p: NormParams, w: SpatialWeight = SpatialWeight()) -> float:
    """Weighted majorant norm sum_k (sum_j |a_kj| s^j) e^{r|k|} e^{m[supp k]}."""
    absk, suppw = _norm_tables(f.n, f.kmax, f.slots, w.rho)
    disk = np.abs(f.coeffs) @ (p.s ** np.arange(f.deg + 1))
    return float(np.sum(disk * np.exp(p.r * absk + p.m * suppw)))


@functools.lru_cache(maxsize=64)
def _norm_tables(n: int, kmax: int, slots: tuple[int, ...], rho: float):
    ks, mask = _index_grid(n, kmax)
    absk = np.abs(ks).sum(axis=0).astype(float)
    logs = np.array([math.log1p(abs(i)) ** rho for i in slots])
    suppw = 1.0 + np.tensordot(logs, (ks != 0).astype(float), axes=(0, 0))
    absk = np.where(mask, absk, 0.0)
    return absk, suppw


def support_weights(f: ShellSeries, w: SpatialWeight = SpatialWeight()) -> np.ndarray:
    return _norm_tables(f.n, f.kmax, f.slots, w.rho)[1]


def orders(f: ShellSeries) -> np.ndarray:
    return _norm_tables(f.n, f.kmax, f.slots, 3.0)[0]


def derivative(f: ShellSeries, wrt: str) -> ShellSeries:
    """Termwise derivative along the orbit time (i<k,omega>) or in the action."""
    if wrt in ("orbit-time", "time", "x"):
        factor = 1j * f.orbit_frequencies()
        return f.like(f.coeffs * factor[..., None], symmetrize=False)
    if wrt in ("action", "y"):
        if f.deg == 0:
            return f.like(np.zeros_like(f.coeffs), symmetrize=False)
        c = f.coeffs[..., 1:] * np.arange(1, f.deg + 1)
        return f.like(_pad_deg(c, f.deg), symmetrize=False)
    raise ValueError(f"unknown derivative direction {wrt!r}")


def compose_inner(F: ShellSeries, U: ShellSeries, V: ShellSeries, s: float,
                  s_source: float | None = None) -> ShellSeries:
    """F(theta + omega U, y + V) re-expanded on the collocation grid of radius s.

    ``s_source`` is the action radius on which F is trusted; shifted actions
    outside it raise :class:`DomainEscape`.
    """
    F._check(U)
    F._check(V)
    proto = F.like(deg=max(F.deg, U.deg, V.deg))
    theta, y = collocation(proto, s)
    th = theta.reshape(-1, F.n)
    yy = y.reshape(-1)
    uu, vv = eval_many([U, V], th, yy)
    ys = yy + vv
    if s_source is not None:
        excess = np.max(np.abs(ys - F.alpha)) - s_source
        if excess > 0:
            raise DomainEscape(f"shifted action leaves radius {s_source:g} by {excess:.3g}")
    vals = eval_points(F, th + uu[:, None] * F.omega, ys)
    return from_samples(vals.reshape(y.shape), proto, s)


def invert_near_identity(f: ShellSeries, beta: float, tol: float = 1e-12, max_iter: int = 200
                         ) -> ShellSeries:
    """Solve tau = beta*t + f(t) for t = tau/beta + g(tau).

    ``f`` is angle-only with frequency omega; the returned g has frequency
    omega/beta, i.e. g(tau) = G(omega*tau/beta) with G(phi) = -F(phi + omega*G(phi))/beta.
    """
    if f.deg != 0:
        raise ValueError("near-identity inversion needs an angle-only series")
    N = grid_size(f.kmax)
    theta = angle_grid(f.n, N).reshape(-1, f.n)
    slope = beta + eval_points(derivative(f, "orbit-time"), theta, np.full(len(theta), f.alpha))
    if np.min(slope) <= 0:
        raise NonMonotone("beta + f' is not positive on the sampled grid")
    G = np.zeros(len(theta))
    yy = np.full(len(theta), f.alpha)
    for _ in range(max_iter):
        G_new = -eval_points(f, theta + G[:, None] * f.omega, yy) / beta
        diff = np.max(np.abs(G_new - G))
        G = G_new
        if diff < tol:
            break
    else:
        raise NonMonotone("fixed-point iteration did not converge")
    out = ShellSeries(f.omega / beta, f.alpha, f.kmax, 0, slots=f.slots)
    coeffs = _grid_to_coeffs(G.reshape((N,) * f.n + (1,)).astype(complex), f.n, f.kmax)
    return out.like(coeffs)


# serialization

def to_dict(f: ShellSeries, rho: float = 3.0) -> dict:
    terms = []
    for k, poly in f.terms():
        terms.append({
            "k": [[slot, v] for slot, v in zip(f.slots, k) if v != 0],
            "y_poly": [[float(c.real), float(c.imag)] for c in poly],
        })
    return {
        "omega": [float(v) for v in f.omega],
        "slots": list(f.slots),
        "alpha_center": f.alpha,
        "rho": float(rho),
        "kmax": f.kmax,
        "deg": f.deg,
        "terms": terms,
    }


def from_dict(d: Mapping) -> ShellSeries:
    omega = d["omega"]
    slots = d.get("slots", list(range(len(omega))))
    proto = ShellSeries(omega, d["alpha_center"], d["kmax"], d["deg"], slots=slots)
    c = np.zeros(proto.coeffs.shape, dtype=complex)
    for term in d["terms"]:
        k = MultiIndex(tuple((int(i), int(v)) for i, v in term["k"])).dense(proto.slots)
        c[tuple(v + proto.kmax for v in k)] = [complex(re, im) for re, im in term["y_poly"]]
    return proto.like(c, symmetrize=False)
