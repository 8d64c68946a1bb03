"""Monte Carlo for M: the stick-breaking estimator of its cdf, the Donsker
sampler of M, and simulated bridges with their least concave majorants.

Random streams: replication work is cut into chunks of ``CHUNK`` draws and
chunk ``i`` is generated by ``PCG64(SeedSequence(seed, spawn_key=(i,)))``.
Chunks are reduced in index order, so output depends on (seed, plan) only and
never on the number of threads.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from statistics import NormalDist
from typing import Callable

import mpmath
import numpy as np

from .errors import DomainError
from .specfun import f3_cdf_array

__all__ = [
    "CHUNK",
    "McPlan",
    "McSample",
    "StickLengths",
    "McEstimate",
    "BridgePath",
    "chunk_rng",
    "j0_bound",
    "sample_sticks",
    "sticks_from_uniforms",
    "mc_cdf",
    "vn_from_sorted",
    "sample_vn",
    "sample_vn_batch",
    "sample_m",
    "sample_m_batch",
    "mc_sample",
    "brownian_bridge",
    "concave_majorant",
    "simulate_bridge_majorant",
]

CHUNK = 2048
# rows x N uniforms generated at once by the V_N sampler
_BLOCK = 1 << 21


@dataclass(frozen=True)
class McPlan:
    J: int
    C: int
    N: int = 1
    seed: int = 0
    chunk: int = CHUNK

    def __post_init__(self):
        for name in ("J", "C", "N", "chunk"):
            if getattr(self, name) < 1:
                raise DomainError(f"{name} must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise DomainError("seed must be a 64-bit unsigned integer")

    @property
    def streams(self) -> int:
        return -(-self.C // self.chunk)

    def chunk_sizes(self) -> list[int]:
        full, rest = divmod(self.C, self.chunk)
        return [self.chunk] * full + ([rest] if rest else [])


@dataclass(frozen=True)
class StickLengths:
    lengths: np.ndarray

    @property
    def total(self) -> float:
        return float(self.lengths.sum())


@dataclass(frozen=True)
class McEstimate:
    x: float
    estimate: float
    ci_low: float
    ci_high: float
    C: int
    J: int
    eps: float
    alpha: float
    std_error: float


@dataclass(frozen=True)
class McSample:
    draws: np.ndarray
    plan: McPlan


@dataclass(frozen=True)
class BridgePath:
    grid: np.ndarray
    values: np.ndarray
    majorant: np.ndarray
    max_gap: float
    argmax: int = 0


def chunk_rng(seed: int, index: int) -> np.random.Generator:
    """Generator for chunk ``index`` of a run seeded with ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


def _threads(threads: int | None) -> int:
    if threads is None:
        env = os.environ.get("BM_THREADS")
        threads = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(threads))


def _run_chunks(plan: McPlan, work: Callable[[np.random.Generator, int], np.ndarray], threads: int | None) -> np.ndarray:
    sizes = plan.chunk_sizes()

    def one(i):
        return work(chunk_rng(plan.seed, i), sizes[i])

    n = _threads(threads)
    if n > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=n) as pool:
            parts = list(pool.map(one, range(len(sizes))))
    else:
        parts = [one(i) for i in range(len(sizes))]
    return np.concatenate(parts)


# -- stick breaking ------------------------------------------------------------

def j0_bound(x: float, eps: float) -> int:
    """Stick count J0 = floor(-log2(x^2 eps^2 / 2)) + 1 for a bias below eps."""
    if not x > 0:
        raise DomainError("x must be positive")
    if not 0 < eps < 0.25:
        raise DomainError("eps must lie in (0, 1/4)")
    with mpmath.workprec(256):
        x, eps = mpmath.mpf(x), mpmath.mpf(eps)
        return int(mpmath.floor(-mpmath.log(x * x * eps * eps / 2) / mpmath.ln2)) + 1


def sticks_from_uniforms(u) -> np.ndarray:
    """L_j = U_j prod_{i<j} (1 - U_i), along the last axis."""
    u = np.asarray(u, dtype=float)
    rest = np.cumprod(1.0 - u, axis=-1)
    before = np.concatenate([np.ones_like(rest[..., :1]), rest[..., :-1]], axis=-1)
    return u * before


def sample_sticks(J: int, rng: np.random.Generator) -> StickLengths:
    if J < 1:
        raise DomainError("J must be at least 1")
    return StickLengths(sticks_from_uniforms(rng.random(J)))


# -- estimator 1: E prod F3(x / sqrt(L_j)) ---------------------------------------

def mc_cdf(
    x: float,
    eps: float = 1e-3,
    C: int = 10**5,
    alpha: float = 0.05,
    seed: int = 0,
    *,
    J: int | None = None,
    threads: int | None = None,
) -> McEstimate:
    """Estimate P(M <= x) from C stick-breaking replications.

    The interval is [F - 2 eps - z/sqrt(C), F + z/sqrt(C)] with the
    replication variance bounded by one; the lower side also carries the
    bias of truncating at J = j0_bound(x, eps) sticks.
    """
    if not x > 0:
        raise DomainError("x must be positive")
    if not 0 < alpha < 1:
        raise DomainError("alpha must lie in (0, 1)")
    J = j0_bound(x, eps) if J is None else J
    plan = McPlan(J=J, C=C, seed=seed)
    tol = eps / (10 * J)

    def work(rng, size):
        sticks = sticks_from_uniforms(rng.random((size, J)))
        return np.prod(f3_cdf_array(x / np.sqrt(sticks), tol), axis=1)

    values = _run_chunks(plan, work, threads)
    est = math.fsum(values) / C
    sd = float(np.std(values)) if C > 1 else 0.0
    z = NormalDist().inv_cdf(1 - alpha / 2)
    half = z / math.sqrt(C)
    return McEstimate(
        x=float(x),
        estimate=est,
        ci_low=est - 2 * eps - half,
        ci_high=est + half,
        C=C,
        J=J,
        eps=float(eps),
        alpha=float(alpha),
        std_error=sd / math.sqrt(C),
    )


# -- estimator 2: Donsker surrogate of the excursion maximum -----------------------

def vn_from_sorted(u) -> np.ndarray:
    """sqrt(N) (max_i (i/N - U_(i)) - min_i ((i-1)/N - U_(i))) along the last axis."""
    u = np.asarray(u, dtype=float)
    n = u.shape[-1]
    i = np.arange(1, n + 1) / n
    above = np.max(i - u, axis=-1)
    below = np.min(i - 1.0 / n - u, axis=-1)
    return math.sqrt(n) * (above - below)


def sample_vn(N: int, rng: np.random.Generator) -> float:
    if N < 1:
        raise DomainError("N must be at least 1")
    return float(vn_from_sorted(np.sort(rng.random(N)))[()])


def sample_vn_batch(N: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """``size`` independent copies of V_N, generated in row blocks."""
    if N < 1:
        raise DomainError("N must be at least 1")
    rows = max(1, _BLOCK // N)
    out = np.empty(size)
    for start in range(0, size, rows):
        stop = min(size, start + rows)
        u = rng.random((stop - start, N))
        u.sort(axis=1)
        out[start:stop] = vn_from_sorted(u)
    return out


def sample_m(J: int, N: int, rng: np.random.Generator) -> float:
    """max_j sqrt(L_j) V_N^(j) with J sticks and J independent V_N."""
    if J < 1 or N < 1:
        raise DomainError("J and N must be at least 1")
    sticks = sample_sticks(J, rng).lengths
    return float(np.max(np.sqrt(sticks) * sample_vn_batch(N, J, rng)))


def sample_m_batch(J: int, N: int, size: int, rng: np.random.Generator, *, prune: bool = True) -> np.ndarray:
    """``size`` draws of M_{J,N}.

    With ``prune`` the sticks are visited from longest to shortest and a
    stick is skipped once sqrt(L_j N) cannot beat the running maximum; since
    V_N <= sqrt(N) this never changes the value of a draw, only how many
    V_N copies are generated for it.
    """
    if J < 1 or N < 1:
        raise DomainError("J and N must be at least 1")
    roots = np.sqrt(sticks_from_uniforms(rng.random((size, J))))
    if not prune:
        v = sample_vn_batch(N, size * J, rng).reshape(size, J)
        return np.max(roots * v, axis=1)
    roots = -np.sort(-roots, axis=1)
    best = np.zeros(size)
    cap = math.sqrt(N)
    for j in range(J):
        active = np.flatnonzero(roots[:, j] * cap > best)
        if active.size == 0:
            break
        v = sample_vn_batch(N, active.size, rng)
        best[active] = np.maximum(best[active], roots[active, j] * v)
    return best


def mc_sample(J: int, N: int, C: int, seed: int = 0, *, threads: int | None = None) -> McSample:
    plan = McPlan(J=J, C=C, N=N, seed=seed)
    draws = _run_chunks(plan, lambda rng, size: sample_m_batch(J, N, size, rng), threads)
    return McSample(draws, plan)


# -- bridges and concave majorants --------------------------------------------------

def brownian_bridge(m: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Brownian bridge on the dyadic grid of mesh 2^-m by midpoint refinement.

    A midpoint between grid neighbours a distance h apart is their average
    plus an independent N(0, h/4) displacement.
    """
    if not 4 <= m <= 20:
        raise DomainError("mesh exponent must lie in [4, 20]")
    n = 1 << m
    values = np.zeros(n + 1)
    step = n
    while step > 1:
        half = step // 2
        h = step / n
        left = values[0:n - step + 1:step]
        right = values[step::step]
        values[half::step] = 0.5 * (left + right) + rng.normal(0.0, math.sqrt(h / 4), left.size)
        step = half
    return np.linspace(0.0, 1.0, n + 1), values


def concave_majorant(grid, values) -> np.ndarray:
    """Least concave majorant of the points (grid_i, values_i) at the grid.

    Upper hull by recursive splitting: each chord is split at the point
    farthest above it until no point lies strictly above any chord.  A
    bridge majorant has few vertices, so this costs a handful of vector
    passes rather than a Python loop over the grid.
    """
    x = np.asarray(grid, dtype=float)
    y = np.asarray(values, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or x.size == 0:
        raise DomainError("grid and values must be equal-length 1-d arrays")
    if np.any(np.diff(x) <= 0):
        raise DomainError("grid must be strictly increasing")
    n = x.size
    hull = {0, n - 1}
    todo = [(0, n - 1)]
    while todo:
        a, b = todo.pop()
        if b - a < 2:
            continue
        xs, ys = x[a + 1:b], y[a + 1:b]
        # twice the signed area: positive means strictly above the chord
        lift = (x[b] - x[a]) * (ys - y[a]) - (y[b] - y[a]) * (xs - x[a])
        k = int(np.argmax(lift))
        if lift[k] > 0:
            m = a + 1 + k
            hull.add(m)
            todo += [(a, m), (m, b)]
    idx = np.array(sorted(hull))
    major = np.interp(x, x[idx], y[idx])
    major[idx] = y[idx]
    return np.maximum(major, y)


def simulate_bridge_majorant(m: int, rng: np.random.Generator) -> BridgePath:
    grid, values = brownian_bridge(m, rng)
    major = concave_majorant(grid, values)
    gap = major - values
    k = int(np.argmax(gap))
    return BridgePath(grid, values, major, float(gap[k]), k)
