"""Finite-n series representation of the multiple-stable process.

For ``k = 1..n``

    X_{n,k} = W_n^{p/alpha} * e_p({eps_i Gamma_i^{-1/alpha} : i <= L, k in R_{n,i}})

where ``Gamma_i`` are unit-rate Poisson arrivals, ``eps_i`` Rademacher signs,
``R_{n,i}`` independent renewal paths conditioned to hit ``{1..n}`` and
``e_p`` the p-th elementary symmetric polynomial.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import ResourceLimitError
from .intersection import Beta, intersect_paths, parse_beta
from .renewal import PathBundle, RenewalLaw, RenewalTables, default_law, renewal_tables, sample_conditioned_renewals
from .streams import seed_stream

__all__ = [
    "ModelParams",
    "SeriesEnvironment",
    "PathRealization",
    "TruncationReport",
    "elementary_symmetric",
    "sample_environment",
    "evaluate_path",
    "evaluate_truncated_path",
    "simulate_path",
    "truncation_diagnostic",
    "default_L",
]

ALPHA_MAX = 1.99


@dataclass(frozen=True)
class ModelParams:
    alpha: float
    beta: Beta
    p: int
    n: int
    L: int = 64
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "beta", parse_beta(self.beta))
        if not 0.0 < self.alpha <= ALPHA_MAX:
            raise ValueError(f"alpha must lie in (0, {ALPHA_MAX}], got {self.alpha!r}")
        if self.p < 1:
            raise ValueError("p must be >= 1")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.L < self.p:
            raise ValueError(f"L={self.L} must be >= p={self.p}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def beta_float(self) -> float:
        return float(self.beta)

    def replace(self, **changes) -> "ModelParams":
        d = {k: getattr(self, k) for k in ("alpha", "beta", "p", "n", "L", "seed")}
        d.update(changes)
        return ModelParams(**d)


def default_L(params: ModelParams) -> int:
    """Shipped truncation level; empirical, see :func:`truncation_diagnostic`."""
    return 64


@dataclass(frozen=True)
class SeriesEnvironment:
    gammas: np.ndarray
    signs: np.ndarray
    paths: PathBundle
    weights: np.ndarray = field(repr=False)  # eps_i * Gamma_i^{-1/alpha}

    @property
    def L(self) -> int:
        return len(self.gammas)


@dataclass(frozen=True)
class PathRealization:
    """``values[k-1] = X_{n,k}``; coverage stored as CSR over the covered sites."""

    values: np.ndarray
    cover_sites: np.ndarray
    cover_offsets: np.ndarray
    cover_index: np.ndarray

    @property
    def n(self) -> int:
        return len(self.values)

    def coverage(self, k: int) -> np.ndarray:
        """``S_k``: zero-based indices of the paths hitting site ``k``."""
        j = np.searchsorted(self.cover_sites, k)
        if j == len(self.cover_sites) or self.cover_sites[j] != k:
            return np.zeros(0, dtype=np.int64)
        return self.cover_index[self.cover_offsets[j]:self.cover_offsets[j + 1]]


def elementary_symmetric(values: Iterable[float], p: int) -> float:
    """p-th elementary symmetric polynomial by the O(len * p) recursion."""
    if p < 0:
        raise ValueError("p must be >= 0")
    e = [1.0] + [0.0] * p
    for i, a in enumerate(values):
        for j in range(min(p, i + 1), 0, -1):
            e[j] += a * e[j - 1]
    return e[p]


def _grouped_esp(groups: np.ndarray, a: np.ndarray, n_groups: int, p: int) -> np.ndarray:
    """e_p of ``a`` within each group; ``groups`` must be sorted."""
    out = np.zeros(n_groups)
    if a.size == 0:
        return out
    starts = np.flatnonzero(np.r_[True, groups[1:] != groups[:-1]])
    counts = np.diff(np.r_[starts, groups.size])
    rank = np.arange(groups.size) - np.repeat(starts, counts)
    order = np.argsort(rank, kind="stable")
    layer_bounds = np.searchsorted(rank[order], np.arange(counts.max() + 1))
    E = np.zeros((p + 1, n_groups))
    E[0] = 1.0
    for r in range(counts.max()):
        sel = order[layer_bounds[r]:layer_bounds[r + 1]]
        g = groups[sel]
        for j in range(min(p, r + 1), 0, -1):
            E[j, g] += a[sel] * E[j - 1, g]
    return E[p]


def sample_environment(params: ModelParams, law: RenewalLaw, tables: RenewalTables,
                       rng: np.random.Generator, L: int | None = None) -> SeriesEnvironment:
    """Draw Gamma_1..Gamma_L, signs and L conditioned renewal paths (in that order)."""
    L = params.L if L is None else L
    gammas = np.cumsum(rng.standard_exponential(L))
    signs = np.where(rng.random(L) < 0.5, -1, 1).astype(np.int8)
    paths = sample_conditioned_renewals(law, tables, params.n, L, rng)
    weights = signs * gammas ** (-1.0 / params.alpha)
    return SeriesEnvironment(gammas, signs, paths, weights)


def _mass(params: ModelParams, tables: RenewalTables) -> float:
    return float(tables.cumulative_first_hit[params.n])


def _coverage(env: SeriesEnvironment, L: int) -> tuple[np.ndarray, np.ndarray]:
    stop = env.paths.offsets[L]
    hits = env.paths.hits[:stop]
    owners = np.repeat(np.arange(L), np.diff(env.paths.offsets[:L + 1]))
    order = np.argsort(hits, kind="stable")
    return hits[order], owners[order]


def evaluate_path(env: SeriesEnvironment, params: ModelParams, tables: RenewalTables,
                  L: int | None = None) -> PathRealization:
    """Evaluate the path from the first ``L`` series terms (default: all of them)."""
    L = env.L if L is None else min(L, env.L)
    n, p = params.n, params.p
    sites, owners = _coverage(env, L)
    uniq, starts = np.unique(sites, return_index=True)
    offsets = np.r_[starts, sites.size].astype(np.int64)
    counts = np.diff(offsets)
    values = np.zeros(n)
    if uniq.size:
        eligible = np.repeat(counts >= p, counts)
        groups = np.repeat(np.arange(uniq.size), counts)[eligible]
        esp = _grouped_esp(groups, env.weights[owners[eligible]], uniq.size, p)
        values[uniq - 1] = _mass(params, tables) ** (p / params.alpha) * esp
    return PathRealization(values, uniq, offsets, owners)


def evaluate_truncated_path(env: SeriesEnvironment, params: ModelParams, tables: RenewalTables,
                            K: float, max_tuples: int = 10**6) -> PathRealization:
    """Path restricted to tuples ``i`` with ``i_1...i_p <= K r_n`` and ``i_p <= w_n``."""
    from .combinatorics import TupleDomain, enumerate_tuples, r_n

    r = r_n(params, tables)
    w = float(tables.w[params.n])
    domain = TupleDomain(params.p, K * r, min(math.floor(w), env.L))
    full = evaluate_path(env, params, tables)
    values = np.zeros(params.n)
    scale = _mass(params, tables) ** (params.p / params.alpha)
    count = 0
    for tup in enumerate_tuples(domain):
        count += 1
        if count > max_tuples:
            raise ResourceLimitError(f"more than {max_tuples} tuples in the truncated sum")
        idx = [i - 1 for i in tup]
        common = intersect_paths([env.paths[i] for i in idx])
        if common.size:
            values[common - 1] += scale * float(np.prod(env.weights[idx]))
    return PathRealization(values, full.cover_sites, full.cover_offsets, full.cover_index)


def simulate_path(params: ModelParams, law: RenewalLaw | None = None, tables: RenewalTables | None = None,
                  rng: np.random.Generator | None = None) -> PathRealization:
    """One path; the stream defaults to ``seed_stream(params.seed, 0)``."""
    law = default_law(params.beta) if law is None else law
    tables = renewal_tables(law, params.n) if tables is None else tables
    rng = seed_stream(params.seed, 0) if rng is None else rng
    return evaluate_path(sample_environment(params, law, tables, rng), params, tables)


@dataclass(frozen=True)
class TruncationReport:
    """Gap quantiles between consecutive truncation levels ``L`` and ``2L``."""

    levels: list[int]
    median: list[float]
    q90: list[float]
    reps: int
    recommended_L: int | None
    threshold: float

    def rows(self) -> list[dict]:
        return [{"L": L, "L2": 2 * L, "median_gap": m, "q90_gap": q}
                for L, m, q in zip(self.levels, self.median, self.q90)]


def truncation_diagnostic(params: ModelParams, law: RenewalLaw | None = None,
                          tables: RenewalTables | None = None, reps: int = 100,
                          seed: int | None = None, doublings: int = 4,
                          threshold: float = 0.01) -> TruncationReport:
    """Sup-norm gap ``max_k |X^(L) - X^(2L)| / c_n`` on coupled randomness.

    A single environment with ``params.L * 2**doublings`` terms is drawn per
    replicate and evaluated at every level, so the smaller truncations are
    prefixes of the larger one.  ``recommended_L`` is the smallest level
    whose median gap is below ``threshold``.
    """
    from .limits import normalization

    law = default_law(params.beta) if law is None else law
    tables = renewal_tables(law, params.n) if tables is None else tables
    seed = params.seed if seed is None else seed
    c_n = normalization(params)
    levels = [params.L * 2**j for j in range(doublings)]
    gaps = np.zeros((reps, doublings))
    for r in range(reps):
        rng = seed_stream(seed, r)
        env = sample_environment(params, law, tables, rng, L=params.L * 2**doublings)
        prev = evaluate_path(env, params, tables, L=levels[0]).values
        for j in range(doublings):
            nxt = evaluate_path(env, params, tables, L=2 * levels[j]).values
            gaps[r, j] = np.max(np.abs(prev - nxt)) / c_n
            prev = nxt
    med = np.median(gaps, axis=0)
    q90 = np.quantile(gaps, 0.9, axis=0)
    rec = next((L for L, m in zip(levels, med) if m < threshold), None)
    return TruncationReport(levels, med.tolist(), q90.tolist(), reps, rec, threshold)
