"""Counting strictly increasing index tuples under a product cap.

``D*_p(x) = {i_1 < ... < i_p : i_1 * ... * i_p <= x}``, optionally with the
coordinate cap ``i_p <= i_max``.  Products are exact Python/int64 integers and
are compared exactly against the float cap; integers below 2**53 are exact
doubles, so a half-ulp tolerance on the cap would not change any count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, NamedTuple, Sequence

import numpy as np
from scipy import sparse

from .errors import RegimeError, ResourceLimitError
from .intersection import Regime, regime, shape_constant
from .model import ModelParams
from .renewal import RenewalLaw, RenewalTables, default_law

__all__ = [
    "ENUMERATION_GUARD",
    "PAIR_GUARD",
    "TupleDomain",
    "CountPair",
    "enumerate_tuples",
    "count_tuples",
    "count_asymptotic",
    "r_n",
    "h_domain",
    "count_C_n1",
    "overlap_counts",
    "count_C_n2",
    "product_uniform_cdf",
]

ENUMERATION_GUARD = 10**8
PAIR_GUARD = 10**7


@dataclass(frozen=True)
class TupleDomain:
    p: int
    x: float
    i_max: int | None = None

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("p must be >= 1")

    @property
    def cap(self) -> int:
        """Effective coordinate cap (the product cap already bounds i_p by x)."""
        bound = int(math.floor(self.x)) if self.x >= 1 else 0
        return bound if self.i_max is None else min(bound, int(self.i_max))


def _floor_div(x: float, d: int) -> int:
    q = int(x // d)
    while (q + 1) * d <= x:
        q += 1
    while q > 0 and q * d > x:
        q -= 1
    return q


def _rising(i: int, k: int) -> int:
    return math.prod(range(i, i + k))


def _gen(p: int, x: float, prefix: tuple, prod: int, lo: int, cap: int) -> Iterator[tuple[int, ...]]:
    if p == 1:
        hi = min(_floor_div(x, prod), cap)
        for i in range(lo, hi + 1):
            yield prefix + (i,)
        return
    i = lo
    while i + p - 1 <= cap and prod * _rising(i, p) <= x:
        yield from _gen(p - 1, x, prefix + (i,), prod * i, i + 1, cap)
        i += 1


def enumerate_tuples(domain: TupleDomain, guard: int = ENUMERATION_GUARD) -> Iterator[tuple[int, ...]]:
    """Lexicographic enumeration of the domain (1-based indices)."""
    n = count_tuples(domain)
    if n > guard:
        raise ResourceLimitError(f"{n} tuples exceed the enumeration guard {guard}")
    if domain.x < 1:
        return iter(())
    return _gen(domain.p, domain.x, (), 1, 1, domain.cap)


def _count_pairs(x: float, prod: int, lo: int, cap: int) -> int:
    # number of lo <= i < j <= cap with prod*i*j <= x
    if lo > cap:
        return 0
    top = int(math.isqrt(max(int(x // prod), 0))) + 2
    i = np.arange(lo, min(cap, top) + 1, dtype=np.int64)
    if i.size == 0:
        return 0
    d = prod * i
    hi = np.floor(x / d).astype(np.int64)
    hi += ((hi + 1) * d <= x)
    hi -= (hi * d > x)
    hi = np.minimum(hi, cap)
    return int(np.clip(hi - i, 0, None).sum())


def _count(p: int, x: float, prod: int, lo: int, cap: int) -> int:
    if p == 1:
        return max(0, min(_floor_div(x, prod), cap) - lo + 1)
    if p == 2:
        return _count_pairs(x, prod, lo, cap)
    total = 0
    i = lo
    while i + p - 1 <= cap and prod * _rising(i, p) <= x:
        total += _count(p - 1, x, prod * i, i + 1, cap)
        i += 1
    return total


def count_tuples(domain: TupleDomain) -> int:
    """Exact ``|domain|`` without materialising the tuples."""
    if domain.x < 1:
        return 0
    return _count(domain.p, domain.x, 1, 1, domain.cap)


def count_asymptotic(x: float, p: int) -> float:
    """``x log^{p-1}(x) / (p! (p-1)!)``."""
    if x <= 1:
        raise ValueError("x must exceed 1")
    return x * math.log(x) ** (p - 1) / (math.factorial(p) * math.factorial(p - 1))


def r_n(params: ModelParams, tables: RenewalTables) -> float:
    """``w_n^p / c_n^alpha`` with the exact ``w_n``."""
    from .limits import normalization

    if regime(params.beta, params.p) is Regime.SUPER:
        raise RegimeError("r_n is used in the critical and sub-critical regimes only")
    w = float(tables.w[params.n])
    return w ** params.p / normalization(params) ** params.alpha


def h_domain(params: ModelParams, tables: RenewalTables, K: float) -> TupleDomain:
    """Index set ``{i in D*_p(K r_n) : i_p <= w_n}``."""
    w = float(tables.w[params.n])
    return TupleDomain(params.p, K * r_n(params, tables), int(math.floor(w)))


class CountPair(NamedTuple):
    exact: int
    asymptotic: float

    @property
    def ratio(self) -> float:
        return self.exact / self.asymptotic if self.asymptotic else math.nan


def count_C_n1(params: ModelParams, law: RenewalLaw | None, tables: RenewalTables, K: float) -> CountPair:
    """Exact ``|H(n, K)|`` and the regime-matched asymptotic value."""
    law = default_law(params.beta) if law is None else law
    p, n = params.p, params.n
    exact = count_tuples(h_domain(params, tables, K)) if K > 0 else 0
    fact = math.factorial(p) * math.factorial(p - 1)
    b = params.beta_float
    if regime(params.beta, p) is Regime.CRITICAL:
        asym = K / fact * (law.c_f / (1.0 - b)) ** p * math.log(n)
    else:
        w = float(tables.w[n])
        asym = K / fact * shape_constant(params.beta, p).value * w ** p / n
    return CountPair(exact, asym)


def overlap_counts(tuples: Sequence[Sequence[int]], guard: int = PAIR_GUARD) -> np.ndarray:
    """``counts[r]`` = number of ordered pairs ``(i, i')`` with ``|i & i'| = r``."""
    T = np.asarray(tuples, dtype=np.int64)
    m = len(T)
    if m == 0:
        return np.zeros(1, dtype=np.int64)
    if m * m > guard:
        raise ResourceLimitError(f"{m * m} ordered pairs exceed the guard {guard}")
    p = T.shape[1]
    rows = np.repeat(np.arange(m), p)
    inc = sparse.csr_matrix((np.ones(m * p, dtype=np.int32), (rows, T.ravel())), shape=(m, int(T.max()) + 1))
    overlap = (inc @ inc.T).toarray()
    return np.bincount(overlap.ravel(), minlength=p + 1).astype(np.int64)


def count_C_n2(params: ModelParams, tables: RenewalTables, K: float, r: int) -> int:
    """Ordered pairs in ``H(n, K)`` sharing exactly ``r`` indices."""
    tuples = list(enumerate_tuples(h_domain(params, tables, K), guard=int(math.isqrt(PAIR_GUARD))))
    counts = overlap_counts(tuples)
    return int(counts[r]) if r < len(counts) else 0


def product_uniform_cdf(s: float, p: int) -> float:
    """``P(U_1 ... U_p <= s) = s * sum_{k<p} (-log s)^k / k!``."""
    if s <= 0:
        raise ValueError("s must be positive")
    if s >= 1:
        return 1.0
    t = -math.log(s)
    return s * math.fsum(t ** k / math.factorial(k) for k in range(p))
