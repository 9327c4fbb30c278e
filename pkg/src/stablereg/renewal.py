"""Heavy-tailed discrete renewal laws, renewal mass tables and path samplers.

A renewal law is described by its tail ``F(n) = P(T > n)`` on the non-negative
integers with ``F(0) = 1``.  The default family is ``F(n) = (n + 1)**-beta``,
which has tail constant 1 and a closed-form inverse.

Paths conditioned to hit ``{1, ..., n}`` are sampled exactly: the first hit
``V`` has ``P(V = k) = F(k - 1) / W_n`` with ``W_n = sum_{k<n} F(k)``, after
which the path is extended by i.i.d. increments.  Every site of ``{1..n}`` is
then covered with probability ``1 / W_n``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, NamedTuple

import numpy as np
from scipy.signal import fftconvolve

from .errors import ResourceLimitError

__all__ = [
    "DIRECT_MASS_CAP",
    "FFT_MASS_CAP",
    "RenewalLaw",
    "RenewalPath",
    "RenewalTables",
    "PathBundle",
    "StationaryWeight",
    "default_law",
    "sample_increment",
    "renewal_mass",
    "renewal_tables",
    "sample_conditioned_renewal",
    "sample_conditioned_renewals",
    "sample_renewal_paths",
    "stationary_weight",
    "asymptotic_mass",
]

DIRECT_MASS_CAP = 2**17
FFT_MASS_CAP = 2**24

# increments larger than this are clipped; they always overshoot any horizon in use
_INCREMENT_CLIP = 2**62


@dataclass(frozen=True)
class RenewalLaw:
    """Inter-arrival law on {1, 2, ...} given by its tail.

    Attributes
    ----------
    beta : float
        Tail index in (0, 1).
    c_f : float
        Tail constant, ``F(n) ~ c_f * n**-beta``.
    tail : callable
        Vectorised ``n -> F(n)`` on non-negative integers, ``F(0) = 1``.
    pmf : callable
        Vectorised ``n -> f(n) = F(n - 1) - F(n)`` for ``n >= 1``.
    inverse : callable, optional
        Vectorised ``u -> min{n >= 1 : F(n) < u}`` for ``u`` in (0, 1].
        When absent a doubling/bisection search on ``tail`` is used.
    name : str
        Label used in output headers and cache keys.
    """

    beta: float
    c_f: float
    tail: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    pmf: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    inverse: Callable[[np.ndarray], np.ndarray] | None = field(default=None, repr=False)
    name: str = "custom"

    def __post_init__(self):
        if not 0.0 < float(self.beta) < 1.0:
            raise ValueError(f"beta must lie in (0, 1), got {self.beta!r}")
        if not self.c_f > 0:
            raise ValueError(f"c_f must be positive, got {self.c_f!r}")


def default_law(beta) -> RenewalLaw:
    """Law with tail ``(n + 1)**-beta`` (so ``c_f = 1``)."""
    b = float(beta)
    if not 0.0 < b < 1.0:
        raise ValueError(f"beta must lie in (0, 1), got {beta!r}")

    def tail(n):
        return np.power(np.asarray(n, dtype=np.float64) + 1.0, -b)

    def pmf(n):
        n = np.asarray(n, dtype=np.float64)
        return np.power(n, -b) - np.power(n + 1.0, -b)

    def inverse(u):
        # (n + 1)**-b < u  <=>  n + 1 > u**(-1/b); smallest such n is floor(u**(-1/b))
        with np.errstate(over="ignore", divide="ignore"):
            x = np.floor(np.power(u, -1.0 / b))
        return np.minimum(x, float(_INCREMENT_CLIP)).astype(np.int64)

    return RenewalLaw(beta=b, c_f=1.0, tail=tail, pmf=pmf, inverse=inverse,
                      name=f"pareto-discrete(beta={b!r})")


def _search_inverse(law: RenewalLaw, u: np.ndarray) -> np.ndarray:
    lo = np.zeros(u.shape, dtype=np.int64)  # F(lo) >= u holds at lo = 0
    hi = np.ones(u.shape, dtype=np.int64)
    todo = law.tail(hi) >= u
    while todo.any():
        lo = np.where(todo, hi, lo)
        hi = np.where(todo, np.minimum(hi * 2, _INCREMENT_CLIP), hi)
        todo = (law.tail(hi) >= u) & (hi < _INCREMENT_CLIP)
    while True:
        gap = hi - lo > 1
        if not gap.any():
            return hi
        mid = lo + (hi - lo) // 2
        above = law.tail(mid) >= u
        lo = np.where(gap & above, mid, lo)
        hi = np.where(gap & ~above, mid, hi)


def sample_increment(law: RenewalLaw, rng: np.random.Generator, size=None, cap: int | None = None):
    """Draw inter-arrival times ``T >= 1`` with ``P(T > n) = F(n)`` by tail inversion.

    Values above ``cap`` are replaced by ``cap``; callers that only care
    whether a horizon is overshot pass ``cap = horizon + 1``.
    """
    u = 1.0 - rng.random(size)  # in (0, 1]
    u_arr = np.atleast_1d(u)
    if law.inverse is not None:
        t = law.inverse(u_arr)
    else:
        t = _search_inverse(law, u_arr)
    t = np.asarray(t, dtype=np.int64)
    if cap is not None:
        t = np.minimum(t, cap)
    return int(t[0]) if size is None else t.reshape(np.shape(u))


def _mass_direct(f: np.ndarray, N: int) -> np.ndarray:
    u = np.empty(N + 1)
    u[0] = 1.0
    # rev[N - j] holds u(j), so u(m-1..0) is the contiguous slice rev[N-m+1:]
    rev = np.empty(N + 1)
    rev[N] = 1.0
    for m in range(1, N + 1):
        val = f[:m] @ rev[N - m + 1:]
        u[m] = val
        rev[N - m] = val
    return u


def _mass_fft(f: np.ndarray, N: int) -> np.ndarray:
    # power-series inverse of 1 - F(z) by Newton iteration
    h = np.zeros(N + 1)
    h[0] = 1.0
    h[1:] = -f[:N]
    g = np.array([1.0])
    size = 1
    while size < N + 1:
        size = min(2 * size, N + 1)
        e = fftconvolve(h[:size], g)[:size]
        e = -e
        e[0] += 2.0
        g = fftconvolve(g, e)[:size]
    return np.clip(g, 0.0, 1.0)


class RenewalTables:
    """Read-only tables for a renewal law up to size ``N``.

    ``w[n] = sum_{k=1}^n F(k)`` and ``cumulative_first_hit[n] = W_n =
    sum_{k=0}^{n-1} F(k)``.  The renewal mass ``u`` is computed on first
    access (the conditioned sampler does not need it).
    """

    def __init__(self, law: RenewalLaw, N: int, method: str = "auto"):
        if N < 0:
            raise ValueError("N must be non-negative")
        if method not in ("auto", "direct", "fft"):
            raise ValueError(f"unknown method {method!r}")
        self.law = law
        self.N = int(N)
        self.method = method
        tail = np.asarray(law.tail(np.arange(self.N + 1)), dtype=np.float64)
        self.tail = tail
        self.w = np.concatenate(([0.0], np.cumsum(tail[1:])))
        self.cumulative_first_hit = np.concatenate(([0.0], np.cumsum(tail[:-1])))
        for arr in (self.tail, self.w, self.cumulative_first_hit):
            arr.flags.writeable = False

    @cached_property
    def u(self) -> np.ndarray:
        method = self.method
        if method == "auto":
            method = "direct" if self.N <= DIRECT_MASS_CAP else "fft"
        if method == "direct" and self.N > DIRECT_MASS_CAP:
            raise ResourceLimitError(
                f"direct renewal-mass recursion capped at N={DIRECT_MASS_CAP}, got N={self.N}; "
                "use method='fft'")
        if self.N > FFT_MASS_CAP:
            raise ResourceLimitError(f"renewal-mass table capped at N={FFT_MASS_CAP}, got N={self.N}")
        f = np.asarray(self.law.pmf(np.arange(1, self.N + 1)), dtype=np.float64)
        u = _mass_direct(f, self.N) if method == "direct" else _mass_fft(f, self.N)
        u.flags.writeable = False
        return u

    def to_columns(self) -> dict[str, np.ndarray]:
        """Columns (n, u, w) for CSV export."""
        return {"n": np.arange(self.N + 1), "u": self.u, "w": self.w}


_TABLE_CACHE: dict[tuple, RenewalTables] = {}


def renewal_tables(law: RenewalLaw, N: int, method: str = "auto") -> RenewalTables:
    """Cached :class:`RenewalTables` for ``law`` (keyed on its name)."""
    key = (law.name, float(law.beta), float(law.c_f), int(N), method)
    if law.name == "custom":
        return RenewalTables(law, N, method)
    tab = _TABLE_CACHE.get(key)
    if tab is None:
        if len(_TABLE_CACHE) > 32:
            _TABLE_CACHE.clear()
        tab = _TABLE_CACHE[key] = RenewalTables(law, N, method)
    return tab


def renewal_mass(law: RenewalLaw, N: int, method: str = "direct") -> RenewalTables:
    """Tables with the renewal mass ``u(n) = P(n in tau)`` filled for ``n <= N``.

    The default ``method="direct"`` runs the exact convolution recursion
    ``u(n) = sum_{k=1}^n f(k) u(n-k)`` and refuses ``N > DIRECT_MASS_CAP``;
    ``method="fft"`` inverts ``1 - F(z)`` as a power series instead.
    """
    tab = renewal_tables(law, N, method)
    tab.u  # noqa: B018  (force evaluation so guards trip here)
    return tab


class StationaryWeight(NamedTuple):
    exact: float
    asymptotic: float


def stationary_weight(tables: RenewalTables, n: int) -> StationaryWeight:
    """``w_n = sum_{k=1}^n F(k)`` and its companion ``c_f n^{1-beta}/(1-beta)``."""
    if not 0 <= n <= tables.N:
        raise ValueError(f"n={n} outside table range 0..{tables.N}")
    law = tables.law
    b = float(law.beta)
    return StationaryWeight(float(tables.w[n]), law.c_f * n ** (1.0 - b) / (1.0 - b))


@dataclass(frozen=True)
class RenewalPath:
    horizon: int
    hits: np.ndarray


@dataclass(frozen=True)
class PathBundle:
    """Several renewal paths stored compactly (CSR layout).

    Path ``i`` occupies ``hits[offsets[i]:offsets[i + 1]]``.
    """

    horizon: int
    offsets: np.ndarray
    hits: np.ndarray

    def __len__(self) -> int:
        return len(self.offsets) - 1

    def __getitem__(self, i: int) -> RenewalPath:
        return RenewalPath(self.horizon, self.hits[self.offsets[i]:self.offsets[i + 1]])

    def counts(self) -> np.ndarray:
        return np.diff(self.offsets)

    def owners(self) -> np.ndarray:
        return np.repeat(np.arange(len(self)), self.counts())


def _extend(law: RenewalLaw, start: np.ndarray, horizon: int, rng: np.random.Generator) -> PathBundle:
    size = start.size
    alive = start <= horizon
    pos = start[alive]
    owner = np.flatnonzero(alive)
    all_pos = [pos]
    all_owner = [owner]
    block = 8
    while owner.size:
        inc = sample_increment(law, rng, (owner.size, block), cap=horizon + 1)
        steps = pos[:, None] + np.cumsum(inc, axis=1)
        inside = steps <= horizon
        all_pos.append(steps[inside])
        all_owner.append(np.broadcast_to(owner[:, None], steps.shape)[inside])
        alive = inside[:, -1]
        pos = steps[alive, -1]
        owner = owner[alive]
        # grow the block geometrically, bounded in memory
        block = min(2 * block, max(8, 2**21 // max(owner.size, 1)))
    hits = np.concatenate(all_pos)
    owners = np.concatenate(all_owner)
    order = np.argsort(owners, kind="stable")
    counts = np.bincount(owners, minlength=size)
    offsets = np.concatenate(([0], np.cumsum(counts))).astype(np.int64)
    return PathBundle(horizon, offsets, hits[order].astype(np.int64))


def sample_conditioned_renewals(law: RenewalLaw, tables: RenewalTables, n: int, size: int,
                                rng: np.random.Generator) -> PathBundle:
    """``size`` independent copies of the renewal path conditioned to hit ``{1..n}``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if n > tables.N:
        raise ValueError(f"tables cover n <= {tables.N}, requested n={n}")
    cum = tables.cumulative_first_hit[1:n + 1]
    first = np.searchsorted(cum, rng.random(size) * cum[-1], side="right") + 1
    first = np.minimum(first, n).astype(np.int64)
    return _extend(law, first, n, rng)


def sample_conditioned_renewal(law: RenewalLaw, tables: RenewalTables, n: int,
                               rng: np.random.Generator) -> RenewalPath:
    """One renewal path conditioned to hit ``{1..n}``; hits restricted to ``{1..n}``."""
    return sample_conditioned_renewals(law, tables, n, 1, rng)[0]


def sample_renewal_paths(law: RenewalLaw, horizon: int, size: int, rng: np.random.Generator) -> PathBundle:
    """``size`` renewal processes started at 0; the stored hits are those in ``{1..horizon}``."""
    if horizon < 1:
        return PathBundle(max(horizon, 0), np.zeros(size + 1, dtype=np.int64), np.zeros(0, dtype=np.int64))
    first = sample_increment(law, rng, size)
    return _extend(law, first, horizon, rng)


def asymptotic_mass(law: RenewalLaw, n) -> np.ndarray:
    """``n^{beta-1} / (c_f Gamma(beta) Gamma(1-beta))``."""
    b = float(law.beta)
    return np.power(np.asarray(n, dtype=np.float64), b - 1.0) / (law.c_f * math.gamma(b) * math.gamma(1.0 - b))
