"""Intersections of independent renewal processes and the beta-derived constants.

The p-fold intersection of i.i.d. renewal sets with tail index ``beta`` is
itself a renewal set whose behaviour is governed by ``beta_p = p*beta - p + 1``:
recurrent with regularly varying tail when ``beta_p > 0``, recurrent with a
logarithmic tail when ``beta_p = 0`` and terminating when ``beta_p < 0``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from typing import Sequence, Union

import numpy as np

from .errors import RegimeError
from .renewal import RenewalLaw, RenewalPath, renewal_mass, sample_renewal_paths

__all__ = [
    "BETA_TOL",
    "Regime",
    "ShapeConstant",
    "TailProcessSample",
    "TerminatingProb",
    "parse_beta",
    "beta_index",
    "p_prime",
    "regime",
    "shape_constant",
    "intersect_paths",
    "terminating_prob",
    "terminating_prob_from_mass",
    "intersection_tail_asymptotic",
    "intersection_tail_mc",
    "sample_tail_process",
    "sample_tail_processes",
    "intersection_gap_law",
    "tail_pattern_law",
]

Beta = Union[float, Fraction]

# |beta_p| below this counts as zero for float input
BETA_TOL = 1e-12


class Regime(str, enum.Enum):
    SUPER = "SuperCritical"
    CRITICAL = "Critical"
    SUB = "SubCritical"

    def __str__(self) -> str:
        return self.value


def parse_beta(value) -> Beta:
    """Accept ``"3/4"``, ``"0.75"``, a :class:`Fraction` or a float.

    Strings are converted exactly (decimal strings become exact fractions),
    so ``"1/2"`` and ``"0.5"`` both give ``Fraction(1, 2)``.
    """
    if isinstance(value, Fraction):
        b = value
    elif isinstance(value, str):
        b = Fraction(value.strip())
    elif isinstance(value, (int, float, np.floating)):
        b = float(value)
    else:
        raise TypeError(f"cannot interpret beta={value!r}")
    if not 0 < b < 1:
        raise ValueError(f"beta must lie in (0, 1), got {value!r}")
    return b


def beta_index(beta: Beta, q: int) -> Beta:
    """``beta_q = q*beta - q + 1`` (exact for fractional input)."""
    if q < 1:
        raise ValueError("q must be >= 1")
    return q * beta - q + 1


def _sign(x: Beta) -> int:
    if isinstance(x, Fraction):
        return (x > 0) - (x < 0)
    if abs(x) < BETA_TOL:
        return 0
    return 1 if x > 0 else -1


def p_prime(beta: Beta) -> int:
    """Largest ``q`` with ``beta_q > 0``, i.e. the largest integer below ``1/(1 - beta)``."""
    beta = parse_beta(beta)
    q = int(math.floor(1.0 / (1.0 - float(beta)))) + 1
    while _sign(beta_index(beta, q)) <= 0:
        q -= 1
    return q


def regime(beta: Beta | str, p: int) -> Regime:
    s = _sign(beta_index(parse_beta(beta), p))
    if s > 0:
        return Regime.SUPER
    if s == 0:
        return Regime.CRITICAL
    return Regime.SUB


class ShapeConstant:
    """Value of the shape constant together with ``q_{beta,p} = min{q : beta_q < 0}``."""

    __slots__ = ("value", "q_beta_p")

    def __init__(self, value: float, q_beta_p: int):
        self.value = value
        self.q_beta_p = q_beta_p

    def __float__(self) -> float:
        return self.value

    def __iter__(self):
        return iter((self.value, self.q_beta_p))

    def __repr__(self) -> str:
        return f"ShapeConstant(value={self.value!r}, q_beta_p={self.q_beta_p})"


def shape_constant(beta: Beta, p: int) -> ShapeConstant:
    """Alternating-sum shape constant for a sub-critical ``(beta, p)``.

    Parameters
    ----------
    beta : float or Fraction
    p : int

    Returns
    -------
    ShapeConstant
        ``value = sum_{s=q}^{p} (-1)^{p-s} C(p, s) (-beta_s)^{p-1}`` with
        ``q = min{s : beta_s < 0}``; the value lies in (0, 1).
    """
    if regime(beta, p) is not Regime.SUB:
        raise RegimeError(f"shape constant needs beta_p < 0 (beta={beta}, p={p})")
    q = 1
    while _sign(beta_index(beta, q)) >= 0:
        q += 1
    exact = isinstance(beta, Fraction)
    total = Fraction(0) if exact else 0.0
    for s in range(q, p + 1):
        total += (-1) ** (p - s) * math.comb(p, s) * (-beta_index(beta, s)) ** (p - 1)
    return ShapeConstant(float(total), q)


def intersect_paths(paths: Sequence) -> np.ndarray:
    """Sorted intersection of several strictly increasing hit lists."""
    arrays = [np.asarray(p.hits if isinstance(p, RenewalPath) else p, dtype=np.int64) for p in paths]
    if not arrays:
        return np.zeros(0, dtype=np.int64)
    arrays.sort(key=len)
    return reduce(lambda a, b: np.intersect1d(a, b, assume_unique=True), arrays)


@dataclass(frozen=True)
class TerminatingProb:
    """Truncated-series value of the terminating probability with a bracket.

    ``estimate = 1/sum_{n<=N} u(n)^p`` is an upper bound; ``lower`` adds a
    tail bound from the ``u`` envelope.  ``extrapolated`` adds the asymptotic
    tail estimate instead and lies inside the bracket.
    """

    estimate: float
    lower: float
    upper: float
    extrapolated: float
    n_trunc: int
    envelope: float

    def contains(self, x: float) -> bool:
        return self.lower <= x <= self.upper


def terminating_prob_from_mass(u: np.ndarray, beta: float, p: int) -> TerminatingProb:
    """Same as :func:`terminating_prob` from a precomputed mass table ``u(0..N)``."""
    u = np.asarray(u, dtype=np.float64)
    N = len(u) - 1
    bp = p * beta - p + 1.0
    partial = float(np.sum(u ** p))
    if N < 2 or not np.any(u[1:] > 0):
        return TerminatingProb(1.0 / partial, 1.0 / partial, 1.0 / partial, 1.0 / partial, N, 0.0)
    tail_n = np.arange(max(N // 2, 1), N + 1)
    scaled = u[tail_n] * tail_n ** (1.0 - beta)
    envelope = float(scaled.max())
    bound = envelope ** p * N ** bp / abs(bp)
    guess = float(scaled[-1]) ** p * (N + 0.5) ** bp / abs(bp)
    return TerminatingProb(
        estimate=1.0 / partial,
        lower=1.0 / (partial + bound),
        upper=1.0 / partial,
        extrapolated=1.0 / (partial + min(guess, bound)),
        n_trunc=N,
        envelope=envelope,
    )


def terminating_prob(law: RenewalLaw, p: int, N_trunc: int = 10**5) -> TerminatingProb:
    """Probability that the p-fold intersection renewal never returns.

    Uses the geometric number of returns: its mean is ``sum_n u(n)^p``.
    The envelope constant is ``max(max_{N/2<=n<=N} u(n) n^{1-beta}, asymptotic
    constant)`` taken from the table.
    """
    b = float(law.beta)
    if regime(b, p) is not Regime.SUB:
        raise RegimeError(f"terminating probability needs beta_p < 0 (beta={b}, p={p})")
    tab = renewal_mass(law, N_trunc)
    tp = terminating_prob_from_mass(tab.u, b, p)
    limit = 1.0 / (law.c_f * math.gamma(b) * math.gamma(1.0 - b))
    if limit > tp.envelope:
        bp = p * b - p + 1.0
        partial = 1.0 / tp.estimate
        bound = limit ** p * N_trunc ** bp / abs(bp)
        tp = TerminatingProb(tp.estimate, 1.0 / (partial + bound), tp.upper,
                             max(tp.extrapolated, 1.0 / (partial + bound)), N_trunc, limit)
    return tp


def intersection_tail_asymptotic(law: RenewalLaw, p: int, n) -> np.ndarray:
    """Asymptotic ``P(eta_1 > n)`` for the p-fold intersection (``beta_p >= 0``)."""
    b = float(law.beta)
    reg = regime(b, p)
    if reg is Regime.SUB:
        raise RegimeError("the intersection terminates when beta_p < 0")
    n = np.asarray(n, dtype=np.float64)
    k = (law.c_f * math.gamma(b) * math.gamma(1.0 - b)) ** p
    if reg is Regime.CRITICAL:
        return k / np.log(n)
    bp = p * b - p + 1.0
    return n ** (-bp) * k / (math.gamma(bp) * math.gamma(1.0 - bp))


def _common_runs(law: RenewalLaw, p: int, horizon: int, runs: int, rng: np.random.Generator) -> np.ndarray:
    """Boolean per run: do p independent renewals from 0 share a point in {1..horizon}?"""
    stride = horizon + 1
    keys = []
    for _ in range(p):
        bundle = sample_renewal_paths(law, horizon, runs, rng)
        keys.append(bundle.owners() * stride + bundle.hits)
    common = reduce(lambda a, b: np.intersect1d(a, b, assume_unique=True), keys)
    hit = np.zeros(runs, dtype=bool)
    hit[common // stride] = True
    return hit


def intersection_tail_mc(law: RenewalLaw, p: int, n: int, runs: int, rng: np.random.Generator,
                         chunk: int = 4096) -> tuple[float, float]:
    """Monte Carlo ``P(eta_1 > n)`` for the p-fold intersection; returns (estimate, SE).

    When ``beta_p < 0`` and ``n`` is large this is the terminating frequency.
    """
    misses = 0
    done = 0
    while done < runs:
        c = min(chunk, runs - done)
        misses += int(np.count_nonzero(~_common_runs(law, p, n, c, rng)))
        done += c
    est = misses / runs
    return est, math.sqrt(max(est * (1.0 - est), 0.0) / runs)


@dataclass(frozen=True)
class TailProcessSample:
    m: int
    theta: np.ndarray
    sign: int = field(default=1)


def sample_tail_processes(law: RenewalLaw, p: int, m: int, size: int,
                          rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised draws: returns ``(signs, theta)`` with ``theta`` of shape (size, m+1)."""
    if m < 0:
        raise ValueError("m must be >= 0")
    theta = np.zeros((size, m + 1), dtype=np.int8)
    theta[:, 0] = 1
    if m >= 1:
        stride = m + 1
        keys = []
        for _ in range(p):
            bundle = sample_renewal_paths(law, m, size, rng)
            keys.append(bundle.owners() * stride + bundle.hits)
        common = reduce(lambda a, b: np.intersect1d(a, b, assume_unique=True), keys)
        theta[common // stride, common % stride] = 1
    signs = np.where(rng.random(size) < 0.5, -1, 1).astype(np.int8)
    return signs, theta


def sample_tail_process(law: RenewalLaw, p: int, m: int, rng: np.random.Generator) -> TailProcessSample:
    """One draw of ``(Theta*_0..Theta*_m)`` with an independent Rademacher sign."""
    signs, theta = sample_tail_processes(law, p, m, 1, rng)
    return TailProcessSample(m, theta[0], int(signs[0]))


def intersection_gap_law(law: RenewalLaw, p: int, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Exact gap law of the p-fold intersection up to ``m``.

    Returns ``(f, survive)`` with ``f[k] = P(eta_1 = k)`` for ``1 <= k <= m``
    (``f[0] = 0``) and ``survive[t] = P(eta_1 > t)`` for ``0 <= t <= m``.  The
    intersection has renewal mass ``u(k)^p``; ``f`` follows by renewal
    inversion ``f(k) = u_p(k) - sum_{j<k} f(j) u_p(k - j)``.
    """
    u = renewal_mass(law, max(m, 1)).u
    up = u[:m + 1] ** p
    f = np.zeros(m + 1)
    rev = up[::-1].copy()  # rev[m - j] = u_p(j)
    for k in range(1, m + 1):
        f[k] = up[k] - float(f[1:k] @ rev[m - k + 1:m])
    return f, 1.0 - np.cumsum(f)


def tail_pattern_law(law: RenewalLaw, p: int, m: int) -> dict[tuple[int, ...], float]:
    """Exact law of ``(Theta*_1..Theta*_m)`` (``Theta*_0 = 1``).

    Patterns are products of gap probabilities of the intersection renewal
    times the probability of no further point before ``m``.
    """
    f, survive = intersection_gap_law(law, p, m)
    out: dict[tuple[int, ...], float] = {}
    for bits in range(2 ** m):
        pattern = tuple((bits >> (m - 1 - j)) & 1 for j in range(m))
        prob = 1.0
        last = 0
        for j, b in enumerate(pattern, start=1):
            if b:
                prob *= f[j - last]
                last = j
        prob *= survive[m - last]
        out[pattern] = prob
    return out
