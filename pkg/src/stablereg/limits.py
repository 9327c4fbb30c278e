"""Normalisations, limit constants and limit laws for the path maxima."""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np

from .errors import RegimeError, ResourceLimitError
from .intersection import (Beta, Regime, beta_index, p_prime, parse_beta, regime, shape_constant,
                           terminating_prob)
from .model import ModelParams
from .renewal import RenewalLaw, default_law

__all__ = [
    "AGGREGATION_GUARD",
    "AggregationIndex",
    "LimitConstant",
    "LimitSample",
    "RegimeReport",
    "normalization",
    "limit_constant",
    "frechet_max_cdf",
    "enumerate_aggregations",
    "default_L_cap",
    "sample_Z",
    "sample_Z_batch",
    "limit_max_cdf",
    "limit_cdf",
    "regime_report",
]

AGGREGATION_GUARD = 5_000_000


def normalization(params: ModelParams) -> float:
    """Regime-dependent scale ``c_n`` of the path maximum."""
    n, a, p = params.n, params.alpha, params.p
    reg = regime(params.beta, p)
    if reg is Regime.SUPER:
        bp = float(beta_index(params.beta, p))
        return n ** ((1.0 - bp) / a)
    if reg is Regime.CRITICAL:
        if n < 16:
            raise ValueError(f"critical normalisation needs n >= 16, got n={n}")
        return (n * math.log(math.log(n)) ** (p - 1) / math.log(n)) ** (1.0 / a)
    if n < 2:
        raise ValueError("sub-critical normalisation needs n >= 2")
    return (n * math.log(n) ** (p - 1)) ** (1.0 / a)


@dataclass(frozen=True)
class LimitConstant:
    value: float
    lower: float
    upper: float
    regime: Regime


def _gamma_pair(beta: float) -> float:
    return math.gamma(beta) * math.gamma(1.0 - beta)


def limit_constant(beta: Beta, p: int, law: RenewalLaw | None = None, N_trunc: int = 10**5) -> LimitConstant:
    """Scale constant of the limiting Frechet law (or of ``Z``, super-critical).

    The sub-critical branch carries the truncation bracket of the terminating
    probability; ``value`` uses its tail-extrapolated point estimate.
    """
    beta = parse_beta(beta)
    b = float(beta)
    law = default_law(b) if law is None else law
    reg = regime(beta, p)
    if reg is Regime.SUPER:
        v = (law.c_f / (1.0 - b)) ** p
        return LimitConstant(v, v, v, reg)
    fact = math.factorial(p) * math.factorial(p - 1)
    if reg is Regime.CRITICAL:
        v = 0.5 * (law.c_f * _gamma_pair(b)) ** p / fact
        return LimitConstant(v, v, v, reg)
    q = terminating_prob(law, p, N_trunc)
    d = shape_constant(beta, p).value
    k = d / (2.0 * fact)
    return LimitConstant(q.extrapolated * k, q.lower * k, q.upper * k, reg)


def frechet_max_cdf(x, leb: float, c_frak: float, alpha: float):
    """``exp(-c_frak * leb * x**-alpha)`` for ``x > 0`` and 0 otherwise."""
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros(x.shape)
    pos = x > 0
    out[pos] = np.exp(-c_frak * leb * x[pos] ** (-alpha))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class AggregationIndex:
    c: tuple[int, ...]
    members: tuple[tuple[int, ...], ...]


def _aggregation_count(L_cap: int, p: int, pp: int) -> int:
    return sum(math.comb(L_cap, q) * math.comb(q, p) for q in range(p, pp + 1))


def enumerate_aggregations(L_cap: int, p: int, p_prime: int,
                           guard: int = AGGREGATION_GUARD) -> list[AggregationIndex]:
    """All ``J(c)`` for ``c`` a q-subset of ``{1..L_cap}``, ``p <= q <= p_prime``."""
    if not p <= p_prime <= L_cap:
        raise ValueError("need p <= p_prime <= L_cap")
    total = _aggregation_count(L_cap, p, p_prime)
    if total > guard:
        raise ResourceLimitError(f"{total} aggregation members exceed the guard {guard}")
    out = []
    for q in range(p, p_prime + 1):
        for c in itertools.combinations(range(1, L_cap + 1), q):
            out.append(AggregationIndex(c, tuple(itertools.combinations(c, p))))
    return out


def default_L_cap(p: int, pp: int, budget: int = 200_000) -> int:
    """64 when affordable, otherwise the largest level within ``budget`` members."""
    L = 64
    while L > pp and _aggregation_count(L, p, pp) > budget:
        L -= 1
    return L


@lru_cache(maxsize=16)
def _combos(L_cap: int, q: int) -> np.ndarray:
    return np.array(list(itertools.combinations(range(L_cap), q)), dtype=np.int64).reshape(-1, q)


@dataclass(frozen=True)
class LimitSample:
    z: float
    argmax_index: tuple[int, ...]
    sensitive: bool


def _esp_columns(vals: np.ndarray, p: int) -> np.ndarray:
    # vals has shape (..., q); e_p over the last axis
    E = [np.ones(vals.shape[:-1])] + [np.zeros(vals.shape[:-1]) for _ in range(p)]
    for i in range(vals.shape[-1]):
        a = vals[..., i]
        for j in range(min(p, i + 1), 0, -1):
            E[j] = E[j] + a * E[j - 1]
    return E[p]


def sample_Z_batch(alpha: float, beta: Beta, p: int, size: int, rng: np.random.Generator,
                   L_cap: int | None = None, batch: int = 256):
    """Vectorised draws of ``Z``.

    Returns
    -------
    z : ndarray
        Draws with the full ``L_cap``.
    z_half : ndarray
        Same draws restricted to indices ``<= L_cap // 2``.
    best : ndarray
        ``(c, q)`` of the maximising aggregation, as (q, row) pairs into the
        combination tables; use :func:`sample_Z` for readable output.
    """
    beta = parse_beta(beta)
    if regime(beta, p) is not Regime.SUPER:
        raise RegimeError("Z is defined in the super-critical regime only")
    pp = p_prime(beta)
    L_cap = default_L_cap(p, pp) if L_cap is None else L_cap
    if L_cap < pp:
        raise ValueError(f"L_cap={L_cap} must be >= p'={pp}")
    total = _aggregation_count(L_cap, p, pp)
    if total > AGGREGATION_GUARD:
        raise ResourceLimitError(f"{total} aggregation members exceed the guard {AGGREGATION_GUARD}")
    half = L_cap // 2
    tables = [(q, _combos(L_cap, q)) for q in range(p, pp + 1)]
    z = np.empty(size)
    z_half = np.empty(size)
    best = np.empty((size, 2), dtype=np.int64)
    done = 0
    while done < size:
        # keep the gathered (m, n_comb, q) blocks around 2**22 doubles
        widest = max(len(comb) * q for q, comb in tables)
        m = max(1, min(batch, size - done, 2**22 // widest))
        gam = np.cumsum(rng.standard_exponential((m, L_cap)), axis=1)
        eps = np.where(rng.random((m, L_cap)) < 0.5, -1.0, 1.0)
        a = eps * gam ** (-1.0 / alpha)
        zb = np.full(m, -np.inf)
        zh = np.full(m, -np.inf)
        bq = np.zeros(m, dtype=np.int64)
        br = np.zeros(m, dtype=np.int64)
        for q, comb in tables:
            vals = _esp_columns(a[:, comb], p)  # (m, n_comb)
            arg = np.argmax(vals, axis=1)
            top = vals[np.arange(m), arg]
            better = top > zb
            zb = np.where(better, top, zb)
            bq = np.where(better, q, bq)
            br = np.where(better, arg, br)
            inside = comb[:, -1] < half
            if q <= half and inside.any():
                zh = np.maximum(zh, vals[:, inside].max(axis=1))
        z[done:done + m] = zb
        z_half[done:done + m] = zh
        best[done:done + m, 0] = bq
        best[done:done + m, 1] = br
        done += m
    return z, z_half, best


def sample_Z(alpha: float, beta: Beta, p: int, L_cap: int | None, rng: np.random.Generator,
             tol: float = 1e-6) -> LimitSample:
    """One draw of ``Z`` with its maximising index set ``c`` (1-based)."""
    beta = parse_beta(beta)
    pp = p_prime(beta)
    L_cap = default_L_cap(p, pp) if L_cap is None else L_cap
    z, zh, best = sample_Z_batch(alpha, beta, p, 1, rng, L_cap=L_cap)
    q, row = int(best[0, 0]), int(best[0, 1])
    c = tuple(int(i) + 1 for i in _combos(L_cap, q)[row])
    return LimitSample(float(z[0]), c, bool(abs(z[0] - zh[0]) > tol))


def limit_cdf(params: ModelParams, law: RenewalLaw | None = None, mc_samples: int = 100_000,
              rng: np.random.Generator | None = None, N_trunc: int = 10**5):
    """CDF of the limit of ``M_n / c_n`` as a vectorised callable."""
    c = limit_constant(params.beta, params.p, law, N_trunc)
    if c.regime is not Regime.SUPER:
        return lambda x: frechet_max_cdf(x, 1.0, c.value, params.alpha)
    rng = np.random.default_rng(params.seed) if rng is None else rng
    z, _, _ = sample_Z_batch(params.alpha, params.beta, params.p, mc_samples, rng)
    draws = np.sort(c.value ** (1.0 / params.alpha) * z)

    def ecdf(x):
        x = np.asarray(x, dtype=np.float64)
        out = np.searchsorted(draws, x, side="right") / draws.size
        return out if out.ndim else float(out)

    return ecdf


def limit_max_cdf(x, params: ModelParams, law: RenewalLaw | None = None, mc_samples: int = 100_000,
                  rng: np.random.Generator | None = None):
    """``P(limit <= x)``: closed form (sub/critical) or empirical (super-critical)."""
    return limit_cdf(params, law, mc_samples, rng)(x)


@dataclass(frozen=True)
class RegimeReport:
    alpha: float
    beta: str
    p: int
    beta_q: list[float]
    p_prime: int
    regime: str
    q_beta_p: int | None
    q_frak: float | None
    q_frak_bracket: list[float] | None
    d_shape: float | None
    c_frak: float
    c_frak_bracket: list[float]
    theta: float | None
    c_n: float | None = None
    n: int | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def regime_report(alpha: float, beta: Beta, p: int, n: int | None = None,
                  N_trunc: int = 10**5) -> RegimeReport:
    """All regime constants for ``(alpha, beta, p)`` with the default law."""
    beta = parse_beta(beta)
    b = float(beta)
    law = default_law(b)
    reg = regime(beta, p)
    c = limit_constant(beta, p, law, N_trunc)
    q_frak = q_br = d = qbp = theta = None
    if reg is Regime.SUB:
        tp = terminating_prob(law, p, N_trunc)
        sc = shape_constant(beta, p)
        q_frak, q_br = tp.extrapolated, [tp.lower, tp.upper]
        d, qbp = sc.value, sc.q_beta_p
        theta = q_frak * d
    c_n = None
    if n is not None:
        c_n = normalization(ModelParams(alpha, beta, p, n, L=max(p, 1)))
    return RegimeReport(
        alpha=float(alpha), beta=str(beta), p=p,
        beta_q=[float(beta_index(beta, q)) for q in range(1, p + 1)],
        p_prime=p_prime(beta), regime=reg.value, q_beta_p=qbp,
        q_frak=q_frak, q_frak_bracket=q_br, d_shape=d,
        c_frak=c.value, c_frak_bracket=[c.lower, c.upper], theta=theta, c_n=c_n, n=n,
    )
