"""Statistics on simulated paths: sup-measures, block maxima, extremal index,
KS distances, scaling sweeps, block-hit probabilities and tail-process checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .errors import RegimeError
from .intersection import (Beta, Regime, intersection_gap_law, parse_beta, regime, tail_pattern_law,
                           terminating_prob)
from .limits import limit_cdf, normalization
from .model import ModelParams, PathRealization, evaluate_path, sample_environment
from .renewal import (RenewalLaw, RenewalTables, default_law, renewal_tables, sample_conditioned_renewals)
from .streams import seed_stream

__all__ = [
    "BlockScheme",
    "ExceedanceCounts",
    "SweepRow",
    "SweepResult",
    "RhoEstimate",
    "TailCheckReport",
    "default_block_scheme",
    "empirical_supmeasure",
    "block_maxima",
    "exceedance_counts",
    "extremal_index_blocks",
    "ks_distance",
    "ExtremalIndexResult",
    "extremal_index_pooled",
    "sweep_L",
    "quantile_L",
    "scaling_sweep",
    "rho_block_mc",
    "rho_block_exact",
    "conditional_tail_check",
]


def _values(path) -> np.ndarray:
    return path.values if isinstance(path, PathRealization) else np.asarray(path, dtype=np.float64)


def _exact(x) -> Fraction:
    # floats are read as their shortest decimal repr, so 0.3 means 3/10
    return Fraction(repr(x)) if isinstance(x, float) else Fraction(x)


def _index_range(n: int, a, b) -> tuple[int, int]:
    # sites k in 1..n with a <= k/n <= b, computed exactly
    lo = max(1, math.ceil(_exact(a) * n))
    hi = min(n, math.floor(_exact(b) * n))
    return lo, hi


def empirical_supmeasure(path, intervals: Sequence) -> list[float]:
    """``M_n(G) = max_{k/n in G} X_k`` for each ``G``.

    Each ``G`` is a closed interval ``(a, b)`` or a list of such intervals
    (their union).  An empty index set gives ``-inf``.
    """
    x = _values(path)
    n = x.size
    out = []
    for g in intervals:
        parts = [g] if np.isscalar(g[0]) else list(g)
        best = -math.inf
        for a, b in parts:
            if not 0 <= a <= b <= 1:
                raise ValueError(f"interval ({a}, {b}) not inside [0, 1]")
            lo, hi = _index_range(n, a, b)
            if lo <= hi:
                best = max(best, float(x[lo - 1:hi].max()))
        out.append(best)
    return out


@dataclass(frozen=True)
class BlockScheme:
    n: int
    d_n: int

    def __post_init__(self):
        if not 1 <= self.d_n <= self.n:
            raise ValueError(f"block length {self.d_n} must lie in 1..{self.n}")

    @property
    def k_n(self) -> int:
        return self.n // self.d_n

    def block(self, j: int) -> range:
        """Sites of block ``j`` (1-based)."""
        return range((j - 1) * self.d_n + 1, j * self.d_n + 1)


def default_block_scheme(n: int, beta: Beta, p: int) -> BlockScheme:
    """``floor(sqrt n)`` blocks, or ``ceil(n / log^p n)`` in the critical regime."""
    if regime(beta, p) is Regime.CRITICAL:
        d = math.ceil(n / math.log(n) ** p)
    else:
        d = math.isqrt(n)
    return BlockScheme(n, max(1, min(d, n)))


def block_maxima(path, scheme: BlockScheme) -> np.ndarray:
    x = _values(path)
    k, d = scheme.k_n, scheme.d_n
    return x[:k * d].reshape(k, d).max(axis=1)


@dataclass(frozen=True)
class ExceedanceCounts:
    """Sufficient statistics of the blocks estimator; add them to pool replicates."""

    exceedances: int
    blocks_hit: int

    def __add__(self, other: "ExceedanceCounts") -> "ExceedanceCounts":
        return ExceedanceCounts(self.exceedances + other.exceedances, self.blocks_hit + other.blocks_hit)

    @property
    def theta(self) -> float:
        return self.blocks_hit / self.exceedances if self.exceedances else math.nan


def exceedance_counts(path, scheme: BlockScheme, u: float) -> ExceedanceCounts:
    x = _values(path)
    k, d = scheme.k_n, scheme.d_n
    blocks = x[:k * d].reshape(k, d)
    return ExceedanceCounts(int(np.count_nonzero(blocks > u)), int(np.count_nonzero(blocks.max(axis=1) > u)))


def extremal_index_blocks(path, scheme: BlockScheme, u: float) -> float:
    """Blocks estimator ``#{blocks with max > u} / #{k : X_k > u}``; NaN without exceedances."""
    return exceedance_counts(path, scheme, u).theta


def ks_distance(samples, cdf: Callable) -> float:
    """Sup distance between the empirical CDF of ``samples`` and ``cdf``."""
    samples = np.asarray(samples, dtype=np.float64)
    if samples.size == 0:
        raise ValueError("samples must be non-empty")
    return float(stats.kstest(samples, cdf).statistic)


def sweep_L(params: ModelParams) -> int:
    """Truncation level for maxima (sweeps, sup-measures).

    64 in the super-critical regime, where the top few terms carry the
    maximum; 512 otherwise, the level at which the truncation diagnostic
    brings the median sup-norm gap below 1% of ``c_n``.
    """
    return 64 if regime(params.beta, params.p) is Regime.SUPER else 512


def quantile_L(params: ModelParams) -> int:
    """Truncation level when quantiles of ``|X|`` matter (extremal index, tail process).

    The bulk of ``|X|`` comes from series terms with index up to a few
    ``W_n``; the smallest power of two above ``4 W_n`` is used, capped at 2**15.
    """
    law = default_law(params.beta)
    W = float(renewal_tables(law, params.n).cumulative_first_hit[params.n])
    return int(min(2**15, max(64, 2 ** math.ceil(math.log2(4 * W)))))


@dataclass(frozen=True)
class SweepRow:
    n: int
    replicates: int
    median_max: float
    c_n: float
    normalized: float
    regime: str


@dataclass
class SweepResult:
    rows: list[SweepRow]
    slope: float
    cov: float
    ks: dict[int, float] = field(default_factory=dict)
    normalized_maxima: dict[int, np.ndarray] = field(default_factory=dict, repr=False)


def _max_worker(args) -> float:
    alpha, beta, p, n, L, seed, index = args
    params = ModelParams(alpha, beta, p, n, L=L)
    law = default_law(params.beta)
    tables = renewal_tables(law, n)
    env = sample_environment(params, law, tables, seed_stream(seed, index))
    return float(evaluate_path(env, params, tables).values.max())


def scaling_sweep(alpha: float, beta: Beta, p: int, n_grid: Sequence[int], replicates: int, seed: int,
                  L: int | None = None, workers: int = 1, ks: bool = True,
                  limit_samples: int = 2000) -> SweepResult:
    """Median of the path maximum over replicates for each ``n``.

    Returns rows, the least-squares slope of ``log median`` against ``log n``,
    the coefficient of variation of the normalised medians and (``ks=True``)
    the KS distance of the normalised maxima to the limit law.  Replicate
    ``r`` uses stream ``r`` at every grid point (common random numbers
    across ``n``).  In the super-critical regime the limit law is itself
    sampled (``limit_samples`` draws from stream ``replicates``).
    """
    from .runner import run_parallel

    beta = parse_beta(beta)
    n_grid = [int(n) for n in n_grid]
    if len(n_grid) < 4:
        raise ValueError("the grid needs at least 4 points")
    reg = regime(beta, p)
    rows, maxima = [], {}
    for n in n_grid:
        params = ModelParams(alpha, beta, p, n, L=L if L else 64)
        if L is None:
            params = params.replace(L=sweep_L(params))
        jobs = [(alpha, beta, p, n, params.L, seed, r) for r in range(replicates)]
        m = np.array(run_parallel(_max_worker, jobs, workers))
        c_n = normalization(params)
        med = float(np.median(m))
        rows.append(SweepRow(n, replicates, med, c_n, med / c_n, reg.value))
        maxima[n] = m / c_n
    slope = float(np.polyfit(np.log(n_grid), np.log([r.median_max for r in rows]), 1)[0])
    norm = np.array([r.normalized for r in rows])
    cov = float(norm.std(ddof=1) / norm.mean())
    ks_vals = {}
    if ks:
        cdf = limit_cdf(ModelParams(alpha, beta, p, n_grid[-1], seed=seed), mc_samples=limit_samples,
                        rng=seed_stream(seed, replicates))
        ks_vals = {n: ks_distance(v, cdf) for n, v in maxima.items()}
    return SweepResult(rows, slope, cov, ks_vals, maxima)


@dataclass(frozen=True)
class ExtremalIndexResult:
    n: int
    d_n: int
    L: int
    quantile: float
    threshold: float
    counts: ExceedanceCounts
    replicates: int
    regime: str

    @property
    def theta(self) -> float:
        return self.counts.theta


def _path_worker(args) -> np.ndarray:
    alpha, beta, p, n, L, seed, index = args
    params = ModelParams(alpha, beta, p, n, L=L)
    law = default_law(params.beta)
    tables = renewal_tables(law, n)
    env = sample_environment(params, law, tables, seed_stream(seed, index))
    return evaluate_path(env, params, tables).values


def extremal_index_pooled(params: ModelParams, replicates: int, q: float = 0.995,
                          scheme: BlockScheme | None = None, L: int | None = None,
                          workers: int = 1) -> ExtremalIndexResult:
    """Blocks estimator pooled over replicates at the pooled ``q``-quantile of ``X``.

    Replicate ``r`` uses stream ``r`` of ``params.seed``; ``L`` defaults to
    :func:`quantile_L`.
    """
    from .runner import run_parallel

    if not 0.0 < q < 1.0:
        raise ValueError("q must lie in (0, 1)")
    L = quantile_L(params) if L is None else L
    scheme = default_block_scheme(params.n, params.beta, params.p) if scheme is None else scheme
    jobs = [(params.alpha, params.beta, params.p, params.n, L, params.seed, r) for r in range(replicates)]
    paths = run_parallel(_path_worker, jobs, workers)
    u = float(np.quantile(np.concatenate(paths), q))
    counts = ExceedanceCounts(0, 0)
    for x in paths:
        counts = counts + exceedance_counts(x, scheme, u)
    return ExtremalIndexResult(params.n, scheme.d_n, L, q, u, counts, replicates,
                               regime(params.beta, params.p).value)


@dataclass(frozen=True)
class RhoEstimate:
    rho_hat: float
    se: float
    asymptotic: float
    hits: int
    trials: int

    @property
    def ratio(self) -> float:
        return self.rho_hat / self.asymptotic


def rho_block_mc(params: ModelParams, law: RenewalLaw | None, tables: RenewalTables | None,
                 scheme: BlockScheme, reps: int, rng: np.random.Generator) -> RhoEstimate:
    """Estimate ``rho_n = P(p independent conditioned paths share a site of block 1) / 2``.

    Conditioning on each path reaching block 1 is exact: that happens with
    probability ``W_d / W_n`` and the restriction of the path to ``{1..d}`` is
    then a path conditioned to hit ``{1..d}``.  So

        rho_n = (W_d / W_n)^p * P(p paths conditioned on {1..d} intersect) / 2

    and only the inner probability is simulated.
    """
    reg = regime(params.beta, params.p)
    if reg is Regime.SUPER and params.p > 1:
        raise RegimeError("block-hit asymptotics are stated for the critical and sub-critical regimes")
    if reps < 1000:
        raise ValueError("reps must be >= 1000")
    law = default_law(params.beta) if law is None else law
    n, p, d = params.n, params.p, scheme.d_n
    tables = renewal_tables(law, n) if tables is None else tables
    W = tables.cumulative_first_hit
    reach = (W[d] / W[n]) ** p
    if p == 1:
        hits = reps
    else:
        stride = d + 1
        keys = []
        for _ in range(p):
            bundle = sample_conditioned_renewals(law, tables, d, reps, rng)
            keys.append(bundle.owners() * stride + bundle.hits)
        common = keys[0]
        for k in keys[1:]:
            common = np.intersect1d(common, k, assume_unique=True)
        hits = int(np.unique(common // stride).size)
    frac = hits / reps
    rho = 0.5 * reach * frac
    se = 0.5 * reach * math.sqrt(frac * (1 - frac) / reps)
    return RhoEstimate(rho, se, _rho_asymptotic(params, law, tables, scheme), hits, reps)


def _rho_asymptotic(params: ModelParams, law: RenewalLaw, tables: RenewalTables, scheme: BlockScheme) -> float:
    reg = regime(params.beta, params.p)
    n, p, d = params.n, params.p, scheme.d_n
    b = params.beta_float
    w = float(tables.w[n])
    if reg is Regime.SUB:
        q = terminating_prob(law, p).extrapolated
        return 0.5 * q * n / (scheme.k_n * w ** p)
    if reg is Regime.CRITICAL:
        return 0.5 * (d / w ** p) * (law.c_f * math.gamma(b) * math.gamma(1 - b)) ** p / math.log(d)
    return math.nan


def rho_block_exact(params: ModelParams, law: RenewalLaw | None, tables: RenewalTables | None,
                    scheme: BlockScheme) -> float:
    """Exact ``rho_n = sum_{j<d} P(eta_1 > j) / (2 W_n^p)``.

    Sums over the last common site ``k`` of block 1: all p paths contain
    ``k`` with probability ``W_n^-p`` and, by the renewal property, share no
    later site of the block with probability ``P(eta_1 > d - k)``.
    """
    law = default_law(params.beta) if law is None else law
    tables = renewal_tables(law, params.n) if tables is None else tables
    _, survive = intersection_gap_law(law, params.p, scheme.d_n)
    W = float(tables.cumulative_first_hit[params.n])
    return 0.5 * float(np.sum(survive[:scheme.d_n])) / W ** params.p


@dataclass
class TailCheckReport:
    tv: float
    exceedances: int
    empirical: dict[tuple, float]
    theory: dict[tuple, float]
    support: str
    threshold_quantile: float


def _pattern_theory(law: RenewalLaw, p: int, m: int) -> dict[tuple, float]:
    base = tail_pattern_law(law, p, m)
    out = {}
    for s in (-1, 1):
        for pat, pr in base.items():
            out[(s,) + pat] = 0.5 * pr
    return out


def conditional_tail_check(params: ModelParams, law: RenewalLaw | None = None, tables: RenewalTables | None = None,
                           x_quantile: float = 0.999, m: int = 3, replicates: int = 50, seed: int | None = None,
                           support: str = "ratio", min_exceedances: int = 2000) -> TailCheckReport:
    """Compare the law of ``(sign X_k, pattern of X_{k+1..k+m})`` at exceedances with ``(eps, Theta*)``.

    ``support="exact"`` marks site ``k + j`` as 1 when ``X_{k+j} != 0``;
    ``support="ratio"`` marks it as 1 when ``X_{k+j} / |X_k|`` is closer to
    ``sign(X_k)`` than to 0, matching the limit ``X_j / |X_0| -> eps Theta*_j``.
    A pattern whose ratio rounds to the opposite sign is kept as its own
    cell (it has zero limit probability).  The threshold is the
    ``x_quantile`` quantile of ``|X|`` of each replicate.
    """
    if support not in ("ratio", "exact"):
        raise ValueError("support must be 'ratio' or 'exact'")
    law = default_law(params.beta) if law is None else law
    tables = renewal_tables(law, params.n) if tables is None else tables
    seed = params.seed if seed is None else seed
    counts: dict[tuple, int] = {}
    total = 0
    for r in range(replicates):
        env = sample_environment(params, law, tables, seed_stream(seed, r))
        x = evaluate_path(env, params, tables).values
        a = np.abs(x)
        u = np.quantile(a, x_quantile)
        ks = np.flatnonzero(a[:x.size - m] > u)
        if ks.size == 0:
            continue
        sign = np.sign(x[ks]).astype(np.int64)
        cols = [sign]
        for j in range(1, m + 1):
            nxt = x[ks + j]
            if support == "exact":
                cols.append((nxt != 0).astype(np.int64))
            else:
                rel = nxt / a[ks]
                cell = np.where(np.abs(rel) < 0.5, 0, np.where(np.sign(rel) == sign, 1, -1))
                cols.append(cell.astype(np.int64))
        keys, freq = np.unique(np.stack(cols, axis=1), axis=0, return_counts=True)
        for key, c in zip(map(tuple, keys.tolist()), freq.tolist()):
            counts[key] = counts.get(key, 0) + c
        total += int(ks.size)
    if total < min_exceedances:
        raise RuntimeError(f"only {total} exceedances collected; need {min_exceedances}")
    theory = _pattern_theory(law, params.p, m)
    empirical = {k: c / total for k, c in counts.items()}
    cells = set(theory) | set(empirical)
    tv = 0.5 * sum(abs(empirical.get(c, 0.0) - theory.get(c, 0.0)) for c in cells)
    return TailCheckReport(tv, total, empirical, theory, support, x_quantile)
