"""Command-line experiment driver.

Every subcommand writes a CSV (``# meta: {...}`` line, header row, data) or
a JSON ``{meta, rows}`` document.  The meta block echoes the validated
configuration, seed, library version, regime and stream algorithm.  Wall
time goes to stderr and to ``<out>.timing.json`` so the main output is
byte-identical across reruns and worker counts.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .errors import RegimeError, ResourceLimitError
from .intersection import Regime, parse_beta, regime
from .model import ModelParams
from .output import render, write_atomic
from .runner import WORKERS_ENV, default_workers
from .streams import STREAM_ALGORITHM, seed_stream

__all__ = ["ExperimentConfig", "build_parser", "validate", "run", "main"]

COMMANDS = ("constants", "simulate-path", "max-law", "scaling-sweep", "extremal-index",
            "tail-process", "counts", "diagnostics")


@dataclass(frozen=True)
class ExperimentConfig:
    command: str
    alpha: float = 1.0
    beta: str = "1/2"
    p: int = 1
    n: int | None = None
    n_grid: list[int] | None = None
    replicates: int = 100
    seed: int = 0
    block_length: int | None = None
    L: int | None = None
    K: float = 1.0
    m: int = 3
    quantile: float | None = None
    support: str = "ratio"
    doublings: int = 4
    pairs: bool = False
    limit_samples: int = 2000
    out: str | None = None
    format: str = "csv"
    workers: int = 1
    extra: dict = field(default_factory=dict)

    def echo(self) -> dict:
        d = asdict(self)
        for k in ("out", "workers", "extra"):
            d.pop(k)
        return d


def _grid(text: str) -> list[int]:
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if "^" in tok:
            base, exp = tok.split("^")
            out.append(int(base) ** int(exp))
        elif tok:
            out.append(int(float(tok)) if "e" in tok.lower() else int(tok))
    return out


def _int(text: str) -> int:
    return _grid(text)[0]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stablereg", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--alpha", type=float, default=1.0)
        sp.add_argument("--beta", type=str, required=True, help='decimal or exact ratio such as "3/4"')
        sp.add_argument("--p", type=int, default=1)
        sp.add_argument("--n", type=_int, default=None, help="horizon; accepts 2^k and 1e6 forms")
        sp.add_argument("--n-grid", type=_grid, default=None, help="comma-separated horizons")
        sp.add_argument("--replicates", type=int, default=100)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--block-length", type=int, default=None)
        sp.add_argument("--L", type=int, default=None, help="series truncation level")
        sp.add_argument("--K", type=float, default=1.0, help="product cap multiplier (counts)")
        sp.add_argument("--m", type=int, default=3, help="tail-process window")
        sp.add_argument("--quantile", type=float, default=None)
        sp.add_argument("--support", choices=("ratio", "exact"), default="ratio")
        sp.add_argument("--doublings", type=int, default=4)
        sp.add_argument("--pairs", action="store_true", help="also count overlapping pairs (counts)")
        sp.add_argument("--limit-samples", type=int, default=2000,
                        help="Monte Carlo draws of the super-critical limit (max-law)")
        sp.add_argument("--out", type=str, default=None, help="output file (default: stdout)")
        sp.add_argument("--format", choices=("csv", "json"), default=None)
        sp.add_argument("--workers", type=int, default=None,
                        help=f"replicate-level processes (default: ${WORKERS_ENV} or 1)")
    return parser


_NEEDS_N = {"simulate-path", "max-law", "tail-process", "counts", "diagnostics"}


def validate(ns: argparse.Namespace) -> ExperimentConfig:
    """Check the arguments and return the normalised configuration."""
    beta = parse_beta(ns.beta)
    if not 0 < beta < 1:
        raise ValueError(f"beta must lie in (0, 1), got {ns.beta}")
    fmt = ns.format or ("json" if ns.command == "constants" else "csv")
    workers = default_workers() if ns.workers is None else ns.workers
    if workers < 1:
        raise ValueError("--workers must be >= 1")
    if ns.command in _NEEDS_N and ns.n is None:
        raise ValueError(f"{ns.command} needs --n")
    if ns.command == "scaling-sweep" and not ns.n_grid:
        raise ValueError("scaling-sweep needs --n-grid")
    if ns.command == "extremal-index" and ns.n is None and not ns.n_grid:
        raise ValueError("extremal-index needs --n or --n-grid")
    if ns.replicates < 1:
        raise ValueError("--replicates must be >= 1")
    if ns.quantile is not None and not 0 < ns.quantile < 1:
        raise ValueError("--quantile must lie in (0, 1)")
    if ns.limit_samples < 1:
        raise ValueError("--limit-samples must be >= 1")
    if ns.m < 1:
        raise ValueError("--m must be >= 1")
    # let ModelParams check alpha, p, L and seed
    ModelParams(ns.alpha, beta, ns.p, ns.n or 16, L=ns.L if ns.L else max(ns.p, 64), seed=ns.seed)
    return ExperimentConfig(
        command=ns.command, alpha=ns.alpha, beta=str(beta), p=ns.p, n=ns.n, n_grid=ns.n_grid,
        replicates=ns.replicates, seed=ns.seed, block_length=ns.block_length, L=ns.L, K=ns.K, m=ns.m,
        quantile=ns.quantile, support=ns.support, doublings=ns.doublings, pairs=ns.pairs,
        limit_samples=ns.limit_samples,
        out=ns.out, format=fmt, workers=workers,
    )


def _params(cfg: ExperimentConfig, n: int | None = None, L: int | None = None) -> ModelParams:
    n = cfg.n if n is None else n
    L = L if L is not None else (cfg.L if cfg.L else max(cfg.p, 64))
    return ModelParams(cfg.alpha, cfg.beta, cfg.p, n, L=L, seed=cfg.seed)


def _scheme(cfg: ExperimentConfig, n: int):
    from .empirics import BlockScheme, default_block_scheme

    if cfg.block_length:
        return BlockScheme(n, cfg.block_length)
    return default_block_scheme(n, parse_beta(cfg.beta), cfg.p)


def _cmd_constants(cfg):
    from .limits import regime_report

    rep = regime_report(cfg.alpha, cfg.beta, cfg.p, n=cfg.n)
    return [rep.to_dict()], {}


def _cmd_simulate_path(cfg):
    from .model import simulate_path

    params = _params(cfg)
    path = simulate_path(params)
    rows = [{"k": k + 1, "x": float(v)} for k, v in enumerate(path.values)]
    return rows, {"L": params.L}


def _cmd_max_law(cfg):
    from .empirics import _max_worker, sweep_L
    from .limits import limit_cdf, normalization
    from .runner import run_parallel

    params = _params(cfg)
    L = cfg.L or sweep_L(params)
    jobs = [(cfg.alpha, params.beta, cfg.p, cfg.n, L, cfg.seed, r) for r in range(cfg.replicates)]
    m = np.array(run_parallel(_max_worker, jobs, cfg.workers))
    c_n = normalization(params)
    # the super-critical limit is itself Monte Carlo; its draws use a stream past the replicates
    cdf = limit_cdf(params, rng=seed_stream(cfg.seed, cfg.replicates), mc_samples=cfg.limit_samples)
    z = m / c_n
    F = np.atleast_1d(cdf(z))
    rows = [{"replicate": r, "max": float(m[r]), "normalized": float(z[r]), "limit_cdf": float(F[r])}
            for r in range(cfg.replicates)]
    return rows, {"L": L, "c_n": c_n}


def _cmd_scaling_sweep(cfg):
    from .empirics import scaling_sweep

    res = scaling_sweep(cfg.alpha, cfg.beta, cfg.p, cfg.n_grid, cfg.replicates, cfg.seed,
                        L=cfg.L, workers=cfg.workers, limit_samples=cfg.limit_samples)
    rows = []
    for r in res.rows:
        d = asdict(r)
        d["ks"] = res.ks.get(r.n)
        rows.append(d)
    return rows, {"slope": res.slope, "cov": res.cov}


def _cmd_extremal_index(cfg):
    from .empirics import extremal_index_pooled

    grid = cfg.n_grid or [cfg.n]
    q = 0.995 if cfg.quantile is None else cfg.quantile
    theory = None
    if regime(parse_beta(cfg.beta), cfg.p) is Regime.SUB:
        from .limits import regime_report

        theory = regime_report(cfg.alpha, cfg.beta, cfg.p).theta
    elif regime(parse_beta(cfg.beta), cfg.p) is Regime.CRITICAL:
        theory = 0.0
    rows = []
    for n in grid:
        res = extremal_index_pooled(_params(cfg, n=n), cfg.replicates, q=q, scheme=_scheme(cfg, n),
                                    L=cfg.L, workers=cfg.workers)
        rows.append({"n": n, "d_n": res.d_n, "L": res.L, "quantile": q, "threshold": res.threshold,
                     "exceedances": res.counts.exceedances, "blocks_hit": res.counts.blocks_hit,
                     "theta_hat": res.theta, "theta_limit": theory})
    return rows, {}


def _cmd_tail_process(cfg):
    from .empirics import conditional_tail_check, quantile_L

    params = _params(cfg)
    params = params.replace(L=cfg.L or quantile_L(params))
    q = 0.999 if cfg.quantile is None else cfg.quantile
    rep = conditional_tail_check(params, x_quantile=q, m=cfg.m, replicates=cfg.replicates,
                                 support=cfg.support, min_exceedances=1)
    cells = sorted(set(rep.theory) | set(rep.empirical))
    rows = [{"sign": c[0], "pattern": "".join(str(v) for v in c[1:]),
             "empirical": rep.empirical.get(c, 0.0), "theory": rep.theory.get(c, 0.0)} for c in cells]
    return rows, {"tv": rep.tv, "exceedances": rep.exceedances, "L": params.L}


def _cmd_counts(cfg):
    from .combinatorics import count_C_n1, count_C_n2, h_domain, r_n
    from .renewal import default_law, renewal_tables

    params = _params(cfg)
    law = default_law(params.beta)
    tables = renewal_tables(law, cfg.n)
    c1 = count_C_n1(params, law, tables, cfg.K)
    rows = [{"quantity": "C_n1", "r": None, "exact": c1.exact, "asymptotic": c1.asymptotic, "ratio": c1.ratio}]
    if cfg.pairs:
        for r in range(cfg.p + 1):
            rows.append({"quantity": "C_n2", "r": r, "exact": count_C_n2(params, tables, cfg.K, r),
                         "asymptotic": None, "ratio": None})
    dom = h_domain(params, tables, cfg.K)
    return rows, {"r_n": r_n(params, tables), "w_n": float(tables.w[cfg.n]), "x_cap": dom.x, "i_max": dom.i_max}


def _cmd_diagnostics(cfg):
    from .empirics import rho_block_exact, rho_block_mc
    from .model import truncation_diagnostic
    from .renewal import default_law, renewal_tables

    params = _params(cfg)
    rep = truncation_diagnostic(params, reps=cfg.replicates, doublings=cfg.doublings)
    rows = [dict(kind="truncation", **r) for r in rep.rows()]
    extra = {"recommended_L": rep.recommended_L, "threshold": rep.threshold}
    if regime(params.beta, params.p) is not Regime.SUPER:
        law = default_law(params.beta)
        tables = renewal_tables(law, cfg.n)
        scheme = _scheme(cfg, cfg.n)
        mc = rho_block_mc(params, law, tables, scheme, max(1000, cfg.replicates * 100),
                          seed_stream(cfg.seed, cfg.replicates))
        rows.append({"kind": "rho", "d_n": scheme.d_n, "rho_exact": rho_block_exact(params, law, tables, scheme),
                     "rho_mc": mc.rho_hat, "rho_se": mc.se, "rho_asymptotic": mc.asymptotic})
    return rows, extra


_DISPATCH = {
    "constants": _cmd_constants,
    "simulate-path": _cmd_simulate_path,
    "max-law": _cmd_max_law,
    "scaling-sweep": _cmd_scaling_sweep,
    "extremal-index": _cmd_extremal_index,
    "tail-process": _cmd_tail_process,
    "counts": _cmd_counts,
    "diagnostics": _cmd_diagnostics,
}


def run(cfg: ExperimentConfig) -> tuple[str, float]:
    """Execute ``cfg``; returns the rendered document and the wall time in seconds."""
    t0 = time.perf_counter()
    rows, extra = _DISPATCH[cfg.command](cfg)
    meta = {
        "command": cfg.command,
        "config": cfg.echo(),
        "seed": cfg.seed,
        "version": __version__,
        "regime": regime(parse_beta(cfg.beta), cfg.p).value,
        "stream_algorithm": STREAM_ALGORITHM,
        "summary": extra,
    }
    text = render(meta, rows, cfg.format)
    return text, time.perf_counter() - t0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        cfg = validate(ns)
    except (ValueError, RegimeError) as exc:
        print(f"stablereg: invalid configuration: {exc}", file=sys.stderr)
        return 2
    try:
        text, wall = run(cfg)
    except ResourceLimitError as exc:
        print(f"stablereg: resource guard tripped: {exc}", file=sys.stderr)
        return 3
    except (ValueError, RegimeError) as exc:
        print(f"stablereg: {exc}", file=sys.stderr)
        return 2
    if cfg.out:
        write_atomic(cfg.out, text)
        write_atomic(cfg.out + ".timing.json",
                     json.dumps({"wall_time_s": wall, "workers": cfg.workers, "version": __version__}) + "\n")
    else:
        sys.stdout.write(text)
    print(f"stablereg: {cfg.command} finished in {wall:.3f} s", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
