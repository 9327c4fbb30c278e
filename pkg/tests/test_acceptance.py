"""Acceptance suite: one PASS/FAIL line per criterion.

Tolerances and configurations are fixed below and were not tuned against
the outcomes.  Run with ``pytest tests/test_acceptance.py -v``; the summary
lines are also printed at the end of the session, or run this file directly.
"""

from __future__ import annotations

import itertools
import math
import sys
from fractions import Fraction

import numpy as np
import pytest
from scipy import stats

from stablereg.cli import main as cli_main
from stablereg.combinatorics import TupleDomain, count_asymptotic, count_tuples, product_uniform_cdf
from stablereg.empirics import (BlockScheme, conditional_tail_check, extremal_index_pooled, quantile_L,
                                rho_block_mc, scaling_sweep)
from stablereg.intersection import intersection_tail_mc, shape_constant, terminating_prob
from stablereg.limits import limit_constant, sample_Z_batch
from stablereg.model import ModelParams, elementary_symmetric
from stablereg.renewal import default_law, renewal_mass, renewal_tables, sample_conditioned_renewals
from stablereg.streams import seed_stream

SEED = 0

# criterion tolerances
C1_TOL = 1e-10
C2_BAND = (0.9, 1.1)
C3_SE = 5.0
C3_LEVEL = 0.01
C4_REL = 1e-12
C5_KS = 0.02
C6_SE = 3.0
C7_BAND = (0.8, 1.2)
C8_SE = 3.0
C9_TOL = 1e-12
C10_SLOPE, C10_TOL = 0.4, 0.10
C11_COV = 0.20
C12_TOL = 0.15
C13_SUB = (0.7, 1.3)
C13_CRIT = (0.6, 1.5)
C14_TV = 0.1

RESULTS: list[str] = []


def record(num: int, ok: bool, detail: str) -> None:
    line = f"criterion {num:2d}: {'PASS' if ok else 'FAIL'} | {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def test_c01_stationary_identity():
    worst = 0.0
    for beta in (0.3, 0.5, 0.75):
        tab = renewal_mass(default_law(beta), 10**4)
        conv = np.convolve(tab.tail, tab.u)[:10**4 + 1]
        worst = max(worst, float(np.max(np.abs(conv - 1.0))))
    record(1, worst < C1_TOL, f"max |sum F(j)u(k-j) - 1| = {worst:.3e} (tol {C1_TOL:g})")


def test_c02_mass_asymptotic():
    n = 10**5
    u = renewal_mass(default_law(0.5), n, method="direct").u
    v = float(u[n] * math.pi * math.sqrt(n))
    record(2, C2_BAND[0] <= v <= C2_BAND[1], f"u(1e5) pi sqrt(1e5) = {v:.6f} (band {C2_BAND})")


def test_c03_conditioned_coverage():
    n, size = 512, 10**5
    law = default_law(0.5)
    tab = renewal_tables(law, n)
    bundle = sample_conditioned_renewals(law, tab, n, size, seed_stream(SEED, 3))
    counts = np.bincount(bundle.hits, minlength=n + 1)[1:]
    p0 = 1.0 / float(tab.cumulative_first_hit[n])
    se = math.sqrt(p0 * (1 - p0) / size)
    z = np.abs(counts / size - p0) / se
    chi = stats.chisquare(counts)
    ok = bool(z.max() < C3_SE) and chi.pvalue > C3_LEVEL
    record(3, ok, f"max |z| = {z.max():.2f} (< {C3_SE:g}), chi-square p = {chi.pvalue:.3f} (> {C3_LEVEL:g})")


def test_c04_esp_oracle():
    rng = seed_stream(SEED, 4)
    worst = 0.0
    for _ in range(1000):
        size = int(rng.integers(0, 9))
        p = int(rng.integers(0, 5))
        vals = (np.where(rng.random(size) < 0.5, -1.0, 1.0) * np.cumsum(rng.standard_exponential(size)) ** -1.0)
        got = elementary_symmetric(vals, p)
        terms = [math.prod(c) for c in itertools.combinations(vals.tolist(), p)]
        want = math.fsum(terms)
        if want != 0.0:
            worst = max(worst, abs(got - want) / abs(want))
        else:
            worst = max(worst, abs(got))
    record(4, worst <= C4_REL, f"max relative error = {worst:.3e} over 1000 inputs (tol {C4_REL:g})")


def test_c05_Z_anchor():
    z, _, _ = sample_Z_batch(1.0, 0.4, 1, 10**4, seed_stream(SEED, 5))
    ks = stats.kstest(z, lambda x: np.where(x > 0, np.exp(-1.0 / (2.0 * np.maximum(x, 1e-300))), 0.0)).statistic
    record(5, ks < C5_KS, f"KS = {ks:.4f} (< {C5_KS:g})")


def test_c06_product_uniforms():
    s, p, size = 0.01, 3, 10**6
    x = seed_stream(SEED, 6).random((size, p)).prod(axis=1)
    emp = float(np.mean(x <= s))
    exact = product_uniform_cdf(s, p)
    se = math.sqrt(exact * (1 - exact) / size)
    record(6, abs(emp - exact) < C6_SE * se,
           f"closed form {exact:.6f}, MC {emp:.6f}, |diff|/SE = {abs(emp - exact) / se:.2f} (< {C6_SE:g})")


def test_c07_count_asymptotic():
    xs = [10**3, 10**4, 10**5, 10**6]
    ratios = [count_tuples(TupleDomain(2, float(x))) / count_asymptotic(float(x), 2) for x in xs]
    gaps = [abs(r - 1) for r in ratios]
    mono = all(a > b for a, b in zip(gaps, gaps[1:]))
    ok = mono and C7_BAND[0] <= ratios[-1] <= C7_BAND[1]
    record(7, ok, "ratios " + ", ".join(f"{r:.4f}" for r in ratios) + f"; monotone toward 1: {mono}")


def test_c08_terminating_probability():
    law = default_law(0.5)
    tp = terminating_prob(law, 3, 10**5)
    mc, se = intersection_tail_mc(law, 3, 10**5, 10**5, seed_stream(SEED, 8))
    agree = abs(tp.extrapolated - mc) < C8_SE * se
    inside = tp.lower <= mc <= tp.upper
    record(8, agree and inside,
           f"series {tp.extrapolated:.5f} bracket [{tp.lower:.5f}, {tp.upper:.5f}], MC {mc:.5f} (SE {se:.5f}); "
           f"within 3 SE: {agree}; bracket contains MC: {inside}")


def _shape_exact(beta: Fraction, p: int) -> Fraction:
    bs = [s * beta - s + 1 for s in range(p + 1)]
    q = min(s for s in range(1, p + 1) if bs[s] < 0)
    return sum(((-1) ** (p - s) * math.comb(p, s) * (-bs[s]) ** (p - 1) for s in range(q, p + 1)), Fraction(0))


def test_c09_extremal_index_identity():
    worst = 0.0
    for p, beta in ((2, Fraction(2, 5)), (3, Fraction(1, 2)), (2, Fraction(1, 4))):
        law = default_law(beta)
        lhs = 2 * math.factorial(p) * math.factorial(p - 1) * limit_constant(beta, p, law).value
        rhs = terminating_prob(law, p).extrapolated * float(_shape_exact(beta, p))
        assert shape_constant(beta, p).value == float(_shape_exact(beta, p))
        worst = max(worst, abs(lhs - rhs) / abs(rhs))
    record(9, worst < C9_TOL, f"max relative gap = {worst:.3e} (tol {C9_TOL:g})")


GRID = [2**k for k in range(12, 19)]


def test_c10_super_scaling():
    res = scaling_sweep(1.0, 0.8, 2, GRID, 200, SEED, ks=False)
    record(10, abs(res.slope - C10_SLOPE) <= C10_TOL,
           f"slope = {res.slope:.4f} (target {C10_SLOPE} +/- {C10_TOL})")


def test_c11_sub_stabilization():
    res = scaling_sweep(1.0, 0.4, 2, GRID, 200, SEED)
    top = [res.ks[n] for n in GRID[-3:]]
    trend = all(a >= b for a, b in zip(top, top[1:]))
    ok = res.cov < C11_COV and trend
    record(11, ok, f"CoV = {res.cov:.4f} (< {C11_COV}); normalized medians "
           + ", ".join(f"{r.normalized:.4f}" for r in res.rows)
           + "; KS at 2^16..2^18 = " + ", ".join(f"{v:.4f}" for v in top) + f"; non-increasing: {trend}")


def test_c12_extremal_index():
    law = default_law(0.4)
    target = terminating_prob(law, 2).extrapolated * 0.2
    sub = extremal_index_pooled(ModelParams(1.0, 0.4, 2, 2**18, seed=SEED), 100, q=0.995)
    sub_ok = abs(sub.theta - target) <= C12_TOL
    crit = [extremal_index_pooled(ModelParams(1.0, Fraction(1, 2), 2, 2**k, seed=SEED), 100, q=0.995).theta
            for k in (14, 16, 18)]
    crit_ok = all(a > b for a, b in zip(crit, crit[1:]))
    record(12, sub_ok and crit_ok,
           f"sub theta_hat = {sub.theta:.4f} vs {target:.4f} +/- {C12_TOL} ({sub_ok}); "
           f"critical theta_hat at 2^14, 2^16, 2^18 = " + ", ".join(f"{t:.4f}" for t in crit)
           + f" decreasing: {crit_ok}")


def test_c13_block_hit():
    law = default_law(0.4)
    n = 10**6
    params = ModelParams(1.0, 0.4, 2, n)
    tab = renewal_tables(law, n)
    sub = rho_block_mc(params, law, tab, BlockScheme(n, 1000), 10**4, seed_stream(SEED, 13))
    sub_ok = C13_SUB[0] <= sub.ratio <= C13_SUB[1]
    claw = default_law(0.5)
    cparams = ModelParams(1.0, Fraction(1, 2), 2, n)
    ctab = renewal_tables(claw, n)
    d = math.ceil(n / math.log(n) ** 2)
    crit = rho_block_mc(cparams, claw, ctab, BlockScheme(n, d), 10**4, seed_stream(SEED, 14))
    crit_ok = C13_CRIT[0] <= crit.ratio <= C13_CRIT[1]
    record(13, sub_ok and crit_ok,
           f"sub ratio = {sub.ratio:.4f} in {C13_SUB} ({sub_ok}); "
           f"critical d_n={d} ratio = {crit.ratio:.4f} in {C13_CRIT} ({crit_ok})")


def test_c14_tail_process():
    params = ModelParams(1.0, 0.6, 2, 2**16, seed=SEED)
    params = params.replace(L=quantile_L(params))
    rep = conditional_tail_check(params, x_quantile=0.999, m=3, replicates=40, min_exceedances=2000)
    record(14, rep.tv < C14_TV, f"TV = {rep.tv:.4f} (< {C14_TV}) over {rep.exceedances} exceedances, L={params.L}")


DETERMINISM_RUNS = [
    ["constants", "--beta", "3/4", "--p", "2"],
    ["simulate-path", "--beta", "0.6", "--p", "2", "--n", "2048"],
    ["max-law", "--beta", "0.8", "--p", "2", "--n", "2048", "--replicates", "8", "--limit-samples", "500"],
    ["scaling-sweep", "--beta", "0.4", "--p", "2", "--n-grid", "512,1024,2048,4096", "--replicates", "6",
     "--L", "64"],
    ["extremal-index", "--beta", "1/2", "--p", "2", "--n-grid", "1024,4096", "--replicates", "4"],
    ["tail-process", "--beta", "0.6", "--p", "2", "--n", "4096", "--replicates", "4"],
    ["counts", "--beta", "0.4", "--p", "2", "--n", "1e6", "--pairs"],
    ["diagnostics", "--beta", "0.4", "--p", "2", "--n", "2048", "--replicates", "4", "--doublings", "2"],
]


def test_c15_determinism(tmp_path):
    bad = []
    for args in DETERMINISM_RUNS:
        outputs = []
        for tag, workers in (("a", 1), ("b", 1), ("c", 2), ("d", 3)):
            out = tmp_path / f"{args[0]}.{tag}.csv"
            assert cli_main(args + ["--seed", "17", "--workers", str(workers), "--out", str(out)]) == 0
            outputs.append(out.read_bytes())
        if any(o != outputs[0] for o in outputs[1:]):
            bad.append(args[0])
    record(15, not bad, f"{len(DETERMINISM_RUNS)} subcommands at workers 1, 1, 2, 3; differing: {bad or 'none'}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
