import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stablereg.errors import ResourceLimitError
from stablereg.renewal import (DIRECT_MASS_CAP, RenewalLaw, RenewalTables, asymptotic_mass, default_law,
                               renewal_mass, renewal_tables, sample_conditioned_renewal,
                               sample_conditioned_renewals, sample_increment, sample_renewal_paths,
                               stationary_weight)


def brute_mass(f, N):
    u = np.zeros(N + 1)
    u[0] = 1.0
    for n in range(1, N + 1):
        u[n] = sum(f[k - 1] * u[n - k] for k in range(1, n + 1))
    return u


@pytest.mark.parametrize("beta", [0.3, 0.5, 0.75])
def test_mass_matches_naive_recursion(beta):
    law = default_law(beta)
    N = 200
    u = RenewalTables(law, N, method="direct").u
    f = law.pmf(np.arange(1, N + 1))
    np.testing.assert_allclose(u, brute_mass(f, N), rtol=1e-13, atol=0)


@pytest.mark.parametrize("beta", [0.3, 0.6])
def test_fft_path_matches_direct(beta):
    law = default_law(beta)
    a = RenewalTables(law, 5000, method="direct").u
    b = RenewalTables(law, 5000, method="fft").u
    np.testing.assert_allclose(b, a, rtol=1e-10, atol=1e-14)


def test_known_mass_values():
    # u(0) = 1, u(1) = f(1) = 1 - 2^-b, u(2) = f(1)^2 + f(2)
    b = 0.5
    law = default_law(b)
    u = renewal_mass(law, 2).u
    f1 = 1 - 2 ** -b
    f2 = 2 ** -b - 3 ** -b
    assert u[0] == 1.0
    assert u[1] == pytest.approx(f1, rel=1e-15)
    assert u[2] == pytest.approx(f1 * f1 + f2, rel=1e-15)


def test_tables_are_read_only():
    tab = RenewalTables(default_law(0.5), 10)
    with pytest.raises(ValueError):
        tab.w[1] = 0.0
    with pytest.raises(ValueError):
        tab.u[1] = 0.0


def test_direct_cap_guard():
    tab = RenewalTables(default_law(0.5), DIRECT_MASS_CAP + 1, method="direct")
    with pytest.raises(ResourceLimitError):
        tab.u


def test_weights_and_asymptotics():
    law = default_law(0.5)
    tab = renewal_tables(law, 10**4)
    sw = stationary_weight(tab, 10**4)
    assert sw.exact == pytest.approx(float(np.sum((np.arange(1, 10**4 + 1) + 1.0) ** -0.5)), rel=1e-12)
    assert sw.exact / sw.asymptotic == pytest.approx(1.0, abs=0.02)
    assert tab.cumulative_first_hit[1] == 1.0
    assert tab.cumulative_first_hit[5] == pytest.approx(sum((k + 1) ** -0.5 for k in range(5)))
    assert float(asymptotic_mass(law, 100)) == pytest.approx(1 / (math.pi * 10))


@given(st.floats(0.05, 0.95), st.integers(0, 2**31))
@settings(max_examples=40, deadline=None)
def test_inverse_sampler_matches_search(beta, seed):
    law = default_law(beta)
    generic = RenewalLaw(beta, 1.0, law.tail, law.pmf)
    rng = np.random.default_rng(seed)
    u = rng.random(64)
    a = law.inverse(u)
    from stablereg.renewal import _search_inverse

    b = _search_inverse(generic, u)
    # T is the smallest n with tail(n) < u; doubles resolve the floor exactly only below 2**53
    small = b < 2**40
    np.testing.assert_array_equal(a[small], b[small])
    np.testing.assert_allclose(a[~small], b[~small], rtol=1e-12)
    assert np.all(a >= 1)


def test_increment_law(rng):
    law = default_law(0.5)
    x = sample_increment(law, rng, 200_000)
    for n in (1, 3, 10, 100):
        emp = np.mean(x > n)
        se = math.sqrt(law.tail(n) * (1 - law.tail(n)) / x.size)
        assert abs(emp - law.tail(n)) < 5 * se


def test_conditioned_paths_structure(rng):
    law = default_law(0.4)
    tab = renewal_tables(law, 300)
    bundle = sample_conditioned_renewals(law, tab, 300, 500, rng)
    assert len(bundle) == 500
    assert np.all(bundle.counts() >= 1)
    for i in range(0, 500, 50):
        h = bundle[i].hits
        assert h.min() >= 1 and h.max() <= 300
        assert np.all(np.diff(h) > 0)
    one = sample_conditioned_renewal(law, tab, 300, rng)
    assert one.hits.size >= 1


def test_renewal_paths_from_zero(rng):
    law = default_law(0.5)
    b = sample_renewal_paths(law, 50, 20000, rng)
    # P(1 in tau) = u(1)
    u = renewal_mass(law, 50).u
    emp = np.mean([1 in set(b[i].hits.tolist()) for i in range(2000)])
    assert abs(emp - u[1]) < 5 * math.sqrt(u[1] * (1 - u[1]) / 2000)
    hit50 = np.zeros(len(b), dtype=bool)
    hit50[b.owners()[b.hits == 50]] = True
    assert abs(hit50.mean() - u[50]) < 5 * math.sqrt(u[50] * (1 - u[50]) / len(b))


def test_bad_inputs():
    with pytest.raises(ValueError):
        default_law(1.0)
    with pytest.raises(ValueError):
        RenewalTables(default_law(0.5), -1)
    with pytest.raises(ValueError):
        RenewalTables(default_law(0.5), 4, method="magic")
