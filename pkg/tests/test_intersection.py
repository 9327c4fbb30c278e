import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from stablereg.errors import RegimeError
from stablereg.intersection import (Regime, beta_index, intersect_paths, intersection_gap_law,
                                    intersection_tail_asymptotic, p_prime, parse_beta, regime,
                                    sample_tail_processes, shape_constant, tail_pattern_law,
                                    terminating_prob, terminating_prob_from_mass)
from stablereg.renewal import default_law, renewal_mass


def test_parse_beta_exact():
    assert parse_beta("1/2") == Fraction(1, 2)
    assert parse_beta("0.5") == Fraction(1, 2)
    assert isinstance(parse_beta(0.5), float)
    with pytest.raises(ValueError):
        parse_beta("3/2")
    with pytest.raises(TypeError):
        parse_beta(None)


@pytest.mark.parametrize("beta,p,expected", [
    ("1/2", 2, Regime.CRITICAL),
    ("2/3", 3, Regime.CRITICAL),
    (0.5, 2, Regime.CRITICAL),
    (0.75, 2, Regime.SUPER),
    (0.4, 2, Regime.SUB),
    (0.5, 3, Regime.SUB),
    (0.3, 1, Regime.SUPER),
])
def test_regime(beta, p, expected):
    assert regime(parse_beta(beta), p) is expected


@pytest.mark.parametrize("beta,expected", [("3/4", 3), ("1/2", 1), (0.4, 1), (0.8, 4), ("2/3", 2)])
def test_p_prime(beta, expected):
    b = parse_beta(beta)
    assert p_prime(b) == expected
    assert beta_index(b, expected) > 0 >= beta_index(b, expected + 1)


def test_shape_constant_closed_forms():
    # p = 2, beta < 1/2: only s = 2 term has beta_s < 0 -> D = -(2 beta - 1) = 1 - 2 beta
    assert shape_constant(0.4, 2).value == pytest.approx(0.2, abs=1e-15)
    assert shape_constant(Fraction(1, 4), 2).value == 0.5
    v, q = shape_constant(Fraction(1, 2), 3)
    assert q == 3 and v == 0.25
    with pytest.raises(RegimeError):
        shape_constant(0.75, 2)


def test_intersect_paths():
    a = np.array([1, 3, 5, 7, 9])
    b = np.array([3, 4, 5, 9])
    c = np.array([2, 3, 9, 10])
    np.testing.assert_array_equal(intersect_paths([a, b, c]), [3, 9])
    assert intersect_paths([]).size == 0


def test_terminating_prob_geometric_identity():
    # finite series with u = (1, x, x, ...): 1/sum truncates the geometric return count
    u = np.array([1.0, 0.5, 0.25])
    tp = terminating_prob_from_mass(u, 0.4, 1)
    assert tp.estimate == pytest.approx(1 / 1.75)
    assert tp.lower <= tp.extrapolated <= tp.upper


def test_terminating_prob_bracket_is_monotone():
    law = default_law(0.4)
    a = terminating_prob(law, 2, 2000)
    b = terminating_prob(law, 2, 20000)
    assert a.lower <= b.extrapolated <= a.upper
    assert b.upper <= a.upper
    with pytest.raises(RegimeError):
        terminating_prob(default_law(0.8), 2)


def test_gap_law_against_enumeration():
    # P(eta_1 = k) for the 2-fold intersection by exhaustive first-passage enumeration of u
    law = default_law(0.5)
    m = 6
    u = renewal_mass(law, m).u
    up = u ** 2
    f, survive = intersection_gap_law(law, 2, m)
    for k in range(1, m + 1):
        conv = sum(f[j] * up[k - j] for j in range(1, k + 1))
        assert conv == pytest.approx(up[k], rel=1e-13)
    assert survive[0] == 1.0
    assert np.all(np.diff(survive) <= 0)


def test_pattern_law_sums_to_one_and_matches_mc(rng):
    law = default_law(0.6)
    law_p = tail_pattern_law(law, 2, 3)
    assert sum(law_p.values()) == pytest.approx(1.0, abs=1e-13)
    assert set(law_p) == set(itertools.product((0, 1), repeat=3))
    signs, theta = sample_tail_processes(law, 2, 3, 100_000, rng)
    assert np.all(theta[:, 0] == 1)
    assert abs(signs.mean()) < 0.02
    for pat, pr in law_p.items():
        emp = np.mean(np.all(theta[:, 1:] == np.array(pat), axis=1))
        assert abs(emp - pr) < 5 * math.sqrt(pr * (1 - pr) / 100_000) + 1e-12


def test_tail_asymptotic_regimes():
    law = default_law(0.5)
    assert float(intersection_tail_asymptotic(law, 2, math.e ** 2)) == pytest.approx(math.pi ** 2 / 2)
    with pytest.raises(RegimeError):
        intersection_tail_asymptotic(default_law(0.4), 2, 10)
