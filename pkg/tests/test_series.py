import numpy as np
import pytest
from hypothesis import given, strategies as st

from deltablowup.series import BivariateSeries, monomial_sum

coeff = st.integers(-9, 9)
monomial = st.tuples(st.integers(0, 4), st.integers(0, 4)).filter(lambda mn: sum(mn) <= 4)
series = st.builds(lambda d, D: BivariateSeries(d, D),
                   st.dictionaries(monomial, coeff, max_size=6), st.sampled_from([None, 4]))


@given(series, series, series)
def test_ring_laws(a, b, c):
    assert (a + b).equals(b + a)
    assert (a * b).equals(b * a)
    assert ((a + b) + c).equals(a + (b + c))
    assert ((a * b) * c).equals(a * (b * c))
    assert (a * (b + c)).equals(a * b + a * c)
    assert (a - a).equals(BivariateSeries())


@given(series, series)
def test_product_rule(a, b):
    a, b = a.truncate(None), b.truncate(None)
    assert (a * b).d_b().equals(a.d_b() * b + a * b.d_b())
    assert (a * b).d_lambda().equals(a.d_lambda() * b + a * b.d_lambda())


@given(series, st.floats(-1, 1), st.floats(-1, 1))
def test_evaluate_matches_polynomial(a, b, lam):
    direct = sum(c * b ** m * lam ** n for (m, n), c in a.coeffs.items())
    assert a.evaluate(b, lam) == pytest.approx(direct, abs=1e-12)


def test_truncation_drops_high_degrees():
    s = BivariateSeries({(0, 0): 1, (1, 1): 2, (3, 2): 5}, 3)
    assert s.monomials() == [(0, 0), (1, 1)]
    sq = BivariateSeries({(1, 0): 1, (0, 1): 1}, 2) * BivariateSeries({(1, 1): 1, (1, 0): 1}, 2)
    assert sq.monomials() == [(1, 1), (2, 0)]


def test_field_coefficients_and_conj():
    f = np.array([1 + 2j, 3j])
    s = BivariateSeries({(0, 1): f})
    assert np.array_equal(s.conj().coefficient(0, 1), np.conj(f))
    assert np.array_equal(s.shift(2, 1).coefficient(2, 2), f)
    assert np.array_equal(s.evaluate(0.5, 2.0), 2 * f)
    assert s.coefficient(5, 5) == 0


def test_exclude_and_monomial_sum():
    s = monomial_sum([((0, 0), 1.0), ((1, 0), 2.0), ((1, 0), 3.0)])
    assert s.coefficient(1, 0) == 5.0
    assert s.evaluate(1.0, 0.0, exclude=[(0, 0)]) == 5.0
    with pytest.raises(ValueError):
        BivariateSeries({(-1, 0): 1})
