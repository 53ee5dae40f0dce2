import math

import mpmath
import pytest
from scipy.special import erfc

from fractrans.mlf import MittagLefflerRangeError, mittag_leffler, ml_space_solution, ml_time_solution


def ml_reference(alpha, beta, z):
    """Power series in arbitrary precision; the working precision covers the cancellation."""
    w = abs(z) ** (1 / alpha)
    with mpmath.workdps(30 + int(w / 2.3)):
        a, b, zz = mpmath.mpf(alpha), mpmath.mpf(beta), mpmath.mpf(z)
        return float(mpmath.nsum(lambda k: zz**k / mpmath.gamma(a * k + b), [0, mpmath.inf]))


def test_exponential_case():
    assert abs(mittag_leffler(1.0, 1.0, 1.0) - math.e) < 1e-12


def test_half_order_against_erfc_identity():
    # E_{1/2}(z) = exp(z^2) erfc(-z), evaluated with the plain erfc routine
    ref = math.exp(1.0) * erfc(1.0)
    assert abs(mittag_leffler(0.5, 1.0, -1.0) - ref) < 1e-8
    assert ref == pytest.approx(0.42758357615, abs=1e-11)


@pytest.mark.parametrize("alpha", [k / 10 for k in range(1, 11)])
def test_value_at_zero_is_one(alpha):
    assert mittag_leffler(alpha, 1.0, 0.0) == 1.0


def test_value_at_zero_general_beta():
    assert mittag_leffler(0.7, 2.0, 0.0) == 1.0
    assert mittag_leffler(0.7, 0.5, 0.0) == pytest.approx(1 / math.gamma(0.5), rel=1e-15)


# points whose reference sum stays cheap (|z|^(1/alpha) <= 200)
GRID = [
    (alpha, z)
    for alpha in (0.2, 0.3, 0.45, 0.7, 0.9, 0.95, 1.0)
    for z in (-50, -20, -7, -5.5, -3, -1, -0.1, 0.1, 1, 3, 6, 20)
    if abs(z) ** (1 / alpha) <= 200
]


@pytest.mark.parametrize("alpha, z", GRID)
def test_against_high_precision_series(alpha, z):
    assert mittag_leffler(alpha, 1.0, z) == pytest.approx(ml_reference(alpha, 1.0, z), rel=1e-10)


@pytest.mark.parametrize("beta", [0.5, 1.5, 2.0])
def test_general_beta_series(beta):
    for z in (-1.0, 0.5, 3.0):
        assert mittag_leffler(0.6, beta, z) == pytest.approx(ml_reference(0.6, beta, z), rel=1e-10)


def test_erfcx_route_large_negative():
    z = -40.0
    with mpmath.workdps(40):
        ref = float(mpmath.exp(mpmath.mpf(z) ** 2) * mpmath.erfc(-mpmath.mpf(z)))
    assert mittag_leffler(0.5, 1.0, z) == pytest.approx(ref, rel=1e-13)


def test_out_of_range():
    with pytest.raises(MittagLefflerRangeError):
        mittag_leffler(0.3, 2.0, -40.0)
    with pytest.raises(MittagLefflerRangeError):
        mittag_leffler(0.2, 1.0, 50.0)
    with pytest.raises(MittagLefflerRangeError):
        mittag_leffler(-0.5, 1.0, 1.0)


def test_time_solution():
    assert ml_time_solution(0.5, -1.0, 1.0, 1.0) == pytest.approx(0.42758357615, abs=1e-10)
    assert ml_time_solution(0.5, -1.0, 3.25, 0.0) == 3.25
    assert ml_time_solution(1.0, -1.0, 2.0, 1.0) == pytest.approx(2 / math.e, rel=1e-14)
    assert 2 / math.e == pytest.approx(0.7357588823, abs=1e-10)


def test_space_solution():
    assert ml_space_solution(0.5, -1.0, 1.0, 1.0) == pytest.approx(0.42758357615, abs=1e-10)
    assert ml_space_solution(0.5, -1.0, -1.5, 0.0) == -1.5
    assert ml_space_solution(1.0, -1.0, 1.0, 2.0) == pytest.approx(math.exp(-2.0), rel=1e-14)
    assert math.exp(-2.0) == pytest.approx(0.1353352832, abs=1e-10)
