import math

import mpmath
import pytest

from numcore import (ONE, ZERO, ScaledComplex, max_log_abs, sc_add, sc_div, sc_log_abs, sc_mul,
                     sc_pow_real, sc_powi, sc_sub)


def sc(m, e):
    return ScaledComplex(complex(m), e)


def test_add_doubles_mantissa_carry():
    assert sc_add(sc(1.0, 0), sc(1.0, 0)) == sc(1.0, 1)


def test_add_zero_is_identity():
    assert sc_add(sc(1.5, 3), ZERO) == sc(1.5, 3)
    assert sc_add(ZERO, sc(1.5, 3)) == sc(1.5, 3)


def test_add_beyond_alignment_cutoff_keeps_larger():
    result = sc_add(sc(1.0, 100), sc(1.0, 0))
    assert result == sc(1.0, 100)
    exact = mpmath.mpf(2) ** 100 + 1
    assert abs(result.to_mpc().real - exact) / exact <= mpmath.mpf(2) ** -63


def test_mul_renormalizes():
    # 6 * 3 = 18 = 1.125 * 2**4
    assert sc_mul(sc(1.5, 2), sc(1.5, 1)) == sc(1.125, 4)


@pytest.mark.parametrize("base,k,expected", [
    (sc(1.5, 2), 2, sc(1.125, 5)),
    (sc(1.0, 10), 8, sc(1.0, 80)),
    (sc(1.5, 0), 1, sc(1.5, 0)),
])
def test_powi(base, k, expected):
    assert sc_powi(base, k) == expected


def test_powi_rejects_non_positive_exponent():
    with pytest.raises(ValueError):
        sc_powi(ONE, 0)


def test_powi_far_beyond_double_range():
    x = ScaledComplex.from_complex(1e300)
    lm = sc_log_abs(sc_powi(x, 1024))
    assert lm.value == pytest.approx(1024 * math.log(1e300), rel=1e-12)


@pytest.mark.parametrize("x,expected", [
    (sc(1.0, 0), 0.0),
    (sc(1.0, 10), 10 * math.log(2.0)),
])
def test_log_abs(x, expected):
    assert sc_log_abs(x).value == pytest.approx(expected, abs=1e-15)


def test_log_abs_of_zero_is_negative_infinity():
    lm = sc_log_abs(ZERO)
    assert lm.neg_inf
    assert lm.to_float() == -math.inf
    assert lm.log_plus() == 0.0


def test_from_complex_normalizes_mantissa():
    x = ScaledComplex.from_complex(6 - 2j)
    assert 1.0 <= abs(x.mantissa) < 2.0
    assert x.to_complex() == 6 - 2j
    assert ScaledComplex.from_complex(0) == ZERO


def test_sub_and_div():
    a = ScaledComplex.from_complex(7 + 1j)
    b = ScaledComplex.from_complex(2 - 3j)
    assert sc_sub(a, b).to_complex() == pytest.approx(5 + 4j)
    assert sc_div(a, b).to_complex() == pytest.approx((7 + 1j) / (2 - 3j))
    with pytest.raises(ZeroDivisionError):
        sc_div(a, ZERO)


def test_operators_delegate():
    a = ScaledComplex.from_complex(3)
    assert (a + 1).to_complex() == 4
    assert (2 * a).to_complex() == 6
    assert (1 - a).to_complex() == -2
    assert (-a).to_complex() == -3
    assert (a ** 0) == ONE
    assert (a ** 3).to_complex() == 27


def test_pow_real_principal_branch():
    x = ScaledComplex.from_complex(-4)
    root = sc_pow_real(x, 0.5).to_complex()
    assert root == pytest.approx(2j)
    with pytest.raises(ValueError):
        sc_pow_real(ZERO, 0.5)


def test_to_complex_saturates():
    assert sc(1.0, 5000).to_complex().real == math.inf
    assert sc(-1.0, 5000).to_complex().real == -math.inf


def test_to_mpc_is_exact():
    x = sc(1.5, 3000)
    assert x.to_mpc().real == mpmath.mpf(1.5) * mpmath.mpf(2) ** 3000


def test_from_log_polar_round_trip():
    x = ScaledComplex.from_log_polar(5000.0, 0.25)
    assert sc_log_abs(x).value == pytest.approx(5000.0, rel=1e-14)
    assert x.arg() == pytest.approx(0.25)


def test_max_log_abs_ignores_zero():
    lm = max_log_abs(ZERO, sc(1.0, 4), sc(1.0, 2))
    assert lm.value == pytest.approx(4 * math.log(2.0))
    assert max_log_abs(ZERO, ZERO).neg_inf
