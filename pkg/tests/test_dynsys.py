import math
from fractions import Fraction

import mpmath
import pytest

from analysis import sample_box, sample_omega_prime
from dynsys import (BranchUndefinedError, Point3, StopPolicy, apply_cocycle, apply_henon, apply_phi, apply_psi,
                    apply_psi_inv, check_conjugacy, check_fibonacci_restriction, cocycle_growth_rate,
                    cocycle_product, eval_cocycle, fib, h_map, orbit, orbit_exact, orbit_mp, restricted_psi_n,
                    restricted_psi_neg_n, theta)
from numcore import ScaledComplex
from params import LN_PHI, PHI_CONJ, Params


def pt(*coords):
    return Point3.from_complex(*coords)


def sc_pair(a, b):
    return ScaledComplex.from_complex(a), ScaledComplex.from_complex(b)


def test_apply_psi_and_inverse():
    params = Params(2, 1, 0.5)
    image = apply_psi(params, pt(1, 1, 1))
    assert image.to_complex() == (3, 1, 0.5)
    assert apply_psi_inv(params, image).to_complex() == (1, 1, 1)


def test_axis_is_invariant():
    params = Params(3, 2, 0.5 + 0.5j)
    assert apply_psi(params, pt(0, 0, 2)).to_complex() == (0, 0, (0.5 + 0.5j) * 2)


def test_apply_henon():
    params = Params(2, 1, 0.5)
    w = apply_henon(params, sc_pair(1, 1))
    assert (w[0].to_complex(), w[1].to_complex()) == (1.5, 0.5)
    w = apply_henon(params, sc_pair(0, 0))
    assert w[0].is_zero and w[1].is_zero


def test_apply_phi_cubic():
    assert apply_phi(Params(3, 2, 0.5), pt(1, 0, 2)).to_complex() == (1, 0.5, 1)


def test_theta_and_h():
    params = Params(2, 1, 0.5)
    assert theta(params, pt(2, 3, 4)).to_complex() == (8, 12, 4)
    w0, w1 = h_map(params, pt(2, 3, 4))
    assert (w0.to_complex(), w1.to_complex()) == (8, 12)
    w0, w1 = h_map(params, pt(5, -2, 0))
    assert w0.is_zero and w1.is_zero


def test_theta_fractional_l_undefined_on_hyperplane():
    with pytest.raises(BranchUndefinedError):
        theta(Params(3, 1, 0.5), pt(1, 1, 0))


def test_orbit_on_hyperplane_is_fibonacci():
    records = orbit(Params(2, 1, 0.5), pt(1, 0, 0), 30)
    assert [r.point.z0.to_complex() for r in records] == [fib(n + 1) for n in range(31)]


def test_orbit_on_stable_line_contracts_geometrically(stable_line_point):
    records = orbit(Params(2, 1, 0.5), stable_line_point, 15)
    logs = [r.log_mag.to_float() for r in records]
    steps = [b - a for a, b in zip(logs, logs[1:])]
    assert steps == pytest.approx([math.log(-PHI_CONJ)] * len(steps), abs=1e-6)


def test_orbit_escapes_at_maximal_speed(params_221, omega_point):
    records = orbit(params_221, omega_point, 40)
    logs = [r.log_mag.to_float() for r in records]
    assert all(b > a for a, b in zip(logs, logs[1:]))
    assert records[-1].stop_reason == "escape"
    assert logs[-1] / logs[-2] == pytest.approx(2.0, abs=1e-2)

    oracle = orbit_mp(params_221, (10, 5, 1), 5)
    for record, exact in zip(records[:6], oracle):
        got = record.point.z0.to_complex()
        assert abs(got - complex(exact[0])) <= 1e-12 * abs(got)


def test_orbit_stops_when_contracted():
    records = orbit(Params(2, 1, 0.5), pt(0, 0, 0), 50, StopPolicy(window=5))
    assert records[-1].stop_reason == "contracted"
    assert len(records) == 5


def test_orbit_requires_a_step():
    with pytest.raises(ValueError):
        orbit(Params(2, 1, 0.5), pt(1, 0, 0), 0)


def test_g_partial_matches_base_value_on_hyperplane():
    records = orbit(Params(2, 1, 0.5), pt(1, 0, 0), 3)
    # g_n = phi z0 + z1 + z2^d (...) and z2 = 0
    assert records[3].g_partial == pytest.approx((1 + 5 ** 0.5) / 2)


def test_orbit_exact_matches_numeric():
    alpha = Fraction(1, 2)
    exact = orbit_exact(Fraction(1, 3), Fraction(1, 5), Fraction(2, 7), alpha, 2, 1, 5)
    numeric = orbit(Params(2, 1, 0.5), pt(1 / 3, 1 / 5, 2 / 7), 5)
    for value, record in zip(exact, numeric):
        assert record.point.z0.to_complex().real == pytest.approx(float(value), rel=1e-12)


def test_fibonacci_closed_forms():
    assert fib(5) == 5 and fib(6) == 8
    assert restricted_psi_n(5, 1, 0) == (8, 5)
    assert restricted_psi_neg_n(1, 3, 7) == (7, -4)
    with pytest.raises(ValueError):
        restricted_psi_n(0, 1, 0)


def test_fibonacci_restriction_check_passes():
    report = check_fibonacci_restriction([(1, 0), (3, -7), (12, 5)], 30)
    assert report.passed, report.detail


def test_fibonacci_restriction_large_seeds_are_exact():
    seed = 2 ** 60 + 1
    exact = orbit_exact(seed, 3, 0, 1, 2, 1, 30)
    assert (exact[30], exact[29]) == restricted_psi_n(30, seed, 3)
    assert exact[30] % 2 ** 60 != 0
    report = check_fibonacci_restriction([(seed, 3), (-(2 ** 61) - 7, 2 ** 59 + 5)], 30)
    assert report.passed, report.detail
    assert report.extra["float_rel"] <= 1e-12


def test_fibonacci_restriction_sees_differences_below_double_precision(monkeypatch):
    import dynsys

    honest = dynsys.restricted_psi_n
    monkeypatch.setattr(dynsys, "restricted_psi_n", lambda n, z0, z1: (honest(n, z0, z1)[0] + 1, honest(n, z0, z1)[1]))
    report = check_fibonacci_restriction([(2 ** 60 + 1, 3)], 30)
    assert not report.passed
    assert report.extra["float_rel"] <= 1e-12
    assert {m[3] for m in report.extra["mismatches"]} == {"forward"}


def test_cocycle_examples():
    params = Params(2, 1, 0.5)
    assert eval_cocycle(params, pt(3, 4, 0)).to_complex() == ((1, 1), (1, 0))
    assert eval_cocycle(params, pt(1, 1, 1)).to_complex() == ((2, 1), (1, 0))


def test_cocycle_product_on_hyperplane_is_fibonacci_matrix():
    m = cocycle_product(Params(2, 1, 0.5), pt(1, 2, 0), 10)
    assert m.to_complex() == ((fib(11), fib(10)), (fib(10), fib(9)))
    v0, v1 = apply_cocycle(m, (ScaledComplex.from_complex(1), ScaledComplex.from_complex(0)))
    assert (v0.to_complex(), v1.to_complex()) == (fib(11), fib(10))


def test_cocycle_growth_rate_tends_to_ln_phi():
    rate = cocycle_growth_rate(Params(2, 1, 0.5), pt(1, 2, 0), 60)
    assert rate == pytest.approx(LN_PHI, abs=0.02)


def test_conjugacy_holds_numerically():
    points = sample_box(50, seed=3)
    assert check_conjugacy(Params(2, 1, 0.5), points).passed
    assert check_conjugacy(Params(3, 1, 0.5 + 0.3j), points).passed


def test_orbit_mp_precision():
    points = orbit_mp(Params(2, 1, 0.5), (1, 0, 0), 3, prec=128)
    assert points[3][0] == mpmath.mpc(3)


@pytest.mark.parametrize("q, d, extra", [(2, 1, [(0.3, 0.2, 1.0), (0.1, 0.05, 0.5)]), (3, 2, [])])
def test_cocycle_product_reproduces_orbit_off_hyperplane(q, d, extra):
    params = Params(q, d, 0.3)
    points = extra + [p.to_complex() for p in sample_omega_prime(params, 4, seed=17)]
    for coords in points:
        p = pt(*coords)
        reference = orbit_mp(params, coords, 30)
        scale = 1.0
        for n in range(1, 31):
            v0, v1 = apply_cocycle(cocycle_product(params, p, n), sc_pair(coords[0], coords[1]))
            want0, want1 = complex(reference[n][0]), complex(reference[n][1])
            scale = max(scale, abs(want0), abs(want1))
            assert abs(v0.to_complex() - want0) <= 1e-9 * scale
            assert abs(v1.to_complex() - want1) <= 1e-9 * scale
