import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from padicperiods.padic_core import PrecisionError
from padicperiods.period import (
    Expansion, NotInKernelError, PrecisionProfile, ThetaValue, divide_by_kernel_generator, epsilon_lift,
    evaluate_expansion, fil_order, frobenius, kernel_generator, log_ptilde, lower_level, ptilde_lift,
    random_convertible, t_element, theta_map, variable,
)
from padicperiods.witt import frobenius_limit_theta

CYC = PrecisionProfile(3, M=6, level=3, fil_depth=4)
KUM = PrecisionProfile(3, M=6, level=3, fil_depth=4, tower="kummer")
Y = variable(CYC, "Y")
OMEGA = kernel_generator(CYC)
ZETA = CYC.ring.root_of_unity(1)

coeff_lists = st.lists(st.integers(-9, 9), min_size=1, max_size=4)


def poly(coeffs, profile=CYC, var="Y"):
    return evaluate_expansion(Expansion(var, tuple(Fraction(c) for c in coeffs)), profile)


def horner(coeffs, x, ring):
    acc = ring.zero()
    for c in reversed(coeffs):
        acc = acc * x + ring.scalar(c)
    return acc


def theta_sum(a: ThetaValue, b: ThetaValue, op) -> ThetaValue:
    assert a.denom == b.denom == 0
    return ThetaValue(op(a.numerator, b.numerator), 0, min(a.precision, b.precision))


def test_profile_validation():
    with pytest.raises(ValueError):
        PrecisionProfile(3, M=6, level=2, fil_depth=4)
    with pytest.raises(ValueError):
        PrecisionProfile(3, M=6, witt_length=4)
    with pytest.raises(ValueError):
        PrecisionProfile(3, tower="lubin-tate")
    assert CYC.witt_length == 6


@given(coeff_lists)
def test_theta_of_polynomial_is_evaluation_at_zeta(coeffs):
    # independent route: Y maps to a primitive p-th root of unity
    th = theta_map(poly(coeffs))
    assert th.precision == CYC.M
    assert th.equals(horner(coeffs, ZETA, CYC.ring))


@settings(max_examples=25)
@given(coeff_lists, coeff_lists)
def test_theta_is_ring_homomorphism(f, g):
    x, y = poly(f), poly(g)
    tx, ty = theta_map(x), theta_map(y)
    assert theta_map(x + y).equals(theta_sum(tx, ty, lambda a, b: a + b))
    assert theta_map(x * y).equals(theta_sum(tx, ty, lambda a, b: a * b))


def test_theta_anchors():
    assert theta_map(epsilon_lift(CYC)).equals(1)
    assert theta_map(OMEGA).is_zero()
    assert theta_map(ptilde_lift(KUM) - 3).is_zero()
    assert theta_map(kernel_generator(KUM)).is_zero()
    assert not theta_map(Y - 1).is_zero()


def test_theta_matches_frobenius_limit():
    rng = random.Random(5)
    for _ in range(3):
        x, seq = random_convertible(CYC, rng)
        assert theta_map(x).equals(frobenius_limit_theta(seq))


def test_kernel_generator_relation():
    assert (OMEGA * (Y - 1)).agrees_with(epsilon_lift(CYC) - 1)


@pytest.mark.parametrize("method", ["expansion", "witt"])
def test_division_by_kernel_generator(method):
    one = divide_by_kernel_generator(OMEGA, method=method)
    q = divide_by_kernel_generator(epsilon_lift(CYC) - 1, method=method)
    if method == "expansion":
        assert one.agrees_with(lower_level(variable(CYC, "Y") ** 0, one.level))
        assert q.agrees_with(Y - 1)
    else:
        # coordinatewise route: half the coordinates, known mod p
        target = lower_level(Y - 1, q.level)
        assert q.cap == 2
        for a, b in zip(q.witt.coords[:q.cap], target.witt.coords):
            assert (a - b).reduce(1).is_zero()
        assert theta_map(q).equals(theta_map(Y - 1))
        assert theta_map(one).equals(1)


def test_division_rejects_non_kernel():
    with pytest.raises(NotInKernelError):
        divide_by_kernel_generator(Y - 1, method="expansion")
    with pytest.raises(NotInKernelError):
        divide_by_kernel_generator(Y - 1, method="witt")


@pytest.mark.parametrize("k", range(4))
def test_fil_order_of_powers(k):
    assert fil_order(OMEGA**k).fil_order == k


def test_fil_order_bounds():
    assert fil_order(poly([1])).fil_order == 0
    with pytest.raises(ValueError):
        fil_order(OMEGA, N=5)


def test_t_period():
    t = t_element(CYC)
    assert theta_map(t).is_zero()
    assert fil_order(t).fil_order == 1
    assert fil_order(frobenius(t) - t * 3).fil_order == CYC.fil_depth


def test_t_precision_guard():
    with pytest.raises(PrecisionError):
        t_element(PrecisionProfile(3, M=1, level=3, fil_depth=4))
    # 1/3 times p^-3 from (1 - [ptilde]/p)^3
    with pytest.raises(PrecisionError):
        log_ptilde(PrecisionProfile(3, M=4, level=3, fil_depth=4, tower="kummer"))


@pytest.mark.slow
def test_log_ptilde_periods():
    prof = PrecisionProfile(3, M=8, level=3, fil_depth=4, tower="kummer")
    assert theta_map(log_ptilde(prof)).is_zero()
    shifted = theta_map(log_ptilde(prof, branch=1))
    assert shifted.equals(1)
    assert not shifted.is_zero()
