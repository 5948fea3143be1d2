from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from padicperiods.padic_core import PrecisionError, TowerRing
from padicperiods.tilt import (
    TiltElement, make_epsilon, make_ptilde, theta_bar, tilt_frobenius, tilt_scalar, ve_valuation,
)

P, M, LEVEL = 3, 6, 4
CYC = TowerRing.cyclotomic(P, LEVEL, M)
KUM = TowerRing.kummer(P, LEVEL, M)
EPS = make_epsilon(CYC)
EPS_ROOT = tilt_frobenius(EPS, "inverse")  # eps^(1/p), level m - 1


def same(a, b, digits):
    return (a - b).reduce(digits).is_zero()


def test_epsilon_components():
    assert EPS.components[0] == CYC.one()
    for n, c in enumerate(EPS.components):
        assert c ** (P**n) == CYC.one()
    assert EPS.first_incompatibility() is None


def test_ptilde():
    pt = make_ptilde(KUM)
    assert pt.components[0].divisible_by_p()
    tb = theta_bar(pt)
    assert same(tb.value, KUM.scalar(P), tb.precision) and tb.precision == M
    assert ve_valuation(pt) == 1


def test_incompatible_components_rejected():
    comps = list(EPS.components)
    comps[2] = CYC.gen()
    with pytest.raises(ValueError):
        TiltElement.from_components(CYC, comps)


def test_ve_of_eps_minus_one():
    assert ve_valuation(EPS - 1) == Fraction(P, P - 1)
    assert ve_valuation(EPS_ROOT - 1) == Fraction(1, P - 1)


@given(st.integers(0, 3), st.integers(0, 3), st.integers(0, 3), st.integers(0, 3))
def test_ve_additive_on_products(a, b, c, d):
    x = (EPS - 1) ** a * (EPS_ROOT - 1) ** b
    y = (EPS - 1) ** c * (EPS_ROOT - 1) ** d
    vx, vy = ve_valuation(x), ve_valuation(y)
    assert vx == Fraction(a * P + b, P - 1)
    assert ve_valuation(x * y) == vx + vy
    if not (x + y).is_zero():
        assert ve_valuation(x + y) >= min(vx, vy)


def test_ve_indeterminate_on_zero():
    with pytest.raises(PrecisionError):
        ve_valuation(tilt_scalar(CYC, LEVEL, 0))


def test_theta_bar_anchors():
    tb = theta_bar(EPS)
    assert same(tb.value, CYC.one(), tb.precision) and tb.precision == M
    root = theta_bar(EPS_ROOT)
    assert same(root.value, CYC.root_of_unity(1), root.precision)
    assert theta_bar(tilt_scalar(CYC, LEVEL, 0)).is_zero()


@given(st.integers(0, 4), st.integers(0, 4), st.integers(1, 5))
def test_theta_bar_multiplicative(a, b, k):
    x = (EPS_ROOT - 1) ** a * k
    y = (EPS - 1) ** b + EPS_ROOT
    lhs, tx, ty = theta_bar(x * y), theta_bar(x), theta_bar(y)
    digits = min(lhs.precision, tx.precision, ty.precision)
    assert same(lhs.value, tx.value * ty.value, digits)


def test_theta_bar_not_additive():
    one = tilt_scalar(CYC, LEVEL, 1)
    s = theta_bar(one + one)
    # theta_bar(1 + 1) is the Teichmuller representative of 2, which is -1 mod 9
    assert s.precision >= 2
    assert not same(s.value, CYC.scalar(2), 2)
    assert same(s.value, CYC.scalar(-1), 2)


def test_theta_bar_stability_in_n():
    x = (EPS - 1) * EPS_ROOT + 2
    for n in range(x.level):
        a = x.components[n] ** (P**n)
        b = x.components[n + 1] ** (P ** (n + 1))
        assert same(a, b, n + 1)


def test_theta_bar_level_guard():
    with pytest.raises(PrecisionError):
        theta_bar(EPS.truncate(1) - 1, N=4)


def test_frobenius_directions():
    f = tilt_frobenius(EPS)
    assert f.components[0] == CYC.one()
    assert all(f.components[n] == EPS.components[n - 1] for n in range(1, LEVEL + 1))
    x = (EPS_ROOT - 1) * 2 + EPS_ROOT
    back = tilt_frobenius(tilt_frobenius(x), "inverse")
    assert back == x.truncate(x.level - 1)
    with pytest.raises(PrecisionError):
        tilt_frobenius(EPS.truncate(0), "inverse")


@given(st.integers(1, 3))
def test_frobenius_scales_valuation(a):
    x = (EPS_ROOT - 1) ** a
    assert ve_valuation(tilt_frobenius(x)) == P * ve_valuation(x)
