from fractions import Fraction
from itertools import combinations
from math import gcd

import numpy as np
import pytest
from hypothesis import given, strategies as st

from padicperiods.padic_core import (
    PadicMatrix, PadicScalar, PrecisionError, TowerRing, check_prime, default_tau, kernel_basis, mat_inverse,
    mat_mul, numerical_rank, smith_normal_form, solve, vp,
)

PRIMES = st.sampled_from([3, 5, 7])


def _det(rows) -> int:
    """Bareiss fraction-free determinant."""
    a = [list(r) for r in rows]
    n = len(a)
    sign, prev = 1, 1
    for k in range(n - 1):
        if a[k][k] == 0:
            swap = next((i for i in range(k + 1, n) if a[i][k]), None)
            if swap is None:
                return 0
            a[k], a[swap] = a[swap], a[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) // prev
        prev = a[k][k]
    return sign * a[-1][-1]


def exact_exponents(A, p: int, M: int) -> list[int]:
    """Elementary divisor exponents from gcds of minors over Z."""
    r, c = len(A), len(A[0])
    out, prev = [], 1
    for k in range(1, min(r, c) + 1):
        g = 0
        for rows in combinations(range(r), k):
            for cols in combinations(range(c), k):
                g = gcd(g, _det([[A[i][j] for j in cols] for i in rows]))
        if g == 0:
            out += [M] * (min(r, c) - k + 1)
            break
        out.append(min(vp(g // prev, p) if g // prev != 1 else 0, M))
        prev = g
    return out


def test_rejects_even_and_composite():
    with pytest.raises(ValueError):
        check_prime(2)
    with pytest.raises(ValueError):
        check_prime(9)


def test_scalar_identities():
    a = PadicScalar.from_int(5, 1, 6)
    s = a + a
    assert s.to_fraction() == 2 and s.precision == 6
    q = PadicScalar.from_int(5, 5, 6) / PadicScalar.from_int(5, 5, 6)
    assert q.to_fraction() == 1 and q.valuation == 0


def test_division_by_unknown_zero():
    with pytest.raises(PrecisionError):
        PadicScalar.from_int(3, 1, 4) / PadicScalar.from_int(3, 27, 3)


@given(PRIMES, st.fractions(max_denominator=50).filter(bool), st.fractions(max_denominator=50).filter(bool))
def test_scalar_arith_matches_rationals(p, x, y):
    a, b = PadicScalar.from_fraction(p, x, 12), PadicScalar.from_fraction(p, y, 12)
    prod = a * b
    assert prod.valuation == a.valuation + b.valuation
    for got, want in ((a + b, x + y), (a * b, x * y), (a / b, x / y), (a - b, x - y)):
        if got.is_zero():
            continue
        diff = got - PadicScalar.from_fraction(p, want, 40)
        assert diff.is_zero()


def test_tower_relations():
    R = TowerRing.cyclotomic(3, 1, 6)
    zeta = R.one() + R.gen()
    assert zeta**3 == R.one()
    assert (R.one() + zeta + zeta * zeta).is_zero()
    K = TowerRing.kummer(3, 1, 6)
    assert K.gen() ** 3 == K.scalar(3)


@given(st.lists(st.integers(-50, 50), min_size=18, max_size=18))
def test_tower_ring_axioms(vals):
    R = TowerRing.compositum(3, 1, 5)
    a, b, c = (R.element(np.array(vals[6 * i:6 * i + 6]).reshape(R.shape)) for i in range(3))
    assert (a * b) * c == a * (b * c)
    assert a * (b + c) == a * b + a * c
    assert a * b == b * a


def test_snf_examples():
    assert smith_normal_form(np.eye(3, dtype=object), 5, 5).exponents == [0, 0, 0]
    A = np.diag([1, 5, 25]).astype(object)
    assert smith_normal_form(A, 5, 5).exponents == [0, 1, 2]
    assert numerical_rank(np.zeros((3, 3), dtype=object), 3, 6) == 0
    assert numerical_rank(np.eye(4, dtype=object), 3, 6) == 4


@given(PRIMES, st.lists(st.integers(-60, 60), min_size=16, max_size=16), st.integers(0, 2))
def test_snf_matches_exact_integer_oracle(p, vals, scale):
    A = [[vals[4 * i + j] * p ** ((i * j) % (scale + 1)) for j in range(4)] for i in range(4)]
    M = 8
    sf = smith_normal_form(np.array(A, dtype=object), p, M)
    assert sf.exponents == exact_exponents(A, p, M)
    D = mat_mul(mat_mul(sf.U, np.array(A, dtype=object), p**M), sf.V, p**M)
    want = np.zeros((4, 4), dtype=object)
    for k, e in enumerate(sf.exponents):
        if e < M:
            want[k, k] = p**e
    assert (D % p**M == want).all()


@given(PRIMES, st.integers(2, 6), st.integers(2, 6), st.data())
def test_transforms_invertible_and_rank_nullity(p, r, c, data):
    M = 6
    vals = data.draw(st.lists(st.integers(0, p**M - 1), min_size=r * c, max_size=r * c))
    A = (np.array(vals, dtype=object) * p ** (np.arange(r * c) % 3)).reshape(r, c) % p**M
    sf = smith_normal_form(A, p, M)
    for T in (sf.U, sf.V):
        inv = mat_inverse(T, p, M)
        assert (mat_mul(T, inv, p**M) == np.eye(T.shape[0], dtype=object)).all()
    tau = default_tau(M)
    K = kernel_basis(A, p, M, tau)
    assert numerical_rank(A, p, M, tau) + K.shape[1] == c


def test_numerical_rank_threshold_too_large():
    with pytest.raises(PrecisionError):
        numerical_rank(np.eye(2, dtype=object), 3, 4, 5)


def test_solve_round_trip():
    p, M = 3, 10
    rng = np.random.default_rng(3)
    A = rng.integers(0, p**M, (5, 4)).astype(object)
    x = rng.integers(0, 50, 4).astype(object)
    b = mat_mul(A, x.reshape(-1, 1), p**M).reshape(-1)
    sol = solve(A, b, p, M)
    assert sol is not None
    lhs = mat_mul(A, sol.x.reshape(-1, 1), p**M).reshape(-1)
    assert all(vp(int(v), p) >= M - sol.shift - default_tau(M) for v in (lhs - b * p**sol.shift) % p**M if v)
    e = np.zeros(5, dtype=object)
    e[0] = 1
    B = np.zeros((5, 1), dtype=object)
    B[1, 0] = 1
    assert solve(B, e, p, M) is None


def test_padic_matrix_scaling():
    m = PadicMatrix.from_rows(3, [[Fraction(1, 3), 1], [0, 9]], 5)
    A, s, M = m.to_integral()
    assert s == 1 and A[0, 0] == 1 and A[0, 1] == 3
