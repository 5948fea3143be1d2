"""Truncated Laurent series in pi over Q_p, with phi and the Gamma-action.

A RobbaElement is  sum_{n=low}^{top-1} c_n pi^n + O(pi^top).  The error term
sits at the top.  The bottom is exact unless `tail` is set, in which case the
coefficients below `low` are unknown but divisible by p^tail; phi of a pole
leaves such a tail.  Both actions map pi^T Z_p[[pi]] into itself for T >= 0,
so they keep `top` unchanged.

On negative powers phi uses the expansion of phi(pi)^-1 in pi^-1:
phi(pi) = pi^p (1 + u) with u a polynomial in pi^-1 whose coefficients are
divisible by p, so (1 + u)^-1 is a finite sum modulo any power of p.  This
expansion converges near the boundary of the disc, as the Robba ring
requires, whereas the power-series inverse of phi(pi)/pi does not.

The matrix builders at the bottom give phi and gamma as integer matrices on
the span of pi^-K, ..., pi^(L-1) modulo p^M.  Cohomology works with those.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb
from typing import Callable, Sequence

import numpy as np

from .padic_core import PadicScalar, PrecisionError, check_prime

DEFAULT_WINDOW = 64
MAX_WINDOW = 512


class WindowError(PrecisionError):
    def __init__(self, message: str):
        super().__init__(message, "window-exhausted")


@dataclass(frozen=True)
class RobbaElement:
    p: int
    low: int
    coeffs: tuple[PadicScalar, ...]
    # relative precision given to exact integer inputs
    M: int
    # a Laurent polynomial: no O(pi^top) term, coefficients past top are 0
    exact: bool = False
    # coefficients below low are O(p^tail); None means they are 0
    tail: int | None = None

    @property
    def window(self) -> int:
        return len(self.coeffs)

    @property
    def top(self) -> int:
        return self.low + self.window

    @classmethod
    def from_coefficients(cls, p: int, low: int, values: Sequence, M: int, top: int | None = None,
                          exact: bool = False) -> "RobbaElement":
        """values: ints, Fractions or PadicScalars for pi^low, pi^(low+1), ..."""
        coeffs = [v if isinstance(v, PadicScalar) else PadicScalar.from_fraction(p, Fraction(v), M) for v in values]
        top = low + len(coeffs) if top is None else top
        coeffs = coeffs[:top - low] + [PadicScalar.zero(p, M)] * (top - low - len(coeffs))
        return cls(p, low, tuple(coeffs), M, exact).normalized()

    @classmethod
    def polynomial(cls, p: int, low: int, values: Sequence, M: int) -> "RobbaElement":
        """An exact Laurent polynomial; integer and Fraction values carry precision M + 64."""
        coeffs = [v if isinstance(v, PadicScalar) else PadicScalar.from_fraction(p, Fraction(v), M + 64)
                  for v in values]
        return cls(p, low, tuple(coeffs), M, True).normalized()

    @classmethod
    def zero(cls, p: int, top: int, M: int) -> "RobbaElement":
        return cls(p, top, (), M)

    @classmethod
    def one(cls, p: int, top: int, M: int) -> "RobbaElement":
        return cls.from_coefficients(p, 0, [1], M, top)

    @classmethod
    def constant(cls, p: int, c, M: int) -> "RobbaElement":
        return cls.polynomial(p, 0, [c], M)

    @classmethod
    def monomial(cls, p: int, n: int, top: int, M: int, c=1) -> "RobbaElement":
        if n >= top:
            return cls.zero(p, top, M)
        return cls.from_coefficients(p, n, [c], M, top)

    def normalized(self) -> "RobbaElement":
        k = 0
        while k < len(self.coeffs) and self.coeffs[k].is_zero():
            k += 1
        tail = self.tail
        if k:
            dropped = min(c.abs_precision for c in self.coeffs[:k])
            if tail is not None or dropped < self.M:
                tail = _min_tail(tail, dropped)
        # an exact element also drops trailing zeros
        j = len(self.coeffs)
        if self.exact:
            while j > k and self.coeffs[j - 1].is_zero():
                j -= 1
        if k == 0 and j == len(self.coeffs):
            return self
        if k == j:
            return RobbaElement(self.p, self.top if not self.exact else 0, (), self.M, self.exact, tail)
        return RobbaElement(self.p, self.low + k, self.coeffs[k:j], self.M, self.exact, tail)

    def is_zero(self) -> bool:
        return not self.coeffs

    def coefficient(self, n: int) -> PadicScalar:
        if n >= self.top and self.exact:
            return PadicScalar.zero(self.p, self.M + 64)
        if n >= self.top:
            raise WindowError(f"coefficient {n} is beyond the window top {self.top}")
        if n < self.low:
            return PadicScalar.zero(self.p, self.M if self.tail is None else self.tail)
        return self.coeffs[n - self.low]

    def min_valuation(self) -> int:
        return min((c.valuation for c in self.coeffs if not c.is_zero()), default=self.M)

    def with_window(self, top: int) -> "RobbaElement":
        """The element as a truncated series O(pi^top); exact elements only extend."""
        if self.exact:
            lo = min(self.low, top)
            coeffs = tuple(self.coefficient(n) for n in range(lo, top))
            return RobbaElement(self.p, lo, coeffs, self.M, False, self.tail).normalized()
        return self.truncate(top)

    def equals(self, other: "RobbaElement") -> bool:
        """Coefficientwise equality on the common window, at each coefficient's precision."""
        if self.exact and other.exact:
            top = max(self.top, other.top)
        elif self.exact or other.exact:
            top = other.top if self.exact else self.top
        else:
            top = min(self.top, other.top)
        lo = min(self.low, other.low)
        return all(self.coefficient(n).equals(other.coefficient(n)) for n in range(lo, top))

    def truncate(self, top: int) -> "RobbaElement":
        if top > self.top:
            raise WindowError(f"cannot extend the window from {self.top} to {top}")
        if top <= self.low:
            return RobbaElement(self.p, top, (), self.M, False, self.tail)
        return RobbaElement(self.p, self.low, self.coeffs[:top - self.low], self.M, False, self.tail).normalized()

    def __add__(self, other):
        return robba_arith(self, _coerce(self, other), "add")

    __radd__ = __add__

    def __neg__(self):
        return RobbaElement(self.p, self.low, tuple(-c for c in self.coeffs), self.M, self.exact, self.tail)

    def __sub__(self, other):
        return self + (-_coerce(self, other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction, PadicScalar)):
            c = other if isinstance(other, PadicScalar) else PadicScalar.from_fraction(self.p, Fraction(other),
                                                                                       self.M + 64)
            tail = None if self.tail is None else self.tail + min(c.valuation, self.M + 64)
            return RobbaElement(self.p, self.low, tuple(x * c for x in self.coeffs), self.M, self.exact,
                                tail).normalized()
        return robba_arith(self, other, "mul")

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if k < 0:
            return invert_unit(self) ** (-k)
        result = RobbaElement.constant(self.p, 1, self.M)
        for _ in range(k):
            result = result * self
        return result

    def __repr__(self):
        shown = " + ".join(f"({c})pi^{self.low + i}" for i, c in enumerate(self.coeffs[:4]) if not c.is_zero())
        return f"RobbaElement({shown or '0'}{' + ...' if self.window > 4 else ''} + O(pi^{self.top}))"


def _min_tail(*tails: int | None) -> int | None:
    known = [t for t in tails if t is not None]
    return min(known) if known else None


def _with_errors(p: int, M: int, lo: int, coeffs: list[PadicScalar], errors, exact: bool,
                 tail: int | None) -> RobbaElement:
    """Coefficients from lo, each widened by the errors (start, stop, abs precision) covering it."""
    coeffs = list(coeffs)
    for start, stop, prec in errors:
        z = PadicScalar.zero(p, prec)
        for e in range(max(start, lo), min(stop, lo + len(coeffs))):
            coeffs[e - lo] = coeffs[e - lo] + z
    return RobbaElement(p, lo, tuple(coeffs), M, exact, tail).normalized()


def _coerce(f: RobbaElement, other) -> RobbaElement:
    if isinstance(other, RobbaElement):
        if other.p != f.p:
            raise ValueError("mismatched primes")
        return other
    return RobbaElement.constant(f.p, other, f.M)


def robba_arith(f: RobbaElement, g: RobbaElement, op: str) -> RobbaElement:
    """Sum or product; the result's top is what both error terms allow."""
    p = f.p
    exact = f.exact and g.exact
    tail = _min_tail(f.tail, g.tail)
    if op == "add":
        if exact:
            top = max(f.top, g.top)
        else:
            top = min(h.top for h in (f, g) if not h.exact)
        lo = min(f.low, g.low)
        if top <= lo:
            return RobbaElement(p, top, (), f.M, exact, tail)
        coeffs = [f.coefficient(n) + g.coefficient(n) for n in range(lo, top)]
        return RobbaElement(p, lo, tuple(coeffs), f.M, exact, tail).normalized()
    if op == "mul":
        if f.is_zero() and f.exact and f.tail is None or g.is_zero() and g.exact and g.tail is None:
            return RobbaElement.polynomial(p, 0, [], f.M)
        # (F + O(pi^tf))(G + O(pi^tg)) = FG + O(pi^min(low_f + tg, low_g + tf))
        if exact:
            top = f.top + g.top - 1
        else:
            top = min(h.low + k.top for h, k in ((f, g), (g, f)) if not k.exact)
        lo = f.low + g.low
        # a tail O(p^T) below h.low meets every coefficient of k, up to h.low + k.top
        errors, tails = [], []
        for h, k in ((f, g), (g, f)):
            if h.tail is not None:
                size = h.tail + min(k.min_valuation(), k.tail if k.tail is not None else k.M + 64)
                errors.append((-10**9, h.low + k.top, size))
                tails.append(size)
        tail = _min_tail(*tails)
        if top <= lo and not (f.is_zero() or g.is_zero()):
            raise WindowError("product has no reliable coefficient")
        if f.is_zero() or g.is_zero():
            return RobbaElement(p, top, (), f.M, False, tail)
        out: list[PadicScalar | None] = [None] * (top - lo)
        for i, a in enumerate(f.coeffs):
            if a.is_zero() and a.valuation >= f.M:
                continue
            for j, b in enumerate(g.coeffs):
                k = i + j
                if k >= top - lo:
                    break
                term = a * b
                out[k] = term if out[k] is None else out[k] + term
        coeffs = [c if c is not None else PadicScalar.zero(p, f.M) for c in out]
        return _with_errors(p, f.M, lo, coeffs, errors, exact and tail is None, tail)
    raise ValueError(f"unknown operation {op}")


def invert_unit(f: RobbaElement, terms: int | None = None) -> RobbaElement:
    """pi^-k u^-1 for f = pi^k u, inverting u as a power series in pi.

    The inverse of u is known to the same number of terms as u (or `terms`
    for a polynomial); a non-unit leading coefficient shows up as negative
    valuations.
    """
    f = f.normalized()
    if f.is_zero():
        raise PrecisionError("cannot invert an element that is zero on its window")
    if f.tail is not None:
        raise PrecisionError("cannot invert an element with an unresolved pole tail")
    if f.exact and f.window == 1:
        return RobbaElement(f.p, -f.low, (1 / f.coeffs[0],), f.M, True)
    if f.exact:
        n = terms or max(f.window, DEFAULT_WINDOW)
        u = tuple(f.coefficient(f.low + i) for i in range(n))
    else:
        u = f.coeffs
        n = len(u)
    inv: list[PadicScalar] = [1 / u[0]]
    for k in range(1, n):
        s = None
        for j in range(1, k + 1):
            term = u[j] * inv[k - j]
            s = term if s is None else s + term
        inv.append(-(s / u[0]))
    return RobbaElement(f.p, -f.low, tuple(inv), f.M).normalized()


# ---------------------------------------------------------------------------
# integer power series helpers (coefficient lists, truncated)


def _ps_mul(a: Sequence[int], b: Sequence[int], n: int, mod: int | None) -> list[int]:
    """First n coefficients of a * b (reduced mod `mod` when given)."""
    a = [int(x) % mod if mod else int(x) for x in a[:n]]
    b = [int(x) % mod if mod else int(x) for x in b[:n]]
    if not a or not b:
        return [0] * n
    if mod is None:
        out = [0] * n
        for i, x in enumerate(a):
            if x:
                for j, y in enumerate(b[:n - i]):
                    out[i + j] += x * y
        return out
    # Kronecker substitution: pack into one integer, multiply, unpack
    bits = (2 * mod.bit_length() + min(len(a), len(b)).bit_length() + 1)
    prod = _pack(a, bits) * _pack(b, bits)
    mask = (1 << bits) - 1
    out = []
    for _ in range(n):
        out.append((prod & mask) % mod)
        prod >>= bits
    return out


def _pack(xs: Sequence[int], bits: int) -> int:
    acc = 0
    for x in reversed(xs):
        acc = (acc << bits) | x
    return acc


def _ps_inv(a: Sequence[int], n: int, mod: int) -> list[int]:
    inv0 = pow(a[0], -1, mod)
    out = [inv0] + [0] * (n - 1)
    for k in range(1, n):
        s = sum(a[j] * out[k - j] for j in range(1, min(k, len(a) - 1) + 1))
        out[k] = (-s * inv0) % mod
    return out


def phi_unit(p: int) -> list[int]:
    """phi(pi)/pi = sum_{j=1}^p C(p, j) pi^(j-1)."""
    return [comb(p, j) for j in range(1, p + 1)]


def gamma_unit(a: int, n: int) -> list[int]:
    """gamma_a(pi)/pi = sum_{j>=1} C(a, j) pi^(j-1), first n terms (a an integer)."""
    out = []
    c = 1
    for j in range(1, n + 1):
        c = c * (a - j + 1) // j
        out.append(c)
    return out


def _phi_neg_unit(p: int, digits: int) -> list[int]:
    """(1 + u)^-1 as coefficients of pi^0, pi^-1, ..., where phi(pi) = pi^p (1 + u).

    Terms beyond index (digits - 1)(p - 1) are divisible by p^digits and dropped.
    """
    mod = p**digits
    n = (digits - 1) * (p - 1) + 1
    upoly = [1] + [comb(p, p - i) for i in range(1, p)]
    return _ps_inv(upoly + [0] * n, n, mod)


def _scalar_int(c: PadicScalar) -> tuple[int, int]:
    """(integer n, shift s) with c = p^s * n to the scalar's precision."""
    if c.is_zero():
        return 0, 0
    return c.unit, c.valuation


def _substitute(f: RobbaElement, positive: Callable[[int, int], list[int]],
                negative: Callable[[int, int], tuple[int, list[int]]], top: int,
                poles_descend: bool) -> RobbaElement:
    """sum c_n s(pi^n) for a substitution s given on monomials.

    positive(n, length) gives s(pi^n)/pi^n truncated; negative(n, digits)
    gives (lowest exponent, coefficients) of s(pi^-n).  With poles_descend,
    s(pi^-n) is a series in pi^-1 below pi^(-p n) (phi); otherwise a series
    in pi above pi^-n (gamma).
    """
    p = f.p
    acc: dict[int, PadicScalar] = {}
    # (start, stop, abs precision): ranges where a coefficient's error lands
    errors: list[tuple[int, int, int]] = []
    tails: list[int] = []
    floor = -10**9

    def reach(n: int) -> tuple[int, int]:
        if n < 0 and poles_descend:
            return floor, -p * -n + 1
        return n, top

    if f.tail is not None:
        if poles_descend and f.low <= 0:
            errors.append((floor, reach(f.low - 1)[1], f.tail))
        else:
            errors.append((floor, top, f.tail))
        tails.append(f.tail)
    for i, c in enumerate(f.coeffs):
        n = f.low + i
        if c.is_zero():
            errors.append(reach(n) + (c.abs_precision,))
            if n < 0 and poles_descend:
                tails.append(c.abs_precision)
            continue
        if n >= 0:
            series = positive(n, top - n)
            start = n
        else:
            # negative() works modulo p^digits; the products then keep c's absolute precision
            start, series = negative(-n, c.precision)
            if poles_descend:
                errors.append((floor, start, c.abs_precision))
                tails.append(c.abs_precision)
        for j, s in enumerate(series):
            e = start + j
            if e >= top or not s and n >= 0:
                continue
            term = c * (s if n >= 0 else PadicScalar.from_int(p, s, c.precision))
            acc[e] = acc[e] + term if e in acc else term
    tail = _min_tail(*tails)
    if not acc:
        return RobbaElement(p, top, (), f.M, False, tail)
    lo = min(acc)
    zero = PadicScalar.zero(p, f.M + 64)
    coeffs = [acc.get(e, zero) for e in range(lo, top)]
    return _with_errors(p, f.M, lo, coeffs, errors, False, tail)


def _is_constant(f: RobbaElement) -> bool:
    return f.exact and (f.is_zero() or (f.low == 0 and f.window == 1))


def _as_series(f: RobbaElement) -> RobbaElement:
    # a polynomial is acted on as a series with the default window
    return f.with_window(max(f.top, DEFAULT_WINDOW)) if f.exact else f


def phi_action(f: RobbaElement) -> RobbaElement:
    """phi(pi) = (1 + pi)^p - 1."""
    if _is_constant(f):
        return f
    f = _as_series(f)
    p = f.p
    if f.top < 1 and f.low < 0:
        raise WindowError("phi needs a window reaching pi^0")
    w = phi_unit(p)
    cache: dict[int, list[int]] = {}

    def positive(n: int, length: int) -> list[int]:
        key = n
        if key not in cache:
            r = [1]
            for _ in range(n):
                r = _ps_mul(r, w, length, None)
            cache[key] = r
        return cache[key][:length]

    def negative(n: int, digits: int) -> tuple[int, list[int]]:
        v = _phi_neg_unit(p, max(digits, 1))
        r = [1]
        for _ in range(n):
            r = _ps_mul(r, v, len(v) * n, p ** max(digits, 1))
        # coefficients are of pi^(-pn), pi^(-pn-1), ...; reverse into increasing order
        r = r[:(len(v) - 1) * n + 1]
        return -p * n - (len(r) - 1), r[::-1]

    return _substitute(f, positive, negative, f.top, True)


def gamma_action(f: RobbaElement, a: int) -> RobbaElement:
    """gamma_a(pi) = (1 + pi)^a - 1 for an integer a prime to p."""
    p = f.p
    if a % p == 0:
        raise ValueError("gamma needs a p-adic unit")
    if _is_constant(f):
        return f
    f = _as_series(f)
    top = f.top
    depth = max(-f.low, 0)
    w = gamma_unit(a, top + depth + 1)

    def positive(n: int, length: int) -> list[int]:
        r = [1] + [0] * (length - 1)
        for _ in range(n):
            r = _ps_mul(r, w, length, None)
        return r

    def negative(n: int, digits: int) -> tuple[int, list[int]]:
        mod = p**digits
        winv = _ps_inv(w, top + n, mod)
        r = [1]
        for _ in range(n):
            r = _ps_mul(r, winv, top + n, mod)
        return -n, r

    return _substitute(f, positive, negative, top, False)


def t_series(p: int, L: int, M: int) -> RobbaElement:
    """log(1 + pi) = sum_{i=1}^{L-1} (-1)^(i+1) pi^i / i + O(pi^L)."""
    return RobbaElement.from_coefficients(p, 0, [0] + [Fraction((-1) ** (i + 1), i) for i in range(1, L)], M, L)


def with_window_doubling(fn: Callable[[int], object], L: int = DEFAULT_WINDOW, L_max: int = MAX_WINDOW):
    """Call fn(L), doubling L on window exhaustion up to L_max."""
    while True:
        try:
            return fn(L)
        except WindowError:
            if 2 * L > L_max:
                raise
            L *= 2


# ---------------------------------------------------------------------------
# operator matrices on span(pi^-K, ..., pi^(L-1)) mod p^M


def phi_neg_depth(p: int, K: int, M: int) -> int:
    """Deepest pole order reached by phi on span(pi^-K .. pi^-1), modulo p^M."""
    return p * K + (M - 1) * (p - 1) if K else 0


@lru_cache(maxsize=64)
def phi_matrix(p: int, M: int, K: int, L: int, K_out: int | None = None) -> np.ndarray:
    """phi as a matrix: columns pi^-K..pi^(L-1), rows pi^-K_out..pi^(L-1); read-only."""
    check_prime(p)
    K_out = phi_neg_depth(p, K, M) if K_out is None else K_out
    if K and K_out < phi_neg_depth(p, K, M):
        raise WindowError(f"phi of pi^-{K} needs output depth {phi_neg_depth(p, K, M)}")
    mod = p**M
    out = np.zeros((K_out + L, K + L), dtype=np.int64)
    w = phi_unit(p)
    s = [1] + [0] * (L - 1)
    for n in range(L):
        if n:
            s = _ps_mul(s, w, L - n, mod)
        col = n + K
        out[n + K_out:n + K_out + len(s[:L - n]), col] = s[:L - n]
    if K:
        v = _phi_neg_unit(p, M)
        r = [1]
        for n in range(1, K + 1):
            r = _ps_mul(r, v, (len(v) - 1) * n + 1, mod)
            # r[m] is the coefficient of pi^(-p n - m)
            for m, c in enumerate(r):
                if c:
                    out[-p * n - m + K_out, -n + K] = c
    return _frozen(out % mod)


@lru_cache(maxsize=64)
def gamma_matrix(p: int, M: int, a: int, K: int, L: int) -> np.ndarray:
    """gamma_a on span(pi^-K..pi^(L-1)); square, since gamma keeps pole order; read-only."""
    if a % p == 0:
        raise ValueError("gamma needs a p-adic unit")
    mod = p**M
    a %= mod
    out = np.zeros((K + L, K + L), dtype=np.int64)
    w = [c % mod for c in gamma_unit(a, L + K)]
    s = [1] + [0] * (L - 1)
    for n in range(L):
        if n:
            s = _ps_mul(s, w, L - n, mod)
        out[n + K:, n + K] = s[:L - n]
    if K:
        winv = _ps_inv(w, L + K, mod)
        r = [1] + [0] * (L + K - 1)
        for n in range(1, K + 1):
            r = _ps_mul(r, winv, L + K, mod)
            out[-n + K:, -n + K] = r[:L + n]
    return _frozen(out % mod)


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def inclusion_matrix(K_in: int, K_out: int, L: int) -> np.ndarray:
    """span(pi^-K_in..) -> span(pi^-K_out..), K_out >= K_in."""
    out = np.zeros((K_out + L, K_in + L), dtype=np.int64)
    for j in range(K_in + L):
        out[j + K_out - K_in, j] = 1
    return out


def multiplication_matrix(f: RobbaElement, K: int, L: int, M: int, shift: int = 0) -> np.ndarray:
    """Multiplication by p^shift * f on span(pi^-K..pi^(L-1)), modulo p^M.

    f must lie in the integral power series ring after the shift, and be known
    up to pi^(K+L-1) so that every entry of the window is determined.
    """
    p = f.p
    mod = p**M
    n = K + L
    out = np.zeros((n, n), dtype=np.int64)
    if f.is_zero() and f.exact:
        return out
    if f.low < 0:
        raise WindowError("multiplication by an element with poles leaves the window")
    if not f.exact and f.top < n:
        raise WindowError(f"element known to pi^{f.top}, the window needs pi^{n}")
    for k in range(f.low, min(n, f.top)):
        c = f.coefficient(k)
        if c.is_zero():
            if c.abs_precision + shift < M:
                raise PrecisionError(f"coefficient of pi^{k} is only known mod p^{c.abs_precision}")
            continue
        c = c * p**shift
        if c.abs_precision < M:
            raise PrecisionError(f"coefficient of pi^{k} is only known mod p^{c.abs_precision}")
        v = c.residue_int(M)
        idx = np.arange(n - k)
        out[idx + k, idx] = v
    return out
