"""Finite-precision p-adic scalars, tower quotient rings and linear algebra mod p^M.

Scalars carry a valuation and a unit known to a relative precision, so that
sums, products and quotients never claim more digits than their inputs
justify.  Tower rings are quotients of Z/p^M[x_1, ..., x_r] by monic
integer polynomials, one per variable; the two kinds used throughout the
package are the cyclotomic tower (roots of unity of p-power order) and the
Kummer tower (p-power roots of p).

The matrix routines work on integer numpy arrays reduced mod p^M; a PadicMatrix
is a thin wrapper that scales a grid of scalars to such an array.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np


class PrecisionError(ArithmeticError):
    """Raised when an answer would depend on digits that are not known."""

    def __init__(self, message: str, kind: str = "precision-exhausted"):
        super().__init__(f"{kind}: {message}")
        self.kind = kind


def check_prime(p: int) -> int:
    if p == 2:
        raise ValueError("p = 2 is not supported; use an odd prime")
    if p < 2 or any(p % q == 0 for q in range(2, math.isqrt(p) + 1)):
        raise ValueError(f"{p} is not prime")
    return p


def vp(n: int, p: int) -> int:
    """Valuation of a nonzero integer."""
    if n == 0:
        raise ValueError("valuation of 0")
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v


def vp_fraction(x: Fraction, p: int) -> int:
    return vp(x.numerator, p) - vp(x.denominator, p)


# ---------------------------------------------------------------------------
# scalars


@dataclass(frozen=True)
class PadicScalar:
    """p^valuation * unit, with unit known mod p^precision.

    Zero is stored with unit = 0 and precision = 0; its valuation is then the
    absolute precision floor (the value is O(p^valuation)).
    """

    p: int
    valuation: int
    unit: int
    precision: int

    def __post_init__(self):
        if self.precision < 0:
            raise ValueError("negative precision")
        if self.precision == 0 and self.unit != 0:
            raise ValueError("a zero-precision scalar must have unit 0")
        if self.precision > 0 and self.unit % self.p == 0:
            raise ValueError("unit must be coprime to p")

    # construction -----------------------------------------------------------

    @classmethod
    def zero(cls, p: int, floor: int) -> "PadicScalar":
        return cls(p, floor, 0, 0)

    @classmethod
    def from_int(cls, p: int, n: int, prec: int) -> "PadicScalar":
        """n known modulo p^prec (absolute precision)."""
        return cls._normalize(p, 0, n, prec)

    @classmethod
    def from_fraction(cls, p: int, x: Fraction | int, prec: int) -> "PadicScalar":
        """x with relative precision prec."""
        x = Fraction(x)
        if x == 0:
            return cls.zero(p, prec)
        v = vp_fraction(x, p)
        num = x.numerator // p ** max(v, 0)
        den = x.denominator // p ** max(-v, 0)
        mod = p**prec
        return cls(p, v, num * pow(den, -1, mod) % mod, prec)

    @classmethod
    def _normalize(cls, p: int, valuation: int, n: int, abs_prec: int) -> "PadicScalar":
        # n * p^valuation known modulo p^abs_prec
        rel = abs_prec - valuation
        if rel <= 0:
            return cls.zero(p, abs_prec)
        n %= p**rel
        if n == 0:
            return cls.zero(p, abs_prec)
        k = vp(n, p)
        return cls(p, valuation + k, (n // p**k) % p ** (rel - k), rel - k)

    # queries ----------------------------------------------------------------

    @property
    def abs_precision(self) -> int:
        return self.valuation + self.precision

    def is_zero(self) -> bool:
        return self.precision == 0

    def to_fraction(self) -> Fraction:
        if self.is_zero():
            return Fraction(0)
        return Fraction(self.unit) * Fraction(self.p) ** self.valuation

    def residue_int(self, mod_exp: int) -> int:
        """Integer representative mod p^mod_exp; needs valuation >= 0."""
        if self.is_zero():
            return 0
        if self.valuation < 0:
            raise PrecisionError("scalar is not integral")
        if mod_exp > self.abs_precision:
            raise PrecisionError(f"asked for {mod_exp} digits, {self.abs_precision} known")
        return self.unit * self.p**self.valuation % self.p**mod_exp

    def equals(self, other: "PadicScalar") -> bool:
        """Equality modulo the weaker of the two absolute precisions."""
        d = self - other
        return d.is_zero()

    # arithmetic -------------------------------------------------------------

    def _coerce(self, other) -> "PadicScalar":
        if isinstance(other, PadicScalar):
            if other.p != self.p:
                raise ValueError("mismatched primes")
            return other
        if isinstance(other, (int, Fraction)):
            return PadicScalar.from_fraction(self.p, Fraction(other), self.precision + 64)
        return NotImplemented

    def __add__(self, other):
        b = self._coerce(other)
        if b is NotImplemented:
            return b
        a = self
        abs_prec = min(a.abs_precision, b.abs_precision)
        if a.is_zero() and b.is_zero():
            return PadicScalar.zero(self.p, abs_prec)
        v = min(x.valuation for x in (a, b) if not x.is_zero())
        if v >= abs_prec:
            return PadicScalar.zero(self.p, abs_prec)
        n = 0
        for x in (a, b):
            if not x.is_zero():
                n += x.unit * self.p ** (x.valuation - v)
        return PadicScalar._normalize(self.p, v, n, abs_prec)

    __radd__ = __add__

    def __neg__(self):
        if self.is_zero():
            return self
        return PadicScalar(self.p, self.valuation, (-self.unit) % self.p**self.precision, self.precision)

    def __sub__(self, other):
        b = self._coerce(other)
        if b is NotImplemented:
            return b
        return self + (-b)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        b = self._coerce(other)
        if b is NotImplemented:
            return b
        a = self
        if a.is_zero() or b.is_zero():
            # a zero's valuation is its floor, so the floors add either way
            return PadicScalar.zero(self.p, a.valuation + b.valuation)
        prec = min(a.precision, b.precision)
        mod = self.p**prec
        return PadicScalar(self.p, a.valuation + b.valuation, a.unit * b.unit % mod, prec)

    __rmul__ = __mul__

    def __truediv__(self, other):
        b = self._coerce(other)
        if b is NotImplemented:
            return b
        if b.is_zero():
            raise PrecisionError("division by a scalar that is zero at its precision")
        if self.is_zero():
            return PadicScalar.zero(self.p, self.valuation - b.valuation)
        prec = min(self.precision, b.precision)
        mod = self.p**prec
        return PadicScalar(self.p, self.valuation - b.valuation,
                           self.unit * pow(b.unit, -1, mod) % mod, prec)

    def __rtruediv__(self, other):
        return self._coerce(other) / self

    def __pow__(self, k: int):
        if k < 0:
            return PadicScalar.from_int(self.p, 1, self.precision + 64) / self ** (-k)
        if self.is_zero():
            return PadicScalar.zero(self.p, self.valuation * k) if k else PadicScalar.from_int(self.p, 1, 64)
        mod = self.p**self.precision
        return PadicScalar(self.p, self.valuation * k, pow(self.unit, k, mod), self.precision)

    def __repr__(self):
        if self.is_zero():
            return f"O({self.p}^{self.valuation})"
        return f"{self.p}^{self.valuation}*{self.unit} + O({self.p}^{self.abs_precision})"


# ---------------------------------------------------------------------------
# tower rings


def cyclotomic_poly(p: int, m: int) -> tuple[int, ...]:
    """Coefficients (low degree first) of Phi_{p^m}(1+x), monic of degree p^(m-1)(p-1)."""
    if m < 1:
        raise ValueError("cyclotomic level must be >= 1")
    # Phi_{p^m}(y) = sum_{k<p} y^(k p^(m-1)), then substitute y = 1 + x
    q = p ** (m - 1)
    deg = q * (p - 1)
    out = [0] * (deg + 1)
    for k in range(p):
        e = k * q
        for j in range(e + 1):
            out[j] += math.comb(e, j)
    return tuple(out)


def kummer_poly(p: int, m: int) -> tuple[int, ...]:
    """Coefficients of x^(p^m) - p."""
    if m < 1:
        raise ValueError("Kummer level must be >= 1")
    d = p**m
    return tuple([-p] + [0] * (d - 1) + [1])


@dataclass(frozen=True)
class Generator:
    name: str
    kind: str  # "cyclotomic" or "kummer"
    level: int
    poly: tuple[int, ...]

    @property
    def degree(self) -> int:
        return len(self.poly) - 1


class TowerRing:
    """Z/p^M[x_1..x_r] modulo monic integer polynomials f_i(x_i).

    Elements are numpy arrays of shape (deg f_1, ..., deg f_r).
    """

    def __init__(self, p: int, M: int, generators: Sequence[Generator]):
        check_prime(p)
        if M < 1:
            raise ValueError("precision must be >= 1")
        for g in generators:
            if g.poly[-1] != 1:
                raise ValueError(f"defining polynomial of {g.name} is not monic")
        self.p = p
        self.M = M
        self.mod = p**M
        self.generators = tuple(generators)
        self.shape = tuple(g.degree for g in self.generators) or (1,)
        self.rank = int(np.prod(self.shape))
        # int64 is exact while a full convolution sum stays below 2^62
        bound = self.mod**2 * self.rank
        self.dtype = np.int64 if bound < 2**62 else object

    @classmethod
    def cyclotomic(cls, p: int, m: int, M: int) -> "TowerRing":
        return cls(p, M, [Generator("x", "cyclotomic", m, cyclotomic_poly(p, m))])

    @classmethod
    def kummer(cls, p: int, m: int, M: int) -> "TowerRing":
        return cls(p, M, [Generator("y", "kummer", m, kummer_poly(p, m))])

    @classmethod
    def compositum(cls, p: int, m: int, M: int) -> "TowerRing":
        return cls(p, M, [Generator("x", "cyclotomic", m, cyclotomic_poly(p, m)),
                          Generator("y", "kummer", m, kummer_poly(p, m))])

    @property
    def kinds(self) -> tuple[str, ...]:
        return tuple(g.kind for g in self.generators)

    @property
    def level(self) -> int:
        return max((g.level for g in self.generators), default=0)

    def with_precision(self, M: int) -> "TowerRing":
        return TowerRing(self.p, M, self.generators)

    def same_structure(self, other: "TowerRing") -> bool:
        return self.p == other.p and self.generators == other.generators

    def __eq__(self, other):
        return isinstance(other, TowerRing) and self.same_structure(other) and self.M == other.M

    def __hash__(self):
        return hash((self.p, self.M, self.generators))

    def __repr__(self):
        gens = ", ".join(f"{g.kind}{g.level}" for g in self.generators)
        return f"TowerRing(p={self.p}, M={self.M}, [{gens}])"

    # element constructors ---------------------------------------------------

    def element(self, coeffs) -> "TowerRingElement":
        arr = np.zeros(self.shape, dtype=self.dtype)
        src = np.asarray(coeffs, dtype=object)
        arr[tuple(slice(0, s) for s in src.shape)] = src % self.mod
        return TowerRingElement(self, arr)

    def scalar(self, n: int) -> "TowerRingElement":
        arr = np.zeros(self.shape, dtype=self.dtype)
        arr[(0,) * len(self.shape)] = n % self.mod
        return TowerRingElement(self, arr)

    def zero(self) -> "TowerRingElement":
        return self.scalar(0)

    def one(self) -> "TowerRingElement":
        return self.scalar(1)

    def gen(self, i: int = 0) -> "TowerRingElement":
        """The i-th tower variable (x for cyclotomic, y for Kummer)."""
        arr = np.zeros(self.shape, dtype=self.dtype)
        idx = [0] * len(self.shape)
        if self.shape[i] == 1:
            # degree-1 generator: the variable is minus the constant term
            arr[tuple(idx)] = (-self.generators[i].poly[0]) % self.mod
        else:
            idx[i] = 1
            arr[tuple(idx)] = 1
        return TowerRingElement(self, arr)

    def root_of_unity(self, n: int) -> "TowerRingElement":
        """zeta_{p^n} = (1 + x)^(p^(m-n)) for n <= m (cyclotomic generator)."""
        i = self.kinds.index("cyclotomic")
        m = self.generators[i].level
        if n > m:
            raise ValueError(f"level {n} root of unity needs cyclotomic level >= {n}")
        return (self.one() + self.gen(i)) ** (self.p ** (m - n))

    def root_of_p(self, n: int) -> "TowerRingElement":
        """p^(1/p^n) = y^(p^(m-n)) for n <= m (Kummer generator)."""
        i = self.kinds.index("kummer")
        m = self.generators[i].level
        if n > m:
            raise ValueError(f"level {n} root of p needs Kummer level >= {n}")
        return self.gen(i) ** (self.p ** (m - n))

    # internal arithmetic ---------------------------------------------------

    def _reduce(self, arr: np.ndarray) -> np.ndarray:
        """Reduce a full-product array (shape 2d-1 per axis) to the ring shape."""
        arr = arr % self.mod
        for ax, g in enumerate(self.generators):
            d = g.degree
            if arr.shape[ax] <= d:
                continue
            table = _reduction_table(g.poly, self.mod, self.dtype is not object)
            arr = np.moveaxis(arr, ax, 0)
            high = arr[d:]
            low = arr[:d] + np.tensordot(table[:len(high)].T, high, axes=1)
            arr = np.moveaxis(low % self.mod, 0, ax)
        return arr

    def _mul_arrays(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        if len(self.shape) == 1:
            prod = np.convolve(a, b) % self.mod
        else:
            prod = _convolve_nd(a, b, self.mod)
        return self._reduce(prod)


@lru_cache(maxsize=64)
def _reduction_table(poly: tuple[int, ...], mod: int, native: bool) -> np.ndarray:
    """Row r holds x^(d+r) mod (f, mod) in the basis 1..x^(d-1), r < d-1."""
    d = len(poly) - 1
    low = [(-c) % mod for c in poly[:-1]]
    rows = []
    cur = low[:]
    for _ in range(max(d - 1, 0)):
        rows.append(cur)
        top = cur[-1]
        cur = [0] + cur[:-1]
        cur = [(a + top * b) % mod for a, b in zip(cur, low)]
    table = np.array(rows, dtype=object).reshape(max(d - 1, 0), d)
    return table.astype(np.int64) if native else table


def _convolve_nd(a: np.ndarray, b: np.ndarray, mod: int) -> np.ndarray:
    # Kronecker substitution: pack each axis with stride 2*len-1 so that a
    # single 1-d convolution produces the full n-d product without overlap
    out_shape = tuple(x + y - 1 for x, y in zip(a.shape, b.shape))
    strides = []
    s = 1
    for n in reversed(out_shape):
        strides.append(s)
        s *= n
    strides = strides[::-1]

    def pack(x):
        flat = np.zeros(s, dtype=x.dtype)
        idx = sum(np.arange(n).reshape([-1 if k == ax else 1 for k in range(x.ndim)]) * st
                  for ax, (n, st) in enumerate(zip(x.shape, strides)))
        flat[np.broadcast_to(idx, x.shape).ravel()] = x.ravel()
        return np.trim_zeros(flat, "b") if x.dtype is not object else flat

    pa, pb = pack(a), pack(b)
    full = np.zeros(s, dtype=a.dtype)
    if len(pa) and len(pb):
        c = np.convolve(pa, pb) % mod
        full[:len(c)] = c[:s]
    return full.reshape(out_shape)


class TowerRingElement:
    __slots__ = ("ring", "coeffs")

    def __init__(self, ring: TowerRing, coeffs: np.ndarray):
        self.ring = ring
        self.coeffs = coeffs

    def _check(self, other) -> "TowerRingElement":
        if isinstance(other, int):
            return self.ring.scalar(other)
        if not isinstance(other, TowerRingElement):
            return NotImplemented
        if other.ring != self.ring:
            raise TypeError(f"mismatched rings: {self.ring} vs {other.ring}")
        return other

    def __add__(self, other):
        o = self._check(other)
        if o is NotImplemented:
            return o
        return TowerRingElement(self.ring, (self.coeffs + o.coeffs) % self.ring.mod)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._check(other)
        if o is NotImplemented:
            return o
        return TowerRingElement(self.ring, (self.coeffs - o.coeffs) % self.ring.mod)

    def __rsub__(self, other):
        return (-self) + other

    def __neg__(self):
        return TowerRingElement(self.ring, (-self.coeffs) % self.ring.mod)

    def __mul__(self, other):
        if isinstance(other, int):
            return TowerRingElement(self.ring, (self.coeffs * (other % self.ring.mod)) % self.ring.mod)
        o = self._check(other)
        if o is NotImplemented:
            return o
        return TowerRingElement(self.ring, self.ring._mul_arrays(self.coeffs, o.coeffs))

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if k < 0:
            raise ValueError("negative powers are not supported in tower rings")
        result = self.ring.one()
        base = self
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    def __eq__(self, other):
        o = self._check(other)
        if o is NotImplemented:
            return False
        return bool(np.all((self.coeffs - o.coeffs) % self.ring.mod == 0))

    def __hash__(self):
        return hash(tuple(int(c) for c in self.coeffs.flat))

    def is_zero(self) -> bool:
        return not np.any(self.coeffs % self.ring.mod)

    def reduce(self, M: int) -> "TowerRingElement":
        """Image in the same tower mod p^M (M <= current precision)."""
        if M > self.ring.M:
            raise PrecisionError(f"cannot raise precision from {self.ring.M} to {M}")
        ring = self.ring.with_precision(M)
        return TowerRingElement(ring, (self.coeffs % ring.mod).astype(ring.dtype))

    def lift(self, M: int) -> "TowerRingElement":
        """Same integer coefficients viewed mod p^M (any M); a lift when M grows."""
        ring = self.ring.with_precision(M)
        c = np.asarray(self.coeffs, dtype=object) % ring.mod
        return TowerRingElement(ring, c.astype(ring.dtype))

    def agreement(self) -> int:
        """Largest k <= M with self = 0 mod p^k."""
        k = self.ring.M
        flat = [int(c) for c in self.coeffs.flat if int(c) % self.ring.mod]
        if not flat:
            return k
        return min(vp(c, self.ring.p) for c in flat)

    def divisible_by_p(self) -> bool:
        return bool(np.all(self.coeffs % self.ring.p == 0))

    def div_p(self, k: int = 1) -> "TowerRingElement":
        """Exact division by p^k; the result is known mod p^(M-k)."""
        if self.agreement() < k:
            raise ArithmeticError(f"element is not divisible by {self.ring.p}^{k}")
        ring = self.ring.with_precision(self.ring.M - k)
        c = np.asarray(self.coeffs, dtype=object) // self.ring.p**k
        return TowerRingElement(ring, (c % ring.mod).astype(ring.dtype))

    def valuation(self) -> Fraction | None:
        """Valuation (normalized v(p) = 1) in a single tower; None if zero at precision.

        The tower variable is a uniformizer for both kinds, so the monomial
        valuations v(c_i) + i/e are pairwise distinct and the minimum is exact.
        """
        ring = self.ring
        if len(ring.generators) != 1:
            raise PrecisionError("valuation is only defined on a single tower", "valuation-indeterminate")
        e = ring.generators[0].degree
        best = None
        for i, c in enumerate(self.coeffs.flat):
            c = int(c) % ring.mod
            if c:
                v = Fraction(vp(c, ring.p)) + Fraction(i, e)
                best = v if best is None or v < best else best
        return best

    def __repr__(self):
        nz = [(idx, int(c)) for idx, c in np.ndenumerate(self.coeffs) if int(c)]
        return f"TowerRingElement({self.ring}, {nz[:8]}{'...' if len(nz) > 8 else ''})"


# ---------------------------------------------------------------------------
# matrices and Smith normal form


@dataclass(frozen=True)
class PadicMatrix:
    entries: tuple[tuple[PadicScalar, ...], ...]

    @property
    def rows(self) -> int:
        return len(self.entries)

    @property
    def cols(self) -> int:
        return len(self.entries[0]) if self.entries else 0

    @classmethod
    def from_rows(cls, p: int, rows: Iterable[Iterable], prec: int) -> "PadicMatrix":
        out = []
        for r in rows:
            out.append(tuple(x if isinstance(x, PadicScalar) else PadicScalar.from_fraction(p, Fraction(x), prec)
                             for x in r))
        return cls(tuple(out))

    def precision_floor(self) -> int:
        return min((x.abs_precision for r in self.entries for x in r), default=0)

    def to_integral(self) -> tuple[np.ndarray, int, int]:
        """(A, s, M) with A = p^s * self as integers mod p^M, s >= 0 minimal."""
        flat = [x for r in self.entries for x in r]
        p = flat[0].p
        s = max([0] + [-x.valuation for x in flat if not x.is_zero()])
        M = self.precision_floor() + s
        A = np.zeros((self.rows, self.cols), dtype=object)
        for i, r in enumerate(self.entries):
            for j, x in enumerate(r):
                if not x.is_zero():
                    A[i, j] = x.unit * p ** (x.valuation + s) % p**M
        return A, s, M


@dataclass
class SmithForm:
    exponents: list[int]   # elementary divisor exponents, clipped at M (length min(rows, cols))
    U: np.ndarray | None  # rows x rows, invertible mod p^M
    V: np.ndarray | None  # cols x cols
    p: int
    M: int

    def rank(self, tau: int) -> int:
        return sum(1 for e in self.exponents if e < tau)


def _int_dtype(mod: int, n: int):
    return np.int64 if mod * mod < 2**62 // max(n, 1) else object


def _valuations(A: np.ndarray, p: int, M: int) -> np.ndarray:
    v = np.full(A.shape, M, dtype=np.int64)
    x = A.copy()
    alive = x != 0
    v[alive] = 0
    for _ in range(M):
        m = alive & (x % p == 0)
        if not m.any():
            break
        v[m] += 1
        x[m] //= p
        alive = m
    return v


def smith_normal_form(A, p: int, M: int, transforms: bool = True) -> SmithForm:
    """Smith form of an integer matrix over Z/p^M.

    Pivots are chosen with minimal valuation, so the exponents come out sorted
    and U A V = diag(p^e_i) mod p^M.
    """
    if isinstance(A, PadicMatrix):
        A, _, M = A.to_integral()
    mod = p**M
    A = np.asarray(A, dtype=object) % mod
    r, c = A.shape
    dtype = _int_dtype(mod, 1)
    A = A.astype(dtype)
    U = np.eye(r, dtype=dtype) if transforms else None
    V = np.eye(c, dtype=dtype) if transforms else None
    exps: list[int] = []
    n = min(r, c)
    i = 0
    while i < n:
        # prefer a unit in the current column; otherwise scan the whole block
        colv = A[i:, i] % p != 0
        if colv.any():
            a, b, e = int(np.argmax(colv)), 0, 0
        else:
            sub = A[i:, i:]
            unit_mask = sub % p != 0
            if unit_mask.any():
                a, b = np.unravel_index(int(np.argmax(unit_mask)), sub.shape)
                e = 0
            else:
                vals = _valuations(sub, p, M)
                a, b = np.unravel_index(int(np.argmin(vals)), sub.shape)
                e = int(vals[a, b])
                if e >= M:
                    break
        a += i
        b += i
        if a != i:
            A[[i, a]] = A[[a, i]]
            if transforms:
                U[[i, a]] = U[[a, i]]
        if b != i:
            A[:, [i, b]] = A[:, [b, i]]
            if transforms:
                V[:, [i, b]] = V[:, [b, i]]
        pe = p**e
        u = int(A[i, i]) // pe
        uinv = pow(u, -1, mod)
        # scale row i so the pivot is exactly p^e
        A[i] = (A[i] * uinv) % mod
        if transforms:
            U[i] = (U[i] * uinv) % mod
        rows = i + 1 + np.flatnonzero(A[i + 1:, i])
        if len(rows):
            col = A[rows, i] // pe
            A[rows] = (A[rows] - np.outer(col, A[i]) % mod) % mod
            if transforms:
                U[rows] = (U[rows] - np.outer(col, U[i]) % mod) % mod
        row = A[i, i + 1:] // pe
        # column i is now zero off the pivot, so clearing row i is the whole column step
        if transforms:
            cols = i + 1 + np.flatnonzero(row)
            if len(cols):
                V[:, cols] = (V[:, cols] - np.outer(V[:, i], row[cols - i - 1]) % mod) % mod
        A[i, i + 1:] = 0
        exps.append(e)
        i += 1
    exps.extend([M] * (n - len(exps)))
    return SmithForm(exps, U, V, p, M)


def numerical_rank(A, p: int, M: int, tau: int | None = None) -> int:
    """Number of elementary divisors p^e with e < tau (default ceil(M/2))."""
    if tau is None:
        tau = default_tau(M)
    if tau > M:
        raise PrecisionError(f"threshold {tau} exceeds precision {M}")
    A = np.asarray(A, dtype=object)
    if A.size == 0:
        return 0
    return smith_normal_form(A, p, M, transforms=False).rank(tau)


def default_tau(M: int) -> int:
    return (M + 1) // 2


def kernel_basis(A, p: int, M: int, tau: int | None = None) -> np.ndarray:
    """Columns spanning the numerical kernel: V-columns beyond the numerical rank."""
    if tau is None:
        tau = default_tau(M)
    A = np.asarray(A, dtype=object)
    rows, cols = A.shape
    if rows == 0:
        return np.eye(cols, dtype=object)
    sf = smith_normal_form(A, p, M)
    rk = sf.rank(tau)
    return np.asarray(sf.V[:, rk:], dtype=object)


def mat_mul(A, B, mod: int) -> np.ndarray:
    A = np.asarray(A, dtype=object)
    B = np.asarray(B, dtype=object)
    if A.size == 0 or B.size == 0:
        return np.zeros((A.shape[0], B.shape[1]), dtype=object)
    dt = _int_dtype(mod, A.shape[1])
    if dt is np.int64:
        a = (A % mod).astype(np.int64)
        b = (B % mod).astype(np.int64)
        # split to stay inside int64 for long inner products
        out = np.zeros((a.shape[0], b.shape[1]), dtype=np.int64)
        step = max(1, (2**62) // (mod * mod))
        for k in range(0, a.shape[1], step):
            out = (out + a[:, k:k + step] @ b[k:k + step]) % mod
        return out.astype(object)
    return (A.dot(B)) % mod


def mat_inverse(A, p: int, M: int) -> np.ndarray:
    """Inverse of a square matrix invertible mod p^M."""
    sf = smith_normal_form(A, p, M)
    if any(e != 0 for e in sf.exponents):
        raise PrecisionError("matrix is not invertible mod p")
    return mat_mul(sf.V, sf.U, p**M)


@dataclass
class Solution:
    x: np.ndarray   # integer vector
    shift: int      # solution is p^(-shift) * x
    residual_exp: int  # smallest valuation among obstructions (M if none)


def solve(A, b, p: int, M: int, tau: int | None = None) -> Solution | None:
    """Solve A x = b over Q_p at precision; None when b leaves the column space.

    b is in the span when every coordinate of U b beyond the numerical rank
    has valuation >= tau.
    """
    if tau is None:
        tau = default_tau(M)
    mod = p**M
    A = np.asarray(A, dtype=object) % mod
    b = np.asarray(b, dtype=object).reshape(-1) % mod
    rows, cols = A.shape
    sf = smith_normal_form(A, p, M)
    ub = mat_mul(sf.U, b.reshape(-1, 1), mod).reshape(-1)
    rk = sf.rank(tau)
    resid = M
    for i in range(rk, rows):
        if ub[i] % mod:
            resid = min(resid, vp(int(ub[i]), p))
    if resid < tau:
        return None
    shift = max(sf.exponents[:rk], default=0)
    y = np.zeros(cols, dtype=object)
    for i in range(rk):
        e = sf.exponents[i]
        # y_i = ub_i / p^e, stored scaled by p^shift
        y[i] = int(ub[i]) * p ** (shift - e) % mod
    x = mat_mul(sf.V, y.reshape(-1, 1), mod).reshape(-1)
    return Solution(x, shift, resid)
