"""Frobenius-compatible sequences approximating the tilt at a finite level.

A TiltElement stores components x_0..x_m as elements of one top-level tower
ring.  The ring is taken mod p^P rather than mod p: the components are lifts,
and the element they represent is their reduction mod p.  Keeping lifts lets
elements such as eps and ptilde carry their exact roots (zeta_{p^n}, p^(1/p^n)),
which is what makes theta_bar exact on them.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .padic_core import PrecisionError, TowerRing, TowerRingElement


def tower_kind(ring: TowerRing) -> str:
    kinds = ring.kinds
    if len(kinds) == 1:
        return kinds[0]
    return "compositum"


@dataclass(frozen=True)
class TiltElement:
    ring: TowerRing
    components: tuple
    # components are the sharp lifts: x_n = x_{n+1}^p holds exactly mod p^P
    exact: bool = False

    @property
    def level(self) -> int:
        return len(self.components) - 1

    @property
    def p(self) -> int:
        return self.ring.p

    @property
    def kind(self) -> str:
        return tower_kind(self.ring)

    @classmethod
    def from_components(cls, ring: TowerRing, components, exact: bool = False, check: bool = True) -> "TiltElement":
        x = cls(ring, tuple(components), exact)
        if check:
            n = x.first_incompatibility()
            if n is not None:
                raise ValueError(f"components {n} and {n + 1} are not compatible mod p")
        return x

    def first_incompatibility(self) -> int | None:
        p = self.p
        for n in range(self.level):
            if not (self.components[n] - self.components[n + 1] ** p).divisible_by_p():
                return n
        return None

    def lift_compatibility(self) -> int:
        """Largest c <= P with x_n = x_{n+1}^p mod p^c for every n."""
        c = self.ring.M
        for n in range(self.level):
            c = min(c, (self.components[n] - self.components[n + 1] ** self.p).agreement())
        return c

    # ring structure -------------------------------------------------------

    def _align(self, other):
        if isinstance(other, int):
            other = tilt_scalar(self.ring, self.level, other)
        if not isinstance(other, TiltElement):
            return None
        if other.ring != self.ring:
            raise TypeError("tilt elements over different towers")
        return other

    def _zip(self, other):
        n = min(self.level, other.level) + 1
        return zip(self.components[:n], other.components[:n])

    def __add__(self, other):
        o = self._align(other)
        if o is None:
            return NotImplemented
        return TiltElement(self.ring, tuple(a + b for a, b in self._zip(o)), False)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._align(other)
        if o is None:
            return NotImplemented
        return TiltElement(self.ring, tuple(a - b for a, b in self._zip(o)), False)

    def __rsub__(self, other):
        return (-self) + other

    def __neg__(self):
        # (-1) has the exact compatible lifts -1 for odd p
        return TiltElement(self.ring, tuple(-a for a in self.components), self.exact)

    def __mul__(self, other):
        if isinstance(other, int):
            return TiltElement(self.ring, tuple(a * other for a in self.components),
                               self.exact and other in (0, 1))
        o = self._align(other)
        if o is None:
            return NotImplemented
        return TiltElement(self.ring, tuple(a * b for a, b in self._zip(o)), self.exact and o.exact)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        return TiltElement(self.ring, tuple(a**k for a in self.components), self.exact)

    def __eq__(self, other):
        o = self._align(other)
        if o is None:
            return False
        return all((a - b).divisible_by_p() for a, b in self._zip(o))

    def __hash__(self):
        return hash((self.ring, self.level))

    def is_zero(self) -> bool:
        return all(c.divisible_by_p() for c in self.components)

    def truncate(self, level: int) -> "TiltElement":
        if level > self.level:
            raise PrecisionError(f"element only has level {self.level}")
        return TiltElement(self.ring, self.components[:level + 1], self.exact)

    def reduced(self) -> "TiltElement":
        """Forget the lifts: components replaced by digit representatives mod p."""
        p = self.p
        comps = tuple(TowerRingElement(self.ring, c.coeffs % p) for c in self.components)
        return TiltElement(self.ring, comps, False)

    def __repr__(self):
        return f"TiltElement({self.kind}, level={self.level}, exact={self.exact})"


class TiltRing:
    """Coefficient-ring handle for Witt vectors with tilt coordinates."""

    def __init__(self, ring: TowerRing, level: int):
        self.ring = ring
        self.level = level

    def zero(self) -> TiltElement:
        return tilt_scalar(self.ring, self.level, 0)

    def one(self) -> TiltElement:
        return tilt_scalar(self.ring, self.level, 1)

    def scalar(self, n: int) -> TiltElement:
        return tilt_scalar(self.ring, self.level, n)

    def __eq__(self, other):
        return isinstance(other, TiltRing) and other.ring == self.ring and other.level == self.level

    def __hash__(self):
        return hash((self.ring, self.level))


def tilt_scalar(ring: TowerRing, level: int, n: int) -> TiltElement:
    # n^p = n mod p, so constant components are compatible; sharp only for 0, 1, -1
    c = ring.scalar(n)
    return TiltElement(ring, (c,) * (level + 1), n in (0, 1, -1))


def make_epsilon(ring: TowerRing, level: int | None = None) -> TiltElement:
    """eps with eps_n = zeta_{p^n}; needs a cyclotomic generator of level >= level."""
    if "cyclotomic" not in ring.kinds:
        raise ValueError("eps needs a cyclotomic tower")
    m = ring.generators[ring.kinds.index("cyclotomic")].level
    level = m if level is None else level
    if level > m:
        raise ValueError(f"tower has cyclotomic level {m} < {level}")
    return TiltElement(ring, tuple(ring.root_of_unity(n) for n in range(level + 1)), True)


def make_ptilde(ring: TowerRing, level: int | None = None) -> TiltElement:
    """ptilde with ptilde_n = p^(1/p^n) (the fixed Kummer branch)."""
    if "kummer" not in ring.kinds:
        raise ValueError("ptilde needs a Kummer tower")
    m = ring.generators[ring.kinds.index("kummer")].level
    level = m if level is None else level
    if level > m:
        raise ValueError(f"tower has Kummer level {m} < {level}")
    return TiltElement(ring, tuple(ring.root_of_p(n) for n in range(level + 1)), True)


def tilt_frobenius(x: TiltElement, direction: str = "forward") -> TiltElement:
    if direction == "forward":
        return x ** x.p
    if direction == "inverse":
        if x.level == 0:
            raise PrecisionError("inverse Frobenius needs level >= 1")
        return TiltElement(x.ring, x.components[1:], x.exact)
    raise ValueError(f"unknown direction {direction}")


def _component_valuation(c: TowerRingElement) -> Fraction | None:
    """Valuation of a component as an element of O/p; None when it is 0 mod p.

    Raises when the monomial minimum is not unique in a compositum, where the
    monomial basis is not orthogonal for the valuation.
    """
    ring = c.ring
    p = ring.p
    digits = np.asarray(c.coeffs, dtype=object) % p
    degrees = [g.degree for g in ring.generators]
    best = None
    count = 0
    for idx, d in np.ndenumerate(digits):
        if d:
            v = sum((Fraction(i, e) for i, e in zip(idx, degrees)), Fraction(0))
            if best is None or v < best:
                best, count = v, 1
            elif v == best:
                count += 1
    if best is None:
        return None
    if count > 1:
        raise PrecisionError("tied monomial valuations in a compositum", "valuation-indeterminate")
    if best >= 1:
        raise PrecisionError("component outside the stabilized regime", "valuation-indeterminate")
    return best


def ve_valuation(x: TiltElement) -> Fraction:
    """v_E(x) = p^n v(x_n) for the largest n with x_n != 0 mod p."""
    for n in range(x.level, -1, -1):
        v = _component_valuation(x.components[n])
        if v is not None:
            return v * x.p**n
    raise PrecisionError("all components vanish mod p", "valuation-indeterminate")


@dataclass(frozen=True)
class ThetaBarValue:
    value: TowerRingElement  # in the tower ring mod p^P
    precision: int           # digits that are guaranteed

    def is_zero(self) -> bool:
        return self.value.reduce(self.precision).is_zero() if self.precision else True


def theta_bar(x: TiltElement, N: int | None = None) -> ThetaBarValue:
    """theta_bar(x) = lim x_n^(p^n), evaluated with component n = N - 1.

    Sharp lifts give the limit exactly (x_0 itself), so exact elements come
    back with full precision.
    """
    P = x.ring.M
    if x.exact:
        return ThetaBarValue(x.components[0], P if N is None else min(N, P))
    N = min(P, x.level + 1) if N is None else N
    if N > x.level + 1:
        raise PrecisionError(f"precision {N} needs level {N - 1}, element has level {x.level}")
    n = N - 1
    val = x.components[n] ** (x.p**n)
    return ThetaBarValue(val, min(N, P))


# ---------------------------------------------------------------------------
# division in the tilt (single towers)


def _digits(c: TowerRingElement) -> np.ndarray:
    return np.asarray(c.coeffs, dtype=np.int64) % c.ring.p


def _series_divide(a: np.ndarray, b: np.ndarray, p: int) -> tuple[np.ndarray, int] | None:
    """a / b in F_p[t]/(t^e); returns (quotient padded with zeros, reliable length) or None.

    Defined only when ord(a) >= ord(b); the quotient is known mod t^(e - ord b).
    """
    e = len(a)
    nz_b = np.flatnonzero(b)
    if not len(nz_b):
        raise PrecisionError("division by zero in the tilt")
    ob = int(nz_b[0])
    nz_a = np.flatnonzero(a)
    if not len(nz_a):
        return np.zeros(e, dtype=np.int64), e - ob
    if int(nz_a[0]) < ob:
        return None
    n = e - ob
    bs = b[ob:ob + n]
    as_ = a[ob:ob + n]
    inv0 = pow(int(bs[0]), -1, p)
    q = np.zeros(e, dtype=np.int64)
    r = as_.copy()
    for i in range(n):
        c = (int(r[i]) * inv0) % p
        if c:
            q[i] = c
            r[i:] = (r[i:] - c * bs[:n - i]) % p
    return q, n


def tilt_divide(x: TiltElement, y: TiltElement) -> TiltElement:
    """x / y in the tilt; costs one level.  Single towers only.

    At level n+1 the quotient is fixed modulo valuation 1 - v(y_{n+1}); its
    p-th power is then fixed mod p, which gives component n.
    """
    if len(x.ring.generators) != 1:
        raise PrecisionError("tilt division needs a single tower", "valuation-indeterminate")
    if x.level < 1:
        raise PrecisionError("tilt division needs level >= 1")
    p = x.p
    ring = x.ring
    top = min(x.level, y.level)
    comps = []
    for n in range(top):
        a, b = _digits(x.components[n + 1]), _digits(y.components[n + 1])
        res = _series_divide(a.ravel(), b.ravel(), p)
        if res is None:
            raise PrecisionError(f"not divisible at component {n + 1}", "not-divisible")
        q, _ = res
        qe = TowerRingElement(ring, q.reshape(ring.shape).astype(ring.dtype))
        comps.append(qe ** p)
    # reduce the p-th powers to digit representatives
    comps = [TowerRingElement(ring, c.coeffs % p) for c in comps]
    return TiltElement(ring, tuple(comps), False)
