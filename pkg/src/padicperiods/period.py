"""Truncated W(tilt): the map theta, division by a generator of its kernel,
and the periods t = log[eps] and log[ptilde] modulo the N-th filtration step.

An APlusElement stores a single Witt vector over the top tower ring: the
level-m projection of an element of lim W(O) along the Witt Frobenius.  Its
coordinates are lifts x_{i,m}; the tilt coordinate i has components
x_{i,m}^(p^(m-n)) mod p.  Elements built from integers and from Teichmuller
lifts of eps, ptilde (and their roots) by ring operations carry the genuine
projection, so theta is exact on them; everything else gets theta to
m + 1 digits.

Elements that are polynomials in one Teichmuller variable, Y = [eps^(1/p)]
or Z = [ptilde], also keep that polynomial (with rational coefficients).  On
those, theta has kernel generated by Phi_p(Y) (resp. Z - p) and division is
exact polynomial division.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import cached_property

import numpy as np

from .padic_core import Generator, PrecisionError, TowerRing, TowerRingElement, cyclotomic_poly, kummer_poly, vp, vp_fraction
from .tilt import TiltElement, _series_divide, make_epsilon, make_ptilde, tilt_frobenius
from .witt import WittVector, teichmuller, witt_arith, witt_from_integer, witt_one, witt_zero

TOWERS = ("cyclotomic", "kummer", "compositum")


@dataclass(frozen=True)
class PrecisionProfile:
    """Shared precision settings; validated once at construction."""

    p: int
    M: int = 8
    fil_depth: int = 4
    level: int = 4
    witt_length: int | None = None
    tower: str = "cyclotomic"

    def __post_init__(self):
        if self.witt_length is None:
            object.__setattr__(self, "witt_length", self.M)
        if self.tower not in TOWERS:
            raise ValueError(f"tower must be one of {TOWERS}")
        if self.M < 1 or self.level < 1 or self.fil_depth < 1:
            raise ValueError("precision, level and filtration depth must be positive")
        if self.witt_length < self.M:
            raise ValueError(f"Witt length {self.witt_length} < precision {self.M}")
        if self.level < self.fil_depth - 1:
            raise ValueError(f"level {self.level} < filtration depth - 1 = {self.fil_depth - 1}")

    @cached_property
    def ring(self) -> TowerRing:
        # the cyclotomic variable goes one level higher so that [eps^(1/p)]
        # is available at working level m
        p, m = self.p, self.level
        gens = []
        if self.tower in ("cyclotomic", "compositum"):
            gens.append(Generator("x", "cyclotomic", m + 1, cyclotomic_poly(p, m + 1)))
        if self.tower in ("kummer", "compositum"):
            gens.append(Generator("y", "kummer", m, kummer_poly(p, m)))
        return TowerRing(p, self.M, gens)

    @property
    def variables(self) -> tuple[str, ...]:
        return {"cyclotomic": ("Y",), "kummer": ("Z",), "compositum": ("Y", "Z")}[self.tower]


# ---------------------------------------------------------------------------
# polynomial expansions in one Teichmuller variable


@dataclass(frozen=True)
class Expansion:
    var: str | None  # "Y" = [eps^(1/p)], "Z" = [ptilde], None for constants
    coeffs: tuple[Fraction, ...]

    def __post_init__(self):
        c = list(self.coeffs)
        while c and c[-1] == 0:
            c.pop()
        object.__setattr__(self, "coeffs", tuple(Fraction(x) for x in c))

    @classmethod
    def constant(cls, c) -> "Expansion":
        return cls(None, (Fraction(c),))

    def _var(self, other: "Expansion") -> str | None | bool:
        if self.var is None or other.var is None or self.var == other.var:
            return self.var or other.var
        return False

    def __add__(self, other: "Expansion") -> "Expansion | None":
        v = self._var(other)
        if v is False:
            return None
        n = max(len(self.coeffs), len(other.coeffs))
        a = self.coeffs + (Fraction(0),) * (n - len(self.coeffs))
        b = other.coeffs + (Fraction(0),) * (n - len(other.coeffs))
        return Expansion(v, tuple(x + y for x, y in zip(a, b)))

    def __mul__(self, other: "Expansion") -> "Expansion | None":
        v = self._var(other)
        if v is False:
            return None
        if not self.coeffs or not other.coeffs:
            return Expansion(v, ())
        out = [Fraction(0)] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            for j, b in enumerate(other.coeffs):
                out[i + j] += a * b
        return Expansion(v, tuple(out))

    def scale(self, c) -> "Expansion":
        return Expansion(self.var, tuple(x * c for x in self.coeffs))

    def substitute_power(self, k: int) -> "Expansion":
        """T -> T^k."""
        out = [Fraction(0)] * (k * (len(self.coeffs) - 1) + 1) if self.coeffs else []
        for i, a in enumerate(self.coeffs):
            out[i * k] = a
        return Expansion(self.var, tuple(out))

    def divmod(self, g: "Expansion") -> tuple["Expansion", "Expansion"]:
        """Division by a monic polynomial g."""
        r = list(self.coeffs)
        d = len(g.coeffs) - 1
        q = [Fraction(0)] * max(len(r) - d, 0)
        for i in range(len(r) - 1, d - 1, -1):
            c = r[i]
            if c:
                q[i - d] = c
                for j, b in enumerate(g.coeffs):
                    r[i - d + j] -= c * b
        return Expansion(self.var, tuple(q)), Expansion(self.var, tuple(r[:d]))

    def is_zero(self) -> bool:
        return not self.coeffs

    def denominator_exponent(self, p: int) -> int:
        return max([0] + [-vp_fraction(c, p) for c in self.coeffs if c])


def kernel_polynomial(p: int, var: str) -> Expansion:
    if var == "Y":
        return Expansion("Y", (Fraction(1),) * p)
    return Expansion("Z", (Fraction(-p), Fraction(1)))


# ---------------------------------------------------------------------------
# elements


@dataclass(frozen=True)
class APlusElement:
    """p^(-denom) * (Witt vector over the top tower ring, at working level `level`)."""

    profile: PrecisionProfile
    witt: WittVector
    level: int
    denom: int = 0
    # genuine level projection of an element of the limit (theta exact mod p^M)
    exact: bool = False
    # Witt coordinates at index >= cap carry no information
    cap: int | None = None
    expansion: Expansion | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.cap is None:
            object.__setattr__(self, "cap", self.witt.length)
        if self.denom < 0:
            raise ValueError("denominator exponent must be >= 0")

    @property
    def p(self) -> int:
        return self.profile.p

    @property
    def ring(self) -> TowerRing:
        return self.profile.ring

    @property
    def coordinates(self) -> tuple[TiltElement, ...]:
        """Witt coordinates as tilt elements (level `level`)."""
        p, ell = self.p, self.level
        out = []
        for c in self.witt.coords:
            comps = tuple(c ** (p ** (ell - n)) for n in range(ell + 1))
            out.append(TiltElement(self.ring, comps, False))
        return tuple(out)

    def theta_precision(self) -> int:
        """Absolute p-adic precision of theta(self)."""
        P = self.profile.M
        digits = P if self.exact else min(P, self.level + 1)
        return min(digits, self.cap, self.witt.length) - self.denom

    # arithmetic -------------------------------------------------------------

    def _coerce(self, other) -> "APlusElement | None":
        if isinstance(other, (int, Fraction)):
            return from_rational(other, self.profile)
        if isinstance(other, APlusElement):
            if other.profile != self.profile:
                raise ValueError("elements built with different precision profiles")
            return other
        return None

    def _aligned(self, other: "APlusElement"):
        ell = min(self.level, other.level)
        d = max(self.denom, other.denom)
        return lower_level(self, ell).scale_denominator(d), lower_level(other, ell).scale_denominator(d)

    def scale_denominator(self, d: int) -> "APlusElement":
        """Same element written with denominator p^d (d >= denom)."""
        if d == self.denom:
            return self
        k = d - self.denom
        w = self.witt * self.p**k
        exp = self.expansion
        return replace(self, witt=w, denom=d, cap=min(self.cap + k, self.witt.length), expansion=exp)

    def _combine(self, other, op: str):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        if op == "mul":
            a, b = lower_level(self, min(self.level, o.level)), lower_level(o, min(self.level, o.level))
            w = witt_arith(a.witt, b.witt, "mul")
            denom = a.denom + b.denom
            cap = min(a.cap, b.cap)
            exp = a.expansion * b.expansion if a.expansion and b.expansion else None
        else:
            a, b = self._aligned(o)
            w = witt_arith(a.witt, b.witt, "add")
            denom = a.denom
            cap = min(a.cap, b.cap)
            exp = a.expansion + b.expansion if a.expansion and b.expansion else None
        return APlusElement(self.profile, w, a.level, denom, a.exact and b.exact, cap, exp)

    def __add__(self, other):
        return self._combine(other, "add")

    __radd__ = __add__

    def __neg__(self):
        exp = self.expansion.scale(-1) if self.expansion else None
        return replace(self, witt=-self.witt, expansion=exp)

    def __sub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self + (-o)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        return self._combine(other, "mul")

    __rmul__ = __mul__

    def __pow__(self, k: int):
        result = from_rational(1, self.profile)
        for _ in range(k):
            result = result * self
        return result

    def agrees_with(self, other: "APlusElement") -> bool:
        """Equality of the stored Witt data at common level and denominator."""
        a, b = self._aligned(other)
        return a.witt == b.witt

    def __repr__(self):
        return (f"APlusElement(level={self.level}, denom={self.denom}, exact={self.exact}, "
                f"cap={self.cap}, expansion={'yes' if self.expansion else 'no'})")


def lower_level(x: APlusElement, ell: int) -> APlusElement:
    """View x at working level ell <= x.level (coordinatewise p-power lifts)."""
    if ell == x.level:
        return x
    if ell > x.level:
        raise PrecisionError(f"cannot raise level {x.level} to {ell}")
    if x.expansion is not None:
        return evaluate_expansion(x.expansion, x.profile, ell)
    k = x.p ** (x.level - ell)
    w = WittVector(x.p, tuple(c**k for c in x.witt.coords), x.witt.ring)
    return APlusElement(x.profile, w, ell, x.denom, False, x.cap, None)


# ---------------------------------------------------------------------------
# constructors


def _zp_representative(c: Fraction, p: int, K: int) -> int:
    if c.denominator % p == 0:
        raise ValueError(f"{c} is not p-integral")
    return (c.numerator * pow(c.denominator, -1, p**K)) % p**K


def from_rational(c, profile: PrecisionProfile) -> APlusElement:
    return evaluate_expansion(Expansion.constant(c), profile)


def teichmuller_lift(x: TiltElement, profile: PrecisionProfile, level: int | None = None) -> APlusElement:
    ell = profile.level if level is None else level
    if x.level < ell:
        raise PrecisionError(f"tilt element has level {x.level} < {ell}")
    if not x.ring.same_structure(profile.ring):
        raise ValueError("tilt element lives in a different tower")
    c = x.components[ell].lift(profile.M) if x.ring.M != profile.M else x.components[ell]
    w = teichmuller(c, profile.witt_length, profile.p, profile.ring)
    return APlusElement(profile, w, ell, 0, x.exact)


def variable_tilt(profile: PrecisionProfile, var: str) -> TiltElement:
    """eps^(1/p) for "Y", ptilde for "Z", as tilt elements of level >= m."""
    ring = profile.ring
    if var == "Y":
        if "cyclotomic" not in ring.kinds:
            raise ValueError("Y = [eps^(1/p)] needs a cyclotomic tower")
        return tilt_frobenius(make_epsilon(ring), "inverse")
    if var == "Z":
        if "kummer" not in ring.kinds:
            raise ValueError("Z = [ptilde] needs a Kummer tower")
        return make_ptilde(ring)
    raise ValueError(f"unknown variable {var}")


def evaluate_expansion(e: Expansion, profile: PrecisionProfile, level: int | None = None) -> APlusElement:
    """Build sum c_j T^j from its polynomial expansion (exact provenance)."""
    p = profile.p
    ell = profile.level if level is None else level
    ring = profile.ring
    N = profile.witt_length
    d = e.denominator_exponent(p)
    K = profile.M + N + d
    total = witt_zero(p, N, ring)
    top = variable_tilt(profile, e.var).components[ell] if e.var else ring.one()
    power = ring.one()
    for j, c in enumerate(e.coeffs):
        if j:
            power = power * top
        if not c:
            continue
        n = _zp_representative(c * Fraction(p) ** d, p, K)
        term = witt_from_integer(p, n, N, ring)
        if j:
            term = witt_arith(term, teichmuller(power, N, p, ring), "mul")
        total = witt_arith(total, term, "add")
    return APlusElement(profile, total, ell, d, True, N, e)


def variable(profile: PrecisionProfile, var: str) -> APlusElement:
    return evaluate_expansion(Expansion(var, (Fraction(0), Fraction(1))), profile)


def epsilon_lift(profile: PrecisionProfile) -> APlusElement:
    """[eps] = Y^p."""
    return evaluate_expansion(Expansion("Y", (Fraction(0),) * profile.p + (Fraction(1),)), profile)


def ptilde_lift(profile: PrecisionProfile) -> APlusElement:
    return variable(profile, "Z")


def random_convertible(profile: PrecisionProfile, rng, factors: int = 2, degree: int = 3,
                       bound: int = 9) -> tuple[APlusElement, tuple[WittVector, ...]]:
    """A random product of integer polynomials in the Teichmuller variable, built twice.

    The first value is the element at the working level m.  The second is the
    levelwise sequence (x^(0), ..., x^(m)) over the tower ring, assembled from
    the Teichmuller lifts of each tilt component separately; it satisfies
    F(x^(n+1)) = x^(n).
    """
    p, N, m, ring = profile.p, profile.witt_length, profile.level, profile.ring
    var = profile.variables[0]
    comps = variable_tilt(profile, var).components
    lifts = [teichmuller(comps[n], N, p, ring) for n in range(m + 1)]
    x = from_rational(1, profile)
    seq = [witt_one(p, N, ring) for _ in range(m + 1)]
    for _ in range(factors):
        coeffs = [rng.randint(-bound, bound) for _ in range(degree + 1)]
        x = x * evaluate_expansion(Expansion(var, tuple(Fraction(c) for c in coeffs)), profile)
        for n in range(m + 1):
            poly = witt_zero(p, N, ring)
            power = witt_one(p, N, ring)
            for j, c in enumerate(coeffs):
                if j:
                    power = witt_arith(power, lifts[n], "mul")
                if c:
                    poly = witt_arith(poly, witt_arith(witt_from_integer(p, c, N, ring), power, "mul"), "add")
            seq[n] = witt_arith(seq[n], poly, "mul")
    return x, tuple(seq)


# ---------------------------------------------------------------------------
# theta


@dataclass(frozen=True)
class ThetaValue:
    """theta(x) = numerator / p^denom, known mod p^precision."""

    numerator: TowerRingElement
    denom: int
    precision: int

    @property
    def loss(self) -> int:
        return self.numerator.ring.M - self.precision

    def _diff(self, other) -> tuple[TowerRingElement, int]:
        if isinstance(other, ThetaValue):
            d = max(self.denom, other.denom)
            return self.numerator * self.numerator.ring.p ** (d - self.denom) - \
                other.numerator * other.numerator.ring.p ** (d - other.denom), d
        ring = self.numerator.ring
        if isinstance(other, TowerRingElement):
            return self.numerator - other * ring.p**self.denom, self.denom
        return self.numerator - ring.scalar(other) * ring.p**self.denom, self.denom

    def equals(self, other, precision: int | None = None) -> bool:
        prec = self.precision if precision is None else precision
        if isinstance(other, ThetaValue):
            prec = min(prec, other.precision)
        if prec <= 0:
            raise PrecisionError("theta value carries no digits", "precision-exhausted")
        diff, d = self._diff(other)
        return diff.agreement() >= prec + d

    def is_zero(self) -> bool:
        return self.equals(0)

    def valuation(self) -> Fraction | None:
        v = self.numerator.valuation()
        return None if v is None else v - self.denom


def theta_map(x: APlusElement) -> ThetaValue:
    """theta(x) = sum_i p^i theta_bar(F^(-i) x_i), read off the top lifts."""
    p, ell = x.p, x.level
    acc = x.ring.zero()
    for i in range(min(ell, x.witt.length - 1) + 1):
        acc = acc + x.witt.coords[i] ** (p ** (ell - i)) * p**i
    prec = x.theta_precision()
    if prec <= 0:
        raise PrecisionError(f"theta has no reliable digits (level {ell}, denominator {x.denom})")
    return ThetaValue(acc, x.denom, prec)


# ---------------------------------------------------------------------------
# kernel generators and division


def kernel_generator(profile: PrecisionProfile, var: str | None = None) -> APlusElement:
    """omega = 1 + [eps^(1/p)] + ... + [eps^((p-1)/p)], or [ptilde] - p on the Kummer tower."""
    var = var or profile.variables[0]
    return evaluate_expansion(kernel_polynomial(profile.p, var), profile)


class NotInKernelError(ArithmeticError):
    pass


def divide_by_kernel_generator(x: APlusElement, var: str | None = None, method: str = "auto") -> APlusElement:
    """q with q * g = x, g the kernel generator for var.

    method "expansion" divides the polynomial exactly; "witt" solves for the
    quotient coordinate by coordinate in the tilt.  "auto" takes the first
    when x carries a compatible expansion.
    """
    profile = x.profile
    var = var or profile.variables[0]
    if method == "auto":
        method = "expansion" if x.expansion is not None and x.expansion.var in (var, None) else "witt"
    if method == "expansion":
        if x.expansion is None:
            raise ValueError("element carries no polynomial expansion")
        q, r = x.expansion.divmod(kernel_polynomial(profile.p, var))
        if not r.is_zero():
            raise NotInKernelError("theta(x) != 0: nonzero remainder")
        q = Expansion(var, q.coeffs)
        return evaluate_expansion(q, profile, x.level)
    if method == "witt":
        return _witt_divide(x, kernel_generator(profile, var))
    raise ValueError(f"unknown method {method}")


def _mod_p(c: TowerRingElement) -> TowerRingElement:
    return c.reduce(1)


def _witt_divide(x: APlusElement, g: APlusElement) -> APlusElement:
    """Coordinate k of q solves q_k g_0^(p^k) = x_k - R_k(q_<k, g) in the tilt.

    Coordinate k is read at component ell - k and the division there is
    exact up to a term killed by the p-th power, so q_k is known at level
    ell - 1 - k.  The quotient keeps pi = floor((ell + 1) / 2) coordinates
    at the common level ell - pi.
    """
    profile = x.profile
    ring = profile.ring
    if len(ring.generators) != 1:
        raise PrecisionError("coordinate division needs a single tower", "valuation-indeterminate")
    p = profile.p
    ell = x.level
    th = theta_map(x)
    if not th.is_zero():
        raise NotInKernelError("theta(x) != 0 at available precision")
    pi = min(x.cap, (ell + 1) // 2, x.witt.length)
    if pi < 1:
        raise PrecisionError(f"level {ell} too low for division")
    g = lower_level(g, ell) if g.level > ell else g
    one = ring.with_precision(1)

    def comp(c: TowerRingElement, n: int, top: int) -> TowerRingElement:
        return _mod_p(c ** (p ** (top - n)))

    qtop: list[TowerRingElement] = []  # q_k at level ell - 1 - k, mod p
    for k in range(pi):
        n = ell - k
        qs = [comp(qtop[j], n, ell - 1 - j) for j in range(k)] + [one.zero()]
        gs = [comp(c, n, ell) for c in g.witt.coords[:k + 1]]
        r = witt_arith(WittVector(p, tuple(qs), one), WittVector(p, tuple(gs), one), "mul").coords[k]
        dk = comp(x.witt.coords[k], n, ell) - r
        divisor = gs[0] ** (p**k)
        res = _series_divide(_flat(dk), _flat(divisor), p)
        if res is None:
            raise NotInKernelError(f"coordinate {k} not divisible")
        quotient = one.element(res[0].reshape(ring.shape))
        qtop.append(quotient**p)
    ell_q = ell - pi
    coords = [qtop[k] ** (p ** (ell - 1 - k - ell_q)) for k in range(pi)]
    coords = [c.lift(profile.M) for c in coords] + [ring.zero()] * (x.witt.length - pi)
    w = WittVector(p, tuple(coords), ring)
    return APlusElement(profile, w, ell_q, x.denom, False, pi, None)


def _flat(c: TowerRingElement) -> np.ndarray:
    return np.asarray(c.coeffs, dtype=np.int64).ravel() % c.ring.p


@dataclass(frozen=True)
class FilReport:
    element: APlusElement
    fil_order: int
    depth: int
    witnesses: tuple[ThetaValue, ...]  # theta of x, x/g, x/g^2, ...
    method: str


def fil_order(x: APlusElement, N: int | None = None, var: str | None = None, method: str = "auto") -> FilReport:
    """Largest k <= N with theta(x / g^j) = 0 for j < k, g the kernel generator."""
    N = x.profile.fil_depth if N is None else N
    if N > x.profile.fil_depth:
        raise ValueError(f"depth {N} exceeds the profile's filtration depth {x.profile.fil_depth}")
    witnesses: list[ThetaValue] = []
    cur = x
    used = method
    for k in range(N):
        try:
            th = theta_map(cur)
        except PrecisionError as exc:
            raise PrecisionError(f"{exc} (after {k} divisions)", exc.kind) from exc
        witnesses.append(th)
        if not th.is_zero():
            return FilReport(x, k, N, tuple(witnesses), used)
        if k == N - 1:
            break
        m = method
        if method == "auto":
            m = "expansion" if cur.expansion is not None else "witt"
        used = m if used in ("auto", m) else "mixed"
        try:
            cur = divide_by_kernel_generator(cur, var, m)
        except PrecisionError as exc:
            raise PrecisionError(f"{exc} (after {k + 1} divisions)", exc.kind) from exc
    return FilReport(x, N, N, tuple(witnesses), used)


# ---------------------------------------------------------------------------
# periods


def _log_one_minus(u: Expansion, N: int) -> Expansion:
    """-sum_{1 <= i < N} u^i / i."""
    total = Expansion(u.var, ())
    power = Expansion.constant(1)
    for i in range(1, N):
        power = power * u
        total = total + power.scale(Fraction(-1, i))
    return total


def _check_denominators(N: int, profile: PrecisionProfile, extra=lambda i: 0) -> None:
    d = max(vp(i, profile.p) + extra(i) for i in range(1, N))
    if d >= profile.M:
        raise PrecisionError(f"denominators p^{d} exhaust precision {profile.M}")


def t_expansion(p: int, N: int, frobenius: int = 0) -> Expansion:
    """Truncated log[eps] in Y, with [eps] replaced by [eps]^(p^frobenius)."""
    x = Expansion("Y", (Fraction(0),) * p ** (1 + frobenius) + (Fraction(1),))
    u = Expansion.constant(1) + x.scale(-1)
    return _log_one_minus(u, N)


def t_element(profile: PrecisionProfile, N: int | None = None) -> APlusElement:
    """log[eps] modulo the N-th filtration step: -sum_{i<N} (1 - [eps])^i / i."""
    N = profile.fil_depth if N is None else N
    _check_denominators(N, profile)
    return evaluate_expansion(t_expansion(profile.p, N), profile)


def frobenius(x: APlusElement) -> APlusElement:
    """phi on W(tilt): [a] -> [a^p].  Polynomial elements are re-evaluated exactly."""
    if x.expansion is not None:
        return evaluate_expansion(x.expansion.substitute_power(x.p), x.profile, x.level)
    w = WittVector(x.p, tuple(c**x.p for c in x.witt.coords), x.witt.ring)
    return APlusElement(x.profile, w, x.level, x.denom, False, x.cap, None)


def log_ptilde(profile: PrecisionProfile, N: int | None = None, branch=0) -> APlusElement:
    """branch - sum_{i<N} (1 - [ptilde]/p)^i / i; branch is the chosen value of log(p)."""
    N = profile.fil_depth if N is None else N
    _check_denominators(N, profile, extra=lambda i: i)
    u = Expansion("Z", (Fraction(1), Fraction(-1, profile.p)))
    e = _log_one_minus(u, N) + Expansion.constant(Fraction(branch))
    return evaluate_expansion(e, profile)
