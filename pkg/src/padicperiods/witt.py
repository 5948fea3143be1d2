"""Truncated p-typical and big Witt vectors.

Arithmetic goes through integer structure polynomials that are built once per
(prime, length) by unwinding the ghost equations and cached on disk as JSON.
For tower rings, which are reductions of p-torsion-free rings, sums and
products can also be taken through ghost components after lifting to extra
precision; both routes are kept so they can be checked against each other.
"""

from __future__ import annotations

import json
import os
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Sequence

from .padic_core import PrecisionError, TowerRing, TowerRingElement, check_prime

CACHE_VERSION = 1
N_MAX = 6


# ---------------------------------------------------------------------------
# coefficient rings


class IntegerRing:
    """Z, exact and p-torsion-free."""

    torsion_free = True

    def zero(self):
        return 0

    def one(self):
        return 1

    def scalar(self, n: int):
        return n

    def __repr__(self):
        return "ZZ"


class RationalRing:
    """Q as Fractions; used for big Witt vectors over Z_(p)."""

    torsion_free = True

    def zero(self):
        return Fraction(0)

    def one(self):
        return Fraction(1)

    def scalar(self, n: int):
        return Fraction(n)

    def __repr__(self):
        return "QQ"


class ModRing:
    """Z/n with elements as reduced Python ints wrapped for mod arithmetic."""

    torsion_free = False

    def __init__(self, n: int):
        self.n = n

    def zero(self):
        return ModInt(0, self.n)

    def one(self):
        return ModInt(1, self.n)

    def scalar(self, k: int):
        return ModInt(k, self.n)

    def __eq__(self, other):
        return isinstance(other, ModRing) and other.n == self.n

    def __hash__(self):
        return hash(("mod", self.n))

    def __repr__(self):
        return f"Z/{self.n}"


@dataclass(frozen=True)
class ModInt:
    v: int
    n: int

    def __post_init__(self):
        object.__setattr__(self, "v", self.v % self.n)

    def _o(self, other):
        return other.v if isinstance(other, ModInt) else other

    def __add__(self, other):
        return ModInt(self.v + self._o(other), self.n)

    __radd__ = __add__

    def __sub__(self, other):
        return ModInt(self.v - self._o(other), self.n)

    def __rsub__(self, other):
        return ModInt(self._o(other) - self.v, self.n)

    def __mul__(self, other):
        return ModInt(self.v * self._o(other), self.n)

    __rmul__ = __mul__

    def __neg__(self):
        return ModInt(-self.v, self.n)

    def __pow__(self, k):
        return ModInt(pow(self.v, k, self.n), self.n)

    def __eq__(self, other):
        if isinstance(other, int):
            return (self.v - other) % self.n == 0
        return isinstance(other, ModInt) and other.n == self.n and other.v == self.v

    def __hash__(self):
        return hash((self.v, self.n))


def ring_of(x) -> Any:
    if isinstance(x, TowerRingElement):
        return x.ring
    if isinstance(x, ModInt):
        return ModRing(x.n)
    if isinstance(x, Fraction):
        return RationalRing()
    if isinstance(x, int):
        return IntegerRing()
    ring = getattr(x, "ring", None)
    if ring is None:
        raise TypeError(f"no coefficient ring for {type(x).__name__}")
    return ring


# ---------------------------------------------------------------------------
# integer polynomials in 2n (or n) variables, stored as {exponent tuple: coeff};
# while building, exponent vectors are packed into one int with a fixed bit width
# per variable so that monomial products are single additions


Poly = dict


def _pmul(a: Poly, b: Poly) -> Poly:
    out: dict = defaultdict(int)
    for ea, ca in a.items():
        for eb, cb in b.items():
            out[ea + eb] += ca * cb
    return {e: c for e, c in out.items() if c}


def _ppow(a: Poly, k: int) -> Poly:
    result: Poly = {0: 1}
    base = a
    while k:
        if k & 1:
            result = _pmul(result, base)
        k >>= 1
        if k:
            base = _pmul(base, base)
    return result


def _padd(a: Poly, b: Poly, scale: int = 1) -> Poly:
    out = dict(a)
    for e, c in b.items():
        v = out.get(e, 0) + scale * c
        if v:
            out[e] = v
        else:
            out.pop(e, None)
    return out


def _var(i: int, width: int) -> Poly:
    return {1 << (width * i): 1}


def _unpack(poly: Poly, nv: int, width: int) -> Poly:
    mask = (1 << width) - 1
    return {tuple((e >> (width * i)) & mask for i in range(nv)): c for e, c in poly.items()}


def _ghost_poly(xs: list[Poly], k: int, p: int) -> Poly:
    g: Poly = {}
    for j in range(k + 1):
        g = _padd(g, _ppow(xs[j], p ** (k - j)), p**j)
    return g


def _unghost(ghosts: list[Poly], p: int) -> list[Poly]:
    """Solve sum_j p^j S_j^(p^(k-j)) = ghosts[k] for integer polynomials S_k."""
    out: list[Poly] = []
    for k, g in enumerate(ghosts):
        for j in range(k):
            g = _padd(g, _ppow(out[j], p ** (k - j)), -(p**j))
        q = p**k
        bad = [c for c in g.values() if c % q]
        if bad:
            raise ArithmeticError(f"structure polynomial {k} is not integral")
        out.append({e: c // q for e, c in g.items()})
    return out


def build_structure_polynomials(p: int, n: int) -> dict[str, list[Poly]]:
    """Sum, product and Frobenius polynomials for length n.

    Sum/product live in variables (x_0..x_{n-1}, y_0..y_{n-1}); Frobenius of a
    length n+1 vector gives n coordinates in variables x_0..x_n.
    """
    # no exponent exceeds p^n, so each packed field holds it without carries
    width = (p**n).bit_length() + 1
    nv = 2 * n
    xs = [_var(i, width) for i in range(n)]
    ys = [_var(n + i, width) for i in range(n)]
    add = _unghost([_padd(_ghost_poly(xs, k, p), _ghost_poly(ys, k, p)) for k in range(n)], p)
    mul = _unghost([_pmul(_ghost_poly(xs, k, p), _ghost_poly(ys, k, p)) for k in range(n)], p)
    fv = n + 1
    fx = [_var(i, width) for i in range(fv)]
    frob = _unghost([_ghost_poly(fx, k + 1, p) for k in range(n)], p)
    return {"add": [_unpack(q, nv, width) for q in add],
            "mul": [_unpack(q, nv, width) for q in mul],
            "frob": [_unpack(q, fv, width) for q in frob]}


def cache_dir() -> Path:
    base = os.environ.get("PADICPERIODS_CACHE")
    if base:
        return Path(base)
    return Path(os.environ.get("XDG_CACHE_HOME", Path.home() / ".cache")) / "padicperiods"


class StructurePolynomialCache:
    """Structure polynomials for one prime up to a length, with a JSON file cache."""

    def __init__(self, p: int, length: int, polys: dict[str, list[Poly]]):
        self.p = p
        self.length = length
        self.polys = polys
        self._compiled: dict[tuple[str, int], Any] = {}

    @classmethod
    def get(cls, p: int, length: int, directory: Path | None = None) -> "StructurePolynomialCache":
        key = (p, length)
        if key in _MEMORY:
            return _MEMORY[key]
        for (q, n), cached in _MEMORY.items():
            if q == p and n >= length:
                return cached
        if length > N_MAX:
            raise ValueError(f"Witt length {length} exceeds n_max = {N_MAX}")
        directory = directory or cache_dir()
        path = directory / f"witt_p{p}_n{length}.json"
        obj = None
        if path.exists():
            try:
                obj = cls.load(path, p)
            except (ValueError, KeyError, json.JSONDecodeError):
                obj = None
        if obj is None:
            obj = cls(p, length, build_structure_polynomials(p, length))
            try:
                obj.save(path)
            except OSError:
                pass
        _MEMORY[key] = obj
        return obj

    def save(self, path: Path) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        payload = {
            "version": CACHE_VERSION,
            "prime": self.p,
            "length": self.length,
            "coordinates": {
                op: {str(k): [[list(e), c] for e, c in sorted(poly.items())] for k, poly in enumerate(polys)}
                for op, polys in self.polys.items()
            },
        }
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(payload))
        tmp.replace(path)

    @classmethod
    def load(cls, path: Path, p: int) -> "StructurePolynomialCache":
        payload = json.loads(Path(path).read_text())
        if payload.get("version") != CACHE_VERSION:
            raise ValueError(f"cache version {payload.get('version')} != {CACHE_VERSION}")
        if payload.get("prime") != p:
            raise ValueError(f"cache is for p = {payload.get('prime')}, wanted {p}")
        polys = {}
        for op, coords in payload["coordinates"].items():
            polys[op] = [{tuple(e): c for e, c in coords[str(k)]} for k in range(len(coords))]
        return cls(p, payload["length"], polys)

    def is_integral(self) -> bool:
        return all(isinstance(c, int) for polys in self.polys.values() for poly in polys for c in poly.values())

    def evaluator(self, op: str, k: int):
        key = (op, k)
        if key not in self._compiled:
            self._compiled[key] = _compile(self.polys[op][k])
        return self._compiled[key]


_MEMORY: dict[tuple[int, int], StructurePolynomialCache] = {}


@dataclass(frozen=True)
class _Compiled:
    fn: Any                              # fn(P, C) with P[(i, d)] = x_i^d and C[j] = one * coeffs[j]
    coeffs: tuple[int, ...]
    powers: tuple[tuple[int, int], ...]


def _compile(poly: Poly):
    """Nested Horner form of poly, generated as Python source and compiled once."""
    if not poly:
        return None
    nv = len(next(iter(poly)))
    used = [i for i in range(nv) if any(e[i] for e in poly)]
    coeffs: dict[int, int] = {}
    powers: set = set()

    def build(items, depth) -> str:
        if depth == len(used):
            c = sum(c for _, c in items)
            return f"C[{coeffs.setdefault(c, len(coeffs))}]"
        i = used[depth]
        groups: dict[int, list] = defaultdict(list)
        for e, c in items:
            groups[e[i]].append((e, c))
        terms = []
        for d, g in groups.items():
            sub = build(g, depth + 1)
            if d:
                powers.add((i, d))
                sub = f"P[{i},{d}]*{sub}"
            terms.append(sub)
        return "(" + "+".join(terms) + ")"

    src = build(list(poly.items()), 0)
    fn = eval(compile(f"lambda P, C: {src}", "<witt-structure-polynomial>", "eval"))
    return _Compiled(fn, tuple(coeffs), tuple(sorted(powers)))


def _evaluate(tree: _Compiled | None, values: Sequence, one, zero, powers: dict | None = None):
    if tree is None:
        return zero
    # power tables may be shared across the coordinates of one operation
    powers = {} if powers is None else powers
    for key in tree.powers:
        if key not in powers:
            i, d = key
            powers[key] = values[i] ** d
    return tree.fn(powers, [one * c for c in tree.coeffs])


# ---------------------------------------------------------------------------
# p-typical Witt vectors


@dataclass(frozen=True)
class WittVector:
    p: int
    coords: tuple
    ring: Any

    def __post_init__(self):
        check_prime(self.p)

    @property
    def length(self) -> int:
        return len(self.coords)

    @classmethod
    def of(cls, p: int, coords: Sequence, ring=None) -> "WittVector":
        coords = tuple(coords)
        if ring is None:
            ring = ring_of(coords[0])
        return cls(p, coords, ring)

    def __add__(self, other):
        return witt_arith(self, other, "add")

    def __sub__(self, other):
        return witt_arith(self, witt_neg(other), "add")

    def __mul__(self, other):
        if isinstance(other, int):
            return witt_arith(self, witt_from_integer(self.p, other, self.length, self.ring), "mul")
        return witt_arith(self, other, "mul")

    __rmul__ = __mul__

    def __neg__(self):
        return witt_neg(self)

    def __pow__(self, k: int):
        result = witt_one(self.p, self.length, self.ring)
        for _ in range(k):
            result = result * self
        return result

    def __eq__(self, other):
        if not isinstance(other, WittVector):
            return NotImplemented
        return self.p == other.p and self.length == other.length and all(
            a == b for a, b in zip(self.coords, other.coords))

    def __hash__(self):
        return hash((self.p, self.length))

    def truncate(self, n: int) -> "WittVector":
        return WittVector(self.p, self.coords[:n], self.ring)


def witt_zero(p: int, n: int, ring) -> WittVector:
    return WittVector(p, tuple(ring.zero() for _ in range(n)), ring)


def witt_one(p: int, n: int, ring) -> WittVector:
    return teichmuller(ring.one(), n, p, ring)


def teichmuller(a, n: int, p: int, ring=None) -> WittVector:
    ring = ring if ring is not None else ring_of(a)
    return WittVector(p, (a,) + tuple(ring.zero() for _ in range(n - 1)), ring)


def ghost_map(w: WittVector) -> list:
    p = w.p
    out = []
    # powers[j] runs through coords[j]^(p^(k-j)) as k grows
    powers: list = []
    for k in range(w.length):
        powers = [c**p for c in powers] + [w.coords[k]]
        g = w.ring.zero()
        for j, c in enumerate(powers):
            g = g + c * (p**j)
        out.append(g)
    return out


def _recover(p: int, ghosts: Sequence, div) -> list:
    """Coordinates from ghost components; div(acc, k) divides acc by p^k."""
    xs: list = []
    powers: list = []
    for k, g in enumerate(ghosts):
        powers = [c**p for c in powers]
        acc = g
        for j, c in enumerate(powers):
            acc = acc - c * (p**j)
        x = div(acc, k)
        xs.append(x)
        powers.append(x)
    return xs


def unghost(p: int, ghosts: Sequence, ring) -> WittVector:
    """Inverse of the ghost map over Z or Q (exact division)."""
    def div(acc, k):
        if isinstance(acc, int):
            if acc % p**k:
                raise ArithmeticError("ghost vector is not in the image of integral Witt vectors")
            return acc // p**k
        return acc / p**k

    return WittVector(p, tuple(_recover(p, ghosts, div)), ring)


def witt_neg(w: WittVector) -> WittVector:
    # for odd p the additive inverse is coordinatewise
    return WittVector(w.p, tuple(-c for c in w.coords), w.ring)


def witt_from_integer(p: int, n: int, length: int, ring) -> WittVector:
    z = unghost(p, [n] * length, IntegerRing())
    return WittVector(p, tuple(ring.scalar(c) for c in z.coords), ring)


def _check_pair(u: WittVector, v: WittVector):
    if u.length != v.length:
        raise ValueError(f"Witt length mismatch: {u.length} vs {v.length}")
    if u.p != v.p:
        raise ValueError("Witt vectors for different primes")


def witt_arith(u: WittVector, v: WittVector, op: str, method: str = "auto") -> WittVector:
    """Sum or product.  method: "poly" (structure polynomials), "ghost", or "auto".

    "auto" uses the ghost route for tower rings and exact Z/Q rings and the
    structure polynomials otherwise.
    """
    _check_pair(u, v)
    if op not in ("add", "mul"):
        raise ValueError(f"unknown Witt operation {op}")
    if method == "auto":
        method = "ghost" if isinstance(u.ring, TowerRing) else "poly"
    if method == "ghost":
        return _ghost_route(u, v, op)
    cache = StructurePolynomialCache.get(u.p, u.length)
    # variables are laid out for the cached length
    pad = cache.length - u.length
    values = (list(u.coords) + [u.ring.zero()] * pad + list(v.coords) + [u.ring.zero()] * pad)
    powers: dict = {}
    coords = tuple(_evaluate(cache.evaluator(op, k), values, u.ring.one(), u.ring.zero(), powers)
                   for k in range(u.length))
    return WittVector(u.p, coords, u.ring)


def _lifted(ring: TowerRing, extra: int) -> TowerRing:
    return ring.with_precision(ring.M + extra)


def _ghost_route(u: WittVector, v: WittVector, op: str) -> WittVector:
    ring = u.ring
    p = u.p
    n = u.length
    if isinstance(ring, TowerRing):
        big = _lifted(ring, n)
        ul = WittVector(p, tuple(c.lift(big.M) for c in u.coords), big)
        vl = WittVector(p, tuple(c.lift(big.M) for c in v.coords), big)
        gu, gv = ghost_map(ul), ghost_map(vl)
        gs = [a + b if op == "add" else a * b for a, b in zip(gu, gv)]
        # acc is divisible by p^k in the torsion-free lift
        xs = _recover(p, gs, lambda acc, k: acc.div_p(k).lift(big.M) if k else acc)
        return WittVector(p, tuple(x.reduce(ring.M) for x in xs), ring)
    if getattr(ring, "torsion_free", False):
        gu, gv = ghost_map(u), ghost_map(v)
        gs = [a + b if op == "add" else a * b for a, b in zip(gu, gv)]
        return unghost(p, gs, ring)
    raise TypeError(f"ghost route needs a p-torsion-free ring, got {ring}")


def witt_frobenius(w: WittVector, method: str = "auto") -> WittVector:
    """F: W_n -> W_{n-1}, characterized by ghost(F w)_i = ghost(w)_{i+1}."""
    if w.length < 2:
        raise ValueError("Frobenius needs length >= 2")
    p, n = w.p, w.length - 1
    ring = w.ring
    if method == "auto":
        if isinstance(ring, TowerRing) or getattr(ring, "torsion_free", False):
            method = "ghost"
        elif isinstance(ring, ModRing) and ring.n == p:
            method = "fp"
        else:
            method = "poly"
    if method == "fp":
        return WittVector(p, tuple(c**p for c in w.coords[:n]), ring)
    if method == "ghost":
        if isinstance(ring, TowerRing):
            big = _lifted(ring, n + 1)
            wl = WittVector(p, tuple(c.lift(big.M) for c in w.coords), big)
            g = ghost_map(wl)[1:]
            xs = _recover(p, g, lambda acc, k: acc.div_p(k).lift(big.M) if k else acc)
            return WittVector(p, tuple(x.reduce(ring.M) for x in xs), ring)
        return unghost(p, ghost_map(w)[1:], ring)
    cache = StructurePolynomialCache.get(p, n)
    values = list(w.coords) + [ring.zero()] * (cache.length - n)
    powers: dict = {}
    coords = tuple(_evaluate(cache.evaluator("frob", k), values, ring.one(), ring.zero(), powers)
                   for k in range(n))
    return WittVector(p, coords, ring)


def verschiebung(w: WittVector) -> WittVector:
    return WittVector(w.p, (w.ring.zero(),) + tuple(w.coords), w.ring)


def residue_projection(w: WittVector):
    return w.coords[0]


class CompatibilityError(ValueError):
    def __init__(self, index: int, detail: str = ""):
        super().__init__(f"sequence is not Frobenius-compatible at index {index}{': ' + detail if detail else ''}")
        self.index = index


def check_frobenius_compatible(seq: Sequence[WittVector]) -> None:
    for i in range(len(seq) - 1):
        fw = witt_frobenius(seq[i + 1])
        n = min(fw.length, seq[i].length)
        if fw.truncate(n) != seq[i].truncate(n):
            raise CompatibilityError(i)


def frobenius_limit_theta(seq: Sequence[WittVector]):
    """Residue of the first term of a Frobenius-compatible sequence over a tower ring.

    The sequence models an element of the inverse limit of W(O) under F; its
    image under the first projection followed by the residue map is theta.
    """
    if not seq:
        raise ValueError("empty sequence")
    check_frobenius_compatible(seq)
    return residue_projection(seq[0])


# ---------------------------------------------------------------------------
# big Witt vectors


def check_truncation_set(S) -> tuple[int, ...]:
    S = tuple(sorted(set(S)))
    if not S or S[0] < 1:
        raise ValueError("truncation set must be nonempty positive integers")
    members = set(S)
    for d in S:
        for e in range(1, d + 1):
            if d % e == 0 and e not in members:
                raise ValueError(f"truncation set is not divisor-closed: {e} | {d} missing")
    return S


@dataclass(frozen=True)
class BigWittVector:
    S: tuple[int, ...]
    coords: dict  # index in S -> element
    ring: Any

    def __post_init__(self):
        check_truncation_set(self.S)

    def __add__(self, other):
        return big_witt_arith(self, other, "add")

    def __mul__(self, other):
        return big_witt_arith(self, other, "mul")

    def __eq__(self, other):
        return isinstance(other, BigWittVector) and self.S == other.S and all(
            self.coords[d] == other.coords[d] for d in self.S)

    def __hash__(self):
        return hash(self.S)


def big_ghost(w: BigWittVector) -> dict:
    out = {}
    for d in w.S:
        out[d] = sum((e * w.coords[e] ** (d // e) for e in w.S if d % e == 0), w.ring.zero())
    return out


def big_unghost(S, ghosts: dict, ring) -> BigWittVector:
    S = check_truncation_set(S)
    xs: dict = {}
    for d in S:
        acc = ghosts[d] - sum((e * xs[e] ** (d // e) for e in S if d % e == 0 and e < d), ring.zero())
        xs[d] = acc / d if not isinstance(acc, int) else _exact_div(acc, d)
    return BigWittVector(S, xs, ring)


def _exact_div(a: int, d: int) -> int:
    if a % d:
        raise ArithmeticError("ghost vector is not integral")
    return a // d


def big_witt_arith(u: BigWittVector, v: BigWittVector, op: str) -> BigWittVector:
    if u.S != v.S:
        raise ValueError("truncation sets differ")
    gu, gv = big_ghost(u), big_ghost(v)
    gs = {d: gu[d] + gv[d] if op == "add" else gu[d] * gv[d] for d in u.S}
    return big_unghost(u.S, gs, u.ring)


def split_indices(S, p: int) -> dict[int, int]:
    """Prime-to-p c in S -> number of j with c p^j in S."""
    S = set(check_truncation_set(S))
    out = {}
    for c in sorted(S):
        if c % p:
            n = 0
            while c * p**n in S:
                n += 1
            out[c] = n
    return out


def _require_zp_algebra(ring, S, p):
    if isinstance(ring, IntegerRing):
        bad = [d for d in S if d % p and d > 1]
        if bad:
            raise TypeError(f"{bad[0]} is not invertible in {ring}; the split needs a Z_(p)-algebra")


def big_witt_split(w: BigWittVector, p: int) -> dict[int, WittVector]:
    """Split W_S(A) into p-typical factors indexed by prime-to-p c in S.

    The c-th factor has ghost components (w_c, w_{cp}, w_{cp^2}, ...).
    """
    check_prime(p)
    _require_zp_algebra(w.ring, w.S, p)
    g = big_ghost(w)
    out = {}
    for c, n in split_indices(w.S, p).items():
        out[c] = unghost(p, [g[c * p**j] for j in range(n)], w.ring)
    return out


def big_witt_reassemble(parts: dict[int, WittVector], S, p: int, ring) -> BigWittVector:
    S = check_truncation_set(S)
    _require_zp_algebra(ring, S, p)
    ghosts = {}
    for c, part in parts.items():
        for j, gj in enumerate(ghost_map(part)):
            ghosts[c * p**j] = gj
    missing = [d for d in S if d not in ghosts]
    if missing:
        raise ValueError(f"components do not cover {missing}")
    return big_unghost(S, ghosts, ring)


def random_big_witt(S, ring, rng, p: int, bound: int = 20) -> BigWittVector:
    """Random vector with p-integral rational coordinates (denominators prime to p)."""
    S = check_truncation_set(S)
    coords = {}
    for d in S:
        den = rng.choice([1, 1, 2, 4, 5, 7]) if p != 2 else 1
        while den % p == 0:
            den += 1
        coords[d] = Fraction(rng.randint(-bound, bound), den) if isinstance(ring, RationalRing) else rng.randint(-bound, bound)
    return BigWittVector(S, coords, ring)
