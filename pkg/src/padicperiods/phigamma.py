"""(phi, Gamma)-modules over the truncated Robba ring and their Herr cohomology.

A module of rank d is given by the matrices of phi and of a fixed generator
gamma of Gamma in a basis e_1..e_d, with phi(e_j) = sum_i Phi[i][j] e_i.
Cochains are vectors of RobbaElements: one vector in degrees 0 and 2, a pair
(gamma-part, phi-part) in degree 1.

Cohomology is computed on windows.  For a window length L the complex uses
span(pi^-K..pi^(L-1)) with K = L // 2 for degree 0 and the gamma-part of
degree 1; phi pushes poles deeper, so the phi-part and degree 2 use the
deeper span starting at pi^-Kp.  A finite window has spurious classes near
its top (formal inverses such as 1/t are invisible to truncation) and near
its bottom.  The reported dimensions therefore count

  h0  kernel vectors of d0 that survive projection to the window L // 2,
  h1  cocycles whose image in the window-L//2 complex is not a coboundary,
  h2  classes represented on the shallow span(pi^-K..).

Ranks are numerical ranks over Z/p^M with threshold tau.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np

from .padic_core import (PadicMatrix, PadicScalar, PrecisionError, check_prime, default_tau, kernel_basis,
                         mat_mul, numerical_rank, smith_normal_form, solve)
from .robba import (RobbaElement, WindowError, gamma_action, gamma_matrix, invert_unit, multiplication_matrix,
                    phi_action, phi_matrix, phi_neg_depth)

DEFAULT_PREC = 19
DEFAULT_SCHEDULE = (32, 64, 128)


def topological_generator(p: int) -> int:
    """Smallest primitive root mod p^2; it generates Z_p^* topologically for odd p."""
    check_prime(p)
    if p == 2:
        raise ValueError("p must be odd")
    order = p * (p - 1)
    mod = p * p
    for g in range(2, mod):
        if g % p and all(pow(g, order // q, mod) != 1 for q in _prime_factors(order)):
            return g
    raise AssertionError("no primitive root")


def _prime_factors(n: int) -> list[int]:
    out, q = [], 2
    while q * q <= n:
        if n % q == 0:
            out.append(q)
            while n % q == 0:
                n //= q
        q += 1
    if n > 1:
        out.append(n)
    return out


# ---------------------------------------------------------------------------
# characters and modules


@dataclass(frozen=True)
class Character:
    value_at_p: PadicScalar
    value_at_generator: PadicScalar

    def __post_init__(self):
        if self.value_at_p.is_zero():
            raise ValueError("a character takes a nonzero value at p")
        if self.value_at_generator.is_zero() or self.value_at_generator.valuation != 0:
            raise ValueError("the value at the generator must be a p-adic unit")

    @classmethod
    def of(cls, p: int, at_p, at_generator, M: int = DEFAULT_PREC) -> "Character":
        def scalar(x):
            return x if isinstance(x, PadicScalar) else PadicScalar.from_fraction(p, Fraction(x), M + 64)
        return cls(scalar(at_p), scalar(at_generator))

    @property
    def p(self) -> int:
        return self.value_at_p.p

    @property
    def slope(self) -> int:
        return self.value_at_p.valuation

    def __mul__(self, other: "Character") -> "Character":
        return Character(self.value_at_p * other.value_at_p, self.value_at_generator * other.value_at_generator)

    def inverse(self) -> "Character":
        return Character(1 / self.value_at_p, 1 / self.value_at_generator)


Matrix = tuple[tuple[RobbaElement, ...], ...]


@dataclass(frozen=True)
class PhiGammaModule:
    p: int
    generator: int  # chi(gamma) as an integer
    M: int
    Phi: Matrix
    Gamma: Matrix

    @property
    def rank(self) -> int:
        return len(self.Phi)


def _const(p: int, c, M: int) -> RobbaElement:
    return RobbaElement.constant(p, c, M)


def from_character(delta: Character, M: int = DEFAULT_PREC, generator: int | None = None) -> PhiGammaModule:
    p = delta.p
    g = topological_generator(p) if generator is None else generator
    return PhiGammaModule(p, g, M, ((_const(p, delta.value_at_p, M),),),
                          ((_const(p, delta.value_at_generator, M),),))


def trivial_character(p: int, M: int = DEFAULT_PREC) -> Character:
    return Character.of(p, 1, 1, M)


def omega_character(p: int, M: int = DEFAULT_PREC, generator: int | None = None) -> Character:
    """phi(e) = e, gamma(e) = chi(gamma) e."""
    g = topological_generator(p) if generator is None else generator
    return Character.of(p, 1, g, M)


def _identity(p: int, d: int, M: int) -> Matrix:
    return tuple(tuple(_const(p, int(i == j), M) for j in range(d)) for i in range(d))


def _mat_mul(A: Matrix, B: Matrix) -> Matrix:
    n, k, m = len(A), len(B), len(B[0])
    out = []
    for i in range(n):
        row = []
        for j in range(m):
            acc = A[i][0] * B[0][j]
            for t in range(1, k):
                acc = acc + A[i][t] * B[t][j]
            row.append(acc)
        out.append(tuple(row))
    return tuple(out)


def _transpose(A: Matrix) -> Matrix:
    return tuple(zip(*A))


def _mat_inverse(A: Matrix) -> Matrix:
    """Gauss-Jordan over the truncated ring, pivoting on invertible entries."""
    d = len(A)
    p, M = A[0][0].p, A[0][0].M
    rows = [list(r) + list(e) for r, e in zip(A, _identity(p, d, M))]
    for c in range(d):
        piv = next((r for r in range(c, d) if not rows[r][c].is_zero() and rows[r][c].low == 0), None)
        if piv is None:
            raise PrecisionError("matrix is not invertible over the truncated ring")
        rows[c], rows[piv] = rows[piv], rows[c]
        inv = invert_unit(rows[c][c])
        rows[c] = [x * inv for x in rows[c]]
        for r in range(d):
            if r != c and not (rows[r][c].is_zero() and rows[r][c].exact):
                f = rows[r][c]
                rows[r] = [x - f * y for x, y in zip(rows[r], rows[c])]
    return tuple(tuple(r[d:]) for r in rows)


def _map_entries(A: Matrix, fn) -> Matrix:
    return tuple(tuple(fn(x) for x in r) for r in A)


def dual(D: PhiGammaModule) -> PhiGammaModule:
    """Dual basis: the matrices become inverse-transposes."""
    return PhiGammaModule(D.p, D.generator, D.M, _transpose(_mat_inverse(D.Phi)),
                          _transpose(_mat_inverse(D.Gamma)))


def _kron(A: Matrix, B: Matrix) -> Matrix:
    n, m = len(A), len(B)
    return tuple(tuple(A[i // m][j // m] * B[i % m][j % m] for j in range(n * m)) for i in range(n * m))


def tensor(D1: PhiGammaModule, D2: PhiGammaModule) -> PhiGammaModule:
    """Basis e_i (x) f_j at index i * rank(D2) + j."""
    if (D1.p, D1.generator) != (D2.p, D2.generator):
        raise ValueError("modules over different contexts")
    return PhiGammaModule(D1.p, D1.generator, min(D1.M, D2.M), _kron(D1.Phi, D2.Phi), _kron(D1.Gamma, D2.Gamma))


def twist(D: PhiGammaModule, delta: Character) -> PhiGammaModule:
    return tensor(D, from_character(delta, D.M, D.generator))


def apply_phi(D: PhiGammaModule, v: Sequence[RobbaElement]) -> tuple[RobbaElement, ...]:
    w = [phi_action(x) for x in v]
    return tuple(_dot(D.Phi[i], w) for i in range(D.rank))


def apply_gamma(D: PhiGammaModule, v: Sequence[RobbaElement]) -> tuple[RobbaElement, ...]:
    w = [gamma_action(x, D.generator) for x in v]
    return tuple(_dot(D.Gamma[i], w) for i in range(D.rank))


def _dot(row: Sequence[RobbaElement], v: Sequence[RobbaElement]) -> RobbaElement:
    acc = row[0] * v[0]
    for a, b in zip(row[1:], v[1:]):
        acc = acc + a * b
    return acc


def commutation_holds(D: PhiGammaModule) -> bool:
    """Phi * phi(Gamma) == Gamma * gamma(Phi) on the common window."""
    left = _mat_mul(D.Phi, _map_entries(D.Gamma, phi_action))
    right = _mat_mul(D.Gamma, _map_entries(D.Phi, lambda x: gamma_action(x, D.generator)))
    return all(a.equals(b) for ra, rb in zip(left, right) for a, b in zip(ra, rb))


# ---------------------------------------------------------------------------
# the Herr complex on a window


def _shift(A: Matrix) -> int:
    """Smallest s >= 0 with p^s A integral."""
    v = min((c.valuation for r in A for x in r for c in x.coeffs if not c.is_zero()), default=0)
    return max(0, -v)


@dataclass
class HerrComplex:
    """d0: C0 -> C1, d1: C1 -> C2 as integer matrices mod p^M.

    C0 = X_K^d, C1 = X_K^d + X_Kp^d (gamma-part first), C2 = X_Kp^d, where
    X_k = span(pi^-k..pi^(L-1)) and vectors are stored component-major.  The
    phi blocks are scaled by p^phi_shift and the gamma blocks by
    p^gamma_shift so that non-integral matrices still give integer
    differentials; coordinates in degrees 1 and 2 carry the same scaling.
    """

    module: PhiGammaModule
    K: int
    L: int
    Kp: int
    d0: np.ndarray
    d1: np.ndarray
    phi_shift: int
    gamma_shift: int

    @property
    def p(self) -> int:
        return self.module.p

    @property
    def M(self) -> int:
        return self.module.M

    @property
    def dims(self) -> tuple[int, int, int]:
        d = self.module.rank
        return d * (self.K + self.L), d * (self.K + self.L) + d * (self.Kp + self.L), d * (self.Kp + self.L)

    def composite_residual(self) -> int:
        """Number of nonzero entries of d1 d0 mod p^M."""
        prod = mat_mul(self.d1, self.d0, self.p**self.M)
        return int(np.count_nonzero(prod))


def _block_operator(D: PhiGammaModule, A: Matrix, base: np.ndarray, k_out: int, L: int, shift: int) -> np.ndarray:
    """Matrix of v -> p^shift * A . s(v) with s given by `base` on each component."""
    p, M = D.p, D.M
    mod = p**M
    d = D.rank
    rows, cols = base.shape
    out = np.zeros((d * rows, d * cols), dtype=object)
    for i in range(d):
        for j in range(d):
            a = A[i][j]
            if a.is_zero() and a.exact:
                continue
            if a.exact and a.low == 0 and a.window == 1:
                c = (a.coeffs[0] * p**shift).residue_int(M)
                block = (c * base.astype(object)) % mod
            else:
                block = mat_mul(multiplication_matrix(a, k_out, L, M, shift), base, mod)
            out[i * rows:(i + 1) * rows, j * cols:(j + 1) * cols] = block
    return out


def _scaled_inclusion(d: int, k_in: int, k_out: int, L: int, scale: int) -> np.ndarray:
    n_in, n_out = k_in + L, k_out + L
    out = np.zeros((d * n_out, d * n_in), dtype=object)
    for c in range(d):
        for j in range(n_in):
            out[c * n_out + j + k_out - k_in, c * n_in + j] = scale
    return out


def herr_complex(D: PhiGammaModule, L: int, K: int | None = None) -> HerrComplex:
    p, M = D.p, D.M
    mod = p**M
    K = L // 2 if K is None else K
    Kp = phi_neg_depth(p, K, M)
    sp, sg = _shift(D.Phi), _shift(D.Gamma)
    d = D.rank
    phi_op = _block_operator(D, D.Phi, phi_matrix(p, M, K, L, Kp), Kp, L, sp)
    gam_K = _block_operator(D, D.Gamma, gamma_matrix(p, M, D.generator, K, L), K, L, sg)
    gam_Kp = _block_operator(D, D.Gamma, gamma_matrix(p, M, D.generator, Kp, L), Kp, L, sg)
    P = (phi_op - _scaled_inclusion(d, K, Kp, L, p**sp)) % mod
    G = (gam_K - _scaled_inclusion(d, K, K, L, p**sg)) % mod
    Gp = (gam_Kp - _scaled_inclusion(d, Kp, Kp, L, p**sg)) % mod
    d0 = np.vstack([G, P])
    d1 = np.hstack([P, (-Gp) % mod])
    return HerrComplex(D, K, L, Kp, d0, d1, sp, sg)


# ---------------------------------------------------------------------------
# cochains


@dataclass(frozen=True)
class HerrCochain:
    module: PhiGammaModule
    degree: int
    components: tuple[tuple[RobbaElement, ...], ...]

    def __post_init__(self):
        want = {0: 1, 1: 2, 2: 1}[self.degree]
        if len(self.components) != want or any(len(c) != self.module.rank for c in self.components):
            raise ValueError(f"degree {self.degree} cochain needs {want} vectors of length {self.module.rank}")

    def _zip(self, other: "HerrCochain", op) -> "HerrCochain":
        if other.degree != self.degree:
            raise ValueError("cochains of different degrees")
        comps = tuple(tuple(op(a, b) for a, b in zip(u, v)) for u, v in zip(self.components, other.components))
        return HerrCochain(self.module, self.degree, comps)

    def __add__(self, other):
        return self._zip(other, lambda a, b: a + b)

    def __sub__(self, other):
        return self._zip(other, lambda a, b: a - b)

    def scale(self, c) -> "HerrCochain":
        return HerrCochain(self.module, self.degree, tuple(tuple(x * c for x in v) for v in self.components))


class CocycleError(ValueError):
    def __init__(self, message: str, residual: int):
        super().__init__(message)
        self.residual = residual


def _vector_from_coords(D: PhiGammaModule, coords, k: int, L: int, shift: int) -> tuple[RobbaElement, ...]:
    p, M = D.p, D.M
    n = k + L
    out = []
    for c in range(D.rank):
        vals = [PadicScalar.from_int(p, int(x), M) for x in coords[c * n:(c + 1) * n]]
        if shift:
            vals = [v / p**shift if not v.is_zero() else PadicScalar.zero(p, v.valuation - shift) for v in vals]
        out.append(RobbaElement.from_coefficients(p, -k, vals, M, L))
    return tuple(out)


def _coords_from_vector(D: PhiGammaModule, v: Sequence[RobbaElement], k: int, L: int, shift: int) -> np.ndarray:
    p, M = D.p, D.M
    out = []
    for x in v:
        if x.low < -k:
            raise WindowError(f"pole of order {-x.low} exceeds the window depth {k}")
        for n in range(-k, L):
            c = x.coefficient(n)
            out.append(0 if c.is_zero() else (c * p**shift).residue_int(M))
    return np.array(out, dtype=object)


def cochain_from_coordinates(C: HerrComplex, degree: int, coords) -> HerrCochain:
    D = C.module
    coords = np.asarray(coords, dtype=object).reshape(-1)
    if degree == 0:
        comps = (_vector_from_coords(D, coords, C.K, C.L, 0),)
    elif degree == 1:
        n = D.rank * (C.K + C.L)
        comps = (_vector_from_coords(D, coords[:n], C.K, C.L, C.gamma_shift),
                 _vector_from_coords(D, coords[n:], C.Kp, C.L, C.phi_shift))
    else:
        comps = (_vector_from_coords(D, coords, C.Kp, C.L, C.phi_shift + C.gamma_shift),)
    return HerrCochain(D, degree, comps)


def cochain_coordinates(C: HerrComplex, c: HerrCochain) -> np.ndarray:
    D = C.module
    if c.degree == 0:
        return _coords_from_vector(D, c.components[0], C.K, C.L, 0)
    if c.degree == 1:
        return np.concatenate([_coords_from_vector(D, c.components[0], C.K, C.L, C.gamma_shift),
                               _coords_from_vector(D, c.components[1], C.Kp, C.L, C.phi_shift)])
    return _coords_from_vector(D, c.components[0], C.Kp, C.L, C.phi_shift + C.gamma_shift)


def coboundary(c: HerrCochain) -> HerrCochain:
    """d applied with element arithmetic (degree 0 or 1)."""
    D = c.module
    if c.degree == 0:
        (m,) = c.components
        g = tuple(a - b for a, b in zip(apply_gamma(D, m), m))
        f = tuple(a - b for a, b in zip(apply_phi(D, m), m))
        return HerrCochain(D, 1, (g, f))
    if c.degree == 1:
        x, y = c.components
        out = tuple((a - b) - (e - f) for a, b, e, f in zip(apply_phi(D, x), x, apply_gamma(D, y), y))
        return HerrCochain(D, 2, (out,))
    raise ValueError("degree 2 is the top of the complex")


def _residual_valuation(c: HerrCochain) -> int:
    """Smallest valuation among the cochain's known coefficients (M + 64 when all vanish)."""
    best = c.module.M + 64
    for v in c.components:
        for x in v:
            for a in x.coeffs:
                if not a.is_zero():
                    best = min(best, a.valuation)
    return best


def check_cocycle(c: HerrCochain, tau: int | None = None) -> int:
    """Residual valuation of d(c); raises CocycleError below tau."""
    tau = default_tau(c.module.M) if tau is None else tau
    if c.degree == 2:
        return c.module.M + 64
    r = _residual_valuation(coboundary(c))
    if r < tau:
        raise CocycleError(f"not a cocycle: residual has valuation {r} < {tau}", r)
    return r


# ---------------------------------------------------------------------------
# cohomology


@dataclass(frozen=True)
class WindowDims:
    L: int
    K: int
    raw: tuple[int, int, int]    # plain truncated-complex dimensions
    dims: tuple[int, int, int]   # reliable dimensions


@dataclass(frozen=True)
class CohomologyReport:
    dims: tuple[int, int, int] | None
    windows: tuple[WindowDims, ...]
    stabilized: bool
    tau: int
    M: int
    monotone: bool

    @property
    def trace(self) -> list[dict]:
        return [{"L": w.L, "K": w.K, "raw": list(w.raw), "dims": list(w.dims)} for w in self.windows]


def _projection_rows(d: int, k: int, L: int, L_small: int) -> list[int]:
    n = k + L
    return [c * n + j for c in range(d) for j in range(k + L_small)]


def _c1_projection(C: HerrComplex, L_small: int) -> list[int]:
    d = C.module.rank
    n0 = d * (C.K + C.L)
    return _projection_rows(d, C.K, C.L, L_small) + [n0 + r for r in _projection_rows(d, C.Kp, C.L, L_small)]


class _Window:
    """The window-L complex with its half-length shadow, and the rank data both need."""

    def __init__(self, D: PhiGammaModule, L: int, tau: int):
        if L < 2:
            raise WindowError("window length must be at least 2")
        self.D, self.L, self.tau = D, L, tau
        self.big = herr_complex(D, L)
        self.small = herr_complex(D, L // 2, self.big.K)
        p, M = D.p, D.M
        self.sf0 = smith_normal_form(self.big.d0, p, M)
        self.sf1 = smith_normal_form(self.big.d1, p, M)
        self.r0, self.r1 = self.sf0.rank(tau), self.sf1.rank(tau)
        self._dims: WindowDims | None = None

    def rank(self, A) -> int:
        A = np.asarray(A, dtype=object)
        return numerical_rank(A, self.D.p, self.D.M, self.tau) if A.size else 0

    def z0(self):
        return np.asarray(self.sf0.V[:, self.r0:], dtype=object)

    def z1(self):
        return np.asarray(self.sf1.V[:, self.r1:], dtype=object)

    def shallow_inclusion(self) -> np.ndarray:
        d = self.D.rank
        return _scaled_inclusion(d, self.big.K, self.big.Kp, self.L, 1)

    def dims(self) -> WindowDims:
        if self._dims is None:
            self._dims = self._compute_dims()
        return self._dims

    def _compute_dims(self) -> WindowDims:
        C = self.big
        n0, n1, n2 = C.dims
        raw = (n0 - self.r0, n1 - self.r1 - self.r0, n2 - self.r1)
        Z0 = self.z0()
        h0 = self.rank(Z0[_projection_rows(self.D.rank, C.K, C.L, self.L // 2)]) if Z0.shape[1] else 0
        Z1 = self.z1()
        B = self.small.d0
        rB = self.rank(B)
        h1 = (self.rank(np.hstack([Z1[_c1_projection(C, self.L // 2)], B])) - rB) if Z1.shape[1] else 0
        h2 = self.rank(np.hstack([C.d1, self.shallow_inclusion()])) - self.r1
        return WindowDims(self.L, C.K, raw, (h0, h1, h2))


def window_dims(D: PhiGammaModule, L: int, tau: int | None = None) -> WindowDims:
    tau = default_tau(D.M) if tau is None else tau
    return _window(D, L, tau).dims()


def cohomology_dims(D: PhiGammaModule, schedule: Sequence[int] = DEFAULT_SCHEDULE,
                    tau: int | None = None) -> CohomologyReport:
    """Dimensions per window; stabilized when the two largest windows agree."""
    if len(schedule) < 2:
        raise ValueError("the window schedule needs at least two windows")
    tau = default_tau(D.M) if tau is None else tau
    if not 0 < tau < D.M:
        raise ValueError("tau must satisfy 0 < tau < M")
    windows = tuple(window_dims(D, L, tau) for L in sorted(schedule))
    stable = windows[-1].dims == windows[-2].dims
    monotone = all(_monotone([w.dims[i] for w in windows]) for i in range(3))
    return CohomologyReport(windows[-1].dims if stable else None, windows, stable, tau, D.M, monotone)


def _monotone(seq: Sequence[int]) -> bool:
    up = all(a <= b for a, b in zip(seq, seq[1:]))
    down = all(a >= b for a, b in zip(seq, seq[1:]))
    return up or down


@dataclass(frozen=True)
class EulerResult:
    status: str   # pass, fail or inconclusive
    characteristic: int | None
    expected: int
    dims: tuple[int, int, int] | None


def verify_euler(D: PhiGammaModule, report: CohomologyReport | None = None,
                 schedule: Sequence[int] = DEFAULT_SCHEDULE, tau: int | None = None) -> EulerResult:
    report = cohomology_dims(D, schedule, tau) if report is None else report
    if not report.stabilized:
        return EulerResult("inconclusive", None, -D.rank, None)
    h0, h1, h2 = report.dims
    chi = h0 - h1 + h2
    return EulerResult("pass" if chi == -D.rank else "fail", chi, -D.rank, report.dims)


# ---------------------------------------------------------------------------
# cocycle bases with shallow poles


def _select_independent(Q: np.ndarray, cands: np.ndarray, count: int, p: int, M: int, tau: int) -> np.ndarray:
    """count combinations of the candidate columns whose images Q are independent."""
    if count == 0:
        return np.zeros((cands.shape[0], 0), dtype=object)
    sf = smith_normal_form(Q, p, M)
    if sf.rank(tau) < count:
        raise PrecisionError("shallow candidates do not span the cohomology", "window-exhausted")
    return mat_mul(cands, sf.V[:, :count], p**M)


def _quotient_rows(B: np.ndarray, X: np.ndarray, p: int, M: int, tau: int) -> np.ndarray:
    """Coordinates of the columns of X modulo the column space of B."""
    if B.shape[1] == 0:
        return X
    sf = smith_normal_form(B, p, M)
    return mat_mul(sf.U, X, p**M)[sf.rank(tau):]


def _depth_schedule(degree: int, K: int, Kp: int) -> list[tuple[int, int]]:
    """(gamma-part depth, phi-part depth) pairs to try, shallowest first."""
    steps = [0, 1, 2, 4, 8, 12, 16, 24, 32, 48, 64, 96, 128, 192, 256, 384]
    if degree != 1:
        top = K if degree == 0 else Kp
        return [(k, k) for k in steps if k < top] + [(top, top)]
    pairs = [(min(k, K, 8), k) for k in steps if k < Kp] + [(K, Kp)]
    return list(dict.fromkeys(pairs))


@lru_cache(maxsize=16)
def _window(D: PhiGammaModule, L: int, tau: int) -> "_Window":
    return _Window(D, L, tau)


def cohomology_basis(D: PhiGammaModule, degree: int, L: int = 64, tau: int | None = None) -> list[HerrCochain]:
    """Cocycles representing a basis of the reliable H^degree at window L.

    Poles are kept as shallow as possible: candidates are restricted to
    growing depths until their classes span.  Cup products apply phi to one
    argument, so a deep pole there would exhaust the window.
    """
    tau = default_tau(D.M) if tau is None else tau
    W = _window(D, L, tau)
    target = W.dims().dims[degree]
    C = W.big
    p, M = D.p, D.M
    d = D.rank
    if target == 0:
        return []
    for kg, kp in _depth_schedule(degree, C.K, C.Kp):
        if degree == 0:
            cols = [c * (C.K + L) + j for c in range(d) for j in range(C.K - kg, C.K + L)]
            Z = kernel_basis(C.d0[:, cols], p, M, tau)
            full = np.zeros((C.d0.shape[1], Z.shape[1]), dtype=object)
            full[cols] = Z
            Q = full[_projection_rows(d, C.K, L, L // 2)]
        elif degree == 1:
            n0 = d * (C.K + L)
            cols = [c * (C.K + L) + j for c in range(d) for j in range(C.K - kg, C.K + L)]
            cols += [n0 + c * (C.Kp + L) + j for c in range(d) for j in range(C.Kp - kp, C.Kp + L)]
            Z = kernel_basis(C.d1[:, cols], p, M, tau)
            full = np.zeros((C.d1.shape[1], Z.shape[1]), dtype=object)
            full[cols] = Z
            Q = _quotient_rows(W.small.d0, full[_c1_projection(C, L // 2)], p, M, tau)
        else:
            idx = [c * (C.Kp + L) + C.Kp + e for c in range(d) for e in range(-kg, kg + 1)]
            full = np.zeros((C.d1.shape[0], len(idx)), dtype=object)
            for j, i in enumerate(idx):
                full[i, j] = 1
            Q = _quotient_rows(C.d1, full, p, M, tau)
        if Q.shape[1] and numerical_rank(Q, p, M, tau) >= target:
            vecs = _select_independent(Q, full, target, p, M, tau)
            return [cochain_from_coordinates(C, degree, vecs[:, j]) for j in range(target)]
    raise PrecisionError("no shallow basis found in the window", "window-exhausted")


# ---------------------------------------------------------------------------
# cup products and duality


def _outer(u: Sequence[RobbaElement], v: Sequence[RobbaElement]) -> tuple[RobbaElement, ...]:
    return tuple(a * b for a in u for b in v)


def cup_product(c1: HerrCochain, c2: HerrCochain, tau: int | None = None) -> HerrCochain:
    """Cup product into the cochains of tensor(D, D').

    In degrees (1, 1): (x, y), (z, w) -> x (x) gamma(w) - y (x) phi(z), with x, z
    the gamma-parts and y, w the phi-parts.  Shifting either argument by a
    coboundary moves the result by a coboundary.  When one side has degree 0
    the product is componentwise.
    """
    for c in (c1, c2):
        check_cocycle(c, tau)
    D, E = c1.module, c2.module
    T = tensor(D, E)
    deg = c1.degree + c2.degree
    if deg > 2:
        raise ValueError("cup product lands above degree 2")
    if c1.degree == 0:
        (u,) = c1.components
        return HerrCochain(T, deg, tuple(_outer(u, v) for v in c2.components))
    if c2.degree == 0:
        (v,) = c2.components
        return HerrCochain(T, deg, tuple(_outer(u, v) for u in c1.components))
    x, y = c1.components
    z, w = c2.components
    first = _outer(x, apply_gamma(E, w))
    second = _outer(y, apply_phi(E, z))
    return HerrCochain(T, 2, (tuple(a - b for a, b in zip(first, second)),))


def residue(f: RobbaElement) -> PadicScalar:
    """Residue of f dpi / (1 + pi): sum_{n >= 1} (-1)^(n-1) f_{-n}."""
    if not f.exact and f.top < 0:
        raise WindowError("the residue needs the coefficients of every negative power")
    acc = PadicScalar.zero(f.p, f.M + 64)
    for n in range(1, max(-f.low, 0) + 1):
        c = f.coefficient(-n)
        acc = acc + (c if n % 2 else -c)
    return acc


def _trace_to_omega(c: HerrCochain, d: int) -> RobbaElement:
    (v,) = c.components
    acc = v[0]
    for i in range(1, d):
        acc = acc + v[i * d + i]
    return acc


@dataclass(frozen=True)
class PairingReport:
    degree: int
    matrix: tuple[tuple[PadicScalar, ...], ...]
    shape: tuple[int, int]
    rank: int
    tau: int

    @property
    def perfect(self) -> bool:
        return self.shape[0] == self.shape[1] == self.rank


def duality_pairing(D: PhiGammaModule, i: int, L: int = 64, tau: int | None = None) -> PairingReport:
    """Pairing H^i(D) x H^(2-i)(D^dual (x) omega) -> H^2(omega) -> Q_p.

    H^2(omega) is identified with Q_p by the residue of f dpi / (1 + pi),
    which vanishes on coboundaries of omega.
    """
    tau = default_tau(D.M) if tau is None else tau
    Dv = twist(dual(D), omega_character(D.p, D.M, D.generator))
    left = cohomology_basis(D, i, L, tau)
    right = cohomology_basis(Dv, 2 - i, L, tau)
    d = D.rank
    rows = [tuple(_pair(a, b, d, tau) for b in right) for a in left]
    shape = (len(left), len(right))
    rank = _scalar_rank(rows, D.p, tau) if rows and right else 0
    return PairingReport(i, tuple(rows), shape, rank, tau)


def _gamma_depth(c: HerrCochain) -> int:
    return max(max(-x.low, 0) for x in c.components[0])


def _pair(a: HerrCochain, b: HerrCochain, d: int, tau: int) -> PadicScalar:
    # a cup b = -(b cup a) on H^1 x H^1; phi goes to the second argument's gamma-part, so that one is the shallower
    if a.degree == b.degree == 1 and _gamma_depth(b) > _gamma_depth(a):
        return -residue(_trace_to_omega(cup_product(b, a, tau), d))
    return residue(_trace_to_omega(cup_product(a, b, tau), d))


def _scalar_rank(rows, p: int, tau: int) -> int:
    A, s, M = PadicMatrix(tuple(tuple(r) for r in rows)).to_integral()
    if M <= 0:
        return 0
    # entries are scaled by p^s to be integral, so the threshold moves with them
    return smith_normal_form(A, p, M, transforms=False).rank(min(tau + s, M))


# ---------------------------------------------------------------------------
# extensions


def _block(A: Matrix, B: Matrix, C: Matrix) -> Matrix:
    """[[A, B], [0, C]]."""
    p, M = A[0][0].p, A[0][0].M
    zero = RobbaElement.polynomial(p, 0, [], M)
    top = [tuple(A[i]) + tuple(B[i]) for i in range(len(A))]
    bottom = [tuple([zero] * len(A)) + tuple(C[i]) for i in range(len(C))]
    return tuple(top + bottom)


def _hom_matrix(v: Sequence[RobbaElement], d1: int, d2: int) -> Matrix:
    # index j * d1 + i of tensor(dual(D2), D1) is the entry [i][j] of a map D2 -> D1
    return tuple(tuple(v[j * d1 + i] for j in range(d2)) for i in range(d1))


def _hom_vector(X: Matrix, d1: int, d2: int) -> tuple[RobbaElement, ...]:
    return tuple(X[i][j] for j in range(d2) for i in range(d1))


def extension_from_cocycle(D1: PhiGammaModule, D2: PhiGammaModule, c: HerrCochain,
                           tau: int | None = None) -> PhiGammaModule:
    """Extension 0 -> D1 -> E -> D2 -> 0 from a 1-cocycle of Hom(D2, D1)."""
    if c.degree != 1 or c.module.rank != D1.rank * D2.rank:
        raise ValueError("need a degree-1 cochain of tensor(dual(D2), D1)")
    check_cocycle(c, tau)
    d1, d2 = D1.rank, D2.rank
    Y = _hom_matrix(c.components[0], d1, d2)
    X = _hom_matrix(c.components[1], d1, d2)
    Phi = _block(D1.Phi, _mat_mul(X, D2.Phi), D2.Phi)
    Gamma = _block(D1.Gamma, _mat_mul(Y, D2.Gamma), D2.Gamma)
    return PhiGammaModule(D1.p, D1.generator, min(D1.M, D2.M), Phi, Gamma)


def random_cochain(D: PhiGammaModule, degree: int, rng, low: int = 0, high: int = 4,
                   bound: int = 9) -> HerrCochain:
    """Cochain whose entries are random integer Laurent polynomials on exponents [low, high)."""
    count = {0: 1, 1: 2, 2: 1}[degree]

    def entry():
        vals = [rng.randint(-bound, bound) for _ in range(high - low)]
        return RobbaElement.polynomial(D.p, low, vals, D.M)

    comps = tuple(tuple(entry() for _ in range(D.rank)) for _ in range(count))
    return HerrCochain(D, degree, comps)


def coboundary_extension(D1: PhiGammaModule, D2: PhiGammaModule, rng, **kwargs) -> PhiGammaModule:
    """Extension of D2 by D1 whose cocycle is d of a random 0-cochain; it always splits."""
    m = random_cochain(hom_module(D1, D2), 0, rng, **kwargs)
    return extension_from_cocycle(D1, D2, coboundary(m))


def hom_module(D1: PhiGammaModule, D2: PhiGammaModule) -> PhiGammaModule:
    """tensor(dual(D2), D1), whose 1-cocycles classify extensions of D2 by D1."""
    return tensor(dual(D2), D1)


def extension_cocycle(E: PhiGammaModule, D1: PhiGammaModule, D2: PhiGammaModule) -> HerrCochain:
    """The cocycle read off the off-diagonal blocks of an extension."""
    d1, d2 = D1.rank, D2.rank
    X = tuple(tuple(E.Phi[i][d1 + j] for j in range(d2)) for i in range(d1))
    Y = tuple(tuple(E.Gamma[i][d1 + j] for j in range(d2)) for i in range(d1))
    X = _mat_mul(X, _mat_inverse(D2.Phi))
    Y = _mat_mul(Y, _mat_inverse(D2.Gamma))
    H = hom_module(D1, D2)
    return HerrCochain(H, 1, (_hom_vector(Y, d1, d2), _hom_vector(X, d1, d2)))


@dataclass(frozen=True)
class SplitResult:
    status: str  # split, non-split or inconclusive
    witness: HerrCochain | None         # m with d0(m) = cocycle when split
    obstruction: int | None             # valuation of the first non-vanishing cokernel coordinate
    reason: str = ""

    @property
    def split(self) -> bool | None:
        return {"split": True, "non-split": False}.get(self.status)


def split_test(E: PhiGammaModule, D1: PhiGammaModule, D2: PhiGammaModule, L: int = 32,
               tau: int | None = None) -> SplitResult:
    """Whether E splits: is its cocycle a coboundary at precision?"""
    tau = default_tau(E.M) if tau is None else tau
    c = extension_cocycle(E, D1, D2)
    try:
        C = herr_complex(c.module, L)
        b = cochain_coordinates(C, c)
    except (WindowError, PrecisionError) as exc:
        return SplitResult("inconclusive", None, None, str(exc))
    sol = solve(C.d0, b, c.module.p, c.module.M, tau)
    if sol is None:
        sf = smith_normal_form(C.d0, c.module.p, c.module.M)
        ub = mat_mul(sf.U, b.reshape(-1, 1), c.module.p ** c.module.M).reshape(-1)[sf.rank(tau):]
        nz = [int(x) for x in ub if int(x)]
        ob = min(_vp(x, c.module.p) for x in nz) if nz else None
        return SplitResult("non-split", None, ob)
    m = cochain_from_coordinates(C, 0, sol.x)
    if sol.shift:
        m = m.scale(Fraction(1, c.module.p ** sol.shift))
    return SplitResult("split", m, None)


def _vp(n: int, p: int) -> int:
    k = 0
    while n % p == 0:
        n //= p
        k += 1
    return k


# ---------------------------------------------------------------------------
# slopes


def _leading_scalar(f: RobbaElement) -> PadicScalar:
    """lambda for f = lambda * u with u an integral power series of constant term 1."""
    if f.low != 0 or f.is_zero():
        raise PrecisionError("entry is not a unit series", "valuation-indeterminate")
    lam = f.coeffs[0]
    if lam.is_zero():
        raise PrecisionError("constant term vanishes at precision", "valuation-indeterminate")
    for c in f.coeffs[1:]:
        if not c.is_zero() and c.valuation < lam.valuation:
            raise PrecisionError("leading term does not dominate", "valuation-indeterminate")
    return lam


def _det(A: Matrix) -> RobbaElement:
    d = len(A)
    if d == 1:
        return A[0][0]
    acc = None
    for j in range(d):
        minor = tuple(tuple(r[k] for k in range(d) if k != j) for r in A[1:])
        term = A[0][j] * _det(minor)
        acc = term if acc is None else (acc + term if j % 2 == 0 else acc - term)
    return acc


def slope_rank1(D: PhiGammaModule) -> Fraction:
    if D.rank != 1:
        raise ValueError("slope_rank1 needs a rank-1 module")
    return Fraction(_leading_scalar(D.Phi[0][0]).valuation)


def degree(D: PhiGammaModule) -> Fraction:
    return Fraction(_leading_scalar(_det(D.Phi)).valuation)


def mu(D: PhiGammaModule) -> Fraction:
    return degree(D) / D.rank


# ---------------------------------------------------------------------------
# the test zoo


def _g_label(k: int) -> str:
    return {0: "1", 1: "g"}.get(k, f"g^{k}")


def character_grid(p: int, M: int = DEFAULT_PREC) -> dict[str, Character]:
    """Ten rank-1 characters beyond the trivial one and omega."""
    g = topological_generator(p)
    spec = [(p, 1), (Fraction(1, p), -1), (p, 0), (Fraction(1, p), 0), (p * p, 0), (Fraction(1, p * p), -2),
            (2, 0), (2, 1), (p, 2), (Fraction(1, p), 1)]
    out = {}
    for at_p, k in spec:
        out[f"char({at_p},{_g_label(k)})"] = Character.of(p, at_p, Fraction(g) ** k, M)
    return out


def constant_extension(D: PhiGammaModule, part: str) -> PhiGammaModule:
    """Self-extension of a rank-1 module by the constant cocycle (1, 0) or (0, 1)."""
    H = hom_module(D, D)
    one = (RobbaElement.constant(D.p, 1, D.M),)
    zero = (RobbaElement.polynomial(D.p, 0, [], D.M),)
    c = HerrCochain(H, 1, (one, zero) if part == "gamma" else (zero, one))
    return extension_from_cocycle(D, D, c)


def zoo(p: int, M: int = DEFAULT_PREC) -> dict[str, PhiGammaModule]:
    """Trivial, omega, ten characters and three non-split rank-2 extensions."""
    out = {"trivial": from_character(trivial_character(p, M), M),
           "omega": from_character(omega_character(p, M), M)}
    for name, delta in character_grid(p, M).items():
        out[name] = from_character(delta, M)
    triv = out["trivial"]
    two = from_character(Character.of(p, 2, 1, M), M)
    out["ext(trivial;gamma)"] = constant_extension(triv, "gamma")
    out["ext(trivial;phi)"] = constant_extension(triv, "phi")
    out["ext(char(2,1);phi)"] = constant_extension(two, "phi")
    return out
