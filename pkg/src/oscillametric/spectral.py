"""Harmonic polynomials on R^4, Laplacian eigenspaces of S^3, the Hopf map and spin matrices.

All polynomial algebra is exact (sympy polynomials over Q or Q(i)); floats
appear only when polynomials are evaluated at sample points.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np
import sympy as sp

from .manifold import ValidationError

X = sp.symbols("x1:5")
Yv = sp.symbols("y1:4")
I = sp.I


# --------------------------------------------------------------------------
# polynomials


def _laplacian_expr(expr, variables) -> sp.Expr:
    return sp.expand(sum(sp.diff(expr, v, 2) for v in variables))


def _domain(expr):
    return "QQ_I" if expr.has(sp.I) else "QQ"


@dataclass(frozen=True)
class HarmonicPoly:
    """Homogeneous polynomial on R^4 with exact (rational or Gaussian-rational) coefficients."""

    expr: sp.Expr

    def __post_init__(self):
        object.__setattr__(self, "expr", sp.expand(sp.sympify(self.expr)))

    @property
    def poly(self) -> sp.Poly:
        return sp.Poly(self.expr, *X, domain=_domain(self.expr))

    @property
    def degree(self) -> int:
        if self.expr == 0:
            return 0
        return self.poly.total_degree()

    @property
    def coeffs(self) -> dict:
        return {m: sp.nsimplify(c) for m, c in self.poly.terms()}

    def is_homogeneous(self) -> bool:
        return self.expr == 0 or self.poly.is_homogeneous

    def laplacian(self) -> sp.Expr:
        return _laplacian_expr(self.expr, X)

    def is_harmonic(self) -> bool:
        return self.laplacian() == 0

    def __add__(self, other):
        return HarmonicPoly(self.expr + other.expr)

    def __sub__(self, other):
        return HarmonicPoly(self.expr - other.expr)

    def scale(self, c):
        return HarmonicPoly(sp.nsimplify(c) * self.expr)

    def gradient(self):
        return [sp.diff(self.expr, v) for v in X]

    def compose_antipodal(self):
        return HarmonicPoly(self.expr.subs({v: -v for v in X}, simultaneous=True))

    def __call__(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        fn = _lambdify(self.expr)
        out = fn(*[pts[:, i] for i in range(4)])
        return np.broadcast_to(np.asarray(out, dtype=complex if self.expr.has(sp.I) else float),
                               (pts.shape[0],)).copy()


@lru_cache(maxsize=512)
def _lambdify(expr):
    return sp.lambdify(X, expr, modules="numpy")


def monomials(p: int, nvars: int = 4):
    """Exponent tuples of total degree p in descending lexicographic order."""
    out = [e for e in itertools.product(range(p, -1, -1), repeat=nvars) if sum(e) == p]
    return out


def _mono_expr(exp, variables):
    return sp.Mul(*[v**k for v, k in zip(variables, exp)])


def _coeff_vector(expr, monos, variables) -> sp.Matrix:
    poly = sp.Poly(expr, *variables, domain=_domain(expr)) if expr != 0 else None
    terms = dict(poly.terms()) if poly is not None else {}
    return sp.Matrix([sp.sympify(terms.get(m, 0)) for m in monos])


def harmonic_space(p: int, nvars: int = 4) -> list:
    """Exact basis of homogeneous harmonic polynomials of degree p in nvars variables."""
    variables = X if nvars == 4 else Yv
    if p < 0:
        raise ValidationError("degree must be nonnegative")
    monos = monomials(p, nvars)
    if p < 2:
        return [_mono_expr(m, variables) for m in monos]
    target = monomials(p - 2, nvars)
    cols = [_coeff_vector(_laplacian_expr(_mono_expr(m, variables), variables), target, variables) for m in monos]
    lap = sp.Matrix.hstack(*cols)
    out = []
    for vec in lap.nullspace():
        expr = sum(c * _mono_expr(m, variables) for c, m in zip(vec, monos))
        out.append(sp.expand(expr))
    return out


# exact normalised moments E[x^a] for the uniform measure on S^3(1)


def _double_factorial(n: int) -> int:
    return math.prod(range(n, 0, -2)) if n > 0 else 1


@lru_cache(maxsize=4096)
def sphere_moment(exp: tuple) -> Fraction:
    if any(e % 2 for e in exp):
        return Fraction(0)
    num = Fraction(1)
    for e in exp:
        num *= Fraction(_double_factorial(e - 1), 2 ** (e // 2))
    half = sum(exp) // 2
    # Gamma(2) / Gamma(2 + half) = 1 / (half + 1)!
    return num / math.factorial(half + 1)


def l2_inner(p: sp.Expr, q: sp.Expr) -> sp.Expr:
    """Exact normalised L2(S^3) product <p, q> = E[p * conj(q)]."""
    prod = sp.expand(p * sp.conjugate(q).subs({sp.conjugate(v): v for v in X}))
    if prod == 0:
        return sp.Integer(0)
    poly = sp.Poly(prod, *X, domain=_domain(prod))
    total = sp.Integer(0)
    for m, c in poly.terms():
        mom = sphere_moment(tuple(m))
        if mom:
            total += c * sp.Rational(mom.numerator, mom.denominator)
    return sp.nsimplify(total)


def gram_schmidt(exprs: Sequence) -> list:
    """Exact orthogonalisation (no normalisation) under ``l2_inner``."""
    out = []
    for e in exprs:
        v = sp.expand(e)
        for u in out:
            v = sp.expand(v - l2_inner(v, u) / l2_inner(u, u) * u)
        if v != 0:
            out.append(v)
    return out


@dataclass(frozen=True)
class EigenBasis:
    p: int
    rho: float
    elements: tuple

    @property
    def gamma(self) -> float:
        return self.p * (self.p + 2) / self.rho**2

    @property
    def dim(self) -> int:
        return len(self.elements)

    def gram(self) -> sp.Matrix:
        n = self.dim
        return sp.Matrix(n, n, lambda i, j: l2_inner(self.elements[i].expr, self.elements[j].expr))


@lru_cache(maxsize=16)
def _eigenbasis_exprs(p: int):
    return tuple(gram_schmidt(harmonic_space(p)))


def eigenbasis(p: int, rho: float = 1.0) -> EigenBasis:
    """Orthogonal basis of E_p (restrictions of degree-p harmonic polynomials); gamma = p(p+2)/rho^2."""
    if p < 0:
        raise ValidationError("p must be >= 0")
    if rho <= 0:
        raise ValidationError("rho must be positive")
    return EigenBasis(p, float(rho), tuple(HarmonicPoly(e) for e in _eigenbasis_exprs(p)))


def quadrature_gram(basis: Sequence[HarmonicPoly], n: int = 2**17, seed: int = 0) -> np.ndarray:
    """Quasi-Monte-Carlo normalised Gram matrix on S^3(1)."""
    pts = sphere_points(n, seed)
    vals = np.stack([b(pts) for b in basis])
    return (vals @ np.conj(vals).T) / n


def sphere_points(n: int, seed: int = 0, dim: int = 4) -> np.ndarray:
    """Scrambled Sobol points pushed to the unit sphere through the normal inverse CDF."""
    from scipy.stats import norm, qmc

    u = qmc.Sobol(d=dim, scramble=True, seed=seed).random(n)
    z = norm.ppf(np.clip(u, 1e-12, 1 - 1e-12))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


# --------------------------------------------------------------------------
# Laplacian eigen-checks on S^3(rho)


def laplace_eigencheck(P: HarmonicPoly, rho: float, samples: np.ndarray, method: str = "exact",
                       h: float = 1e-3) -> float:
    """max |Delta_S3 f - gamma f| with Delta = -(analyst Laplacian), f = P on S^3(rho).

    The degree-0 extension F(x) = P(rho x/|x|) has no radial derivative, so
    Delta_S3 f is minus the ambient Laplacian of F on the sphere.
    ``exact``: product rule with exact gradient and Laplacian of P.
    ``fd``: five-point central differences of F in R^4.
    """
    p = P.degree
    gamma = p * (p + 2) / rho**2
    pts = np.asarray(samples, float)
    pts = rho * pts / np.linalg.norm(pts, axis=1, keepdims=True)
    f = P(pts)
    if method == "exact":
        lapP = HarmonicPoly(P.laplacian())(pts) if P.laplacian() != 0 else np.zeros(len(pts))
        grad = np.stack([HarmonicPoly(gi)(pts) if gi != 0 else np.zeros(len(pts)) for gi in P.gradient()], axis=1)
        r = np.linalg.norm(pts, axis=1)
        # F = rho^p r^-p P; Delta(r^k) = k(k+2) r^(k-2) in R^4
        k = -p
        lapF = (rho**p) * (r**k * lapP + 2 * k * r ** (k - 2) * np.einsum("ni,ni->n", pts, grad)
                           + k * (k + 2) * r ** (k - 2) * f)
    elif method == "fd":
        def F(q):
            q = np.atleast_2d(q)
            return P(rho * q / np.linalg.norm(q, axis=1, keepdims=True))

        lapF = np.zeros(len(pts), dtype=f.dtype)
        for i in range(4):
            e = np.zeros(4)
            e[i] = h
            lapF = lapF + (-F(pts + 2 * e) + 16 * F(pts + e) - 30 * F(pts) + 16 * F(pts - e) - F(pts - 2 * e)) / (12 * h * h)
    else:
        raise ValidationError(f"unknown method {method!r}")
    return float(np.max(np.abs(-lapF - gamma * f)))


# --------------------------------------------------------------------------
# Hopf fibration


def hopf(x):
    """Pi(x) = (x1x3 + x2x4, x1x4 - x2x3, (x3^2 + x4^2 - x1^2 - x2^2)/2).

    Exact when given Fractions or sympy rationals; vectorised for float arrays.
    """
    if isinstance(x, np.ndarray) and x.dtype != object:
        x = np.asarray(x, float)
        x1, x2, x3, x4 = (x[..., i] for i in range(4))
        return np.stack([x1 * x3 + x2 * x4, x1 * x4 - x2 * x3, 0.5 * (x3**2 + x4**2 - x1**2 - x2**2)], axis=-1)
    x1, x2, x3, x4 = x
    half = Fraction(1, 2) if isinstance(x1, (Fraction, int)) else sp.Rational(1, 2)
    return (x1 * x3 + x2 * x4, x1 * x4 - x2 * x3, half * (x3 * x3 + x4 * x4 - x1 * x1 - x2 * x2))


HOPF_EXPR = hopf(X)


def phase_rotate(x: np.ndarray, alpha: float) -> np.ndarray:
    """e^{i alpha} (z1, z2) with z1 = x1 + i x2, z2 = x3 + i x4."""
    z1 = (x[..., 0] + 1j * x[..., 1]) * np.exp(1j * alpha)
    z2 = (x[..., 2] + 1j * x[..., 3]) * np.exp(1j * alpha)
    return np.stack([z1.real, z1.imag, z2.real, z2.imag], axis=-1)


def hopf_pullback_harmonic(P) -> HarmonicPoly:
    """P o Pi for a harmonic homogeneous polynomial P(y1, y2, y3)."""
    P = sp.expand(sp.sympify(P))
    if P != 0 and not sp.Poly(P, *Yv).is_homogeneous:
        raise ValidationError("input must be homogeneous")
    if _laplacian_expr(P, Yv) != 0:
        raise ValidationError("input must be harmonic on R^3")
    return HarmonicPoly(P.subs(dict(zip(Yv, HOPF_EXPR)), simultaneous=True))


def restricted_space(q: int) -> list:
    """Basis of E'_q = pullbacks of degree q/2 harmonic polynomials on R^3 (q even)."""
    if q % 2:
        raise ValidationError("E'_q is defined for even q only")
    return [hopf_pullback_harmonic(P) for P in harmonic_space(q // 2, nvars=3)]


# --------------------------------------------------------------------------
# parallelising fields and spin endomorphisms


L_MATRICES = (
    np.array([[0, 0, 1, 0], [0, 0, 0, 1], [-1, 0, 0, 0], [0, -1, 0, 0]], float),
    np.array([[0, 0, 0, -1], [0, 0, 1, 0], [0, -1, 0, 0], [1, 0, 0, 0]], float),
    np.array([[0, 1, 0, 0], [-1, 0, 0, 0], [0, 0, 0, -1], [0, 0, 1, 0]], float),
)
"""Row i of L_MATRICES[k] gives the x-linear coefficient of the d_i component of L_{k+1}."""


def L_vector(k: int, x: np.ndarray) -> np.ndarray:
    """Components of L_k at points x (shape (..., 4))."""
    if k not in (1, 2, 3):
        raise ValidationError("k must be 1, 2 or 3")
    return np.asarray(x, float) @ L_MATRICES[k - 1].T


def _L_expr(k: int, expr: sp.Expr) -> sp.Expr:
    x1, x2, x3, x4 = X
    d = [sp.diff(expr, v) for v in X]
    if k == 1:
        return sp.expand(x3 * d[0] + x4 * d[1] - x1 * d[2] - x2 * d[3])
    if k == 2:
        return sp.expand(-x4 * d[0] + x3 * d[1] - x2 * d[2] + x1 * d[3])
    if k == 3:
        return sp.expand(x2 * d[0] - x1 * d[1] - x4 * d[2] + x3 * d[3])
    raise ValidationError("k must be 1, 2 or 3")


def L_apply(k: int, P: HarmonicPoly) -> HarmonicPoly:
    return HarmonicPoly(_L_expr(k, P.expr))


def sphere_divergence(field, x: np.ndarray, h: float = 1e-5) -> float:
    """Divergence on the sphere of a tangent field: trace of P DF P with P the tangent projector."""
    x = np.asarray(x, float)
    n = x / np.linalg.norm(x)
    proj = np.eye(4) - np.outer(n, n)
    jac = np.stack([(field(x + h * e) - field(x - h * e)) / (2 * h) for e in np.eye(4)], axis=1)
    return float(np.trace(proj @ jac @ proj))


@dataclass(frozen=True)
class SpinMatrices:
    M: tuple
    hatM: tuple

    def numeric(self):
        return [np.array(m.evalf(), dtype=complex) for m in self.hatM]


def matrix_in_basis(k: int, basis: Sequence) -> sp.Matrix:
    """Column j holds the coordinates of L_k(basis_j) in ``basis`` (exact solve)."""
    exprs = [b.expr if isinstance(b, HarmonicPoly) else sp.expand(sp.sympify(b)) for b in basis]
    degs = {sp.Poly(e, *X).total_degree() for e in exprs}
    if len(degs) != 1:
        raise ValidationError("basis must be homogeneous of one degree")
    monos = monomials(degs.pop())
    A = sp.Matrix.hstack(*[_coeff_vector(e, monos, X) for e in exprs])
    cols = []
    for e in exprs:
        target = _coeff_vector(_L_expr(k, e), monos, X)
        try:
            sol, params = A.gauss_jordan_solve(target)
        except ValueError as exc:
            raise ValidationError(f"basis is not closed under L_{k}") from exc
        if params.shape[0]:
            raise ValidationError("basis elements are linearly dependent")
        cols.append(sol.applyfunc(sp.nsimplify))
    return sp.Matrix.hstack(*cols).applyfunc(sp.simplify)


def spin_matrices(basis: Sequence) -> SpinMatrices:
    """Matrices M_k of L_k and hatM_k = -i M_k in the given basis."""
    if isinstance(basis, EigenBasis):
        basis = basis.elements
    Ms = tuple(matrix_in_basis(k, basis) for k in (1, 2, 3))
    return SpinMatrices(Ms, tuple((-I * m).applyfunc(sp.expand) for m in Ms))


def commutator_defects(hatM: Sequence) -> list:
    """[S2,S3] - iS1, [S1,S3] + iS2, [S1,S2] - iS3, exactly."""
    s1, s2, s3 = hatM
    return [
        (s2 * s3 - s3 * s2 - I * s1).applyfunc(sp.expand),
        (s1 * s3 - s3 * s1 + I * s2).applyfunc(sp.expand),
        (s1 * s2 - s2 * s1 - I * s3).applyfunc(sp.expand),
    ]


def commutator_scale(hatM: Sequence):
    """The constant c with [S2, S3] = c i S1 (None when the relation is not proportional)."""
    s1, s2, s3 = hatM
    comm = (s2 * s3 - s3 * s2).applyfunc(sp.expand)
    target = (I * s1).applyfunc(sp.expand)
    ratio = None
    for a, b in zip(comm, target):
        if b == 0:
            if a != 0:
                return None
            continue
        r = sp.simplify(a / b)
        if ratio is None:
            ratio = r
        elif sp.simplify(r - ratio) != 0:
            return None
    return ratio


BETA_SPIN_HALF = tuple(
    HarmonicPoly(e)
    for e in (
        X[2] + I * X[3],
        X[1] - I * X[0],
        I * X[1] - X[0],
        -(I * X[2] + X[3]),
    )
)
"""Complex basis of E_1 (each element is sqrt(2) times the unit-norm vector)."""

SPIN_ONE_BASIS = tuple(HarmonicPoly(e) for e in HOPF_EXPR)


def s_theta(theta: float) -> np.ndarray:
    """Stern-Gerlach observable sin(theta) S'_1 + cos(theta) S'_3 on span(beta_1, beta_2)."""
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[-c, s], [s, c]])


def s_theta_eigvecs(theta: float):
    """(beta'_1, beta'_2) with eigenvalues (-1, +1)."""
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([c, -s]), np.array([s, c])


def s_theta_symbolic():
    th = sp.symbols("theta", real=True)
    mat = sp.Matrix([[-sp.cos(th), sp.sin(th)], [sp.sin(th), sp.cos(th)]])
    v1 = sp.Matrix([sp.cos(th / 2), -sp.sin(th / 2)])
    v2 = sp.Matrix([sp.sin(th / 2), sp.cos(th / 2)])
    return th, mat, v1, v2


def rotated_frame(R) -> tuple:
    """Frame L^R_k = sum_j R[k, j] L_j for a rotation R in SO(3), as 4x4 coefficient matrices.

    Provided as a hook only; no physical meaning is attached to the rotated frame.
    """
    R = np.asarray(R, float)
    if R.shape != (3, 3) or not np.allclose(R @ R.T, np.eye(3), atol=1e-12) or np.linalg.det(R) < 0:
        raise ValidationError("R must be a 3x3 rotation matrix")
    return tuple(sum(R[k, j] * L_MATRICES[j] for j in range(3)) for k in range(3))


@dataclass(frozen=True)
class SpinState:
    """Coordinates of a vector of a complex eigenspace in a named basis."""

    components: tuple
    basis_tag: str = "beta"

    def __post_init__(self):
        comps = tuple(complex(c) for c in self.components)
        if not all(math.isfinite(c.real) and math.isfinite(c.imag) for c in comps):
            raise ValidationError("spin state components must be finite")
        object.__setattr__(self, "components", comps)

    @property
    def norm(self) -> float:
        return math.sqrt(sum(abs(c) ** 2 for c in self.components))

    def normalized(self) -> "SpinState":
        n = self.norm
        if n == 0:
            raise ValidationError("zero spin state")
        return SpinState(tuple(c / n for c in self.components), self.basis_tag)

    def as_array(self) -> np.ndarray:
        return np.array(self.components, dtype=complex)
