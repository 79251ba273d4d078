"""Oscillating modes, their Klein-Gordon and Schrodinger-type equations, and 1+1D solvers.

Conventions: Theta coordinates are (t, x1, x2, x3) with eps = (-1, 1, 1, 1);
``box = d_t^2 - sum d_k^2``; the geometers' Laplacian is ``Delta = -sum d_k^2``.
Fields are evaluated through *jets* (value, first and pure second partials
along the four Theta axes); jets come from sympy expressions (exact
derivatives), from callables (finite differences) or from periodic grids.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import sympy as sp

from . import _kernels
from .manifold import NumericalError, ValidationError
from .potentials import (CovectorPotential, Electromagnetic, EMSpin, Neutral, Newtonian,
                         ScalarPotential)

t_sym, x1_sym, x2_sym, x3_sym = THETA = sp.symbols("t x1 x2 x3", real=True)
u_sym = sp.Symbol("u", real=True)
EPS = np.array([-1.0, 1.0, 1.0, 1.0])


# --------------------------------------------------------------------------
# constants


def mass_frequency(S0: float, mu: float, lambda_eig: float) -> float:
    """M = sqrt(S0 + mu - lambda)."""
    m2 = S0 + mu - lambda_eig
    if m2 < 0:
        raise ValidationError(f"mass undefined: S0 + mu - lambda = {m2} < 0")
    return math.sqrt(m2)


def S_constant(n: int, S_g0: float) -> float:
    """S = (n - 2) / (4 (n - 1)) * S_g0."""
    if n < 3:
        raise ValidationError("n must be at least 3")
    return (n - 2) / (4 * (n - 1)) * S_g0


def is_charge_quantized(Q: float, delta: float, tol: float = 1e-12) -> bool:
    """Q+ must be an integer multiple of 1/delta."""
    k = abs(Q) * delta
    return abs(k - round(k)) <= tol * max(1.0, k)


def pseudo_mass(nu: float, S: float) -> float:
    """K >= 0 with K^2 + nu + S = 0 (decaying mode e^{-Kt} a0)."""
    k2 = -(nu + S)
    if k2 < 0:
        raise ValidationError("no real pseudo-mass: nu + S > 0")
    return math.sqrt(k2)


# --------------------------------------------------------------------------
# modes


@dataclass(frozen=True)
class OscillatingMode:
    """a = (C cos(M't - lam.x + Qu) + C' sin(M't - lam.x + Qu)) * beta, with Delta_W beta = mu beta."""

    Mprime: float
    lam: tuple = (0.0, 0.0, 0.0)
    Q: float = 0.0
    C: float = 1.0
    Cprime: float = 0.0
    mu: Optional[float] = None
    S0: float = 0.0

    def __post_init__(self):
        lam = tuple(float(c) for c in self.lam)
        if len(lam) != 3:
            raise ValidationError("lam must have three components")
        object.__setattr__(self, "lam", lam)
        if self.Mprime < 0:
            raise ValidationError("M' must be nonnegative")
        k2 = sum(c * c for c in lam)
        if k2 > self.Mprime**2 * (1 + 1e-15):
            raise ValidationError("sum lam_k^2 must not exceed M'^2")
        m2 = self.Mprime**2 - k2
        if self.mu is None:
            object.__setattr__(self, "mu", m2 + self.Q**2 - self.S0)
        else:
            want = mass_frequency(self.S0, self.mu, self.Q**2) ** 2
            if abs(want - m2) > 1e-9 * max(1.0, self.Mprime**2):
                raise ValidationError(f"dispersion violated: M'^2 - |lam|^2 = {m2} but S0 + mu - Q^2 = {want}")

    @classmethod
    def moving(cls, M: float, v: Sequence[float], Q: float = 0.0, C: float = 1.0, Cprime: float = 0.0,
               S0: float = 0.0) -> "OscillatingMode":
        v = np.asarray(v, float)
        speed2 = float(v @ v)
        if speed2 >= 1:
            raise ValidationError("|v| must be below 1")
        Mp = M / math.sqrt(1 - speed2)
        return cls(Mp, tuple(Mp * v), Q, C, Cprime, None, S0)

    @property
    def M(self) -> float:
        return math.sqrt(max(self.Mprime**2 - sum(c * c for c in self.lam), 0.0))

    @property
    def velocity(self) -> np.ndarray:
        if self.Mprime == 0:
            raise ValidationError("velocity undefined for M' = 0")
        return np.asarray(self.lam) / self.Mprime

    def phase_expr(self):
        return self.Mprime * t_sym - sum(l * x for l, x in zip(self.lam, (x1_sym, x2_sym, x3_sym)))


def mode_function_a(mode: OscillatingMode) -> Callable:
    """a / beta as a function of (t, x, u); x has shape (..., 3)."""
    lam = np.asarray(mode.lam)

    def a(t, x, u):
        ph = mode.Mprime * np.asarray(t) - np.asarray(x) @ lam + mode.Q * np.asarray(u)
        return mode.C * np.cos(ph) + mode.Cprime * np.sin(ph)

    return a


@dataclass(frozen=True)
class Field:
    """Complex field on Theta, scalar or with components (last axis)."""

    expr: object = None
    fn: Optional[Callable] = None
    ncomp: int = 0

    def __call__(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, float))
        if self.expr is not None:
            return _eval_exprs(self.expr, pts)
        return np.asarray(self.fn(pts), complex)

    def jet(self, pts, h: float = 1e-3) -> "Jet":
        pts = np.atleast_2d(np.asarray(pts, float))
        if self.expr is not None:
            return jet_from_expr(self.expr, pts)
        return jet_from_callable(self.fn, pts, h)


def canonical_function(source, Qplus: Optional[float] = None, sign: int = 1) -> Field:
    """a_c = phi1 + i phi2 where a = phi1 cos(Q+ u) + phi2 sin(Q+ u) (conjugated when Q < 0).

    ``source`` is an OscillatingMode (exact expression) or a callable a(t, x, u)
    sampled at u = 0 and u = pi / (2 Q+).
    """
    if isinstance(source, OscillatingMode):
        mode = source
        ph = mode.phase_expr()
        if mode.Q == 0:
            return Field(mode.C * sp.cos(ph) + mode.Cprime * sp.sin(ph))
        expr = (mode.C + sp.I * mode.Cprime) * sp.exp(-sp.I * ph)
        return Field(expr if mode.Q > 0 else sp.conjugate(expr))
    if Qplus is None or Qplus < 0:
        raise ValidationError("sampled fields need Qplus >= 0")
    a = source

    def ac(pts):
        t, x = pts[:, 0], pts[:, 1:4]
        phi1 = np.asarray(a(t, x, np.zeros_like(t)), float)
        if Qplus == 0:
            return phi1.astype(complex)
        phi2 = np.asarray(a(t, x, np.full_like(t, math.pi / (2 * Qplus))), float)
        out = phi1 + 1j * phi2
        return out if sign >= 0 else np.conj(out)

    return Field(fn=ac)


@dataclass(frozen=True)
class StateFunction:
    psi: Field
    M: float
    Q: float

    def __call__(self, pts):
        return self.psi(pts)


def state_function(a_c: Field, M: float, sign_Q: int = 1) -> StateFunction:
    """Psi = e^{iMt} a_c (positive charge) or e^{iMt} conj(a_c) (negative)."""
    if M <= 0:
        raise ValidationError("state function undefined for massless modes")
    if a_c.expr is not None:
        base = a_c.expr if sign_Q >= 0 else _conj_expr(a_c.expr)
        if isinstance(base, (list, tuple)):
            return StateFunction(Field(tuple(sp.exp(sp.I * M * t_sym) * b for b in base), ncomp=len(base)), M, sign_Q)
        return StateFunction(Field(sp.exp(sp.I * M * t_sym) * base), M, sign_Q)

    def psi(pts):
        val = a_c(pts)
        val = val if sign_Q >= 0 else np.conj(val)
        ph = np.exp(1j * M * pts[:, 0])
        return val * (ph if val.ndim == 1 else ph[:, None])

    return StateFunction(Field(fn=psi, ncomp=a_c.ncomp), M, sign_Q)


def _conj_expr(expr):
    if isinstance(expr, (list, tuple)):
        return tuple(sp.conjugate(e) for e in expr)
    return sp.conjugate(expr)


# --------------------------------------------------------------------------
# jets


@dataclass
class Jet:
    f: np.ndarray
    d1: np.ndarray  # (4, ...)
    d2: np.ndarray  # (4, ...) pure second partials

    @property
    def box(self):
        return self.d2[0] - self.d2[1:].sum(axis=0)

    @property
    def delta(self):
        return -self.d2[1:].sum(axis=0)


def _lambdify(expr):
    fn = sp.lambdify(THETA, expr, modules="numpy")

    def call(pts):
        out = fn(*(pts[:, i] for i in range(4)))
        return np.broadcast_to(np.asarray(out, complex), (pts.shape[0],))

    return call


def _eval_exprs(expr, pts):
    if isinstance(expr, (list, tuple)):
        return np.stack([_lambdify(e)(pts) for e in expr], axis=-1)
    return _lambdify(expr)(pts).copy()


def jet_from_expr(expr, pts) -> Jet:
    exprs = list(expr) if isinstance(expr, (list, tuple)) else [expr]
    f = [_lambdify(e)(pts) for e in exprs]
    d1 = [[_lambdify(sp.diff(e, v))(pts) for e in exprs] for v in THETA]
    d2 = [[_lambdify(sp.diff(e, v, 2))(pts) for e in exprs] for v in THETA]
    if isinstance(expr, (list, tuple)):
        return Jet(np.stack(f, -1), np.stack([np.stack(r, -1) for r in d1]), np.stack([np.stack(r, -1) for r in d2]))
    return Jet(f[0].copy(), np.stack([r[0] for r in d1]), np.stack([r[0] for r in d2]))


def jet_from_callable(fn, pts, h: float = 1e-3) -> Jet:
    """Fourth-order central differences."""
    f0 = np.asarray(fn(pts), complex)
    d1, d2 = [], []
    for i in range(4):
        e = np.zeros(4)
        e[i] = h
        fp1, fm1 = np.asarray(fn(pts + e), complex), np.asarray(fn(pts - e), complex)
        fp2, fm2 = np.asarray(fn(pts + 2 * e), complex), np.asarray(fn(pts - 2 * e), complex)
        d1.append((fm2 - 8 * fm1 + 8 * fp1 - fp2) / (12 * h))
        d2.append((-fm2 + 16 * fm1 - 30 * f0 + 16 * fp1 - fp2) / (12 * h * h))
    return Jet(f0, np.stack(d1), np.stack(d2))


@dataclass(frozen=True)
class Grid:
    """Periodic grid over a subset of the Theta axes; absent axes are held at zero."""

    axes: tuple
    coords: tuple

    def __post_init__(self):
        if len(self.axes) != len(self.coords) or len(set(self.axes)) != len(self.axes):
            raise ValidationError("axes and coords must match and be distinct")
        if any(a not in range(4) for a in self.axes):
            raise ValidationError("axes index the Theta coordinates 0..3")
        object.__setattr__(self, "coords", tuple(np.asarray(c, float) for c in self.coords))

    @property
    def shape(self):
        return tuple(len(c) for c in self.coords)

    def spacing(self, k: int) -> float:
        c = self.coords[k]
        return float(c[1] - c[0])

    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*self.coords, indexing="ij")
        pts = np.zeros(self.shape + (4,))
        for a, m in zip(self.axes, mesh):
            pts[..., a] = m
        return pts.reshape(-1, 4)

    def sample(self, field_: Field) -> np.ndarray:
        vals = field_(self.points())
        return vals.reshape(self.shape + vals.shape[1:])


def jet_from_grid(values: np.ndarray, grid: Grid, method: str = "fd2") -> Jet:
    """Derivatives on a periodic grid: ``fd2`` (3-point stencils) or ``spectral`` (FFT)."""
    values = np.asarray(values, complex)
    d1 = np.zeros((4,) + values.shape, complex)
    d2 = np.zeros((4,) + values.shape, complex)
    for k, a in enumerate(grid.axes):
        n = grid.shape[k]
        h = grid.spacing(k)
        if method == "fd2":
            if n < 3:
                raise ValidationError(f"grid too small for stencil along axis {a}: {n} < 3")
            up, dn = np.roll(values, -1, axis=k), np.roll(values, 1, axis=k)
            d1[a] = (up - dn) / (2 * h)
            d2[a] = (up - 2 * values + dn) / (h * h)
        elif method == "spectral":
            kk = 2 * np.pi * np.fft.fftfreq(n, d=h)
            shape = [1] * values.ndim
            shape[k] = n
            kk = kk.reshape(shape)
            fh = np.fft.fft(values, axis=k)
            d1[a] = np.fft.ifft(1j * kk * fh, axis=k)
            d2[a] = np.fft.ifft(-(kk**2) * fh, axis=k)
        else:
            raise ValidationError(f"unknown derivative method {method!r}")
    return Jet(values, d1, d2)


# --------------------------------------------------------------------------
# equations


@dataclass(frozen=True)
class SpinCoupling:
    """Spin endomorphisms hatS_k as numeric matrices plus the field B, varrho and rho."""

    hatS: tuple
    B: tuple = (0.0, 0.0, 1.0)
    varrho: float = 1.0
    rho: float = 1.0

    @classmethod
    def from_spec(cls, spec: EMSpin, hatS) -> "SpinCoupling":
        return cls(tuple(np.asarray(m, complex) for m in hatS), tuple(spec.B), spec.varrho, spec.cell.rho)

    def apply(self, vec: np.ndarray) -> np.ndarray:
        out = np.zeros_like(vec)
        for b, m in zip(self.B, self.hatS):
            if b:
                out = out + b * (vec @ np.asarray(m).T)
        return out

    @property
    def B2(self) -> float:
        return float(np.dot(self.B, self.B))


def _scalar_on(v: ScalarPotential, pts) -> np.ndarray:
    return np.array([v.value(p[1:4]) for p in pts], float)


def _covector_on(ups: CovectorPotential, pts):
    """Raised Upsilon^j and the divergence-like sum over j of eps_j d_j Upsilon^j (per point)."""
    up = np.empty((len(pts), 4))
    div = np.empty(len(pts))
    for n, p in enumerate(pts):
        low = np.asarray(ups.value(p), float)
        jac = np.asarray(ups.jacobian(p), float)
        up[n] = EPS * low
        div[n] = float(np.sum(EPS * EPS * np.diag(jac)))  # sum_j eps_j d_j (eps_j U_j)
    return up, div


def _bcast(arr, like):
    arr = np.asarray(arr)
    return arr.reshape(arr.shape + (1,) * (like.ndim - arr.ndim))


def em_operator(jet: Jet, up: np.ndarray, div: np.ndarray, q: float) -> np.ndarray:
    """sum_j eps_j (i d_j + q U^j)^2 f, expanded with the product rule."""
    out = np.zeros_like(jet.f)
    for j in range(4):
        uj = _bcast(up[:, j], jet.f)
        out = out + EPS[j] * (-jet.d2[j] + 2j * q * uj * jet.d1[j] + q * q * uj * uj * jet.f)
    out = out + 1j * q * _bcast(div, jet.f) * jet.f
    return out


def kg_residual(field_, potential, M: float, Qplus: float = 0.0, spin: Optional[SpinCoupling] = None,
                points=None, grid: Optional[Grid] = None, method: str = "fd2", h: float = 1e-3,
                reduce: bool = True):
    """Residual of the Klein-Gordon equation obeyed by a_c in the given potential.

    neutral: box a + M^2 a; newtonian: box a + M^2 a - 2 v d_t^2 a;
    electromagnetic: sum_j eps_j (i d_j + Q+ U^j)^2 a + M^2 a; the spin variant
    adds -2 varrho Q+ sum_k B^k hatS_k a + Q+^2 varrho^2 rho^2 |B|^2 a.
    """
    jet, pts = _field_jet(field_, points, grid, method, h)
    res = _kg_from_jet(jet, pts, potential, M, Qplus, spin)
    return float(np.max(np.abs(res))) if reduce else res


def _field_jet(field_, points, grid, method, h):
    if grid is not None:
        if isinstance(field_, Field):
            values = grid.sample(field_)
        else:
            values = np.asarray(field_, complex)
        jet = jet_from_grid(values, grid, method)
        n = int(np.prod(grid.shape))
        tail = values.shape[len(grid.shape):]
        jet = Jet(jet.f.reshape((n,) + tail), jet.d1.reshape((4, n) + tail), jet.d2.reshape((4, n) + tail))
        return jet, grid.points()
    if points is None:
        raise ValidationError("give sample points or a grid")
    pts = np.atleast_2d(np.asarray(points, float))
    if isinstance(field_, OscillatingMode):
        field_ = canonical_function(field_)
    if not isinstance(field_, Field):
        field_ = Field(fn=field_) if callable(field_) else Field(field_)
    return field_.jet(pts, h), pts


def _kg_from_jet(jet: Jet, pts, potential, M, Qplus, spin):
    kind = getattr(potential, "kind", "neutral") if potential is not None else "neutral"
    if kind == "neutral":
        return jet.box + M * M * jet.f
    if kind == "newtonian":
        v = _bcast(_scalar_on(potential.v, pts), jet.f)
        return jet.box + M * M * jet.f - 2 * v * jet.d2[0]
    if kind in ("electromagnetic", "em_spin"):
        up, div = _covector_on(potential.upsilon, pts)
        res = em_operator(jet, up, div, Qplus) + M * M * jet.f
        if kind == "em_spin" or spin is not None:
            if spin is None:
                raise ValidationError("spin potential needs a SpinCoupling (basis matrices)")
            if jet.f.ndim < 2:
                raise ValidationError("spin branch needs a component-valued field")
            res = res - 2 * spin.varrho * Qplus * spin.apply(jet.f) + (Qplus * spin.varrho * spin.rho) ** 2 * spin.B2 * jet.f
        return res
    raise ValidationError(f"unsupported potential kind {kind!r}")


def pauli_rhs(psi, potential, M: float, Q: float = 0.0, spin: Optional[SpinCoupling] = None,
              points=None, grid: Optional[Grid] = None, method: str = "fd2", h: float = 1e-3):
    """(rhs, lhs) of the state-function equations; the residual is lhs - rhs.

    lhs = 2iM d_t Psi. rhs per potential:
    neutral: Delta Psi + d_t^2 Psi;
    newtonian: Delta Psi + 2vM^2 Psi + (1 - 2v) d_t^2 Psi + 4iMv d_t Psi;
    electromagnetic: sum_j eps_j (i d_j + Q U^j)^2 Psi - 2MQ U^0 Psi, plus
    -2 varrho Q sum B^k hatS_k Psi + Q^2 varrho^2 rho^2 |B|^2 Psi with spin.
    """
    if isinstance(psi, StateFunction):
        psi = psi.psi
    jet, pts = _field_jet(psi, points, grid, method, h)
    lhs = 2j * M * jet.d1[0]
    kind = getattr(potential, "kind", "neutral") if potential is not None else "neutral"
    if kind == "neutral":
        rhs = jet.delta + jet.d2[0]
    elif kind == "newtonian":
        v = _bcast(_scalar_on(potential.v, pts), jet.f)
        rhs = jet.delta + 2 * v * M * M * jet.f + (1 - 2 * v) * jet.d2[0] + 4j * M * v * jet.d1[0]
    elif kind in ("electromagnetic", "em_spin"):
        up, div = _covector_on(potential.upsilon, pts)
        rhs = em_operator(jet, up, div, Q) - 2 * M * Q * _bcast(up[:, 0], jet.f) * jet.f
        if kind == "em_spin" or spin is not None:
            if spin is None:
                raise ValidationError("spin potential needs a SpinCoupling (basis matrices)")
            rhs = rhs - 2 * spin.varrho * Q * spin.apply(jet.f) + (Q * spin.varrho * spin.rho) ** 2 * spin.B2 * jet.f
    else:
        raise ValidationError(f"unsupported potential kind {kind!r}")
    return rhs, lhs


def pauli_residual(psi, potential, M, Q=0.0, **kw) -> float:
    rhs, lhs = pauli_rhs(psi, potential, M, Q, **kw)
    return float(np.max(np.abs(lhs - rhs)))


def schrodinger_residual(psi, M: float, points=None, grid=None, method="fd2", h=1e-3, v=None) -> float:
    """2iM d_t Psi - Delta Psi (- 2 v M^2 Psi)."""
    if isinstance(psi, StateFunction):
        psi = psi.psi
    jet, pts = _field_jet(psi, points, grid, method, h)
    res = 2j * M * jet.d1[0] - jet.delta
    if v is not None:
        res = res - 2 * _bcast(_scalar_on(v, pts), jet.f) * M * M * jet.f
    return float(np.max(np.abs(res)))


def substitution_defect(psi_values: np.ndarray, grid: Grid, potential, M: float, Q: float = 0.0,
                        method: str = "spectral") -> float:
    """max |res_Psi + e^{iMt} res_{a_c}| with a_c = e^{-iMt} Psi, both evaluated on the grid.

    The two residuals differ exactly by the factor -e^{iMt}; with spectral
    derivatives and M commensurate with the time period this holds to rounding.
    """
    if 0 not in grid.axes:
        raise ValidationError("grid must include the time axis")
    pts = grid.points()
    tt = pts[:, 0].reshape(grid.shape)
    psi_values = np.asarray(psi_values, complex)
    phase = np.exp(-1j * M * tt)
    phase = _bcast(phase, psi_values)
    ac = psi_values * phase
    rhs, lhs = pauli_rhs(psi_values, potential, M, Q, grid=grid, method=method)
    res_psi = (lhs - rhs).reshape(psi_values.shape)
    res_ac = kg_residual(ac, potential, M, abs(Q), grid=grid, method=method, reduce=False).reshape(psi_values.shape)
    return float(np.max(np.abs(res_psi + res_ac / phase)))


def plane_wave_fd_bound(omega: float, k: Sequence[float], M: float, h_t: float, h_x: float, amp: float = 1.0) -> float:
    """Truncation bound of the 3-point stencils in the neutral Psi equation for exp(-i(omega t - k.x))."""
    k = np.asarray(k, float)
    # |D2 - d^2| <= s^4 h^2 / 12 and |D1 - d| <= s^3 h^2 / 6 for a mode of wavenumber s
    return amp * (np.sum(k**4) * h_x**2 / 12 + omega**4 * h_t**2 / 12 + 2 * M * omega**3 * h_t**2 / 6)


# --------------------------------------------------------------------------
# epsilon-approximations


@dataclass(frozen=True)
class EpsilonReport:
    ratio_dt: float
    ratio_dtt: float
    sup_v: float
    sup_qu0: float
    sup_qu_space: float
    sup_qdtu0: float
    eps_psi: float
    eps_pot: float
    skipped: int
    psi_ok: bool
    pot_ok: bool

    def to_dict(self):
        return dict(self.__dict__)


def epsilon_diagnostics(psi, M: float, potential=None, Q: float = 0.0, points=None, grid=None,
                        method: str = "fd2", h: float = 1e-3, floor: float = 1e-12,
                        eps_max: float = 1.0) -> EpsilonReport:
    """Measured smallness ratios and the smallest eps compatible with them."""
    if M <= 0:
        raise ValidationError("M must be positive")
    if isinstance(psi, StateFunction):
        psi = psi.psi
    jet, pts = _field_jet(psi, points, grid, method, h)
    mag = np.abs(jet.f)
    if mag.ndim > 1:
        mag = np.linalg.norm(jet.f, axis=-1)
        dt = np.linalg.norm(jet.d1[0], axis=-1)
        dtt = np.linalg.norm(jet.d2[0], axis=-1)
    else:
        dt, dtt = np.abs(jet.d1[0]), np.abs(jet.d2[0])
    keep = mag >= floor
    skipped = int(np.count_nonzero(~keep))
    r1 = float(np.max(dt[keep] / (M * mag[keep]))) if keep.any() else 0.0
    r2 = float(np.max(dtt[keep] / (M * M * mag[keep]))) if keep.any() else 0.0
    sup_v = sup_u0 = sup_us = sup_du0 = 0.0
    kind = getattr(potential, "kind", "neutral") if potential is not None else "neutral"
    if kind == "newtonian":
        sup_v = float(np.max(np.abs(_scalar_on(potential.v, pts))))
    elif kind in ("electromagnetic", "em_spin"):
        for p in pts:
            low = np.asarray(potential.upsilon.value(p), float)
            jac = np.asarray(potential.upsilon.jacobian(p), float)
            sup_u0 = max(sup_u0, abs(Q * low[0]) / M)
            sup_us = max(sup_us, float(np.max(np.abs(Q * low[1:]))) / M)
            sup_du0 = max(sup_du0, abs(Q * jac[0, 0]) / M**2)
    eps_psi = max(math.sqrt(r1), r2 ** 0.25)
    eps_pot = max(math.sqrt(sup_v), math.sqrt(sup_u0), sup_us, sup_du0 ** 0.25)
    return EpsilonReport(r1, r2, sup_v, sup_u0, sup_us, sup_du0, eps_psi, eps_pot, skipped,
                         eps_psi < eps_max, eps_pot < eps_max)


def plane_wave_time_ratio(v: float) -> float:
    """|d_t Psi| / (M |Psi|) = 1/sqrt(1 - v^2) - 1 for a mode moving at speed v."""
    return 1.0 / math.sqrt(1.0 - v * v) - 1.0


# --------------------------------------------------------------------------
# relative charge


@dataclass(frozen=True)
class ChargeReport:
    vector: tuple
    norm2: float
    kind: str
    sign: int


def charge_vector(a: Callable, point, Qplus: float, delta: float = 1.0, n_u: int = 64,
                  h: float = 1e-5, tol: float = 1e-9) -> ChargeReport:
    """Average over u in S1(delta) of (d_u a) grad a, grad a = (d_0 a) d_0 - sum_k (d_k a) d_k.

    The average is normalised by the circle length (the W factor is taken as 1).
    """
    point = np.asarray(point, float)
    us = np.arange(n_u) * (2 * math.pi * delta / n_u)
    vec = np.zeros(4)
    for u in us:
        def f(p, du=0.0):
            return float(a(p[0], p[1:4], u + du))

        da_du = (f(point, h) - f(point, -h)) / (2 * h)
        grad = np.empty(4)
        for i in range(4):
            e = np.zeros(4)
            e[i] = h
            grad[i] = (f(point + e) - f(point - e)) / (2 * h)
        grad[1:] *= -1
        vec += da_du * grad
    vec /= n_u
    norm2 = float(-vec[0] ** 2 + vec[1:] @ vec[1:])
    scale = max(float(vec @ vec), 1e-300)
    if norm2 < -tol * scale:
        kind = "timelike"
    elif norm2 > tol * scale:
        kind = "spacelike"
    else:
        kind = "null"
    sign = int(np.sign(vec[0])) if kind == "timelike" else 0
    return ChargeReport(tuple(vec), norm2, kind, sign)


# --------------------------------------------------------------------------
# 1+1D evolution


@dataclass
class Evolution:
    t: np.ndarray
    x: np.ndarray
    psi: np.ndarray  # (n_snapshots, nx)
    norm: np.ndarray

    @property
    def norm_drift(self) -> float:
        return float(np.max(np.abs(self.norm - self.norm[0])) / max(self.norm[0], 1e-300))

    def to_rows(self):
        rows = []
        for i, t in enumerate(self.t):
            for j, x in enumerate(self.x):
                rows.append((float(t), float(x), float(self.psi[i, j].real), float(self.psi[i, j].imag)))
        return rows


def _potential_on_line(potential, x: np.ndarray) -> np.ndarray:
    if potential is None:
        return np.zeros_like(x)
    if isinstance(potential, Newtonian):
        potential = potential.v
    if isinstance(potential, ScalarPotential):
        return np.array([potential.value(np.array([xi, 0.0, 0.0])) for xi in x])
    if isinstance(potential, Neutral):
        return np.zeros_like(x)
    arr = np.asarray(potential, float)
    if arr.shape != x.shape:
        raise ValidationError("potential array must match the grid")
    return arr


def leapfrog_branch_start(psi0: np.ndarray, M: float, dx: float, dt: float) -> np.ndarray:
    """Second level for the leapfrog scheme that excites only the slow (Schrodinger-like) root.

    Per Fourier mode the scheme has two amplification factors z; the one
    near 1 is selected so the start carries no spurious fast oscillation.
    """
    n = psi0.shape[0]
    kap = 2 * np.pi * np.fft.fftfreq(n, d=dx)
    lam = (4 / dx**2) * np.sin(kap * dx / 2) ** 2
    # (z - 2 + 1/z) = i M dt (z - 1/z) - dt^2 lam  =>  (1 - iMdt) z^2 - (2 - dt^2 lam) z + (1 + iMdt) = 0
    a = 1 - 1j * M * dt
    b = -(2 - dt * dt * lam)
    c = 1 + 1j * M * dt
    disc = np.sqrt(b * b - 4 * a * c + 0j)
    z1, z2 = (-b + disc) / (2 * a), (-b - disc) / (2 * a)
    z = np.where(np.abs(z1 - 1) < np.abs(z2 - 1), z1, z2)
    return np.fft.ifft(z * np.fft.fft(psi0))


def kg_evolve_1plus1(psi0, dpsi0, x, M: float, dt: float, steps: int, potential=None, stride: int = 0,
                     psi1=None) -> Evolution:
    """Leapfrog evolution of 2iM Psi_t = -Psi_xx + 2vM^2 Psi + (1 - 2v) Psi_tt + 4iMv Psi_t on a periodic line.

    The first step uses ``psi1`` when given, otherwise a second-order Taylor
    step built from ``dpsi0`` and the equation.
    """
    x = np.asarray(x, float)
    dx = float(x[1] - x[0])
    if dt <= 0 or dt > 0.5 * dx:
        raise ValidationError(f"CFL violated: need 0 < dt <= 0.5 dx = {0.5 * dx}")
    if steps < 1:
        raise ValidationError("steps must be positive")
    psi0 = np.asarray(psi0, complex)
    v = _potential_on_line(potential, x)
    if np.any(1 - 2 * v <= 0):
        raise NumericalError("1 - 2v must stay positive")
    if psi1 is None:
        dpsi0 = np.asarray(dpsi0, complex)
        lap = (np.roll(psi0, -1) - 2 * psi0 + np.roll(psi0, 1)) / dx**2
        psitt = 2j * M * dpsi0 + (lap - 2 * v * M * M * psi0) / (1 - 2 * v)
        psi1 = psi0 + dt * dpsi0 + 0.5 * dt * dt * psitt
    psi1 = np.asarray(psi1, complex)
    stride = stride or steps
    snaps, times = [psi0.copy()], [0.0]
    prev, cur = psi0, psi1
    done = 1
    if stride == 1:
        snaps.append(cur.copy())
        times.append(dt)
    while done < steps:
        chunk = min(stride - done % stride if done % stride else stride, steps - done)
        prev, cur = _kernels.ACTIVE.kg_leapfrog(prev, cur, v, M, dx, dt, chunk)
        done += chunk
        if done % stride == 0 or done == steps:
            snaps.append(cur.copy())
            times.append(done * dt)
    psi = np.array(snaps)
    norm = np.sqrt(np.sum(np.abs(psi) ** 2, axis=1) * dx)
    if not np.all(np.isfinite(norm)):
        raise NumericalError("evolution blew up")
    return Evolution(np.array(times), x, psi, norm)


def schrodinger_evolve_1plus1(psi0, x, M: float, dt: float, steps: int, potential=None, stride: int = 0) -> Evolution:
    """Crank-Nicolson for 2iM Psi_t = -Psi_xx + 2vM^2 Psi on a periodic line."""
    x = np.asarray(x, float)
    dx = float(x[1] - x[0])
    if steps < 1:
        raise ValidationError("steps must be positive")
    v = _potential_on_line(potential, x)
    stride = stride or steps
    psi = np.asarray(psi0, complex)
    snaps, times = [psi.copy()], [0.0]
    done = 0
    while done < steps:
        chunk = min(stride, steps - done)
        psi = _kernels.ACTIVE.cn_schrodinger(psi, v, M, dx, dt, chunk)
        done += chunk
        snaps.append(psi.copy())
        times.append(done * dt)
    arr = np.array(snaps)
    norm = np.sqrt(np.sum(np.abs(arr) ** 2, axis=1) * dx)
    return Evolution(np.array(times), x, arr, norm)


@dataclass(frozen=True)
class PacketComparison:
    v: float
    k: float
    T: float
    steps: int
    gap: float


def packet_gap(v: float, M: float = 1.0, sigma: float = 200.0, dx: float = 1.0, dt: float = 0.5,
               length: Optional[float] = None) -> PacketComparison:
    """Relative L2 gap between the full 1+1D equation and the Schrodinger equation.

    A Gaussian packet of mean wavenumber k = Mv / sqrt(1 - v^2) is evolved by
    both solvers up to the time T at which the Schrodinger phase k^2 T / (2M)
    reaches 2 pi, so the gap measures the relative size of the dropped term.
    """
    if not 0 < v < 1:
        raise ValidationError("v must lie in (0, 1)")
    k = M * v / math.sqrt(1 - v * v)
    T = 2 * math.pi / (k * k / (2 * M))
    travel = k / M * T
    if length is None:
        length = travel + 16 * sigma
    n = int(round(length / dx))
    n += n % 2
    x = (np.arange(n) - n // 2) * dx
    x0 = -0.5 * travel
    psi0 = np.exp(-((x - x0) ** 2) / (4 * sigma**2) + 1j * k * x).astype(complex)
    steps = int(round(T / dt))
    psi1 = leapfrog_branch_start(psi0, M, dx, dt)
    full = kg_evolve_1plus1(psi0, None, x, M, dt, steps, psi1=psi1)
    schro = schrodinger_evolve_1plus1(psi0, x, M, dt, steps)
    a, b = full.psi[-1], schro.psi[-1]
    gap = float(np.linalg.norm(a - b) / np.linalg.norm(b))
    return PacketComparison(v, k, steps * dt, steps, gap)


def plane_wave_phase_velocity(k_index: int = 2, n: int = 256, dx: float = 0.1, M: float = 1.0,
                              dt: Optional[float] = None, steps: int = 1000):
    """Measured and exact phase velocity of a discrete plane wave after ``steps`` leapfrog steps.

    Returns (measured, exact) where exact uses omega = sqrt(M^2 + k^2) - M.
    """
    dt = dt or 0.5 * dx
    x = np.arange(n) * dx
    k = 2 * np.pi * k_index / (n * dx)
    omega = math.sqrt(M * M + k * k) - M
    psi0 = np.exp(1j * k * x)
    psi1 = np.exp(1j * (k * x - omega * dt))
    ev = kg_evolve_1plus1(psi0, None, x, M, dt, steps, psi1=psi1, stride=1)
    ph = np.unwrap(np.angle(ev.psi[:, 0]))
    slope = np.polyfit(ev.t, ph, 1)[0]
    return -slope / k, omega / k


# --------------------------------------------------------------------------
# misc


@dataclass(frozen=True)
class LinearizationTable:
    eps: float
    t: np.ndarray
    y: np.ndarray
    y1: np.ndarray

    @property
    def max_deviation(self) -> float:
        return float(np.max(np.abs(self.y1 / self.y - 1)))


def linearization_demo(eps: float, n: int = 201) -> LinearizationTable:
    """y' - y = y^2, y(0) = eps, against its linearisation y1 = eps e^t on [0, 1]."""
    if not 0 < eps < 0.1:
        raise ValidationError("eps must lie in (0, 0.1)")
    t = np.linspace(0.0, 1.0, n)
    et = np.exp(t)
    y = eps * et / (1 + eps * (1 - et))
    return LinearizationTable(eps, t, y, eps * et)


def dalembert_expr(f=None, g=None):
    """f(t - x1) + g(t + x1), a solution of the massless equation box a = 0."""
    s = sp.Symbol("s", real=True)
    f = f or sp.exp(-(s**2))
    g = g or sp.sin(s)
    return f.subs(s, t_sym - x1_sym) + g.subs(s, t_sym + x1_sym)


def decaying_mode_expr(K: float, lam: Sequence[float], Q: float, u: float = 0.0, C: float = 1.0):
    """e^{-Kt} C cos(Qu - lam.x) at a fixed u (the W factor beta is implicit)."""
    lam = [sp.nsimplify(c) for c in lam]
    return C * sp.exp(-K * t_sym) * sp.cos(Q * u - lam[0] * x1_sym - lam[1] * x2_sym - lam[2] * x3_sym)


def decaying_mode_residual(K: float, lam: Sequence[float], Q: float, mu: float, S: float, points) -> float:
    """max |(box_cell + S) a| for a = e^{-Kt} C cos(Qu - lam.x) beta, Delta_W beta = mu beta.

    On the cell box = d_t^2 - sum d_k^2 + d_u^2 + Delta_W; the u and W parts act
    on this a as multiplication by -Q^2 and mu.
    """
    rng_u = np.linspace(0.0, 2 * math.pi, 5)
    worst = 0.0
    for u in rng_u:
        expr = decaying_mode_expr(K, lam, Q, u)
        jet = jet_from_expr(expr, np.atleast_2d(points))
        res = jet.box + (-Q * Q + mu + S) * jet.f
        worst = max(worst, float(np.max(np.abs(res))))
    return worst
