"""Neutral metric g0 and the nilpotent active potentials built on it.

Chart conventions:

* full chart ``(t, x1, x2, x3, u, w)``: Minkowski on Theta, ``-du^2`` on the
  S1 factor and ``+dw^2`` on an extra flat circle; ``X1_flat = dt + dw`` and
  ``X2_flat = du + dw``.
* fluid chart ``(t, x1, x2, x3, w)`` with ``g0' = diag(-1, 1, 1, 1, 1)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .manifold import Cell, MetricField, ValidationError, constant_metric, fd_partial

T, X1, X2, X3, U, W = range(6)
G0_FULL = np.diag([-1.0, 1.0, 1.0, 1.0, -1.0, 1.0])
G0_FLUID = np.diag([-1.0, 1.0, 1.0, 1.0, 1.0])
X1_FLAT = np.array([1.0, 0.0, 0.0, 0.0, 0.0, 1.0])
X2_FLAT = np.array([0.0, 0.0, 0.0, 0.0, 1.0, 1.0])
X0 = np.array([1.0, 0.0, 0.0, 0.0, 0.0, 0.0])
Y = np.array([0.0, 0.0, 0.0, 0.0, 1.0, 0.0])
FLUID_X1_FLAT = np.array([1.0, 0.0, 0.0, 0.0, 1.0])


# --------------------------------------------------------------------------
# scalar potentials v(x1, x2, x3)


class ScalarPotential:
    """v on the spatial factor. Subclasses supply closed-form derivatives."""

    def value(self, x):
        raise NotImplementedError

    def grad(self, x):
        x = np.asarray(x, float)
        return np.array([fd_partial(self.value, x, k, 1, 1e-4) for k in range(3)])

    def hessian(self, x):
        x = np.asarray(x, float)
        return np.array([[fd_partial(self.value, x, i, 2, 1e-4, j) for j in range(3)] for i in range(3)])

    def laplacian(self, x):
        """Flat-space sum of second partials (the analyst's sign)."""
        return float(np.trace(self.hessian(x)))

    def to_dict(self) -> dict:
        raise ValidationError(f"{type(self).__name__} is not serialisable")


@dataclass(frozen=True)
class PointMass(ScalarPotential):
    m: float = 1.0

    def value(self, x):
        return -self.m / np.linalg.norm(x)

    def grad(self, x):
        x = np.asarray(x, float)
        return self.m * x / np.linalg.norm(x) ** 3

    def hessian(self, x):
        x = np.asarray(x, float)
        r = np.linalg.norm(x)
        return self.m * (np.eye(3) / r**3 - 3.0 * np.outer(x, x) / r**5)

    def to_dict(self):
        return {"type": "point_mass", "m": self.m}


@dataclass(frozen=True)
class Quadratic(ScalarPotential):
    """v = 0.5 * sum(k_i x_i^2) + offset."""

    k: tuple = (1.0, 0.0, 0.0)
    offset: float = 0.0

    def value(self, x):
        x = np.asarray(x, float)
        return 0.5 * float(np.dot(self.k, x * x)) + self.offset

    def grad(self, x):
        return np.asarray(self.k, float) * np.asarray(x, float)

    def hessian(self, x):
        return np.diag(np.asarray(self.k, float))

    def to_dict(self):
        return {"type": "quadratic", "k": list(self.k), "offset": self.offset}


@dataclass(frozen=True)
class Linear(ScalarPotential):
    c: tuple = (1.0, 0.0, 0.0)
    offset: float = 0.0

    def value(self, x):
        return float(np.dot(self.c, np.asarray(x, float))) + self.offset

    def grad(self, x):
        return np.asarray(self.c, float).copy()

    def hessian(self, x):
        return np.zeros((3, 3))

    def to_dict(self):
        return {"type": "linear", "c": list(self.c), "offset": self.offset}


@dataclass(frozen=True)
class CallableScalar(ScalarPotential):
    fn: Callable = None
    grad_fn: Optional[Callable] = None

    def value(self, x):
        return float(self.fn(np.asarray(x, float)))

    def grad(self, x):
        if self.grad_fn is not None:
            return np.asarray(self.grad_fn(np.asarray(x, float)), float)
        return super().grad(x)


def is_harmonic(v: ScalarPotential, points, tol: float = 1e-8) -> bool:
    """Caller-side check of the harmonicity assumption on v."""
    return all(abs(v.laplacian(p)) <= tol for p in points)


# --------------------------------------------------------------------------
# electromagnetic covector potentials on Theta


class CovectorPotential:
    """Upsilon_flat on Theta = (t, x1, x2, x3)."""

    def value(self, p4):
        raise NotImplementedError

    def jacobian(self, p4):
        """J[i, j] = d_i Upsilon_j."""
        p4 = np.asarray(p4, float)
        return np.stack([fd_partial(self.value, p4, i, 1, 1e-4) for i in range(4)])

    def field_strength(self, p4):
        """F_ij = d_i U_j - d_j U_i."""
        jac = self.jacobian(p4)
        return jac - jac.T

    def to_dict(self) -> dict:
        raise ValidationError(f"{type(self).__name__} is not serialisable")


def field_tensor(E, B) -> np.ndarray:
    """Covariant F on Theta with F_0k = -E_k and F_ij = eps_ijk B_k.

    With this sign a positive K accelerates along E and feels v x B.
    """
    E = np.asarray(E, float)
    B = np.asarray(B, float)
    F = np.zeros((4, 4))
    for k in range(3):
        F[0, k + 1] = -E[k]
        F[k + 1, 0] = E[k]
    F[1, 2], F[2, 1] = B[2], -B[2]
    F[2, 3], F[3, 2] = B[0], -B[0]
    F[3, 1], F[1, 3] = B[1], -B[1]
    return F


@dataclass(frozen=True)
class UniformField(CovectorPotential):
    """Constant E and B in the symmetric gauge U_j = x^i F_ij / 2."""

    E: tuple = (0.0, 0.0, 0.0)
    B: tuple = (0.0, 0.0, 1.0)

    @property
    def F(self) -> np.ndarray:
        return field_tensor(self.E, self.B)

    def value(self, p4):
        return 0.5 * np.asarray(p4, float) @ self.F

    def jacobian(self, p4):
        return 0.5 * self.F

    def to_dict(self):
        return {"type": "uniform", "E": list(self.E), "B": list(self.B)}


@dataclass(frozen=True)
class ConstantCovector(CovectorPotential):
    """Constant Upsilon_flat; a pure gauge with F = 0."""

    components: tuple = (0.0, 0.2, 0.0, 0.0)

    def value(self, p4):
        return np.asarray(self.components, float).copy()

    def jacobian(self, p4):
        return np.zeros((4, 4))

    def to_dict(self):
        return {"type": "constant", "components": list(self.components)}


@dataclass(frozen=True)
class CallableCovector(CovectorPotential):
    fn: Callable = None
    jac_fn: Optional[Callable] = None

    def value(self, p4):
        return np.asarray(self.fn(np.asarray(p4, float)), float)

    def jacobian(self, p4):
        if self.jac_fn is not None:
            return np.asarray(self.jac_fn(np.asarray(p4, float)), float)
        return super().jacobian(p4)


# --------------------------------------------------------------------------
# potential specifications


@dataclass(frozen=True)
class Neutral:
    cell: Cell = field(default_factory=Cell)
    S0: float = 0.0
    kind: str = "neutral"


@dataclass(frozen=True)
class Newtonian:
    v: ScalarPotential
    cell: Cell = field(default_factory=Cell)
    S0: float = 0.0
    X1_flat: tuple = tuple(X1_FLAT)
    kind: str = "newtonian"

    def __post_init__(self):
        x = np.asarray(self.X1_flat, float)
        xs = np.linalg.solve(G0_FULL, x)
        checks = {
            "g0(X1,X1)=0": (x @ xs, 0.0),
            "g0(X1,Y)=0": (x @ Y, 0.0),
            "g0(X1,X0)=1": (x @ X0, 1.0),
        }
        for name, (got, want) in checks.items():
            if abs(got - want) > 1e-12:
                raise ValidationError(f"normalisation violated: {name} (got {got})")
        if np.any(x[1:4] != 0):
            raise ValidationError("X1 must not have spatial components (v only reads x1..x3)")


@dataclass(frozen=True)
class Electromagnetic:
    upsilon: CovectorPotential
    cell: Cell = field(default_factory=Cell)
    S0: float = 0.0
    X2_flat: tuple = tuple(X2_FLAT)
    kind: str = "electromagnetic"

    def __post_init__(self):
        x = np.asarray(self.X2_flat, float)
        xs = np.linalg.solve(G0_FULL, x)
        if abs(x @ xs) > 1e-12:
            raise ValidationError("normalisation violated: g0(X2,X2)=0")
        if abs(x @ Y - 1.0) > 1e-12:
            raise ValidationError("normalisation violated: g0(X2,Y)=1")
        if np.any(x[:4] != 0):
            raise ValidationError("normalisation violated: g0(X2,Upsilon)=0 needs X2 off Theta")


@dataclass(frozen=True)
class EMSpin:
    """Electromagnetic potential plus the spin coupling varrho * sum B^k L_k."""

    upsilon: CovectorPotential
    B: tuple = (0.0, 0.0, 1.0)
    varrho: float = 1.0
    cell: Cell = field(default_factory=Cell)
    S0: float = 0.0
    kind: str = "em_spin"


@dataclass(frozen=True)
class StaticFluid:
    """g_Z = g0' + beta (x) X1_flat + X1_flat (x) beta, beta = a dx1 + b dx2 + c dx3.

    ``linear`` is the 3x3 matrix A with (a, b, c) = A @ (x1, x2, x3).
    """

    linear: tuple = ((0.0, -1.0, 0.0), (1.0, 0.0, 0.0), (0.0, 0.0, 0.0))
    kind: str = "static_fluid"

    @property
    def A(self) -> np.ndarray:
        return np.asarray(self.linear, float)

    @property
    def mu(self) -> float:
        """A^2 + B^2 + C^2 for the vorticity (A, B, C) = curl (a, b, c)."""
        curl = self.curl()
        return float(curl @ curl)

    def curl(self) -> np.ndarray:
        A = self.A
        return np.array([A[2, 1] - A[1, 2], A[0, 2] - A[2, 0], A[1, 0] - A[0, 1]])


# --------------------------------------------------------------------------
# metric assembly


def _embed_theta(vec4) -> np.ndarray:
    out = np.zeros(6)
    out[:4] = vec4
    return out


def perturbation(spec, p) -> np.ndarray:
    """h = g - g0 at p."""
    p = np.asarray(p, float)
    if isinstance(spec, Neutral):
        return np.zeros((6, 6))
    if isinstance(spec, Newtonian):
        x = np.asarray(spec.X1_flat, float)
        return -2.0 * spec.v.value(p[1:4]) * np.outer(x, x)
    if isinstance(spec, (Electromagnetic, EMSpin)):
        x = np.asarray(getattr(spec, "X2_flat", X2_FLAT), float)
        u = _embed_theta(spec.upsilon.value(p[:4]))
        return np.outer(u, x) + np.outer(x, u)
    if isinstance(spec, StaticFluid):
        beta = np.zeros(5)
        beta[1:4] = spec.A @ p[1:4]
        return np.outer(beta, FLUID_X1_FLAT) + np.outer(FLUID_X1_FLAT, beta)
    raise ValidationError(f"unsupported potential kind {type(spec).__name__}")


def background(spec) -> np.ndarray:
    return G0_FLUID if isinstance(spec, StaticFluid) else G0_FULL


def newtonian_T(spec: Newtonian, p) -> np.ndarray:
    """T^k_ij = -X^k (d_j v X_i + d_i v X_j) + (grad v)^k X_i X_j."""
    p = np.asarray(p, float)
    x_low = np.asarray(spec.X1_flat, float)
    x_up = np.linalg.solve(G0_FULL, x_low)
    dv = np.zeros(6)
    dv[1:4] = spec.v.grad(p[1:4])
    dv_up = np.linalg.solve(G0_FULL, dv)
    sym = np.outer(dv, x_low)
    sym = sym + sym.T
    return -np.einsum("k,ij->kij", x_up, sym) + np.einsum("k,ij->kij", dv_up, np.outer(x_low, x_low))


def em_T(spec, p) -> np.ndarray:
    """Closed-form Christoffel correction for g0 + sym(U (x) X2), X2 constant and null.

    2 T^k_ij = X^k (d_j U_i + d_i U_j) + X_i F_j^k + X_j F_i^k
               - U^l X^k (X_i F_jl + X_j F_il).
    """
    p = np.asarray(p, float)
    x_low = np.asarray(getattr(spec, "X2_flat", X2_FLAT), float)
    x_up = np.linalg.solve(G0_FULL, x_low)
    u_low = _embed_theta(spec.upsilon.value(p[:4]))
    u_up = np.linalg.solve(G0_FULL, u_low)
    jac = np.zeros((6, 6))
    jac[:4, :4] = spec.upsilon.jacobian(p[:4])
    F = jac - jac.T
    F_mixed = F @ np.linalg.inv(G0_FULL)  # F_i^k = F_il g0^lk
    sym_du = jac + jac.T
    term1 = np.einsum("k,ij->kij", x_up, sym_du)
    term2 = np.einsum("i,jk->kij", x_low, F_mixed) + np.einsum("j,ik->kij", x_low, F_mixed)
    uF = F @ u_up  # (F u)_j = F_jl U^l
    term3 = -np.einsum("k,ij->kij", x_up, np.outer(x_low, uF) + np.outer(uF, x_low))
    return 0.5 * (term1 + term2 + term3)


def _christoffel_from_dg(g: np.ndarray, dg: np.ndarray) -> np.ndarray:
    ginv = np.linalg.inv(g)
    low = 0.5 * (np.einsum("ijl->lij", dg) + np.einsum("jil->lij", dg) - np.einsum("lij->lij", dg))
    # low[l, i, j] = 0.5 (d_i g_jl + d_j g_il - d_l g_ij)
    return np.einsum("kl,lij->kij", ginv, low)


def build_metric(spec) -> MetricField:
    """Assemble g = g0 + h with closed-form first derivatives and Christoffels."""
    if isinstance(spec, Neutral):
        return constant_metric(G0_FULL, label="neutral")
    g0 = background(spec)
    sig = tuple(int(s) for s in np.diag(g0))
    d = g0.shape[0]

    def metric(p, _g0=g0):
        return _g0 + perturbation(spec, p)

    if isinstance(spec, Newtonian):
        x_low = np.asarray(spec.X1_flat, float)
        xx = np.outer(x_low, x_low)

        def dmetric(p):
            dg = np.zeros((6, 6, 6))
            grad = spec.v.grad(np.asarray(p, float)[1:4])
            for k in range(3):
                dg[k + 1] = -2.0 * grad[k] * xx
            return dg

        gamma = lambda p: newtonian_T(spec, p)  # noqa: E731 - g0 is flat
        label = "newtonian"
    elif isinstance(spec, (Electromagnetic, EMSpin)):
        x_low = np.asarray(getattr(spec, "X2_flat", X2_FLAT), float)

        def dmetric(p):
            dg = np.zeros((6, 6, 6))
            jac = spec.upsilon.jacobian(np.asarray(p, float)[:4])
            for k in range(4):
                row = _embed_theta(jac[k])
                dg[k] = np.outer(row, x_low) + np.outer(x_low, row)
            return dg

        gamma = lambda p: em_T(spec, p)  # noqa: E731
        label = "electromagnetic"
    elif isinstance(spec, StaticFluid):
        A = spec.A

        def dmetric(p):
            dg = np.zeros((5, 5, 5))
            for k in range(3):
                beta_k = np.zeros(5)
                beta_k[1:4] = A[:, k]
                dg[k + 1] = np.outer(beta_k, FLUID_X1_FLAT) + np.outer(FLUID_X1_FLAT, beta_k)
            return dg

        def gamma(p):
            return _christoffel_from_dg(metric(p), dmetric(p))

        label = "static_fluid"
    else:
        raise ValidationError(f"unsupported potential kind {type(spec).__name__}")
    return MetricField(eval=metric, signature=sig, label=label, dmetric=dmetric,
                       christoffel=gamma, meta={"spec": spec, "dim": d})


# --------------------------------------------------------------------------
# nilpotent algebra


def endomorphism(g0: np.ndarray, h: np.ndarray) -> np.ndarray:
    """The (1,1) tensor eh = g0^-1 h."""
    return np.linalg.solve(g0, h)


def neumann_inverse(g0_inv, h, p_index: int) -> np.ndarray:
    """Exact inverse of g0 + h from the terminating series sum (-g0^-1 h)^q g0^-1."""
    g0_inv = np.asarray(g0_inv, float)
    h = np.asarray(h, float)
    e = g0_inv @ h
    power = np.linalg.matrix_power(e, p_index)
    scale = max(1.0, float(np.max(np.abs(e))) ** p_index)
    if np.max(np.abs(power)) > 1e-12 * scale:
        raise ValidationError(f"perturbation is not nilpotent of index <= {p_index}")
    out = np.zeros_like(g0_inv)
    term = g0_inv.copy()
    for q in range(p_index):
        out += term
        term = -e @ term
    return out


def nilpotency_index(g0: np.ndarray, h: np.ndarray, tol: float = 1e-12) -> int:
    """Smallest q with ||eh^q|| <= tol (capped at the dimension)."""
    e = endomorphism(np.asarray(g0, float), np.asarray(h, float))
    d = e.shape[0]
    power = e.copy()
    for q in range(1, d + 1):
        if np.max(np.abs(power)) <= tol:
            return q
        power = power @ e
    return d


def det_invariance_check(spec, points) -> float:
    g0 = background(spec)
    base = np.linalg.det(g0)
    worst = 0.0
    for p in points:
        worst = max(worst, abs(np.linalg.det(g0 + perturbation(spec, p)) - base))
    return worst


def recover_X1(spec: Newtonian, p) -> np.ndarray:
    """X1 = -(1/2v) eh(X0), defined where v != 0."""
    v = spec.v.value(np.asarray(p, float)[1:4])
    if v == 0:
        raise ValidationError("X1 is not determined where v = 0")
    e = endomorphism(G0_FULL, perturbation(spec, p))
    return -(e @ X0) / (2.0 * v)


def recover_X2(spec, p) -> np.ndarray:
    """Recover X2 from h alone, following the two cases on g0(U, U)."""
    e = endomorphism(G0_FULL, perturbation(spec, p))
    u = e @ Y
    if np.max(np.abs(u)) == 0:
        raise ValidationError("X2 is not determined where Upsilon = 0")
    uu = u @ G0_FULL @ u
    if abs(uu) > 1e-12:
        return (e @ (e @ Y)) / uu
    hx0y = (e @ X0) @ G0_FULL @ Y
    if abs(hx0y) <= 1e-15:
        raise ValidationError("degenerate potential: h(X0, Y) = 0")
    return (e @ X0) / hx0y


# --------------------------------------------------------------------------
# JSON round trip


def _potential_from_dict(d: dict) -> ScalarPotential:
    kind = d.get("type")
    if kind == "point_mass":
        return PointMass(float(d.get("m", 1.0)))
    if kind == "quadratic":
        return Quadratic(tuple(float(c) for c in d.get("k", (1.0, 0.0, 0.0))), float(d.get("offset", 0.0)))
    if kind == "linear":
        return Linear(tuple(float(c) for c in d.get("c", (1.0, 0.0, 0.0))), float(d.get("offset", 0.0)))
    raise ValidationError(f"unknown scalar potential type {kind!r}")


def _covector_from_dict(d: dict) -> CovectorPotential:
    kind = d.get("type")
    if kind == "uniform":
        return UniformField(tuple(float(c) for c in d.get("E", (0, 0, 0))),
                            tuple(float(c) for c in d.get("B", (0, 0, 0))))
    if kind == "constant":
        return ConstantCovector(tuple(float(c) for c in d["components"]))
    raise ValidationError(f"unknown covector potential type {kind!r}")


_CELL_KEYS = {"delta", "rho", "v_dim", "v_eigenvalue", "v_scalar_curvature"}


def spec_from_dict(doc: dict):
    """Parse ``{kind, parameters, cell}``."""
    unknown = set(doc) - {"kind", "parameters", "cell"}
    if unknown:
        raise ValidationError(f"unknown keys in potential document: {sorted(unknown)}")
    kind = doc.get("kind")
    params = dict(doc.get("parameters", {}))
    cell_doc = dict(doc.get("cell", {}))
    bad = set(cell_doc) - _CELL_KEYS
    if bad:
        raise ValidationError(f"unknown cell keys: {sorted(bad)}")
    cell = Cell(**cell_doc)
    S0 = float(params.pop("S0", 0.0))
    if kind == "neutral":
        return Neutral(cell=cell, S0=S0)
    if kind == "newtonian":
        return Newtonian(v=_potential_from_dict(params["potential"]), cell=cell, S0=S0)
    if kind == "electromagnetic":
        return Electromagnetic(upsilon=_covector_from_dict(params["upsilon"]), cell=cell, S0=S0)
    if kind == "em_spin":
        return EMSpin(upsilon=_covector_from_dict(params["upsilon"]),
                      B=tuple(float(b) for b in params.get("B", (0, 0, 1))),
                      varrho=float(params.get("varrho", 1.0)), cell=cell, S0=S0)
    if kind == "static_fluid":
        return StaticFluid(linear=tuple(tuple(float(c) for c in row) for row in params["linear"]))
    raise ValidationError(f"unknown potential kind {kind!r}")


def spec_to_dict(spec) -> dict:
    cell = getattr(spec, "cell", None)
    cell_doc = {} if cell is None else {
        "delta": cell.delta, "rho": cell.rho, "v_dim": cell.v_dim,
        "v_eigenvalue": cell.v_eigenvalue, "v_scalar_curvature": cell.v_scalar_curvature,
    }
    if isinstance(spec, Neutral):
        params = {"S0": spec.S0}
    elif isinstance(spec, Newtonian):
        params = {"potential": spec.v.to_dict(), "S0": spec.S0}
    elif isinstance(spec, Electromagnetic):
        params = {"upsilon": spec.upsilon.to_dict(), "S0": spec.S0}
    elif isinstance(spec, EMSpin):
        params = {"upsilon": spec.upsilon.to_dict(), "B": list(spec.B), "varrho": spec.varrho, "S0": spec.S0}
    elif isinstance(spec, StaticFluid):
        params = {"linear": [list(r) for r in spec.linear]}
    else:
        raise ValidationError(f"unsupported potential kind {type(spec).__name__}")
    return {"kind": spec.kind, "parameters": params, "cell": cell_doc}
