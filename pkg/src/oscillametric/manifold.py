"""Charts, metric fields, index gymnastics and finite differences."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

DEFAULT_H = 1e-3


class ValidationError(ValueError):
    """Raised when inputs violate a documented precondition."""


class NumericalError(ArithmeticError):
    """Raised when a computation breaks down (singular metric, blow-up, ...)."""


@dataclass(frozen=True)
class Cell:
    """Product cell Theta x S1(delta) x S3(rho) x V, with V known only spectrally.

    Units are geometric (c = 1); delta and rho are free parameters.
    """

    delta: float = 1.0
    rho: float = 1.0
    v_dim: int = 0
    v_eigenvalue: float = 0.0
    v_scalar_curvature: float = 0.0
    dim_theta: int = 4

    def __post_init__(self):
        if self.delta <= 0 or self.rho <= 0:
            raise ValidationError("delta and rho must be positive")
        if self.v_dim < 0 or self.v_eigenvalue < 0:
            raise ValidationError("V must have dim >= 0 and eigenvalue >= 0")
        if self.dim_theta != 4:
            raise ValidationError("Theta is always 4-dimensional")

    @property
    def n(self) -> int:
        return self.dim_theta + 1 + 3 + self.v_dim


@dataclass(frozen=True)
class MetricField:
    """A symmetric d x d matrix field on a box chart.

    ``dmetric`` (optional) returns the array ``dg[k, i, j] = d_k g_ij``;
    ``christoffel`` (optional) returns ``Gamma[k, i, j]`` in closed form. When
    absent, consumers fall back to finite differences of ``eval``.
    """

    eval: Callable[[np.ndarray], np.ndarray]
    signature: tuple
    label: str = ""
    dmetric: Optional[Callable[[np.ndarray], np.ndarray]] = None
    christoffel: Optional[Callable[[np.ndarray], np.ndarray]] = None
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def dim(self) -> int:
        return len(self.signature)

    def __call__(self, p) -> np.ndarray:
        return np.asarray(self.eval(np.asarray(p, dtype=float)), dtype=float)


@dataclass(frozen=True)
class VectorField:
    eval: Callable[[np.ndarray], np.ndarray]
    dim: int
    label: str = ""

    def __call__(self, p) -> np.ndarray:
        out = np.asarray(self.eval(np.asarray(p, dtype=float)), dtype=float)
        if out.shape != (self.dim,):
            raise ValidationError(f"vector field {self.label!r} returned shape {out.shape}")
        return out


def constant_metric(matrix, label: str = "constant") -> MetricField:
    mat = np.array(matrix, dtype=float)
    if mat.shape[0] != mat.shape[1] or not np.allclose(mat, mat.T, atol=0.0):
        raise ValidationError("metric matrix must be square and symmetric")
    sig = tuple(int(s) for s in np.sign(np.linalg.eigvalsh(mat)))
    # keep the chart order of the signature for diagonal metrics
    if np.count_nonzero(mat - np.diag(np.diag(mat))) == 0:
        sig = tuple(int(s) for s in np.sign(np.diag(mat)))
    d = mat.shape[0]
    return MetricField(
        eval=lambda p, _m=mat: _m.copy(),
        signature=sig,
        label=label,
        dmetric=lambda p, _d=d: np.zeros((_d, _d, _d)),
        christoffel=lambda p, _d=d: np.zeros((_d, _d, _d)),
    )


def minkowski(d: int = 4) -> MetricField:
    return constant_metric(np.diag([-1.0] + [1.0] * (d - 1)), label="minkowski")


def _check_dim(g: MetricField, vec) -> np.ndarray:
    arr = np.asarray(vec, dtype=float)
    if arr.shape != (g.dim,):
        raise ValidationError(f"expected a length-{g.dim} vector, got shape {arr.shape}")
    return arr


def lower_index(g: MetricField, p, X) -> np.ndarray:
    return g(p) @ _check_dim(g, X)


def raise_index(g: MetricField, p, omega) -> np.ndarray:
    mat = g(p)
    omega = _check_dim(g, omega)
    try:
        inv = np.linalg.inv(mat)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"metric singular at {np.asarray(p).tolist()}") from exc
    if not np.all(np.isfinite(inv)) or abs(np.linalg.det(mat)) < 1e-300:
        raise NumericalError(f"metric singular at {np.asarray(p).tolist()}")
    return inv @ omega


def fd_partial(f: Callable, p, i: int, order: int = 1, h: float = DEFAULT_H, j: Optional[int] = None):
    """Second-order central difference of ``f`` at ``p`` along axis ``i``.

    With ``order=2`` and ``j`` given (and different from ``i``) the mixed
    partial is returned via the four-point cross stencil. ``f`` may be scalar
    or array valued.
    """
    p = np.asarray(p, dtype=float)
    if h <= 0:
        raise ValidationError("step must be positive")
    ei = np.zeros_like(p)
    ei[i] = h
    if order == 1:
        return (np.asarray(f(p + ei)) - np.asarray(f(p - ei))) / (2.0 * h)
    if order != 2:
        raise ValidationError("order must be 1 or 2")
    if j is None or j == i:
        return (np.asarray(f(p + ei)) - 2.0 * np.asarray(f(p)) + np.asarray(f(p - ei))) / (h * h)
    ej = np.zeros_like(p)
    ej[j] = h
    return (np.asarray(f(p + ei + ej)) - np.asarray(f(p + ei - ej))
            - np.asarray(f(p - ei + ej)) + np.asarray(f(p - ei - ej))) / (4.0 * h * h)


def fd_gradient(f: Callable, p, h: float = DEFAULT_H) -> np.ndarray:
    """Stack of first partials; leading axis is the derivative direction."""
    p = np.asarray(p, dtype=float)
    return np.stack([fd_partial(f, p, k, 1, h) for k in range(p.shape[0])])


@dataclass(frozen=True)
class SignatureReport:
    passed: bool
    checked: int
    first_failure: Optional[list] = None
    found: Optional[tuple] = None


def signature_check(g: MetricField, points: Sequence) -> SignatureReport:
    """Compare eigenvalue sign counts of g(p) with the declared signature.

    Eigenvalues of a non-diagonal metric do not follow chart order, so the
    comparison is on the multiset of signs; exact zeros count as failures.
    """
    want = sorted(g.signature)
    count = 0
    for p in points:
        count += 1
        ev = np.linalg.eigvalsh(g(p))
        scale = max(1.0, float(np.max(np.abs(ev))))
        if np.any(np.abs(ev) <= 1e-12 * scale):
            return SignatureReport(False, count, list(np.asarray(p, float)), tuple(np.sign(ev).astype(int)))
        got = sorted(int(s) for s in np.sign(ev))
        if got != want:
            return SignatureReport(False, count, list(np.asarray(p, float)), tuple(got))
    return SignatureReport(True, count)


def sample_box(lo, hi, n: int, seed: int = 0) -> np.ndarray:
    """Scrambled Halton points in the box [lo, hi]."""
    from scipy.stats import qmc

    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    sampler = qmc.Halton(d=lo.shape[0], scramble=True, seed=seed)
    return qmc.scale(sampler.random(n), lo, hi)
