"""Christoffel symbols, Ricci/scalar/Einstein curvature and related identities.

Sign conventions: R_ij = d_k G^k_ij - d_j G^k_ik + G^k_kl G^l_ij - G^k_jl G^l_ik,
the d'Alembertian is the geometer's one, box = -nabla^i nabla_i, and the
Einstein tensor is reported as G = 2 (Ric - S g / 2).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .manifold import DEFAULT_H, MetricField, NumericalError, ValidationError, fd_partial
from . import potentials as pot


@dataclass(frozen=True)
class ChristoffelAt:
    gamma: np.ndarray
    point: np.ndarray


@dataclass(frozen=True)
class CurvatureReport:
    ricci: np.ndarray
    scalar: float
    einstein: np.ndarray
    div_einstein: Optional[np.ndarray] = None

    def to_dict(self) -> dict:
        out = {"ricci": self.ricci.tolist(), "scalar": self.scalar, "einstein": self.einstein.tolist()}
        if self.div_einstein is not None:
            out["div_einstein"] = self.div_einstein.tolist()
        return out


def _inv(mat: np.ndarray, p) -> np.ndarray:
    try:
        inv = np.linalg.inv(mat)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"metric singular at {np.asarray(p).tolist()}") from exc
    if not np.all(np.isfinite(inv)):
        raise NumericalError(f"metric singular at {np.asarray(p).tolist()}")
    return inv


# --------------------------------------------------------------------------
# metric jets


def metric_jet(g: MetricField, p, h: float = DEFAULT_H, use_hooks: bool = True):
    """(g, dg, d2g) at p with dg[k,i,j] = d_k g_ij and d2g[m,k,i,j] = d_m d_k g_ij.

    An analytic ``dmetric`` hook is used for dg (and differenced once for d2g);
    otherwise both come from central differences of ``g.eval``.
    """
    p = np.asarray(p, float)
    d = g.dim
    gm = g(p)
    if use_hooks and g.dmetric is not None:
        dg = np.asarray(g.dmetric(p), float)
        d2g = np.stack([fd_partial(g.dmetric, p, m, 1, h) for m in range(d)])
        return gm, dg, d2g
    dg = np.stack([fd_partial(g, p, k, 1, h) for k in range(d)])
    d2g = np.empty((d, d, d, d))
    for m in range(d):
        for k in range(m, d):
            val = fd_partial(g, p, m, 2, h, None if k == m else k)
            d2g[m, k] = val
            d2g[k, m] = val
    return gm, dg, d2g


def _gamma_low(dg: np.ndarray) -> np.ndarray:
    # low[l, i, j] = (d_i g_jl + d_j g_il - d_l g_ij) / 2
    return 0.5 * (np.einsum("ijl->lij", dg) + np.einsum("jil->lij", dg) - dg)


def christoffel(g: MetricField, p, h: float = DEFAULT_H) -> ChristoffelAt:
    """Gamma^k_ij from central differences of the metric (no analytic hooks)."""
    p = np.asarray(p, float)
    gm = g(p)
    dg = np.stack([fd_partial(g, p, k, 1, h) for k in range(g.dim)])
    gamma = np.einsum("kl,lij->kij", _inv(gm, p), _gamma_low(dg))
    gamma = 0.5 * (gamma + np.swapaxes(gamma, 1, 2))
    return ChristoffelAt(gamma, p)


def christoffel_best(g: MetricField, p, h: float = DEFAULT_H) -> np.ndarray:
    """Closed form when the metric provides one, else the FD route."""
    if g.christoffel is not None:
        return np.asarray(g.christoffel(np.asarray(p, float)), float)
    if g.dmetric is not None:
        p = np.asarray(p, float)
        return np.einsum("kl,lij->kij", _inv(g(p), p), _gamma_low(np.asarray(g.dmetric(p), float)))
    return christoffel(g, p, h).gamma


def christoffel_correction_T(spec, p) -> np.ndarray:
    """Gamma - Gamma0 in closed form for the Newtonian and electromagnetic potentials."""
    if isinstance(spec, pot.Newtonian):
        return pot.newtonian_T(spec, p)
    if isinstance(spec, (pot.Electromagnetic, pot.EMSpin)):
        return pot.em_T(spec, p)
    if isinstance(spec, pot.Neutral):
        return np.zeros((6, 6, 6))
    raise ValidationError(f"no closed-form T for {type(spec).__name__}")


# --------------------------------------------------------------------------
# curvature


def _ricci_from_jet(gm, dg, d2g, p):
    ginv = _inv(gm, p)
    low = _gamma_low(dg)
    gamma = np.einsum("kl,lij->kij", ginv, low)
    dginv = -np.einsum("ka,mab,bl->mkl", ginv, dg, ginv)
    dlow = 0.5 * (np.einsum("mijl->mlij", d2g) + np.einsum("mjil->mlij", d2g) - d2g)
    dgamma = np.einsum("mkl,lij->mkij", dginv, low) + np.einsum("kl,mlij->mkij", ginv, dlow)
    ric = (np.einsum("kkij->ij", dgamma) - np.einsum("jkik->ij", dgamma)
           + np.einsum("kkl,lij->ij", gamma, gamma) - np.einsum("kjl,lik->ij", gamma, gamma))
    return 0.5 * (ric + ric.T), ginv, gamma


def _report(gm, ginv, ric) -> CurvatureReport:
    scalar = float(np.einsum("ij,ij->", ginv, ric))
    einstein = 2.0 * (ric - 0.5 * scalar * gm)
    return CurvatureReport(ric, scalar, einstein)


def ricci(g: MetricField, p, h: float = DEFAULT_H, method: str = "jet") -> CurvatureReport:
    """Ricci, scalar and Einstein curvature at p.

    ``method="jet"`` contracts exact jet formulas for dGamma built from metric
    derivatives; ``method="nested"`` differences FD Christoffels a second time.
    """
    p = np.asarray(p, float)
    if method == "jet":
        gm, dg, d2g = metric_jet(g, p, h)
        ric, ginv, _ = _ricci_from_jet(gm, dg, d2g, p)
        return _report(gm, ginv, ric)
    if method != "nested":
        raise ValidationError(f"unknown method {method!r}")
    gm = g(p)
    ginv = _inv(gm, p)
    gamma = christoffel(g, p, h).gamma
    dgamma = np.stack([(christoffel(g, p + h * e, h).gamma - christoffel(g, p - h * e, h).gamma) / (2 * h)
                       for e in np.eye(g.dim)])
    ric = (np.einsum("kkij->ij", dgamma) - np.einsum("jkik->ij", dgamma)
           + np.einsum("kkl,lij->ij", gamma, gamma) - np.einsum("kjl,lik->ij", gamma, gamma))
    return _report(gm, ginv, 0.5 * (ric + ric.T))


def raise_both(ginv: np.ndarray, tensor: np.ndarray) -> np.ndarray:
    return ginv @ tensor @ ginv


def divergence_contravariant(g: MetricField, tensor_fn: Callable, p, h: float = DEFAULT_H) -> np.ndarray:
    """nabla_i T^ij = d_i T^ij + Gamma^i_il T^lj + Gamma^j_il T^il."""
    p = np.asarray(p, float)
    gamma = christoffel_best(g, p, h)
    tp = np.asarray(tensor_fn(p), float)
    div = sum(fd_partial(tensor_fn, p, i, 1, h)[i] for i in range(g.dim))
    return div + np.einsum("iil,lj->j", gamma, tp) + np.einsum("jil,il->j", gamma, tp)


def einstein_divergence(g: MetricField, p, h: float = DEFAULT_H) -> np.ndarray:
    """Covariant divergence of G^ij; zero by the contracted Bianchi identity."""

    def g_up(q):
        rep = ricci(g, q, h)
        ginv = np.linalg.inv(g(q))
        return raise_both(ginv, rep.einstein)

    return divergence_contravariant(g, g_up, p, h)


def covariant_derivative_vector(g: MetricField, X: Callable, p, h: float = DEFAULT_H) -> np.ndarray:
    """(nabla X)[i, j] = d_i X^j + Gamma^j_ik X^k."""
    p = np.asarray(p, float)
    gamma = christoffel_best(g, p, h)
    dX = np.stack([fd_partial(X, p, i, 1, h) for i in range(g.dim)])
    return dX + np.einsum("jik,k->ij", gamma, np.asarray(X(p), float))


# --------------------------------------------------------------------------
# closed-form identities for the potentials


def newtonian_ricci_residual(spec: pot.Newtonian, p, h: float = DEFAULT_H) -> float:
    """|| Ric_g^# - Ric_g0^# + (Delta_g0 v) X1 (x) X1 || with Delta = -sum d^2 (flat g0)."""
    g = pot.build_metric(spec)
    p = np.asarray(p, float)
    rep = ricci(g, p, h)
    ginv = np.linalg.inv(g(p))
    ric_up = raise_both(ginv, rep.ricci)
    x_up = np.linalg.solve(pot.G0_FULL, np.asarray(spec.X1_flat, float))
    delta_v = -spec.v.laplacian(p[1:4])
    return float(np.max(np.abs(ric_up + delta_v * np.outer(x_up, x_up))))


def field_divergence(spec, p, h: float = 1e-4) -> np.ndarray:
    """(div F)^j = d_i (g0^ik F_kl g0^lj) on the flat Theta block, padded to 6."""
    p = np.asarray(p, float)
    g0inv = np.linalg.inv(pot.G0_FULL[:4, :4])

    def f_up(q4):
        return g0inv @ spec.upsilon.field_strength(q4) @ g0inv

    q4 = p[:4]
    div = sum(fd_partial(f_up, q4, i, 1, h)[i] for i in range(4))
    out = np.zeros(6)
    out[:4] = div
    return out


def em_ricci_residual(spec, p, h: float = DEFAULT_H) -> float:
    """|| Ric_g - Ric_g0 - (f X2 X2 - divF X2 - X2 divF)/2 || with indices moved by g0.

    f = F^kl F_kl / 2. Raising with g instead of g0 would add
    g0(Upsilon, div F) X2 (x) X2, which vanishes only for divergence-free F
    or Upsilon orthogonal to div F.
    """
    g = pot.build_metric(spec)
    p = np.asarray(p, float)
    rep = ricci(g, p, h)
    g0inv_full = np.linalg.inv(pot.G0_FULL)
    ric_up = raise_both(g0inv_full, rep.ricci)
    F = spec.upsilon.field_strength(p[:4])
    g0inv = np.linalg.inv(pot.G0_FULL[:4, :4])
    f = 0.5 * float(np.einsum("ik,jl,kl,ij->", g0inv, g0inv, F, F))
    x_up = g0inv_full @ np.asarray(getattr(spec, "X2_flat", pot.X2_FLAT), float)
    divF = field_divergence(spec, p)
    expected = 0.5 * (f * np.outer(x_up, x_up) - np.outer(divF, x_up) - np.outer(x_up, divF))
    return float(np.max(np.abs(ric_up - expected)))


def fluid_ricci_closed_form(spec: pot.StaticFluid) -> np.ndarray:
    """Ricci of the static-fluid metric for linear (a, b, c).

    Rows/columns t and w carry mu = |curl|^2; the curl-curl entries vanish
    identically because the coefficients are linear.
    """
    mu = spec.mu
    cc = np.zeros(3)
    out = np.zeros((5, 5))
    for i in (0, 4):
        out[i, 1:4] = cc
        out[1:4, i] = cc
        for j in (0, 4):
            out[i, j] = mu
    return 0.5 * out


def fluid_matter_divergence(spec: pot.StaticFluid, p, h: float = DEFAULT_H) -> np.ndarray:
    """nabla_i (mu X0^i X0^j) for the static fluid."""
    g = pot.build_metric(spec)
    e0 = np.zeros(5)
    e0[0] = 1.0
    mu = spec.mu
    return divergence_contravariant(g, lambda q: mu * np.outer(e0, e0), p, h)


# --------------------------------------------------------------------------
# conformal scalar curvature


def conformal_metric(a: Callable, g0: MetricField, n: int) -> MetricField:
    exponent = 4.0 / (n - 2)

    def ev(p):
        return abs(a(p)) ** exponent * g0(p)

    return MetricField(eval=ev, signature=g0.signature, label=f"conformal({g0.label})")


def box(f: Callable, g: MetricField, p, h: float = DEFAULT_H) -> float:
    """Geometer's d'Alembertian -g^ij (d_i d_j f - Gamma^k_ij d_k f)."""
    p = np.asarray(p, float)
    d = g.dim
    ginv = np.linalg.inv(g(p))
    hess = np.empty((d, d))
    for i in range(d):
        for j in range(i, d):
            hess[i, j] = hess[j, i] = fd_partial(f, p, i, 2, h, None if i == j else j)
    grad = np.array([fd_partial(f, p, k, 1, h) for k in range(d)])
    gamma = christoffel_best(g, p, h)
    return float(-np.einsum("ij,ij->", ginv, hess - np.einsum("kij,k->ij", gamma, grad)))


def yamabe_prediction(a: Callable, g0: MetricField, n: int, p, S_g0: float, h: float = DEFAULT_H) -> float:
    """S_g' implied by (4(n-1)/(n-2)) box a + S a = S' |a|^(4/(n-2)) a."""
    av = float(a(np.asarray(p, float)))
    lhs = 4.0 * (n - 1) / (n - 2) * box(a, g0, p, h) + S_g0 * av
    return lhs / (abs(av) ** (4.0 / (n - 2)) * av)


def yamabe_check(a: Callable, g0: MetricField, n: int, p, S_g0: Optional[float] = None,
                 h: float = DEFAULT_H) -> float:
    """Relative gap between S of a^(4/(n-2)) g0 computed by ``ricci`` and the Yamabe value."""
    p = np.asarray(p, float)
    if a(p) <= 0:
        raise ValidationError("conformal factor must be positive at p")
    if g0.dim != n:
        raise ValidationError("n must equal the chart dimension of g0")
    if S_g0 is None:
        S_g0 = ricci(g0, p, h).scalar
    direct = ricci(conformal_metric(a, g0, n), p, h).scalar
    predicted = yamabe_prediction(a, g0, n, p, S_g0, h)
    scale = max(abs(direct), abs(predicted))
    if scale == 0.0:
        return 0.0
    return abs(direct - predicted) / scale


# --------------------------------------------------------------------------
# Raychaudhuri focusing


def raychaudhuri_integrate(theta0: float, n: int, ricci_term: Callable[[float], float] = lambda s: 0.0,
                           s0: float = 0.0, ds: float = 1e-3, s_max: Optional[float] = None,
                           blowup: float = 1e9) -> Optional[float]:
    """Blow-up parameter of Theta' = -R(s) - Theta^2/(n-2), or None.

    Where |Theta| >= 1 the step is taken on y = 1/Theta, which obeys
    y' = R y^2 + 1/(n-2) and crosses zero linearly at the singularity; the
    crossing is located by linear interpolation inside the step.
    """
    if n <= 2:
        raise ValidationError("n must exceed 2")
    c = 1.0 / (n - 2)
    if s_max is None:
        s_max = s0 + max(1e3, 100.0 * (n - 2) / max(abs(theta0), 1e-12))

    def f_theta(s, th):
        return -ricci_term(s) - th * th * c

    def f_y(s, y):
        return ricci_term(s) * y * y + c

    def rk4(f, s, x):
        k1 = f(s, x)
        k2 = f(s + 0.5 * ds, x + 0.5 * ds * k1)
        k3 = f(s + 0.5 * ds, x + 0.5 * ds * k2)
        k4 = f(s + ds, x + ds * k3)
        return x + ds / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)

    s = s0
    th = float(theta0)
    while s < s_max:
        if abs(th) < 1.0:
            th_new = rk4(f_theta, s, th)
            s += ds
            th = th_new
            if not np.isfinite(th) or abs(th) > blowup:
                return s
            continue
        y = 1.0 / th
        y_new = rk4(f_y, s, y)
        if y < 0.0 <= y_new or abs(y_new) < 1.0 / blowup:
            frac = y / (y - y_new) if y != y_new else 1.0
            return s + ds * frac
        s += ds
        th = 1.0 / y_new if y_new != 0 else np.inf
    return None


def raychaudhuri_bound(theta0: float, n: int, s0: float = 0.0) -> float:
    """Upper bound s0 + (n-2)/|theta0| on the blow-up parameter."""
    return s0 + (n - 2) / abs(theta0)
