"""Geodesic integration, conserved quantities and the orbit experiments."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import _kernels as K
from . import potentials as pot
from .curvature import christoffel_best
from .manifold import MetricField, NumericalError, ValidationError


@dataclass(frozen=True)
class GeodesicState:
    x: np.ndarray
    xdot: np.ndarray
    s: float = 0.0


@dataclass
class GeodesicTrace:
    s: np.ndarray
    x: np.ndarray
    xdot: np.ndarray
    K: float
    norm0: float
    K_series: np.ndarray = field(repr=False)
    norm_series: np.ndarray = field(repr=False)

    @property
    def K_drift(self) -> float:
        if not np.all(np.isfinite(self.K_series)):
            return float("nan")
        return float(np.max(np.abs(self.K_series - self.K)))

    @property
    def norm_drift(self) -> float:
        return float(np.max(np.abs(self.norm_series - self.norm0)))

    def to_rows(self):
        d = self.x.shape[1]
        header = ["s"] + [f"x{i}" for i in range(d)] + [f"xdot{i}" for i in range(d)] + ["K", "norm"]
        rows = [
            [self.s[n], *self.x[n], *self.xdot[n], self.K_series[n], self.norm_series[n]]
            for n in range(self.s.shape[0])
        ]
        return header, rows


def _conserved_covector(g: MetricField) -> Optional[np.ndarray]:
    spec = g.meta.get("spec") if g.meta else None
    if isinstance(spec, pot.Newtonian):
        return np.asarray(spec.X1_flat, float)
    if isinstance(spec, (pot.Electromagnetic, pot.EMSpin)):
        return np.asarray(getattr(spec, "X2_flat", pot.X2_FLAT), float)
    return None


def _finish(g, s, xs, vs, x_flat, tol) -> GeodesicTrace:
    norms = np.einsum("ni,nij,nj->n", vs, np.stack([g(x) for x in xs]), vs)
    if x_flat is not None:
        ks = vs @ x_flat
    else:
        ks = np.full(xs.shape[0], np.nan)
    if not np.all(np.isfinite(xs)) or not np.all(np.isfinite(vs)):
        raise NumericalError("geodesic left the domain (non-finite state)")
    scale = max(1.0, abs(norms[0]))
    drift = np.max(np.abs(norms - norms[0]))
    if drift > 100.0 * tol * scale:
        raise NumericalError(f"norm drift {drift:.3e} exceeds 100 x tol")
    return GeodesicTrace(s=s, x=xs, xdot=vs, K=float(ks[0]), norm0=float(norms[0]),
                         K_series=ks, norm_series=norms)


def _generic_rk4(g: MetricField, x0, v0, ds, steps, stride):
    def acc(x, v):
        gamma = christoffel_best(g, x)
        return -np.einsum("kij,i,j->k", gamma, v, v)

    n_rec = steps // stride + 1
    xs = np.empty((n_rec, x0.shape[0]))
    vs = np.empty_like(xs)
    x, v = x0.copy(), v0.copy()
    xs[0], vs[0] = x, v
    rec = 1
    for step in range(1, steps + 1):
        a1 = acc(x, v)
        x2, v2 = x + 0.5 * ds * v, v + 0.5 * ds * a1
        a2 = acc(x2, v2)
        x3, v3 = x + 0.5 * ds * v2, v + 0.5 * ds * a2
        a3 = acc(x3, v3)
        x4, v4 = x + ds * v3, v + ds * a3
        a4 = acc(x4, v4)
        x = x + ds / 6.0 * (v + 2 * v2 + 2 * v3 + v4)
        v = v + ds / 6.0 * (a1 + 2 * a2 + 2 * a3 + a4)
        if step % stride == 0:
            xs[rec], vs[rec] = x, v
            rec += 1
    return xs, vs


def integrate_geodesic(g: MetricField, init: GeodesicState, ds: float, steps: int, stride: int = 1,
                       tol: float = 1e-8, backend: str = "auto") -> GeodesicTrace:
    """Fixed-step RK4 for x'' + Gamma(x', x') = 0.

    ``backend="auto"`` uses a compiled kernel for point-mass/quadratic Newtonian
    potentials and uniform electromagnetic fields; ``"generic"`` always goes
    through ``christoffel_best``.
    """
    if ds <= 0 or steps < 0 or stride < 1:
        raise ValidationError("need ds > 0, steps >= 0, stride >= 1")
    x0 = np.asarray(init.x, float).copy()
    v0 = np.asarray(init.xdot, float).copy()
    if x0.shape != (g.dim,) or v0.shape != (g.dim,):
        raise ValidationError("initial state dimension does not match the metric")
    spec = g.meta.get("spec") if g.meta else None
    xs = vs = None
    if backend == "auto" and isinstance(spec, pot.Newtonian) and np.allclose(spec.X1_flat, pot.X1_FLAT):
        if isinstance(spec.v, pot.PointMass):
            xs, vs = K.newtonian_rk4(x0, v0, float(spec.v.m), np.zeros(3), ds, steps, stride)
        elif isinstance(spec.v, pot.Quadratic):
            xs, vs = K.newtonian_rk4(x0, v0, 0.0, np.asarray(spec.v.k, float), ds, steps, stride)
    elif backend == "auto" and isinstance(spec, pot.Electromagnetic) and isinstance(spec.upsilon, pot.UniformField):
        F = np.zeros((6, 6))
        F[:4, :4] = spec.upsilon.F
        xs, vs = K.em_uniform_rk4(x0, v0, F, np.asarray(spec.X2_flat, float),
                                  np.diag(pot.G0_FULL).copy(), ds, steps, stride)
    elif backend not in ("auto", "generic"):
        raise ValidationError(f"unknown backend {backend!r}")
    if xs is None:
        xs, vs = _generic_rk4(g, x0, v0, ds, steps, stride)
    s = init.s + ds * stride * np.arange(xs.shape[0])
    return _finish(g, s, xs, vs, _conserved_covector(g), tol)


def newtonian_initial_state(x_spatial, v_spatial, K: float = 1.0) -> GeodesicState:
    """Full-chart state with X1_k x'^k = K, taking t' = K and w' = 0."""
    x = np.zeros(6)
    x[1:4] = x_spatial
    v = np.zeros(6)
    v[0] = K
    v[1:4] = v_spatial
    return GeodesicState(x, v)


def em_initial_state(x_theta, v_spatial, K: float = 1.0) -> GeodesicState:
    """Full-chart state with t' = sqrt(1 + |v|^2) and X2_k x'^k = u' + w' = K."""
    x = np.zeros(6)
    x[:4] = x_theta
    v = np.zeros(6)
    v[1:4] = v_spatial
    v[0] = math.sqrt(1.0 + float(np.dot(v_spatial, v_spatial)))
    v[4] = K
    return GeodesicState(x, v)


# --------------------------------------------------------------------------
# checks along traces


def _second_derivative(arr: np.ndarray, ds: float) -> np.ndarray:
    return (arr[2:] - 2.0 * arr[1:-1] + arr[:-2]) / (ds * ds)


def spatial_acceleration_check(trace: GeodesicTrace, v: pot.ScalarPotential) -> float:
    """max || x_sp'' + K^2 grad v || along the trace, x'' by central differences."""
    ds = float(trace.s[1] - trace.s[0])
    acc = _second_derivative(trace.x[:, 1:4], ds)
    grad = np.array([v.grad(x) for x in trace.x[1:-1, 1:4]])
    return float(np.max(np.linalg.norm(acc + trace.K ** 2 * grad, axis=1)))


def lorentz_force_check(trace: GeodesicTrace, F: Callable | np.ndarray, K: Optional[float] = None) -> float:
    """max || vbar' + K F_i^k vbar^i || on Theta, vbar' by central differences."""
    ds = float(trace.s[1] - trace.s[0])
    K = trace.K if K is None else K
    vel = trace.xdot[:, :4]
    dvel = (vel[2:] - vel[:-2]) / (2.0 * ds)
    g0inv = np.linalg.inv(pot.G0_FULL[:4, :4])
    worst = 0.0
    for n in range(1, vel.shape[0] - 1):
        Fn = F(trace.x[n, :4]) if callable(F) else np.asarray(F, float)
        force = K * (vel[n] @ Fn @ g0inv)
        worst = max(worst, float(np.linalg.norm(dvel[n - 1] + force)))
    return worst


def hyperbolic_motion(E: float, K: float, s):
    """Closed form (t, x) for t'' = -K E x', x'' = -K E t' from rest at the origin.

    With F_01 = -E this is the K > 0 particle pushed along +x.
    """
    s = np.asarray(s, float)
    w = K * E
    return np.sinh(w * s) / w, (np.cosh(w * s) - 1.0) / w


@dataclass(frozen=True)
class KeplerElements:
    energy: float
    angular_momentum: np.ndarray
    eccentricity: float
    conic_fit_residual: float
    energy_drift: float


def kepler_elements(trace: GeodesicTrace, m: float) -> KeplerElements:
    x = trace.x[:, 1:4]
    v = trace.xdot[:, 1:4]
    r = np.linalg.norm(x, axis=1)
    energy = 0.5 * np.sum(v * v, axis=1) - m / r
    L = np.cross(x, v)
    lrl = np.cross(v[0], L[0]) / m - x[0] / r[0]
    ecc = float(np.linalg.norm(lrl))
    resid = float("nan")
    if np.linalg.norm(L[0]) > 1e-12:
        # fit A x^2 + B xy + C y^2 + D x + E y = 1 in the orbital plane
        e1 = x[0] / r[0]
        nrm = L[0] / np.linalg.norm(L[0])
        e2 = np.cross(nrm, e1)
        px, py = x @ e1, x @ e2
        design = np.column_stack([px * px, px * py, py * py, px, py])
        coef, *_ = np.linalg.lstsq(design, np.ones_like(px), rcond=None)
        resid = float(np.sqrt(np.mean((design @ coef - 1.0) ** 2)))
    return KeplerElements(float(energy[0]), L[0], ecc, resid, float(np.max(np.abs(energy - energy[0]))))


def orbit_period(trace: GeodesicTrace) -> float:
    """Parameter at which the polar angle first completes a full turn (Hermite-refined)."""
    x = trace.x[:, 1]
    y = trace.x[:, 2]
    phi = np.unwrap(np.arctan2(y, x))
    phi = phi - phi[0]
    idx = np.nonzero(phi >= 2 * np.pi)[0]
    if idx.size == 0:
        raise NumericalError("orbit did not complete a turn")
    n = int(idx[0])
    ds = float(trace.s[n] - trace.s[n - 1])
    vx, vy = trace.xdot[:, 1], trace.xdot[:, 2]
    r2 = x * x + y * y
    dphi = (x * vy - y * vx) / r2
    # cubic Hermite on phi between samples n-1 and n
    p0, p1 = phi[n - 1] - 2 * np.pi, phi[n] - 2 * np.pi
    m0, m1 = dphi[n - 1] * ds, dphi[n] * ds
    lo, hi = 0.0, 1.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        h00 = 2 * mid**3 - 3 * mid**2 + 1
        h10 = mid**3 - 2 * mid**2 + mid
        h01 = -2 * mid**3 + 3 * mid**2
        h11 = mid**3 - mid**2
        val = h00 * p0 + h10 * m0 + h01 * p1 + h11 * m1
        if val < 0:
            lo = mid
        else:
            hi = mid
    return float(trace.s[n - 1] - trace.s[0] + 0.5 * (lo + hi) * ds)


# --------------------------------------------------------------------------
# Schwarzschild comparison


def schwarzschild_metric(m: float) -> MetricField:
    """g_S in Schwarzschild coordinates (t, r, theta, phi), valid for r > 2m."""

    def ev(p):
        t, r, th, ph = p
        if r <= 2 * m:
            raise NumericalError("Schwarzschild chart requires r > 2m")
        f = 1.0 - 2.0 * m / r
        return np.diag([-f, 1.0 / f, r * r, r * r * math.sin(th) ** 2])

    return MetricField(eval=ev, signature=(-1, 1, 1, 1), label=f"schwarzschild(m={m})")


def _periapsis_angle(phi: np.ndarray, r: np.ndarray) -> float:
    """Angle of the first periapsis after the first apoapsis (parabolic refinement)."""
    apo = None
    for n in range(1, r.shape[0] - 1):
        if r[n] >= r[n - 1] and r[n] > r[n + 1]:
            apo = n
            break
    if apo is None:
        raise NumericalError("no apoapsis found; integrate longer")
    for n in range(apo + 1, r.shape[0] - 1):
        if r[n] <= r[n - 1] and r[n] < r[n + 1]:
            # vertex of the parabola through three (phi, r) samples
            x = phi[n - 1:n + 2]
            y = r[n - 1:n + 2]
            c2, c1, _ = np.polyfit(x - x[1], y, 2)
            return float(x[1] - c1 / (2.0 * c2))
    raise NumericalError("no second periapsis found; integrate longer")


def perihelion_comparison(m: float = 0.01, r0: float = 1.0, boost: float = 1.1, ds: Optional[float] = None,
                          turns: float = 1.6) -> dict:
    """Periapsis advance after one orbit: Newtonian potential metric vs Schwarzschild.

    Both start at periapsis r0 with tangential speed boost * sqrt(m / r0); the
    Newtonian run uses the s-parametrised potential metric, the Schwarzschild
    run uses proper time.
    """
    if r0 <= 2 * m:
        raise ValidationError("start outside the horizon")
    vt = boost * math.sqrt(m / r0)
    a = 1.0 / (2.0 / r0 - vt * vt / m)
    period = 2 * math.pi * math.sqrt(a**3 / m)
    if ds is None:
        ds = period / 40000.0
    steps = int(turns * period / ds)
    spec = pot.Newtonian(pot.PointMass(m))
    g = pot.build_metric(spec)
    tr = integrate_geodesic(g, newtonian_initial_state([r0, 0, 0], [0, vt, 0]), ds, steps, tol=1e-6)
    phi_n = np.unwrap(np.arctan2(tr.x[:, 2], tr.x[:, 1]))
    r_n = np.linalg.norm(tr.x[:, 1:4], axis=1)
    ang_newton = _periapsis_angle(phi_n, r_n)

    phidot = vt / r0
    tdot = math.sqrt((1.0 + r0 * r0 * phidot * phidot) / (1.0 - 2.0 * m / r0))
    y0 = np.array([0.0, r0, 0.0, tdot, 0.0, phidot])
    ys = K.schwarzschild_rk4(y0, m, ds, steps, 1)
    ang_schw = _periapsis_angle(ys[:, 2], ys[:, 1])
    ecc = abs(vt * vt * r0 / m - 1.0)
    return {
        "m": m,
        "r0": r0,
        "r0_over_2m": r0 / (2 * m),
        "newton_periapsis": ang_newton - 2 * math.pi,
        "schwarzschild_periapsis": ang_schw - 2 * math.pi,
        "gap": abs(ang_schw - ang_newton),
        "gr_advance_estimate": 6 * math.pi * m / (a * (1 - ecc * ecc)),
    }
