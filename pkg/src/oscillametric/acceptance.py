"""The fifteen acceptance checks, shared by ``oscillametric verify-all`` and the test-suite.

Each check returns a ``Criterion`` holding the measured values, the thresholds
it was judged against and a pass flag. Reports are serialised with sorted keys
and 17 significant digits, and contain no timings, so two runs with the same
profile and seed give byte-identical files.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np
import sympy as sp

from . import curvature as C
from . import experiments as E
from . import geodesics as G
from . import potentials as P
from . import spectral as S
from . import stochastic as R
from . import waves as Wv
from .manifold import ValidationError, constant_metric, sample_box

DEFAULT_SEED = 20240611

DEFAULT_PROFILE: Dict[str, float] = {
    "det": 1e-12,
    "christoffel": 1e-5,
    "ricci_identity": 1e-4,
    "fluid_ricci": 1e-6,
    "fluid_scalar": 1e-8,
    "fluid_matter_div": 1e-6,
    "fluid_einstein_div": 1e-3,
    "conservation": 1e-8,
    "kepler_period": 1e-4,
    "eccentricity": 1e-3,
    "cyclotron_radius": 1e-6,
    "lorentz": 1e-6,
    "perihelion": 1e-3,
    "eigen_exact": 1e-10,
    "eigen_fd": 1e-6,
    "field_divergence": 1e-8,
    "kg_plane_wave": 1e-10,
    "substitution": 1e-10,
    "eps_ratio": 1e-4,
    "packet_shrink": 3.5,
    "yamabe": 1e-3,
    "binomial_poisson": 1e-3,
    "chi2_p": 0.01,
    "window": 1e-9,
    "mode_weights": 0.01,
    "stern_gerlach": 1e-12,
    "chsh": 1e-12,
    "lhv_sigmas": 3.0,
}

PROFILES: Dict[str, Dict[str, float]] = {
    "default": DEFAULT_PROFILE,
    "tight-fd": {**DEFAULT_PROFILE, "christoffel": 1e-8, "ricci_identity": 1e-8},
}


def resolve_profile(profile) -> Dict[str, float]:
    """A profile name or a mapping of overrides on top of the default thresholds."""
    if isinstance(profile, str):
        if profile not in PROFILES:
            raise ValidationError(f"unknown profile {profile!r}; choose from {sorted(PROFILES)}")
        return dict(PROFILES[profile])
    if not isinstance(profile, dict) or not profile:
        raise ValidationError("profile must be a known name or a nonempty mapping of thresholds")
    unknown = set(profile) - set(DEFAULT_PROFILE)
    if unknown:
        raise ValidationError(f"unknown tolerance keys: {sorted(unknown)}")
    out = dict(DEFAULT_PROFILE)
    out.update({k: float(v) for k, v in profile.items()})
    return out


@dataclass
class Criterion:
    number: int
    title: str
    passed: bool
    measured: dict
    thresholds: dict
    notes: str = ""

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] criterion {self.number:2d}: {self.title}"

    def to_dict(self):
        return {"number": self.number, "title": self.title, "passed": self.passed,
                "measured": self.measured, "thresholds": self.thresholds, "notes": self.notes}


def _f(x):
    """JSON-safe float with 17 significant digits preserved by the encoder."""
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    x = float(x)
    if math.isnan(x) or math.isinf(x):
        return repr(x)
    return x


# --------------------------------------------------------------------------
# 1-4: potentials and curvature


def c01_nilpotency(tol, seed):
    pts = sample_box([-1, 0.5, 0.5, 0.5, -1, -1], [1, 2, 2, 2, 1, 1], 100, seed=seed)
    specs = {
        "newtonian_linear": (P.Newtonian(P.Linear((0.3, 0.0, 0.0))), 2),
        "newtonian_point_mass": (P.Newtonian(P.PointMass(1.0)), 2),
        "em_uniform_B": (P.Electromagnetic(P.UniformField(B=(0.0, 0.0, 0.7))), 3),
    }
    measured = {}
    ok = True
    for name, (spec, index) in specs.items():
        g0 = P.background(spec)
        power_err = 0.0
        for p in pts:
            e = P.endomorphism(g0, P.perturbation(spec, p))
            power_err = max(power_err, float(np.max(np.abs(np.linalg.matrix_power(e, index)))))
        det_err = P.det_invariance_check(spec, pts)
        measured[name] = {"index": index, "max_power": _f(power_err), "det_gap": _f(det_err)}
        ok &= power_err == 0.0 or power_err <= 1e-15
        ok &= det_err <= tol["det"]
    return Criterion(1, "nilpotency and determinant invariance", bool(ok), measured, {"det": tol["det"]})


def _c02_c03_specs():
    return {
        "newtonian_point_mass": P.Newtonian(P.PointMass(0.3)),
        "newtonian_quadratic": P.Newtonian(P.Quadratic((0.2, -0.1, 0.05))),
        "em_uniform": P.Electromagnetic(P.UniformField(E=(0.1, 0.0, 0.2), B=(0.0, 0.3, 0.7))),
        "em_nonuniform": P.Electromagnetic(P.CallableCovector(
            lambda q: np.array([0.1 * q[2], 0.0, 0.5 * q[1] ** 2, 0.2 * q[0] * q[3]]))),
    }


def c02_christoffel(tol, seed):
    pts = sample_box([-1, 0.4, 0.4, 0.4, -1, -1], [1, 1.5, 1.5, 1.5, 1, 1], 10, seed=seed + 2)
    measured = {}
    worst = 0.0
    for name, spec in _c02_c03_specs().items():
        g = P.build_metric(spec)
        err = max(float(np.max(np.abs(C.christoffel(g, p, h=1e-3).gamma - C.christoffel_correction_T(spec, p))))
                  for p in pts)
        measured[name] = _f(err)
        worst = max(worst, err)
    return Criterion(2, "finite-difference Christoffel vs closed-form correction", worst <= tol["christoffel"],
                     measured, {"christoffel": tol["christoffel"], "h": 1e-3})


def c03_ricci_identities(tol, seed):
    pts = sample_box([-1, 0.4, 0.4, 0.4, -1, -1], [1, 1.5, 1.5, 1.5, 1, 1], 20, seed=seed + 3)
    specs = _c02_c03_specs()
    measured = {}
    worst = 0.0
    for name, spec in specs.items():
        fn = C.newtonian_ricci_residual if isinstance(spec, P.Newtonian) else C.em_ricci_residual
        err = max(fn(spec, p) for p in pts)
        measured[name] = _f(err)
        worst = max(worst, err)
    return Criterion(3, "Ricci identities for Newtonian and electromagnetic potentials",
                     worst <= tol["ricci_identity"], measured, {"ricci_identity": tol["ricci_identity"]})


def _fluid_closed_form(A, B, Cc, curlcurl):
    """The 5x5 Ricci matrix in the (t, x1, x2, x3, w) chart for the static fluid in closed form."""
    mu = A * A + B * B + Cc * Cc
    a, b, c = curlcurl
    return 0.5 * np.array([
        [mu, a, b, c, mu],
        [a, 0, 0, 0, a],
        [b, 0, 0, 0, b],
        [c, 0, 0, 0, c],
        [mu, a, b, c, mu],
    ])


def c04_fluid(tol, seed):
    spec = P.StaticFluid(((0.0, -1.0, 0.0), (1.0, 0.0, 0.0), (0.0, 0.0, 0.0)))
    g = P.build_metric(spec)
    A, B, Cc = spec.curl()
    closed = _fluid_closed_form(A, B, Cc, (0.0, 0.0, 0.0))
    pts = sample_box([-1, -1, -1, -1, -1], [1, 1, 1, 1, 1], 5, seed=seed + 4)
    ric_err = scal = mdiv = gdiv = 0.0
    for p in pts:
        rep = C.ricci(g, p)
        ric_err = max(ric_err, float(np.max(np.abs(rep.ricci - closed))))
        scal = max(scal, abs(rep.scalar))
        mdiv = max(mdiv, float(np.max(np.abs(C.fluid_matter_divergence(spec, p)))))
        gdiv = max(gdiv, float(np.max(np.abs(C.einstein_divergence(g, p)))))
    measured = {"mu": _f(spec.mu), "ricci_vs_closed_form": _f(ric_err), "scalar": _f(scal),
                "matter_divergence": _f(mdiv), "einstein_divergence": _f(gdiv)}
    ok = (spec.mu == 4.0 and ric_err <= tol["fluid_ricci"] and scal <= tol["fluid_scalar"]
          and mdiv <= tol["fluid_matter_div"] and gdiv <= tol["fluid_einstein_div"])
    keys = ("fluid_ricci", "fluid_scalar", "fluid_matter_div", "fluid_einstein_div")
    return Criterion(4, "exact static fluid", bool(ok), measured, {k: tol[k] for k in keys})


# --------------------------------------------------------------------------
# 5-6: geodesics


def c05_geodesics(tol, seed):
    newton = P.build_metric(P.Newtonian(P.PointMass(1.0)))
    circ = G.integrate_geodesic(newton, G.newtonian_initial_state([1, 0, 0], [0, 1, 0]), 2 * math.pi / 1e4, 10000)
    longer = G.integrate_geodesic(newton, G.newtonian_initial_state([1, 0, 0], [0, 1, 0]), 2 * math.pi / 1e4, 10100)
    period_err = abs(G.orbit_period(longer) - 2 * math.pi)

    v0 = 1.1
    ell = G.integrate_geodesic(newton, G.newtonian_initial_state([1, 0, 0], [0, v0, 0]), 1e-3, 10000)
    r = np.linalg.norm(ell.x[:, 1:4], axis=1)
    e_orbit = (r.max() - r.min()) / (r.max() + r.min())
    a = 1.0 / (2.0 / 1.0 - v0 * v0)
    e_visviva = 1.0 - 1.0 / a

    em = P.Electromagnetic(P.UniformField(B=(0.0, 0.0, 1.0)))
    cyc = G.integrate_geodesic(P.build_metric(em), G.em_initial_state([0, 0, 0, 0], [0.1, 0, 0]), 1e-3, 10000)
    dist = np.linalg.norm(cyc.x[:, 1:3] - np.array([0.0, -0.1]), axis=1)
    radius_err = float(np.max(np.abs(dist - 0.1)))
    lorentz = G.lorentz_force_check(cyc, em.upsilon.F)

    cons = max(circ.K_drift, circ.norm_drift, cyc.K_drift, cyc.norm_drift, ell.K_drift, ell.norm_drift)
    measured = {
        "conservation_drift": _f(cons), "kepler_period_error": _f(period_err),
        "eccentricity_orbit": _f(e_orbit), "eccentricity_vis_viva": _f(e_visviva),
        "cyclotron_radius_error": _f(radius_err), "lorentz_residual": _f(lorentz),
    }
    ok = (cons <= tol["conservation"] and period_err <= tol["kepler_period"]
          and abs(e_orbit - e_visviva) <= tol["eccentricity"] and radius_err <= tol["cyclotron_radius"]
          and lorentz <= tol["lorentz"])
    keys = ("conservation", "kepler_period", "eccentricity", "cyclotron_radius", "lorentz")
    return Criterion(5, "geodesic conservation, Kepler and cyclotron orbits", bool(ok), measured,
                     {k: tol[k] for k in keys})


def c06_perihelion(tol, seed):
    res = G.perihelion_comparison(m=0.01, r0=1.0)
    measured = {k: _f(v) for k, v in res.items()}
    return Criterion(6, "Newtonian-metric vs Schwarzschild periapsis at r >= 100 m", res["gap"] <= tol["perihelion"],
                     measured, {"perihelion": tol["perihelion"]},
                     notes="the potential metric reproduces Newtonian orbits, which lack the relativistic advance")


# --------------------------------------------------------------------------
# 7: spectral

# Reference spin matrices; rows and columns follow the basis order.
EXPECTED_SPIN_HALF_M = (
    sp.Matrix([[0, 0, -1, 0], [0, 0, 0, -1], [1, 0, 0, 0], [0, 1, 0, 0]]),
    sp.Matrix([[0, 0, 0, 1], [0, 0, -1, 0], [0, 1, 0, 0], [-1, 0, 0, 0]]),
    sp.Matrix([[0, -1, 0, 0], [1, 0, 0, 0], [0, 0, 0, 1], [0, 0, -1, 0]]),
)
EXPECTED_SPIN_HALF_HATM = (
    sp.Matrix([[0, 1, 0, 0], [1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]]),
    sp.Matrix([[0, -sp.I, 0, 0], [-sp.I, 0, 0, 0], [0, 0, 0, -sp.I], [0, 0, sp.I, 0]]),
    sp.Matrix([[-1, 0, 0, 0], [0, 1, 0, 0], [0, 0, -1, 0], [0, 0, 0, 1]]),
)
EXPECTED_SPIN_ONE_M = (
    2 * sp.Matrix([[0, 0, 1], [0, 0, 0], [1, 0, 0]]),
    2 * sp.Matrix([[0, 0, 0], [0, 0, 1], [0, -1, 0]]),
    2 * sp.Matrix([[0, 1, 0], [-1, 0, 0], [0, 0, 0]]),
)


def c07_spectral(tol, seed):
    dims = {}
    dims_ok = True
    for p in range(5):
        b = S.eigenbasis(p)
        dims[str(p)] = b.dim
        dims_ok &= b.dim == (p + 1) ** 2
    samples = S.sphere_points(64, seed=seed % (2**31))
    exact = fd = 0.0
    for p in range(1, 5):
        for P_ in S.eigenbasis(p).elements:
            for rho in (1.0, 2.5):
                exact = max(exact, S.laplace_eigencheck(P_, rho, samples, "exact"))
        for P_ in S.eigenbasis(p).elements[:3]:
            fd = max(fd, S.laplace_eigencheck(P_, 1.0, samples[:16], "fd", h=1e-3))

    x_basis = [S.HarmonicPoly(x) for x in S.X]
    m_half = S.spin_matrices(x_basis)
    beta = S.spin_matrices(S.BETA_SPIN_HALF)
    one = S.spin_matrices(S.SPIN_ONE_BASIS)

    def eq(a, b):
        return [bool((a[k] - b[k]).applyfunc(sp.expand) == sp.zeros(*a[k].shape)) for k in range(3)]

    matrices = {
        "spin_half_M": eq(m_half.M, EXPECTED_SPIN_HALF_M),
        "spin_half_hatM_beta": eq(beta.hatM, EXPECTED_SPIN_HALF_HATM),
        "spin_one_M": eq(one.M, EXPECTED_SPIN_ONE_M),
    }
    expected_ok = all(all(v) for v in matrices.values())
    comm = {}
    for name, sm in (("spin_half", beta), ("spin_one", one)):
        defects = S.commutator_defects(sm.hatM)
        comm[name] = {"exact": all(d == sp.zeros(*d.shape) for d in defects),
                      "scale": str(S.commutator_scale(sm.hatM))}
    comm_ok = all(v["exact"] for v in comm.values())
    hopf_ok = all(P_.is_harmonic() for q in (2, 4, 6) for P_ in S.restricted_space(q))
    pts = S.sphere_points(32, seed=1)
    div = max(abs(S.sphere_divergence(lambda y, k=k: S.L_vector(k, y), x)) for k in (1, 2, 3) for x in pts)
    measured = {
        "dims": dims, "eigen_exact": _f(exact), "eigen_fd": _f(fd), "matches_expected_matrices": matrices,
        "commutators": comm, "hopf_pullbacks_harmonic": hopf_ok, "field_divergence": _f(div),
    }
    ok = (dims_ok and exact <= tol["eigen_exact"] and fd <= tol["eigen_fd"] and expected_ok and comm_ok
          and hopf_ok and div <= tol["field_divergence"])
    keys = ("eigen_exact", "eigen_fd", "field_divergence")
    notes = ""
    if not expected_ok or not comm_ok:
        notes = "computed spin matrices differ from the reference ones; commutators close with factor -2"
    return Criterion(7, "S3 eigenspaces, spin matrices, Hopf pullbacks", bool(ok), measured,
                     {k: tol[k] for k in keys}, notes)


# --------------------------------------------------------------------------
# 8-10: waves, conformal curvature, focusing


def c08_waves(tol, seed):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-2, 2, (50, 4))
    worst_kg = 0.0
    for M1, lam, Q in ((1.3, (0.1, 0.05, 0.0), 1.0), (2.0, (0.3, -0.2, 0.1), 0.0), (0.7, (0.0, 0.0, 0.2), 2.0)):
        mode = Wv.OscillatingMode.moving(M1, lam, Q=Q)
        worst_kg = max(worst_kg, Wv.kg_residual(mode, P.Neutral(), mode.M, points=pts))
    n = 32
    L = 2 * np.pi * 4
    T = 2 * np.pi
    grid = Wv.Grid((0, 1), (np.arange(n) * T / n, np.arange(n) * L / n))
    vals = grid.sample(Wv.Field(sp.exp(-sp.I * (2 * Wv.t_sym - Wv.x1_sym / 4)) * (1 + sp.Rational(3, 10) * sp.cos(Wv.x1_sym / 2))))
    subst = max(
        Wv.substitution_defect(vals, grid, P.Neutral(), 3.0),
        Wv.substitution_defect(vals, grid, P.Newtonian(P.Quadratic((1e-3, 0, 0))), 3.0),
        Wv.substitution_defect(vals, grid, P.Electromagnetic(P.UniformField((0.01, 0, 0), (0, 0, 0.02))), 3.0, Q=1.0),
    )
    v = 0.01
    ratio = Wv.plane_wave_time_ratio(v)
    gap1 = Wv.packet_gap(0.1)
    gap2 = Wv.packet_gap(0.05)
    shrink = gap1.gap / gap2.gap
    measured = {"kg_plane_wave": _f(worst_kg), "substitution": _f(subst), "eps_ratio": _f(ratio),
                "half_v_squared": _f(0.5 * v * v), "packet_gap_v0.1": _f(gap1.gap),
                "packet_gap_v0.05": _f(gap2.gap), "shrink": _f(shrink)}
    ok = (worst_kg <= tol["kg_plane_wave"] and subst <= tol["substitution"]
          and abs(ratio - 0.5 * v * v) <= tol["eps_ratio"] and shrink >= tol["packet_shrink"])
    keys = ("kg_plane_wave", "substitution", "eps_ratio", "packet_shrink")
    return Criterion(8, "wave equations and the Schroedinger limit", bool(ok), measured, {k: tol[k] for k in keys})


def c09_yamabe(tol, seed):
    g0 = constant_metric(P.G0_FULL, "g0")

    def a(p):
        t, x1, x2, x3, u, w = p
        return 1.0 + 0.1 * math.sin(t) + 0.05 * x1 * x2 + 0.08 * math.cos(x3 + 0.5 * w) + 0.03 * u * u

    pts = sample_box([-0.5] * 6, [0.5] * 6, 3, seed=seed + 9)
    worst = max(C.yamabe_check(a, g0, 6, p, S_g0=0.0) for p in pts)
    return Criterion(9, "conformal scalar curvature vs Yamabe equation", worst <= tol["yamabe"],
                     {"relative_error": _f(worst)}, {"yamabe": tol["yamabe"]})


def c10_raychaudhuri(tol, seed):
    ds = 1e-3
    measured = {}
    ok = True
    for th0, n in ((-1.0, 6), (-2.0, 7)):
        s1 = C.raychaudhuri_integrate(th0, n, ds=ds)
        bound = C.raychaudhuri_bound(th0, n)
        measured[f"theta0={th0},n={n}"] = {"blowup": _f(s1 if s1 is not None else float("nan")), "bound": _f(bound)}
        ok &= s1 is not None and abs(s1 - bound) <= ds
    return Criterion(10, "Raychaudhuri blow-up parameter", bool(ok), measured, {"step": ds})


# --------------------------------------------------------------------------
# 11-14: probabilities and experiments


def c11_probability(tol, seed):
    gap = R.binomial_poisson_gap(10_000, 5.0)
    kappa = 3.0
    region = R.RegionSpec.whole((0.0, 0.0, 0.0), (2.0, 1.0, 1.0))
    a_c = lambda t, x: np.cos(kappa * x[:, 0])
    sample = R.sample_singularities(a_c, region, 100_000, seed=seed, envelope=1.0)
    edges = np.linspace(0.0, 2.0, 41)
    chi = R.chi2_against(sample.positions[:, 0], edges, R.fringe_bin_probabilities(kappa, edges))
    measured = {"binomial_poisson_gap": _f(gap), "chi2": _f(chi.statistic), "p_value": _f(chi.pvalue),
                "seed": seed}
    ok = gap <= tol["binomial_poisson"] and chi.pvalue > tol["chi2_p"]
    return Criterion(11, "counting law and singularity sampler", bool(ok), measured,
                     {"binomial_poisson": tol["binomial_poisson"], "chi2_p": tol["chi2_p"]})


def c12_instruments(tol, seed):
    rng = np.random.default_rng(seed)
    window_err = 0.0
    for _ in range(20):
        lam, q = rng.uniform(0.1, 4.0, 2)
        L = float(rng.uniform(5.0, 60.0))
        closed = E.window_inner_product(E.Trig("cos", lam), E.Trig("cos", q), L)
        window_err = max(window_err, abs(closed - E.cos_cos_closed_form(lam, q, L)))
        for fk, gk in (("cos", "cos"), ("sin", "sin"), ("cos", "sin")):
            f, g = E.Trig(fk, lam, 0.3), E.Trig(gk, q, -0.2)
            window_err = max(window_err, abs(E.window_inner_product(f, g, L)
                                             - E.window_inner_product_simpson(f, g, L, n=40001)))
    lam = 1.7
    L = 30.0
    window_err = max(window_err, abs(E.window_inner_product(E.Trig("cos", lam), E.Trig("cos", lam), L)
                                     - (1 + math.sin(L * lam) / (L * lam))))
    window_err = max(window_err, abs(E.window_inner_product(E.Trig("cos", lam), E.Trig("sin", lam), L)))

    m1 = E.PlaneMode(1.0, 0.5, (1.0, 0.0, 0.0))
    m2 = E.PlaneMode(0.3, -1.0, (2.0, 0.0, 0.0))
    inst = E.Instrument(((1.0, 0.0, 0.0), (2.0, 0.0, 0.0)), L=1000.0)
    meas = E.measure_impulse([m1, m2], inst, t=0.3, u=0.2)
    expect = [m.weight / (m1.weight + m2.weight) for m in (m1, m2)]
    rel = max(abs(p - e) / e for p, e in zip(meas.probabilities, expect))

    # dyadic gaps keep the products exact: 1024 * 2^-17 = 2^-7
    close = E.measure_impulse([m1, E.PlaneMode(1.0, 0.0, (1.0 + 2.0**-17, 0.0, 0.0))],
                              E.Instrument(((1.0, 0.0, 0.0),), L=1024.0))
    energy = E.measure_energy([E.PlaneMode(1, 0, (0, 0, 0), Mprime=3.0),
                               E.PlaneMode(1, 0, (0, 0, 0), Mprime=3.0 + 2.0**-17)],
                              E.Instrument((3.0,), T=1024.0, kind="energy"))
    measured = {"window_max_error": _f(window_err), "separated_gap_product": _f(meas.min_gap_product),
                "separated_flag": meas.separated, "weight_relative_error": _f(rel),
                "close_gap_product": _f(close.min_gap_product), "overlap_flag_impulse": close.overlap,
                "energy_gap_product": _f(energy.min_gap_product), "overlap_flag_energy": energy.overlap}
    ok = (window_err <= tol["window"] and meas.min_gap_product >= 1e3 and meas.separated
          and rel <= tol["mode_weights"] and close.min_gap_product <= 0.01 and close.overlap and energy.overlap
          and not energy.separated)
    return Criterion(12, "window instruments", bool(ok), measured,
                     {"window": tol["window"], "mode_weights": tol["mode_weights"]})


def c13_stern_gerlach(tol, seed):
    rng = np.random.default_rng(seed)
    worst = 0.0
    exact_sum = True
    for _ in range(100):
        th, thp = rng.uniform(-math.pi, math.pi, 2)
        res = E.stern_gerlach(E.spin_state(thp, float(rng.uniform(0, 2 * math.pi))), th)
        worst = max(worst, abs(res.p1 - math.cos((th - thp) / 2) ** 2))
        exact_sum &= res.p1 + res.p2 == 1.0
    return Criterion(13, "Stern-Gerlach probabilities", bool(worst <= tol["stern_gerlach"] and exact_sum),
                     {"max_error": _f(worst), "sum_exact": bool(exact_sum)}, {"stern_gerlach": tol["stern_gerlach"]})


def c14_chsh(tol, seed):
    res = E.chsh(*E.CHSH_ANGLES)
    s_err = abs(res.S - 2 * math.sqrt(2))
    rng = np.random.default_rng(seed)
    table_err = 0.0
    for rule in ("example1", "example1_right", "example2"):
        for _ in range(200):
            angles = rng.uniform(-math.pi, math.pi, 4)
            jp = E.entangled_joint_probs(E.EntangledPair(*map(float, angles), rule))
            table_err = max(table_err, abs(jp.total - 1), abs(jp.marginals["G+"] - 0.5),
                            abs(jp.marginals["D+"] - 0.5), jp.cross_check)
    lhv = E.lhv_baseline(1_000_000, seed)
    lhv_ok = abs(lhv.S) <= 2 + tol["lhv_sigmas"] * lhv.stderr
    measured = {"S": _f(res.S), "S_error": _f(s_err), "table_error": _f(table_err), "lhv_S": _f(lhv.S),
                "lhv_stderr": _f(lhv.stderr), "lhv_E": [_f(e) for e in lhv.E], "seed": seed}
    ok = s_err <= tol["chsh"] and table_err <= tol["chsh"] and lhv_ok
    return Criterion(14, "CHSH value, joint tables and local baseline", bool(ok), measured,
                     {"chsh": tol["chsh"], "lhv_sigmas": tol["lhv_sigmas"]})


CHECKS: List[Callable] = [
    c01_nilpotency, c02_christoffel, c03_ricci_identities, c04_fluid, c05_geodesics, c06_perihelion,
    c07_spectral, c08_waves, c09_yamabe, c10_raychaudhuri, c11_probability, c12_instruments,
    c13_stern_gerlach, c14_chsh,
]


def run_check(number: int, profile="default", seed: int = DEFAULT_SEED) -> Criterion:
    tol = resolve_profile(profile)
    if number == 15:
        return c15_determinism(profile, seed)
    if not 1 <= number <= len(CHECKS):
        raise ValidationError("criterion number must be in 1..15")
    return CHECKS[number - 1](tol, seed)


def report_json(criteria: List[Criterion], profile, seed: int) -> str:
    doc = {"seed": seed, "profile": profile if isinstance(profile, str) else resolve_profile(profile),
           "criteria": [c.to_dict() for c in criteria],
           "all_passed": all(c.passed for c in criteria)}
    return json.dumps(doc, sort_keys=True, indent=1, default=_f) + "\n"


def core_report(profile="default", seed: int = DEFAULT_SEED, timings: Optional[dict] = None) -> List[Criterion]:
    tol = resolve_profile(profile)
    out = []
    for fn in CHECKS:
        t0 = time.perf_counter()
        out.append(fn(tol, seed))
        if timings is not None:
            timings[out[-1].number] = time.perf_counter() - t0
    return out


def c15_determinism(profile="default", seed: int = DEFAULT_SEED, first: Optional[List[Criterion]] = None) -> Criterion:
    """Runs the fourteen checks (twice unless ``first`` is given) and compares the serialised reports."""
    a = report_json(first if first is not None else core_report(profile, seed), profile, seed)
    b = report_json(core_report(profile, seed), profile, seed)
    same = a == b
    return Criterion(15, "byte-identical reports for identical seed", same,
                     {"identical": same, "bytes": len(a)}, {})


def verify_all(profile="default", seed: int = DEFAULT_SEED, timings: Optional[dict] = None) -> List[Criterion]:
    first = core_report(profile, seed, timings)
    t0 = time.perf_counter()
    last = c15_determinism(profile, seed, first)
    if timings is not None:
        timings[15] = time.perf_counter() - t0
    return first + [last]
