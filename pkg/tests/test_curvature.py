import math

import numpy as np
import pytest
import sympy as sp

from oracles import COORDS6, newtonian_metric_symbolic, symbolic_christoffel, symbolic_ricci
from oscillametric import curvature as C
from oscillametric import potentials as P
from oscillametric.manifold import constant_metric, minkowski, sample_box

PTS = sample_box([-1, 0.5, 0.5, 0.5, -1, -1], [1, 1.5, 1.5, 1.5, 1, 1], 6, seed=11)


def test_minkowski_christoffel_zero():
    assert np.max(np.abs(C.christoffel(minkowski(4), np.zeros(4)).gamma)) <= 1e-12


def test_christoffel_symmetric_in_lower_indices():
    g = P.build_metric(P.Newtonian(P.PointMass(0.5)))
    gam = C.christoffel(g, PTS[0]).gamma
    assert np.array_equal(gam, np.swapaxes(gam, 1, 2))


def test_linear_potential_T_matches_symbolic_christoffel():
    t, x1, x2, x3, u, w = COORDS6
    G = symbolic_christoffel(newtonian_metric_symbolic(x1), COORDS6)
    want = np.array([[[float(G[k][i][j].subs(x1, 0)) for j in range(6)] for i in range(6)] for k in range(6)])
    got = C.christoffel_correction_T(P.Newtonian(P.Linear((1, 0, 0))), np.zeros(6))
    assert np.max(np.abs(got - want)) <= 1e-14


def test_constant_potential_T_vanishes():
    assert np.max(np.abs(C.christoffel_correction_T(P.Newtonian(P.Linear((0, 0, 0), 3.0)), PTS[0]))) == 0


def test_killing_contraction_vanishes():
    g = P.build_metric(P.Newtonian(P.PointMass(0.5)))
    gam = C.christoffel(g, PTS[1]).gamma
    assert np.max(np.abs(np.einsum("k,kij->ij", P.X1_FLAT, gam))) <= 1e-8


def test_uniform_B_spatial_block():
    B = (0.0, 0.0, 0.7)
    spec = P.Electromagnetic(P.UniformField(B=B))
    T = C.christoffel_correction_T(spec, PTS[0])
    F = spec.upsilon.field_strength(PTS[0][:4])
    F_mixed = np.linalg.solve(P.G0_FULL[:4, :4], F)  # F_i^k with first index lowered
    X = P.X2_FLAT
    for i in range(1, 4):
        for j in range(1, 4):
            for k in range(4):
                assert abs(T[k, i, j] - 0.5 * (X[i] * F_mixed[k, j] + X[j] * F_mixed[k, i])) <= 1e-15


def test_fd_christoffel_matches_closed_form():
    spec = P.Newtonian(P.PointMass(0.3))
    g = P.build_metric(spec)
    for p in PTS:
        assert np.max(np.abs(C.christoffel(g, p).gamma - C.christoffel_correction_T(spec, p))) <= 1e-5


def test_flat_ricci_zero():
    rep = C.ricci(constant_metric(P.G0_FULL), np.zeros(6))
    assert np.max(np.abs(rep.ricci)) == 0 and rep.scalar == 0


def test_harmonic_newtonian_ricci_unchanged():
    g = P.build_metric(P.Newtonian(P.Linear((1, 0, 0))))
    assert np.max(np.abs(C.ricci(g, PTS[0]).ricci)) <= 1e-4


def test_ricci_identities_and_symmetry():
    for spec in (P.Newtonian(P.Quadratic((0.2, 0.1, -0.05))), P.Newtonian(P.PointMass(0.3))):
        for p in PTS[:3]:
            assert C.newtonian_ricci_residual(spec, p) <= 1e-4
    em = P.Electromagnetic(P.CallableCovector(lambda q: np.array([0.1 * q[2], 0, 0.5 * q[1] ** 2, 0.2 * q[0] * q[3]])))
    for p in PTS[:3]:
        assert C.em_ricci_residual(em, p) <= 1e-4
        ric = C.ricci(P.build_metric(em), p).ricci
        assert np.max(np.abs(ric - ric.T)) <= 1e-10


def test_einstein_is_twice_trace_reversed_ricci():
    g = P.build_metric(P.Newtonian(P.Quadratic((0.2, 0.1, -0.05))))
    rep = C.ricci(g, PTS[0])
    assert np.allclose(rep.einstein, 2 * (rep.ricci - 0.5 * rep.scalar * g(PTS[0])), atol=1e-12)


def test_static_fluid_against_symbolic_ricci():
    t, x1, x2, x3, w = sp.symbols("t x1 x2 x3 w", real=True)
    a, b, c = -x2, x1, 0
    g = sp.diag(-1, 1, 1, 1, 1)
    for idx, coef in ((1, a), (2, b), (3, c)):
        for off in (0, 4):
            g[idx, off] = g[off, idx] = coef
    R = np.array(symbolic_ricci(g, (t, x1, x2, x3, w)).subs({x1: 0.2, x2: -0.1, x3: 0.3}).evalf(), float)
    spec = P.StaticFluid()
    assert np.max(np.abs(R - C.fluid_ricci_closed_form(spec))) <= 1e-12
    rep = C.ricci(P.build_metric(spec), np.array([0.0, 0.2, -0.1, 0.3, 0.0]))
    assert np.max(np.abs(rep.ricci - R)) <= 1e-6
    assert abs(rep.scalar) <= 1e-8
    assert spec.mu == 4.0


def test_einstein_divergence_zoo():
    assert np.max(np.abs(C.einstein_divergence(minkowski(4), np.zeros(4)))) == 0
    fluid = P.StaticFluid()
    assert np.max(np.abs(C.einstein_divergence(P.build_metric(fluid), np.array([0, 0.1, 0.2, 0.3, 0])))) <= 1e-3
    assert np.max(np.abs(C.fluid_matter_divergence(fluid, np.array([0, 0.1, 0.2, 0.3, 0])))) <= 1e-6
    newton = P.build_metric(P.Newtonian(P.PointMass(0.3)))
    assert np.max(np.abs(C.einstein_divergence(newton, PTS[0]))) <= 1e-3


def test_yamabe_examples():
    g0 = constant_metric(P.G0_FULL)
    assert C.yamabe_check(lambda p: 1.0, g0, 6, np.zeros(6), S_g0=0.0) == 0.0
    a = lambda p: 1 + 0.1 * math.sin(p[0])
    for p in PTS[:3]:
        assert C.yamabe_check(a, g0, 6, p, S_g0=0.0) <= 1e-3


def test_yamabe_rejects_nonpositive_factor():
    from oscillametric.manifold import ValidationError
    with pytest.raises(ValidationError):
        C.yamabe_check(lambda p: -1.0, constant_metric(P.G0_FULL), 6, np.zeros(6))


@pytest.mark.parametrize("theta0,n,s1", [(-1.0, 6, 4.0), (-2.0, 7, 2.5)])
def test_raychaudhuri_blowup(theta0, n, s1):
    got = C.raychaudhuri_integrate(theta0, n, ds=1e-3)
    assert abs(got - s1) <= 1e-3
    assert got <= C.raychaudhuri_bound(theta0, n) + 1e-3


def test_raychaudhuri_positive_expansion_never_focuses():
    assert C.raychaudhuri_integrate(1.0, 6, ds=1e-2, s_max=50.0) is None


def test_raychaudhuri_ricci_term_speeds_focusing():
    free = C.raychaudhuri_integrate(-1.0, 6, ds=1e-3)
    forced = C.raychaudhuri_integrate(-1.0, 6, ricci_term=lambda s: 0.5, ds=1e-3)
    assert forced < free
