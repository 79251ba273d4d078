import math

import numpy as np
import pytest
import sympy as sp

from oscillametric import potentials as P
from oscillametric import spectral as S
from oscillametric import waves as Wv
from oscillametric.manifold import ValidationError

RNG = np.random.default_rng(12)
PTS = RNG.uniform(-2, 2, (40, 4))


def test_mass_frequency_examples():
    assert Wv.mass_frequency(0.0, 9.0, 5.0) == 2.0
    assert Wv.mass_frequency(0.7, 0.0, 0.0) == math.sqrt(0.7)
    with pytest.raises(ValidationError):
        Wv.mass_frequency(0.0, 1.0, 2.0)


def test_S_constant_and_higgs_like_mode():
    S = Wv.S_constant(6, 10.0)
    assert S == 4 / 20 * 10.0
    assert Wv.mass_frequency(S, 0.0, 0.0) == math.sqrt((6 - 2) / (4 * 5) * 10.0)


def test_charge_quantisation():
    assert Wv.is_charge_quantized(2.0, 1.0)
    assert Wv.is_charge_quantized(4.0, 0.5)
    assert not Wv.is_charge_quantized(1.5, 1.0)


def test_pseudo_mass():
    assert Wv.pseudo_mass(-5.0, 1.0) == 2.0
    with pytest.raises(ValidationError):
        Wv.pseudo_mass(1.0, 0.0)


def test_mode_dispersion_and_velocity():
    mode = Wv.OscillatingMode.moving(1.5, (0.3, 0.0, 0.4))
    assert abs(mode.M - 1.5) <= 1e-14
    assert np.allclose(mode.velocity, [0.3, 0.0, 0.4], atol=1e-15)
    assert abs(mode.M - math.sqrt(1 - 0.25) * mode.Mprime) <= 1e-14
    with pytest.raises(ValidationError):
        Wv.OscillatingMode(1.0, (2.0, 0, 0))
    with pytest.raises(ValidationError):
        Wv.OscillatingMode(2.0, (0, 0, 0), Q=0.0, mu=1.0)


def test_canonical_function_examples():
    rest = Wv.OscillatingMode(1.0)
    vals = Wv.canonical_function(rest)(PTS)
    assert np.max(np.abs(vals - np.cos(PTS[:, 0]))) <= 1e-15
    pos = Wv.OscillatingMode(2.0, (0.5, 0, 0), Q=1.0)
    neg = Wv.OscillatingMode(2.0, (0.5, 0, 0), Q=-1.0)
    a = Wv.canonical_function(pos)(PTS)
    b = Wv.canonical_function(neg)(PTS)
    phase = 2.0 * PTS[:, 0] - 0.5 * PTS[:, 1]
    assert np.max(np.abs(a - np.exp(-1j * phase))) <= 1e-14
    assert np.max(np.abs(b - np.conj(a))) <= 1e-14


def test_sampled_canonical_function_matches_exact():
    mode = Wv.OscillatingMode(2.0, (0.5, 0, 0), Q=2.0, C=0.3, Cprime=0.7)
    sampled = Wv.canonical_function(Wv.mode_function_a(mode), Qplus=2.0)(PTS)
    exact = Wv.canonical_function(mode)(PTS)
    assert np.max(np.abs(sampled - exact)) <= 1e-13


def test_state_function_examples():
    still = Wv.OscillatingMode(1.3, Q=1.0, C=0.6, Cprime=0.8)
    psi = Wv.state_function(Wv.canonical_function(still), still.M)
    assert np.max(np.abs(psi(PTS) - (0.6 + 0.8j))) <= 1e-14
    moving = Wv.OscillatingMode.moving(1.0, (0.2, 0, 0), Q=1.0, C=0.6, Cprime=0.8)
    ac = Wv.canonical_function(moving)
    psi = Wv.state_function(ac, moving.M)
    ph = (moving.Mprime - moving.M) * PTS[:, 0] - moving.lam[0] * PTS[:, 1]
    assert np.max(np.abs(psi(PTS) - (0.6 + 0.8j) * np.exp(-1j * ph))) <= 1e-13
    assert np.max(np.abs(np.abs(psi(PTS)) - np.abs(ac(PTS)))) <= 1e-14


def test_plane_wave_kg_residual():
    mode = Wv.OscillatingMode.moving(1.3, (0.1, 0.2, -0.1), Q=1.0)
    assert Wv.kg_residual(mode, P.Neutral(), mode.M, points=PTS) <= 1e-10


def test_kg_sensitivity_to_frequency():
    mode = Wv.OscillatingMode.moving(1.3, (0.1, 0.0, 0.0), Q=1.0)
    detuned = Wv.OscillatingMode(mode.Mprime + 1e-3, mode.lam, 1.0)
    res = Wv.kg_residual(detuned, P.Neutral(), mode.M, points=PTS)
    assert abs(res - 2 * mode.Mprime * 1e-3) <= 1e-5


def test_decaying_mode():
    # nu = |lam|^2 - Q^2 + mu is the eigenvalue of the non-time part of the operator
    K, lam, Q, mu = 0.5, (0.3, 0.0, 0.1), 0.5, 0.1
    nu = 0.1 - Q * Q + mu
    S = -K * K - nu
    assert Wv.decaying_mode_residual(K, lam, Q, mu, S, PTS[:10]) <= 1e-10
    assert Wv.pseudo_mass(nu, S) == K


def test_massless_dalembert_wave():
    f = Wv.Field(Wv.dalembert_expr())
    assert Wv.kg_residual(f, P.Neutral(), 0.0, points=PTS) <= 1e-10


def test_plane_wave_state_equation_within_stencil_bound():
    M, k = 1.0, 0.3
    omega = math.sqrt(M * M + k * k) - M
    psi = Wv.Field(sp.exp(-sp.I * (omega * Wv.t_sym - k * Wv.x1_sym)))
    n_t, n_x = 64, 64
    T, L = 2 * math.pi / omega, 2 * math.pi / k
    grid = Wv.Grid((0, 1), (np.arange(n_t) * T / n_t, np.arange(n_x) * L / n_x))
    res = Wv.pauli_residual(psi, P.Neutral(), M, grid=grid)
    assert res <= Wv.plane_wave_fd_bound(omega, (k, 0, 0), M, T / n_t, L / n_x)


def test_zeeman_term_constant_spinor():
    hat = [np.array(m.evalf(), complex) for m in S.spin_matrices(S.BETA_SPIN_HALF).hatM]
    spec = P.EMSpin(P.ConstantCovector((0, 0, 0, 0)), B=(0, 0, 0.4), varrho=0.5)
    spin = Wv.SpinCoupling.from_spec(spec, hat)
    c = np.array([0.3, -0.2j, 0.1, 0.5])
    field = Wv.Field(fn=lambda pts: np.tile(c, (len(pts), 1)), ncomp=4)
    q = 2.0
    res = Wv.kg_residual(field, spec, 0.0, Qplus=q, spin=spin, points=PTS[:3], reduce=False)
    want = -2 * 0.5 * q * 0.4 * (hat[2] @ c) + (q * 0.5 * 1.0) ** 2 * 0.16 * c
    assert np.max(np.abs(res - want)) <= 1e-10


def test_spin_equations_decouple_for_vertical_field():
    hat = [np.array(m.evalf(), complex) for m in S.spin_matrices(S.BETA_SPIN_HALF).hatM]
    spin = Wv.SpinCoupling(tuple(hat), B=(0, 0, 1.0))
    for i in range(4):
        e = np.zeros(4, complex)
        e[i] = 1
        out = spin.apply(e)
        assert np.count_nonzero(out) == 1 and out[i] != 0


def test_spin_branch_requires_basis():
    spec = P.EMSpin(P.ConstantCovector((0, 0, 0, 0)))
    with pytest.raises(ValidationError):
        Wv.kg_residual(Wv.OscillatingMode(1.0), spec, 1.0, points=PTS[:2])


def test_substitution_identity_on_grid():
    n = 32
    grid = Wv.Grid((0, 1), (np.arange(n) * 2 * math.pi / n, np.arange(n) * 8 * math.pi / n))
    vals = grid.sample(Wv.Field(sp.exp(-sp.I * (2 * Wv.t_sym - Wv.x1_sym / 4))))
    for pot in (P.Neutral(), P.Newtonian(P.Quadratic((1e-3, 0, 0)))):
        assert Wv.substitution_defect(vals, grid, pot, 3.0) <= 1e-10


def test_epsilon_ratios():
    v = 0.1
    mode = Wv.OscillatingMode.moving(1.0, (v, 0, 0), Q=1.0)
    psi = Wv.state_function(Wv.canonical_function(mode), mode.M)
    rep = Wv.epsilon_diagnostics(psi, mode.M, points=PTS[:5])
    assert abs(rep.ratio_dt - (1 / math.sqrt(1 - v * v) - 1)) <= 1e-6
    assert abs(Wv.plane_wave_time_ratio(0.1) - 5.038e-3) <= 1e-6
    rest = Wv.OscillatingMode(1.0, Q=1.0)
    rep0 = Wv.epsilon_diagnostics(Wv.state_function(Wv.canonical_function(rest), 1.0), 1.0, points=PTS[:5])
    assert rep0.ratio_dt <= 1e-9
    pot = P.Newtonian(P.Linear((0, 0, 0), 1e-4))
    rep1 = Wv.epsilon_diagnostics(psi, mode.M, potential=pot, points=PTS[:5])
    assert abs(rep1.eps_pot - 1e-2) <= 1e-12


def test_charge_vector_classification():
    for Q, sign in ((1.0, 1), (-1.0, -1)):
        mode = Wv.OscillatingMode.moving(1.0, (0.3, 0, 0), Q=Q)
        rep = Wv.charge_vector(Wv.mode_function_a(mode), [0.1, 0.2, 0, 0], abs(Q))
        assert rep.kind == "timelike" and rep.sign == sign
    massless = Wv.OscillatingMode(1.0, (1.0, 0, 0), Q=1.0, mu=0.0, S0=1.0)
    assert Wv.charge_vector(Wv.mode_function_a(massless), [0, 0, 0, 0], 1.0).kind == "null"


def test_evolution_zero_stays_zero_and_cfl():
    x = np.arange(64) * 0.5
    ev = Wv.kg_evolve_1plus1(np.zeros(64), np.zeros(64), x, 1.0, 0.2, 50)
    assert np.all(ev.psi == 0)
    with pytest.raises(ValidationError):
        Wv.kg_evolve_1plus1(np.zeros(64), np.zeros(64), x, 1.0, 0.3, 5)


def test_plane_wave_phase_velocity():
    measured, exact = Wv.plane_wave_phase_velocity()
    assert abs(measured - exact) <= 1e-3


def test_packet_gap_shrinks_when_speed_halves():
    a = Wv.packet_gap(0.1)
    b = Wv.packet_gap(0.05)
    assert a.gap / b.gap >= 3.5


def test_evolution_norm_and_rows():
    x = np.arange(128) * 1.0
    psi0 = np.exp(-((x - 64) ** 2) / 50 + 0.3j * x)
    ev = Wv.kg_evolve_1plus1(psi0, None, x, 1.0, 0.5, 200, stride=100,
                             psi1=Wv.leapfrog_branch_start(psi0, 1.0, 1.0, 0.5))
    assert ev.norm_drift <= 1e-10
    assert len(ev.to_rows()) == 3 * 128


def test_linearisation_bound():
    prev = 0.0
    for eps in (1e-3, 1e-2, 0.05):
        dev = Wv.linearization_demo(eps).max_deviation
        assert dev <= 2 * eps and dev > prev
        prev = dev
    assert Wv.linearization_demo(1e-9).max_deviation <= 2e-9
