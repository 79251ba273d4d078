"""Randomised invariants checked with hypothesis."""

import math

import numpy as np
import sympy as sp
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from oracles import simpson
from oscillametric import experiments as E
from oscillametric import potentials as P
from oscillametric import spectral as S
from oscillametric import stochastic as R
from oscillametric.manifold import constant_metric, lower_index, raise_index

FAST = settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
SLOW = settings(max_examples=15, deadline=None, suppress_health_check=[HealthCheck.too_slow])

finite = st.floats(-3, 3, allow_nan=False, allow_infinity=False)
angle = st.floats(-math.pi, math.pi, exclude_min=True, allow_nan=False)
vec6 = st.lists(finite, min_size=6, max_size=6).map(np.array)
# spatial positions kept away from the point-mass singularity
spatial = st.tuples(st.floats(0.3, 3), st.floats(-3, 3), st.floats(-3, 3))


@FAST
@given(vec6, vec6)
def test_lower_raise_round_trip(x, p):
    g = constant_metric(P.G0_FULL)
    back = raise_index(g, p, lower_index(g, p, x))
    assert np.max(np.abs(back - x)) <= 1e-12 * max(1.0, np.max(np.abs(x)))


@FAST
@given(st.floats(0.01, 5), spatial, finite, finite)
def test_newtonian_perturbation_nilpotent_and_det_preserving(m, xyz, t, w):
    p = np.array([t, *xyz, 0.0, w])
    dg = P.perturbation(P.Newtonian(P.PointMass(m)), p)
    assert P.nilpotency_index(P.G0_FULL, dg) == 2
    assert abs(np.linalg.det(P.G0_FULL + dg) - np.linalg.det(P.G0_FULL)) <= 1e-9 * (1 + np.max(np.abs(dg)) ** 2)


@FAST
@given(st.lists(st.floats(-1, 1), min_size=3, max_size=3), st.lists(st.floats(-1, 1), min_size=3, max_size=3),
       vec6)
def test_em_perturbation_nilpotent_of_order_at_most_three(e, b, p):
    dg = P.perturbation(P.Electromagnetic(P.UniformField(tuple(e), tuple(b))), p)
    assert P.nilpotency_index(P.G0_FULL, dg) <= 3
    assert abs(np.linalg.det(P.G0_FULL + dg) - np.linalg.det(P.G0_FULL)) <= 1e-9 * (1 + np.max(np.abs(dg)) ** 3)


@FAST
@given(angle, angle, st.floats(0, 2 * math.pi))
def test_stern_gerlach_cos_squared_law(theta, state_angle, phase):
    r = E.stern_gerlach(E.spin_state(state_angle, phase), theta)
    assert abs(r.p1 + r.p2 - 1) <= 1e-15
    assert abs(r.p1 - math.cos((theta - state_angle) / 2) ** 2) <= 1e-12


@FAST
@given(angle, angle, angle, angle, st.sampled_from(["example1", "example1_right", "example2"]))
def test_joint_tables_normalised_with_half_marginals(g1, d1, g, d, rule):
    j = E.entangled_joint_probs(E.EntangledPair(g1, d1, g, d, transform_rule=rule))
    assert abs(j.total - 1) <= 1e-14
    assert all(-1e-15 <= v <= 1 + 1e-15 for v in j.probs.values())
    assert abs(j.marginals["G+"] - 0.5) <= 1e-14 and abs(j.marginals["D+"] - 0.5) <= 1e-14


@FAST
@given(angle, angle, angle)
def test_correlation_is_cosine_for_aligned_first_angles(t1, g, d):
    j = E.entangled_joint_probs(E.EntangledPair(t1, t1, g, d))
    corr = j.probs["++"] + j.probs["--"] - j.probs["+-"] - j.probs["-+"]
    assert abs(corr - math.cos(g - d)) <= 1e-12


@SLOW
@given(st.floats(0.05, 1.95), st.floats(0.5, 6))
def test_region_probability_additive(cut, kappa):
    box = ((0.0, 0.0, 0.0), (2.0, 1.0, 1.0))
    field = lambda t, x: np.cos(kappa * x[:, 0]) + 0.1  # noqa: E731
    left = R.RegionSpec((0, 0, 0), (cut, 1, 1), *box, grid=32)
    right = R.RegionSpec((cut, 0, 0), (2, 1, 1), *box, grid=32)
    assert abs(R.region_probability(field, left) + R.region_probability(field, right) - 1) <= 1e-9


@FAST
@given(st.integers(1, 300), st.floats(0, 1))
def test_count_law_sums_to_one(N, p):
    assert abs(sum(R.count_law(N, p, k) for k in range(N + 1)) - 1) <= 1e-12


@SLOW
@given(st.integers(1, 3), st.lists(st.integers(-3, 3), min_size=16, max_size=16), st.integers(1, 3))
def test_L_preserves_harmonicity(p, coeffs, k):
    basis = S.eigenbasis(p).elements
    poly = S.HarmonicPoly(sum(int(c) * b.expr for c, b in zip(coeffs, basis)))
    out = S.L_apply(k, poly)
    assert out.is_harmonic()
    assert sp.Poly(out.expr, *S.X).is_homogeneous or out.expr == 0


@SLOW
@given(st.sampled_from(["cos", "sin"]), st.floats(0.2, 3), st.floats(-1, 1),
       st.sampled_from(["cos", "sin"]), st.floats(0.2, 3), st.floats(-1, 1), st.floats(-5, 5), st.floats(2, 40))
def test_window_closed_form_matches_simpson(k1, l1, ph1, k2, l2, ph2, center, L):
    f, g = E.Trig(k1, l1, ph1), E.Trig(k2, l2, ph2)
    want = 2 / L * simpson(lambda x: f(x) * g(x), center - L / 2, center + L / 2, 40_001)
    assert abs(E.window_inner_product(f, g, L, center=center) - want) <= 1e-8
