import numpy as np
import pytest

from oscillametric import potentials as P
from oscillametric.manifold import ValidationError, sample_box

PTS = sample_box([-1, 0.5, 0.5, 0.5, -1, -1], [1, 2, 2, 2, 1, 1], 30, seed=5)


def test_neutral_metric_is_g0():
    g = P.build_metric(P.Neutral())
    assert np.array_equal(g(np.zeros(6)), np.diag([-1.0, 1, 1, 1, -1, 1]))


def test_newtonian_zero_potential_is_g0():
    g = P.build_metric(P.Newtonian(P.Linear((0, 0, 0))))
    for p in PTS[:5]:
        assert np.array_equal(g(p), P.G0_FULL)


def test_newtonian_formula():
    spec = P.Newtonian(P.PointMass(0.7))
    p = PTS[0]
    v = -0.7 / np.linalg.norm(p[1:4])
    x1 = np.array([1, 0, 0, 0, 0, 1.0])
    assert np.allclose(P.build_metric(spec)(p), P.G0_FULL - 2 * v * np.outer(x1, x1), atol=1e-15)


def test_static_fluid_closed_form_at_origin():
    g = P.build_metric(P.StaticFluid())
    assert np.array_equal(g(np.zeros(5)), np.diag([-1.0, 1, 1, 1, 1]))
    p = np.array([0, 0.3, -0.2, 0.5, 0])
    a, b = -p[2], p[1]
    expect = np.diag([-1.0, 1, 1, 1, 1])
    expect[0, 1] = expect[1, 0] = expect[4, 1] = expect[1, 4] = a
    expect[0, 2] = expect[2, 0] = expect[4, 2] = expect[2, 4] = b
    assert np.allclose(g(p), expect, atol=1e-15)


def test_normalisation_errors_name_the_product():
    with pytest.raises(ValidationError, match="g0\\(X1,X0\\)"):
        P.Newtonian(P.Linear(), X1_flat=(2, 0, 0, 0, 0, 2))
    with pytest.raises(ValidationError, match="g0\\(X2,Y\\)"):
        P.Electromagnetic(P.UniformField(), X2_flat=(0, 0, 0, 0, 2, 2))


def test_neumann_inverse_newtonian_matches_annex_form():
    spec = P.Newtonian(P.Linear((0.3, 0, 0)))
    p = np.array([0, 1.0, 0, 0, 0, 0])
    h = P.perturbation(spec, p)
    ginv = P.neumann_inverse(np.linalg.inv(P.G0_FULL), h, 2)
    x_up = np.linalg.solve(P.G0_FULL, P.X1_FLAT)
    assert np.max(np.abs(ginv - (np.linalg.inv(P.G0_FULL) + 2 * 0.3 * np.outer(x_up, x_up)))) <= 1e-13
    assert np.max(np.abs(ginv - np.linalg.inv(P.G0_FULL + h))) <= 1e-13


def test_neumann_inverse_em_and_zero():
    spec = P.Electromagnetic(P.ConstantCovector((0, 0.2, 0, 0)))
    h = P.perturbation(spec, np.zeros(6))
    g0inv = np.linalg.inv(P.G0_FULL)
    assert np.max(np.abs(P.neumann_inverse(g0inv, h, 3) - np.linalg.inv(P.G0_FULL + h))) <= 1e-13
    assert np.array_equal(P.neumann_inverse(g0inv, np.zeros((6, 6)), 2), g0inv)


def test_neumann_inverse_rejects_non_nilpotent():
    with pytest.raises(ValidationError):
        P.neumann_inverse(np.eye(3), np.diag([0.1, 0, 0]), 3)


def test_nilpotency_indices():
    p = np.array([0, 1.0, 0.5, 0.2, 0, 0])
    newton = P.Newtonian(P.PointMass(1.0))
    em = P.Electromagnetic(P.ConstantCovector((0, 0.2, 0, 0)))
    assert P.nilpotency_index(P.G0_FULL, P.perturbation(newton, p)) == 2
    assert P.nilpotency_index(P.G0_FULL, P.perturbation(em, p)) == 3
    assert P.nilpotency_index(P.G0_FULL, np.zeros((6, 6))) == 1


def test_det_invariance_examples():
    assert P.det_invariance_check(P.Newtonian(P.Linear((0, 0, 0), 0.5)), PTS) <= 1e-12
    assert P.det_invariance_check(P.Electromagnetic(P.UniformField(B=(0, 0, 1))), PTS) <= 1e-12
    eps = 1e-3
    gap = abs(np.linalg.det(P.G0_FULL + np.diag([eps, 0, 0, 0, 0, 0])) - np.linalg.det(P.G0_FULL))
    assert abs(gap - eps) <= 1e-15


def test_traces_of_powers_vanish():
    for spec in (P.Newtonian(P.PointMass(0.4)), P.Electromagnetic(P.UniformField((0.1, 0, 0), (0, 0.2, 0.3)))):
        for p in PTS[:10]:
            e = P.endomorphism(P.G0_FULL, P.perturbation(spec, p))
            assert abs(np.trace(e)) <= 1e-12
            assert abs(np.trace(e @ e)) <= 1e-12


def test_recovered_vectors_satisfy_normalisation():
    newton = P.Newtonian(P.PointMass(0.4))
    for p in PTS[:10]:
        x1 = P.recover_X1(newton, p)
        assert abs(x1 @ P.G0_FULL @ x1) <= 1e-12
        assert abs(x1 @ P.G0_FULL @ P.X0 - 1) <= 1e-12
    em = P.Electromagnetic(P.UniformField((0.1, 0, 0), (0, 0.2, 0.3)))
    for p in PTS[:10]:
        x2 = P.recover_X2(em, p)
        ups = np.zeros(6)
        ups[:4] = np.linalg.solve(P.G0_FULL[:4, :4], em.upsilon.value(p[:4]))
        assert abs(x2 @ P.G0_FULL @ P.Y - 1) <= 1e-12
        assert abs(x2 @ P.G0_FULL @ ups) <= 1e-12


def test_recover_X1_undefined_where_v_vanishes():
    with pytest.raises(ValidationError):
        P.recover_X1(P.Newtonian(P.Linear((1, 0, 0))), np.zeros(6))


def test_spec_json_round_trip():
    for spec in (P.Neutral(), P.Newtonian(P.Quadratic((1, 2, 3), 0.5)),
                 P.Electromagnetic(P.UniformField((0.1, 0, 0), (0, 0, 1))),
                 P.EMSpin(P.ConstantCovector((0, 1, 0, 0)), B=(0, 0, 2), varrho=0.5), P.StaticFluid()):
        doc = P.spec_to_dict(spec)
        assert P.spec_to_dict(P.spec_from_dict(doc)) == doc


def test_spec_json_rejects_unknown_keys():
    with pytest.raises(ValidationError):
        P.spec_from_dict({"kind": "neutral", "extra": 1})
    with pytest.raises(ValidationError):
        P.spec_from_dict({"kind": "nope"})
