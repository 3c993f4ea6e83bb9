import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from matrix_hill.potential import (PotentialSpecError, bump, normalize_potential, parse_potential_spec,
                                   zero_potential, constant_potential)

# int_{-1}^{1} exp(-1/(1-t^2)) dt to 20 digits (mpmath quad)
BUMP_MASS = 0.44399381616807943782


def pot(doc):
    return normalize_potential(parse_potential_spec(doc))


def test_zero_builtin():
    P = pot({"smooth": {"builtin": "zero"}})
    assert P.mean_diag == (0.0, 0.0)
    assert P.c0 == 0.0 and P.l1_norm == 0.0
    assert np.all(P.evaluate_smooth(np.array([0.0, 0.3, 0.9])) == 0.0)
    assert P.rotated_spec.is_scalar()


def test_constant_diag_is_reordered():
    P = pot({"smooth": {"builtin": "constant_diag", "a": 3.0}})
    assert P.mean_diag == (-3.0, 3.0)
    assert P.c0 == 3.0 and P.v1 == 0.0 and P.v2 == 18.0
    np.testing.assert_array_equal(P.evaluate_smooth(0.25), np.diag([-3.0, 3.0]))
    assert P.l1_norm == pytest.approx(6.0, rel=1e-14)


def test_delta_document():
    P = pot({"smooth": {"builtin": "constant_diag", "a": 10.0}, "delta": [{"x0": 0.5, "gamma": 0.5}]})
    assert len(P.deltas) == 1 and P.deltas[0].x0 == 0.5
    # the mean aJ + gamma J1 is diagonalized, so c0 = sqrt(a^2 + gamma^2)
    r = math.sqrt(100.25)
    assert P.mean_diag == pytest.approx((-r, r), rel=1e-15)
    assert P.c0 == pytest.approx(r, rel=1e-15)
    U = P.rotation
    np.testing.assert_allclose(U @ P.deltas[0].S @ U.T, [[0, 0.5], [0.5, 0]], atol=1e-15)
    np.testing.assert_allclose(U @ P.evaluate_smooth(0.3) @ U.T, np.diag([10.0, -10.0]), atol=1e-14)


def test_offdiagonal_mean_rotation():
    P = pot({"smooth": {"fourier": {"V3": [[0, 1.0, 0.0]]}}})
    assert P.mean_diag == pytest.approx((-1.0, 1.0), abs=1e-15)
    assert P.c0 == pytest.approx(1.0, abs=1e-15)
    U = P.rotation
    np.testing.assert_allclose(U.T @ np.array([[0, 1], [1, 0]]) @ U, np.diag([-1.0, 1.0]), atol=1e-15)


def test_smoothed_delta_value_at_center():
    P = pot({"smooth": {"builtin": "smoothed_delta", "a": 10.0, "gamma": 0.5, "nu": 0.1}})
    U = P.rotation
    V = U @ P.evaluate_smooth(0.5) @ U.T    # back in the original basis
    peak = math.exp(-1.0) / (BUMP_MASS * 0.1)
    np.testing.assert_allclose(np.diag(V), [10.0, -10.0], rtol=1e-14)
    assert V[0, 1] == pytest.approx(0.5 * peak, rel=1e-12)
    assert V[1, 0] == pytest.approx(0.5 * peak, rel=1e-12)


def test_bump_unit_mass():
    t = np.linspace(-1, 1, 200001)
    assert np.trapezoid(bump(t), t) == pytest.approx(1.0, rel=1e-9)


@pytest.mark.parametrize("doc", [
    {"smooth": {"builtin": "nope"}},
    {"smooth": {}},
    {"smooth": {"builtin": "zero"}, "extra": 1},
    {"delta": []},
    {"smooth": {"builtin": "zero"}, "delta": [{"x0": 1.5, "gamma": 1}]},
    {"smooth": {"builtin": "zero"}, "delta": [{"x0": 0.2, "S": [[1, 2], [3, 4]]}]},
    {"smooth": {"samples": {"n": 3, "V1": [0, 0, 0]}}},
    {"smooth": {"fourier": {"V1": [[0.5, 1, 0]]}}},
    {"smooth": {"builtin": "smoothed_delta", "a": 1, "gamma": 1, "nu": 0.7}},
])
def test_invalid_documents(doc):
    with pytest.raises(PotentialSpecError):
        parse_potential_spec(doc)


def test_invalid_json_text():
    with pytest.raises(PotentialSpecError):
        parse_potential_spec("{not json")


def test_samples_l1_exact():
    P = pot({"smooth": {"samples": {"n": 4, "V1": [1, -1, 2, 0], "V2": [0, 0, 0, 4], "V3": [0.5, -0.5, 0, 0]}}})
    assert np.array_equal(P.rotation, np.eye(2))
    # (|1|+|-1|+|2|+|0|)/4 + 4/4 + 2*(0.5+0.5)/4
    assert P.l1_norm == pytest.approx(1.0 + 1.0 + 0.5, rel=1e-14)


def test_l1_zero_iff_zero():
    assert zero_potential().l1_norm == 0.0
    assert constant_potential(1e-3).l1_norm > 0.0


angles = st.floats(min_value=0.0, max_value=2 * math.pi)
coef = st.floats(min_value=-3.0, max_value=3.0)


@settings(max_examples=30, deadline=None)
@given(angles, coef, coef, coef, coef)
def test_rotation_invariance(theta, m1, m2, m3, f3):
    """Normalizing U V U^T and V gives the same mean data."""
    c, s = math.cos(theta), math.sin(theta)
    U = np.array([[c, -s], [s, c]])
    mean = np.array([[m1, m3], [m3, m2]])
    osc = np.array([[0.0, f3], [f3, 0.5]])

    def doc(A, B):
        return {"smooth": {"fourier": {"V1": [[0, A[0, 0], 0], [1, B[0, 0], 0]],
                                       "V2": [[0, A[1, 1], 0], [1, B[1, 1], 0]],
                                       "V3": [[0, A[0, 1], 0], [1, B[0, 1], 0]]}}}

    P = pot(doc(mean, osc))
    Q = pot(doc(U @ mean @ U.T, U @ osc @ U.T))
    assert np.allclose(P.mean_diag, Q.mean_diag, atol=1e-12)
    assert P.c0 == pytest.approx(Q.c0, abs=1e-12)
    assert P.v1 == pytest.approx(Q.v1, abs=1e-12)
    assert P.v2 == pytest.approx(Q.v2, abs=1e-11)
    # rotated mean is diagonal with ascending entries
    m = P.rotated_spec.mean_matrix()
    assert abs(m[0, 1]) <= 1e-12 and m[0, 0] <= m[1, 1] + 1e-12


def test_l1_subadditive():
    # a diagonal coupling keeps the mean diagonal, so both share one basis
    smooth = {"builtin": "constant_diag", "a": 2.0}
    P = pot({"smooth": smooth})
    Q = pot({"smooth": smooth, "delta": [{"x0": 0.3, "S": [[0.3, 0.0], [0.0, -0.2]]}]})
    assert Q.l1_norm <= P.l1_norm + 0.5 + 1e-14
