from functools import reduce

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qcsc.errors import SingularMatrix
from qcsc.qpu import Calibration
from qcsc.workloads import ConfusionMatrix, apply_confusion, expectation_z, mitigate_vector, readout_mitigation
from qcsc.workloads.mitigation import matrices_from_calibration


def dense(mats):
    return reduce(np.kron, [m.matrix for m in mats])


def test_identity_is_noop():
    mats = [ConfusionMatrix.symmetric(0.0)] * 3
    hist = {"000": 5, "101": 3, "111": 2}
    assert readout_mitigation(hist, mats) == {"000": 0.5, "101": 0.3, "111": 0.2}


def test_single_qubit_inversion():
    m = ConfusionMatrix(np.array([[0.9, 0.2], [0.1, 0.8]]))
    out = mitigate_vector(np.array([0.9, 0.1]), [m])
    assert np.allclose(out, [1.0, 0.0], atol=1e-12)


def test_constructors_and_det():
    a = ConfusionMatrix.asymmetric(0.1, 0.2)
    assert np.allclose(a.matrix, [[0.9, 0.2], [0.1, 0.8]])
    assert a.det == pytest.approx(0.7)
    assert ConfusionMatrix.symmetric(0.5).det == pytest.approx(0.0)


def test_singular_matrix():
    with pytest.raises(SingularMatrix):
        readout_mitigation({"0": 1}, [ConfusionMatrix.symmetric(0.5)])


@pytest.mark.parametrize("bad", [[[0.5, 0.5], [0.6, 0.5]], [[1.2, 0.0], [-0.2, 1.0]], [[1.0]]])
def test_rejects_non_stochastic(bad):
    with pytest.raises(ValueError):
        ConfusionMatrix(np.array(bad))


def test_width_mismatch_and_empty():
    mats = [ConfusionMatrix.symmetric(0.0)] * 2
    with pytest.raises(ValueError):
        readout_mitigation({"0": 1}, mats)
    with pytest.raises(ValueError):
        readout_mitigation({}, mats)


def test_qubit_zero_is_leftmost():
    mats = [ConfusionMatrix.symmetric(0.1), ConfusionMatrix.symmetric(0.0)]
    out = apply_confusion(np.array([1.0, 0, 0, 0]), mats)
    # only the first character can flip
    assert np.allclose(out, [0.9, 0, 0.1, 0])


def test_expectation_z():
    assert expectation_z({"01": 0.75, "11": 0.25}, 0) == pytest.approx(0.5)
    assert expectation_z({"01": 0.75, "11": 0.25}, 1) == pytest.approx(-1.0)


def test_matrices_from_calibration():
    mats = matrices_from_calibration(Calibration.uniform(4, readout_error=0.03), 3)
    assert len(mats) == 3 and all(np.allclose(m.matrix, ConfusionMatrix.symmetric(0.03).matrix) for m in mats)


flips = st.floats(0.0, 0.3)
confusions = st.tuples(flips, flips).map(lambda p: ConfusionMatrix.asymmetric(*p))


@given(st.lists(confusions, min_size=1, max_size=6), st.data())
def test_matches_dense_kron(mats, data):
    n = len(mats)
    w = np.array(data.draw(st.lists(st.floats(0.0, 1.0), min_size=2**n, max_size=2**n))) + 1e-3
    p = w / w.sum()
    big = dense(mats)
    assert np.allclose(apply_confusion(p, mats), big @ p, atol=1e-12)
    assert np.allclose(mitigate_vector(p, mats), np.linalg.solve(big, p), atol=1e-9)


@given(st.lists(confusions, min_size=1, max_size=5), st.data())
def test_roundtrip_and_normalization(mats, data):
    n = len(mats)
    w = np.array(data.draw(st.lists(st.floats(0.0, 1.0), min_size=2**n, max_size=2**n))) + 1e-3
    p = w / w.sum()
    measured = apply_confusion(p, mats)
    assert measured.sum() == pytest.approx(1.0, abs=1e-12)
    back = mitigate_vector(measured, mats)
    assert np.max(np.abs(back - p)) < 1e-10
    assert back.sum() == pytest.approx(1.0, abs=1e-12)
