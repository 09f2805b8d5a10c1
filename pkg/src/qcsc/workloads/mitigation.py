"""Tensor-product readout-error mitigation.

Qubit ``i`` is character ``i`` of a bitstring, which is the most significant
bit of the integer index.  Each qubit has a 2x2 column-stochastic matrix
``M[measured][true]``; the full confusion matrix is their Kronecker product,
but it is never formed: the inverse is applied one axis at a time.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from qcsc.errors import SingularMatrix
from qcsc.qpu.device import Calibration
from qcsc.qpu.model import from_bitstring, to_bitstring

DET_EPS = 1e-12


@dataclass(frozen=True)
class ConfusionMatrix:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (2, 2):
            raise ValueError("confusion matrix must be 2x2")
        if np.any(m < 0) or np.any(m > 1) or not np.allclose(m.sum(axis=0), 1.0, atol=1e-12):
            raise ValueError("confusion matrix must be column stochastic")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def symmetric(cls, eps: float) -> "ConfusionMatrix":
        return cls(np.array([[1 - eps, eps], [eps, 1 - eps]]))

    @classmethod
    def asymmetric(cls, p01: float, p10: float) -> "ConfusionMatrix":
        """``p01`` = P(read 1 | true 0), ``p10`` = P(read 0 | true 1)."""
        return cls(np.array([[1 - p01, p10], [p01, 1 - p10]]))

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.matrix))

    def inverse(self) -> np.ndarray:
        if abs(self.det) < DET_EPS:
            raise SingularMatrix(f"confusion matrix determinant {self.det:.3g} is singular")
        return np.linalg.inv(self.matrix)


def matrices_from_calibration(calibration: Calibration, num_qubits: int) -> list[ConfusionMatrix]:
    return [ConfusionMatrix.symmetric(e) for e in calibration.readout_error[:num_qubits]]


def histogram_to_vector(histogram: Mapping[str, int | float], num_qubits: int) -> np.ndarray:
    vec = np.zeros(2**num_qubits)
    for s, c in histogram.items():
        if len(s) != num_qubits:
            raise ValueError(f"bitstring {s!r} does not have width {num_qubits}")
        vec[from_bitstring(s)] += c
    total = vec.sum()
    if total <= 0:
        raise ValueError("empty histogram")
    return vec / total


def vector_to_quasi(vec: np.ndarray, num_qubits: int, cutoff: float = 0.0) -> dict[str, float]:
    return {to_bitstring(i, num_qubits): float(v) for i, v in enumerate(vec) if abs(v) > cutoff}


def apply_per_qubit(vec: np.ndarray, mats: Sequence[np.ndarray]) -> np.ndarray:
    """(A_0 ⊗ A_1 ⊗ ... ⊗ A_{n-1}) @ vec without forming the Kronecker product."""
    n = len(mats)
    t = np.asarray(vec, dtype=float).reshape((2,) * n)
    for i, a in enumerate(mats):
        t = np.moveaxis(np.tensordot(a, t, axes=([1], [i])), 0, i)
    return t.reshape(-1)


def apply_confusion(distribution: np.ndarray, matrices: Sequence[ConfusionMatrix]) -> np.ndarray:
    return apply_per_qubit(distribution, [m.matrix for m in matrices])


def mitigate_vector(distribution: np.ndarray, matrices: Sequence[ConfusionMatrix]) -> np.ndarray:
    return apply_per_qubit(distribution, [m.inverse() for m in matrices])


def readout_mitigation(histogram: Mapping[str, int | float], matrices: Sequence[ConfusionMatrix]) -> dict[str, float]:
    """Quasi-distribution over all 2^n bitstrings; entries may be negative and sum to 1."""
    n = len(matrices)
    return vector_to_quasi(mitigate_vector(histogram_to_vector(histogram, n), matrices), n)


def expectation_z(quasi: Mapping[str, float], qubit: int) -> float:
    """<Z_qubit> under a (quasi-)distribution."""
    return float(sum(p * (1 - 2 * int(s[qubit])) for s, p in quasi.items()))
