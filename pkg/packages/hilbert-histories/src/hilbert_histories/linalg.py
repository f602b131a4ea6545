import logging
import math
from typing import Annotated, Any, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PlainSerializer, PlainValidator

from hilbert_histories.constants import (
    MAX_SWEEPS,
    MAX_TOTAL_DIM,
    TOL,
    TOL_HERM,
    TOL_RECONSTRUCTION,
)
from hilbert_histories.errors import CapacityError, InvalidInputError, NumericError

logger = logging.getLogger(__name__)

# Off-diagonal entries below this fraction of the Frobenius norm are not rotated.
_ROTATION_FLOOR = 1e-15


def _numeric_array(value: Any) -> np.ndarray:
    try:
        array = np.asarray(value)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"Not a rectangular numeric array: {exc}") from exc
    if array.dtype == object or not np.issubdtype(array.dtype, np.number):
        raise ValueError("Entries must be numbers or [re, im] pairs.")
    return array


def _frozen(array: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(array)):
        raise ValueError("Entries must be finite.")
    array.flags.writeable = False
    return array


def complex_matrix_validator(value: Any) -> np.ndarray:
    array = _numeric_array(value)
    if array.ndim == 3 and array.shape[-1] == 2 and not np.iscomplexobj(array):
        array = array[..., 0] + 1j * array[..., 1]
    if array.ndim != 2 or array.shape[0] != array.shape[1] or array.shape[0] < 1:
        raise ValueError(f"Expected a non-empty square matrix, got shape {array.shape}.")
    return _frozen(np.array(array, dtype=np.complex128))


def state_vector_validator(value: Any) -> np.ndarray:
    array = _numeric_array(value)
    if array.ndim == 2 and array.shape[-1] == 2 and not np.iscomplexobj(array):
        array = array[:, 0] + 1j * array[:, 1]
    if array.ndim != 1 or array.shape[0] < 1:
        raise ValueError(f"Expected a non-empty vector, got shape {array.shape}.")
    return _frozen(np.array(array, dtype=np.complex128))


def as_pairs(array: np.ndarray) -> list:
    return np.stack([array.real, array.imag], axis=-1).tolist()


ComplexMatrix = Annotated[
    np.ndarray,
    PlainValidator(complex_matrix_validator),
    PlainSerializer(as_pairs, when_used="json"),
]

StateVector = Annotated[
    np.ndarray,
    PlainValidator(state_vector_validator),
    PlainSerializer(as_pairs, when_used="json"),
]


def as_matrix(value: Any) -> np.ndarray:
    """Validate anything matrix-like into a read-only complex128 square array."""
    try:
        return complex_matrix_validator(value)
    except ValueError as exc:
        raise InvalidInputError(str(exc)) from exc


def as_vector(value: Any) -> np.ndarray:
    try:
        return state_vector_validator(value)
    except ValueError as exc:
        raise InvalidInputError(str(exc)) from exc


def identity(dim: int) -> np.ndarray:
    if dim < 1:
        raise InvalidInputError(f"Dimension must be positive, got {dim}.")
    return _frozen(np.eye(dim, dtype=np.complex128))


def adjoint(a: np.ndarray) -> np.ndarray:
    return a.conj().T


def trace(a: np.ndarray) -> complex:
    return complex(np.trace(a))


def _check_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise InvalidInputError(f"Dimension mismatch: {a.shape} vs {b.shape}.")


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    _check_same_shape(a, b)
    return a @ b - b @ a


def frobenius_norm(a: np.ndarray) -> float:
    return float(np.linalg.norm(a))


def frobenius_distance(a: Any, b: Any) -> float:
    first, second = as_matrix(a), as_matrix(b)
    _check_same_shape(first, second)
    return frobenius_norm(first - second)


def is_hermitian(h: np.ndarray, tol: float = TOL_HERM) -> bool:
    return frobenius_norm(h - adjoint(h)) <= tol


def is_unitary(u: np.ndarray, tol: float = TOL) -> bool:
    return frobenius_norm(adjoint(u) @ u - np.eye(u.shape[0])) <= tol


def tensor_product(a: Any, b: Any, max_dim: int = MAX_TOTAL_DIM) -> np.ndarray:
    """Kronecker product, row index i_a * dim_b + i_b."""
    first, second = as_matrix(a), as_matrix(b)
    dim = first.shape[0] * second.shape[0]
    if dim > max_dim:
        raise CapacityError(
            f"Tensor product dimension {dim} exceeds the maximum of {max_dim}."
        )
    return _frozen(np.kron(first, second))


def ket_projector(ket: Any) -> np.ndarray:
    vector = as_vector(ket)
    norm = np.linalg.norm(vector)
    if norm == 0.0:
        raise InvalidInputError("The zero vector spans no ray.")
    unit = vector / norm
    return _frozen(np.outer(unit, unit.conj()))


def givens_rotation(dim: int, i: int, j: int, angle: float) -> np.ndarray:
    rotation = np.eye(dim, dtype=np.complex128)
    c, s = math.cos(angle), math.sin(angle)
    rotation[i, i], rotation[j, j] = c, c
    rotation[i, j], rotation[j, i] = -s, s
    return _frozen(rotation)


def spin_half(axis: Literal["x", "y", "z"]) -> np.ndarray:
    """Spin-half component in units of hbar."""
    matrices = {
        "x": [[0, 1], [1, 0]],
        "y": [[0, -1j], [1j, 0]],
        "z": [[1, 0], [0, -1]],
    }
    if axis not in matrices:
        raise InvalidInputError(f"Unknown spin axis {axis!r}.")
    return _frozen(0.5 * np.array(matrices[axis], dtype=np.complex128))


class Eigensystem(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    eigenvalues: tuple[float, ...] = Field(description="Eigenvalues in ascending order.")
    eigenvectors: tuple[StateVector, ...] = Field(
        description="Orthonormal eigenvectors, one per eigenvalue."
    )
    sweeps: int = Field(default=0, description="Jacobi sweeps used.")

    def basis(self) -> np.ndarray:
        return np.column_stack(self.eigenvectors)

    def reconstruct(self) -> np.ndarray:
        basis = self.basis()
        return basis @ np.diag(self.eigenvalues) @ adjoint(basis)


def _off_diagonal_norm(a: np.ndarray) -> float:
    return math.sqrt(max(frobenius_norm(a) ** 2 - float(np.sum(np.abs(a.diagonal()) ** 2)), 0.0))


def _rotate(a: np.ndarray, v: np.ndarray, p: int, q: int) -> None:
    apq = a[p, q]
    r = abs(apq)
    phase = (apq / r).conjugate()
    theta = 0.5 * math.atan2(2.0 * r, (a[q, q] - a[p, p]).real)
    c, s = math.cos(theta), math.sin(theta)
    # Phase rotation making a[p, q] real, followed by a real Jacobi rotation.
    g = np.array([[c, s], [-s * phase, c * phase]], dtype=np.complex128)
    cols = [p, q]
    a[:, cols] = a[:, cols] @ g
    a[cols, :] = adjoint(g) @ a[cols, :]
    a[p, q] = a[q, p] = 0.0
    a[p, p] = a[p, p].real
    a[q, q] = a[q, q].real
    v[:, cols] = v[:, cols] @ g


def hermitian_eigendecomposition(h: Any, max_sweeps: int = MAX_SWEEPS) -> Eigensystem:
    """Cyclic Jacobi eigensolver for Hermitian matrices.

    Returns the raw eigenvalues in ascending order; degenerate values are not grouped.
    """
    matrix = as_matrix(h)
    asymmetry = frobenius_norm(matrix - adjoint(matrix))
    if asymmetry > TOL_HERM:
        raise InvalidInputError(
            f"Matrix is not Hermitian (|h - h^dagger| = {asymmetry:.3e})."
        )
    a = (matrix + adjoint(matrix)) / 2
    n = a.shape[0]
    v = np.eye(n, dtype=np.complex128)
    scale = frobenius_norm(a)
    floor = _ROTATION_FLOOR * scale

    sweeps = 0
    while True:
        rotations = 0
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(a[p, q]) > floor:
                    _rotate(a, v, p, q)
                    rotations += 1
        if rotations == 0:
            break
        sweeps += 1
        if sweeps >= max_sweeps:
            raise NumericError(
                f"Jacobi iteration did not converge after {max_sweeps} sweeps "
                f"(off-diagonal norm {_off_diagonal_norm(a):.3e})."
            )

    values = a.diagonal().real
    order = np.argsort(values, kind="stable")
    system = Eigensystem(
        eigenvalues=tuple(float(values[k]) for k in order),
        eigenvectors=tuple(v[:, k].copy() for k in order),
        sweeps=sweeps,
    )
    error = frobenius_norm(system.reconstruct() - matrix)
    if error > TOL_RECONSTRUCTION * max(1.0, scale):
        raise NumericError(f"Eigendecomposition reconstruction error {error:.3e}.")
    logger.debug("Diagonalized %dx%d matrix in %d sweeps", n, n, sweeps)
    return system
