"""Fully quantum measurement models.

The system S and apparatus M live on H_s (x) H_m, flat index i_s * dim_m + i_m. A
calibrated apparatus unitary T carries the ready state M_0 into pointer position
Pi_alpha exactly when the system had property P_alpha. Probabilities of pointer
positions are computed from the evolved pre-probability V = T (P (x) M_0) T^dagger.
"""

import logging
from collections.abc import Iterable, Sequence
from typing import Self

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from hilbert_histories.constants import (
    CATCH_ALL_LABEL,
    MAX_TOTAL_DIM,
    MIN_TRACE,
    POINTER_LABEL_PREFIX,
    TOL,
    TOL_PROBABILITY_SUM,
)
from hilbert_histories.errors import CapacityError, DegenerateInputError, InvalidInputError
from hilbert_histories.linalg import (
    ComplexMatrix,
    adjoint,
    frobenius_norm,
    hermitian_eigendecomposition,
    identity,
    is_unitary,
    tensor_product,
    trace,
)
from hilbert_histories.properties import (
    Decomposition,
    Observable,
    Projector,
    common_refinement,
    support_indices,
)

logger = logging.getLogger(__name__)


def pointer_label(measured_index: int) -> str:
    """Label of the pointer position registering the measured projector at this index."""
    return f"{POINTER_LABEL_PREFIX}{measured_index + 1}"


def pointer_labels(count: int) -> tuple[str, ...]:
    return (CATCH_ALL_LABEL, *(pointer_label(k) for k in range(count)))


class MeasurementModel(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    name: str = Field(default="apparatus", description="Identifier used in reports.")
    dim_s: int = Field(ge=1, description="System dimension.")
    dim_m: int = Field(ge=2, description="Apparatus dimension.")
    m0: Projector = Field(description="Ready state M_0 on H_m.")
    unitary_t: ComplexMatrix = Field(description="T(t2, t1) on H_s (x) H_m.")
    pointers: Decomposition = Field(description="Pi_0, Pi_1, ..., Pi_n on H_s (x) H_m.")
    measured: Decomposition = Field(description="The P_alpha or R_j being measured.")
    annotations: dict[str, tuple[float, ...]] = Field(
        default_factory=dict,
        description="Observable values (a_j, b_j) registered by each pointer label.",
    )

    @model_validator(mode="after")
    def check(self) -> Self:
        if self.m0.dim != self.dim_m:
            raise ValueError(f"Ready state acts on dimension {self.m0.dim}, not {self.dim_m}.")
        if self.m0.rank == 0:
            raise ValueError("The ready state must be a nonzero projector.")
        if self.measured.dim != self.dim_s:
            raise ValueError(
                f"Measured decomposition acts on dimension {self.measured.dim}, not {self.dim_s}."
            )
        if self.unitary_t.shape[0] != self.dim:
            raise ValueError(f"T must act on dimension {self.dim}.")
        if not is_unitary(self.unitary_t):
            raise ValueError("T must be unitary.")
        if self.pointers.dim != self.dim:
            raise ValueError(f"Pointer positions must act on dimension {self.dim}.")
        expected = pointer_labels(len(self.measured))
        if self.pointers.labels != expected:
            raise ValueError(f"Pointer labels must be {list(expected)}.")
        unknown = set(self.annotations) - set(expected[1:])
        if unknown:
            raise ValueError(f"Annotations for unknown pointer labels {sorted(unknown)}.")
        return self

    @property
    def dim(self) -> int:
        return self.dim_s * self.dim_m

    def with_unitary(self, unitary: np.ndarray) -> "MeasurementModel":
        """The same apparatus with another unitary, for example a miscalibrated one."""
        return MeasurementModel.model_validate({**self.model_dump(), "unitary_t": unitary})


def _block_projector(dim_m: int, start: int, size: int) -> np.ndarray:
    block = np.zeros((dim_m, dim_m), dtype=np.complex128)
    block[range(start, start + size), range(start, start + size)] = 1.0
    return block


def _adapted_basis(measured: Decomposition) -> tuple[np.ndarray, list[int]]:
    columns, owners = [], []
    for alpha, projector in enumerate(measured.projectors):
        system = hermitian_eigendecomposition(projector.matrix)
        for value, vector in zip(system.eigenvalues, system.eigenvectors):
            if value > 0.5:
                columns.append(vector)
                owners.append(alpha)
    return np.column_stack(columns), owners


def build_pointer_model(
    measured: Decomposition,
    dim_m: int,
    ready_rank: int = 1,
    max_dim: int = MAX_TOTAL_DIM,
    name: str = "apparatus",
    annotations: dict[str, tuple[float, ...]] | None = None,
) -> MeasurementModel:
    """A calibrated apparatus for the measured decomposition.

    The apparatus space is cut into blocks of ready_rank states: block 0 is the ready
    state M_0 and block alpha + 1 the pointer position for P_alpha. In a system basis
    adapted to the measured decomposition, T swaps block 0 with the pointer block of
    each basis vector; everything else goes to Pi_0.
    """
    n = len(measured)
    if ready_rank < 1:
        raise InvalidInputError(f"Ready state rank must be positive, got {ready_rank}.")
    required = (n + 1) * ready_rank
    if dim_m < required:
        raise CapacityError(
            f"Apparatus dimension {dim_m} cannot hold {n} pointer positions "
            f"of rank {ready_rank} besides the ready state (needs {required})."
        )
    dim_s = measured.dim
    total = dim_s * dim_m
    if total > max_dim:
        raise CapacityError(f"Total dimension {total} exceeds the maximum of {max_dim}.")

    basis, owners = _adapted_basis(measured)
    permutation = np.zeros((total, total), dtype=np.complex128)
    for i, alpha in enumerate(owners):
        block = (alpha + 1) * ready_rank
        target = list(range(dim_m))
        for r in range(ready_rank):
            target[r], target[block + r] = block + r, r
        for r in range(dim_m):
            permutation[i * dim_m + target[r], i * dim_m + r] = 1.0
    change = np.kron(basis, np.eye(dim_m))
    unitary = change @ permutation @ adjoint(change)

    eye_s = identity(dim_s)
    outcome_pointers = [
        tensor_product(eye_s, _block_projector(dim_m, (k + 1) * ready_rank, ready_rank), max_dim)
        for k in range(n)
    ]
    catch_all = np.eye(total) - sum(outcome_pointers)
    model = MeasurementModel(
        name=name,
        dim_s=dim_s,
        dim_m=dim_m,
        m0=Projector(matrix=_block_projector(dim_m, 0, ready_rank)),
        unitary_t=unitary,
        pointers=Decomposition.from_projectors(
            [catch_all, *outcome_pointers], pointer_labels(n)
        ),
        measured=measured,
        annotations=annotations or {},
    )
    logger.debug("Built %s: %d outcomes on dimension %d", name, n, total)
    return model


class EvolvedProperty(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    matrix: ComplexMatrix = Field(description="V = T (P (x) M_0) T^dagger, a pre-probability.")
    source: Projector = Field(description="The system property P evolved.")

    @model_validator(mode="after")
    def check(self) -> Self:
        m = self.matrix
        if frobenius_norm(m - adjoint(m)) > TOL or frobenius_norm(m @ m - m) > TOL:
            raise ValueError("An evolved property must be a projector.")
        return self

    def as_projector(self) -> Projector:
        return Projector(matrix=self.matrix)


def evolve_property(model: MeasurementModel, p_hat: Projector) -> EvolvedProperty:
    if p_hat.dim != model.dim_s:
        raise InvalidInputError(f"Dimension mismatch: {p_hat.dim} vs {model.dim_s}.")
    if p_hat.rank == 0:
        raise InvalidInputError("The zero projector is a property that is never true.")
    t = model.unitary_t
    evolved = t @ np.kron(p_hat.matrix, model.m0.matrix) @ adjoint(t)
    return EvolvedProperty(matrix=(evolved + adjoint(evolved)) / 2, source=p_hat)


class OutcomeDistribution(BaseModel):
    model_config = ConfigDict(frozen=True)

    probabilities: dict[str, float] = Field(description="Pointer label to probability.")

    @model_validator(mode="after")
    def check(self) -> Self:
        for label, value in self.probabilities.items():
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"Probability of {label} is {value}, outside [0, 1].")
        total = sum(self.probabilities.values())
        if abs(total - 1.0) > TOL:
            raise ValueError(f"Probabilities sum to {total}, not 1.")
        return self

    def __getitem__(self, label: str) -> float:
        try:
            return self.probabilities[label]
        except KeyError:
            raise InvalidInputError(f"No pointer position labelled {label!r}.") from None

    def probability(self, labels: Iterable[str]) -> float:
        return sum(self[label] for label in set(labels))


def born_probabilities(model: MeasurementModel, p_hat: Projector) -> OutcomeDistribution:
    """Pr(Pi_alpha | P) = Tr(Pi_alpha V) / Tr(V) for every pointer position."""
    if p_hat.dim == model.dim_s and p_hat.rank == 0:
        raise DegenerateInputError("The zero property has no pre-probability to normalize.")
    v = evolve_property(model, p_hat).matrix
    norm = trace(v).real
    if norm <= MIN_TRACE:
        raise DegenerateInputError(f"Pre-probability trace {norm:.3e} is zero.")
    probabilities = {}
    for label, pi in zip(model.pointers.labels, model.pointers.projectors):
        value = float(np.vdot(pi.matrix, v).real) / norm
        if value < -TOL_PROBABILITY_SUM or value > 1.0 + TOL_PROBABILITY_SUM:
            logger.warning("Probability of %s is %r beyond rounding", label, value)
        probabilities[label] = min(max(value, 0.0), 1.0)
    return OutcomeDistribution(probabilities=probabilities)


class CalibrationReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    max_violation: float = Field(description="max over alpha, alpha' of |Pi_alpha' V_alpha - delta V_alpha|.")
    worst_pair: tuple[str, str] | None = Field(
        default=None, description="Measured and pointer label attaining the maximum."
    )
    tolerance: float
    passes: bool


def verify_calibration(model: MeasurementModel, tol: float = TOL) -> CalibrationReport:
    worst, pair = 0.0, None
    for k, p in enumerate(model.measured.projectors):
        v = evolve_property(model, p).matrix
        for index, (label, pi) in enumerate(zip(model.pointers.labels, model.pointers.projectors)):
            expected = v if index == k + 1 else 0.0
            violation = frobenius_norm(pi.matrix @ v - expected)
            if violation > worst:
                worst, pair = violation, (model.measured.labels[k], label)
    report = CalibrationReport(
        max_violation=worst, worst_pair=pair, tolerance=tol, passes=worst <= tol
    )
    if not report.passes:
        logger.info("Apparatus %s is not calibrated: %.3e at %s", model.name, worst, pair)
    return report


def build_joint_model(
    a: Observable,
    b: Observable,
    dim_m: int,
    ready_rank: int = 1,
    max_dim: int = MAX_TOTAL_DIM,
    name: str = "joint",
) -> MeasurementModel:
    """An apparatus measuring the common refinement of compatible A and B.

    Each pointer position is annotated with the pair (a_j, b_j) it registers.
    """
    refinement = common_refinement(a, b)
    annotations = {pointer_label(j): values for j, values in enumerate(refinement.pairs())}
    return build_pointer_model(
        refinement.decomposition,
        dim_m,
        ready_rank=ready_rank,
        max_dim=max_dim,
        name=name,
        annotations=annotations,
    )


def _contained(inner: Projector, outer: Projector, tol: float = TOL) -> bool:
    return frobenius_norm(outer.matrix @ inner.matrix - inner.matrix) <= tol


def coarse_outcome_probability(
    model: MeasurementModel,
    p: Projector,
    labels: Iterable[str],
    prepared: Projector | None = None,
) -> float:
    """Probability of a set of pointer positions.

    p must be a sum of measured projectors; the system is prepared in p itself or in a
    property lying inside it.
    """
    support_indices(model.measured, p)
    selected = set(labels)
    unknown = selected - set(model.pointers.labels)
    if unknown:
        raise InvalidInputError(f"Unknown pointer labels {sorted(unknown)}.")
    if prepared is not None and not _contained(prepared, p):
        raise InvalidInputError("The prepared property does not lie inside p.")
    return born_probabilities(model, p if prepared is None else prepared).probability(selected)


def a_marginal(model: MeasurementModel, p_hat: Projector) -> dict[float, float]:
    """Outcome distribution over the first annotated value, grouping equal a_j."""
    if not model.annotations:
        raise InvalidInputError(f"Apparatus {model.name} carries no value annotations.")
    distribution = born_probabilities(model, p_hat)
    marginal: dict[float, float] = {}
    for label, values in model.annotations.items():
        marginal[values[0]] = marginal.get(values[0], 0.0) + distribution[label]
    return marginal


class NoncontextualityReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    marginal_ab: dict[float, float]
    marginal_ac: dict[float, float]
    catch_all_ab: float
    catch_all_ac: float
    max_difference: float
    bc_compatible: bool
    tolerance: float
    passes: bool


def noncontextuality_check(
    a: Observable,
    b: Observable,
    c: Observable,
    p_hat: Projector,
    dim_m: int,
    ready_rank: int = 1,
    max_dim: int = MAX_TOTAL_DIM,
    tol: float = TOL,
) -> NoncontextualityReport:
    """Compare the A outcome statistics of an (A, B) and an (A, C) apparatus."""
    model_ab = build_joint_model(a, b, dim_m, ready_rank, max_dim, name="m'")
    model_ac = build_joint_model(a, c, dim_m, ready_rank, max_dim, name="m''")
    marginal_ab = a_marginal(model_ab, p_hat)
    marginal_ac = a_marginal(model_ac, p_hat)
    values = set(marginal_ab) | set(marginal_ac)
    difference = max(abs(marginal_ab.get(v, 0.0) - marginal_ac.get(v, 0.0)) for v in values)
    bc = frobenius_norm(b.matrix() @ c.matrix() - c.matrix() @ b.matrix())
    return NoncontextualityReport(
        marginal_ab=marginal_ab,
        marginal_ac=marginal_ac,
        catch_all_ab=born_probabilities(model_ab, p_hat)[CATCH_ALL_LABEL],
        catch_all_ac=born_probabilities(model_ac, p_hat)[CATCH_ALL_LABEL],
        max_difference=difference,
        bc_compatible=bc <= TOL,
        tolerance=tol,
        passes=difference <= tol,
    )


def _pointer_set(indices: Sequence[int]) -> list[str]:
    return [pointer_label(k) for k in indices]


def counterfactual_pivot(
    actual: MeasurementModel, counterfactual: MeasurementModel, pivot: Projector
) -> float:
    """Probability that the counterfactual apparatus registers the pivot property.

    The actual outcome must imply the pivot: its pointer set for the pivot has zero
    probability when the system lacks the pivot property.
    """
    actual_members = support_indices(actual.measured, pivot)
    counterfactual_members = support_indices(counterfactual.measured, pivot)
    complement = np.eye(pivot.dim) - pivot.matrix
    if frobenius_norm(complement) > TOL:
        leak = coarse_outcome_probability(
            actual, Projector(matrix=complement), _pointer_set(actual_members)
        )
        if leak > TOL:
            raise InvalidInputError(
                f"The outcome of {actual.name} does not imply the pivot (leak {leak:.3e})."
            )
    return coarse_outcome_probability(
        counterfactual, pivot, _pointer_set(counterfactual_members)
    )


class CoinTossReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    heads: float = Field(description="First apparatus actual, second counterfactual.")
    tails: float = Field(description="Second apparatus actual, first counterfactual.")
    tolerance: float
    passes: bool


def coin_toss_pivot(
    first: MeasurementModel, second: MeasurementModel, pivot: Projector, tol: float = TOL
) -> CoinTossReport:
    """Both branches of a coin toss choosing which apparatus is actually used."""
    heads = counterfactual_pivot(first, second, pivot)
    tails = counterfactual_pivot(second, first, pivot)
    return CoinTossReport(
        heads=heads,
        tails=tails,
        tolerance=tol,
        passes=abs(heads - 1.0) <= tol and abs(tails - 1.0) <= tol,
    )
