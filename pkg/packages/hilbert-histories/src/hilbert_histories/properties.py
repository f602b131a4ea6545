"""Quantum properties: projectors, decompositions of the identity and observables.

A property is the range of a projector P = P^dagger = P^2. A decomposition of the
identity is a sample space of mutually exclusive properties, one and only one of
which is true. An observable pairs distinct eigenvalues with such a decomposition.
"""

import logging
from collections.abc import Iterable, Sequence
from typing import Any, Self

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from hilbert_histories.constants import (
    DEFAULT_LABEL_PREFIX,
    DEGENERACY_GAP,
    MAX_TOTAL_DIM,
    REFINEMENT_LABEL_PREFIX,
    TOL,
    TOL_HERM,
    TOL_PROJ,
    TOL_RECONSTRUCTION,
)
from hilbert_histories.errors import (
    AmbiguousSpectrumError,
    IncompatibilityError,
    InvalidInputError,
    NumericError,
)
from hilbert_histories.linalg import (
    ComplexMatrix,
    adjoint,
    as_matrix,
    as_vector,
    commutator,
    frobenius_norm,
    hermitian_eigendecomposition,
    identity,
    ket_projector,
    tensor_product,
    trace,
)

logger = logging.getLogger(__name__)


class Projector(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    matrix: ComplexMatrix = Field(description="Hermitian idempotent matrix P = P^dagger = P^2.")

    @model_validator(mode="after")
    def check(self) -> Self:
        m = self.matrix
        if frobenius_norm(m - adjoint(m)) > TOL_PROJ:
            raise ValueError("A projector must be Hermitian.")
        if frobenius_norm(m @ m - m) > TOL_PROJ:
            raise ValueError("A projector must be idempotent.")
        rank = trace(m).real
        if abs(rank - round(rank)) > TOL:
            raise ValueError(f"Projector trace {rank} is not an integer.")
        return self

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def rank(self) -> int:
        return round(trace(self.matrix).real)

    @classmethod
    def identity(cls, dim: int) -> "Projector":
        return cls(matrix=identity(dim))

    @classmethod
    def onto(cls, ket: Any) -> "Projector":
        """The projector [psi] onto the ray containing a nonzero ket."""
        return cls(matrix=ket_projector(ket))

    @classmethod
    def spanned_by(cls, kets: Sequence[Any]) -> "Projector":
        vectors = np.column_stack([as_vector(k) for k in kets])
        q, r = np.linalg.qr(vectors)
        if np.min(np.abs(np.diag(r))) <= TOL:
            raise InvalidInputError("Spanning kets must be linearly independent.")
        return cls(matrix=q @ adjoint(q))

    def complement(self) -> "Projector":
        return Projector(matrix=np.eye(self.dim) - self.matrix)


def _as_projector(value: Any) -> Projector:
    return value if isinstance(value, Projector) else Projector(matrix=value)


class Decomposition(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    projectors: tuple[Projector, ...] = Field(
        min_length=1,
        description="Mutually orthogonal projectors summing to I; an element may be zero.",
    )
    labels: tuple[str, ...] = Field(
        default=(), description="One identifier per projector, a0, a1, ... when absent."
    )

    @model_validator(mode="before")
    @classmethod
    def default_labels(cls, data: Any) -> Any:
        if isinstance(data, dict) and not data.get("labels"):
            count = len(data.get("projectors") or ())
            data = {
                **data,
                "labels": tuple(f"{DEFAULT_LABEL_PREFIX}{i}" for i in range(count)),
            }
        return data

    @model_validator(mode="after")
    def check(self) -> Self:
        if len(self.labels) != len(self.projectors):
            raise ValueError("Exactly one label per projector is required.")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("Labels must be unique.")
        dims = {p.dim for p in self.projectors}
        if len(dims) != 1:
            raise ValueError(f"Projectors of mixed dimensions {sorted(dims)}.")
        total = sum(p.matrix for p in self.projectors)
        completeness = frobenius_norm(total - np.eye(self.dim))
        if completeness > TOL:
            raise ValueError(f"Projectors do not sum to the identity ({completeness:.3e}).")
        for i, p in enumerate(self.projectors):
            for j in range(i + 1, len(self.projectors)):
                overlap = frobenius_norm(p.matrix @ self.projectors[j].matrix)
                if overlap > TOL:
                    raise ValueError(
                        f"Projectors {self.labels[i]} and {self.labels[j]} "
                        f"are not orthogonal ({overlap:.3e})."
                    )
        return self

    @property
    def dim(self) -> int:
        return self.projectors[0].dim

    def __len__(self) -> int:
        return len(self.projectors)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise InvalidInputError(f"No projector labelled {label!r}.") from None

    def projector(self, label: str) -> Projector:
        return self.projectors[self.index(label)]

    def total(self, indices: Iterable[int]) -> np.ndarray:
        """Sum of the projectors at the given indices, an element of the event algebra."""
        selected = sorted(set(indices))
        if not selected:
            raise InvalidInputError("At least one sample space index is required.")
        if selected[0] < 0 or selected[-1] >= len(self):
            raise InvalidInputError(f"Indices {selected} out of range 0..{len(self) - 1}.")
        return sum(self.projectors[i].matrix for i in selected)

    @classmethod
    def from_projectors(
        cls, projectors: Sequence[Any], labels: Sequence[str] | None = None
    ) -> "Decomposition":
        return cls(
            projectors=tuple(_as_projector(p) for p in projectors),
            labels=tuple(labels or ()),
        )

    @classmethod
    def binary(cls, p: Any, labels: Sequence[str] | None = None) -> "Decomposition":
        """The two-element sample space {P, I - P}."""
        projector = _as_projector(p)
        return cls.from_projectors([projector, projector.complement()], labels)


def lift(decomposition: Decomposition, dim_m: int, max_dim: int = MAX_TOTAL_DIM) -> Decomposition:
    """Extend a system decomposition to H_s (x) H_m as P (x) I_m, keeping labels."""
    eye = identity(dim_m)
    return Decomposition.from_projectors(
        [tensor_product(p.matrix, eye, max_dim) for p in decomposition.projectors],
        decomposition.labels,
    )


class Observable(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    eigenvalues: tuple[float, ...] = Field(description="Distinct eigenvalues a_alpha.")
    decomposition: Decomposition = Field(description="Eigenprojectors P_alpha, same order.")

    @model_validator(mode="after")
    def check(self) -> Self:
        if len(self.eigenvalues) != len(self.decomposition):
            raise ValueError("One eigenvalue per eigenprojector is required.")
        for label, p in zip(self.decomposition.labels, self.decomposition.projectors):
            if p.rank == 0:
                raise ValueError(f"Eigenprojector {label} is zero.")
        ordered = sorted(self.eigenvalues)
        for lower, upper in zip(ordered, ordered[1:]):
            if upper - lower <= DEGENERACY_GAP:
                raise ValueError(f"Eigenvalues {lower} and {upper} are not distinct.")
        return self

    @property
    def dim(self) -> int:
        return self.decomposition.dim

    @property
    def labels(self) -> tuple[str, ...]:
        return self.decomposition.labels

    def matrix(self) -> np.ndarray:
        return sum(a * p.matrix for a, p in zip(self.eigenvalues, self.decomposition.projectors))


class Refinement(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    decomposition: Decomposition = Field(description="The nonzero products R_j = P_alpha Q_beta.")
    parent_a_index: tuple[int, ...] = Field(description="alpha(j) for every j.")
    parent_b_index: tuple[int, ...] = Field(description="beta(j) for every j.")
    values_a: tuple[float, ...] = Field(description="a_j = a_alpha(j).")
    values_b: tuple[float, ...] = Field(description="b_j = b_beta(j).")

    @model_validator(mode="after")
    def check(self) -> Self:
        count = len(self.decomposition)
        lengths = {
            len(self.parent_a_index),
            len(self.parent_b_index),
            len(self.values_a),
            len(self.values_b),
        }
        if lengths != {count}:
            raise ValueError("Parent indices and values must match the refinement size.")
        return self

    def pairs(self) -> tuple[tuple[float, float], ...]:
        return tuple(zip(self.values_a, self.values_b))


class DensityOperator(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    matrix: ComplexMatrix = Field(description="Positive semidefinite, unit trace.")

    @model_validator(mode="after")
    def check(self) -> Self:
        if frobenius_norm(self.matrix - adjoint(self.matrix)) > TOL_HERM:
            raise ValueError("A density operator must be Hermitian.")
        norm = trace(self.matrix).real
        if abs(norm - 1.0) > TOL:
            raise ValueError(f"A density operator must have unit trace, got {norm}.")
        lowest = hermitian_eigendecomposition(self.matrix).eigenvalues[0]
        if lowest < -TOL:
            raise ValueError(f"A density operator must be positive, eigenvalue {lowest}.")
        return self

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def from_ket(cls, ket: Any) -> "DensityOperator":
        return cls(matrix=ket_projector(ket))

    @classmethod
    def from_projector(cls, p: Projector) -> "DensityOperator":
        """Uniform mixture over the range of p."""
        if p.rank == 0:
            raise InvalidInputError("The zero projector describes no state.")
        return cls(matrix=p.matrix / p.rank)


def has_property(subject: Any, p: Projector) -> bool:
    """Whether a ket or density operator lies in the subspace of p."""
    if isinstance(subject, DensityOperator):
        if subject.dim != p.dim:
            raise InvalidInputError(f"Dimension mismatch: {subject.dim} vs {p.dim}.")
        return frobenius_norm(p.matrix @ subject.matrix - subject.matrix) <= TOL
    ket = as_vector(subject)
    norm = float(np.linalg.norm(ket))
    if norm == 0.0:
        raise InvalidInputError(
            "The zero vector lies in every subspace and represents no property."
        )
    if ket.shape[0] != p.dim:
        raise InvalidInputError(f"Dimension mismatch: {ket.shape[0]} vs {p.dim}.")
    return float(np.linalg.norm(p.matrix @ ket - ket)) <= TOL * norm


def _operator(value: Observable | Projector | Any) -> np.ndarray:
    if isinstance(value, Observable):
        return value.matrix()
    if isinstance(value, Projector):
        return value.matrix
    return as_matrix(value)


def first_noncommuting_pair(
    first: Decomposition, second: Decomposition, tol: float = TOL
) -> tuple[int, int, float] | None:
    if first.dim != second.dim:
        raise InvalidInputError(f"Dimension mismatch: {first.dim} vs {second.dim}.")
    for i, p in enumerate(first.projectors):
        for j, q in enumerate(second.projectors):
            norm = frobenius_norm(commutator(p.matrix, q.matrix))
            if norm > tol:
                return i, j, norm
    return None


def are_compatible(a: Observable | Projector, b: Observable | Projector, tol: float = TOL) -> bool:
    first, second = _operator(a), _operator(b)
    if first.shape != second.shape:
        raise InvalidInputError(f"Dimension mismatch: {first.shape} vs {second.shape}.")
    commuting = frobenius_norm(commutator(first, second)) <= tol
    if isinstance(a, Observable) and isinstance(b, Observable):
        projectors_commuting = first_noncommuting_pair(a.decomposition, b.decomposition, tol) is None
        if projectors_commuting != commuting:
            raise NumericError(
                "Operators and their eigenprojectors disagree on compatibility; "
                "the spectra are too close to decide."
            )
    return commuting


def refine_decompositions(
    first: Decomposition, second: Decomposition, tol: float = TOL
) -> tuple[Decomposition, tuple[int, ...], tuple[int, ...]]:
    """All nonzero products P_alpha Q_beta in lexicographic (alpha, beta) order.

    Returns the refinement and the parent indices of every element.
    """
    pair = first_noncommuting_pair(first, second, tol)
    if pair is not None:
        i, j, norm = pair
        raise IncompatibilityError(first.labels[i], second.labels[j], norm)
    projectors, parents_a, parents_b = [], [], []
    for i, p in enumerate(first.projectors):
        for j, q in enumerate(second.projectors):
            product = p.matrix @ q.matrix
            product = (product + adjoint(product)) / 2
            # The product of commuting projectors has integral trace, its rank.
            if trace(product).real < 0.5:
                continue
            projectors.append(Projector(matrix=product))
            parents_a.append(i)
            parents_b.append(j)
    refinement = Decomposition.from_projectors(
        projectors, [f"{REFINEMENT_LABEL_PREFIX}{k}" for k in range(len(projectors))]
    )
    logger.debug(
        "Refined %d x %d projectors into %d", len(first), len(second), len(refinement)
    )
    return refinement, tuple(parents_a), tuple(parents_b)


def _check_reconstruction(target: np.ndarray, rebuilt: np.ndarray, what: str) -> None:
    error = frobenius_norm(rebuilt - target)
    if error > TOL_RECONSTRUCTION * max(1.0, frobenius_norm(target)):
        raise NumericError(f"{what} reconstruction error {error:.3e}.")


def spectral_decompose(h: Any) -> Observable:
    """Group the eigenvalues of a Hermitian matrix into distinct eigenprojectors."""
    matrix = as_matrix(h)
    system = hermitian_eigendecomposition(matrix)
    values = system.eigenvalues
    clusters: list[list[int]] = [[0]]
    for k in range(1, len(values)):
        gap = values[k] - values[k - 1]
        if gap <= TOL:
            clusters[-1].append(k)
        elif gap <= DEGENERACY_GAP:
            raise AmbiguousSpectrumError(values[k - 1], values[k], gap)
        else:
            clusters.append([k])

    eigenvalues, projectors = [], []
    for cluster in clusters:
        basis = np.column_stack([system.eigenvectors[k] for k in cluster])
        eigenvalues.append(float(np.mean([values[k] for k in cluster])))
        projectors.append(Projector(matrix=basis @ adjoint(basis)))
    observable = Observable(
        eigenvalues=tuple(eigenvalues),
        decomposition=Decomposition.from_projectors(projectors),
    )
    _check_reconstruction(matrix, observable.matrix(), "Spectral")
    return observable


def common_refinement(a: Observable, b: Observable) -> Refinement:
    decomposition, parents_a, parents_b = refine_decompositions(a.decomposition, b.decomposition)
    refinement = Refinement(
        decomposition=decomposition,
        parent_a_index=parents_a,
        parent_b_index=parents_b,
        values_a=tuple(a.eigenvalues[i] for i in parents_a),
        values_b=tuple(b.eigenvalues[j] for j in parents_b),
    )
    for values, observable, name in (
        (refinement.values_a, a, "A"),
        (refinement.values_b, b, "B"),
    ):
        rebuilt = sum(v * r.matrix for v, r in zip(values, decomposition.projectors))
        _check_reconstruction(observable.matrix(), rebuilt, f"Refinement of {name}")
    return refinement


class FunctionalRelation(BaseModel):
    model_config = ConfigDict(frozen=True)

    pairs: tuple[tuple[float, float], ...] = Field(
        description="Distinct (a_j, b_j) pairs of the common refinement."
    )
    is_function: bool = Field(description="No a_j maps to two different b_j.")

    def as_mapping(self) -> dict[float, float] | None:
        return dict(self.pairs) if self.is_function else None


def functional_relation(a: Observable, b: Observable) -> FunctionalRelation:
    refinement = common_refinement(a, b)
    pairs = tuple(dict.fromkeys(refinement.pairs()))
    images: dict[float, set[float]] = {}
    for value_a, value_b in pairs:
        images.setdefault(value_a, set()).add(value_b)
    return FunctionalRelation(
        pairs=pairs, is_function=all(len(v) == 1 for v in images.values())
    )


def support_indices(decomposition: Decomposition, p: Projector, tol: float = TOL) -> tuple[int, ...]:
    """Indices k with p = sum of P_k; raises when p is not such a sum."""
    if p.dim != decomposition.dim:
        raise InvalidInputError(f"Dimension mismatch: {p.dim} vs {decomposition.dim}.")
    members = []
    for k, projector in enumerate(decomposition.projectors):
        inside = projector.matrix @ p.matrix
        if frobenius_norm(inside - projector.matrix) <= tol:
            members.append(k)
        elif frobenius_norm(inside) > tol:
            raise InvalidInputError(
                f"Projector {decomposition.labels[k]} partially overlaps the property."
            )
    if not members or frobenius_norm(decomposition.total(members) - p.matrix) > tol:
        raise InvalidInputError("The property is not a sum of decomposition projectors.")
    return tuple(members)
