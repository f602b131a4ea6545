"""Frameworks and the single framework rule.

A framework is a sample space (a decomposition of the identity) together with its
event algebra, the sums of collections of its projectors. Events are kept as index
sets and turned into projectors on demand. Incompatible frameworks must not be
combined; asking to do so yields a SingleFrameworkViolation value.
"""

import logging
from collections.abc import Iterable
from typing import Any, Self

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from hilbert_histories.constants import TOL, TOL_PROBABILITY_SUM
from hilbert_histories.errors import InvalidInputError
from hilbert_histories.linalg import as_vector, frobenius_norm
from hilbert_histories.properties import (
    Decomposition,
    DensityOperator,
    Projector,
    first_noncommuting_pair,
    refine_decompositions,
)

logger = logging.getLogger(__name__)


class Event(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    framework_ref: str
    indices: frozenset[int] = Field(min_length=1)
    projector: Projector


class Framework(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    name: str = Field(default="framework", description="Identifier referenced by events.")
    sample_space: Decomposition

    @property
    def dim(self) -> int:
        return self.sample_space.dim

    def event(self, indices: Iterable[int]) -> Event:
        selected = frozenset(indices)
        return Event(
            framework_ref=self.name,
            indices=selected,
            projector=Projector(matrix=self.sample_space.total(selected)),
        )

    def event_from_labels(self, labels: Iterable[str]) -> Event:
        return self.event(self.sample_space.index(label) for label in labels)

    def full_event(self) -> Event:
        return self.event(range(len(self.sample_space)))

    def probabilities(self, state: Any) -> dict[str, float]:
        """Probability of every sample space element."""
        return {
            label: event_probability(self, state, self.event([i]))
            for i, label in enumerate(self.sample_space.labels)
        }


class SingleFrameworkViolation(BaseModel):
    model_config = ConfigDict(frozen=True)

    first_framework: str
    second_framework: str
    first_label: str
    second_label: str
    commutator_norm: float

    @model_validator(mode="after")
    def check(self) -> Self:
        if self.commutator_norm <= 0.0:
            raise ValueError("A violation requires a nonzero commutator.")
        return self

    def describe(self) -> str:
        return (
            f"{self.first_framework}:{self.first_label} does not commute with "
            f"{self.second_framework}:{self.second_label} "
            f"(commutator norm {self.commutator_norm:.6g})"
        )


def frameworks_compatible(f1: Framework, f2: Framework, tol: float = TOL) -> bool:
    return first_noncommuting_pair(f1.sample_space, f2.sample_space, tol) is None


def combine_frameworks(
    f1: Framework, f2: Framework, tol: float = TOL
) -> Framework | SingleFrameworkViolation:
    """Common refinement of compatible frameworks, or the violation preventing it."""
    pair = first_noncommuting_pair(f1.sample_space, f2.sample_space, tol)
    if pair is not None:
        i, j, norm = pair
        violation = SingleFrameworkViolation(
            first_framework=f1.name,
            second_framework=f2.name,
            first_label=f1.sample_space.labels[i],
            second_label=f2.sample_space.labels[j],
            commutator_norm=norm,
        )
        logger.info("Refused to combine frameworks: %s", violation.describe())
        return violation
    refinement, _, _ = refine_decompositions(f1.sample_space, f2.sample_space, tol)
    return Framework(name=f"{f1.name}*{f2.name}", sample_space=refinement)


def event_probability(f: Framework, state: Any, e: Event) -> float:
    """Born probability of an event for a ket (normalized here) or a density operator."""
    if e.framework_ref != f.name:
        raise InvalidInputError(f"Event belongs to {e.framework_ref!r}, not {f.name!r}.")
    expected = f.sample_space.total(e.indices)
    if frobenius_norm(expected - e.projector.matrix) > TOL:
        raise InvalidInputError(f"Event projector is not an event of {f.name!r}.")
    if isinstance(state, DensityOperator):
        if state.dim != f.dim:
            raise InvalidInputError(f"Dimension mismatch: {state.dim} vs {f.dim}.")
        probability = float(np.vdot(e.projector.matrix, state.matrix).real)
    else:
        ket = as_vector(state)
        if ket.shape[0] != f.dim:
            raise InvalidInputError(f"Dimension mismatch: {ket.shape[0]} vs {f.dim}.")
        norm = float(np.vdot(ket, ket).real)
        if norm == 0.0:
            raise InvalidInputError("The zero vector is not a state.")
        probability = float(np.vdot(ket, e.projector.matrix @ ket).real) / norm
    if probability < -TOL_PROBABILITY_SUM or probability > 1.0 + TOL_PROBABILITY_SUM:
        logger.warning("Probability %r outside [0, 1] beyond rounding", probability)
    return min(max(probability, 0.0), 1.0)
