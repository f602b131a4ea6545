"""Families of histories, chain operators and the decoherence functional.

A family starts from an initial projector at t_0 and carries one decomposition per
later time, with a unitary between consecutive times. A history picks one projector
per later time. Probabilities are only assigned when the family is consistent, that
is when Tr(K(h')^dagger K(h)) vanishes for every pair of distinct histories.
"""

import itertools
import logging
import math
from collections.abc import Iterator
from typing import Any, Self

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from hilbert_histories.constants import MAX_HISTORIES, MIN_TRACE, TOL, TOL_HERM, TOL_PROBABILITY_SUM
from hilbert_histories.errors import (
    CapacityError,
    ConsistencyError,
    DegenerateInputError,
    InvalidInputError,
)
from hilbert_histories.linalg import ComplexMatrix, identity, is_unitary, tensor_product, trace
from hilbert_histories.measurement import MeasurementModel
from hilbert_histories.properties import Decomposition, Projector, lift

logger = logging.getLogger(__name__)


class History(BaseModel):
    model_config = ConfigDict(frozen=True)

    family_ref: str
    choice: tuple[int, ...] = Field(description="One projector index per time after t_0.")


class TimedEvent(BaseModel):
    model_config = ConfigDict(frozen=True)

    time: str
    labels: frozenset[str] = Field(min_length=1, description="Projector labels at that time.")


class HistoryFamily(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    name: str = "family"
    dim: int = Field(ge=1)
    initial: Projector = Field(description="Psi_0 at t_0, for example [psi] (x) M_0.")
    times: tuple[str, ...] = Field(min_length=1, description="t_0 < t_1 < ... in order.")
    steps: tuple[ComplexMatrix, ...] = Field(
        default=(), description="Unitary from each time to the next."
    )
    event_sets: tuple[Decomposition, ...] = Field(
        default=(), description="Sample space at each time after t_0."
    )

    @model_validator(mode="after")
    def check(self) -> Self:
        if len(set(self.times)) != len(self.times):
            raise ValueError("Time labels must be unique.")
        if self.initial.dim != self.dim:
            raise ValueError(f"Initial projector acts on dimension {self.initial.dim}.")
        if self.initial.rank == 0:
            raise ValueError("The initial projector must be nonzero.")
        intervals = len(self.times) - 1
        if len(self.steps) != intervals or len(self.event_sets) != intervals:
            raise ValueError(f"{intervals} unitaries and {intervals} event sets are required.")
        for k, (step, events) in enumerate(zip(self.steps, self.event_sets)):
            if step.shape[0] != self.dim or not is_unitary(step):
                raise ValueError(f"Step {k} is not a unitary on dimension {self.dim}.")
            if events.dim != self.dim:
                raise ValueError(f"Event set at {self.times[k + 1]} acts on dimension {events.dim}.")
        return self

    @property
    def history_count(self) -> int:
        return math.prod(len(events) for events in self.event_sets)

    def time_index(self, time: str) -> int:
        """Position of the event set at this time."""
        if time not in self.times[1:]:
            raise InvalidInputError(f"No event set at time {time!r} in {self.name!r}.")
        return self.times.index(time) - 1

    def describe(self, h: History) -> str:
        return " ".join(
            f"{time}:{events.labels[i]}"
            for time, events, i in zip(self.times[1:], self.event_sets, h.choice)
        )


def enumerate_histories(family: HistoryFamily) -> Iterator[History]:
    """All histories in lexicographic order of their per-time indices."""
    for choice in itertools.product(*(range(len(events)) for events in family.event_sets)):
        yield History(family_ref=family.name, choice=choice)


def chain_operator(family: HistoryFamily, h: History) -> np.ndarray:
    """K(h) = C_n U_n ... C_1 U_1 Psi_0."""
    if h.family_ref != family.name:
        raise InvalidInputError(f"History belongs to {h.family_ref!r}, not {family.name!r}.")
    if len(h.choice) != len(family.event_sets):
        raise InvalidInputError(
            f"A history of {family.name!r} needs {len(family.event_sets)} indices."
        )
    k = family.initial.matrix
    for step, events, index in zip(family.steps, family.event_sets, h.choice):
        if not 0 <= index < len(events):
            raise InvalidInputError(f"Index {index} out of range 0..{len(events) - 1}.")
        k = events.projectors[index].matrix @ (step @ k)
    return k


class DecoherenceMatrix(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    histories: tuple[History, ...]
    entries: ComplexMatrix = Field(description="D(h, h') = Tr(K(h')^dagger K(h)) / Tr(Psi_0).")

    @model_validator(mode="after")
    def check(self) -> Self:
        d = self.entries
        if d.shape[0] != len(self.histories):
            raise ValueError("One row per history is required.")
        if np.max(np.abs(d - d.conj().T)) > TOL_HERM:
            raise ValueError("The decoherence matrix must be Hermitian.")
        diagonal = d.diagonal()
        if np.min(diagonal.real) < -TOL_PROBABILITY_SUM:
            raise ValueError("Diagonal weights must be nonnegative.")
        total = complex(np.sum(d))
        if abs(total - 1.0) > TOL:
            raise ValueError(f"Entries sum to {total}, not 1.")
        return self

    def weights(self) -> np.ndarray:
        return self.entries.diagonal().real

    def max_off_diagonal(self) -> tuple[float, tuple[int, int] | None]:
        magnitudes = np.abs(self.entries)
        np.fill_diagonal(magnitudes, 0.0)
        if magnitudes.size <= 1:
            return 0.0, None
        flat = int(np.argmax(magnitudes))
        i, j = divmod(flat, magnitudes.shape[1])
        return float(magnitudes[i, j]), (i, j)


def decoherence_matrix(family: HistoryFamily, max_histories: int = MAX_HISTORIES) -> DecoherenceMatrix:
    count = family.history_count
    if count > max_histories:
        raise CapacityError(
            f"Family {family.name!r} has {count} histories, more than the maximum of {max_histories}."
        )
    histories = tuple(enumerate_histories(family))
    chains = np.stack([chain_operator(family, h).ravel() for h in histories])
    entries = chains @ chains.conj().T / trace(family.initial.matrix).real
    logger.debug("Decoherence matrix of %s over %d histories", family.name, count)
    return DecoherenceMatrix(histories=histories, entries=entries)


class ConsistencyReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    family: str
    consistent: bool
    max_off_diagonal: float
    worst_pair: tuple[str, str] | None = None
    tolerance: float


def is_consistent(
    family: HistoryFamily, tol: float = TOL, max_histories: int = MAX_HISTORIES
) -> ConsistencyReport:
    matrix = decoherence_matrix(family, max_histories)
    magnitude, position = matrix.max_off_diagonal()
    worst = None
    if position is not None and magnitude > 0.0:
        i, j = position
        worst = (family.describe(matrix.histories[i]), family.describe(matrix.histories[j]))
    return ConsistencyReport(
        family=family.name,
        consistent=magnitude <= tol,
        max_off_diagonal=magnitude,
        worst_pair=worst,
        tolerance=tol,
    )


def history_probabilities(
    family: HistoryFamily, tol: float = TOL, max_histories: int = MAX_HISTORIES
) -> dict[History, float]:
    """Pr(h) = D(h, h) for a consistent family."""
    matrix = decoherence_matrix(family, max_histories)
    magnitude, _ = matrix.max_off_diagonal()
    if magnitude > tol:
        raise ConsistencyError(family.name, magnitude)
    weights = matrix.weights()
    return {h: min(max(float(w), 0.0), 1.0) for h, w in zip(matrix.histories, weights)}


def _matches(family: HistoryFamily, h: History, event: TimedEvent) -> bool:
    events = family.event_sets[family.time_index(event.time)]
    return events.labels[h.choice[family.time_index(event.time)]] in event.labels


def _check_labels(family: HistoryFamily, event: TimedEvent) -> None:
    events = family.event_sets[family.time_index(event.time)]
    unknown = event.labels - set(events.labels)
    if unknown:
        raise InvalidInputError(f"Unknown labels {sorted(unknown)} at time {event.time!r}.")


def conditional_probability(
    family: HistoryFamily,
    given: TimedEvent,
    target: TimedEvent,
    tol: float = TOL,
    max_histories: int = MAX_HISTORIES,
) -> float:
    """Pr(target | given), summing the probabilities of the histories in each event."""
    _check_labels(family, given)
    _check_labels(family, target)
    probabilities = history_probabilities(family, tol, max_histories)
    condition = sum(p for h, p in probabilities.items() if _matches(family, h, given))
    if condition <= MIN_TRACE:
        raise DegenerateInputError(
            f"Condition {sorted(given.labels)} at {given.time} has zero probability."
        )
    joint = sum(
        p
        for h, p in probabilities.items()
        if _matches(family, h, given) and _matches(family, h, target)
    )
    return min(max(joint / condition, 0.0), 1.0)


def _initial_projector(state: Any) -> Projector:
    return state if isinstance(state, Projector) else Projector.onto(state)


def measurement_family(
    model: MeasurementModel,
    psi: Any,
    intermediate: Decomposition | None = None,
    name: str = "measurement",
) -> HistoryFamily:
    """The family [psi] (x) M_0 at t_0, intermediate (x) I at t_1, pointers at t_2.

    The intermediate sample space defaults to the measured decomposition.
    """
    system = _initial_projector(psi)
    if system.dim != model.dim_s:
        raise InvalidInputError(f"Dimension mismatch: {system.dim} vs {model.dim_s}.")
    events = model.measured if intermediate is None else intermediate
    return HistoryFamily(
        name=name,
        dim=model.dim,
        initial=Projector(matrix=tensor_product(system.matrix, model.m0.matrix)),
        times=("t0", "t1", "t2"),
        steps=(identity(model.dim), model.unitary_t),
        event_sets=(lift(events, model.dim_m), model.pointers),
    )


def three_box_families() -> dict[str, HistoryFamily]:
    """A particle in one of three boxes, prepared in psi and later found in phi.

    Each of the families box_a and box_b is consistent and infers with certainty that
    the particle was in its box; the combined family is inconsistent.
    """
    a, b, c = np.eye(3)
    psi = (a + b + c) / np.sqrt(3)
    phi = (a + b - c) / np.sqrt(3)
    final = Decomposition.binary(Projector.onto(phi), ("phi", "not_phi"))
    box = {label: Projector.onto(v) for label, v in (("A", a), ("B", b), ("C", c))}
    intermediates = {
        "box_a": Decomposition.binary(box["A"], ("A", "not_A")),
        "box_b": Decomposition.binary(box["B"], ("B", "not_B")),
        "combined": Decomposition.from_projectors(list(box.values()), list(box)),
    }
    return {
        name: HistoryFamily(
            name=name,
            dim=3,
            initial=Projector.onto(psi),
            times=("t0", "t1", "t2"),
            steps=(identity(3), identity(3)),
            event_sets=(events, final),
        )
        for name, events in intermediates.items()
    }

