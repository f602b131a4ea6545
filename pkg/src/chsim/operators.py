"""Operators, projectors and decompositions as written in scenario files.

Matrices are nested arrays of numbers or [re, im] pairs, or one of the named
constructors spin_half_sx, spin_half_sy, spin_half_sz, identity:<n> and diag:[...].
"""

from typing import Annotated, Any, Self

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    PlainSerializer,
    PlainValidator,
    TypeAdapter,
    ValidationError,
    model_validator,
)

from hilbert_histories.linalg import (
    StateVector,
    as_pairs,
    complex_matrix_validator,
    identity,
    spin_half,
)
from hilbert_histories.properties import Decomposition, Projector, spectral_decompose

_diagonal_adapter = TypeAdapter(list[float])


def named_operator(name: str) -> np.ndarray:
    match name.partition(":"):
        case ("spin_half_sx" | "spin_half_sy" | "spin_half_sz", "", ""):
            return spin_half(name[-1])
        case ("identity", ":", size) if size.isdigit():
            return identity(int(size))
        case ("diag", ":", values):
            try:
                entries = _diagonal_adapter.validate_json(values)
            except ValidationError as exc:
                raise ValueError(f"diag expects a JSON list of reals, got {values!r}") from exc
            if not entries:
                raise ValueError("diag needs at least one entry.")
            return np.diag(np.array(entries, dtype=np.complex128))
    raise ValueError(f"Unknown operator {name!r}.")


def operator_validator(value: Any) -> np.ndarray:
    if isinstance(value, str):
        value = named_operator(value.strip())
    return complex_matrix_validator(value)


Operator = Annotated[
    np.ndarray,
    PlainValidator(operator_validator),
    PlainSerializer(as_pairs, when_used="json"),
]


def _exactly_one(model: BaseModel, fields: tuple[str, ...]) -> None:
    given = [f for f in fields if getattr(model, f) is not None]
    if len(given) != 1:
        raise ValueError(f"Give exactly one of {', '.join(fields)}; got {given or 'none'}.")


class ProjectorSpec(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True, extra="forbid")

    ket: StateVector | None = None
    kets: tuple[StateVector, ...] | None = None
    matrix: Operator | None = None

    @model_validator(mode="before")
    @classmethod
    def from_name(cls, data: Any) -> Any:
        return {"matrix": data} if isinstance(data, str) else data

    @model_validator(mode="after")
    def check(self) -> Self:
        _exactly_one(self, ("ket", "kets", "matrix"))
        self.build()
        return self

    def build(self) -> Projector:
        if self.ket is not None:
            return Projector.onto(self.ket)
        if self.kets is not None:
            return Projector.spanned_by(self.kets)
        return Projector(matrix=self.matrix)


class DecompositionSpec(BaseModel):
    """A sample space: the eigenprojectors of an observable, explicit projectors, or {P, I - P}."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True, extra="forbid")

    observable: Operator | None = None
    projectors: tuple[ProjectorSpec, ...] | None = None
    binary: ProjectorSpec | None = None
    labels: tuple[str, ...] = ()

    @model_validator(mode="before")
    @classmethod
    def from_operator(cls, data: Any) -> Any:
        return {"observable": data} if isinstance(data, (str, list)) else data

    @model_validator(mode="after")
    def check(self) -> Self:
        _exactly_one(self, ("observable", "projectors", "binary"))
        self.build()
        return self

    def build(self) -> Decomposition:
        if self.observable is not None:
            decomposition = spectral_decompose(self.observable).decomposition
            return Decomposition.from_projectors(decomposition.projectors, self.labels)
        if self.binary is not None:
            return Decomposition.binary(self.binary.build(), self.labels)
        return Decomposition.from_projectors([p.build() for p in self.projectors], self.labels)


_operator_adapter = TypeAdapter(Operator)
_decomposition_adapter = TypeAdapter(DecompositionSpec)


def _is_json(text: str) -> bool:
    return text.lstrip()[:1] in ("[", "{", '"')


def parse_operator(text: str) -> np.ndarray:
    """An operator given on the command line, by name or as JSON."""
    if _is_json(text):
        return _operator_adapter.validate_json(text)
    return _operator_adapter.validate_python(text)


def parse_decomposition(text: str) -> DecompositionSpec:
    if _is_json(text):
        return _decomposition_adapter.validate_json(text)
    return _decomposition_adapter.validate_python(text)
