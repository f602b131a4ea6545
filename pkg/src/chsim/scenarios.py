"""Scenario file schema, one model per kind, discriminated on the kind field."""

from typing import Annotated, Literal, Self

from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, model_validator

from chsim.operators import DecompositionSpec, Operator, ProjectorSpec
from hilbert_histories.histories import TimedEvent
from hilbert_histories.linalg import StateVector

Expectation = float | bool | tuple[float, float]


class _Spec(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True, extra="forbid")


class ApparatusSpec(_Spec):
    measured: DecompositionSpec
    dim_m: int = Field(ge=2)
    ready_rank: int = Field(default=1, ge=1)


class Perturbation(_Spec):
    """Givens rotation between two total-space basis states, applied after T."""

    first: int = Field(ge=0)
    second: int = Field(ge=0)
    angle: float


class MeasurementPayload(ApparatusSpec):
    prepared: ProjectorSpec
    perturbation: Perturbation | None = None
    histories: bool = True


class CoarseCheck(_Spec):
    subspace: ProjectorSpec
    labels: tuple[str, ...] = Field(min_length=1)
    prepared: ProjectorSpec | None = None


class JointMeasurementPayload(_Spec):
    a: Operator
    b: Operator
    dim_m: int = Field(ge=2)
    ready_rank: int = Field(default=1, ge=1)
    prepared: ProjectorSpec | None = None
    coarse: tuple[CoarseCheck, ...] = ()


class NoncontextualityPayload(_Spec):
    a: Operator | None = None
    b: Operator | None = None
    c: Operator | None = None
    dim_m: int = Field(default=4, ge=2)
    prepared: ProjectorSpec | None = None
    pivot: ProjectorSpec | None = None
    trials: int = Field(default=0, ge=0)
    dim: int = Field(default=3, ge=3, description="System dimension of generated trials.")
    seed: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def check(self) -> Self:
        explicit = [self.a, self.b, self.c]
        if any(m is not None for m in explicit):
            if any(m is None for m in explicit) or self.prepared is None:
                raise ValueError("Explicit checks need a, b, c and prepared.")
        elif self.trials == 0:
            raise ValueError("Give a, b, c and prepared, or a number of trials.")
        return self


class MeasurementFamilySpec(ApparatusSpec):
    psi: StateVector
    intermediate: DecompositionSpec | Literal["psi"] | None = None


class CustomFamilySpec(_Spec):
    dim: int = Field(ge=1)
    initial: ProjectorSpec
    times: tuple[str, ...] = Field(min_length=1)
    steps: tuple[Operator, ...] = ()
    event_sets: tuple[DecompositionSpec, ...] = ()


class ConditionalSpec(_Spec):
    given: TimedEvent
    target: TimedEvent


class HistoriesPayload(_Spec):
    three_box: Literal["box_a", "box_b", "combined"] | None = None
    measurement: MeasurementFamilySpec | None = None
    custom: CustomFamilySpec | None = None
    conditionals: tuple[ConditionalSpec, ...] = ()

    @model_validator(mode="after")
    def check(self) -> Self:
        given = [f for f in ("three_box", "measurement", "custom") if getattr(self, f) is not None]
        if len(given) != 1:
            raise ValueError("Give exactly one of three_box, measurement, custom.")
        return self


class FrameworkSpec(_Spec):
    name: str
    sample_space: DecompositionSpec | None = None
    pointers: bool = False
    evolved: ProjectorSpec | None = None

    @model_validator(mode="after")
    def check(self) -> Self:
        given = [self.sample_space is not None, self.pointers, self.evolved is not None]
        if sum(given) != 1:
            raise ValueError("Give exactly one of sample_space, pointers, evolved.")
        return self


class FrameworkCombinePayload(_Spec):
    apparatus: ApparatusSpec | None = None
    first: FrameworkSpec
    second: FrameworkSpec
    state: StateVector | None = None

    @model_validator(mode="after")
    def check(self) -> Self:
        needs_apparatus = any(f.pointers or f.evolved for f in (self.first, self.second))
        if needs_apparatus and self.apparatus is None:
            raise ValueError("Pointer and evolved frameworks need an apparatus.")
        if self.first.name == self.second.name:
            raise ValueError("The two frameworks need different names.")
        return self


class ValuationPayload(_Spec):
    contexts: tuple[DecompositionSpec, ...] = Field(min_length=1)
    reference: bool = Field(default=False, description="Compare with exhaustive enumeration.")


class _Scenario(_Spec):
    version: Literal[1]
    id: str | None = None
    description: str = ""
    expected: dict[str, Expectation] = Field(default_factory=dict)


class MeasurementScenario(_Scenario):
    kind: Literal["measurement"]
    payload: MeasurementPayload


class JointMeasurementScenario(_Scenario):
    kind: Literal["joint-measurement"]
    payload: JointMeasurementPayload


class NoncontextualityScenario(_Scenario):
    kind: Literal["noncontextuality"]
    payload: NoncontextualityPayload


class HistoriesScenario(_Scenario):
    kind: Literal["histories"]
    payload: HistoriesPayload


class ValuationScenario(_Scenario):
    kind: Literal["valuation"]
    payload: ValuationPayload


class FrameworkCombineScenario(_Scenario):
    kind: Literal["framework-combine"]
    payload: FrameworkCombinePayload


Scenario = Annotated[
    MeasurementScenario
    | JointMeasurementScenario
    | NoncontextualityScenario
    | HistoriesScenario
    | ValuationScenario
    | FrameworkCombineScenario,
    Field(discriminator="kind"),
]

scenario_adapter = TypeAdapter(Scenario)


def parse_scenario(text: str | bytes) -> Scenario:
    return scenario_adapter.validate_json(text)
