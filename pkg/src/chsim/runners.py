"""Scenario execution: one runner per scenario kind, each producing an Outcome.

Runners compute metrics and declare checks. The shared finishing step compares them
with the scenario's expectations and maps the result, or the exception raised on the
way, onto a report status and exit code.
"""

import logging
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from chsim.operators import DecompositionSpec
from chsim.report import BatchReport, ExitCode, Report, Status
from chsim.repositories.scenario_repository import ScenarioFileError, ScenarioRepository
from chsim.scenarios import (
    ApparatusSpec,
    Expectation,
    FrameworkCombinePayload,
    FrameworkSpec,
    HistoriesPayload,
    JointMeasurementPayload,
    MeasurementPayload,
    NoncontextualityPayload,
    Scenario,
    ValuationPayload,
)
from chsim.settings import Settings
from hilbert_histories import sampling
from hilbert_histories.constants import MIN_TRACE
from hilbert_histories.errors import (
    CapacityError,
    ConsistencyError,
    IncompatibilityError,
    InvalidInputError,
    NumericError,
)
from hilbert_histories.frameworks import Framework, SingleFrameworkViolation, combine_frameworks
from hilbert_histories.histories import (
    HistoryFamily,
    TimedEvent,
    conditional_probability,
    decoherence_matrix,
    history_probabilities,
    measurement_family,
    three_box_families,
)
from hilbert_histories.linalg import as_pairs, frobenius_norm, givens_rotation, trace
from hilbert_histories.measurement import (
    MeasurementModel,
    a_marginal,
    born_probabilities,
    build_joint_model,
    build_pointer_model,
    coarse_outcome_probability,
    coin_toss_pivot,
    evolve_property,
    noncontextuality_check,
    pointer_label,
    verify_calibration,
)
from hilbert_histories.properties import (
    Decomposition,
    Projector,
    common_refinement,
    functional_relation,
    spectral_decompose,
)
from hilbert_histories.valuation import (
    detect_shared_projectors,
    exhaustive_valuations,
    search_valuation,
)

logger = logging.getLogger(__name__)


class RunOptions(BaseModel):
    model_config = ConfigDict(frozen=True)

    tolerance: float = Field(default=1e-9, gt=0.0)
    seed: int | None = Field(default=None, ge=0)
    max_dim: int = Field(default=4096, ge=1)
    max_histories: int = Field(default=4096, ge=1)
    max_identifiers: int = Field(default=64, ge=1)
    dump: bool = Field(default=False, description="Attach full matrices and tables to details.")

    @classmethod
    def from_settings(cls, settings: Settings) -> "RunOptions":
        return cls(
            tolerance=settings.tolerance,
            seed=settings.seed,
            max_dim=settings.max_dim,
            max_histories=settings.max_histories,
            max_identifiers=settings.max_identifiers,
        )


class Outcome(BaseModel):
    metrics: dict[str, float] = Field(default_factory=dict)
    checks: dict[str, bool] = Field(default_factory=dict)
    narratives: list[str] = Field(default_factory=list)
    details: dict[str, Any] = Field(default_factory=dict)
    violation: str | None = None

    def metric(self, name: str, value: float | bool, check: bool = False) -> None:
        self.metrics[name] = float(value)
        if check:
            self.checks[name] = bool(value)

    def flag_violation(self, message: str) -> None:
        self.violation = message
        self.metrics["violation"] = 1.0
        self.narratives.append(message)


# -- measurement --


def _apparatus(spec: ApparatusSpec, options: RunOptions, name: str = "apparatus") -> MeasurementModel:
    return build_pointer_model(
        spec.measured.build(), spec.dim_m, spec.ready_rank, options.max_dim, name=name
    )


def _calibration(out: Outcome, model: MeasurementModel, options: RunOptions) -> None:
    calibration = verify_calibration(model, options.tolerance)
    out.metric("calibration_max_violation", calibration.max_violation)
    out.metric("calibrated", calibration.passes, check=True)
    if calibration.worst_pair is not None:
        out.details["calibration_worst_pair"] = list(calibration.worst_pair)


def _correlations(
    out: Outcome, family: HistoryFamily, model: MeasurementModel, options: RunOptions
) -> None:
    probabilities = history_probabilities(family, options.tolerance, options.max_histories)
    out.metric("history_probability_sum", sum(probabilities.values()))
    out.details["histories"] = {family.describe(h): p for h, p in probabilities.items()}
    backward, forward = [], []
    for k, label in enumerate(model.measured.labels):
        pointer = pointer_label(k)
        at_t1 = TimedEvent(time="t1", labels=frozenset({label}))
        at_t2 = TimedEvent(time="t2", labels=frozenset({pointer}))
        measured_weight = sum(p for h, p in probabilities.items() if h.choice[0] == k)
        pointer_weight = sum(p for h, p in probabilities.items() if h.choice[1] == k + 1)
        if min(measured_weight, pointer_weight) <= MIN_TRACE:
            continue
        backward.append(conditional_probability(family, at_t2, at_t1, options.tolerance))
        forward.append(conditional_probability(family, at_t1, at_t2, options.tolerance))
    if backward:
        out.metric("measured_given_pointer_min", min(backward))
        out.metric("pointer_given_measured_min", min(forward))
        out.metric(
            "perfect_correlation",
            min(backward + forward) >= 1.0 - options.tolerance,
            check=True,
        )


def run_measurement(payload: MeasurementPayload, options: RunOptions) -> Outcome:
    out = Outcome()
    model = _apparatus(payload, options)
    if payload.perturbation is not None:
        p = payload.perturbation
        if max(p.first, p.second) >= model.dim or p.first == p.second:
            raise InvalidInputError(f"Rotation states must be distinct and below {model.dim}.")
        rotation = givens_rotation(model.dim, p.first, p.second, p.angle)
        model = model.with_unitary(rotation @ model.unitary_t)
        out.narratives.append(
            f"T rotated by {p.angle:.6g} between total states {p.first} and {p.second}"
        )
    _calibration(out, model, options)

    prepared = payload.prepared.build()
    evolved = evolve_property(model, prepared)
    rank = round(trace(evolved.matrix).real)
    out.metric("evolved_rank", rank)
    out.metric("rank_preserved", rank == prepared.rank * model.m0.rank, check=True)

    distribution = born_probabilities(model, prepared)
    for label, value in distribution.probabilities.items():
        out.metric(f"probability_{label}", value)
    out.narratives.append(
        "Born rule: "
        + ", ".join(f"Pr({label})={v:.6g}" for label, v in distribution.probabilities.items())
    )

    if payload.histories:
        family = measurement_family(model, prepared)
        matrix = decoherence_matrix(family, options.max_histories)
        magnitude, _ = matrix.max_off_diagonal()
        out.metric("family_max_off_diagonal", magnitude)
        out.metric("family_consistent", magnitude <= options.tolerance, check=True)
        if magnitude <= options.tolerance:
            _correlations(out, family, model, options)
    return out


# -- joint measurement --


def run_joint_measurement(payload: JointMeasurementPayload, options: RunOptions) -> Outcome:
    out = Outcome()
    a, b = spectral_decompose(payload.a), spectral_decompose(payload.b)
    try:
        refinement = common_refinement(a, b)
    except IncompatibilityError as exc:
        out.metric("commutator_norm", exc.commutator_norm)
        out.flag_violation(f"A and B are incompatible: {exc}")
        return out
    out.metric("violation", 0.0)
    out.metric("refinement_size", len(refinement.decomposition))
    for name, values, operator in (
        ("a", refinement.values_a, payload.a),
        ("b", refinement.values_b, payload.b),
    ):
        rebuilt = sum(v * r.matrix for v, r in zip(values, refinement.decomposition.projectors))
        out.metric(f"reconstruction_error_{name}", frobenius_norm(rebuilt - operator))
    relation = functional_relation(a, b)
    out.metric("b_function_of_a", relation.is_function)
    out.details["pairs"] = [list(pair) for pair in refinement.pairs()]

    model = build_joint_model(a, b, payload.dim_m, payload.ready_rank, options.max_dim)
    _calibration(out, model, options)
    out.details["pointers"] = {label: list(v) for label, v in model.annotations.items()}

    if payload.prepared is not None:
        prepared = payload.prepared.build()
        for label, value in born_probabilities(model, prepared).probabilities.items():
            out.metric(f"probability_{label}", value)
        out.details["a_marginal"] = a_marginal(model, prepared)
    for i, check in enumerate(payload.coarse):
        prepared = check.prepared.build() if check.prepared is not None else None
        value = coarse_outcome_probability(model, check.subspace.build(), check.labels, prepared)
        out.metric(f"coarse_{i}", value)
        out.narratives.append(f"Pr({' or '.join(check.labels)}) = {value:.6g}")
    return out


# -- noncontextuality --


def _explicit_noncontextuality(
    out: Outcome, payload: NoncontextualityPayload, options: RunOptions
) -> None:
    a, b, c = (spectral_decompose(m) for m in (payload.a, payload.b, payload.c))
    prepared = payload.prepared.build()
    report = noncontextuality_check(
        a, b, c, prepared, payload.dim_m, max_dim=options.max_dim, tol=options.tolerance
    )
    out.metric("max_marginal_difference", report.max_difference)
    out.metric("marginals_agree", report.passes, check=True)
    out.metric("bc_compatible", report.bc_compatible)
    out.metric("catch_all_ab", report.catch_all_ab)
    out.metric("catch_all_ac", report.catch_all_ac)
    out.details["marginal_ab"] = report.marginal_ab
    out.details["marginal_ac"] = report.marginal_ac
    if payload.pivot is not None:
        first = build_joint_model(a, b, payload.dim_m, max_dim=options.max_dim, name="m'")
        second = build_joint_model(a, c, payload.dim_m, max_dim=options.max_dim, name="m''")
        coin = coin_toss_pivot(first, second, payload.pivot.build(), options.tolerance)
        out.metric("pivot_heads", coin.heads)
        out.metric("pivot_tails", coin.tails)
        out.metric("pivot_certain", coin.passes, check=True)


def _trial_noncontextuality(
    out: Outcome, payload: NoncontextualityPayload, options: RunOptions
) -> None:
    seed = payload.seed if options.seed is None else options.seed
    generator = sampling.rng(seed)
    dim_m = payload.dim + 1
    worst_difference, worst_pivot = 0.0, 1.0
    for _ in range(payload.trials):
        a, b, c = sampling.commuting_triple(generator, payload.dim)
        state = Projector.onto(sampling.random_ket(generator, payload.dim))
        report = noncontextuality_check(
            a, b, c, state, dim_m, max_dim=options.max_dim, tol=options.tolerance
        )
        worst_difference = max(worst_difference, report.max_difference)

        pivot = a.decomposition.projectors[0]
        inside = pivot.matrix @ sampling.random_ket(generator, payload.dim)
        prepared = Projector.onto(inside)
        first = build_joint_model(a, b, dim_m, max_dim=options.max_dim, name="m'")
        second = build_joint_model(a, c, dim_m, max_dim=options.max_dim, name="m''")
        coin = coin_toss_pivot(first, second, pivot, options.tolerance)
        labels = [
            label for label, (value, _) in second.annotations.items() if value == a.eigenvalues[0]
        ]
        registered = coarse_outcome_probability(second, pivot, labels, prepared)
        worst_pivot = min(worst_pivot, coin.heads, coin.tails, registered)
    out.metric("trials", payload.trials)
    out.metric("trial_max_marginal_difference", worst_difference)
    out.metric("trial_marginals_agree", worst_difference <= options.tolerance, check=True)
    out.metric("trial_min_pivot_probability", worst_pivot)
    out.metric("trial_pivot_certain", 1.0 - worst_pivot <= options.tolerance, check=True)
    out.narratives.append(f"{payload.trials} seeded trials, seed {seed}, dimension {payload.dim}")


def run_noncontextuality(payload: NoncontextualityPayload, options: RunOptions) -> Outcome:
    out = Outcome()
    if payload.a is not None:
        _explicit_noncontextuality(out, payload, options)
    if payload.trials:
        _trial_noncontextuality(out, payload, options)
    return out


# -- histories --


def _family(payload: HistoriesPayload, options: RunOptions) -> HistoryFamily:
    if payload.three_box is not None:
        return three_box_families()[payload.three_box]
    if payload.measurement is not None:
        spec = payload.measurement
        model = _apparatus(spec, options)
        intermediate: Decomposition | None = None
        if spec.intermediate == "psi":
            intermediate = Decomposition.binary(Projector.onto(spec.psi), ("psi", "not_psi"))
        elif isinstance(spec.intermediate, DecompositionSpec):
            intermediate = spec.intermediate.build()
        return measurement_family(model, spec.psi, intermediate)
    spec = payload.custom
    return HistoryFamily(
        name="custom",
        dim=spec.dim,
        initial=spec.initial.build(),
        times=spec.times,
        steps=spec.steps,
        event_sets=tuple(e.build() for e in spec.event_sets),
    )


def run_histories(payload: HistoriesPayload, options: RunOptions) -> Outcome:
    out = Outcome()
    family = _family(payload, options)
    matrix = decoherence_matrix(family, options.max_histories)
    magnitude, position = matrix.max_off_diagonal()
    consistent = magnitude <= options.tolerance
    out.metric("history_count", len(matrix.histories))
    out.metric("max_off_diagonal", magnitude)
    out.metric("consistent", consistent)
    if options.dump:
        out.details["decoherence_matrix"] = {
            "histories": [family.describe(h) for h in matrix.histories],
            "entries": as_pairs(matrix.entries),
        }
    if not consistent:
        i, j = position
        out.details["worst_pair"] = [
            family.describe(matrix.histories[i]),
            family.describe(matrix.histories[j]),
        ]
        out.flag_violation(
            f"Family {family.name} is inconsistent (max off-diagonal {magnitude:.6g}); "
            "probabilities are refused"
        )
        return out
    out.metric("violation", 0.0)
    probabilities = history_probabilities(family, options.tolerance, options.max_histories)
    out.metric("probability_sum", sum(probabilities.values()))
    out.details["probabilities"] = {family.describe(h): p for h, p in probabilities.items()}
    for i, conditional in enumerate(payload.conditionals):
        value = conditional_probability(
            family, conditional.given, conditional.target, options.tolerance, options.max_histories
        )
        out.metric(f"conditional_{i}", value)
        out.narratives.append(
            f"Pr({','.join(sorted(conditional.target.labels))} at {conditional.target.time} | "
            f"{','.join(sorted(conditional.given.labels))} at {conditional.given.time}) = {value:.6g}"
        )
    return out


# -- valuation --


def run_valuation(payload: ValuationPayload, options: RunOptions) -> Outcome:
    out = Outcome()
    problem = detect_shared_projectors([c.build() for c in payload.contexts])
    bridges = problem.bridges()
    out.metric("identifiers", len(problem.projector_pool))
    out.metric("contexts", len(problem.contexts))
    out.metric("shared_identifiers", len(bridges))
    out.metric("incompatible_context_pairs", len(problem.incompatible_context_pairs()))
    result = search_valuation(problem, options.max_identifiers)
    out.metric("satisfiable", result.found)
    out.metric("nodes_examined", result.certificate.nodes_examined)
    out.metric("branches_pruned", result.certificate.branches_pruned)
    out.details["contexts"] = [list(c) for c in problem.contexts]
    out.details["bridges"] = {i: list(ks) for i, ks in bridges.items()}
    if result.valuation is not None:
        violated = result.valuation.violated_contexts(problem)
        out.metric("sound", not violated, check=True)
        out.details["witness"] = result.valuation.true_projectors()
        out.narratives.append(f"Valuation found: {', '.join(out.details['witness'])} true")
    else:
        out.narratives.append(
            f"No valuation: search exhausted after {result.certificate.nodes_examined} nodes"
        )
    if payload.reference:
        valuations = exhaustive_valuations(problem)
        out.metric("reference_valuations", len(valuations))
        out.metric("agrees_with_reference", bool(valuations) == result.found, check=True)
    return out


# -- frameworks --


def _framework(spec: FrameworkSpec, model: MeasurementModel | None) -> Framework:
    if spec.sample_space is not None:
        return Framework(name=spec.name, sample_space=spec.sample_space.build())
    if spec.pointers:
        return Framework(name=spec.name, sample_space=model.pointers)
    evolved = evolve_property(model, spec.evolved.build())
    return Framework(
        name=spec.name,
        sample_space=Decomposition.binary(evolved.as_projector(), ("V", "not_V")),
    )


def run_framework_combine(payload: FrameworkCombinePayload, options: RunOptions) -> Outcome:
    out = Outcome()
    model = _apparatus(payload.apparatus, options) if payload.apparatus is not None else None
    first, second = _framework(payload.first, model), _framework(payload.second, model)
    result = combine_frameworks(first, second)
    if isinstance(result, SingleFrameworkViolation):
        out.metric("commutator_norm", result.commutator_norm)
        out.details["noncommuting_pair"] = [
            f"{result.first_framework}:{result.first_label}",
            f"{result.second_framework}:{result.second_label}",
        ]
        out.flag_violation(f"Single framework rule: {result.describe()}")
        return out
    out.metric("violation", 0.0)
    out.metric("refinement_size", len(result.sample_space))
    if payload.state is not None:
        probabilities = result.probabilities(payload.state)
        out.metric("probability_sum", sum(probabilities.values()))
        out.details["probabilities"] = probabilities
    return out


RUNNERS: dict[str, Callable[[Any, RunOptions], Outcome]] = {
    "measurement": run_measurement,
    "joint-measurement": run_joint_measurement,
    "noncontextuality": run_noncontextuality,
    "histories": run_histories,
    "valuation": run_valuation,
    "framework-combine": run_framework_combine,
}


# -- reports --


def classify(exc: Exception) -> tuple[Status, ExitCode]:
    match exc:
        case ConsistencyError() | IncompatibilityError():
            return Status.VIOLATION, ExitCode.VIOLATION
        case ValidationError() | InvalidInputError() | ScenarioFileError():
            return Status.ERROR, ExitCode.VALIDATION
        case NumericError() | CapacityError():
            return Status.ERROR, ExitCode.NUMERIC
    return Status.ERROR, ExitCode.NUMERIC


def _error_narratives(exc: Exception) -> list[str]:
    if isinstance(exc, ValidationError):
        return [
            f"{'.'.join(str(part) for part in error['loc']) or '<root>'}: {error['msg']}"
            for error in exc.errors()
        ]
    return [f"{type(exc).__name__}: {exc}"]


def error_report(scenario_id: str, kind: str, exc: Exception) -> Report:
    status, code = classify(exc)
    if code == ExitCode.NUMERIC and not isinstance(exc, (NumericError, CapacityError)):
        logger.exception("Unexpected failure in %s", scenario_id)
    else:
        logger.info("%s ended with %s: %s", scenario_id, status, exc)
    return Report(
        scenario_id=scenario_id,
        kind=kind,
        status=status,
        exit_code=code,
        narratives=_error_narratives(exc),
    )


def _meets(value: float, expected: Expectation, tol: float) -> bool:
    if isinstance(expected, tuple):
        low, high = expected
        return low <= value <= high
    return abs(value - float(expected)) <= tol


def finish(
    scenario_id: str,
    kind: str,
    outcome: Outcome,
    expected: dict[str, Expectation],
    options: RunOptions,
) -> Report:
    failures = [
        f"Check {name} did not hold"
        for name, held in outcome.checks.items()
        if not held and name not in expected
    ]
    for name, want in expected.items():
        if name == "violation" and name not in outcome.metrics:
            outcome.metrics[name] = 0.0
        if name not in outcome.metrics:
            failures.append(f"Expected metric {name} was not computed")
        elif not _meets(outcome.metrics[name], want, options.tolerance):
            failures.append(f"{name} = {outcome.metrics[name]:.12g}, expected {want}")

    if failures:
        status, code = Status.FAIL, ExitCode.FAIL
    elif outcome.violation is not None and not expected.get("violation"):
        status, code = Status.VIOLATION, ExitCode.VIOLATION
    else:
        status, code = Status.PASS, ExitCode.PASS
    return Report(
        scenario_id=scenario_id,
        kind=kind,
        status=status,
        exit_code=code,
        metrics=outcome.metrics,
        narratives=outcome.narratives + failures,
        details=outcome.details,
    )


def run_action(
    scenario_id: str,
    kind: str,
    action: Callable[[], Outcome],
    options: RunOptions,
    expected: dict[str, Expectation] | None = None,
) -> Report:
    try:
        outcome = action()
    except Exception as exc:
        return error_report(scenario_id, kind, exc)
    return finish(scenario_id, kind, outcome, expected or {}, options)


def run_scenario(scenario: Scenario, options: RunOptions, scenario_id: str | None = None) -> Report:
    identifier = scenario.id or scenario_id or scenario.kind
    logger.info("Running %s (%s)", identifier, scenario.kind)
    return run_action(
        identifier,
        scenario.kind,
        lambda: RUNNERS[scenario.kind](scenario.payload, options),
        options,
        scenario.expected,
    )


def execute_path(path: Path, options: RunOptions, repository: ScenarioRepository) -> Report:
    try:
        scenario = repository.load(path)
    except Exception as exc:
        return error_report(path.stem, "unknown", exc)
    return run_scenario(scenario, options, path.stem)


def run_batch(
    paths: Sequence[Path],
    options: RunOptions,
    repository: ScenarioRepository,
    parallelism: int = 1,
) -> BatchReport:
    """Independent scenario runs; reports keep the order of the paths."""
    if parallelism <= 1:
        reports = [execute_path(p, options, repository) for p in paths]
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            reports = list(pool.map(lambda p: execute_path(p, options, repository), paths))
    return BatchReport(reports=reports)


# -- direct commands --


def run_calibration(
    measured: DecompositionSpec, dim_m: int, ready_rank: int, options: RunOptions
) -> Report:
    def action() -> Outcome:
        out = Outcome()
        model = build_pointer_model(measured.build(), dim_m, ready_rank, options.max_dim)
        _calibration(out, model, options)
        out.metric("outcomes", len(model.measured))
        out.metric("total_dim", model.dim)
        if options.dump:
            out.details["unitary"] = as_pairs(model.unitary_t)
        return out

    return run_action("calibrate", "measurement", action, options)


def run_refinement(a: np.ndarray, b: np.ndarray, options: RunOptions) -> Report:
    return run_action("refine", "joint-measurement", _refinement_action(a, b, options), options)


def _refinement_action(a: np.ndarray, b: np.ndarray, options: RunOptions) -> Callable[[], Outcome]:
    def action() -> Outcome:
        out = Outcome()
        first, second = spectral_decompose(a), spectral_decompose(b)
        try:
            refinement = common_refinement(first, second)
        except IncompatibilityError as exc:
            out.metric("commutator_norm", exc.commutator_norm)
            out.flag_violation(f"A and B are incompatible: {exc}")
            return out
        relation = functional_relation(first, second)
        out.metric("refinement_size", len(refinement.decomposition))
        out.metric("b_function_of_a", relation.is_function)
        out.details["elements"] = [
            {
                "label": label,
                "rank": r.rank,
                "a": value_a,
                "b": value_b,
                "parent_a": parent_a,
                "parent_b": parent_b,
                **({"matrix": as_pairs(r.matrix)} if options.dump else {}),
            }
            for label, r, value_a, value_b, parent_a, parent_b in zip(
                refinement.decomposition.labels,
                refinement.decomposition.projectors,
                refinement.values_a,
                refinement.values_b,
                refinement.parent_a_index,
                refinement.parent_b_index,
            )
        ]
        mapping = relation.as_mapping()
        if mapping is not None:
            out.details["b_of_a"] = mapping
        return out

    return action
