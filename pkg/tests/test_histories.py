import numpy as np
import pytest
from pydantic import ValidationError

from hilbert_histories import sampling
from hilbert_histories.errors import (
    CapacityError,
    ConsistencyError,
    DegenerateInputError,
    InvalidInputError,
)
from hilbert_histories.histories import (
    History,
    HistoryFamily,
    TimedEvent,
    chain_operator,
    conditional_probability,
    decoherence_matrix,
    enumerate_histories,
    history_probabilities,
    is_consistent,
    measurement_family,
    three_box_families,
)
from hilbert_histories.linalg import identity
from hilbert_histories.measurement import build_pointer_model
from hilbert_histories.properties import Decomposition, Projector, spectral_decompose


def _event(time: str, *labels: str) -> TimedEvent:
    return TimedEvent(time=time, labels=frozenset(labels))


def _measurement_family(psi=(1, 1), intermediate=None) -> HistoryFamily:
    model = build_pointer_model(spectral_decompose(np.diag([1.0, 2.0])).decomposition, dim_m=3)
    return measurement_family(model, list(psi), intermediate)


# -- families --


def test_family_needs_one_unitary_per_interval():
    with pytest.raises(ValidationError):
        HistoryFamily(
            dim=2,
            initial=Projector.onto([1, 0]),
            times=("t0", "t1"),
            steps=(),
            event_sets=(Decomposition.binary(np.diag([1, 0])),),
        )


def test_family_rejects_non_unitary_step():
    with pytest.raises(ValidationError):
        HistoryFamily(
            dim=2,
            initial=Projector.onto([1, 0]),
            times=("t0", "t1"),
            steps=(2 * np.eye(2),),
            event_sets=(Decomposition.binary(np.diag([1, 0])),),
        )


def test_family_rejects_repeated_times():
    with pytest.raises(ValidationError):
        HistoryFamily(
            dim=2,
            initial=Projector.onto([1, 0]),
            times=("t0", "t0"),
            steps=(identity(2),),
            event_sets=(Decomposition.binary(np.diag([1, 0])),),
        )


def test_histories_are_enumerated_lexicographically():
    family = three_box_families()["combined"]
    choices = [h.choice for h in enumerate_histories(family)]
    assert choices == [(0, 0), (0, 1), (1, 0), (1, 1), (2, 0), (2, 1)]
    assert family.history_count == 6


def test_time_index_rejects_initial_time():
    family = three_box_families()["box_a"]
    with pytest.raises(InvalidInputError):
        family.time_index("t0")


def test_chain_operator_rejects_foreign_history():
    family = three_box_families()["box_a"]
    with pytest.raises(InvalidInputError):
        chain_operator(family, History(family_ref="other", choice=(0, 0)))


# -- decoherence --


def test_decoherence_matrix_is_hermitian_with_unit_sum():
    matrix = decoherence_matrix(_measurement_family())
    assert np.allclose(matrix.entries, matrix.entries.conj().T)
    assert complex(np.sum(matrix.entries)) == pytest.approx(1.0)


def test_decoherence_matrix_respects_history_bound():
    with pytest.raises(CapacityError):
        decoherence_matrix(_measurement_family(), max_histories=5)


def test_three_box_single_box_families_are_consistent():
    families = three_box_families()
    for name in ("box_a", "box_b"):
        assert is_consistent(families[name]).consistent


def test_three_box_combined_family_is_inconsistent():
    family = three_box_families()["combined"]
    report = is_consistent(family)
    assert not report.consistent
    assert report.max_off_diagonal == pytest.approx(1 / 9)
    assert report.worst_pair is not None
    matrix = decoherence_matrix(family)
    index = {family.describe(h): k for k, h in enumerate(matrix.histories)}
    entry = matrix.entries[index["t1:A t2:phi"], index["t1:C t2:phi"]]
    assert entry.real == pytest.approx(-1 / 9)


def test_inconsistent_family_has_no_probabilities():
    with pytest.raises(ConsistencyError):
        history_probabilities(three_box_families()["combined"])


# -- probabilities --


def test_three_box_inferences():
    families = three_box_families()
    phi = _event("t2", "phi")
    assert conditional_probability(families["box_a"], phi, _event("t1", "A")) == pytest.approx(1.0)
    assert conditional_probability(families["box_b"], phi, _event("t1", "B")) == pytest.approx(1.0)
    probabilities = history_probabilities(families["box_a"])
    joint = {families["box_a"].describe(h): p for h, p in probabilities.items()}
    assert joint["t1:A t2:phi"] == pytest.approx(1 / 9)


def test_measurement_family_pointer_reveals_prior_property():
    family = _measurement_family()
    assert is_consistent(family).consistent
    for measured, pointer in (("a0", "pi1"), ("a1", "pi2")):
        backward = conditional_probability(family, _event("t2", pointer), _event("t1", measured))
        forward = conditional_probability(family, _event("t1", measured), _event("t2", pointer))
        assert backward == pytest.approx(1.0)
        assert forward == pytest.approx(1.0)


def test_measurement_family_with_superposition_at_intermediate_time():
    psi = Projector.onto([1, 1])
    family = _measurement_family(intermediate=Decomposition.binary(psi, ("psi", "not_psi")))
    assert is_consistent(family).consistent
    given = _event("t1", "psi")
    assert conditional_probability(family, given, _event("t2", "pi1")) == pytest.approx(0.5)
    assert conditional_probability(family, _event("t2", "pi1"), given) == pytest.approx(1.0)


def test_history_probabilities_sum_to_one():
    probabilities = history_probabilities(_measurement_family(psi=(0.6, 0.8)))
    assert sum(probabilities.values()) == pytest.approx(1.0)


def test_measurement_family_catch_all_histories_have_zero_weight():
    probabilities = history_probabilities(_measurement_family())
    assert len(probabilities) == 6
    for history, probability in probabilities.items():
        if history.choice in ((0, 1), (1, 2)):
            assert probability == pytest.approx(0.5)
        else:
            assert probability == pytest.approx(0.0, abs=1e-10)


def test_conditional_on_impossible_event():
    family = _measurement_family(psi=(1, 0))
    with pytest.raises(DegenerateInputError):
        conditional_probability(family, _event("t2", "pi2"), _event("t1", "a0"))


def test_conditional_with_unknown_label():
    family = three_box_families()["box_a"]
    with pytest.raises(InvalidInputError):
        conditional_probability(family, _event("t2", "phi"), _event("t1", "B"))


def test_measurement_family_dimension_mismatch():
    with pytest.raises(InvalidInputError):
        _measurement_family(psi=(1, 0, 0))


# -- seeded families --


def _random_family(generator, dim: int, intervals: int) -> HistoryFamily:
    return HistoryFamily(
        name="random",
        dim=dim,
        initial=Projector.onto(sampling.random_ket(generator, dim)),
        times=tuple(f"t{k}" for k in range(intervals + 1)),
        steps=tuple(sampling.random_unitary(generator, dim) for _ in range(intervals)),
        event_sets=tuple(sampling.random_decomposition(generator, dim) for _ in range(intervals)),
    )


def test_chain_operators_and_decoherence_match_direct_products():
    generator = sampling.rng(71)
    for _ in range(50):
        dim, intervals = int(generator.integers(2, 5)), int(generator.integers(1, 4))
        family = _random_family(generator, dim, intervals)
        histories = list(enumerate_histories(family))
        chains = []
        for h in histories:
            factors = [family.initial.matrix]
            for step, events, index in zip(family.steps, family.event_sets, h.choice):
                factors = [events.projectors[index].matrix, step, *factors]
            expected = np.linalg.multi_dot(factors)
            assert np.allclose(chain_operator(family, h), expected, atol=1e-12)
            chains.append(expected)
        entries = decoherence_matrix(family).entries
        for i, k_i in enumerate(chains):
            for j, k_j in enumerate(chains):
                assert entries[i, j] == pytest.approx(np.trace(k_j.conj().T @ k_i), abs=1e-12)


def test_two_time_families_are_consistent_with_born_weights():
    generator = sampling.rng(72)
    for _ in range(50):
        family = _random_family(generator, int(generator.integers(2, 7)), 1)
        assert is_consistent(family, tol=1e-12).consistent
        evolved = family.steps[0] @ family.initial.matrix @ family.steps[0].conj().T
        probabilities = history_probabilities(family, tol=1e-12)
        for h, probability in probabilities.items():
            born = np.trace(family.event_sets[0].projectors[h.choice[0]].matrix @ evolved).real
            assert probability == pytest.approx(born, abs=1e-12)
