import json

import numpy as np
import pytest
from pydantic import ValidationError

from chsim.operators import (
    DecompositionSpec,
    ProjectorSpec,
    named_operator,
    parse_decomposition,
    parse_operator,
)
from chsim.scenarios import (
    HistoriesScenario,
    MeasurementScenario,
    ValuationScenario,
    parse_scenario,
)
from hilbert_histories.linalg import spin_half

# -- operators --


def test_named_operators():
    assert np.allclose(named_operator("spin_half_sy"), spin_half("y"))
    assert np.allclose(named_operator("identity:3"), np.eye(3))
    assert np.allclose(named_operator("diag:[1, -1, 2.5]"), np.diag([1, -1, 2.5]))


@pytest.mark.parametrize("name", ["spin_half_sw", "identity:x", "diag:[]", "diag:oops", "pauli"])
def test_unknown_or_malformed_names(name):
    with pytest.raises(ValueError):
        named_operator(name)


def test_parse_operator_from_json_pairs():
    matrix = parse_operator("[[[0,0],[0,-1]],[[0,1],[0,0]]]")
    assert np.allclose(matrix, 2 * spin_half("y"))


def test_parse_operator_by_name():
    assert np.allclose(parse_operator("spin_half_sx"), spin_half("x"))


def test_parse_operator_rejects_garbage():
    with pytest.raises(ValidationError):
        parse_operator("[[1, 2], [3]]")


# -- projector and decomposition specs --


def test_projector_spec_variants():
    assert ProjectorSpec(ket=[1, 1]).build().rank == 1
    assert ProjectorSpec(kets=[[1, 0, 0], [0, 1, 0]]).build().rank == 2
    assert ProjectorSpec.model_validate("diag:[0,1]").build().rank == 1


def test_projector_spec_needs_exactly_one_form():
    with pytest.raises(ValidationError):
        ProjectorSpec(ket=[1, 0], matrix=np.diag([1, 0]))
    with pytest.raises(ValidationError):
        ProjectorSpec()


def test_projector_spec_rejects_non_projector():
    with pytest.raises(ValidationError):
        ProjectorSpec.model_validate("diag:[1,2]")


def test_decomposition_spec_from_observable_name():
    decomposition = parse_decomposition("diag:[1,1,2]").build()
    assert decomposition.labels == ("a0", "a1")
    assert [p.rank for p in decomposition.projectors] == [2, 1]


def test_decomposition_spec_with_labels():
    spec = DecompositionSpec.model_validate({"binary": {"ket": [1, 0]}, "labels": ["up", "not_up"]})
    assert spec.build().labels == ("up", "not_up")


def test_decomposition_spec_from_json_projectors():
    spec = parse_decomposition('{"projectors": [{"ket": [1, 0]}, {"ket": [0, 1]}]}')
    assert len(spec.build()) == 2


def test_decomposition_spec_rejects_incomplete_projectors():
    with pytest.raises(ValidationError):
        parse_decomposition('{"projectors": [{"ket": [1, 0]}]}')


# -- scenario files --


def _measurement(**payload) -> dict:
    return {
        "version": 1,
        "kind": "measurement",
        "payload": {"measured": "diag:[1,2]", "dim_m": 3, "prepared": {"ket": [1, 0]}, **payload},
    }


def test_parse_measurement_scenario():
    scenario = parse_scenario(json.dumps(_measurement()))
    assert isinstance(scenario, MeasurementScenario)
    assert scenario.payload.ready_rank == 1
    assert scenario.expected == {}


def test_expectations_accept_numbers_flags_and_ranges():
    data = _measurement()
    data["expected"] = {"probability_pi1": 1, "calibrated": True, "calibration_max_violation": [0, 1e-9]}
    scenario = parse_scenario(json.dumps(data))
    assert scenario.expected["calibrated"] is True
    assert scenario.expected["calibration_max_violation"] == (0.0, 1e-9)


def test_unknown_kind_is_rejected():
    data = _measurement()
    data["kind"] = "teleportation"
    with pytest.raises(ValidationError):
        parse_scenario(json.dumps(data))


def test_unknown_version_is_rejected():
    data = _measurement()
    data["version"] = 2
    with pytest.raises(ValidationError):
        parse_scenario(json.dumps(data))


def test_extra_payload_fields_are_rejected():
    with pytest.raises(ValidationError):
        parse_scenario(json.dumps(_measurement(colour="blue")))


def test_histories_payload_needs_exactly_one_family():
    data = {"version": 1, "kind": "histories", "payload": {}}
    with pytest.raises(ValidationError):
        parse_scenario(json.dumps(data))
    data["payload"] = {"three_box": "box_a"}
    assert isinstance(parse_scenario(json.dumps(data)), HistoriesScenario)


def test_framework_combine_with_pointers_needs_apparatus():
    data = {
        "version": 1,
        "kind": "framework-combine",
        "payload": {
            "first": {"name": "p", "pointers": True},
            "second": {"name": "z", "sample_space": "spin_half_sz"},
        },
    }
    with pytest.raises(ValidationError):
        parse_scenario(json.dumps(data))


def test_noncontextuality_needs_operators_or_trials():
    data = {"version": 1, "kind": "noncontextuality", "payload": {"a": "diag:[1,1,2]"}}
    with pytest.raises(ValidationError):
        parse_scenario(json.dumps(data))


def test_valuation_scenario_contexts():
    data = {
        "version": 1,
        "kind": "valuation",
        "payload": {"contexts": ["spin_half_sz", "spin_half_sx"]},
    }
    scenario = parse_scenario(json.dumps(data))
    assert isinstance(scenario, ValuationScenario)
    assert len(scenario.payload.contexts) == 2


def test_malformed_json_is_a_validation_error():
    with pytest.raises(ValidationError):
        parse_scenario("{not json")
