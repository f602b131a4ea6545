import numpy as np
import pytest
from pydantic import ValidationError

from hilbert_histories import sampling
from hilbert_histories.errors import (
    AmbiguousSpectrumError,
    IncompatibilityError,
    InvalidInputError,
)
from hilbert_histories.linalg import spin_half
from hilbert_histories.properties import (
    Decomposition,
    DensityOperator,
    Projector,
    are_compatible,
    common_refinement,
    functional_relation,
    has_property,
    lift,
    refine_decompositions,
    spectral_decompose,
    support_indices,
)

# -- projectors --


def test_projector_rejects_non_idempotent_matrix():
    with pytest.raises(ValidationError):
        Projector(matrix=np.diag([1.0, 0.5]))


def test_projector_rejects_non_hermitian_matrix():
    with pytest.raises(ValidationError):
        Projector(matrix=[[1, 1], [0, 0]])


def test_projector_rank_and_complement():
    p = Projector.spanned_by([[1, 0, 0], [0, 1, 1]])
    assert p.rank == 2
    assert p.complement().rank == 1
    assert np.allclose(p.matrix + p.complement().matrix, np.eye(3))


def test_spanned_by_rejects_dependent_kets():
    with pytest.raises(InvalidInputError):
        Projector.spanned_by([[1, 1], [2, 2]])


# -- decompositions --


def test_decomposition_gets_default_labels():
    d = Decomposition.from_projectors([np.diag([1, 0]), np.diag([0, 1])])
    assert d.labels == ("a0", "a1")


def test_decomposition_rejects_incomplete_set():
    with pytest.raises(ValidationError):
        Decomposition.from_projectors([np.diag([1, 0, 0]), np.diag([0, 1, 0])])


def test_decomposition_rejects_overlap():
    with pytest.raises(ValidationError):
        Decomposition.from_projectors([np.diag([1, 1]), np.diag([0, 1]), np.diag([0, 0])])


def test_decomposition_allows_an_empty_element():
    d = Decomposition.from_projectors([np.zeros((2, 2)), np.eye(2)], ["empty", "all"])
    assert d.projector("empty").rank == 0


def test_decomposition_rejects_duplicate_labels():
    with pytest.raises(ValidationError):
        Decomposition.from_projectors([np.diag([1, 0]), np.diag([0, 1])], ["x", "x"])


def test_decomposition_unknown_label():
    d = Decomposition.binary(np.diag([1, 0]), ["up", "down"])
    with pytest.raises(InvalidInputError):
        d.index("left")


def test_lift_keeps_labels_and_completeness():
    d = Decomposition.binary(np.diag([1, 0]), ["up", "down"])
    lifted = lift(d, 3)
    assert lifted.labels == ("up", "down")
    assert lifted.dim == 6
    assert lifted.projector("up").rank == 3


# -- states and properties --


def test_has_property_for_ket_and_density():
    p = Projector(matrix=np.diag([1, 1, 0]))
    assert has_property([1, 1j, 0], p)
    assert not has_property([1, 0, 1], p)
    assert has_property(DensityOperator.from_projector(p), p)


def test_has_property_rejects_zero_vector():
    with pytest.raises(InvalidInputError):
        has_property([0, 0], Projector.identity(2))


def test_density_operator_rejects_non_positive():
    with pytest.raises(ValidationError):
        DensityOperator(matrix=np.diag([1.5, -0.5]))


# -- spectral decomposition --


def test_spectral_decompose_groups_degenerate_eigenvalues():
    observable = spectral_decompose(np.diag([2.0, 1.0, 1.0]))
    assert observable.eigenvalues == pytest.approx((1.0, 2.0))
    assert [p.rank for p in observable.decomposition.projectors] == [2, 1]
    assert np.allclose(observable.matrix(), np.diag([2, 1, 1]))


def test_spectral_decompose_rejects_ambiguous_gap():
    with pytest.raises(AmbiguousSpectrumError):
        spectral_decompose(np.diag([1.0, 1.0 + 5e-9]))


def test_spectral_decompose_random_observables():
    generator = sampling.rng(3)
    for _ in range(100):
        observable = sampling.random_observable(generator, int(generator.integers(1, 6)))
        rebuilt = spectral_decompose(observable.matrix())
        assert rebuilt.eigenvalues == pytest.approx(observable.eigenvalues, abs=1e-9)
        assert np.allclose(rebuilt.matrix(), observable.matrix(), atol=1e-9)


# -- compatibility and refinement --


def test_spin_components_are_incompatible():
    assert not are_compatible(spectral_decompose(spin_half("x")), spectral_decompose(spin_half("z")))


def test_common_refinement_of_degenerate_pair():
    a = spectral_decompose(np.diag([1.0, 1.0, 2.0]))
    b = spectral_decompose(np.diag([3.0, 4.0, 4.0]))
    refinement = common_refinement(a, b)
    assert refinement.decomposition.labels == ("r0", "r1", "r2")
    assert refinement.pairs() == ((1.0, 3.0), (1.0, 4.0), (2.0, 4.0))
    assert np.allclose(refinement.decomposition.projectors[0].matrix, np.diag([1, 0, 0]))


def test_common_refinement_refuses_incompatible_observables():
    with pytest.raises(IncompatibilityError) as info:
        common_refinement(spectral_decompose(spin_half("x")), spectral_decompose(spin_half("z")))
    assert info.value.commutator_norm == pytest.approx(np.sqrt(0.5))


def test_refinement_of_random_commuting_pairs_reconstructs_both():
    generator = sampling.rng(5)
    for _ in range(100):
        a, b = sampling.commuting_pair(generator, int(generator.integers(1, 6)))
        refinement = common_refinement(a, b)
        projectors = refinement.decomposition.projectors
        rebuilt_a = sum(v * r.matrix for v, r in zip(refinement.values_a, projectors))
        rebuilt_b = sum(v * r.matrix for v, r in zip(refinement.values_b, projectors))
        assert np.allclose(rebuilt_a, a.matrix(), atol=1e-9)
        assert np.allclose(rebuilt_b, b.matrix(), atol=1e-9)


def test_refine_decompositions_reports_parents():
    first = Decomposition.binary(np.diag([1, 1, 0]))
    second = Decomposition.binary(np.diag([1, 0, 0]))
    refinement, parents_a, parents_b = refine_decompositions(first, second)
    assert len(refinement) == 3
    assert parents_a == (0, 0, 1)
    assert parents_b == (0, 1, 1)


def test_functional_relation():
    a = spectral_decompose(np.diag([1.0, 1.0, 2.0]))
    b = spectral_decompose(np.diag([3.0, 4.0, 4.0]))
    assert not functional_relation(a, b).is_function
    assert functional_relation(a, b).as_mapping() is None


def test_functional_relation_of_coarser_observable():
    a = spectral_decompose(np.diag([1.0, 1.0, 2.0]))
    b = spectral_decompose(np.diag([5.0, 5.0, 6.0]))
    relation = functional_relation(a, b)
    assert relation.is_function
    assert relation.as_mapping() == {1.0: 5.0, 2.0: 6.0}


def test_support_indices():
    d = Decomposition.from_projectors([np.diag([1, 0, 0]), np.diag([0, 1, 0]), np.diag([0, 0, 1])])
    assert support_indices(d, Projector(matrix=np.diag([1, 0, 1]))) == (0, 2)


def test_support_indices_rejects_partial_overlap():
    d = Decomposition.from_projectors([np.diag([1, 0]), np.diag([0, 1])])
    with pytest.raises(InvalidInputError):
        support_indices(d, Projector.onto([1, 1]))
