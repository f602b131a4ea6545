import numpy as np
import pytest

from hilbert_histories import sampling
from hilbert_histories.errors import InvalidInputError
from hilbert_histories.linalg import is_hermitian, is_unitary
from hilbert_histories.properties import are_compatible


def test_same_seed_same_draws():
    first = sampling.random_unitary(sampling.rng(1), 4)
    second = sampling.random_unitary(sampling.rng(1), 4)
    assert np.array_equal(first, second)


def test_random_unitaries_are_unitary():
    generator = sampling.rng(2)
    for dim in range(1, 7):
        assert is_unitary(sampling.random_unitary(generator, dim))


def test_random_hermitian_and_ket():
    generator = sampling.rng(4)
    assert is_hermitian(sampling.random_hermitian(generator, 5))
    assert np.linalg.norm(sampling.random_ket(generator, 5)) == pytest.approx(1.0)


def test_random_decomposition_has_requested_parts():
    decomposition = sampling.random_decomposition(sampling.rng(6), 5, parts=3)
    assert len(decomposition) == 3
    assert sum(p.rank for p in decomposition.projectors) == 5


def test_commuting_triple_shapes():
    generator = sampling.rng(8)
    for _ in range(20):
        a, b, c = sampling.commuting_triple(generator, 4)
        assert a.eigenvalues[0] == 0.0
        assert a.decomposition.projectors[0].rank == 2
        assert are_compatible(a, b)
        assert are_compatible(a, c)
        assert not are_compatible(b, c)


def test_commuting_triple_needs_three_dimensions():
    with pytest.raises(InvalidInputError):
        sampling.commuting_triple(sampling.rng(0), 2)
