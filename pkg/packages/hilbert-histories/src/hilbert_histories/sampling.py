"""Seeded random states, operators and decompositions for property-style tests."""

import numpy as np

from hilbert_histories.errors import InvalidInputError
from hilbert_histories.linalg import adjoint
from hilbert_histories.properties import Decomposition, Observable, Projector, spectral_decompose


def rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)


def _gaussian(generator: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    return generator.standard_normal(shape) + 1j * generator.standard_normal(shape)


def random_unitary(generator: np.random.Generator, dim: int) -> np.ndarray:
    """Haar-distributed unitary from the QR decomposition of a Gaussian matrix."""
    q, r = np.linalg.qr(_gaussian(generator, (dim, dim)))
    phases = r.diagonal() / np.abs(r.diagonal())
    return q * phases


def random_hermitian(generator: np.random.Generator, dim: int, scale: float = 1.0) -> np.ndarray:
    g = _gaussian(generator, (dim, dim))
    return scale * (g + adjoint(g)) / 2


def random_ket(generator: np.random.Generator, dim: int) -> np.ndarray:
    ket = _gaussian(generator, (dim,))
    return ket / np.linalg.norm(ket)


def _group_projectors(basis: np.ndarray, groups: list[list[int]]) -> list[Projector]:
    projectors = []
    for group in groups:
        columns = basis[:, group]
        projectors.append(Projector(matrix=columns @ adjoint(columns)))
    return projectors


def random_decomposition(
    generator: np.random.Generator, dim: int, parts: int | None = None
) -> Decomposition:
    """Decomposition of the identity into parts projectors of random ranks."""
    count = parts or int(generator.integers(1, dim + 1))
    cuts = sorted(generator.choice(np.arange(1, dim), size=count - 1, replace=False).tolist())
    bounds = [0, *cuts, dim]
    groups = [list(range(lo, hi)) for lo, hi in zip(bounds, bounds[1:])]
    return Decomposition.from_projectors(
        _group_projectors(random_unitary(generator, dim), groups)
    )


def _observable(basis: np.ndarray, values: list[int]) -> Observable:
    distinct = sorted(set(values))
    groups = [[k for k, v in enumerate(values) if v == value] for value in distinct]
    return Observable(
        eigenvalues=tuple(float(v) for v in distinct),
        decomposition=Decomposition.from_projectors(_group_projectors(basis, groups)),
    )


def random_observable(generator: np.random.Generator, dim: int, levels: int = 3) -> Observable:
    """Observable with small integer eigenvalues, usually degenerate."""
    values = generator.integers(0, levels, size=dim).tolist()
    return _observable(random_unitary(generator, dim), values)


def commuting_pair(
    generator: np.random.Generator, dim: int, levels: int = 3
) -> tuple[Observable, Observable]:
    """Two compatible observables diagonal in one random basis, degeneracies likely."""
    basis = random_unitary(generator, dim)
    values_a = generator.integers(0, levels, size=dim).tolist()
    values_b = generator.integers(0, levels, size=dim).tolist()
    return _observable(basis, values_a), _observable(basis, values_b)


def commuting_triple(
    generator: np.random.Generator, dim: int
) -> tuple[Observable, Observable, Observable]:
    """A with a doubly degenerate eigenvalue, B and C compatible with A but not each other.

    B and C act as random 2 x 2 Hermitian blocks on the degenerate eigenspace of A and
    as distinct large values on the rest.
    """
    if dim < 3:
        raise InvalidInputError("A degenerate eigenspace plus another eigenvalue needs dim >= 3.")
    basis = random_unitary(generator, dim)
    a = _observable(basis, [0, 0, *range(1, dim - 1)])
    tail = np.diag([10.0 + k for k in range(dim - 2)])

    def block_observable() -> Observable:
        matrix = np.zeros((dim, dim), dtype=np.complex128)
        matrix[:2, :2] = random_hermitian(generator, 2)
        matrix[2:, 2:] = tail
        return spectral_decompose(basis @ matrix @ adjoint(basis))

    return a, block_observable(), block_observable()
