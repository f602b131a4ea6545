"""Noncontextual {0, 1} valuations of projectors.

A hidden-variable value for every observable would give every projector a value 0 or
1, the value of its indicator observable, independently of the decomposition it is
considered part of. In each decomposition exactly one projector is then true. The
search below looks for such an assignment over a finite set of decompositions
(contexts) sharing projectors, and certifies exhaustion when there is none.
"""

import itertools
import logging
from collections.abc import Sequence
from typing import Literal, Self

from pydantic import BaseModel, ConfigDict, Field, model_validator

from hilbert_histories.constants import EXHAUSTIVE_IDENTIFIERS_MAX, MAX_IDENTIFIERS, TOL
from hilbert_histories.errors import CapacityError, InvalidInputError
from hilbert_histories.linalg import frobenius_norm
from hilbert_histories.properties import Decomposition, Projector, first_noncommuting_pair

logger = logging.getLogger(__name__)


class ValuationProblem(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    projector_pool: dict[str, Projector] = Field(
        description="Distinct projectors under stable identifiers."
    )
    contexts: tuple[tuple[str, ...], ...] = Field(
        min_length=1, description="Decompositions of the identity given by identifiers."
    )

    @model_validator(mode="after")
    def check(self) -> Self:
        dims = {p.dim for p in self.projector_pool.values()}
        if len(dims) > 1:
            raise ValueError(f"Projectors of mixed dimensions {sorted(dims)}.")
        for identifier, p in self.projector_pool.items():
            if p.rank == 0:
                raise ValueError(f"Projector {identifier} is zero.")
        identifiers = list(self.projector_pool)
        for i, first in enumerate(identifiers):
            for second in identifiers[i + 1 :]:
                distance = frobenius_norm(
                    self.projector_pool[first].matrix - self.projector_pool[second].matrix
                )
                if distance <= TOL:
                    raise ValueError(f"Projectors {first} and {second} are equal; share one identifier.")
        for k, context in enumerate(self.contexts):
            unknown = set(context) - set(self.projector_pool)
            if unknown:
                raise ValueError(f"Context {k} names unknown projectors {sorted(unknown)}.")
            if len(set(context)) != len(context):
                raise ValueError(f"Context {k} repeats a projector.")
            try:
                self.decomposition(k)
            except ValueError as exc:
                raise ValueError(f"Context {k} is not a decomposition of the identity.") from exc
        return self

    def decomposition(self, index: int) -> Decomposition:
        context = self.contexts[index]
        return Decomposition.from_projectors(
            [self.projector_pool[i] for i in context], list(context)
        )

    def bridges(self) -> dict[str, tuple[int, ...]]:
        """Identifiers shared by several contexts, with the contexts they bridge."""
        owners: dict[str, list[int]] = {}
        for k, context in enumerate(self.contexts):
            for identifier in context:
                owners.setdefault(identifier, []).append(k)
        return {i: tuple(ks) for i, ks in owners.items() if len(ks) > 1}

    def incompatible_context_pairs(self) -> list[tuple[int, int]]:
        decompositions = [self.decomposition(k) for k in range(len(self.contexts))]
        return [
            (i, j)
            for i, j in itertools.combinations(range(len(decompositions)), 2)
            if first_noncommuting_pair(decompositions[i], decompositions[j]) is not None
        ]


class Valuation(BaseModel):
    model_config = ConfigDict(frozen=True)

    assignment: dict[str, Literal[0, 1]]

    def violated_contexts(self, problem: ValuationProblem) -> list[int]:
        """Contexts without exactly one true projector; empty for a valid valuation."""
        return [
            k
            for k, context in enumerate(problem.contexts)
            if sum(self.assignment.get(i, 0) for i in context) != 1
        ]

    def true_projectors(self) -> list[str]:
        return [i for i, value in self.assignment.items() if value == 1]


class ExhaustionCertificate(BaseModel):
    model_config = ConfigDict(frozen=True)

    identifiers: int
    contexts: int
    nodes_examined: int = Field(description="Partial assignments tried.")
    branches_pruned: int = Field(description="Partial assignments rejected by propagation.")


class ValuationResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    valuation: Valuation | None
    certificate: ExhaustionCertificate

    @property
    def found(self) -> bool:
        return self.valuation is not None


def detect_shared_projectors(
    raw_contexts: Sequence[Decomposition], tol: float = TOL
) -> ValuationProblem:
    """Give equal projectors one identifier p0, p1, ... across all contexts."""
    if not raw_contexts:
        raise InvalidInputError("At least one context is required.")
    dims = {d.dim for d in raw_contexts}
    if len(dims) != 1:
        raise InvalidInputError(f"Contexts of mixed dimensions {sorted(dims)}.")
    pool: dict[str, Projector] = {}
    contexts = []
    for decomposition in raw_contexts:
        context = []
        for p in decomposition.projectors:
            identifier = next(
                (i for i, q in pool.items() if frobenius_norm(p.matrix - q.matrix) <= tol),
                None,
            )
            if identifier is None:
                identifier = f"p{len(pool)}"
                pool[identifier] = p
            context.append(identifier)
        contexts.append(tuple(context))
    problem = ValuationProblem(projector_pool=pool, contexts=tuple(contexts))
    incompatible = problem.incompatible_context_pairs()
    if incompatible:
        logger.info("Contexts %s do not commute", incompatible)
    return problem


class _Search:
    def __init__(self, problem: ValuationProblem):
        self.problem = problem
        self.position = {i: k for k, i in enumerate(problem.projector_pool)}
        self.membership: dict[str, list[int]] = {i: [] for i in problem.projector_pool}
        for k, context in enumerate(problem.contexts):
            for identifier in context:
                self.membership[identifier].append(k)
        bridges = problem.bridges()
        degree = [
            len({other for i in context if i in bridges for other in bridges[i]} - {k})
            for k, context in enumerate(problem.contexts)
        ]
        self.order = sorted(range(len(problem.contexts)), key=lambda k: -degree[k])
        self.assignment: dict[str, int] = {}
        self.nodes = 0
        self.pruned = 0

    def _feasible(self, k: int) -> bool:
        context = self.problem.contexts[k]
        ones = sum(1 for i in context if self.assignment.get(i) == 1)
        open_ = sum(1 for i in context if i not in self.assignment)
        return ones == 1 or (ones == 0 and open_ > 0)

    def _try(self, updates: dict[str, int], depth: int) -> bool:
        self.nodes += 1
        self.assignment.update(updates)
        touched = {k for i in updates for k in self.membership[i]}
        if all(self._feasible(k) for k in touched):
            if self.run(depth + 1):
                return True
        else:
            self.pruned += 1
        for identifier in updates:
            del self.assignment[identifier]
        return False

    def run(self, depth: int = 0) -> bool:
        if depth == len(self.order):
            return True
        context = sorted(self.problem.contexts[self.order[depth]], key=self.position.__getitem__)
        open_ = [i for i in context if i not in self.assignment]
        if any(self.assignment.get(i) == 1 for i in context):
            if not open_:
                return self.run(depth + 1)
            return self._try(dict.fromkeys(open_, 0), depth)
        for chosen in open_:
            updates = {i: int(i == chosen) for i in open_}
            if self._try(updates, depth):
                return True
        return False


def search_valuation(
    problem: ValuationProblem, max_identifiers: int = MAX_IDENTIFIERS
) -> ValuationResult:
    """Backtracking over contexts, most shared first, propagating shared identifiers."""
    count = len(problem.projector_pool)
    if count > max_identifiers:
        raise CapacityError(
            f"{count} projector identifiers exceed the search bound of {max_identifiers}."
        )
    search = _Search(problem)
    found = search.run()
    certificate = ExhaustionCertificate(
        identifiers=count,
        contexts=len(problem.contexts),
        nodes_examined=search.nodes,
        branches_pruned=search.pruned,
    )
    valuation = None
    if found:
        assignment = {i: search.assignment.get(i, 0) for i in problem.projector_pool}
        valuation = Valuation(assignment=assignment)
    logger.debug(
        "Valuation search over %d identifiers: %s after %d nodes, %d pruned",
        count,
        "found" if found else "exhausted",
        search.nodes,
        search.pruned,
    )
    return ValuationResult(valuation=valuation, certificate=certificate)


def exhaustive_valuations(problem: ValuationProblem) -> list[Valuation]:
    """Every valid valuation by enumerating all 2^n assignments."""
    identifiers = list(problem.projector_pool)
    if len(identifiers) > EXHAUSTIVE_IDENTIFIERS_MAX:
        raise CapacityError(
            f"Exhaustive enumeration is limited to {EXHAUSTIVE_IDENTIFIERS_MAX} identifiers."
        )
    valuations = []
    for values in itertools.product((0, 1), repeat=len(identifiers)):
        candidate = Valuation(assignment=dict(zip(identifiers, values)))
        if not candidate.violated_contexts(problem):
            valuations.append(candidate)
    return valuations
