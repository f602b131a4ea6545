class HilbertError(Exception):
    pass


class InvalidInputError(HilbertError, ValueError):
    pass


class IncompatibilityError(InvalidInputError):
    def __init__(self, first: str, second: str, commutator_norm: float):
        self.first = first
        self.second = second
        self.commutator_norm = commutator_norm
        super().__init__(
            f"{first} and {second} do not commute "
            f"(commutator norm {commutator_norm:.3e})"
        )


class DegenerateInputError(InvalidInputError):
    pass


class CapacityError(HilbertError):
    pass


class NumericError(HilbertError):
    pass


class AmbiguousSpectrumError(NumericError):
    def __init__(self, lower: float, upper: float, gap: float):
        self.lower = lower
        self.upper = upper
        self.gap = gap
        super().__init__(
            f"Eigenvalues {lower!r} and {upper!r} are separated by {gap:.3e}, "
            "too close to tell apart and too far to be numerical noise"
        )


class ConsistencyError(HilbertError):
    def __init__(self, family: str, max_off_diagonal: float):
        self.family = family
        self.max_off_diagonal = max_off_diagonal
        super().__init__(
            f"Family {family!r} is inconsistent (max off-diagonal "
            f"{max_off_diagonal:.3e}), probabilities are undefined"
        )
