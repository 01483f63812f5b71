"""Error types shared across the package."""


class SizeError(ValueError):
    """An operation was asked to run outside its supported size range."""


class ContractError(ValueError):
    """An argument violates a documented precondition."""


class RegimeError(ContractError):
    """A statistical experiment refuses to run in a degenerate parameter regime."""


class ParseError(ValueError):
    """A serialized configuration is malformed; `offset` locates the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class SolverError(RuntimeError):
    """A numeric root-finder could not bracket its target."""

    def __init__(self, message: str, lo: float, hi: float):
        super().__init__(f"{message} (bracket [{lo}, {hi}])")
        self.bracket = (lo, hi)
