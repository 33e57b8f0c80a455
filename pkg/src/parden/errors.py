class PardenError(Exception):
    """Base class for errors raised by this package."""


class ContractError(PardenError, ValueError):
    """An operation was called with arguments violating its preconditions."""


class EmptyInputError(ContractError):
    pass


class IngestionError(PardenError, ValueError):
    """A market-data file could not be parsed."""

    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.row = row
        self.column = column


class FactorizationError(PardenError, ValueError):
    pass


class InfeasibleConstraintError(PardenError, ValueError):
    pass


class DegenerateFrontierError(PardenError, ValueError):
    pass


class ConfigError(PardenError, ValueError):
    """An experiment or algorithm configuration is invalid."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field


class BudgetError(ConfigError):
    pass
