"""Error types shared by the query front end and evaluator."""

from __future__ import annotations


class QueryError(Exception):
    """Base class for everything a query can do wrong."""


class LexError(QueryError):
    def __init__(self, position: int, message: str):
        self.position = position
        super().__init__(f"at byte {position}: {message}")


class ParseError(QueryError):
    def __init__(self, position: int, expected: str, found: str = ""):
        self.position = position
        self.expected = expected
        detail = f"expected {expected}"
        if found:
            detail += f", found {found}"
        super().__init__(f"at byte {position}: {detail}")


class UnboundVariable(QueryError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"variable {name!r} is not bound in the pattern")


class PatternTooLong(QueryError):
    def __init__(self, limit: int):
        self.limit = limit
        super().__init__(f"patterns may use at most {limit} node elements")


class EvalError(QueryError):
    """Base class for evaluation-time failures."""


class UnknownLabel(EvalError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unknown node label {name!r}")


class UnknownEdgeType(EvalError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unknown edge type {name!r}")


class TypeMismatch(EvalError):
    def __init__(self, op: str, detail: str):
        self.op = op
        super().__init__(f"operator {op} {detail}")


class BudgetExceeded(EvalError):
    """Raised when a query runs past its step, row, or wall-clock budget.

    `kind` is one of "steps", "rows", or "wall_clock"; the gateway maps
    this error to the TIMEOUT query-error code.
    """

    def __init__(self, kind: str):
        self.kind = kind
        super().__init__(f"query budget exceeded ({kind})")
