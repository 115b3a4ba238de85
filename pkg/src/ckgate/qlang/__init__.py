"""Bounded graph-pattern query language: lexer, parser, evaluator."""

from .ast import (
    FORWARD,
    MAX_PATTERN_NODES,
    REVERSE,
    Condition,
    EdgeElem,
    NodeElem,
    Query,
    ReturnItem,
    Token,
    pretty_print,
)
from .errors import (
    BudgetExceeded,
    EvalError,
    LexError,
    ParseError,
    PatternTooLong,
    QueryError,
    TypeMismatch,
    UnboundVariable,
    UnknownEdgeType,
    UnknownLabel,
)
from .evaluator import (
    DEFAULT_MAX_ROWS,
    DEFAULT_MAX_STEPS,
    DEFAULT_WALL_CLOCK_MS,
    Budget,
    BudgetMeter,
    ResultTable,
    condition_matches,
    evaluate,
)
from .lexer import tokenize
from .parser import parse

__all__ = [
    "FORWARD",
    "REVERSE",
    "MAX_PATTERN_NODES",
    "Token",
    "NodeElem",
    "EdgeElem",
    "Condition",
    "ReturnItem",
    "Query",
    "pretty_print",
    "tokenize",
    "parse",
    "evaluate",
    "condition_matches",
    "Budget",
    "BudgetMeter",
    "ResultTable",
    "DEFAULT_MAX_STEPS",
    "DEFAULT_MAX_ROWS",
    "DEFAULT_WALL_CLOCK_MS",
    "QueryError",
    "LexError",
    "ParseError",
    "UnboundVariable",
    "PatternTooLong",
    "EvalError",
    "UnknownLabel",
    "UnknownEdgeType",
    "TypeMismatch",
    "BudgetExceeded",
]
