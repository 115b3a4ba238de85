"""AST for the bounded graph-pattern query language.

A query is a single linear pattern of one to three node elements joined
by directed edge elements, an optional conjunctive WHERE clause, a
RETURN list, and an optional LIMIT. Labels and edge types are kept as
raw names here; they are validated against the graph schema by the
evaluator, not the parser.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

FORWARD = "forward"
REVERSE = "reverse"

MAX_PATTERN_NODES = 3

OPERATORS = ("=", "<>", "<=", ">=", "<", ">", "CONTAINS")

Literal = Union[str, int, float]


@dataclass(frozen=True)
class Token:
    kind: str  # keyword | identifier | symbol | string | number
    lexeme: str
    position: int  # byte offset into the UTF-8 encoded input
    value: Optional[Literal] = None


@dataclass(frozen=True)
class NodeElem:
    var: str
    label: Optional[str] = None


@dataclass(frozen=True)
class EdgeElem:
    var: Optional[str] = None
    type_name: Optional[str] = None
    direction: str = FORWARD


@dataclass(frozen=True)
class Condition:
    var: str
    key: str
    op: str
    literal: Literal


@dataclass(frozen=True)
class ReturnItem:
    var: str
    key: Optional[str] = None


@dataclass(frozen=True)
class Query:
    nodes: tuple[NodeElem, ...]
    edges: tuple[EdgeElem, ...] = ()
    where: tuple[Condition, ...] = ()
    returns: tuple[ReturnItem, ...] = ()
    limit: Optional[int] = None

    def variables(self) -> set[str]:
        bound = {n.var for n in self.nodes}
        bound.update(e.var for e in self.edges if e.var is not None)
        return bound


def format_literal(literal: Literal) -> str:
    if isinstance(literal, str):
        escaped = literal.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    return repr(literal)


def _format_node(elem: NodeElem) -> str:
    if elem.label is None:
        return f"({elem.var})"
    return f"({elem.var}:{elem.label})"


def _format_edge(elem: EdgeElem) -> str:
    inner = elem.var or ""
    if elem.type_name is not None:
        inner += f":{elem.type_name}"
    if elem.direction == FORWARD:
        return f"-[{inner}]->"
    return f"<-[{inner}]-"


def pretty_print(query: Query) -> str:
    """Render a query in canonical form; parsing the result reproduces it."""
    parts = ["MATCH ", _format_node(query.nodes[0])]
    for edge, node in zip(query.edges, query.nodes[1:]):
        parts.append(_format_edge(edge))
        parts.append(_format_node(node))
    if query.where:
        conds = " AND ".join(
            f"{c.var}.{c.key} {c.op} {format_literal(c.literal)}" for c in query.where
        )
        parts.append(f" WHERE {conds}")
    items = ", ".join(i.var if i.key is None else f"{i.var}.{i.key}" for i in query.returns)
    parts.append(f" RETURN {items}")
    if query.limit is not None:
        parts.append(f" LIMIT {query.limit}")
    return "".join(parts)
