"""Budget-limited pattern evaluator.

Matching walks the linear pattern left to right with a depth-first
search in ascending (node id, edge id) order, which makes row order
deterministic: rows come out sorted by the full binding tuple. Every
candidate edge considered during traversal costs one step from the
budget, whether or not it matches, so exhaustion is reproducible
independent of wall-clock speed.

Repeated pattern variables are joins: a variable already bound must
re-bind to the same node or edge.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

from ..graph import EDGE_TYPES_BY_NAME, LABELS_BY_NAME, PropertyGraph
from .ast import FORWARD, Condition, Query
from .errors import BudgetExceeded, TypeMismatch, UnknownEdgeType, UnknownLabel

DEFAULT_MAX_STEPS = 10_000_000
DEFAULT_MAX_ROWS = 100_000
DEFAULT_WALL_CLOCK_MS = 60_000

_WALL_CHECK_EVERY = 128


@dataclass
class Budget:
    """Evaluation limits. Zero values force immediate exhaustion."""

    max_steps: int = DEFAULT_MAX_STEPS
    max_rows: int = DEFAULT_MAX_ROWS
    wall_clock_ms: int = DEFAULT_WALL_CLOCK_MS

    def __post_init__(self) -> None:
        for name in ("max_steps", "max_rows", "wall_clock_ms"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


@dataclass
class BudgetMeter:
    """Consumption read-back for callers that pool budgets across queries."""

    steps_used: int = 0
    rows_emitted: int = 0


@dataclass
class ResultTable:
    columns: list
    rows: list = field(default_factory=list)
    truncated: bool = False


class _Done(Exception):
    pass


def evaluate(
    graph: PropertyGraph,
    query: Query,
    budget: Budget,
    meter: Optional[BudgetMeter] = None,
) -> ResultTable:
    """Run a parsed query against a graph under `budget`.

    The result is truncated (with the flag set) once LIMIT or
    budget.max_rows rows have been produced; running out of steps or
    wall clock raises BudgetExceeded instead.
    """
    labels = []
    for elem in query.nodes:
        if elem.label is None:
            labels.append(None)
        elif elem.label in LABELS_BY_NAME:
            labels.append(LABELS_BY_NAME[elem.label])
        else:
            raise UnknownLabel(elem.label)
    edge_types = []
    for edge in query.edges:
        if edge.type_name is None:
            edge_types.append(None)
        elif edge.type_name in EDGE_TYPES_BY_NAME:
            edge_types.append(EDGE_TYPES_BY_NAME[edge.type_name])
        else:
            raise UnknownEdgeType(edge.type_name)

    meter = meter if meter is not None else BudgetMeter()
    started = time.monotonic()

    def check_wall() -> None:
        if (time.monotonic() - started) * 1000.0 >= budget.wall_clock_ms:
            raise BudgetExceeded("wall_clock")

    check_wall()

    cap = budget.max_rows if query.limit is None else min(query.limit, budget.max_rows)
    columns = [item.var if item.key is None else f"{item.var}.{item.key}" for item in query.returns]
    table = ResultTable(columns=columns)
    bindings: dict[str, tuple[str, int]] = {}

    mismatch = object()

    def bind(var: Optional[str], kind: str, ident: int):
        """Returns the var name if newly bound, None on a no-op rebind,
        `mismatch` when the var is already bound to something else."""
        if var is None:
            return None
        if var in bindings:
            return None if bindings[var] == (kind, ident) else mismatch
        bindings[var] = (kind, ident)
        return var

    def emit_row() -> None:
        for cond in query.where:
            if not _condition_holds(graph, bindings, cond):
                return
        row = []
        for item in query.returns:
            kind, ident = bindings[item.var]
            if item.key is None:
                row.append(ident)
            else:
                props = (graph.node(ident) if kind == "node" else graph.edge(ident)).properties
                row.append(props.get(item.key))
        table.rows.append(tuple(row))
        meter.rows_emitted += 1
        check_wall()
        if len(table.rows) >= cap:
            table.truncated = True
            raise _Done()

    def extend(hop: int, current: int) -> None:
        if hop == len(query.edges):
            emit_row()
            return
        edge_elem = query.edges[hop]
        etype = edge_types[hop]
        direction = "out" if edge_elem.direction == FORWARD else "in"
        next_elem = query.nodes[hop + 1]
        next_label = labels[hop + 1]
        for edge_id, neighbor in graph.neighbors(current, etype, direction):
            if meter.steps_used >= budget.max_steps:
                raise BudgetExceeded("steps")
            meter.steps_used += 1
            if meter.steps_used % _WALL_CHECK_EVERY == 0:
                check_wall()
            if next_label is not None and graph.node(neighbor).label is not next_label:
                continue
            new_edge = bind(edge_elem.var, "edge", edge_id)
            if new_edge is mismatch:
                continue
            new_node = bind(next_elem.var, "node", neighbor)
            if new_node is mismatch:
                if new_edge:
                    del bindings[new_edge]
                continue
            extend(hop + 1, neighbor)
            if new_edge:
                del bindings[new_edge]
            if new_node:
                del bindings[new_node]

    first = query.nodes[0]
    if labels[0] is not None:
        seeds = graph.nodes_by_label(labels[0])
    else:
        seeds = [node.id for node in graph.nodes()]
    try:
        for seed in seeds:
            new = bind(first.var, "node", seed)
            extend(0, seed)
            if new is not mismatch and new:
                del bindings[new]
    except _Done:
        pass
    return table


def _condition_holds(graph: PropertyGraph, bindings: dict, cond: Condition) -> bool:
    kind, ident = bindings[cond.var]
    props = (graph.node(ident) if kind == "node" else graph.edge(ident)).properties
    return condition_matches(props.get(cond.key), cond.op, cond.literal)


def condition_matches(value, op: str, literal) -> bool:
    """Apply one comparison; absent values never match.

    Raises TypeMismatch when a present value's type is incompatible
    with the operator (ordering needs numbers, CONTAINS needs text or a
    text list).
    """
    if value is None:
        return False
    value_is_num = isinstance(value, (int, float)) and not isinstance(value, bool)
    literal_is_num = isinstance(literal, (int, float)) and not isinstance(literal, bool)
    if op == "CONTAINS":
        if not isinstance(literal, str):
            raise TypeMismatch(op, "requires a string literal")
        if isinstance(value, str):
            return literal in value
        if isinstance(value, list):
            return any(literal in entry for entry in value)
        raise TypeMismatch(op, f"not applicable to {type(value).__name__} values")
    if op in ("<", "<=", ">", ">="):
        if not (value_is_num and literal_is_num):
            raise TypeMismatch(op, "compares numbers only")
        if op == "<":
            return value < literal
        if op == "<=":
            return value <= literal
        if op == ">":
            return value > literal
        return value >= literal
    if op in ("=", "<>"):
        if value_is_num and literal_is_num:
            equal = float(value) == float(literal)
        elif isinstance(value, str) and isinstance(literal, str):
            equal = value == literal
        else:
            raise TypeMismatch(op, "operands have incompatible types")
        return equal if op == "=" else not equal
    raise TypeMismatch(op, "unknown operator")
