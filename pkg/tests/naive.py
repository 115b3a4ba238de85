"""Independent brute-force reference implementations.

These stay deliberately naive: no indices, no budgets, no shared code
with the production paths they check. The query oracle enumerates raw
node/edge tuples; the metrics oracle counts with plain dict loops.
"""

from __future__ import annotations

from ckgate.graph import PropertyGraph
from ckgate.qlang import FORWARD, Query


def _props(graph: PropertyGraph, kind: str, ident: int) -> dict:
    return (graph.node(ident) if kind == "node" else graph.edge(ident)).properties


def _cond_ok(value, op, literal) -> bool:
    if value is None:
        return False
    if op == "CONTAINS":
        if isinstance(value, str):
            return literal in value
        return any(literal in entry for entry in value)
    if op in ("<", "<=", ">", ">="):
        if op == "<":
            return value < literal
        if op == "<=":
            return value <= literal
        if op == ">":
            return value > literal
        return value >= literal
    if isinstance(value, (int, float)) and isinstance(literal, (int, float)):
        equal = float(value) == float(literal)
    else:
        equal = value == literal
    return equal if op == "=" else not equal


def naive_evaluate(graph: PropertyGraph, query: Query):
    """Exhaustive evaluation; returns (columns, rows) like the real one.

    Bindings are enumerated from the raw node and edge sets, sorted by
    the hop-major key (n0, n1, e0, n2, e1) the production DFS follows,
    filtered, projected, and cut at LIMIT.
    """
    all_nodes = list(graph.nodes())
    all_edges = list(graph.edges())

    def node_ok(elem, node_id: int) -> bool:
        return elem.label is None or graph.node(node_id).label.value == elem.label

    def hop(elem, edge):
        """Pattern-order (left, right) endpoints this edge can bind, or None."""
        if elem.type_name is not None and edge.type.value != elem.type_name:
            return None
        return (edge.src, edge.dst) if elem.direction == FORWARD else (edge.dst, edge.src)

    bindings = []
    n = len(query.nodes)
    if n == 1:
        for node in all_nodes:
            if node_ok(query.nodes[0], node.id):
                bindings.append(((node.id,), ()))
    elif n == 2:
        for edge in all_edges:
            ends = hop(query.edges[0], edge)
            if ends is None:
                continue
            n0, n1 = ends
            if node_ok(query.nodes[0], n0) and node_ok(query.nodes[1], n1):
                bindings.append(((n0, n1), (edge.id,)))
    else:
        for e0 in all_edges:
            first = hop(query.edges[0], e0)
            if first is None:
                continue
            n0, n1 = first
            if not (node_ok(query.nodes[0], n0) and node_ok(query.nodes[1], n1)):
                continue
            for e1 in all_edges:
                second = hop(query.edges[1], e1)
                if second is None or second[0] != n1:
                    continue
                n2 = second[1]
                if node_ok(query.nodes[2], n2):
                    bindings.append(((n0, n1, n2), (e0.id, e1.id)))

    def order_key(binding):
        node_ids, edge_ids = binding
        key = [node_ids[0]]
        for i, edge_id in enumerate(edge_ids):
            key.append(node_ids[i + 1])
            key.append(edge_id)
        return tuple(key)

    bindings = _dedupe(sorted(bindings, key=order_key))

    def var_map(binding):
        node_ids, edge_ids = binding
        mapping = {}
        for elem, node_id in zip(query.nodes, node_ids):
            mapping[elem.var] = ("node", node_id)
        for elem, edge_id in zip(query.edges, edge_ids):
            if elem.var:
                mapping[elem.var] = ("edge", edge_id)
        return mapping

    def joins_ok(binding) -> bool:
        node_ids, edge_ids = binding
        seen = {}
        for elem, node_id in zip(query.nodes, node_ids):
            if elem.var in seen and seen[elem.var] != ("node", node_id):
                return False
            seen[elem.var] = ("node", node_id)
        for elem, edge_id in zip(query.edges, edge_ids):
            if elem.var:
                if elem.var in seen and seen[elem.var] != ("edge", edge_id):
                    return False
                seen[elem.var] = ("edge", edge_id)
        return True

    rows = []
    for binding in bindings:
        if not joins_ok(binding):
            continue
        mapping = var_map(binding)
        keep = True
        for cond in query.where:
            kind, ident = mapping[cond.var]
            if not _cond_ok(_props(graph, kind, ident).get(cond.key), cond.op, cond.literal):
                keep = False
                break
        if not keep:
            continue
        row = []
        for item in query.returns:
            kind, ident = mapping[item.var]
            if item.key is None:
                row.append(ident)
            else:
                row.append(_props(graph, kind, ident).get(item.key))
        rows.append(tuple(row))
        if query.limit is not None and len(rows) == query.limit:
            break
    columns = [i.var if i.key is None else f"{i.var}.{i.key}" for i in query.returns]
    return columns, rows


def _dedupe(items):
    out = []
    for item in items:
        if not out or out[-1] != item:
            out.append(item)
    return out


def naive_binary_metrics(truth: dict, predictions: dict) -> dict:
    """Task-A metrics by direct counting. truth maps sid->"0"/"1"."""
    tp = fp = tn = fn = 0
    for sid, label in truth.items():
        guess = predictions.get(sid)
        if label == "1":
            if guess == "1":
                tp += 1
            else:
                fn += 1  # wrong or missing positive
        else:
            if guess == "0":
                tn += 1
            else:
                fp += 1  # wrong or missing negative
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    total = tp + fp + tn + fn
    return {
        "tp": tp,
        "fp": fp,
        "tn": tn,
        "fn": fn,
        "precision": precision,
        "recall": recall,
        "f1": f1,
        "accuracy": (tp + tn) / total if total else 0.0,
    }


def naive_macro_metrics(truth: dict, predictions: dict) -> dict:
    """Task-B macro recall and accuracy by direct counting."""
    classes = {}
    correct = 0
    for sid, label in truth.items():
        hits, total = classes.get(label, (0, 0))
        guess = predictions.get(sid)
        if guess == label:
            hits += 1
            correct += 1
        classes[label] = (hits, total + 1)
    recalls = [hits / total for hits, total in classes.values()]
    return {
        "macro_recall": sum(recalls) / len(recalls) if recalls else 0.0,
        "accuracy": correct / len(truth) if truth else 0.0,
    }
