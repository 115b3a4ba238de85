"""In-memory clinical property graph with a fixed schema.

The graph links patients (Subject) to the biological samples drawn from
them, and each sample to its diagnoses, damaged genes, quantified
proteins, and observed phenotypes. The label and edge-type sets are
closed; every edge must match one of the schema rules in SCHEMA_RULES.

Graphs are built once (generation or loading) and then frozen; all read
paths are safe for concurrent use on a frozen graph.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Optional, Union

PropertyValue = Union[str, int, float, list]


class NodeLabel(Enum):
    SUBJECT = "Subject"
    BIOLOGICAL_SAMPLE = "Biological_Sample"
    DISEASE = "Disease"
    PHENOTYPE = "Phenotype"
    GENE = "Gene"
    PROTEIN = "Protein"


class EdgeType(Enum):
    BELONGS_TO_SUBJECT = "BELONGS_TO_SUBJECT"
    HAS_DISEASE = "HAS_DISEASE"
    HAS_DAMAGE = "HAS_DAMAGE"
    HAS_PROTEIN = "HAS_PROTEIN"
    HAS_PHENOTYPE = "HAS_PHENOTYPE"


LABELS_BY_NAME = {label.value: label for label in NodeLabel}
EDGE_TYPES_BY_NAME = {etype.value: etype for etype in EdgeType}

# (src label, edge type, dst label) triples allowed in any graph. All
# relationships originate at the biological sample so traversal from a
# sample is uniform.
SCHEMA_RULES = frozenset(
    {
        (NodeLabel.BIOLOGICAL_SAMPLE, EdgeType.BELONGS_TO_SUBJECT, NodeLabel.SUBJECT),
        (NodeLabel.BIOLOGICAL_SAMPLE, EdgeType.HAS_DISEASE, NodeLabel.DISEASE),
        (NodeLabel.BIOLOGICAL_SAMPLE, EdgeType.HAS_DAMAGE, NodeLabel.GENE),
        (NodeLabel.BIOLOGICAL_SAMPLE, EdgeType.HAS_PROTEIN, NodeLabel.PROTEIN),
        (NodeLabel.BIOLOGICAL_SAMPLE, EdgeType.HAS_PHENOTYPE, NodeLabel.PHENOTYPE),
    }
)

# Edge types whose edges must carry a `score` property.
SCORED_EDGE_TYPES = frozenset({EdgeType.HAS_DAMAGE, EdgeType.HAS_PROTEIN})
SCORE_MIN = 1.0
SCORE_MAX = 20.0

# Properties that must be present (and be text) at insertion time.
REQUIRED_PROPERTIES = {
    NodeLabel.SUBJECT: ("subject_id",),
    NodeLabel.DISEASE: ("name",),
}


class GraphError(Exception):
    """Base class for schema and mutation failures."""


class MissingRequiredProperty(GraphError):
    def __init__(self, label: NodeLabel, key: str):
        self.label = label
        self.key = key
        super().__init__(f"{label.value} node requires property {key!r}")


class DuplicateSubjectId(GraphError):
    def __init__(self, subject_id: str):
        self.subject_id = subject_id
        super().__init__(f"subject_id {subject_id!r} already present")


class InvalidPropertyValue(GraphError):
    def __init__(self, key: str, reason: str):
        self.key = key
        super().__init__(f"property {key!r}: {reason}")


class UnknownEndpoint(GraphError):
    def __init__(self, node_id: int):
        self.node_id = node_id
        super().__init__(f"no node with id {node_id}")


class UnknownNode(GraphError):
    def __init__(self, node_id: int):
        self.node_id = node_id
        super().__init__(f"no node with id {node_id}")


class SchemaViolation(GraphError):
    def __init__(self, src_label: NodeLabel, etype: EdgeType, dst_label: NodeLabel):
        self.triple = (src_label, etype, dst_label)
        super().__init__(
            f"({src_label.value})-[:{etype.value}]->({dst_label.value}) "
            "is not a legal schema triple"
        )


class MissingScore(GraphError):
    def __init__(self, etype: EdgeType):
        self.edge_type = etype
        super().__init__(f"{etype.value} edges require a score property")


class ScoreOutOfRange(GraphError):
    def __init__(self, score: float):
        self.score = score
        super().__init__(f"score {score} outside [{SCORE_MIN}, {SCORE_MAX}]")


class DuplicateEdge(GraphError):
    def __init__(self, src: int, etype: EdgeType, dst: int):
        self.triple = (src, etype, dst)
        super().__init__(f"edge ({src})-[:{etype.value}]->({dst}) already present")


class FrozenGraph(GraphError):
    def __init__(self) -> None:
        super().__init__("graph is frozen; mutation is only allowed during build")


@dataclass(frozen=True)
class Node:
    id: int
    label: NodeLabel
    properties: dict


@dataclass(frozen=True)
class Edge:
    id: int
    src: int
    dst: int
    type: EdgeType
    properties: dict


@dataclass
class GraphStats:
    """Aggregate shape of a graph: counts and mean out-degrees.

    Mean out-degree is reported per schema rule, i.e. per
    (source label, edge type) pair, averaged over all nodes of that label.
    """

    nodes_by_label: dict = field(default_factory=dict)
    edges_by_type: dict = field(default_factory=dict)
    mean_out_degree: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "nodes_by_label": {l.value: n for l, n in sorted(self.nodes_by_label.items(), key=lambda kv: kv[0].value)},
            "edges_by_type": {t.value: n for t, n in sorted(self.edges_by_type.items(), key=lambda kv: kv[0].value)},
            "mean_out_degree": {
                f"{l.value}:{t.value}": d
                for (l, t), d in sorted(self.mean_out_degree.items(), key=lambda kv: (kv[0][0].value, kv[0][1].value))
            },
        }


def _validate_property_value(key: str, value: PropertyValue) -> None:
    if not isinstance(key, str) or not key:
        raise InvalidPropertyValue(str(key), "property keys must be non-empty text")
    if isinstance(value, bool):
        raise InvalidPropertyValue(key, "booleans are not a supported value type")
    if isinstance(value, (str, int, float)):
        return
    if isinstance(value, list):
        for entry in value:
            if not isinstance(entry, str) or not entry:
                raise InvalidPropertyValue(key, "list values must hold non-empty strings")
        return
    raise InvalidPropertyValue(key, f"unsupported value type {type(value).__name__}")


class PropertyGraph:
    """Typed property graph with label and adjacency indices.

    Node and edge ids are monotonically increasing integers assigned at
    insertion, so two identical mutation sequences produce identical
    graphs. Duplicate (src, type, dst) edges are rejected.
    """

    def __init__(self) -> None:
        self._nodes: dict[int, Node] = {}
        self._edges: dict[int, Edge] = {}
        self._by_label: dict[NodeLabel, list[int]] = {label: [] for label in NodeLabel}
        # node id -> (edge type, direction) -> [(neighbor id, edge id)] kept
        # sorted so traversal order is deterministic.
        self._adjacency: dict[int, dict[tuple[EdgeType, str], list[tuple[int, int]]]] = {}
        self._subject_ids: set[str] = set()
        self._edge_triples: set[tuple[int, EdgeType, int]] = set()
        self._next_node_id = 0
        self._next_edge_id = 0
        self._frozen = False

    # -- mutation ---------------------------------------------------------

    def add_node(self, label: NodeLabel, properties: Optional[dict] = None) -> int:
        node_id = self._insert_node(self._next_node_id, label, properties or {})
        self._next_node_id = node_id + 1
        return node_id

    def add_edge(
        self,
        src: int,
        etype: EdgeType,
        dst: int,
        properties: Optional[dict] = None,
    ) -> int:
        edge_id = self._insert_edge(self._next_edge_id, src, etype, dst, properties or {})
        self._next_edge_id = edge_id + 1
        return edge_id

    def restore_node(self, node_id: int, label: NodeLabel, properties: dict) -> int:
        """Insert a node with an explicit id (loading path).

        Ids must arrive in strictly increasing order so the label index
        stays sorted without re-sorting.
        """
        if node_id < self._next_node_id:
            raise GraphError(f"node ids must be strictly increasing (got {node_id})")
        inserted = self._insert_node(node_id, label, properties)
        self._next_node_id = inserted + 1
        return inserted

    def restore_edge(
        self, edge_id: int, src: int, etype: EdgeType, dst: int, properties: dict
    ) -> int:
        if edge_id < self._next_edge_id:
            raise GraphError(f"edge ids must be strictly increasing (got {edge_id})")
        inserted = self._insert_edge(edge_id, src, etype, dst, properties)
        self._next_edge_id = inserted + 1
        return inserted

    def freeze(self) -> "PropertyGraph":
        """Mark the build phase finished; further mutation raises."""
        self._frozen = True
        return self

    @property
    def frozen(self) -> bool:
        return self._frozen

    def _insert_node(self, node_id: int, label: NodeLabel, properties: dict) -> int:
        if self._frozen:
            raise FrozenGraph()
        if not isinstance(label, NodeLabel):
            raise GraphError(f"unknown node label {label!r}")
        for key, value in properties.items():
            _validate_property_value(key, value)
        for key in REQUIRED_PROPERTIES.get(label, ()):
            if not isinstance(properties.get(key), str) or not properties[key]:
                raise MissingRequiredProperty(label, key)
        if label is NodeLabel.SUBJECT:
            subject_id = properties["subject_id"]
            if subject_id in self._subject_ids:
                raise DuplicateSubjectId(subject_id)
            self._subject_ids.add(subject_id)
        node = Node(id=node_id, label=label, properties=dict(properties))
        self._nodes[node_id] = node
        self._by_label[label].append(node_id)
        return node_id

    def _insert_edge(
        self, edge_id: int, src: int, etype: EdgeType, dst: int, properties: dict
    ) -> int:
        if self._frozen:
            raise FrozenGraph()
        if not isinstance(etype, EdgeType):
            raise GraphError(f"unknown edge type {etype!r}")
        if src not in self._nodes:
            raise UnknownEndpoint(src)
        if dst not in self._nodes:
            raise UnknownEndpoint(dst)
        src_label = self._nodes[src].label
        dst_label = self._nodes[dst].label
        if (src_label, etype, dst_label) not in SCHEMA_RULES:
            raise SchemaViolation(src_label, etype, dst_label)
        if (src, etype, dst) in self._edge_triples:
            raise DuplicateEdge(src, etype, dst)
        for key, value in properties.items():
            _validate_property_value(key, value)
        if etype in SCORED_EDGE_TYPES:
            score = properties.get("score")
            if score is None:
                raise MissingScore(etype)
            if isinstance(score, bool) or not isinstance(score, (int, float)):
                raise MissingScore(etype)
            if not (SCORE_MIN <= float(score) <= SCORE_MAX):
                raise ScoreOutOfRange(float(score))
        edge = Edge(id=edge_id, src=src, dst=dst, type=etype, properties=dict(properties))
        self._edges[edge_id] = edge
        self._edge_triples.add((src, etype, dst))
        bisect.insort(self._adj_list(src, etype, "out"), (dst, edge_id))
        bisect.insort(self._adj_list(dst, etype, "in"), (src, edge_id))
        return edge_id

    def _adj_list(self, node_id: int, etype: EdgeType, direction: str) -> list[tuple[int, int]]:
        return self._adjacency.setdefault(node_id, {}).setdefault((etype, direction), [])

    # -- reads ------------------------------------------------------------

    def node(self, node_id: int) -> Node:
        try:
            return self._nodes[node_id]
        except KeyError:
            raise UnknownNode(node_id) from None

    def edge(self, edge_id: int) -> Edge:
        return self._edges[edge_id]

    def has_node(self, node_id: int) -> bool:
        return node_id in self._nodes

    def nodes(self) -> Iterator[Node]:
        """All nodes in ascending id order."""
        return iter(self._nodes.values())

    def edges(self) -> Iterator[Edge]:
        """All edges in ascending id order."""
        return iter(self._edges.values())

    @property
    def node_count(self) -> int:
        return len(self._nodes)

    @property
    def edge_count(self) -> int:
        return len(self._edges)

    def nodes_by_label(self, label: NodeLabel) -> list[int]:
        """Node ids carrying `label`, ascending."""
        return list(self._by_label[label])

    def neighbors(
        self, node_id: int, etype: Optional[EdgeType], direction: str
    ) -> list[tuple[int, int]]:
        """Adjacency rows for a node as (edge id, neighbor id) pairs.

        `direction` is "out" (edges leaving the node) or "in". With
        etype=None all edge types are merged. Rows are sorted by
        (neighbor id, edge id).
        """
        if node_id not in self._nodes:
            raise UnknownNode(node_id)
        if direction not in ("out", "in"):
            raise ValueError(f"direction must be 'out' or 'in', got {direction!r}")
        per_node = self._adjacency.get(node_id, {})
        if etype is not None:
            rows = per_node.get((etype, direction), [])
        else:
            rows = sorted(
                pair
                for t in EdgeType
                for pair in per_node.get((t, direction), [])
            )
        return [(edge_id, neighbor) for neighbor, edge_id in rows]

    def graph_stats(self) -> GraphStats:
        stats = GraphStats()
        for label in NodeLabel:
            stats.nodes_by_label[label] = len(self._by_label[label])
        out_counts = {rule: 0 for rule in SCHEMA_RULES}
        for etype in EdgeType:
            stats.edges_by_type[etype] = 0
        for e in self._edges.values():
            stats.edges_by_type[e.type] += 1
            out_counts[(self._nodes[e.src].label, e.type, self._nodes[e.dst].label)] += 1
        for (src_label, etype, _), count in out_counts.items():
            n = stats.nodes_by_label[src_label]
            stats.mean_out_degree[(src_label, etype)] = count / n if n else 0.0
        return stats

    def identifier_strings(self) -> set[str]:
        """Every string whose appearance outside the boundary is a leak.

        Covers subject_id values, disease names, and node ids in their
        "n<id>" rendering.
        """
        idents = set(self._subject_ids)
        for node_id in self._by_label[NodeLabel.DISEASE]:
            idents.add(self._nodes[node_id].properties["name"])
        idents.update(f"n{node_id}" for node_id in self._nodes)
        return idents
