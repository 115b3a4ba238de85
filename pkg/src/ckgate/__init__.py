"""ckgate: a gateway serving a private clinical knowledge graph to
sandboxed model apps, releasing only aggregated metrics."""

__version__ = "0.1.0"

from .graph import EdgeType, NodeLabel, PropertyGraph  # noqa: F401
