#!/usr/bin/env python3
"""Write the graph fixtures the SDK test suite serves:

* kg42.jsonl      - the seed-42 default cohort
* planted.jsonl   - a cohort where one gene perfectly separates the
                    diseased from the control samples, so a working
                    learned classifier must reach task A f1 = 1.0
* tiny.jsonl      - a one-subject graph for the degenerate-fit path
"""

import sys
from pathlib import Path

from ckgate.graph import EdgeType, NodeLabel, PropertyGraph
from ckgate.storage import export_jsonl
from ckgate.synth import GeneratorConfig, SeededSampler, generate


def planted_signal_graph() -> PropertyGraph:
    sampler = SeededSampler(20240901)
    g = PropertyGraph()
    control = g.add_node(NodeLabel.DISEASE, {"name": "control"})
    disease = g.add_node(NodeLabel.DISEASE, {"name": "planted", "synonyms": ["ICD10:J45"]})
    signal_gene = g.add_node(NodeLabel.GENE, {"name": "GENE_SIGNAL"})
    decoys = [g.add_node(NodeLabel.GENE, {"name": f"GENE_D{i:02d}"}) for i in range(10)]
    proteins = [g.add_node(NodeLabel.PROTEIN, {"name": f"PROT_{i:02d}"}) for i in range(10)]
    for i in range(40):
        subject = g.add_node(NodeLabel.SUBJECT, {"subject_id": f"S{i + 1:04d}"})
        sample = g.add_node(NodeLabel.BIOLOGICAL_SAMPLE)
        g.add_edge(sample, EdgeType.BELONGS_TO_SUBJECT, subject)
        diseased = i % 2 == 0
        g.add_edge(sample, EdgeType.HAS_DISEASE, disease if diseased else control)
        if diseased:
            g.add_edge(sample, EdgeType.HAS_DAMAGE, signal_gene,
                       {"score": round(sampler.uniform(10.0, 20.0), 2)})
        for idx in sampler.distinct(len(decoys), 2):
            g.add_edge(sample, EdgeType.HAS_DAMAGE, decoys[idx],
                       {"score": round(sampler.uniform(1.0, 20.0), 2)})
        for idx in sampler.distinct(len(proteins), 3):
            g.add_edge(sample, EdgeType.HAS_PROTEIN, proteins[idx],
                       {"score": round(sampler.uniform(1.0, 20.0), 2)})
    return g


def tiny_graph() -> PropertyGraph:
    g = PropertyGraph()
    control = g.add_node(NodeLabel.DISEASE, {"name": "control"})
    subject = g.add_node(NodeLabel.SUBJECT, {"subject_id": "S0001"})
    sample = g.add_node(NodeLabel.BIOLOGICAL_SAMPLE)
    g.add_edge(sample, EdgeType.BELONGS_TO_SUBJECT, subject)
    g.add_edge(sample, EdgeType.HAS_DISEASE, control)
    return g


def main() -> int:
    out_dir = Path(sys.argv[1])
    out_dir.mkdir(parents=True, exist_ok=True)
    export_jsonl(generate(GeneratorConfig(seed=42)), out_dir / "kg42.jsonl")
    export_jsonl(planted_signal_graph(), out_dir / "planted.jsonl")
    export_jsonl(tiny_graph(), out_dir / "tiny.jsonl")
    print(f"fixtures written to {out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
