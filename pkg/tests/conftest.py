from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ckgate import synth
from ckgate.graph import EdgeType, NodeLabel, PropertyGraph


@pytest.fixture(scope="session")
def default_graph():
    """The seed-42 default cohort; shared read-only."""
    return synth.generate(synth.GeneratorConfig(seed=42)).freeze()


def small_config(seed: int) -> synth.GeneratorConfig:
    """Desk-scale config for fuzz loops where generation cost dominates."""
    return synth.GeneratorConfig(
        seed=seed,
        n_subjects=8,
        n_control_samples=2,
        disease_vocab_size=12,
        n_genes=25,
        n_proteins=25,
        n_phenotypes=10,
        mean_genes_per_sample=3.0,
        mean_proteins_per_sample=5.0,
        mean_phenotypes_per_sample=2.0,
    )


@pytest.fixture
def clinic_graph():
    """Hand-built five-subject graph with known ground truth.

    S001 control; S002/S003 diseased (asthma J45.0 / tb A15 + B20);
    S004 unconnected; S005 diseased with a code-less disease.
    """
    g = PropertyGraph()
    samples = {}
    for i in range(1, 6):
        sid = f"S{i:03d}"
        subject = g.add_node(NodeLabel.SUBJECT, {"subject_id": sid})
        sample = g.add_node(NodeLabel.BIOLOGICAL_SAMPLE)
        g.add_edge(sample, EdgeType.BELONGS_TO_SUBJECT, subject)
        samples[sid] = sample
    control = g.add_node(NodeLabel.DISEASE, {"name": "control"})
    asthma = g.add_node(NodeLabel.DISEASE, {"name": "asthma", "synonyms": ["ICD10:J45.0"]})
    tb = g.add_node(
        NodeLabel.DISEASE, {"name": "tuberculosis", "synonyms": ["ICD10:B20", "ICD10:A15"]}
    )
    mystery = g.add_node(NodeLabel.DISEASE, {"name": "mystery"})
    g.add_edge(samples["S001"], EdgeType.HAS_DISEASE, control)
    g.add_edge(samples["S002"], EdgeType.HAS_DISEASE, asthma)
    g.add_edge(samples["S003"], EdgeType.HAS_DISEASE, tb)
    g.add_edge(samples["S005"], EdgeType.HAS_DISEASE, mystery)
    gene = g.add_node(NodeLabel.GENE, {"name": "GENE_A"})
    g.add_edge(samples["S002"], EdgeType.HAS_DAMAGE, gene, {"score": 12.5})
    return g


@pytest.fixture(scope="session")
def session_audit_dir(tmp_path_factory):
    """One directory collecting every audit log the suite writes, so the
    acceptance replay can sweep all of them."""
    return tmp_path_factory.mktemp("audit-logs")
