"""Seeded synthesis of cohort graphs, plus ingestion of tabular cohorts.

The generator builds a graph with the canonical shape: one biological
sample per subject, one sample linked to the "control" disease and the
rest to a random diagnosis, and per-sample gene/protein/phenotype links
whose counts are Poisson around configurable means. All randomness goes
through SeededSampler, so a (config, vocab, seed) triple maps to one
byte-exact graph.

Draw order is part of the reproducibility contract: disease vocabulary
first (when synthesized), then the control-sample choice, then one
diagnosis per remaining sample, then per sample in id order its gene
links and scores, protein links and scores, and phenotype links.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Optional

from .graph import EdgeType, NodeLabel, PropertyGraph

DEFAULT_DISEASE_TOTAL = 10_792  # includes the control node


class SynthError(Exception):
    pass


class InvalidConfig(SynthError):
    def __init__(self, problems: list):
        self.problems = problems
        super().__init__("; ".join(problems))


class EmptyVocab(SynthError):
    def __init__(self) -> None:
        super().__init__("disease vocabulary must not be empty")


class DanglingReference(SynthError):
    def __init__(self, table: str, subject_id: str):
        self.table = table
        self.subject_id = subject_id
        super().__init__(f"{table} row references unknown subject {subject_id!r}")


class SeededSampler:
    """Deterministic draws built on the Mersenne Twister random() stream.

    Only random.Random.random() is used as a primitive because it is the
    one generator output the standard library promises to keep stable
    across versions; everything else is derived here so exports stay
    byte-identical across platforms and Python releases.
    """

    def __init__(self, seed: int):
        self._rng = random.Random(seed)

    def uniform(self, low: float, high: float) -> float:
        return low + (high - low) * self._rng.random()

    def below(self, n: int) -> int:
        """Integer in [0, n)."""
        if n <= 0:
            raise ValueError("n must be positive")
        return min(int(self._rng.random() * n), n - 1)

    def poisson(self, mean: float) -> int:
        # Knuth multiplication method; fine for the small means used here.
        threshold = math.exp(-mean)
        count = 0
        product = self._rng.random()
        while product > threshold:
            count += 1
            product *= self._rng.random()
        return count

    def distinct(self, n: int, k: int) -> list[int]:
        """k distinct integers from [0, n), in draw order (partial Fisher-Yates)."""
        if k > n:
            raise ValueError("cannot draw more values than the range holds")
        swapped: dict[int, int] = {}
        out = []
        for i in range(k):
            j = i + self.below(n - i)
            out.append(swapped.get(j, j))
            swapped[j] = swapped.get(i, i)
        return out


@dataclass
class GeneratorConfig:
    seed: int = 0
    n_subjects: int = 100
    n_control_samples: int = 1
    # Total disease nodes (control included) when no vocabulary is supplied.
    disease_vocab_size: int = DEFAULT_DISEASE_TOTAL
    n_genes: int = 5_000
    n_proteins: int = 5_000
    n_phenotypes: int = 1_000
    mean_genes_per_sample: float = 5.0
    mean_proteins_per_sample: float = 50.0
    mean_phenotypes_per_sample: float = 3.0
    score_min: float = 1.0
    score_max: float = 20.0

    def validate(self) -> None:
        problems = []
        for name in ("n_subjects", "disease_vocab_size", "n_genes", "n_proteins", "n_phenotypes"):
            if getattr(self, name) < 1:
                problems.append(f"{name} must be positive")
        for name in ("mean_genes_per_sample", "mean_proteins_per_sample", "mean_phenotypes_per_sample"):
            if getattr(self, name) <= 0:
                problems.append(f"{name} must be positive")
        if self.n_control_samples < 0:
            problems.append("n_control_samples must be >= 0")
        elif self.n_control_samples > self.n_subjects:
            problems.append("n_control_samples cannot exceed n_subjects")
        if self.disease_vocab_size < 2:
            problems.append("disease_vocab_size must be at least 2 (control plus one diagnosis)")
        if not self.score_min < self.score_max:
            problems.append("score_min must be below score_max")
        if problems:
            raise InvalidConfig(problems)


@dataclass(frozen=True)
class DiseaseVocabEntry:
    name: str
    icd10: Optional[str] = None
    icd9: Optional[str] = None

    def synonyms(self) -> list[str]:
        out = []
        if self.icd10:
            out.append(f"ICD10:{self.icd10}")
        if self.icd9:
            out.append(f"ICD9:{self.icd9}")
        return out


_LETTERS = "ABCDEFGHIJKLMNOPQRSTUVWXYZ"


def _synthesize_vocab(sampler: SeededSampler, size: int) -> list[DiseaseVocabEntry]:
    entries = []
    for i in range(size):
        letter = _LETTERS[sampler.below(26)]
        icd10 = f"{letter}{sampler.below(100):02d}"
        icd9 = None
        if sampler.uniform(0.0, 1.0) < 0.3:
            icd9 = f"{100 + sampler.below(900)}"
        entries.append(DiseaseVocabEntry(name=f"disease_{i + 1:05d}", icd10=icd10, icd9=icd9))
    return entries


def generate(
    config: GeneratorConfig, vocab: Optional[list[DiseaseVocabEntry]] = None
) -> PropertyGraph:
    """Build a seeded synthetic cohort graph.

    With no vocabulary, `config.disease_vocab_size - 1` diagnoses are
    synthesized so the total disease count (control included) equals
    `disease_vocab_size`. A supplied vocabulary is used verbatim.
    """
    config.validate()
    if vocab is not None and not vocab:
        raise EmptyVocab()
    sampler = SeededSampler(config.seed)
    if vocab is None:
        vocab = _synthesize_vocab(sampler, config.disease_vocab_size - 1)

    g = PropertyGraph()
    subject_ids = [
        g.add_node(NodeLabel.SUBJECT, {"subject_id": f"S{i + 1:04d}"})
        for i in range(config.n_subjects)
    ]
    sample_ids = [g.add_node(NodeLabel.BIOLOGICAL_SAMPLE) for _ in range(config.n_subjects)]
    for sample, subject in zip(sample_ids, subject_ids):
        g.add_edge(sample, EdgeType.BELONGS_TO_SUBJECT, subject)

    control_id = g.add_node(NodeLabel.DISEASE, {"name": "control"})
    disease_ids = []
    for entry in vocab:
        props: dict = {"name": entry.name}
        synonyms = entry.synonyms()
        if synonyms:
            props["synonyms"] = synonyms
        disease_ids.append(g.add_node(NodeLabel.DISEASE, props))

    gene_ids = [
        g.add_node(NodeLabel.GENE, {"name": f"GENE_{i + 1:05d}"}) for i in range(config.n_genes)
    ]
    protein_ids = [
        g.add_node(NodeLabel.PROTEIN, {"name": f"PROT_{i + 1:05d}"})
        for i in range(config.n_proteins)
    ]
    phenotype_ids = [
        g.add_node(NodeLabel.PHENOTYPE, {"name": f"HP:{i + 1:07d}"})
        for i in range(config.n_phenotypes)
    ]

    control_samples = set(sampler.distinct(config.n_subjects, config.n_control_samples))
    for idx, sample in enumerate(sample_ids):
        if idx in control_samples:
            g.add_edge(sample, EdgeType.HAS_DISEASE, control_id)
        else:
            g.add_edge(sample, EdgeType.HAS_DISEASE, disease_ids[sampler.below(len(disease_ids))])

    def link(sample: int, mean: float, targets: list[int], etype: EdgeType, scored: bool) -> None:
        count = max(1, min(sampler.poisson(mean), len(targets)))
        for target_idx in sampler.distinct(len(targets), count):
            props = {}
            if scored:
                props["score"] = round(sampler.uniform(config.score_min, config.score_max), 2)
            g.add_edge(sample, etype, targets[target_idx], props)

    for sample in sample_ids:
        link(sample, config.mean_genes_per_sample, gene_ids, EdgeType.HAS_DAMAGE, True)
        link(sample, config.mean_proteins_per_sample, protein_ids, EdgeType.HAS_PROTEIN, True)
        link(sample, config.mean_phenotypes_per_sample, phenotype_ids, EdgeType.HAS_PHENOTYPE, False)
    return g


@dataclass
class IngestBundle:
    """Parsed cohort tables: who exists, what they have, what was observed."""

    subjects: list = field(default_factory=list)  # subject_id strings
    diagnoses: list = field(default_factory=list)  # (subject_id, icd10_code, disease_name)
    phenotypes: list = field(default_factory=list)  # (subject_id, hpo_term)


def ingest(
    bundle: IngestBundle, vocab: Optional[list[DiseaseVocabEntry]] = None
) -> PropertyGraph:
    """Build a graph from cohort tables.

    Every subject gets one biological sample; subjects without a
    diagnosis row stay unconnected to any disease, which is how the
    task-A validation subset arises. A "control" disease node always
    exists, and an optional vocabulary pre-populates diseases beyond
    those named in the diagnoses table.
    """
    g = PropertyGraph()
    sample_by_subject: dict[str, int] = {}
    for subject_id in bundle.subjects:
        node = g.add_node(NodeLabel.SUBJECT, {"subject_id": subject_id})
        sample = g.add_node(NodeLabel.BIOLOGICAL_SAMPLE)
        g.add_edge(sample, EdgeType.BELONGS_TO_SUBJECT, node)
        sample_by_subject[subject_id] = sample

    disease_by_name: dict[str, int] = {}
    synonyms_by_name: dict[str, list[str]] = {}
    disease_by_name["control"] = g.add_node(NodeLabel.DISEASE, {"name": "control"})
    if vocab:
        for entry in vocab:
            if entry.name in disease_by_name:
                continue
            props: dict = {"name": entry.name}
            if entry.synonyms():
                props["synonyms"] = entry.synonyms()
            disease_by_name[entry.name] = g.add_node(NodeLabel.DISEASE, props)

    # First pass creates disease nodes in first-appearance order with the
    # union of codes seen for each name; second pass adds edges.
    pending: dict[str, list[str]] = {}
    for subject_id, icd10, name in bundle.diagnoses:
        if subject_id not in sample_by_subject:
            raise DanglingReference("diagnoses", subject_id)
        codes = pending.setdefault(name, [])
        if icd10:
            entry = f"ICD10:{icd10}"
            if entry not in codes:
                codes.append(entry)
    for name, codes in pending.items():
        if name in disease_by_name:
            continue
        props = {"name": name}
        if codes:
            props["synonyms"] = codes
        disease_by_name[name] = g.add_node(NodeLabel.DISEASE, props)

    seen_links: set = set()
    for subject_id, _, name in bundle.diagnoses:
        key = (subject_id, name)
        if key in seen_links:
            continue
        seen_links.add(key)
        g.add_edge(sample_by_subject[subject_id], EdgeType.HAS_DISEASE, disease_by_name[name])

    phenotype_by_term: dict[str, int] = {}
    for subject_id, term in bundle.phenotypes:
        if subject_id not in sample_by_subject:
            raise DanglingReference("phenotypes", subject_id)
        if term not in phenotype_by_term:
            phenotype_by_term[term] = g.add_node(NodeLabel.PHENOTYPE, {"name": term})
    seen_pheno: set = set()
    for subject_id, term in bundle.phenotypes:
        key = (subject_id, term)
        if key in seen_pheno:
            continue
        seen_pheno.add(key)
        g.add_edge(sample_by_subject[subject_id], EdgeType.HAS_PHENOTYPE, phenotype_by_term[term])
    return g
