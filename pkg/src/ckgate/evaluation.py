"""Ground-truth extraction and scoring of submitted prediction tables.

Task A is binary: healthy (0, sample linked to the "control" disease)
versus diseased (1, sample linked to any other disease); samples with no
diagnosis link are the held-out validation subset and are excluded from
scoring. Task B predicts the leading letter of the subject's ICD-10
category; control-linked samples and samples whose diseases carry no
ICD-10 synonym are excluded.

Subjects present in the truth but absent from a submission are scored
maximally against the submitter (a missing positive is a false negative,
a missing negative a false positive), so omitting hard subjects cannot
raise a score. Predictions for excluded or unknown subjects are ignored
but tallied.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Optional

from .graph import EdgeType, NodeLabel, PropertyGraph

TASKS = ("A", "B")

ICD10_PREFIX = "ICD10:"


class EvaluationError(Exception):
    pass


class MissingHeader(EvaluationError):
    def __init__(self) -> None:
        super().__init__("prediction CSV must start with header 'subject_id,prediction'")


class BadLabel(EvaluationError):
    def __init__(self, line: int, reason: str):
        self.line = line
        super().__init__(f"line {line}: {reason}")


class DuplicateSubject(EvaluationError):
    def __init__(self, line: int, subject_id: str):
        self.line = line
        self.subject_id = subject_id
        super().__init__(f"line {line}: duplicate subject {subject_id!r}")


class TaskMismatch(EvaluationError):
    def __init__(self, expected: str, got: str):
        super().__init__(f"expected task {expected}, got {got}")


class NoControlNode(EvaluationError):
    def __init__(self) -> None:
        super().__init__("graph has no Disease node named 'control'")


class AmbiguousLabel(EvaluationError):
    def __init__(self, subject_id: str):
        self.subject_id = subject_id
        super().__init__(f"subject {subject_id!r} is linked to both control and a disease")


class EmptyTruth(EvaluationError):
    def __init__(self, task: str):
        super().__init__(f"task {task} ground truth has no scored subjects")


@dataclass
class PredictionTable:
    task: str
    rows: list  # (subject_id, prediction) pairs
    source_row_count: int = 0

    def by_subject(self) -> dict:
        return dict(self.rows)


@dataclass
class GroundTruth:
    task: str
    labels: dict  # subject_id -> label string
    excluded: set = field(default_factory=set)


@dataclass
class ConfusionCounts:
    task: str
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0
    per_class: dict = field(default_factory=dict)  # letter -> [tp, fn]
    n_scored: int = 0
    n_missing: int = 0
    n_ignored: int = 0


@dataclass
class MetricsReport:
    task: str
    accuracy: float
    recall: float
    precision: Optional[float] = None
    f1: Optional[float] = None
    n_scored: int = 0
    n_missing: int = 0

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "n_scored": self.n_scored,
            "n_missing": self.n_missing,
        }


def parse_predictions(text: str, task: str) -> PredictionTable:
    """Parse and validate a submitted prediction CSV."""
    if task not in TASKS:
        raise TaskMismatch("A or B", task)
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header != ["subject_id", "prediction"]:
        raise MissingHeader()
    rows = []
    seen: set = set()
    for line, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 2:
            raise BadLabel(line, f"expected 2 fields, found {len(row)}")
        subject_id, prediction = row
        if not subject_id:
            raise BadLabel(line, "empty subject_id")
        if subject_id in seen:
            raise DuplicateSubject(line, subject_id)
        seen.add(subject_id)
        if task == "A":
            if prediction not in ("0", "1"):
                raise BadLabel(line, f"task A prediction must be 0 or 1, found {prediction!r}")
        else:
            if len(prediction) != 1 or not prediction.isalpha() or not prediction.isascii():
                raise BadLabel(line, f"task B prediction must be a single letter, found {prediction!r}")
            prediction = prediction.upper()
        rows.append((subject_id, prediction))
    return PredictionTable(task=task, rows=rows, source_row_count=len(rows))


def _sample_facts(graph: PropertyGraph):
    """Yield (subject_id, control_linked, disease_node_ids) per sample."""
    control_ids = {
        node_id
        for node_id in graph.nodes_by_label(NodeLabel.DISEASE)
        if graph.node(node_id).properties.get("name") == "control"
    }
    if not control_ids:
        raise NoControlNode()
    for sample in graph.nodes_by_label(NodeLabel.BIOLOGICAL_SAMPLE):
        owners = graph.neighbors(sample, EdgeType.BELONGS_TO_SUBJECT, "out")
        if not owners:
            continue
        subject_id = graph.node(owners[0][1]).properties["subject_id"]
        diseases = [n for _, n in graph.neighbors(sample, EdgeType.HAS_DISEASE, "out")]
        yield subject_id, any(d in control_ids for d in diseases), [
            d for d in diseases if d not in control_ids
        ]


def ground_truth_task_a(graph: PropertyGraph) -> GroundTruth:
    """Label 0 for control-linked subjects, 1 for diseased, excluding the
    unconnected validation samples."""
    labels: dict = {}
    excluded: set = set()
    for subject_id, has_control, diseased in _sample_facts(graph):
        if has_control and diseased:
            raise AmbiguousLabel(subject_id)
        if not has_control and not diseased:
            if subject_id not in labels:
                excluded.add(subject_id)
            continue
        label = "0" if has_control else "1"
        previous = labels.get(subject_id)
        if previous is not None and previous != label:
            raise AmbiguousLabel(subject_id)
        labels[subject_id] = label
        excluded.discard(subject_id)
    return GroundTruth(task="A", labels=labels, excluded=excluded)


def ground_truth_task_b(graph: PropertyGraph) -> GroundTruth:
    """Leading ICD-10 letter per diseased subject.

    The label is the first character of the lexicographically smallest
    ICD-10 synonym across the subject's linked diseases, uppercased.
    Control-linked subjects, unconnected subjects, and subjects whose
    diseases all lack an ICD-10 code are excluded.
    """
    codes_by_subject: dict = {}
    control_subjects: set = set()
    seen: set = set()
    for subject_id, has_control, diseased in _sample_facts(graph):
        seen.add(subject_id)
        if has_control:
            control_subjects.add(subject_id)
            continue
        bucket = codes_by_subject.setdefault(subject_id, [])
        for disease in diseased:
            synonyms = graph.node(disease).properties.get("synonyms", [])
            for synonym in synonyms:
                if not synonym.startswith(ICD10_PREFIX):
                    continue
                code = synonym[len(ICD10_PREFIX) :]
                if code and code[0].isalpha() and code[0].isascii():
                    bucket.append(synonym)
    labels: dict = {}
    excluded: set = set(control_subjects)
    for subject_id in seen:
        if subject_id in control_subjects:
            continue
        codes = codes_by_subject.get(subject_id, [])
        if codes:
            smallest = min(codes)
            labels[subject_id] = smallest[len(ICD10_PREFIX)].upper()
        else:
            excluded.add(subject_id)
    return GroundTruth(task="B", labels=labels, excluded=excluded)


def confusion(pred: PredictionTable, truth: GroundTruth) -> ConfusionCounts:
    """Count prediction outcomes against the truth.

    Missing subjects score as the wrong outcome for their class: a
    missing true positive becomes a false negative, a missing true
    negative a false positive. For task B a missing subject is a false
    negative of its class.
    """
    if pred.task != truth.task:
        raise TaskMismatch(truth.task, pred.task)
    counts = ConfusionCounts(task=truth.task, n_scored=len(truth.labels))
    predicted = pred.by_subject()
    for subject_id in predicted:
        if subject_id not in truth.labels:
            counts.n_ignored += 1
    if truth.task == "A":
        for subject_id, label in truth.labels.items():
            guess = predicted.get(subject_id)
            if guess is None:
                counts.n_missing += 1
                if label == "1":
                    counts.fn += 1
                else:
                    counts.fp += 1
            elif label == "1":
                if guess == "1":
                    counts.tp += 1
                else:
                    counts.fn += 1
            else:
                if guess == "0":
                    counts.tn += 1
                else:
                    counts.fp += 1
        return counts
    for subject_id, label in truth.labels.items():
        cell = counts.per_class.setdefault(label, [0, 0])
        guess = predicted.get(subject_id)
        if guess is None:
            counts.n_missing += 1
            cell[1] += 1
        elif guess == label:
            cell[0] += 1
        else:
            cell[1] += 1
    return counts


def precision(counts: ConfusionCounts) -> float:
    denominator = counts.tp + counts.fp
    return counts.tp / denominator if denominator else 0.0


def recall_binary(counts: ConfusionCounts) -> float:
    denominator = counts.tp + counts.fn
    return counts.tp / denominator if denominator else 0.0


def f1_binary(counts: ConfusionCounts) -> float:
    p = precision(counts)
    r = recall_binary(counts)
    return 2 * p * r / (p + r) if p + r else 0.0


def accuracy(counts: ConfusionCounts) -> float:
    if counts.task == "A":
        total = counts.tp + counts.fp + counts.tn + counts.fn
        return (counts.tp + counts.tn) / total if total else 0.0
    correct = sum(tp for tp, _ in counts.per_class.values())
    return correct / counts.n_scored if counts.n_scored else 0.0


def macro_recall(pred: PredictionTable, truth: GroundTruth) -> float:
    """Unweighted mean recall over the classes present in the truth."""
    if not truth.labels:
        raise EmptyTruth(truth.task)
    counts = confusion(pred, truth)
    recalls = [tp / (tp + fn) for tp, fn in counts.per_class.values() if tp + fn]
    return sum(recalls) / len(recalls)


def compute_metrics(pred: PredictionTable, truth: GroundTruth) -> MetricsReport:
    """Score one task end to end; the only numbers allowed to leave."""
    counts = confusion(pred, truth)
    if truth.task == "A":
        return MetricsReport(
            task="A",
            accuracy=accuracy(counts),
            precision=precision(counts),
            recall=recall_binary(counts),
            f1=f1_binary(counts),
            n_scored=counts.n_scored,
            n_missing=counts.n_missing,
        )
    return MetricsReport(
        task="B",
        accuracy=accuracy(counts),
        recall=macro_recall(pred, truth) if truth.labels else 0.0,
        n_scored=counts.n_scored,
        n_missing=counts.n_missing,
    )


def score_total(
    report_a: Optional[MetricsReport] = None, report_b: Optional[MetricsReport] = None
) -> float:
    """Challenge total: task A f1 plus task B recall, each 0 when absent."""
    if report_a is None and report_b is None:
        raise ValueError("at least one task report is required")
    total = 0.0
    if report_a is not None and report_a.f1 is not None:
        total += report_a.f1
    if report_b is not None:
        total += report_b.recall
    return total
