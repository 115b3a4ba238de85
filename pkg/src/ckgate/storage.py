"""Graph serialization and tabular ingestion readers.

Two formats exist side by side:

* JSONL is the lossless interchange format. One object per line, nodes
  before edges, ids ascending, UTF-8 with LF endings. Node lines are
  {"kind":"node","id":i,"label":l,"props":{...}} and edge lines
  {"kind":"edge","id":i,"src":s,"dst":d,"type":t,"props":{...}}.
  Property keys are sorted, so identical graphs export byte-identically.

* CSV is the bulk-load convenience format: one node file per label
  ("id,<prop>,..." with list values joined by "|") and one edge file per
  edge type ("src,dst" plus "score" for scored types). CSV loading types
  everything as text except "synonyms" (list) and "score" (decimal).
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Optional, Union

from .graph import (
    EDGE_TYPES_BY_NAME,
    LABELS_BY_NAME,
    REQUIRED_PROPERTIES,
    SCHEMA_RULES,
    SCORED_EDGE_TYPES,
    EdgeType,
    GraphError,
    NodeLabel,
    PropertyGraph,
)
from .synth import DiseaseVocabEntry, IngestBundle

PathLike = Union[str, Path]


class StorageError(Exception):
    pass


class IoFailure(StorageError):
    def __init__(self, path: PathLike, cause: OSError):
        self.path = str(path)
        self.cause = cause
        super().__init__(f"{path}: {cause}")


class CorruptRecord(StorageError):
    def __init__(self, line: int, reason: str):
        self.line = line
        super().__init__(f"line {line}: {reason}")


class MalformedCsv(StorageError):
    def __init__(self, file: str, line: int, reason: str):
        self.file = file
        self.line = line
        super().__init__(f"{file}:{line}: {reason}")


# -- JSONL ----------------------------------------------------------------


def dump_jsonl(graph: PropertyGraph) -> bytes:
    """Serialize a graph to its canonical JSONL byte form."""
    out = io.StringIO()
    for node in graph.nodes():
        record = {
            "kind": "node",
            "id": node.id,
            "label": node.label.value,
            "props": {k: node.properties[k] for k in sorted(node.properties)},
        }
        out.write(json.dumps(record, ensure_ascii=False, separators=(",", ":")))
        out.write("\n")
    for edge in graph.edges():
        record = {
            "kind": "edge",
            "id": edge.id,
            "src": edge.src,
            "dst": edge.dst,
            "type": edge.type.value,
            "props": {k: edge.properties[k] for k in sorted(edge.properties)},
        }
        out.write(json.dumps(record, ensure_ascii=False, separators=(",", ":")))
        out.write("\n")
    return out.getvalue().encode("utf-8")


def export_jsonl(graph: PropertyGraph, destination: PathLike) -> None:
    try:
        Path(destination).write_bytes(dump_jsonl(graph))
    except OSError as exc:
        raise IoFailure(destination, exc) from exc


def parse_jsonl(data: bytes) -> PropertyGraph:
    graph = PropertyGraph()
    seen_edge = False
    for line_no, raw in enumerate(data.decode("utf-8").splitlines(), start=1):
        if not raw.strip():
            continue
        try:
            record = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise CorruptRecord(line_no, f"invalid JSON ({exc.msg})") from exc
        if not isinstance(record, dict):
            raise CorruptRecord(line_no, "record is not an object")
        kind = record.get("kind")
        try:
            if kind == "node":
                if seen_edge:
                    raise CorruptRecord(line_no, "node record after edge records")
                label = LABELS_BY_NAME.get(record["label"])
                if label is None:
                    raise CorruptRecord(line_no, f"unknown label {record['label']!r}")
                graph.restore_node(int(record["id"]), label, dict(record["props"]))
            elif kind == "edge":
                seen_edge = True
                etype = EDGE_TYPES_BY_NAME.get(record["type"])
                if etype is None:
                    raise CorruptRecord(line_no, f"unknown edge type {record['type']!r}")
                graph.restore_edge(
                    int(record["id"]),
                    int(record["src"]),
                    etype,
                    int(record["dst"]),
                    dict(record["props"]),
                )
            else:
                raise CorruptRecord(line_no, f"unknown record kind {kind!r}")
        except KeyError as exc:
            raise CorruptRecord(line_no, f"missing field {exc.args[0]!r}") from exc
        except (TypeError, ValueError) as exc:
            raise CorruptRecord(line_no, str(exc)) from exc
        except GraphError as exc:
            raise CorruptRecord(line_no, str(exc)) from exc
    return graph


def load_jsonl(source: PathLike) -> PropertyGraph:
    try:
        data = Path(source).read_bytes()
    except OSError as exc:
        raise IoFailure(source, exc) from exc
    return parse_jsonl(data)


# -- CSV dump/load ---------------------------------------------------------


def _node_filename(label: NodeLabel) -> str:
    return f"{label.value.lower()}.csv"


def _edge_filename(etype: EdgeType) -> str:
    src_label = next(rule[0] for rule in SCHEMA_RULES if rule[1] is etype)
    return f"{src_label.value.lower()}_{etype.value.lower()}.csv"


def _cell(value) -> str:
    if isinstance(value, list):
        return "|".join(value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def export_csv(graph: PropertyGraph, directory: PathLike) -> list[str]:
    """Write one file per label and edge type; returns the file names."""
    directory = Path(directory)
    written = []
    try:
        directory.mkdir(parents=True, exist_ok=True)
        for label in NodeLabel:
            keys: set = set(REQUIRED_PROPERTIES.get(label, ()))
            node_ids = graph.nodes_by_label(label)
            for node_id in node_ids:
                keys.update(graph.node(node_id).properties)
            columns = sorted(keys)
            name = _node_filename(label)
            with open(directory / name, "w", newline="", encoding="utf-8") as handle:
                writer = csv.writer(handle, lineterminator="\n")
                writer.writerow(["id"] + columns)
                for node_id in node_ids:
                    props = graph.node(node_id).properties
                    writer.writerow(
                        [node_id] + [_cell(props[k]) if k in props else "" for k in columns]
                    )
            written.append(name)
        for etype in EdgeType:
            scored = etype in SCORED_EDGE_TYPES
            name = _edge_filename(etype)
            with open(directory / name, "w", newline="", encoding="utf-8") as handle:
                writer = csv.writer(handle, lineterminator="\n")
                writer.writerow(["src", "dst", "score"] if scored else ["src", "dst"])
                for edge in graph.edges():
                    if edge.type is not etype:
                        continue
                    row = [edge.src, edge.dst]
                    if scored:
                        row.append(_cell(edge.properties["score"]))
                    writer.writerow(row)
            written.append(name)
    except OSError as exc:
        raise IoFailure(directory, exc) from exc
    return written


def load_csv(directory: PathLike) -> PropertyGraph:
    """Rebuild a graph from an export_csv directory.

    Node ids are preserved; edge ids are reassigned in file order.
    """
    directory = Path(directory)
    staged = []
    for label in NodeLabel:
        path = directory / _node_filename(label)
        rows, header = _read_rows(path)
        if not header or header[0] != "id":
            raise MalformedCsv(path.name, 1, "first column must be 'id'")
        for line_no, row in rows:
            if len(row) != len(header):
                raise MalformedCsv(path.name, line_no, "wrong number of fields")
            try:
                node_id = int(row[0])
            except ValueError:
                raise MalformedCsv(path.name, line_no, f"bad node id {row[0]!r}") from None
            props = {}
            for key, cell in zip(header[1:], row[1:]):
                if cell == "":
                    continue
                props[key] = cell.split("|") if key == "synonyms" else cell
            staged.append((node_id, label, props, path.name, line_no))
    staged.sort(key=lambda item: item[0])
    graph = PropertyGraph()
    for node_id, label, props, fname, line_no in staged:
        try:
            graph.restore_node(node_id, label, props)
        except GraphError as exc:
            raise MalformedCsv(fname, line_no, str(exc)) from exc
    for etype in EdgeType:
        path = directory / _edge_filename(etype)
        scored = etype in SCORED_EDGE_TYPES
        expected = ["src", "dst", "score"] if scored else ["src", "dst"]
        rows, header = _read_rows(path)
        if header != expected:
            raise MalformedCsv(path.name, 1, f"header must be {','.join(expected)!r}")
        for line_no, row in rows:
            if len(row) != len(expected):
                raise MalformedCsv(path.name, line_no, "wrong number of fields")
            try:
                props = {"score": float(row[2])} if scored else {}
                graph.add_edge(int(row[0]), etype, int(row[1]), props)
            except (ValueError, GraphError) as exc:
                raise MalformedCsv(path.name, line_no, str(exc)) from exc
    return graph


def _read_rows(path: Path) -> tuple[list, Optional[list]]:
    try:
        with open(path, newline="", encoding="utf-8") as handle:
            reader = csv.reader(handle)
            header = next(reader, None)
            return [(i, row) for i, row in enumerate(reader, start=2)], header
    except OSError as exc:
        raise IoFailure(path, exc) from exc


# -- ingestion tables ------------------------------------------------------

SUBJECTS_FILE = "subjects.csv"
DIAGNOSES_FILE = "diagnoses.csv"
PHENOTYPES_FILE = "phenotypes.csv"


def _read_table(path: Path, columns: list[str], required: bool) -> list:
    if not path.exists():
        if required:
            raise IoFailure(path, OSError("file not found"))
        return []
    rows, header = _read_rows(path)
    if header != columns:
        raise MalformedCsv(path.name, 1, f"header must be {','.join(columns)!r}")
    out = []
    for line_no, row in rows:
        if len(row) != len(columns):
            raise MalformedCsv(path.name, line_no, "wrong number of fields")
        if not row[0]:
            raise MalformedCsv(path.name, line_no, "empty subject_id")
        out.append(tuple(row) if len(row) > 1 else row[0])
    return out


def read_bundle(directory: PathLike) -> IngestBundle:
    """Read subjects/diagnoses/phenotypes tables from a directory.

    subjects.csv is mandatory; the other two default to empty when the
    file is absent.
    """
    directory = Path(directory)
    return IngestBundle(
        subjects=_read_table(directory / SUBJECTS_FILE, ["subject_id"], required=True),
        diagnoses=_read_table(
            directory / DIAGNOSES_FILE, ["subject_id", "icd10_code", "disease_name"], required=False
        ),
        phenotypes=_read_table(
            directory / PHENOTYPES_FILE, ["subject_id", "hpo_term"], required=False
        ),
    )


def read_vocab(path: PathLike) -> list[DiseaseVocabEntry]:
    """Load a disease vocabulary CSV with header name,icd10,icd9."""
    path = Path(path)
    rows, header = _read_rows(path)
    if header != ["name", "icd10", "icd9"]:
        raise MalformedCsv(path.name, 1, "header must be 'name,icd10,icd9'")
    entries = []
    for line_no, row in rows:
        if len(row) != 3:
            raise MalformedCsv(path.name, line_no, "wrong number of fields")
        if not row[0]:
            raise MalformedCsv(path.name, line_no, "empty disease name")
        entries.append(
            DiseaseVocabEntry(name=row[0], icd10=row[1] or None, icd9=row[2] or None)
        )
    return entries
