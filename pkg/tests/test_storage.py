from __future__ import annotations

import random

import pytest

from ckgate.graph import EdgeType, NodeLabel, PropertyGraph
from ckgate.qlang import Budget, evaluate, parse
from ckgate.storage import (
    CorruptRecord,
    IoFailure,
    MalformedCsv,
    dump_jsonl,
    export_csv,
    export_jsonl,
    load_csv,
    load_jsonl,
    parse_jsonl,
    read_bundle,
    read_vocab,
)
from ckgate.synth import GeneratorConfig, generate
from generators import random_graph


class TestJsonl:
    def test_empty_graph_round_trip(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        export_jsonl(PropertyGraph(), path)
        assert path.read_bytes() == b""
        assert load_jsonl(path).node_count == 0

    def test_seeded_graph_round_trip_stats(self, tmp_path, default_graph):
        path = tmp_path / "kg.jsonl"
        export_jsonl(default_graph, path)
        assert load_jsonl(path).graph_stats() == default_graph.graph_stats()

    def test_nodes_before_edges_ids_ascending(self, default_graph):
        lines = dump_jsonl(default_graph).decode().splitlines()
        kinds = [line.split('"')[3] for line in lines]
        assert kinds == sorted(kinds, key=lambda k: k != "node")

    def test_round_trip_preserves_query_outputs(self):
        rng = random.Random(777)
        probe = parse("MATCH (s)<-[:BELONGS_TO_SUBJECT]-(b)-[e:HAS_DAMAGE]->(g) "
                      "RETURN s.subject_id, g.name, e.score")
        for _ in range(500):
            g = random_graph(rng, max_nodes=30)
            back = parse_jsonl(dump_jsonl(g))
            budget = Budget()
            assert evaluate(back, probe, budget).rows == evaluate(g, probe, budget).rows
            assert back.graph_stats() == g.graph_stats()

    @pytest.mark.parametrize(
        "line",
        [
            "not json",
            '{"kind":"tree","id":0}',
            '{"kind":"node","id":0,"label":"Alien","props":{}}',
            '{"kind":"node","id":0,"label":"Subject","props":{}}',
            '{"kind":"edge","id":0,"src":0,"dst":1,"type":"HAS_DISEASE","props":{}}',
        ],
    )
    def test_corrupt_records(self, line):
        with pytest.raises(CorruptRecord) as err:
            parse_jsonl(line.encode())
        assert err.value.line == 1

    def test_descending_ids_rejected(self):
        lines = (
            '{"kind":"node","id":1,"label":"Gene","props":{"name":"a"}}\n'
            '{"kind":"node","id":0,"label":"Gene","props":{"name":"b"}}\n'
        )
        with pytest.raises(CorruptRecord) as err:
            parse_jsonl(lines.encode())
        assert err.value.line == 2

    def test_node_after_edge_rejected(self):
        g = PropertyGraph()
        bs = g.add_node(NodeLabel.BIOLOGICAL_SAMPLE)
        d = g.add_node(NodeLabel.DISEASE, {"name": "x"})
        g.add_edge(bs, EdgeType.HAS_DISEASE, d)
        lines = dump_jsonl(g).decode().splitlines()
        shuffled = "\n".join([lines[0], lines[2], lines[1]])
        with pytest.raises(CorruptRecord):
            parse_jsonl(shuffled.encode())

    def test_io_failure(self, tmp_path):
        with pytest.raises(IoFailure):
            load_jsonl(tmp_path / "missing.jsonl")
        with pytest.raises(IoFailure):
            export_jsonl(PropertyGraph(), tmp_path / "no" / "such" / "dir.jsonl")


class TestCsv:
    def test_empty_graph_file_set(self, tmp_path):
        files = export_csv(PropertyGraph(), tmp_path)
        assert len(files) == 11  # 6 node files + 5 edge files
        for name in files:
            content = (tmp_path / name).read_text()
            assert content.count("\n") == 1  # header only

    def test_default_graph_has_disease_rows(self, tmp_path, default_graph):
        export_csv(default_graph, tmp_path)
        lines = (tmp_path / "biological_sample_has_disease.csv").read_text().splitlines()
        assert lines[0] == "src,dst"
        assert len(lines) - 1 == 100

    def test_round_trip_via_load(self, tmp_path):
        g = generate(GeneratorConfig(seed=5, n_subjects=12, disease_vocab_size=15,
                                     n_genes=20, n_proteins=20, n_phenotypes=8))
        export_csv(g, tmp_path)
        assert load_csv(tmp_path).graph_stats() == g.graph_stats()

    def test_quoting_round_trip(self, tmp_path):
        g = PropertyGraph()
        g.add_node(NodeLabel.DISEASE, {"name": 'weird, "quoted"\nname'})
        export_csv(g, tmp_path)
        back = load_csv(tmp_path)
        assert back.node(0).properties["name"] == 'weird, "quoted"\nname'

    def test_malformed_header(self, tmp_path):
        export_csv(PropertyGraph(), tmp_path)
        (tmp_path / "gene.csv").write_text("wrong,header\n")
        with pytest.raises(MalformedCsv):
            load_csv(tmp_path)


class TestBundleReaders:
    def test_read_bundle(self, tmp_path):
        (tmp_path / "subjects.csv").write_text("subject_id\nP1\nP2\n")
        (tmp_path / "diagnoses.csv").write_text(
            "subject_id,icd10_code,disease_name\nP1,J45,asthma\n"
        )
        bundle = read_bundle(tmp_path)
        assert bundle.subjects == ["P1", "P2"]
        assert bundle.diagnoses == [("P1", "J45", "asthma")]
        assert bundle.phenotypes == []

    def test_missing_subjects_file(self, tmp_path):
        with pytest.raises(IoFailure):
            read_bundle(tmp_path)

    def test_malformed_diagnoses_line(self, tmp_path):
        (tmp_path / "subjects.csv").write_text("subject_id\nP1\n")
        (tmp_path / "diagnoses.csv").write_text(
            "subject_id,icd10_code,disease_name\nP1,J45\n"
        )
        with pytest.raises(MalformedCsv) as err:
            read_bundle(tmp_path)
        assert err.value.line == 2

    def test_read_vocab(self, tmp_path):
        (tmp_path / "vocab.csv").write_text("name,icd10,icd9\nasthma,J45,493\nflu,,\n")
        vocab = read_vocab(tmp_path / "vocab.csv")
        assert vocab[0].icd10 == "J45" and vocab[0].icd9 == "493"
        assert vocab[1].icd10 is None
