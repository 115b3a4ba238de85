from __future__ import annotations

import random

import pytest

from ckgate.graph import EdgeType, NodeLabel, PropertyGraph
from ckgate.qlang import (
    Budget,
    BudgetExceeded,
    BudgetMeter,
    TypeMismatch,
    UnknownEdgeType,
    UnknownLabel,
    evaluate,
    parse,
    pretty_print,
)
from generators import random_graph, random_query
from naive import naive_evaluate

GENEROUS = Budget(max_steps=10_000_000, max_rows=100_000, wall_clock_ms=60_000)


def control_fixture():
    g = PropertyGraph()
    bs = g.add_node(NodeLabel.BIOLOGICAL_SAMPLE)
    control = g.add_node(NodeLabel.DISEASE, {"name": "control"})
    g.add_edge(bs, EdgeType.HAS_DISEASE, control)
    return g, bs, control


class TestEvaluate:
    def test_empty_graph(self):
        table = evaluate(PropertyGraph(), parse("MATCH (a)-[]->(b) RETURN a"), GENEROUS)
        assert table.rows == [] and table.truncated is False

    def test_single_binding(self):
        g, bs, control = control_fixture()
        query = parse(
            'MATCH (b)-[:HAS_DISEASE]->(d:Disease) WHERE d.name = "control" RETURN b, d.name'
        )
        table = evaluate(g, query, GENEROUS)
        assert table.rows == [(bs, "control")]
        assert table.columns == ["b", "d.name"]

    def test_zero_step_budget_exhausts(self):
        g, _, _ = control_fixture()
        with pytest.raises(BudgetExceeded) as err:
            evaluate(g, parse("MATCH (a)-[]->(b) RETURN a"), Budget(max_steps=0))
        assert err.value.kind == "steps"

    def test_zero_wall_clock_exhausts(self):
        g, _, _ = control_fixture()
        with pytest.raises(BudgetExceeded) as err:
            evaluate(g, parse("MATCH (a) RETURN a"), Budget(wall_clock_ms=0))
        assert err.value.kind == "wall_clock"

    def test_unknown_label_is_error(self):
        g, _, _ = control_fixture()
        with pytest.raises(UnknownLabel):
            evaluate(g, parse("MATCH (a:Patient) RETURN a"), GENEROUS)

    def test_unknown_edge_type_is_error(self):
        g, _, _ = control_fixture()
        with pytest.raises(UnknownEdgeType):
            evaluate(g, parse("MATCH (a)-[:TREATS]->(b) RETURN a"), GENEROUS)

    def test_type_mismatch_ordering_on_text(self):
        g, _, _ = control_fixture()
        with pytest.raises(TypeMismatch):
            evaluate(g, parse("MATCH (d:Disease) WHERE d.name < 5 RETURN d"), GENEROUS)

    def test_type_mismatch_contains_number(self):
        g = PropertyGraph()
        bs = g.add_node(NodeLabel.BIOLOGICAL_SAMPLE)
        gene = g.add_node(NodeLabel.GENE, {"name": "g"})
        g.add_edge(bs, EdgeType.HAS_DAMAGE, gene, {"score": 5.0})
        with pytest.raises(TypeMismatch):
            evaluate(
                g, parse('MATCH (b)-[e:HAS_DAMAGE]->(x) WHERE e.score CONTAINS "5" RETURN b'),
                GENEROUS,
            )

    def test_missing_property_is_no_match_not_error(self):
        g, bs, _ = control_fixture()
        table = evaluate(g, parse("MATCH (b) WHERE b.score > 1 RETURN b"), GENEROUS)
        assert table.rows == []

    def test_limit_truncates(self):
        g = PropertyGraph()
        bs = g.add_node(NodeLabel.BIOLOGICAL_SAMPLE)
        for i in range(5):
            gene = g.add_node(NodeLabel.GENE, {"name": f"g{i}"})
            g.add_edge(bs, EdgeType.HAS_DAMAGE, gene, {"score": 2.0})
        table = evaluate(g, parse("MATCH (b)-[:HAS_DAMAGE]->(g) RETURN g LIMIT 2"), GENEROUS)
        assert len(table.rows) == 2
        assert table.truncated is True

    def test_max_rows_truncates(self):
        g = PropertyGraph()
        for i in range(6):
            g.add_node(NodeLabel.GENE, {"name": f"g{i}"})
        table = evaluate(g, parse("MATCH (g:Gene) RETURN g"), Budget(max_rows=3))
        assert len(table.rows) == 3
        assert table.truncated is True

    def test_meter_reports_step_usage(self):
        g, _, _ = control_fixture()
        meter = BudgetMeter()
        evaluate(g, parse("MATCH (a)-[]->(b) RETURN a"), GENEROUS, meter)
        assert meter.steps_used > 0

    def test_single_node_pattern_consumes_no_steps(self):
        g, _, _ = control_fixture()
        meter = BudgetMeter()
        evaluate(g, parse("MATCH (a) RETURN a"), Budget(max_steps=0), meter)
        assert meter.steps_used == 0

    def test_rows_sorted_by_binding(self):
        g = PropertyGraph()
        samples = [g.add_node(NodeLabel.BIOLOGICAL_SAMPLE) for _ in range(3)]
        disease = g.add_node(NodeLabel.DISEASE, {"name": "d"})
        for bs in reversed(samples):
            g.add_edge(bs, EdgeType.HAS_DISEASE, disease)
        table = evaluate(g, parse("MATCH (b)-[:HAS_DISEASE]->(d) RETURN b"), GENEROUS)
        assert table.rows == [(samples[0],), (samples[1],), (samples[2],)]

    def test_no_mutation(self):
        g, _, _ = control_fixture()
        before = g.graph_stats()
        evaluate(g, parse("MATCH (a)-[]->(b) RETURN a, b"), GENEROUS)
        assert g.graph_stats() == before

    def test_repeated_variable_is_a_join(self):
        g, bs, control = control_fixture()
        other = g.add_node(NodeLabel.DISEASE, {"name": "flu"})
        g.add_edge(bs, EdgeType.HAS_DISEASE, other)
        # (d)<-[]-(b)-[]->(d) requires both hops to reach the same disease
        table = evaluate(
            g, parse("MATCH (d)<-[:HAS_DISEASE]-(b)-[:HAS_DISEASE]->(d) RETURN d"), GENEROUS
        )
        assert table.rows == [(control,), (other,)]


class TestOracleEquivalence:
    def test_random_graphs_and_queries(self):
        rng = random.Random(271828)
        for _ in range(300):
            g = random_graph(rng, max_nodes=30)
            query = random_query(rng)
            table = evaluate(g, query, GENEROUS)
            columns, rows = naive_evaluate(g, query)
            assert table.columns == columns
            assert table.rows == rows

    def test_query_text_round_trips_through_parser(self):
        rng = random.Random(31337)
        for _ in range(200):
            query = random_query(rng)
            assert parse(pretty_print(query)) == query

    def test_budget_monotonicity(self):
        rng = random.Random(1618)
        for _ in range(60):
            g = random_graph(rng, max_nodes=25)
            query = random_query(rng)
            meter = BudgetMeter()
            base = evaluate(g, query, GENEROUS, meter)
            bigger = Budget(
                max_steps=GENEROUS.max_steps * 2,
                max_rows=GENEROUS.max_rows + 5,
                wall_clock_ms=GENEROUS.wall_clock_ms + 1,
            )
            again = evaluate(g, query, bigger)
            assert again.rows == base.rows
            assert again.truncated == base.truncated
