import random

import pytest

from codeatlas import model
from codeatlas.dotio import extract_dot_block, parse_dot, serialize_dot
from codeatlas.errors import DotSyntaxError, GraphValidationError
from codeatlas.model import MapEdge, MapGraph, MapNode, Relation, files_in_graph

from conftest import random_graph

BUSINESS = model.BUSINESS_COMPONENT
FUNCTION = model.FUNCTION_CALL
LOCAL = model.LOCAL


class TestParseBasics:
    def test_minimal_business_graph(self):
        graph = parse_dot(
            'digraph G { A [label="Auth: (handles login)"]; '
            'B [label="DB: (stores users)"]; '
            'A -> B [label="reads user records"]; }',
            BUSINESS,
        )
        assert len(graph.nodes) == 2
        auth = graph.node("A")
        assert auth.name == "Auth"
        assert auth.description == "handles login"
        (edge,) = graph.edges
        assert edge.relation == Relation("business-purpose", "reads user records")
        assert edge.annotation == "reads user records"

    def test_implicit_node_synthesized(self):
        graph = parse_dot("digraph G { A -> B }", BUSINESS)
        assert graph.node_ids() == {"A", "B"}
        assert graph.node("B").name == ""

    def test_self_loop_rejected(self):
        with pytest.raises(GraphValidationError, match="self-loop"):
            parse_dot("digraph G { A -> A }", BUSINESS)

    def test_duplicate_declaration_rejected(self):
        with pytest.raises(GraphValidationError, match="duplicate"):
            parse_dot('digraph G { A [label="x"]; A [label="y"]; }', BUSINESS)

    def test_key_lists_split_on_semicolons(self):
        graph = parse_dot(
            'digraph G { A [keyFunctions="f;g", keyFiles="a.py; b.py"]; }', BUSINESS
        )
        node = graph.node("A")
        assert node.key_functions == ("f", "g")
        assert node.key_files == ("a.py", "b.py")

    def test_clusters_become_module_groups(self):
        graph = parse_dot(
            'digraph G { subgraph cluster_0 { label="Auth"; A; B; } A -> B; }',
            BUSINESS,
        )
        assert graph.groups_as_dict() == {"Auth": {"A", "B"}}

    def test_syntax_error_carries_position(self):
        with pytest.raises(DotSyntaxError) as excinfo:
            parse_dot("digraph G {\n  A ->\n}", BUSINESS)
        assert excinfo.value.line == 3

    def test_comments_skipped(self):
        graph = parse_dot(
            "digraph G { // one\n /* two */ A; # three\n }", BUSINESS
        )
        assert graph.node_ids() == {"A"}


class TestSubsetRejections:
    @pytest.mark.parametrize(
        "text",
        [
            "graph G { A -- B }",
            "strict digraph G { A }",
            "digraph G { node [shape=box]; A; }",
            "digraph G { A:port -> B }",
            "digraph G { A [label=<b>] }",
            "digraph G { subgraph inner { A; } }",
            "not dot at all",
            "digraph G { A -> }",
        ],
    )
    def test_rejected(self, text):
        with pytest.raises(DotSyntaxError):
            parse_dot(text, BUSINESS)


class TestRelationLegality:
    def test_local_call_label_rejected(self):
        with pytest.raises(GraphValidationError, match="illegal"):
            parse_dot('digraph G { A -> B [label="calls"]; }', LOCAL)

    def test_local_relations_accepted(self):
        graph = parse_dot(
            "digraph G {"
            ' A -> B [label="inherits"];'
            ' A -> C [label="implements"];'
            ' A -> D [label="defines"];'
            ' A -> E [label="used by"];'
            ' A -> F [label="contains"];'
            " }",
            LOCAL,
        )
        kinds = {e.relation.kind for e in graph.edges}
        assert kinds == set(model.legal_relations(LOCAL))

    def test_function_call_inference(self):
        graph = parse_dot(
            'digraph G { A -> B [label="inherits from B"]; '
            'A -> C [label="calls helper"]; '
            'A -> D [label="provides data"]; }',
            FUNCTION,
        )
        by_dst = {e.dst: e.relation for e in graph.edges}
        assert by_dst["B"].kind == "inheritance"
        assert by_dst["C"].kind == "call-relation"
        assert by_dst["D"] == Relation("purpose", "provides data")

    def test_business_labels_always_business_purpose(self):
        graph = parse_dot('digraph G { A -> B [label="calls the db"]; }', BUSINESS)
        (edge,) = graph.edges
        assert edge.relation.kind == "business-purpose"

    def test_explicit_relation_attr_wins(self):
        graph = parse_dot(
            'digraph G { A -> B [relation="inheritance", label="whatever"]; }',
            FUNCTION,
        )
        assert graph.edges[0].relation.kind == "inheritance"

    def test_explicit_illegal_relation_rejected(self):
        with pytest.raises(GraphValidationError, match="illegal"):
            parse_dot('digraph G { A -> B [relation="call-relation"]; }', BUSINESS)

    def test_table_driven_negative_suite(self):
        # every relation kind must be rejected by every map kind that does
        # not list it
        all_relations = {
            kind for legal in model.LEGAL_RELATIONS.values() for kind in legal
        }
        for map_kind, legal in model.LEGAL_RELATIONS.items():
            for relation in sorted(all_relations - legal):
                text = f'digraph G {{ A -> B [relation="{relation}"]; }}'
                with pytest.raises(GraphValidationError):
                    parse_dot(text, map_kind)


class TestSerialize:
    def test_single_node(self):
        graph = MapGraph(BUSINESS, (MapNode("A"),))
        assert serialize_dot(graph) == 'digraph G {\n  "A";\n}\n'

    def test_round_trip_example(self):
        graph = parse_dot(
            'digraph G { A [label="Auth: (handles login)"]; '
            'B [label="DB: (stores users)"]; '
            'A -> B [label="reads user records"]; }',
            BUSINESS,
        )
        assert parse_dot(serialize_dot(graph), BUSINESS) == graph

    def test_deterministic_output(self):
        rng = random.Random(7)
        graph = random_graph(rng, FUNCTION)
        assert serialize_dot(graph) == serialize_dot(graph)

    @pytest.mark.parametrize("kind", [BUSINESS, FUNCTION, LOCAL])
    def test_random_round_trip(self, kind):
        rng = random.Random(kind)  # str seeds are deterministic
        for _ in range(60):
            graph = random_graph(rng, kind)
            assert parse_dot(serialize_dot(graph), kind) == graph

    def test_escaping(self):
        node = MapNode("A", label='say "hi"\nplease\\now')
        graph = MapGraph(BUSINESS, (node,))
        assert parse_dot(serialize_dot(graph), BUSINESS) == graph


class TestFilesInGraph:
    def _node(self, node_id, files):
        return MapNode(node_id, key_files=tuple(files))

    def test_union(self):
        graph = MapGraph(
            BUSINESS, (self._node("A", ["a.py"]), self._node("B", ["a.py", "b.py"]))
        )
        assert files_in_graph(graph) == {"a.py", "b.py"}

    def test_empty(self):
        graph = MapGraph(BUSINESS, (MapNode("A"),))
        assert files_in_graph(graph) == frozenset()

    def test_mixed_separators_normalize_to_one_entry(self):
        from codeatlas.paths import normalize_path

        raw = ["src\\x.py", "src/x.py"]
        graph = MapGraph(BUSINESS, (self._node("A", raw),))
        # oracle: the ingest normalizer applied to each raw entry
        assert files_in_graph(graph) == {normalize_path(p) for p in raw}
        assert files_in_graph(graph) == {"src/x.py"}

    def test_monotone_under_node_addition(self):
        rng = random.Random(99)
        for _ in range(30):
            graph = random_graph(rng, BUSINESS)
            before = files_in_graph(graph)
            extra = MapNode("zz_extra", key_files=("src/extra.py",))
            grown = MapGraph(
                graph.kind, graph.nodes + (extra,), graph.edges, graph.module_groups
            )
            assert before <= files_in_graph(grown)


class TestExtractDotBlock:
    def test_from_fenced_completion(self):
        text = "Analysis:\n```dot\ndigraph G { A }\n```\ndone"
        assert extract_dot_block(text) == "digraph G { A }"

    def test_braces_in_strings_ignored(self):
        text = 'digraph G { A [label="has } brace"]; }'
        assert extract_dot_block("prefix " + text) == text

    def test_missing_block(self):
        with pytest.raises(DotSyntaxError):
            extract_dot_block("no graph here")
