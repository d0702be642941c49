"""Well-formedness, scoping, depth and free-variable bookkeeping."""

from conftest import corpus_texts

from opra.model import (
    OntologyDef,
    Query,
    TApply,
    TConst,
    TLabel,
    depth,
    free_variables,
    validate,
)
from opra.parser import parse

MAP_SCHEMA = {("E", 2), ("type", 1), ("time", 1), ("attr", 1)}


class TestValidate:
    def test_corpus_ok(self, map_graph):
        for name, text in corpus_texts().items():
            diags = validate(parse(text), map_graph.schema())
            assert not diags, f"{name}: {diags}"

    def test_ontology_order(self):
        q = parse("LET a(x) := b(x), b(x) := 1 IN SELECT NODES x")
        codes = {d.code for d in validate(q, MAP_SCHEMA)}
        assert "UnknownLabelling" in codes  # b not yet defined inside a

    def test_arity_mismatch_atom(self):
        q = parse("SELECT NODES x SUCH THAT x -[p]-> x : E "
                  "HAVING attr[p, q] <= 1")
        codes = {d.code for d in validate(q, MAP_SCHEMA)}
        assert "ArityMismatch" in codes

    def test_unknown_labelling(self):
        q = parse("SELECT NODES x SUCH THAT x -[p]-> x : nosuch")
        codes = {d.code for d in validate(q, MAP_SCHEMA)}
        assert "UnknownLabelling" in codes

    def test_edge_labelling_must_be_binary(self):
        q = parse("SELECT NODES x SUCH THAT x -[p]-> x : attr")
        codes = {d.code for d in validate(q, MAP_SCHEMA)}
        assert "ArityMismatch" in codes

    def test_subquery_no_free_paths(self):
        q = parse("LET c(x) := [SELECT NODES x, PATHS p SUCH THAT x -[p]-> y : E] "
                  "IN SELECT NODES x HAVING c[x] <= 0")
        codes = {d.code for d in validate(q, MAP_SCHEMA)}
        assert "FreePathInSubquery" in codes

    def test_duplicate_definition(self):
        q = parse("LET a(x) := 1, a(y) := 2 IN SELECT NODES x")
        codes = {d.code for d in validate(q, MAP_SCHEMA)}
        assert "DuplicateLabelling" in codes

    def test_identity_needs_eq(self):
        q = parse("SELECT NODES x SUCH THAT x -[p]-> x : E WHERE <p@0 <= p@+1>")
        codes = {d.code for d in validate(q, MAP_SCHEMA)}
        assert "BadIdentityOp" in codes

    def test_deterministic(self):
        q = parse("SELECT NODES x SUCH THAT x -[p]-> x : nosuch")
        assert validate(q, MAP_SCHEMA) == validate(q, MAP_SCHEMA)


class TestDepth:
    def test_empty(self):
        assert depth([]) == 0

    def test_independent(self):
        assert depth([OntologyDef("One", ("x",), TConst(1))]) == 0

    def test_chain(self):
        defs = [
            OntologyDef("l1", ("x",), TConst(1)),
            OntologyDef("l2", ("x",), TApply("add", (TLabel("l1", ("x",)),
                                                     TConst(1)))),
        ]
        assert depth(defs) == 1

    def test_longest_chain(self):
        defs = [
            OntologyDef("a", ("x",), TConst(1)),
            OntologyDef("b", ("x",), TLabel("a", ("x",))),
            OntologyDef("c", ("x",), TLabel("b", ("x",))),
            OntologyDef("d", ("x",), TConst(0)),
        ]
        assert depth(defs) == 2

    def test_monotone_under_append(self):
        defs = [
            OntologyDef("a", ("x",), TConst(1)),
            OntologyDef("b", ("x",), TLabel("a", ("x",))),
        ]
        base = depth(defs)
        more = defs + [OntologyDef("c", ("x",), TLabel("b", ("x",)))]
        assert depth(more) >= base


class TestFreeVariables:
    def test_q1(self):
        q = parse(corpus_texts()["q1"])
        nodes, paths = free_variables(q)
        assert nodes == {"x", "y"}
        assert paths == set()
        assert q.quantified_paths() == ("pi",)

    def test_q5(self):
        q = parse(corpus_texts()["q5"])
        nodes, paths = free_variables(q)
        assert nodes == set()
        assert paths == {"pi"}
        assert set(q.quantified_nodes()) == {"x", "y"}

    def test_boolean(self):
        q = parse("SELECT () SUCH THAT x -[p]-> x : E")
        assert free_variables(q) == (set(), set())

    def test_coercion_recorded(self):
        q = parse("LET m(x, y) := 1 IN SELECT NODES x, y "
                  "SUCH THAT x -[p]-> y : E HAVING attr[p] - m[x, y] <= 0")
        assert q.coerced_node_vars() == {"x", "y"}
