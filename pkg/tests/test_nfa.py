"""Automata over node-constraint letters: construction, the pad letter,
letter evaluation and the direct-matching oracle."""

from itertools import product as iproduct

import pytest

from helpers import random_graph
import random

from opra.graph import SINK, Graph, Labelling, comb
from opra.model import (
    Compare,
    NCConst,
    NCLabel,
    PosRef,
    RAlt,
    RConcat,
    RLetter,
    RStar,
    Top,
)
from opra.nfa import PAD, compile, eval_letter, match_direct, pad_extend, simulate

TOP = RLetter((Top(),))


def letter(*conjuncts):
    return RLetter(tuple(conjuncts))


def positive(var):
    return letter(Compare(NCLabel("val", (PosRef(var, 0),)), ">", NCConst(0)))


class TestCompile:
    def test_top_star_single_state(self):
        a = compile(RStar(TOP))
        assert a.n_states == 1
        assert a.initials == a.finals == frozenset({0})

    def test_length_at_least_two(self, map_graph):
        a = compile(RConcat((TOP, TOP, RStar(TOP))))
        for n in range(6):
            word = comb([tuple("S" for _ in range(n))]) if n else ()
            assert simulate(a, word, map_graph) == (n >= 2)

    def test_qb_two_states(self):
        qb = RConcat((RStar(letter(Compare(
            NCLabel("E", (PosRef("pi", 1), PosRef("pi", 0))), "!=",
            NCConst(0)))), TOP))
        a = compile(qb)
        assert a.n_states == 2

    def test_unsatisfiable_letter_rejects(self, map_graph):
        # letters stay symbolic: the automaton exists, nothing matches
        never = letter(Compare(NCConst(0), "=", NCConst(1)))
        a = compile(never)
        for path in [("S",), ("S", "T")]:
            assert not simulate(a, comb([path]), map_graph)


class TestPadExtend:
    def test_adds_one_loop(self):
        a = compile(RStar(TOP))
        b = pad_extend(a)
        loops = [t for s in range(b.n_states) for (l, t) in b.moves(s) if l is PAD]
        assert len(loops) == 1

    def test_pad_semantics(self, map_graph):
        window_all_sink = (SINK,) * 3
        window_mixed = ("S", SINK, SINK)
        assert eval_letter(PAD, window_all_sink, map_graph)
        # the pad letter reads the current components only
        assert not eval_letter(PAD, (SINK, "S", SINK), map_graph)
        assert eval_letter(PAD, window_mixed, map_graph)  # current is sink

    def test_idempotent(self):
        a = pad_extend(compile(RStar(TOP)))
        assert pad_extend(a) == a

    def test_acceptance_unchanged_without_all_sink_windows(self):
        rng = random.Random(3)
        g = random_graph(rng, max_nodes=3, min_nodes=2)
        regex = RConcat((positive("p"), RStar(TOP)))
        a = compile(regex)
        b = pad_extend(a)
        paths = [(v,) for v in g.real_nodes]
        paths += [(u, v) for u in g.real_nodes for v in g.real_nodes]
        for path in paths:
            word = comb([path])
            assert simulate(a, word, g) == simulate(b, word, g)


class TestEvalLetter:
    def test_two_path_example(self):
        g = Graph(["v1", "v2", "v3", "v4", "v5", "v6"], [
            Labelling("lam", 1, {("v%d" % i,): i for i in range(1, 7)}, 0)])
        lt = letter(
            Compare(NCLabel("lam", (PosRef("p1", 0),)), ">",
                    NCLabel("lam", (PosRef("p1", 1),))),
            Compare(NCLabel("lam", (PosRef("p2", 0),)), "=",
                    NCLabel("lam", (PosRef("p2", 1),))))
        # v2 > v3 fails; v5 = v6 fails
        window = ("v1", "v2", "v3", "v4", "v5", "v6")
        assert not eval_letter(lt, window, g, ("p1", "p2"))
        g2 = Graph(["a", "b", "c", "d"], [
            Labelling("lam", 1, {("a",): 9, ("b",): 1, ("c",): 4, ("d",): 4}, 0)])
        assert eval_letter(lt, ("x", "a", "b", "x", "c", "d"), g2, ("p1", "p2"))

    def test_top(self, map_graph):
        assert eval_letter(TOP, (SINK, SINK, SINK), map_graph, ("p",))

    def test_attr_negative(self, map_graph):
        lt = letter(Compare(NCLabel("attr", (PosRef("p", 0),)), ">", NCConst(0)))
        assert not eval_letter(lt, ("S", "B", "S"), map_graph, ("p",))
        assert eval_letter(lt, ("S", "T", "P"), map_graph, ("p",))

    def test_monotone_under_conjunct_removal(self, map_graph):
        full = letter(
            Compare(NCLabel("attr", (PosRef("p", 0),)), ">", NCConst(0)),
            Compare(NCLabel("time", (PosRef("p", 0),)), "<=", NCConst(10)))
        dropped = letter(full.conjuncts[0])
        for v in map_graph.real_nodes:
            window = (SINK, v, SINK)
            if eval_letter(full, window, map_graph, ("p",)):
                assert eval_letter(dropped, window, map_graph, ("p",))


class TestMatchDirect:
    def test_qb_single_node(self, map_graph):
        qb = RConcat((RStar(letter(Compare(
            NCLabel("E", (PosRef("pi", 1), PosRef("pi", 0))), "!=",
            NCConst(0)))), TOP))
        assert match_direct(qb, (("S",),), map_graph)

    def test_qb_no_back_edge(self, map_graph):
        qb = RConcat((RStar(letter(Compare(
            NCLabel("E", (PosRef("pi", 1), PosRef("pi", 0))), "!=",
            NCConst(0)))), TOP))
        assert not match_direct(qb, (("S", "T"),), map_graph)

    def test_positive_star(self, map_graph):
        r = RStar(letter(Compare(NCLabel("attr", (PosRef("pi", 0),)), ">",
                                 NCConst(0))))
        assert match_direct(r, (("S", "T", "P"),), map_graph)
        assert not match_direct(r, (("S", "B"),), map_graph)

    def test_empty_paths(self, map_graph):
        assert match_direct(RStar(TOP), ((),), map_graph)
        assert not match_direct(TOP, ((),), map_graph)


def regex_pool():
    """Small regex shapes over one and two path variables."""
    p0 = positive("a")
    pe = letter(Compare(NCLabel("E", (PosRef("a", 0), PosRef("a", 1))), "!=",
                        NCConst(0)))
    eq2 = letter(Compare(PosRef("a", 0), "=", PosRef("b", 0)))
    mixed = letter(Compare(NCLabel("val", (PosRef("a", 0),)), "<=",
                           NCLabel("val", (PosRef("b", 0),))))
    return [
        RStar(TOP),
        RConcat((TOP, TOP, RStar(TOP))),
        RConcat((RStar(p0), TOP)),
        RAlt((p0, RConcat((TOP, TOP)))),
        RStar(pe),
        RConcat((RStar(eq2), TOP)),
        RStar(mixed),
        RConcat((TOP, RAlt((p0, TOP)), RStar(p0))),
    ]


class TestLanguageEquivalence:
    """match_direct (recursive oracle) against Thompson + simulation,
    exhaustive over small graphs and paths."""

    def _paths(self, nodes, max_len):
        out = [()]
        layer = [()]
        for _ in range(max_len):
            layer = [p + (v,) for p in layer for v in nodes]
            out.extend(layer)
        return out

    def test_exhaustive_one_path(self):
        rng = random.Random(7)
        g = random_graph(rng, max_nodes=3, min_nodes=3)
        paths = self._paths(g.real_nodes, 4)
        for regex in regex_pool():
            from opra.model import regex_variables
            if len(regex_variables(regex)) != 1:
                continue
            nfa = compile(regex)
            for p in paths:
                word = comb([p]) if p else ()
                assert simulate(nfa, word, g) == match_direct(regex, (p,), g)

    def test_exhaustive_two_paths(self):
        rng = random.Random(11)
        g = random_graph(rng, max_nodes=3, min_nodes=3)
        paths = self._paths(g.real_nodes, 2)
        for regex in regex_pool():
            from opra.model import regex_variables
            if len(regex_variables(regex)) != 2:
                continue
            nfa = compile(regex)
            for p in paths:
                for q in paths:
                    word = comb([p, q]) if (p or q) else ()
                    assert simulate(nfa, word, g) == \
                        match_direct(regex, (p, q), g)
