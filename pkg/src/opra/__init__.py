"""Query engine for integer-labelled graphs.

Graphs carry named total labelling functions into the extended integers;
queries combine path constraints, regular constraints over node-constraint
letters, arithmetical (path aggregation) constraints and ontology-defined
auxiliary labellings.
"""

from .engine import Engine, EngineLimits, answers, extremal, holds
from .graph import (
    NEG_INF,
    POS_INF,
    SINK,
    Graph,
    Labelling,
    comb,
    embed_data_graph,
    embed_ecrpq,
    ext_add,
    ext_cmp,
    ext_mul,
    graph_from_dict,
    graph_to_dict,
    load_graph,
    lookup,
    path_at,
    save_graph,
)
from .model import Query, depth, free_variables, validate
from .nfa import compile as compile_regex
from .nfa import eval_letter, match_direct, pad_extend
from .parser import parse
from .render import render
from .terms import ExtendedGraph, eval_aggregate, eval_term, extend, register_function

__all__ = [
    "Engine", "EngineLimits", "Graph", "Labelling", "Query", "ExtendedGraph",
    "SINK", "POS_INF", "NEG_INF",
    "answers", "extremal", "holds",
    "comb", "path_at", "lookup", "ext_add", "ext_cmp", "ext_mul",
    "embed_ecrpq", "embed_data_graph",
    "graph_from_dict", "graph_to_dict", "load_graph", "save_graph",
    "depth", "free_variables", "validate",
    "compile_regex", "pad_extend", "eval_letter", "match_direct",
    "parse", "render",
    "extend", "eval_term", "eval_aggregate", "register_function",
]
