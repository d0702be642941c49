"""Top-level query evaluation.

Free and quantified node variables are ground by enumeration over the
non-sink nodes; path variables become product slots (bound slots replay
given paths, free slots are searched).  Ontology terms see the engine
through the extended graph, so truth subqueries and path extrema recurse
into the same machinery.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product as iproduct
from typing import Dict, List, Optional, Sequence, Tuple

from .errors import ArityMismatch, BoundExhausted, RecursionLimit
from .graph import NEG_INF, POS_INF, ext_add, ext_mul
from .model import (
    Atom,
    BoundConst,
    BoundLabel,
    PosRef,
    Query,
    letter_refs,
    regex_variables,
    require_valid,
)
from .nfa import compile as nfa_compile
from .nfa import pad_extend
from .product import CompiledCore, DimSpec, SlotSpec, build
from .terms import ExtendedGraph, extend
from . import vass


@dataclass
class EngineLimits:
    max_configs: int = 400_000
    counter_box: Optional[int] = None
    recursion_limit: int = 64
    explore_nodes: int = 4000
    max_cycle_len: int = 24
    max_cycles: int = 300

    def search(self) -> vass.SearchLimits:
        return vass.SearchLimits(max_configs=self.max_configs,
                                 box=self.counter_box)

    def cycles(self) -> vass.CycleLimits:
        return vass.CycleLimits(explore_nodes=self.explore_nodes,
                                max_cycle_len=self.max_cycle_len,
                                max_cycles=self.max_cycles)


class _Prepared:
    """Query compiled against one extended graph: automata, dimensions and
    resolved bounds, reusable across node instantiations."""

    def __init__(self, q: Query, gx: ExtendedGraph):
        self.query = q
        self.gx = gx
        self.nfas = [(pad_extend(nfa_compile(r)), regex_variables(r))
                     for r in q.regular_constraints]
        self.prev_vars = set()
        for r in q.regular_constraints:
            self.prev_vars |= _offset_minus_vars(r)
        self.dim_terms: List[Tuple[Tuple[int, str, Tuple[str, ...]], ...]] = []
        self.bounds: List = []
        for ac in q.arithmetical_constraints:
            self.dim_terms.append(tuple(
                (coef, atom.labelling, atom.vars) for coef, atom in ac.terms))
            self.bounds.append(_resolve_bound(ac.bound, gx))
        self.node_vars = q.node_vars()
        self.pc_by_var: Dict[str, List] = {}
        for pc in q.path_constraints:
            self.pc_by_var.setdefault(pc.path, []).append(pc)
        coerced = q.coerced_node_vars()
        self.slot_vars = list(q.select_paths) \
            + sorted(coerced) \
            + list(q.quantified_paths())

    def core(self, env: Dict[str, object], bound_paths: Dict[str, Tuple],
             free_vars: Sequence[str]) -> CompiledCore:
        free = set(free_vars)
        slots = []
        index: Dict[str, int] = {}
        for var in self.slot_vars:
            constraints = tuple(
                (env[pc.source], env[pc.target], pc.edge_labelling)
                for pc in self.pc_by_var.get(var, ()))
            if var in free:
                path = None
            elif var in bound_paths:
                path = tuple(bound_paths[var])
            else:  # coerced node variable: a one-node path
                path = (env[var],)
            index[var] = len(slots)
            slots.append(SlotSpec(var, path, constraints,
                                  var in self.prev_vars))
        # a regex mentioning no position variables constrains all paths
        every = tuple(range(len(slots)))
        nfas = tuple((nfa, tuple(index[v] for v in variables) or every)
                     for nfa, variables in self.nfas)
        dims = tuple(DimSpec(tuple((coef, lab, tuple(index[v] for v in vars_))
                                   for coef, lab, vars_ in terms))
                     for terms in self.dim_terms)
        return CompiledCore(tuple(slots), nfas, dims)


def _offset_minus_vars(regex) -> set:
    from .model import RLetter, RStar
    out = set()

    def walk(node):
        if isinstance(node, RLetter):
            for ref in letter_refs(node):
                if ref.offset == -1:
                    out.add(ref.var)
        elif isinstance(node, RStar):
            walk(node.inner)
        else:
            for part in node.parts:
                walk(part)

    walk(regex)
    return out


def _resolve_bound(bound, gx):
    if isinstance(bound, BoundConst):
        return bound.value
    value = gx.lookup(bound.name, ())
    return ext_add(ext_mul(bound.sign, value), bound.offset)


class Engine:
    def __init__(self, limits: Optional[EngineLimits] = None):
        self.limits = limits or EngineLimits()
        self._depth = 0

    # -- public API -------------------------------------------------------------

    def holds(self, q: Query, g, nodes: Sequence = (), paths: Sequence = ()) -> bool:
        """Does the query hold at the given selected-variable instantiation?"""
        require_valid(q, g.schema())
        return self.holds_on(q, g, tuple(nodes), tuple(paths))

    def answers(self, q: Query, g, max_witness_len: Optional[int] = None):
        """All selected-node tuples with one decoded witness each.

        Returns (set of (node tuple, witness path tuple), complete flag);
        the flag drops when some instantiation stayed inconclusive.
        """
        require_valid(q, g.schema())
        gx = extend(g, q.ontologies, engine=self)
        prepared = _Prepared(q, gx)
        complete = True
        out = set()
        n_sel = len(q.select_nodes)
        for sel in iproduct(g.real_nodes, repeat=n_sel):
            found, ok = self._find_answer(prepared, dict(zip(q.select_nodes, sel)),
                                          max_witness_len)
            complete = complete and ok
            if found is not None:
                out.add((tuple(sel), found))
        return out, complete

    def extremal(self, labelling: str, q: Query, g, bindings: Dict[str, object],
                 direction: str):
        """Extremum of `labelling` summed over the single selected path."""
        require_valid(q, g.schema())
        if len(q.select_paths) != 1:
            raise ArityMismatch("extremal requires exactly one selected path")
        return self.extremal_on(labelling, q, g, bindings, direction)

    # -- internal recursion points (used by ontology terms) ---------------------

    def holds_on(self, q: Query, g, nodes: Tuple, paths: Tuple) -> bool:
        if len(nodes) != len(q.select_nodes):
            raise ArityMismatch(
                f"{len(q.select_nodes)} selected nodes, got {len(nodes)}")
        if len(paths) != len(q.select_paths):
            raise ArityMismatch(
                f"{len(q.select_paths)} selected paths, got {len(paths)}")
        self._enter()
        try:
            gx = extend(g, q.ontologies, engine=self)
            prepared = _Prepared(q, gx)
            bound = dict(zip(q.select_paths, map(tuple, paths)))
            base_env = dict(zip(q.select_nodes, nodes))
            exhausted = False
            for env in self._environments(prepared, base_env):
                core = prepared.core(env, bound, prepared.query.quantified_paths())
                oracle = build(core, gx)
                try:
                    if not vass.emptiness(oracle, prepared.bounds,
                                          self.limits.search()):
                        return True
                except BoundExhausted:
                    exhausted = True
            if exhausted:
                raise BoundExhausted("query evaluation inconclusive")
            return False
        finally:
            self._leave()

    def extremal_on(self, labelling: str, q: Query, g,
                    bindings: Dict[str, object], direction: str):
        self._enter()
        try:
            gx = extend(g, q.ontologies, engine=self)
            if gx.arity_of(labelling) != 1:
                raise ArityMismatch(
                    f"path extremum needs a unary labelling, got {labelling!r}")
            prepared = _Prepared(q, gx)
            pathvar = q.select_paths[0]
            obj_dim = len(prepared.bounds)
            bounds = tuple(prepared.bounds) + (POS_INF,)
            best = None
            exhausted = False
            free_vars = list(q.quantified_paths()) + [pathvar]
            for env in self._environments(prepared, dict(bindings)):
                core = _with_objective(prepared.core(env, {}, free_vars),
                                       labelling, pathvar)
                oracle = build(core, gx)
                try:
                    value = vass.extremal(oracle, obj_dim, bounds, direction,
                                          self.limits.search(),
                                          self.limits.cycles())
                except BoundExhausted:
                    exhausted = True
                    continue
                if direction == "min":
                    if value is NEG_INF:
                        return NEG_INF
                    best = value if best is None else _ext_min(best, value)
                else:
                    if value is POS_INF:
                        return POS_INF
                    best = value if best is None else _ext_max(best, value)
            if exhausted:
                raise BoundExhausted("extremal evaluation inconclusive")
            if best is None:
                return POS_INF if direction == "min" else NEG_INF
            return best
        finally:
            self._leave()

    # -- helpers ---------------------------------------------------------------

    def _enter(self):
        self._depth += 1
        if self._depth > self.limits.recursion_limit:
            self._depth -= 1
            raise RecursionLimit(
                f"nested evaluation deeper than {self.limits.recursion_limit}")

    def _leave(self):
        self._depth -= 1

    def _environments(self, prepared: _Prepared, base_env: Dict[str, object]):
        free = sorted(prepared.node_vars - set(base_env))
        nodes = prepared.gx.real_nodes
        if not free:
            yield dict(base_env)
            return
        for combo in iproduct(nodes, repeat=len(free)):
            env = dict(base_env)
            env.update(zip(free, combo))
            yield env

    def _find_answer(self, prepared: _Prepared, sel_env: Dict[str, object],
                     max_witness_len: Optional[int]):
        """One witness for the selected paths, or (None, conclusive flag)."""
        q = prepared.query
        free_vars = list(q.select_paths) + list(q.quantified_paths())
        exhausted = False
        for env in self._environments(prepared, sel_env):
            core = prepared.core(env, {}, free_vars)
            oracle = build(core, prepared.gx)
            try:
                decoded = vass.find_witness(oracle, prepared.bounds,
                                            self.limits.search(),
                                            max_len=max_witness_len)
            except BoundExhausted:
                exhausted = True
                continue
            if decoded is not None:
                slot_of = {s.var: i for i, s in enumerate(core.slots)}
                witness = tuple(decoded[slot_of[v]] for v in q.select_paths)
                return witness, True
        if max_witness_len is not None:
            # a bounded search that found nothing proves nothing
            return None, False
        return None, not exhausted


def _with_objective(core: CompiledCore, labelling: str, pathvar: str) -> CompiledCore:
    slot = next(i for i, s in enumerate(core.slots) if s.var == pathvar)
    dims = core.dims + (DimSpec(((1, labelling, (slot,)),)),)
    return CompiledCore(core.slots, core.nfas, dims)


def _ext_min(a, b):
    from .graph import ext_cmp
    return a if ext_cmp(a, b) <= 0 else b


def _ext_max(a, b):
    from .graph import ext_cmp
    return a if ext_cmp(a, b) >= 0 else b


DEFAULT_ENGINE = Engine()


def holds(q: Query, g, nodes: Sequence = (), paths: Sequence = ()) -> bool:
    return DEFAULT_ENGINE.holds(q, g, nodes, paths)


def answers(q: Query, g, max_witness_len: Optional[int] = None):
    return DEFAULT_ENGINE.answers(q, g, max_witness_len)


def extremal(labelling: str, q: Query, g, bindings: Dict[str, object],
             direction: str):
    return DEFAULT_ENGINE.extremal(labelling, q, g, bindings, direction)
