"""Abstract syntax for queries, well-formedness checking and ontology depth.

A query selects node and path variables and constrains them with path
constraints (endpoint + edge-labelling requirements), regular constraints
(regular expressions whose letters are conjunctions of node constraints read
on synchronized path windows) and arithmetical constraints (linear sums of
per-path label aggregates against a bound).  An ontology prefix defines
auxiliary labellings by terms.

All AST nodes are frozen dataclasses, so structural equality is the
round-trip law used by the parser tests.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Tuple, Union

from .graph import SINK, ExtInt, _Sink

NC_OPS = ("<=", "<", "=", ">", ">=", "!=")
IDENTITY_OPS = ("=", "!=")


# ---------------------------------------------------------------------------
# Node constraints (letters of regular constraints)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PosRef:
    """A path position variable: previous (-1), current (0) or next (+1)."""
    var: str
    offset: int


@dataclass(frozen=True)
class NCConst:
    value: ExtInt


@dataclass(frozen=True)
class NCLabel:
    name: str
    refs: Tuple[PosRef, ...]


@dataclass(frozen=True)
class NCSink:
    """The sink node as a comparison operand (node identity only)."""


NCValue = Union[NCConst, NCLabel, PosRef, NCSink]


@dataclass(frozen=True)
class Top:
    pass


@dataclass(frozen=True)
class Compare:
    lhs: NCValue
    op: str
    rhs: NCValue


NodeConstraint = Union[Top, Compare]


# ---------------------------------------------------------------------------
# Regular constraints
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RLetter:
    conjuncts: Tuple[NodeConstraint, ...]


@dataclass(frozen=True)
class RConcat:
    parts: Tuple["Regex", ...]


@dataclass(frozen=True)
class RAlt:
    parts: Tuple["Regex", ...]


@dataclass(frozen=True)
class RStar:
    inner: "Regex"


Regex = Union[RLetter, RConcat, RAlt, RStar]


def _value_refs(v: NCValue) -> Iterable[PosRef]:
    if isinstance(v, PosRef):
        yield v
    elif isinstance(v, NCLabel):
        yield from v.refs


def letter_refs(letter: RLetter) -> Iterable[PosRef]:
    for nc in letter.conjuncts:
        if isinstance(nc, Compare):
            yield from _value_refs(nc.lhs)
            yield from _value_refs(nc.rhs)


def regex_variables(r: Regex) -> Tuple[str, ...]:
    """Path variables mentioned by a regex, in first-appearance order."""
    seen: dict = {}

    def walk(node: Regex):
        if isinstance(node, RLetter):
            for ref in letter_refs(node):
                seen.setdefault(ref.var, None)
        elif isinstance(node, RStar):
            walk(node.inner)
        else:
            for part in node.parts:
                walk(part)

    walk(r)
    return tuple(seen)


# ---------------------------------------------------------------------------
# Path and arithmetical constraints
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PathConstraint:
    source: str
    path: str
    target: str
    edge_labelling: str


@dataclass(frozen=True)
class Atom:
    """An arithmetical atom: a labelling applied positionwise to paths."""
    labelling: str
    vars: Tuple[str, ...]


@dataclass(frozen=True)
class BoundConst:
    value: ExtInt


@dataclass(frozen=True)
class BoundLabel:
    """sign * <parameterless labelling>() + offset."""
    name: str
    sign: int = 1
    offset: int = 0


Bound = Union[BoundConst, BoundLabel]


@dataclass(frozen=True)
class ArithConstraint:
    """Canonical form: sum of coefficient-weighted atoms <= bound."""
    terms: Tuple[Tuple[int, Atom], ...]
    bound: Bound


# ---------------------------------------------------------------------------
# Ontology terms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TConst:
    value: ExtInt


@dataclass(frozen=True)
class TLabel:
    name: str
    vars: Tuple[str, ...]


@dataclass(frozen=True)
class TIdent:
    """Node identity test; operands are parameter names or the sink."""
    left: Union[str, _Sink]
    right: Union[str, _Sink]


@dataclass(frozen=True)
class TSubquery:
    query: "Query"


@dataclass(frozen=True)
class TPathExtremum:
    direction: str  # "min" | "max"
    labelling: str
    pathvar: str
    query: "Query"


@dataclass(frozen=True)
class TApply:
    fn: str
    args: Tuple["Term", ...]


@dataclass(frozen=True)
class TAggregate:
    fn: str
    var: str
    element: "Term"
    filter: "Term"


Term = Union[TConst, TLabel, TIdent, TSubquery, TPathExtremum, TApply, TAggregate]


@dataclass(frozen=True)
class OntologyDef:
    name: str
    params: Tuple[str, ...]
    body: Term


@dataclass(frozen=True)
class Query:
    ontologies: Tuple[OntologyDef, ...] = ()
    select_nodes: Tuple[str, ...] = ()
    select_paths: Tuple[str, ...] = ()
    path_constraints: Tuple[PathConstraint, ...] = ()
    regular_constraints: Tuple[Regex, ...] = ()
    arithmetical_constraints: Tuple[ArithConstraint, ...] = ()

    # -- variable bookkeeping ------------------------------------------------

    def node_vars(self) -> set:
        """Variables known to denote nodes."""
        out = set(self.select_nodes)
        for pc in self.path_constraints:
            out.add(pc.source)
            out.add(pc.target)
        return out

    def mentioned_path_position_vars(self) -> set:
        out = set()
        for r in self.regular_constraints:
            out.update(regex_variables(r))
        for ac in self.arithmetical_constraints:
            for _, atom in ac.terms:
                out.update(atom.vars)
        return out

    def path_vars(self) -> set:
        """Variables denoting paths proper (coerced node variables excluded)."""
        out = set(self.select_paths)
        nodes = self.node_vars()
        for pc in self.path_constraints:
            if pc.path not in nodes:
                out.add(pc.path)
        for v in self.mentioned_path_position_vars():
            if v not in nodes:
                out.add(v)
        return out

    def coerced_node_vars(self) -> set:
        """Node variables used in path positions (length-1 path coercion)."""
        used = self.mentioned_path_position_vars()
        used.update(pc.path for pc in self.path_constraints)
        return used & self.node_vars()

    def quantified_nodes(self) -> Tuple[str, ...]:
        return tuple(sorted(self.node_vars() - set(self.select_nodes)))

    def quantified_paths(self) -> Tuple[str, ...]:
        return tuple(sorted(self.path_vars() - set(self.select_paths)))


def free_variables(q: Query) -> Tuple[set, set]:
    """Free variables are exactly the selected ones."""
    return set(q.select_nodes), set(q.select_paths)


# ---------------------------------------------------------------------------
# Labelling references (for ontology depth and validation)
# ---------------------------------------------------------------------------

def term_label_refs(t: Term) -> set:
    out: set = set()
    if isinstance(t, TLabel):
        out.add(t.name)
    elif isinstance(t, TApply):
        for a in t.args:
            out |= term_label_refs(a)
    elif isinstance(t, TAggregate):
        out |= term_label_refs(t.element)
        out |= term_label_refs(t.filter)
    elif isinstance(t, TSubquery):
        out |= query_label_refs(t.query)
    elif isinstance(t, TPathExtremum):
        out.add(t.labelling)
        out |= query_label_refs(t.query)
    return out


def query_label_refs(q: Query) -> set:
    out: set = set()
    local = set()
    for d in q.ontologies:
        out |= term_label_refs(d.body) - local
        local.add(d.name)
    for pc in q.path_constraints:
        if pc.edge_labelling not in local:
            out.add(pc.edge_labelling)
    for r in q.regular_constraints:
        out |= _regex_label_refs(r) - local
    for ac in q.arithmetical_constraints:
        for _, atom in ac.terms:
            if atom.labelling not in local:
                out.add(atom.labelling)
        if isinstance(ac.bound, BoundLabel) and ac.bound.name not in local:
            out.add(ac.bound.name)
    return out


def _regex_label_refs(r: Regex) -> set:
    out: set = set()
    if isinstance(r, RLetter):
        for nc in r.conjuncts:
            if isinstance(nc, Compare):
                for v in (nc.lhs, nc.rhs):
                    if isinstance(v, NCLabel):
                        out.add(v.name)
    elif isinstance(r, RStar):
        out |= _regex_label_refs(r.inner)
    else:
        for part in r.parts:
            out |= _regex_label_refs(part)
    return out


def depth(defs: Iterable[OntologyDef]) -> int:
    """Edges on the longest chain of the depends-on dag."""
    defs = list(defs)
    index = {d.name: i for i, d in enumerate(defs)}
    best = 0
    chain = [0] * len(defs)
    for i, d in enumerate(defs):
        deps = [index[n] for n in term_label_refs(d.body)
                if n in index and index[n] < i]
        chain[i] = 1 + max((chain[j] for j in deps), default=-1)
        best = max(best, chain[i])
    return best


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str

    def __str__(self):
        return f"{self.code}: {self.message}"


class _Validator:
    def __init__(self, schema):
        self.schema = dict(schema)  # name -> arity
        self.out: list = []

    def error(self, code, message):
        self.out.append(Diagnostic(code, message))

    # -- terms ---------------------------------------------------------------

    def check_term(self, t: Term, params: set, scope: dict):
        from .terms import AGGREGATE_FUNCTIONS, KNOWN_FUNCTIONS, function_arity
        if isinstance(t, TConst):
            return
        if isinstance(t, TLabel):
            arity = scope.get(t.name)
            if arity is None:
                self.error("UnknownLabelling", f"labelling {t.name!r} not in scope")
            elif arity != len(t.vars):
                self.error("ArityMismatch",
                           f"labelling {t.name!r} has arity {arity}, "
                           f"applied to {len(t.vars)} variables")
            for v in t.vars:
                if v not in params:
                    self.error("UnknownVariable",
                               f"variable {v!r} not bound in ontology definition")
        elif isinstance(t, TIdent):
            for side in (t.left, t.right):
                if side is not SINK and side not in params:
                    self.error("UnknownVariable",
                               f"variable {side!r} not bound in identity test")
        elif isinstance(t, TApply):
            if t.fn not in KNOWN_FUNCTIONS:
                self.error("UnknownFunction", f"function {t.fn!r} not registered")
            else:
                arity = function_arity(t.fn)
                if arity is not None and arity != len(t.args):
                    self.error("ArityMismatch",
                               f"function {t.fn!r} expects {arity} arguments")
            for a in t.args:
                self.check_term(a, params, scope)
        elif isinstance(t, TAggregate):
            if t.fn not in AGGREGATE_FUNCTIONS:
                self.error("UnknownFunction",
                           f"{t.fn!r} is not an aggregate function")
            if t.var in params:
                self.error("ShadowedVariable",
                           f"aggregate variable {t.var!r} shadows a parameter")
            self.check_term(t.element, {t.var}, scope)
            self.check_term(t.filter, params | {t.var}, scope)
        elif isinstance(t, TSubquery):
            q = t.query
            if q.select_paths:
                self.error("FreePathInSubquery",
                           "truth subqueries must not select path variables")
            for v in q.select_nodes:
                if v not in params:
                    self.error("UnknownVariable",
                               f"subquery selects {v!r}, not bound outside")
            self.check_query(q, scope)
        elif isinstance(t, TPathExtremum):
            q = t.query
            arity = scope.get(t.labelling)
            if arity is None:
                self.error("UnknownLabelling",
                           f"labelling {t.labelling!r} not in scope")
            elif arity != 1:
                self.error("ArityMismatch",
                           f"path extremum needs a unary labelling, "
                           f"{t.labelling!r} has arity {arity}")
            if len(q.select_paths) != 1 or q.select_paths[0] != t.pathvar:
                self.error("FreePathInSubquery",
                           "extremum subquery must select exactly the bound path")
            for v in q.select_nodes:
                if v not in params:
                    self.error("UnknownVariable",
                               f"extremum subquery selects {v!r}, not bound outside")
            self.check_query(q, scope)
        else:
            self.error("UnknownTerm", f"unhandled term {t!r}")

    # -- node constraints ----------------------------------------------------

    def check_letter(self, letter: RLetter):
        if not letter.conjuncts:
            self.error("EmptyLetter", "letter with no conjuncts")
        for nc in letter.conjuncts:
            if isinstance(nc, Top):
                continue
            node_sides = [isinstance(v, (PosRef, NCSink)) for v in (nc.lhs, nc.rhs)]
            if any(node_sides):
                if not all(node_sides):
                    self.error("MixedComparison",
                               "node identity compared against a value")
                if nc.op not in IDENTITY_OPS:
                    self.error("BadIdentityOp",
                               f"node identity supports = and != only, got {nc.op!r}")
            if nc.op not in NC_OPS:
                self.error("BadOperator", f"unknown operator {nc.op!r}")
            for v in (nc.lhs, nc.rhs):
                self.check_ncvalue(v)

    def check_ncvalue(self, v: NCValue):
        if isinstance(v, NCLabel):
            arity = self.scope.get(v.name)
            if arity is None:
                self.error("UnknownLabelling", f"labelling {v.name!r} not in scope")
            elif arity != len(v.refs):
                self.error("ArityMismatch",
                           f"labelling {v.name!r} has arity {arity}, "
                           f"applied to {len(v.refs)} positions")
            for ref in v.refs:
                self.check_ref(ref)
        elif isinstance(v, PosRef):
            self.check_ref(v)

    def check_ref(self, ref: PosRef):
        if ref.offset not in (-1, 0, 1):
            self.error("BadOffset", f"offset {ref.offset} not in -1/0/+1")

    # -- whole query ----------------------------------------------------------

    def check_query(self, q: Query, outer_scope: dict):
        scope = dict(outer_scope)
        for d in q.ontologies:
            if d.name in scope:
                self.error("DuplicateLabelling",
                           f"labelling {d.name!r} already defined")
            if len(set(d.params)) != len(d.params):
                self.error("DuplicateParameter",
                           f"definition {d.name!r} repeats a parameter")
            self.scope = scope
            self.check_term(d.body, set(d.params), scope)
            scope[d.name] = len(d.params)
        self.scope = scope

        if set(q.select_nodes) & set(q.select_paths):
            self.error("DuplicateVariable",
                       "a variable is selected both as node and as path")
        for lst in (q.select_nodes, q.select_paths):
            if len(set(lst)) != len(lst):
                self.error("DuplicateVariable", "repeated variable in SELECT")

        for pc in q.path_constraints:
            arity = scope.get(pc.edge_labelling)
            if arity is None:
                self.error("UnknownLabelling",
                           f"edge labelling {pc.edge_labelling!r} not in scope")
            elif arity != 2:
                self.error("ArityMismatch",
                           f"edge labelling {pc.edge_labelling!r} must be binary")
            if pc.path in (pc.source, pc.target):
                self.error("DuplicateVariable",
                           f"path variable {pc.path!r} reused as endpoint")

        for r in q.regular_constraints:
            self._walk_regex(r)

        for ac in q.arithmetical_constraints:
            if not ac.terms:
                self.error("EmptyConstraint",
                           "arithmetical constraint with no atoms")
            for coef, atom in ac.terms:
                arity = scope.get(atom.labelling)
                if arity is None:
                    self.error("UnknownLabelling",
                               f"labelling {atom.labelling!r} not in scope")
                elif arity != len(atom.vars):
                    self.error("ArityMismatch",
                               f"atom {atom.labelling!r} has arity {arity}, "
                               f"applied to {len(atom.vars)} paths")
            if isinstance(ac.bound, BoundLabel):
                arity = scope.get(ac.bound.name)
                if arity is None:
                    self.error("UnknownLabelling",
                               f"bound labelling {ac.bound.name!r} not in scope")
                elif arity != 0:
                    self.error("ArityMismatch",
                               f"bound labelling {ac.bound.name!r} must be "
                               "parameterless")

    def _walk_regex(self, r: Regex):
        if isinstance(r, RLetter):
            self.check_letter(r)
        elif isinstance(r, RStar):
            self._walk_regex(r.inner)
        else:
            if not r.parts:
                self.error("EmptyRegex", "empty concatenation/alternation")
            for part in r.parts:
                self._walk_regex(part)


def validate(q: Query, schema) -> list:
    """Check arities, scoping and ontology ordering.

    Returns a list of diagnostics; empty means the query is well-formed.
    `schema` is an iterable of (labelling name, arity) pairs.
    """
    v = _Validator(schema)
    v.scope = dict(v.schema)
    v.check_query(q, v.schema)
    return v.out


def require_valid(q: Query, schema) -> None:
    from .errors import ValidationFailed
    diags = validate(q, schema)
    if diags:
        raise ValidationFailed(diags)
