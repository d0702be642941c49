"""Concrete textual syntax: tokenizer, macro expansion and parser.

The grammar is documented in GRAMMAR.md at the repository root.  Macros are
non-recursive textual substitutions declared on `DEF` lines before the query.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import List, Optional, Tuple

from .errors import MacroError, QuerySyntaxError
from .graph import NEG_INF, POS_INF, SINK
from .model import (
    ArithConstraint,
    Atom,
    BoundConst,
    BoundLabel,
    Compare,
    NCConst,
    NCLabel,
    NCSink,
    OntologyDef,
    PathConstraint,
    PosRef,
    Query,
    RAlt,
    RConcat,
    RLetter,
    RStar,
    TAggregate,
    TApply,
    TConst,
    TIdent,
    TLabel,
    TPathExtremum,
    TSubquery,
    Top,
)
from .terms import AGGREGATE_FUNCTIONS, SCALAR_FUNCTIONS

KEYWORDS = {
    "LET", "IN", "SELECT", "NODES", "PATHS", "SUCH", "THAT", "WHERE",
    "HAVING", "AND", "TOP", "SINK", "DEF", "minpath", "maxpath",
}

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+|\#[^\n]*)
  | (?P<arrow>-\[)
  | (?P<close_arrow>\]->)
  | (?P<assign>:=)
  | (?P<op><=|>=|!=|=>|[<>=])
  | (?P<at>@[+-]?\d+)
  | (?P<num>-?\d+)
  | (?P<inf>[+-]inf\b)
  | (?P<name>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<sym>[()\[\]{},:*+.&|-])
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> List[Token]:
    tokens = []
    line, col = 1, 1
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise QuerySyntaxError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        value = m.group()
        if kind != "ws":
            tokens.append(Token(kind, value, line, col))
        newlines = value.count("\n")
        if newlines:
            line += newlines
            col = len(value) - value.rfind("\n")
        else:
            col += len(value)
        pos = m.end()
    tokens.append(Token("eof", "", line, col))
    return tokens


# ---------------------------------------------------------------------------
# Macros: pure textual substitution
# ---------------------------------------------------------------------------

_DEF_RE = re.compile(r"^\s*DEF\s+([A-Za-z_][A-Za-z0-9_']*)\s*\(([^)]*)\)\s*=\s*(.*)$")


def split_macros(text: str) -> Tuple[dict, str, int]:
    """Strip leading DEF lines; returns (macros, remaining text, line offset)."""
    macros = {}
    lines = text.split("\n")
    idx = 0
    while idx < len(lines):
        stripped = lines[idx].strip()
        if not stripped or stripped.startswith("#"):
            idx += 1
            continue
        m = _DEF_RE.match(lines[idx])
        if not m:
            break
        name, params, body = m.group(1), m.group(2), m.group(3)
        params = tuple(p.strip() for p in params.split(",")) if params.strip() else ()
        if name in macros:
            raise MacroError(f"macro {name!r} defined twice")
        macros[name] = (params, body.strip())
        idx += 1
    return macros, "\n".join(lines[idx:]), idx


def _split_args(s: str) -> List[str]:
    args, depth, cur = [], 0, []
    for ch in s:
        if ch in "([{":
            depth += 1
        elif ch in ")]}":
            depth -= 1
        if ch == "," and depth == 0:
            args.append("".join(cur).strip())
            cur = []
        else:
            cur.append(ch)
    tail = "".join(cur).strip()
    if tail or args:
        args.append(tail)
    return args


def expand_macros(text: str, macros: dict, depth: int = 0) -> str:
    if not macros:
        return text
    if depth > 32:
        raise MacroError("macro expansion too deep (recursive macro?)")
    pattern = re.compile(
        r"\b(" + "|".join(re.escape(n) for n in macros) + r")\s*\(")
    out = []
    pos = 0
    changed = False
    while True:
        m = pattern.search(text, pos)
        if not m:
            out.append(text[pos:])
            break
        name = m.group(1)
        out.append(text[pos:m.start()])
        # find the matching close paren
        depth_p = 1
        i = m.end()
        while i < len(text) and depth_p:
            if text[i] == "(":
                depth_p += 1
            elif text[i] == ")":
                depth_p -= 1
            i += 1
        if depth_p:
            raise MacroError(f"unbalanced parentheses in use of macro {name!r}")
        raw_args = text[m.end():i - 1]
        args = _split_args(raw_args) if raw_args.strip() else []
        params, body = macros[name]
        if len(args) != len(params):
            raise MacroError(
                f"macro {name!r} expects {len(params)} arguments, got {len(args)}")
        expansion = body
        for p, a in sorted(zip(params, args), key=lambda pa: -len(pa[0])):
            expansion = re.sub(rf"\b{re.escape(p)}\b", a, expansion)
        out.append("(" + expansion + ")" if _needs_parens(expansion) else expansion)
        pos = i
        changed = True
    result = "".join(out)
    if changed:
        return expand_macros(result, macros, depth + 1)
    return result


def _needs_parens(s: str) -> bool:
    # regex-level macro bodies keep grouping; letter-level bodies are "<...>"
    s = s.strip()
    return not (s.startswith("(") or s.startswith("<"))


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

class _Parser:
    def __init__(self, tokens: List[Token]):
        self.tokens = tokens
        self.pos = 0

    # -- primitives -----------------------------------------------------------

    @property
    def cur(self) -> Token:
        return self.tokens[self.pos]

    def error(self, message: str):
        raise QuerySyntaxError(message, self.cur.line, self.cur.col)

    def advance(self) -> Token:
        tok = self.cur
        self.pos += 1
        return tok

    def at_name(self, text: Optional[str] = None) -> bool:
        tok = self.cur
        return tok.kind == "name" and (text is None or tok.text == text)

    def at_sym(self, text: str) -> bool:
        tok = self.cur
        return tok.kind in ("sym", "op", "arrow", "close_arrow", "assign") \
            and tok.text == text

    def eat_name(self, text: str):
        if not self.at_name(text):
            self.error(f"expected {text!r}")
        return self.advance()

    def eat_sym(self, text: str):
        if not self.at_sym(text):
            self.error(f"expected {text!r}")
        return self.advance()

    def ident(self) -> str:
        if self.cur.kind != "name":
            self.error("expected an identifier")
        if self.cur.text in KEYWORDS:
            self.error(f"keyword {self.cur.text!r} cannot be used as a name")
        return self.advance().text

    # -- query ----------------------------------------------------------------

    def query(self) -> Query:
        ontologies: list = []
        if self.at_name("LET"):
            self.advance()
            ontologies.append(self.ontology_def())
            while self.at_sym(","):
                self.advance()
                ontologies.append(self.ontology_def())
            self.eat_name("IN")
        self.eat_name("SELECT")
        select_nodes: Tuple[str, ...] = ()
        select_paths: Tuple[str, ...] = ()
        if self.at_sym("("):
            self.advance()
            self.eat_sym(")")
        else:
            if self.at_name("NODES"):
                self.advance()
                select_nodes = self.var_list()
                if self.at_sym(","):
                    self.advance()
            if self.at_name("PATHS"):
                self.advance()
                select_paths = self.var_list()
        path_constraints: list = []
        if self.at_name("SUCH"):
            self.advance()
            self.eat_name("THAT")
            path_constraints.append(self.path_constraint())
            while self.at_name("AND"):
                self.advance()
                path_constraints.append(self.path_constraint())
        regular: list = []
        if self.at_name("WHERE"):
            self.advance()
            regular.append(self.regex_alt())
            while self.at_name("AND"):
                self.advance()
                regular.append(self.regex_alt())
        arith: list = []
        if self.at_name("HAVING"):
            self.advance()
            arith.extend(self.arith_constraint())
            while self.at_name("AND"):
                self.advance()
                arith.extend(self.arith_constraint())
        return Query(
            ontologies=tuple(ontologies),
            select_nodes=select_nodes,
            select_paths=select_paths,
            path_constraints=tuple(path_constraints),
            regular_constraints=tuple(regular),
            arithmetical_constraints=tuple(arith),
        )

    def var_list(self) -> Tuple[str, ...]:
        out = [self.ident()]
        while self.at_sym(",") and self.tokens[self.pos + 1].kind == "name" \
                and self.tokens[self.pos + 1].text not in ("PATHS",):
            self.advance()
            out.append(self.ident())
        return tuple(out)

    def ontology_def(self) -> OntologyDef:
        name = self.ident()
        self.eat_sym("(")
        params: list = []
        if not self.at_sym(")"):
            params.append(self.ident())
            while self.at_sym(","):
                self.advance()
                params.append(self.ident())
        self.eat_sym(")")
        self.eat_sym(":=")
        body = self.term()
        return OntologyDef(name, tuple(params), body)

    # -- path constraints -------------------------------------------------------

    def path_constraint(self) -> PathConstraint:
        source = self.ident()
        if not self.at_sym("-["):
            self.error("expected '-[' in path constraint")
        self.advance()
        path = self.ident()
        if not self.at_sym("]->"):
            self.error("expected ']->' in path constraint")
        self.advance()
        target = self.ident()
        self.eat_sym(":")
        edge = self.ident()
        return PathConstraint(source, path, target, edge)

    # -- regular constraints ------------------------------------------------------

    def regex_alt(self):
        parts = [self.regex_concat()]
        while self.at_sym("+"):
            self.advance()
            parts.append(self.regex_concat())
        return parts[0] if len(parts) == 1 else RAlt(tuple(parts))

    def regex_concat(self):
        parts = [self.regex_star()]
        while True:
            if self.at_sym("."):
                self.advance()
                parts.append(self.regex_star())
            elif self.at_sym("(") or self.at_sym("<"):
                parts.append(self.regex_star())
            else:
                break
        return parts[0] if len(parts) == 1 else RConcat(tuple(parts))

    def regex_star(self):
        node = self.regex_primary()
        while self.at_sym("*"):
            self.advance()
            node = RStar(node)
        return node

    def regex_primary(self):
        if self.at_sym("("):
            self.advance()
            node = self.regex_alt()
            self.eat_sym(")")
            return node
        if self.at_sym("<"):
            return self.letter()
        self.error("expected a letter or a parenthesized expression")

    def letter(self) -> RLetter:
        self.eat_sym("<")
        conjuncts: list = []
        while True:
            conjuncts.append(self.node_constraint())
            if self.at_sym("&"):
                self.advance()
                if self.at_sym("&"):
                    self.advance()
                continue
            break
        self.eat_sym(">")
        return RLetter(tuple(conjuncts))

    def node_constraint(self):
        if self.at_name("TOP"):
            self.advance()
            return Top()
        lhs = self.nc_value()
        is_cmp = self.cur.kind == "op" and \
            self.cur.text in ("<=", "<", "=", ">", ">=", "!=")
        if is_cmp and self.cur.text == ">" \
                and not self._starts_nc_value(self.tokens[self.pos + 1]):
            is_cmp = False  # the '>' closes the letter
        if not is_cmp:
            # bare labelling application: sugar for "... != 0"
            if isinstance(lhs, NCLabel):
                return Compare(lhs, "!=", NCConst(0))
            self.error("expected a comparison operator")
        op = self.advance().text
        rhs = self.nc_value()
        return Compare(lhs, op, rhs)

    @staticmethod
    def _starts_nc_value(tok: Token) -> bool:
        if tok.kind in ("num", "inf"):
            return True
        return tok.kind == "name" and (tok.text == "SINK"
                                       or tok.text not in KEYWORDS)

    def nc_value(self):
        tok = self.cur
        if tok.kind == "num":
            self.advance()
            return NCConst(int(tok.text))
        if tok.kind == "inf":
            self.advance()
            return NCConst(POS_INF if tok.text[0] == "+" else NEG_INF)
        if tok.kind == "name":
            if tok.text == "SINK":
                self.advance()
                return NCSink()
            name = self.ident()
            if self.at_sym("("):
                self.advance()
                refs: list = []
                if not self.at_sym(")"):
                    refs.append(self.pos_ref())
                    while self.at_sym(","):
                        self.advance()
                        refs.append(self.pos_ref())
                self.eat_sym(")")
                return NCLabel(name, tuple(refs))
            if self.cur.kind == "at":
                return self.finish_pos_ref(name)
            self.error("expected '(' or '@' after name in node constraint")
        self.error("expected a node-constraint value")

    def pos_ref(self) -> PosRef:
        name = self.ident()
        return self.finish_pos_ref(name)

    def finish_pos_ref(self, name: str) -> PosRef:
        if self.cur.kind != "at":
            self.error(f"expected '@offset' after {name!r}")
        offset = int(self.advance().text[1:])
        if offset not in (-1, 0, 1):
            self.error("position offset must be -1, 0 or +1")
        return PosRef(name, offset)

    # -- arithmetical constraints ---------------------------------------------

    def arith_constraint(self) -> List[ArithConstraint]:
        terms = [self.arith_term()]
        while self.cur.kind in ("sym", "num") and (
                self.at_sym("+") or self.at_sym("-") or self.cur.kind == "num"):
            if self.at_sym("+"):
                self.advance()
                terms.append(self.arith_term())
            elif self.at_sym("-"):
                self.advance()
                coef, atom = self.arith_term()
                terms.append((-coef, atom))
            else:  # a signed number starts the next term
                coef, atom = self.arith_term()
                terms.append((coef, atom))
        if self.cur.kind != "op" or self.cur.text not in ("<=", "<", "=", ">", ">="):
            self.error("expected <=, <, =, > or >= in arithmetical constraint")
        op = self.advance().text
        sign, offset, base = self.bound()
        return _normalize_arith(tuple(terms), op, sign, offset, base)

    def arith_term(self) -> Tuple[int, Atom]:
        coef = 1
        if self.at_sym("-"):
            self.advance()
            coef = -1
        if self.cur.kind == "num":
            coef *= int(self.advance().text)
            if self.at_sym("*"):
                self.advance()
        name = self.ident()
        self.eat_sym("[")
        vars_ = [self.ident()]
        while self.at_sym(","):
            self.advance()
            vars_.append(self.ident())
        self.eat_sym("]")
        return coef, Atom(name, tuple(vars_))

    def bound(self):
        """Returns (sign, offset, base) with base int | infinity | name."""
        sign = 1
        if self.at_sym("-"):
            self.advance()
            sign = -1
        tok = self.cur
        if tok.kind == "num":
            self.advance()
            base = sign * int(tok.text)
            sign = 1
        elif tok.kind == "inf":
            self.advance()
            val = POS_INF if tok.text[0] == "+" else NEG_INF
            base = val if sign > 0 else -val
            sign = 1
        elif tok.kind == "name":
            name = self.ident()
            self.eat_sym("(")
            self.eat_sym(")")
            base = name
        else:
            self.error("expected a bound (integer, infinity or labelling())")
        offset = 0
        if self.at_sym("+") or self.at_sym("-"):
            neg = self.at_sym("-")
            self.advance()
            if self.cur.kind != "num":
                self.error("expected an integer offset after bound")
            offset = int(self.advance().text)
            if neg:
                offset = -offset
        return sign, offset, base

    # -- terms -------------------------------------------------------------------

    def term(self):
        return self.term_compare()

    def term_compare(self):
        lhs = self.term_sum()
        if self.cur.kind == "op" and self.cur.text in ("<=", "<", "=", ">", ">=", "!="):
            op = self.advance().text
            rhs = self.term_sum()
            return _make_comparison(lhs, op, rhs, self)
        return lhs

    def term_sum(self):
        node = self.term_product()
        while self.at_sym("+") or self.at_sym("-"):
            op = self.advance().text
            rhs = self.term_product()
            node = TApply("add" if op == "+" else "sub", (node, rhs))
        return node

    def term_product(self):
        node = self.term_atom()
        while self.at_sym("*"):
            self.advance()
            node = TApply("mul", (node, self.term_atom()))
        return node

    def term_atom(self):
        tok = self.cur
        if tok.kind == "num":
            self.advance()
            return TConst(int(tok.text))
        if tok.kind == "inf":
            self.advance()
            return TConst(POS_INF if tok.text[0] == "+" else NEG_INF)
        if self.at_sym("("):
            self.advance()
            node = self.term_compare()
            self.eat_sym(")")
            return node
        if self.at_sym("["):
            self.advance()
            q = self.query()
            self.eat_sym("]")
            return TSubquery(q)
        if tok.kind == "name":
            if tok.text == "SINK":
                self.advance()
                return _VarRef("SINK")
            if tok.text == "TOP":
                self.advance()
                return TConst(1)
            if tok.text in ("minpath", "maxpath"):
                direction = "min" if tok.text == "minpath" else "max"
                self.advance()
                self.eat_sym("(")
                lab = self.ident()
                self.eat_sym(",")
                pvar = self.ident()
                self.eat_sym(",")
                self.eat_sym("[")
                q = self.query()
                self.eat_sym("]")
                self.eat_sym(")")
                return TPathExtremum(direction, lab, pvar, q)
            if (tok.text in SCALAR_FUNCTIONS or tok.text in AGGREGATE_FUNCTIONS) \
                    and self.tokens[self.pos + 1].text == "(":
                name = self.advance().text
            else:
                name = self.ident()
            if self.at_sym("("):
                self.advance()
                if name in AGGREGATE_FUNCTIONS and self.at_sym("{"):
                    node = self.aggregate(name)
                    self.eat_sym(")")
                    return node
                args: list = []
                if not self.at_sym(")"):
                    args.append(self.term_compare())
                    while self.at_sym(","):
                        self.advance()
                        args.append(self.term_compare())
                self.eat_sym(")")
                return self.finish_call(name, args)
            return _VarRef(name)
        self.error("expected a term")

    def aggregate(self, fn: str) -> TAggregate:
        self.eat_sym("{")
        element = self.term_compare()
        self.eat_sym(":")
        filt = self.term_compare()
        self.eat_sym("}")
        return TAggregate(fn, _AGG_VAR_PLACEHOLDER, element, filt)

    def finish_call(self, name: str, args: list):
        if name in SCALAR_FUNCTIONS or name in AGGREGATE_FUNCTIONS:
            return TApply(name, tuple(_reject_var(a, self) for a in args))
        vars_ = []
        for a in args:
            if isinstance(a, _VarRef) and a.name != "SINK":
                vars_.append(a.name)
            else:
                self.error(
                    f"labelling {name!r} takes node variables, not value terms")
        return TLabel(name, tuple(vars_))


class _VarRef:
    """Parser-internal placeholder for a bare variable in term position."""

    __slots__ = ("name",)

    def __init__(self, name):
        self.name = name


_AGG_VAR_PLACEHOLDER = "$agg"


def _reject_var(node, parser):
    if isinstance(node, _VarRef):
        parser.error(f"node variable {node.name!r} used where a value is expected")
    return node


def _make_comparison(lhs, op, rhs, parser):
    lv, rv = isinstance(lhs, _VarRef), isinstance(rhs, _VarRef)
    if lv and rv:
        if op not in ("=", "!="):
            parser.error("node identity supports = and != only")
        left = SINK if lhs.name == "SINK" else lhs.name
        right = SINK if rhs.name == "SINK" else rhs.name
        test = TIdent(left, right)
        return test if op == "=" else TApply("NOT", (test,))
    if lv or rv:
        parser.error("node variable compared against a value term")
    ops = {"<=": "le", "<": "lt", "=": "eq", ">": "gt", ">=": "ge", "!=": "ne"}
    return TApply(ops[op], (lhs, rhs))


def _resolve_aggregate_vars(t, params: tuple):
    """Replace the placeholder binder with the inferred fresh variable."""
    from .model import TAggregate as TA
    if isinstance(t, TA) and t.var == _AGG_VAR_PLACEHOLDER:
        elem = _resolve_aggregate_vars(t.element, params)
        filt = _resolve_aggregate_vars(t.filter, params)
        mentioned = _term_vars(elem) | _term_vars(filt)
        fresh = sorted(mentioned - set(params))
        if len(fresh) != 1:
            raise MacroError(
                "cannot infer the aggregate variable "
                f"(candidates: {fresh or 'none'})")
        return TA(t.fn, fresh[0], elem, filt)
    if isinstance(t, TApply):
        return TApply(t.fn, tuple(_resolve_aggregate_vars(a, params) for a in t.args))
    if isinstance(t, TAggregate):
        return TAggregate(t.fn, t.var,
                          _resolve_aggregate_vars(t.element, params),
                          _resolve_aggregate_vars(t.filter, params))
    return t


def _term_vars(t) -> set:
    out: set = set()
    if isinstance(t, TLabel):
        out.update(t.vars)
    elif isinstance(t, TIdent):
        for side in (t.left, t.right):
            if side is not SINK:
                out.add(side)
    elif isinstance(t, TApply):
        for a in t.args:
            out |= _term_vars(a)
    elif isinstance(t, TAggregate):
        out |= (_term_vars(t.element) | _term_vars(t.filter)) - {t.var}
    elif isinstance(t, TSubquery):
        out.update(t.query.select_nodes)
    elif isinstance(t, TPathExtremum):
        out.update(t.query.select_nodes)
    return out


def _normalize_arith(terms, op, bsign, boffset, base) -> List[ArithConstraint]:
    """Translate any comparison into canonical `sum <= bound` conjuncts."""

    def bound(sign_flip: bool, extra: int):
        if isinstance(base, str):
            sign = -bsign if sign_flip else bsign
            offset = -boffset if sign_flip else boffset
            return BoundLabel(base, sign, offset + extra)
        value = base
        if sign_flip:
            value = -value if not isinstance(value, int) else -value
            off = -boffset
        else:
            off = boffset
        if isinstance(value, int):
            return BoundConst(value + off + extra)
        # infinite bound: finite offsets do not move it
        return BoundConst(value)

    def negated(ts):
        return tuple((-c, a) for c, a in ts)

    if op == "<=":
        return [ArithConstraint(terms, bound(False, 0))]
    if op == "<":
        return [ArithConstraint(terms, bound(False, -1))]
    if op == ">=":
        return [ArithConstraint(negated(terms), bound(True, 0))]
    if op == ">":
        return [ArithConstraint(negated(terms), bound(True, -1))]
    # equality: both directions
    return [ArithConstraint(terms, bound(False, 0)),
            ArithConstraint(negated(terms), bound(True, 0))]


def _resolve_query_aggregates(q: Query) -> Query:
    new_defs = []
    for d in q.ontologies:
        body = _resolve_aggregate_vars(d.body, d.params)
        body = _map_subqueries(body, _resolve_query_aggregates)
        new_defs.append(OntologyDef(d.name, d.params, body))
    return Query(tuple(new_defs), q.select_nodes, q.select_paths,
                 q.path_constraints, q.regular_constraints,
                 q.arithmetical_constraints)


def _map_subqueries(t, fn):
    if isinstance(t, TSubquery):
        return TSubquery(fn(t.query))
    if isinstance(t, TPathExtremum):
        return TPathExtremum(t.direction, t.labelling, t.pathvar, fn(t.query))
    if isinstance(t, TApply):
        return TApply(t.fn, tuple(_map_subqueries(a, fn) for a in t.args))
    if isinstance(t, TAggregate):
        return TAggregate(t.fn, t.var, _map_subqueries(t.element, fn),
                          _map_subqueries(t.filter, fn))
    return t


def parse(text: str) -> Query:
    """Parse a query document (optional DEF macro lines, then one query)."""
    macros, body, offset = split_macros(text)
    expanded = expand_macros(body, macros)
    tokens = tokenize(expanded)
    parser = _Parser(tokens)
    q = parser.query()
    if parser.cur.kind != "eof":
        parser.error(f"unexpected trailing input {parser.cur.text!r}")
    return _resolve_query_aggregates(q)
