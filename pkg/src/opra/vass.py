"""Z-reachability on integer-vector-labelled graphs and constrained search
over answer oracles.

The solver works at desk scale: configuration-space search over
(node, counter vector) clamped to a box, with an explicit inconclusive
status whenever the box or the exploration budget is exhausted, never a
wrong answer.  Dimensions whose per-step weights cannot go negative are
pruned as soon as they exceed their bound.

Infinite bounds and infinite atom values are handled semantically: a
dimension that reaches minus infinity is satisfied forever, one that
reaches plus infinity can never meet a finite bound again.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from .errors import (
    BoundExhausted,
    DimensionMismatch,
    InfiniteWeight,
    UndefinedInfinitySum,
)
from .graph import NEG_INF, POS_INF, SINK, ext_add, ext_cmp, ext_mul, is_finite
from .product import COUNTER_INF, AnswerOracle, ProductNode

WITNESS = "witness"
UNREACHABLE = "unreachable"
BOUND_EXHAUSTED = "bound_exhausted"

FOUND = "found"
EMPTY = "empty"
EXHAUSTED = "exhausted"


@dataclass(frozen=True)
class Configuration:
    node: object
    vector: Tuple[int, ...]


@dataclass(frozen=True)
class Vass:
    """Explicit integer-vector-labelled graph."""
    nodes: Tuple[object, ...]
    edges: Tuple[Tuple[object, Tuple[int, ...], object], ...]
    dimension: int

    def __post_init__(self):
        for (_, vec, _) in self.edges:
            if len(vec) != self.dimension:
                raise DimensionMismatch(
                    f"edge vector {vec!r} has length {len(vec)}, "
                    f"dimension is {self.dimension}")

    def successors(self, node):
        return [(vec, w) for (u, vec, w) in self.edges if u == node]

    def edge_bounds(self):
        lo = [0] * self.dimension
        hi = [0] * self.dimension
        for (_, vec, _) in self.edges:
            for i, x in enumerate(vec):
                lo[i] = min(lo[i], x)
                hi[i] = max(hi[i], x)
        return lo, hi

    def default_box(self) -> int:
        maxw = max((max((abs(x) for x in vec), default=0)
                    for (_, vec, _) in self.edges), default=0)
        return max(16, maxw * len(self.nodes) ** 2 * (self.dimension + 1))


@dataclass
class ZResult:
    status: str
    witness: Optional[List[Tuple[object, Tuple[int, ...], object]]] = None


def z_reachable(v, from_cfg: Configuration, to_cfg: Configuration,
                length_bound: Optional[int] = None, box: Optional[int] = None,
                max_configs: int = 200_000) -> ZResult:
    """Does the vector sum along some path link the two configurations?

    Breadth-first over configurations; `unreachable` is only reported when
    the search space was exhausted without any clamping, otherwise the
    result is `bound_exhausted`.
    """
    if len(from_cfg.vector) != len(to_cfg.vector):
        raise DimensionMismatch("configuration dimensions differ")
    if box is None:
        box = v.default_box() if hasattr(v, "default_box") else 10_000
    lo_hint, hi_hint = v.edge_bounds() if hasattr(v, "edge_bounds") else (None, None)
    slack = bool(getattr(v, "unit_slack_at_target", False))
    target = to_cfg

    def at_target(node, vec) -> bool:
        if node != target.node:
            return False
        if vec == target.vector:
            return True
        return slack and all(t - x >= 0 for x, t in zip(vec, target.vector))

    start = (from_cfg.node, tuple(from_cfg.vector))
    if at_target(*start):
        return ZResult(WITNESS, [])

    clipped = False
    parents: Dict = {start: None}
    queue = deque([(start, 0)])
    while queue:
        if len(parents) > max_configs:
            return ZResult(BOUND_EXHAUSTED)
        (node, vec), depth = queue.popleft()
        if length_bound is not None and depth >= length_bound:
            clipped = True
            continue
        for (delta, succ) in v.successors(node):
            nvec = tuple(x + d for x, d in zip(vec, delta))
            dead = escaped = False
            for i, x in enumerate(nvec):
                if lo_hint is not None and lo_hint[i] >= 0 and x > target.vector[i]:
                    dead = True
                    break
                if hi_hint is not None and hi_hint[i] <= 0 \
                        and x < target.vector[i] and not slack:
                    dead = True
                    break
                if abs(x) > box:
                    escaped = True
                    break
            if dead:
                continue
            if escaped:
                clipped = True
                continue
            key = (succ, nvec)
            if key in parents:
                continue
            parents[key] = ((node, vec), delta)
            if at_target(succ, nvec):
                return ZResult(WITNESS, _rebuild(parents, key))
            queue.append((key, depth + 1))
    return ZResult(BOUND_EXHAUSTED if clipped else UNREACHABLE)


def _rebuild(parents, key):
    out = []
    while parents[key] is not None:
        (pnode, pvec), delta = parents[key]
        out.append((pnode, delta, key[0]))
        key = (pnode, pvec)
    out.reverse()
    return out


def replay(witness, from_cfg: Configuration) -> Configuration:
    """Apply a witness to a start configuration (for validity checks)."""
    node, vec = from_cfg.node, list(from_cfg.vector)
    for (u, delta, w) in witness:
        if u != node:
            raise DimensionMismatch("witness does not chain")
        vec = [x + d for x, d in zip(vec, delta)]
        node = w
    return Configuration(node, tuple(vec))


# ---------------------------------------------------------------------------
# Lazy VASS over an answer oracle
# ---------------------------------------------------------------------------

class _Endpoint:
    __slots__ = ("tag",)

    def __init__(self, tag):
        self.tag = tag

    def __repr__(self):
        return self.tag


class LazyVass:
    """Reduction of the constrained answer-graph search to Z-reachability.

    The source edge loads the negated bounds, every edge out of a product
    node adds that node's weights, final nodes connect to the sink, and unit
    slack loops at the sink absorb the leftover bound minus sum.  Feasible
    runs are exactly paths from (s, 0) to (t, 0).
    """

    def __init__(self, oracle: AnswerOracle, bounds: Sequence[int]):
        if len(bounds) != len(oracle.core.dims):
            raise DimensionMismatch(
                f"{len(bounds)} bounds for {len(oracle.core.dims)} dimensions")
        if any(not isinstance(b, int) for b in bounds):
            raise DimensionMismatch("the documented reduction takes integer bounds")
        self.oracle = oracle
        self.bounds = tuple(bounds)
        self.dimension = len(bounds)
        self.source = _Endpoint("s")
        self.target = _Endpoint("t")
        self.unit_slack_at_target = True

    def _weights(self, u: ProductNode) -> Tuple[int, ...]:
        w = self.oracle.weights(u)
        if any(not is_finite(x) for x in w):
            raise InfiniteWeight(f"infinite weight at {u!r}")
        return tuple(w)

    def successors(self, node):
        if node is self.source:
            neg = tuple(-c for c in self.bounds)
            for init in self.oracle.initials():
                yield (neg, init)
            return
        if node is self.target:
            for i in range(self.dimension):
                yield (tuple(1 if j == i else 0 for j in range(self.dimension)),
                       self.target)
            return
        w = self._weights(node)
        for succ in self.oracle.successors(node):
            yield (w, succ)
        if self.oracle.is_final(node):
            yield (w, self.target)

    def edge_bounds(self):
        ranges = self.oracle.weight_ranges()
        lo, hi = [], []
        for i, r in enumerate(ranges):
            if r is None:
                return None, None
            lo.append(min(r[0], -self.bounds[i], 0))
            hi.append(max(r[1], -self.bounds[i], 1))
        return lo, hi

    def default_box(self) -> int:
        maxw = 1
        for i, r in enumerate(self.oracle.weight_ranges()):
            maxw = max(maxw, abs(self.bounds[i]))
            if r is not None:
                maxw = max(maxw, abs(r[0]), abs(r[1]))
        n = len(self.oracle.graph.real_nodes) + 1
        return max(64, maxw * n * n * (self.dimension + 1))


def from_answer_graph(o: AnswerOracle, bounds: Sequence[int]):
    """The documented reduction; returns (lazy VASS, source, sink)."""
    v = LazyVass(o, bounds)
    return v, v.source, v.target


# ---------------------------------------------------------------------------
# Constrained search over oracles (extended-integer aware)
# ---------------------------------------------------------------------------

@dataclass
class SearchLimits:
    max_configs: int = 400_000
    box: Optional[int] = None  # None derives a box from weights and bounds


@dataclass
class CoreResult:
    status: str
    witness: Optional[List[ProductNode]] = None
    final_vector: Optional[Tuple] = None
    tracked: Tuple[int, ...] = ()
    clipped: bool = False
    values: Optional[set] = None  # collect mode: attainable objective values


def solve_core(oracle: AnswerOracle, bounds: Sequence,
               objective: Optional[Tuple[int, int, object]] = None,
               limits: Optional[SearchLimits] = None,
               via: frozenset = frozenset(),
               collect: bool = False) -> CoreResult:
    """Find an S-to-T run whose accumulated weights satisfy the bounds.

    `bounds` are extended integers per dimension (POS_INF drops a dimension
    from tracking).  `objective` is (dim, sign, probe): additionally require
    sign * value[dim] <= probe at the target.  `via` lists product nodes the
    run must visit.  Depth-first with a visited set over (node, tracked
    values); deterministic order.

    When the box clips the counter space, a weight-free reachability pass
    can still certify emptiness structurally.
    """
    limits = limits or SearchLimits()
    dims = len(oracle.core.dims)
    if len(bounds) != dims:
        raise DimensionMismatch(f"{len(bounds)} bounds for {dims} dimensions")

    tracked = [i for i, b in enumerate(bounds) if b is not POS_INF]
    if objective is not None and objective[0] not in tracked:
        tracked.append(objective[0])
        tracked.sort()
    t_pos = {d: i for i, d in enumerate(tracked)}
    obj_dim, obj_sign, obj_probe = objective if objective else (None, 0, None)

    ranges = oracle.weight_ranges()
    box = limits.box if limits.box is not None else _derived_box(oracle, bounds, ranges)

    def arrive(node: ProductNode, values: Tuple):
        """New tracked vector after accumulating this node's weights, or
        None when the configuration is certainly dead."""
        w = oracle.weights(node)
        out = []
        for i, d in enumerate(tracked):
            v, wd = values[i], w[d]
            if type(v) is int and type(wd) is int:
                nv = v + wd
            else:
                nv = ext_add(v, wd)
                if nv is POS_INF:
                    b = bounds[d]
                    if b is not POS_INF:
                        return None  # can never meet a finite or -inf bound
                    if d == obj_dim and obj_sign > 0:
                        return None  # minimization probe can never pass
            out.append(nv)
        return tuple(out)

    clipped = False

    def admit(values) -> bool:
        nonlocal clipped
        for i, d in enumerate(tracked):
            v = values[i]
            if type(v) is not int:
                continue
            r = ranges[d]
            b = bounds[d]
            if r is not None and r[0] >= 0 and is_finite(b) and v > b:
                return False
            if r is not None and d == obj_dim and is_finite(obj_probe):
                if obj_sign > 0 and r[0] >= 0 and v > obj_probe:
                    return False
                if obj_sign < 0 and r[1] <= 0 and v < -obj_probe:
                    return False
            if abs(v) > box:
                clipped = True
                return False
        return True

    def check_final(values) -> bool:
        for i, d in enumerate(tracked):
            b = bounds[d]
            if b is POS_INF:
                continue
            if ext_cmp(values[i], b) > 0:
                return False
        if obj_dim is not None:
            v = values[t_pos[obj_dim]]
            if ext_cmp(ext_mul(obj_sign, v), obj_probe) > 0:
                return False
        return True

    visited = set()
    stack: List[Tuple[ProductNode, Tuple, frozenset, Tuple]] = []

    def push(node, values, missing, trail):
        key = (node, values, missing)
        if key not in visited:
            visited.add(key)
            stack.append((node, values, missing, trail))

    zero = tuple(0 for _ in tracked)
    init_iter = oracle.initials()
    pending = True
    collected: set = set()
    first: Optional[CoreResult] = None
    while True:
        if not stack:
            if not pending:
                break
            nxt = next(init_iter, None)
            if nxt is None:
                pending = False
                continue
            values = arrive(nxt, zero)
            if values is not None and admit(values):
                push(nxt, values, via - {nxt}, (nxt, None))
            continue
        if len(visited) > limits.max_configs:
            return CoreResult(EXHAUSTED, tracked=tuple(tracked), clipped=True)
        node, values, missing, trail = stack.pop()
        if not missing and oracle.is_final(node) and check_final(values):
            if not collect:
                return CoreResult(FOUND, _unwind(trail), values,
                                  tuple(tracked), clipped)
            if first is None:
                first = CoreResult(FOUND, _unwind(trail), values,
                                   tuple(tracked))
            if objective is not None:
                collected.add(values[t_pos[objective[0]]])
        for succ in oracle.successors(node):
            nvalues = arrive(succ, values)
            if nvalues is not None and admit(nvalues):
                push(succ, nvalues, missing - {succ}, (succ, trail))
    if collect and first is not None:
        first.clipped = clipped
        first.values = collected
        return first
    if clipped:
        if _certify_empty(oracle, bounds, objective, limits):
            return CoreResult(EMPTY, tracked=tuple(tracked))
        return CoreResult(EXHAUSTED, tracked=tuple(tracked), clipped=True)
    return CoreResult(EMPTY, tracked=tuple(tracked))


_EXPLORE_CAP = 20_000


def _certify_empty(oracle: AnswerOracle, bounds, objective, limits) -> bool:
    """Emptiness certificates that survive counter clipping.

    Either no final node is structurally reachable, or along every run some
    dimension's best possible total already violates its requirement (a
    shortest/longest-run relaxation per dimension over the live subgraph,
    abandoned for dimensions influenced by an improving cycle).
    """
    cap = min(limits.max_configs, _EXPLORE_CAP)
    adj: Dict[ProductNode, List[ProductNode]] = {}
    seen = set()
    stack = []
    for init in oracle.initials():
        if init not in seen:
            seen.add(init)
            stack.append(init)
        if len(seen) > cap:
            return False
    initials = list(seen)
    while stack:
        if len(seen) > cap:
            return False
        node = stack.pop()
        succs = list(oracle.successors(node))
        adj[node] = succs
        for succ in succs:
            if succ not in seen:
                seen.add(succ)
                stack.append(succ)
    finals = [u for u in seen if oracle.is_final(u)]
    if not finals:
        return True

    rev: Dict[ProductNode, List[ProductNode]] = {}
    for u, succs in adj.items():
        for w in succs:
            rev.setdefault(w, []).append(u)
    live = set(finals)
    stack = list(finals)
    while stack:
        u = stack.pop()
        for p in rev.get(u, ()):
            if p not in live:
                live.add(p)
                stack.append(p)

    final_set = set(finals)
    requirements = []
    for i, b in enumerate(bounds):
        if is_finite(b):
            requirements.append((i, 1, b))
    if objective is not None and is_finite(objective[2]):
        requirements.append(objective)

    for (dim, sign, limit) in requirements:
        weights = {}
        ok = True
        for u in live:
            w = oracle.weights(u)[dim]
            if not is_finite(w):
                ok = False
                break
            weights[u] = sign * w
        if not ok:
            continue
        # best[u]: minimal signed total of a run from u to a final, inclusive
        INF = None
        best = {u: (weights[u] if u in final_set else INF) for u in live}
        changed = True
        rounds = 0
        stable_at = len(live) + 1
        while changed and rounds <= stable_at:
            changed = False
            rounds += 1
            for u in live:
                options = [best[w] + weights[u] for w in adj.get(u, ())
                           if w in live and best[w] is not None]
                if u in final_set:
                    options.append(weights[u])
                if options:
                    cand = min(options)
                    if best[u] is None or cand < best[u]:
                        best[u] = cand
                        changed = True
        if changed:
            continue  # an improving cycle feeds this dimension
        entry = [best[u] for u in initials if u in live and best[u] is not None]
        if not entry:
            return True
        if min(entry) > limit:
            return True
    return False


def _unwind(trail) -> List[ProductNode]:
    out = []
    while trail is not None:
        node, trail = trail
        out.append(node)
    out.reverse()
    return out


def _derived_box(oracle, bounds, ranges) -> int:
    maxw = 1
    for b in bounds:
        if is_finite(b):
            maxw = max(maxw, abs(b))
    for r in ranges:
        if r is not None:
            maxw = max(maxw, abs(r[0]), abs(r[1]))
    n = len(oracle.graph.real_nodes) + 1
    return max(64, maxw * n * n * (len(bounds) + 1))


# ---------------------------------------------------------------------------
# Public operations over oracles
# ---------------------------------------------------------------------------

def emptiness(o: AnswerOracle, bounds: Sequence,
              limits: Optional[SearchLimits] = None) -> bool:
    """Is the constrained path set empty?  Raises BoundExhausted when the
    search cannot decide within its box and budget."""
    res = solve_core(o, bounds, limits=limits)
    if res.status == EXHAUSTED:
        raise BoundExhausted("emptiness undecided within the configured box")
    return res.status == EMPTY


def brute_force(o: AnswerOracle, bounds: Sequence, max_len: int):
    """Exhaustive DFS over S-to-T runs whose decoded paths are at most
    `max_len` long; yields (decoded path tuple, final weight vector)."""

    def total_ok(vec) -> bool:
        for v, b in zip(vec, bounds):
            if b is not POS_INF and ext_cmp(v, b) > 0:
                return False
        return True

    def rec(node, vec, run):
        if node.counter == COUNTER_INF and \
                all(v is SINK for v in node.nodes):
            # the all-sink saturated tail is absorbing: no later run differs
            if o.is_final(node) and total_ok(vec):
                decoded = o.decode(run)
                if all(len(p) <= max_len for p in decoded):
                    yield decoded, vec
            return
        if len(run) > max_len + 1:
            return
        for succ in o.successors(node):
            nvec = tuple(ext_add(a, b) for a, b in zip(vec, o.weights(succ)))
            yield from rec(succ, nvec, run + [succ])

    zero = tuple(0 for _ in o.core.dims)
    for init in o.initials():
        vec = tuple(ext_add(a, b) for a, b in zip(zero, o.weights(init)))
        yield from rec(init, vec, [init])


def find_witness(o: AnswerOracle, bounds: Sequence,
                 limits: Optional[SearchLimits] = None,
                 max_len: Optional[int] = None):
    """One feasible decoded run or None.  With `max_len` the search is a
    bounded enumeration and None never proves emptiness."""
    if max_len is not None:
        for decoded, _ in brute_force(o, bounds, max_len):
            return decoded
        return None
    res = solve_core(o, bounds, limits=limits)
    if res.status == EXHAUSTED:
        raise BoundExhausted("witness search undecided")
    if res.status == EMPTY:
        return None
    return o.decode(res.witness)


# ---------------------------------------------------------------------------
# Extremal values
# ---------------------------------------------------------------------------

@dataclass
class CycleLimits:
    explore_nodes: int = 4000
    max_cycle_len: int = 24
    max_cycles: int = 300


def _explore_adjacency(o: AnswerOracle, seeds, limit: int):
    adj: Dict[ProductNode, List[ProductNode]] = {}
    queue = deque(seeds)
    seen = set(seeds)
    while queue and len(seen) < limit:
        u = queue.popleft()
        succs = list(o.successors(u))
        adj[u] = succs
        for w in succs:
            if w not in seen:
                seen.add(w)
                queue.append(w)
    return adj


def _cycles_at(adj, origin, max_len, max_cycles):
    out = []
    stack = [(origin, [origin])]
    while stack and len(out) < max_cycles:
        node, path = stack.pop()
        for w in adj.get(node, ()):
            if w == origin:
                out.append(list(path))
            elif w not in path and len(path) < max_len:
                stack.append((w, path + [w]))
    return out


def _cycle_delta(o: AnswerOracle, cycle):
    total = None
    for u in cycle:
        w = o.weights(u)
        if any(not is_finite(x) for x in w):
            return None
        total = w if total is None else tuple(a + b for a, b in zip(total, w))
    return total


def _improving(delta, bounds, obj_dim, sign) -> bool:
    """Pumping keeps every bounded dimension non-increasing and strictly
    moves the objective in the wanted direction."""
    for i, d in enumerate(delta):
        if i == obj_dim:
            continue
        if bounds[i] is POS_INF:
            continue
        if d > 0:
            return False
    return sign * delta[obj_dim] < 0


def _has_improving_cycle(o, witness, bounds, obj_dim, sign, cy: CycleLimits,
                         limits: SearchLimits):
    """A strictly improving feasibility-preserving cycle combination.

    Candidate cycles come from the explored region around the witness; each
    candidate is certified by re-running the search forced through the
    cycle's anchor node, so pumping it really embeds into a feasible run.
    """
    adj = _explore_adjacency(o, list(dict.fromkeys(witness)), cy.explore_nodes)
    witness_set = set(witness)
    candidates: List[Tuple[ProductNode, Tuple]] = []
    for u in adj:
        for cycle in _cycles_at(adj, u, cy.max_cycle_len, cy.max_cycles):
            d = _cycle_delta(o, cycle)
            if d is not None:
                candidates.append((u, d))
        if len(candidates) > cy.max_cycles:
            break

    def certified(anchors) -> bool:
        missing = frozenset(anchors) - witness_set
        if not missing:
            return True
        res = solve_core(o, bounds, limits=limits, via=frozenset(anchors))
        return res.status == FOUND

    for (u, d) in candidates:
        if _improving(d, bounds, obj_dim, sign) and certified({u}):
            return True
    for i in range(len(candidates)):
        for j in range(i + 1, len(candidates)):
            (u1, d1), (u2, d2) = candidates[i], candidates[j]
            combined = tuple(a + b for a, b in zip(d1, d2))
            if _improving(combined, bounds, obj_dim, sign) \
                    and certified({u1, u2}):
                return True
    return False


def extremal(o: AnswerOracle, objective: int, bounds: Sequence, direction: str,
             limits: Optional[SearchLimits] = None,
             cycles: Optional[CycleLimits] = None):
    """Minimum (maximum) of one weight dimension over all feasible runs.

    Empty run set yields +inf for min and -inf for max; a feasibility
    preserving strictly improving cycle yields -inf (min) / +inf (max).

    One collecting exploration enumerates every attainable value inside the
    counter box; when nothing was clipped that set is complete and the
    extremum exact.  Otherwise a pumpable-cycle certificate decides the
    infinite cases, and a single emptiness probe below the best value can
    still certify optimality.  Raises BoundExhausted when inconclusive.
    """
    limits = limits or SearchLimits()
    cycles = cycles or CycleLimits()
    sign = 1 if direction == "min" else -1

    base = solve_core(o, bounds, objective=(objective, sign, POS_INF),
                      limits=limits, collect=True)
    if base.status == EXHAUSTED:
        raise BoundExhausted("extremal search undecided")
    if base.status == EMPTY or not base.values:
        return POS_INF if direction == "min" else NEG_INF

    best = None
    for v in base.values:
        if best is None or sign * ext_cmp(v, best) < 0:
            best = v
    if (direction == "min" and best is NEG_INF) or \
            (direction == "max" and best is POS_INF):
        return best
    if not base.clipped:
        return best

    if _has_improving_cycle(o, base.witness, bounds, objective, sign, cycles,
                            limits):
        return NEG_INF if direction == "min" else POS_INF

    if is_finite(best):
        res = solve_core(o, bounds,
                         objective=(objective, sign, sign * best - 1),
                         limits=limits)
        if res.status == EMPTY:
            return best
    raise BoundExhausted("extremal value undecided within the counter box")
