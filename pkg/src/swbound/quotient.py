"""Quotient graphs: initial-run classes for 2134, descent-set classes for
3124 and the weighted short-count classes for 1324, plus weighted walk
counting and the comparison of weighted against unweighted walks.
"""
from __future__ import annotations

import csv
import io
import sys
from collections import Counter, deque
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .catalan import catalan_triangle, class_size_A
from .operators import MatrixOperator, ShortQuotientOperator
from .oracle import (
    AvoiderGraph,
    DegenerateGraphError,
    ResourceCapError,
    VERSION_ONE,
    VERSION_TWO,
    _atomic_write,
    aggregate_by_class,
    build_avoider_graph,
    class_statistics,
    count_walks,
    normalise_edge_rule,
)
from .perm import InvalidInputError, PatternSpec, descent_mask, insert_and_trim, standardise


class InternalConsistencyError(RuntimeError):
    """A structural assumption that the code relies on turned out false."""


KINDS = ("run", "descents", "short", "chain")


# ---------------------------------------------------------------------------
# E(n, r, m, s)

sys.setrecursionlimit(max(sys.getrecursionlimit(), 20000))


@lru_cache(maxsize=None)
def edge_count_E(n: int, r: int, m: int, s: int) -> int:
    """Number of edges of the uncut 1324 avoider graph from A(n,r) to A(m,s)."""
    if r >= n or s >= m or n < 1 or m < 1 or r < 0 or s < 0 or m > n + 1:
        return 0
    if m == n + 1:
        # inserting anywhere at or after the first short value trims nothing
        return catalan_triangle(n - 1, r) if s >= r else 0
    if m == n:
        return catalan_triangle(n - 1, r + s - n)
    return edge_count_E(n - 1, r, m, s) + edge_count_E(n, r - 1, m, s)


# ---------------------------------------------------------------------------

@dataclass
class QuotientGraph:
    kind: str
    cutoff: int
    keys: list
    indptr: np.ndarray
    dst: np.ndarray
    weights: list  # Fraction or int per edge, aligned with dst
    start: int
    dropped: list = field(default_factory=list)
    index: dict = field(init=False, repr=False)

    def __post_init__(self):
        self.keys = [tuple(k) for k in self.keys]
        self.index = {k: i for i, k in enumerate(self.keys)}

    @classmethod
    def from_edges(cls, kind: str, cutoff: int, keys: Sequence[tuple], edges: dict,
                   start_key: tuple, dropped=()) -> "QuotientGraph":
        """``edges`` maps (src key, dst key) to a positive weight."""
        keys = sorted(keys)
        index = {k: i for i, k in enumerate(keys)}
        rows: list[list] = [[] for _ in keys]
        for (a, b), w in edges.items():
            if w:
                rows[index[a]].append((index[b], w))
        indptr = [0]
        dst, weights = [], []
        for row in rows:
            row.sort()
            dst.extend(d for d, _ in row)
            weights.extend(w for _, w in row)
            indptr.append(len(dst))
        return cls(kind, cutoff, keys, np.array(indptr, dtype=np.int64),
                   np.array(dst, dtype=np.int64), weights, index[tuple(start_key)],
                   list(dropped))

    @property
    def num_classes(self) -> int:
        return len(self.keys)

    @property
    def num_edges(self) -> int:
        return int(self.dst.size)

    def src(self) -> np.ndarray:
        return np.repeat(np.arange(self.num_classes), np.diff(self.indptr))

    def out_edges(self, key) -> dict:
        i = self.index[tuple(key)]
        a, b = self.indptr[i], self.indptr[i + 1]
        return {self.keys[d]: w for d, w in zip(self.dst[a:b].tolist(), self.weights[a:b])}

    def weight(self, a, b):
        return self.out_edges(a).get(tuple(b), 0)

    def pattern_matrix(self) -> csr_matrix:
        n = self.num_classes
        return csr_matrix((np.ones(self.num_edges), self.dst, self.indptr), shape=(n, n))

    def operator(self) -> MatrixOperator:
        return MatrixOperator(self.keys, self.indptr, self.dst, self.weights, self.start)

    def edge_dict(self) -> dict:
        src = self.src().tolist()
        return {(self.keys[s], self.keys[d]): w
                for s, d, w in zip(src, self.dst.tolist(), self.weights)}

    def restrict(self, keep_keys: Sequence[tuple], start_key: Optional[tuple] = None) -> "QuotientGraph":
        keep = set(map(tuple, keep_keys))
        edges = {(a, b): w for (a, b), w in self.edge_dict().items() if a in keep and b in keep}
        dropped = list(self.dropped) + [k for k in self.keys if k not in keep]
        start = tuple(start_key) if start_key is not None else self.keys[self.start]
        if start not in keep:
            raise DegenerateGraphError(f"start class {start} was removed")
        return QuotientGraph.from_edges(self.kind, self.cutoff, keep, edges, start, dropped)


def prune_quotient(q: QuotientGraph, hub: tuple) -> QuotientGraph:
    """Keep the strongly connected component of ``hub``; it becomes the start."""
    _, labels = connected_components(q.pattern_matrix(), directed=True, connection="strong")
    if tuple(hub) not in q.index:
        raise DegenerateGraphError(f"hub {hub} is not a class")
    lab = labels[q.index[tuple(hub)]]
    keep = [k for k, l in zip(q.keys, labels) if l == lab]
    return q.restrict(keep, start_key=hub)


# ---------------------------------------------------------------------------
# 2134: initial run

def build_quotient_B(N: int, edge_rule: str = VERSION_ONE, prune: bool = True) -> QuotientGraph:
    """Classes (n, r) of 213-avoiders by initial run, increasing ones left out.

    Inserting inside the initial run gives run length pos+1 one level up;
    inserting after the first descent trims back to length pos with the run
    unchanged. Ascending edges out of level N are dropped (v1) or cut to
    their length-N prefix (v2).
    """
    if N < 2:
        raise DegenerateGraphError("the initial-run quotient needs cutoff >= 2")
    rule = normalise_edge_rule(edge_rule)
    keys = [(n, r) for n in range(2, N + 1) for r in range(1, n)]
    edges: Counter = Counter()
    for n, r in keys:
        for s in range(1, r + 2):
            if n < N:
                edges[(n, r), (n + 1, s)] += 1
            elif rule == VERSION_TWO and s <= N - 1:
                edges[(n, r), (N, s)] += 1
        for m in range(r + 1, n + 1):
            edges[(n, r), (m, r)] += 1
    q = QuotientGraph.from_edges("run", N, keys, dict(edges), (2, 1))
    return prune_quotient(q, (2, 1)) if prune else q


# ---------------------------------------------------------------------------
# 3124: descent sets

def _descent_key(p) -> tuple:
    return (len(p), descent_mask(p))


def _targets(p, t, N: int, rule: str) -> tuple[Counter, dict]:
    """Target classes of ``p`` with multiplicity, and one member of each."""
    out: Counter = Counter()
    reps = {}
    for pos in range(len(p) + 1):
        q = insert_and_trim(p, pos, t)
        if len(q) > N:
            if rule == VERSION_ONE:
                continue
            q = standardise(q[:N])
        k = _descent_key(q)
        out[k] += 1
        reps.setdefault(k, q)
    return out, reps


def build_quotient_C(N: int, edge_rule: str = VERSION_TWO, method: str = "representative",
                     max_vertices: int = 5_000_000) -> QuotientGraph:
    """Classes (n, descent mask) of 312-avoiders.

    ``method='full'`` aggregates the explicit graph and checks that every
    member of a class sends the same multiset of edges to each class.
    ``method='representative'`` explores class by class from the start using
    one member per class, which is valid because of that uniformity (the
    trim point after inserting the maximum is the first ascent to its right).
    Edge weights are multiplicities.
    """
    rule = normalise_edge_rule(edge_rule)
    t = (3, 1, 2)
    if method == "full":
        g = build_avoider_graph(PatternSpec((3, 1, 2, 4)), N, rule, max_vertices=max_vertices)
        keys = class_statistics(g, "descent-set")
        per_class: dict = {}
        src = g.src()
        vertex_targets: list[Counter] = [Counter() for _ in range(g.num_vertices)]
        for s, d, m in zip(src.tolist(), g.dst.tolist(), g.mult.tolist()):
            vertex_targets[s][keys[d]] += m
        for i, k in enumerate(keys):
            prev = per_class.setdefault(k, vertex_targets[i])
            if prev != vertex_targets[i]:
                raise InternalConsistencyError(
                    f"descent class {k} is not uniform: {g.vertices[i]} differs")
        edges = {(a, b): w for a, tg in per_class.items() for b, w in tg.items()}
        return QuotientGraph.from_edges("descents", N, list(per_class), edges, (1, 0))
    if method != "representative":
        raise InvalidInputError(f"unknown method {method!r}")
    rep = {(1, 0): (1,)}
    queue = deque([(1, 0)])
    edges = {}
    while queue:
        k = queue.popleft()
        counts, reps = _targets(rep[k], t, N, rule)
        for b, w in counts.items():
            edges[k, b] = w
            if b not in rep:
                rep[b] = reps[b]
                queue.append(b)
        if len(rep) > max_vertices:
            raise ResourceCapError("too many descent classes")
    return QuotientGraph.from_edges("descents", N, list(rep), edges, (1, 0))


def largest_reachable_component(q: QuotientGraph) -> QuotientGraph:
    """Strongly connected component reachable from the start with the most classes."""
    _, labels = connected_components(q.pattern_matrix(), directed=True, connection="strong")
    seen = {q.start}
    stack = [q.start]
    while stack:
        i = stack.pop()
        for d in q.dst[q.indptr[i]:q.indptr[i + 1]].tolist():
            if d not in seen:
                seen.add(d)
                stack.append(d)
    sizes = Counter(labels[sorted(seen)].tolist())
    lab = max(sizes, key=lambda c: (sizes[c], -c))
    members = [k for k, l in zip(q.keys, labels) if l == lab]
    return q.restrict(members, start_key=members[0])


# ---------------------------------------------------------------------------
# 213 chain

def build_chain_213(N: int, edge_rule: str = VERSION_TWO) -> QuotientGraph:
    """The Av(21) graph: vertex n is 12...n and points to 1..n+1."""
    rule = normalise_edge_rule(edge_rule)
    edges: Counter = Counter()
    for n in range(1, N + 1):
        for pos in range(n + 1):
            m = pos + 1
            if m > N:
                if rule == VERSION_ONE:
                    continue
                m = N
            edges[(n, n), (m, m)] += 1
    return QuotientGraph.from_edges("chain", N, [(n, n) for n in range(1, N + 1)],
                                    dict(edges), (1, 1))


# ---------------------------------------------------------------------------
# 1324: weighted short-count quotient

def build_quotient_A_weighted(N: int) -> QuotientGraph:
    """Classes (n, r), weight E(n,r,m,s)/|A(n,r)|; ascending edges out of
    level N are dropped."""
    if N < 1:
        raise InvalidInputError("cutoff must be at least 1")
    keys = [(n, r) for n in range(1, N + 1) for r in range(n)]
    edges = {}
    for n, r in keys:
        size = class_size_A(n, r)
        for m in range(1, min(n + 1, N) + 1):
            for s in range(m):
                e = edge_count_E(n, r, m, s)
                if e:
                    edges[(n, r), (m, s)] = Fraction(e, size)
    return QuotientGraph.from_edges("short", N, keys, edges, (1, 0))


def aggregate_quotient(g: AvoiderGraph, keyer: str, kind: str) -> QuotientGraph:
    """Weight of class a -> class b = (edges from a to b) / |a| in ``g``."""
    keys = class_statistics(g, keyer)
    sizes, counts = aggregate_by_class(g, keys)
    edges = {(a, b): Fraction(c, sizes[a]) for (a, b), c in counts.items()}
    return QuotientGraph.from_edges(kind, g.cutoff, list(sizes), edges, keys[g.start])


# ---------------------------------------------------------------------------
# weighted walks

@dataclass
class WeightedWalkTable:
    cutoff: int
    values: dict          # k -> Fraction (exact) or float
    exact: bool
    unweighted: dict = field(default_factory=dict)  # k -> int, when known

    def __getitem__(self, k: int):
        return self.values[k]


def weighted_walk_table(q, k_max: int, arith: str = "exact",
                        start: Optional[int] = None) -> WeightedWalkTable:
    """Sum over walks with k-1 steps from the start of the product of weights.

    ``q`` may be a QuotientGraph or any operator with ``propagate``.
    """
    op = q.operator() if isinstance(q, QuotientGraph) else q
    cutoff = q.cutoff if isinstance(q, QuotientGraph) else getattr(q, "N", None)
    start = op.start if start is None else start
    if k_max < 1:
        raise InvalidInputError("k_max must be at least 1")
    values = {}
    if arith == "exact":
        x = [0] * op.dim
        x[start] = Fraction(1)
        values[1] = Fraction(1)
        for k in range(2, k_max + 1):
            x = op.propagate_exact(x)
            values[k] = Fraction(sum(x))
    elif arith == "float":
        x = np.zeros(op.dim)
        x[start] = 1.0
        values[1] = 1.0
        for k in range(2, k_max + 1):
            x = op.propagate(x)
            values[k] = float(x.sum())
    else:
        raise InvalidInputError(f"unknown arithmetic {arith!r}")
    return WeightedWalkTable(cutoff, values, arith == "exact")


def short_quotient_walks(N: int, k_max: int, arith: str = "exact") -> WeightedWalkTable:
    """Weighted walks in the E-weighted quotient via the implicit operator,
    starting from the class of the trivial permutation."""
    op = ShortQuotientOperator(N, mask=np.ones(N * (N + 1) // 2, dtype=bool))
    return weighted_walk_table(op, k_max, arith, start=op.index_of((1, 0)))


def diagonal_weighted_sums(n_max: int, arith: str = "exact") -> dict:
    """W~_{n,n} for 1 <= n <= n_max."""
    return {n: short_quotient_walks(n, n, arith)[n] for n in range(1, n_max + 1)}


# ---------------------------------------------------------------------------
# weighted against unweighted walks

@dataclass
class RatioRow:
    n: int
    k: int
    W: Optional[int]
    Wtilde: Fraction
    ratio: Optional[Fraction]


@dataclass
class RatioReport:
    rows: list
    max_ratio: Fraction
    counterexamples: list

    def grid(self) -> dict:
        return {(r.n, r.k): r.ratio for r in self.rows}


def weighted_ratio_report(n_max: int, k_max: int, n_min: int = 1, log=None) -> RatioReport:
    """Compare weighted and unweighted walk sums in the 1324 graph.

    For each cutoff n the unweighted counts come from the full v2 graph and
    the weighted sums from its short-count quotient, whose weights are class
    edge counts over class sizes. Below level n these are exactly
    E(n,r,m,s)/|A(n,r)|; at level n they include the cut-back edges too.
    """
    rows = []
    spec = PatternSpec((1, 3, 2, 4))
    for n in range(n_min, n_max + 1):
        g = build_avoider_graph(spec, n, VERSION_TWO)
        W = count_walks(g, k_max)
        q = aggregate_quotient(g, "short-count", "short")
        Wt = weighted_walk_table(q, k_max, "exact")
        for k in range(1, k_max + 1):
            rows.append(RatioRow(n, k, W[k], Wt[k], Fraction(Wt[k]) / W[k]))
        if log:
            log(f"cutoff {n}: done")
    ratios = [r.ratio for r in rows]
    bad = [r for r in rows if r.ratio > 1]
    return RatioReport(rows, max(ratios), bad)


# ---------------------------------------------------------------------------
# files

def walk_table_csv(rows: Sequence[RatioRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "k", "W", "Wtilde", "ratio"])
    for r in rows:
        w.writerow([r.n, r.k, "" if r.W is None else r.W, format(float(r.Wtilde), ".12g"),
                    "" if r.ratio is None else format(float(r.ratio), ".12g")])
    return buf.getvalue()


def write_quotient(q: QuotientGraph, path: str) -> None:
    lines = [f"quot v1 {q.kind} {q.cutoff}", f"# start {q.keys[q.start][0]} {q.keys[q.start][1]}"]
    lines += [f"# key {k[0]} {k[1]}" for k in q.keys]
    lines += [f"# dropped {k[0]} {k[1]}" for k in q.dropped]
    for (a, b), w in q.edge_dict().items():
        f = Fraction(w)
        lines.append(f"{a[0]} {a[1]} {b[0]} {b[1]} {f.numerator} {f.denominator}")
    _atomic_write(path, "\n".join(lines) + "\n")


def read_quotient(path: str) -> QuotientGraph:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 4 or header[:2] != ["quot", "v1"] or header[2] not in KINDS:
            raise InvalidInputError(f"{path}: not a quot v1 file")
        kind, cutoff = header[2], int(header[3])
        keys, dropped, edges, start = [], [], {}, None
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "#":
                key = (int(parts[2]), int(parts[3]))
                if parts[1] == "start":
                    start = key
                elif parts[1] == "key":
                    keys.append(key)
                elif parts[1] == "dropped":
                    dropped.append(key)
                continue
            if len(parts) != 6:
                raise InvalidInputError(f"{path}: bad line {line.strip()!r}")
            n, r, m, s, num, den = map(int, parts)
            w = Fraction(num, den)
            edges[(n, r), (m, s)] = w.numerator if w.denominator == 1 and kind != "short" else w
    if start is None:
        raise InvalidInputError(f"{path}: missing start line")
    return QuotientGraph.from_edges(kind, cutoff, keys, edges, start, dropped)
