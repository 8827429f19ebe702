"""Ground truth: avoider enumeration, the explicit avoider graph with a
cutoff, exact walk counts and strong-connectivity pruning.
"""
from __future__ import annotations

import os
import tempfile
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import breadth_first_order, connected_components

from .perm import (
    InvalidInputError,
    PatternSpec,
    Perm,
    contains,
    descent_mask,
    format_perm,
    initial_run_length,
    insert_and_trim,
    insert_max,
    parse_perm,
    short_count,
    standardise,
)

VERSION_ONE = "v1"
VERSION_TWO = "v2"
_RULE_ALIASES = {
    "v1": VERSION_ONE, "version_one": VERSION_ONE, "1": VERSION_ONE,
    "v2": VERSION_TWO, "version_two": VERSION_TWO, "2": VERSION_TWO,
}

DEFAULT_MAX_VERTICES = 5_000_000


class ResourceCapError(RuntimeError):
    """A request exceeds a configured size cap."""


class DegenerateGraphError(RuntimeError):
    """Pruning or construction left nothing to work with."""


def normalise_edge_rule(rule: str) -> str:
    try:
        return _RULE_ALIASES[str(rule).lower()]
    except KeyError:
        raise InvalidInputError(f"unknown edge rule {rule!r}; use v1 or v2") from None


# ---------------------------------------------------------------------------
# enumeration

def default_enumeration_cap(pat: Sequence[int]) -> int:
    return 12 if len(pat) >= 4 else 14


def _gains_occurrence(p: Perm, pos: int, pat: Perm) -> bool:
    """Does inserting the maximum of ``p`` at ``pos`` create ``pat``, given
    that ``p`` avoids it?  Any new occurrence uses the new maximum in the
    role of the pattern's maximum."""
    k = len(pat)
    j = pat.index(k)
    if j == k - 1:
        return contains(p[:pos], standardise(pat[:-1]))
    if j == 0:
        return contains(p[pos:], standardise(pat[1:]))
    if k == 3:
        left, right = p[:pos], p[pos:]
        if not left or not right:
            return False
        if pat[0] < pat[2]:
            return min(left) < max(right)
        return max(left) > min(right)
    return contains(insert_max(p, pos), pat)


def _next_level(level: Iterable[Perm], pat: Perm) -> list[Perm]:
    # Deleting the maximum of an avoider leaves an avoider, so every avoider
    # of length n+1 arises from exactly one avoider of length n.
    out = []
    for p in level:
        for pos in range(len(p) + 1):
            if not _gains_occurrence(p, pos, pat):
                out.append(insert_max(p, pos))
    out.sort()
    return out


def enumerate_avoiders(pat: Sequence[int], n: int, cap: Optional[int] = None) -> list[Perm]:
    """All permutations of length ``n`` avoiding ``pat``, lexicographically."""
    pat = tuple(pat)
    if n < 0:
        raise InvalidInputError("length must be nonnegative")
    cap = default_enumeration_cap(pat) if cap is None else cap
    if n > cap:
        raise ResourceCapError(f"refusing to enumerate Av_{n}({format_perm(pat)}); cap is {cap}")
    if n == 0:
        return [()]
    if len(pat) == 1:
        return []
    level = [(1,)]
    for _ in range(n - 1):
        level = _next_level(level, pat)
    return level


def avoider_levels(pat: Sequence[int], n_max: int) -> list[list[Perm]]:
    """``[Av_1, ..., Av_{n_max}]`` in one pass."""
    pat = tuple(pat)
    levels = [[(1,)]] if len(pat) > 1 else [[]]
    for _ in range(n_max - 1):
        levels.append(_next_level(levels[-1], pat))
    return levels


# ---------------------------------------------------------------------------
# the graph

@dataclass
class AvoiderGraph:
    spec: PatternSpec
    cutoff: int
    edge_rule: str
    vertices: list
    # CSR by source: out-edges of i are dst[indptr[i]:indptr[i+1]]
    indptr: np.ndarray
    dst: np.ndarray
    mult: np.ndarray
    start: int
    dropped: list = field(default_factory=list)
    index: dict = field(init=False, repr=False)

    def __post_init__(self):
        self.index = {p: i for i, p in enumerate(self.vertices)}

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_edges(self) -> int:
        """Distinct (source, target) pairs."""
        return int(self.dst.size)

    def src(self) -> np.ndarray:
        return np.repeat(np.arange(self.num_vertices), np.diff(self.indptr))

    def out_edges(self, i: int) -> list[tuple[int, int]]:
        a, b = self.indptr[i], self.indptr[i + 1]
        return list(zip(self.dst[a:b].tolist(), self.mult[a:b].tolist()))

    def out_multiplicity(self) -> np.ndarray:
        return np.bincount(self.src(), weights=self.mult,
                           minlength=self.num_vertices).astype(np.int64)

    def adjacency(self, dtype=np.float64) -> csr_matrix:
        n = self.num_vertices
        return csr_matrix((self.mult.astype(dtype), self.dst, self.indptr), shape=(n, n))

    def has_loop(self) -> bool:
        return bool(np.any(self.src() == self.dst))

    def vertex(self, p) -> int:
        try:
            return self.index[tuple(p)]
        except KeyError:
            raise InvalidInputError(f"{format_perm(p)} is not a vertex") from None

    def subgraph(self, keep: Sequence[int], start: Optional[int] = None) -> "AvoiderGraph":
        keep = np.sort(np.asarray(keep, dtype=np.int64))
        remap = np.full(self.num_vertices, -1, dtype=np.int64)
        remap[keep] = np.arange(keep.size)
        src = remap[self.src()]
        dst = remap[self.dst]
        ok = (src >= 0) & (dst >= 0)
        src, dst, mult = src[ok], dst[ok], self.mult[ok]
        indptr = np.zeros(keep.size + 1, dtype=np.int64)
        np.add.at(indptr, src + 1, 1)
        indptr = np.cumsum(indptr)
        kept = set(keep.tolist())
        dropped = list(self.dropped) + [self.vertices[i] for i in range(self.num_vertices)
                                        if i not in kept]
        new_start = int(remap[self.start if start is None else start])
        if new_start < 0:
            raise DegenerateGraphError("start vertex was removed")
        return AvoiderGraph(self.spec, self.cutoff, self.edge_rule,
                            [self.vertices[i] for i in keep.tolist()],
                            indptr, dst, mult, new_start, dropped)


def build_avoider_graph(spec: PatternSpec | str, N: int, edge_rule: str = VERSION_TWO,
                        max_vertices: int = DEFAULT_MAX_VERTICES) -> AvoiderGraph:
    """Vertices are the trim-target avoiders of length 1..N, sorted by
    (length, lex). Each insertion position gives one edge; an untrimmed result
    of length N+1 is cut to its length-N prefix under v2 and dropped under v1.
    """
    if isinstance(spec, str):
        spec = PatternSpec.parse(spec)
    if N < 1:
        raise InvalidInputError("cutoff must be at least 1")
    rule = normalise_edge_rule(edge_rule)
    t = spec.trim_target

    vertices: list[Perm] = []
    level = [(1,)]
    for n in range(1, N + 1):
        if n > 1:
            level = _next_level(level, t)
        vertices.extend(level)
        if len(vertices) > max_vertices:
            raise ResourceCapError(
                f"graph for {spec.name} at cutoff {N} exceeds {max_vertices} vertices")
    index = {p: i for i, p in enumerate(vertices)}

    indptr = np.zeros(len(vertices) + 1, dtype=np.int64)
    dst_parts: list[list[int]] = []
    mult_parts: list[list[int]] = []
    for i, p in enumerate(vertices):
        targets: Counter = Counter()
        for pos in range(len(p) + 1):
            q = insert_and_trim(p, pos, t)
            if not q:
                raise DegenerateGraphError(f"trimming emptied {format_perm(p)} at {pos}")
            if len(q) > N:
                if rule == VERSION_ONE:
                    continue
                q = standardise(q[:N])
            targets[index[q]] += 1
        keys = sorted(targets)
        dst_parts.append(keys)
        mult_parts.append([targets[k] for k in keys])
        indptr[i + 1] = indptr[i] + len(keys)
    dst = np.fromiter((d for part in dst_parts for d in part), dtype=np.int64, count=int(indptr[-1]))
    mult = np.fromiter((m for part in mult_parts for m in part), dtype=np.int64, count=int(indptr[-1]))
    return AvoiderGraph(spec, N, rule, vertices, indptr, dst, mult, index[(1,)])


# ---------------------------------------------------------------------------
# pruning

def default_hub(spec: PatternSpec) -> Optional[Perm]:
    # For 2134 the increasing permutations and a few stragglers sit outside
    # the main component; 21 lies inside it.
    if spec.trim_target == (2, 1, 3):
        return (2, 1)
    return None


def strong_components(g: AvoiderGraph) -> np.ndarray:
    _, labels = connected_components(g.adjacency(), directed=True, connection="strong")
    return labels


def prune_for_spectral(g: AvoiderGraph, hub: Optional[Sequence[int]] = None) -> AvoiderGraph:
    """Restrict to one strongly connected component.

    With a hub (given, or the pattern default) that is the hub's component;
    otherwise the largest component reachable from the start. The start of
    the result is the old start if it survives, else the hub.
    """
    if g.num_vertices == 0:
        raise DegenerateGraphError("empty graph")
    labels = strong_components(g)
    hub = tuple(hub) if hub is not None else default_hub(g.spec)
    if hub is not None:
        if tuple(hub) not in g.index:
            raise DegenerateGraphError(f"hub {format_perm(hub)} is not a vertex")
        label = labels[g.index[tuple(hub)]]
    else:
        reach = breadth_first_order(g.adjacency(), g.start, directed=True,
                                    return_predecessors=False)
        sizes = Counter(labels[reach].tolist())
        label = max(sizes, key=lambda c: (sizes[c], -c))
    keep = np.flatnonzero(labels == label)
    if keep.size == 0:
        raise DegenerateGraphError("no component survives pruning")
    members = set(keep.tolist())
    if g.start in members:
        start = g.start
    elif hub is not None:
        start = g.index[tuple(hub)]
    else:
        start = int(keep[0])
    sub = g.subgraph(keep, start=start)
    if sub.num_edges == 0:
        raise DegenerateGraphError("surviving component has no edges")
    return sub


# ---------------------------------------------------------------------------
# walks

@dataclass
class WalkTable:
    pattern: str
    cutoff: int
    counts: dict  # k -> exact int, walks with k-1 steps

    def __getitem__(self, k: int) -> int:
        return self.counts[k]


class WalkPropagator:
    """Pushes an exact integer vector along the edges, one step at a time."""

    def __init__(self, g: AvoiderGraph):
        self.n = g.num_vertices
        order = np.argsort(g.dst, kind="stable")
        self.src = g.src()[order]
        dst = g.dst[order]
        self.mult = g.mult[order].astype(object)
        if dst.size:
            self.starts = np.flatnonzero(np.r_[True, dst[1:] != dst[:-1]])
            self.targets = dst[self.starts]
        else:
            self.starts = self.targets = np.zeros(0, dtype=np.int64)

    def step(self, x: np.ndarray) -> np.ndarray:
        out = np.zeros(self.n, dtype=object)
        if self.starts.size:
            out[self.targets] = np.add.reduceat(x[self.src] * self.mult, self.starts)
        return out


def count_walks(g: AvoiderGraph, k_max: int, start: Optional[int] = None) -> WalkTable:
    """W_{N,k} for k = 1..k_max: walks with k-1 steps from the start vertex,
    counted with multiplicity, as Python integers."""
    if k_max < 1:
        raise InvalidInputError("k_max must be at least 1")
    prop = WalkPropagator(g)
    x = np.zeros(g.num_vertices, dtype=object)
    x[g.start if start is None else start] = 1
    counts = {1: 1}
    for k in range(2, k_max + 1):
        x = prop.step(x)
        counts[k] = int(sum(x.tolist()))
    return WalkTable(g.spec.name, g.cutoff, counts)


# ---------------------------------------------------------------------------
# class keys

KEYERS: dict[str, Callable[[Perm], tuple]] = {
    "initial-run": lambda p: (len(p), initial_run_length(p)),
    "descent-set": lambda p: (len(p), descent_mask(p)),
    "short-count": lambda p: (len(p), short_count(p)),
}
_KEYER_ALIASES = {"run": "initial-run", "descents": "descent-set", "short": "short-count"}


def get_keyer(keyer: str | Callable) -> Callable[[Perm], tuple]:
    if callable(keyer):
        return keyer
    name = _KEYER_ALIASES.get(keyer, keyer)
    if name not in KEYERS:
        raise InvalidInputError(f"unknown keyer {keyer!r}")
    return KEYERS[name]


def class_statistics(g: AvoiderGraph, keyer: str | Callable) -> list[tuple]:
    """Class key of every vertex, in vertex order. Descent sets are bitmasks."""
    f = get_keyer(keyer)
    return [f(p) for p in g.vertices]


def aggregate_by_class(g: AvoiderGraph, keys: Sequence[tuple]) -> tuple[Counter, Counter]:
    """(class sizes, class-to-class edge counts with multiplicity)."""
    sizes = Counter(keys)
    edges: Counter = Counter()
    src = g.src().tolist()
    for s, d, m in zip(src, g.dst.tolist(), g.mult.tolist()):
        edges[keys[s], keys[d]] += m
    return sizes, edges


def uncut_class_edges(t: Sequence[int], n_max: int, keyer: str | Callable) -> tuple[Counter, Counter]:
    """Class sizes and class-to-class edge counts between avoiders of ``t``
    of length 1..n_max, every insertion kept with no cutoff applied."""
    t = tuple(t)
    f = get_keyer(keyer)
    sizes: Counter = Counter()
    edges: Counter = Counter()
    for level in avoider_levels(t, n_max):
        for p in level:
            kp = f(p)
            sizes[kp] += 1
            for pos in range(len(p) + 1):
                edges[kp, f(insert_and_trim(p, pos, t))] += 1
    return sizes, edges


# ---------------------------------------------------------------------------
# cache files

def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _perm_token(p: Perm) -> str:
    return ",".join(str(v) for v in p)


def write_graph(g: AvoiderGraph, path: str) -> None:
    lines = [f"avgraph v1 {g.spec.name} {g.cutoff} {g.edge_rule}", f"# start {g.start}"]
    lines += [f"# dropped {_perm_token(p)}" for p in g.dropped]
    lines += [f"{i} {_perm_token(p)}" for i, p in enumerate(g.vertices)]
    src = g.src().tolist()
    lines += [f"{s} {d} {m}" for s, d, m in zip(src, g.dst.tolist(), g.mult.tolist())]
    _atomic_write(path, "\n".join(lines) + "\n")


def read_graph(path: str) -> AvoiderGraph:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 5 or header[:2] != ["avgraph", "v1"]:
            raise InvalidInputError(f"{path}: not an avgraph v1 file")
        spec = PatternSpec.parse(header[2])
        cutoff = int(header[3])
        rule = normalise_edge_rule(header[4])
        start = None
        dropped: list[Perm] = []
        vertices: list[Perm] = []
        edges: list[tuple[int, int, int]] = []
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "#":
                if parts[1] == "start":
                    start = int(parts[2])
                elif parts[1] == "dropped":
                    dropped.append(parse_perm(parts[2]))
            elif len(parts) == 2:
                if int(parts[0]) != len(vertices):
                    raise InvalidInputError(f"{path}: vertex lines out of order")
                vertices.append(parse_perm(parts[1]))
            elif len(parts) == 3:
                edges.append((int(parts[0]), int(parts[1]), int(parts[2])))
            else:
                raise InvalidInputError(f"{path}: bad line {line.strip()!r}")
    edges.sort()
    indptr = np.zeros(len(vertices) + 1, dtype=np.int64)
    for s, _, _ in edges:
        indptr[s + 1] += 1
    indptr = np.cumsum(indptr)
    dst = np.array([d for _, d, _ in edges], dtype=np.int64)
    mult = np.array([m for _, _, m in edges], dtype=np.int64)
    if start is None:
        start = vertices.index((1,))
    return AvoiderGraph(spec, cutoff, rule, vertices, indptr, dst, mult, start, dropped)
