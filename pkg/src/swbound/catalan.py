"""Class sizes for the quotient partitions and the binary-tree encoding of
132-avoiders used to rebuild a permutation from its removal multiset.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb
from typing import Iterable, Optional, Sequence

from .perm import InvalidInputError, Perm, contains, insert_and_trim, mask_to_set


class NotRealisableError(ValueError):
    """The multiset is not the removal multiset of any 132-avoider."""


@lru_cache(maxsize=None)
def catalan_triangle(n: int, k: int) -> int:
    """T(n,k) = (n-k+1)/(n+1) * C(n+k, n); zero outside 0 <= k <= n."""
    if n < 0 or k < 0 or k > n:
        return 0
    return (n - k + 1) * comb(n + k, n) // (n + 1)


def catalan(n: int) -> int:
    return catalan_triangle(n, n)


def class_size_B(n: int, r: int) -> int:
    """213-avoiders of length n whose initial increasing run has length r."""
    if not 1 <= r <= n:
        return 0
    return catalan_triangle(n - 1, n - r)


def class_size_A(n: int, k: int) -> int:
    """132-avoiders of length n with k entries that are not right-to-left maxima."""
    if n == 0:
        return 1 if k == 0 else 0
    return catalan_triangle(n - 1, k)


@lru_cache(maxsize=None)
def class_size_A_recurrence(n: int, k: int) -> int:
    """|A(n,k)| from splitting at the maximum.

    The m entries left of the maximum are all short and form any 132-avoider;
    the right part contributes its own short count.
    """
    if n == 0:
        return 1 if k == 0 else 0
    if k < 0:
        return 0
    return sum(catalan(m) * class_size_A_recurrence(n - 1 - m, k - m)
               for m in range(0, min(n - 1, k) + 1))


def class_size_C(n: int, descents: Iterable[int] | int) -> int:
    """312-avoiders of length n with the given descent set.

    A permutation avoids 312 iff it is the output of a stack fed 1..n. Two
    consecutive outputs form a descent iff no push happens between the pops,
    so we push forward over states (pops done, pushes done).
    """
    if n == 0:
        return 1
    if isinstance(descents, int):
        dset = mask_to_set(descents)
    else:
        dset = frozenset(descents)
    if any(not 1 <= d <= n - 1 for d in dset):
        return 0
    # after the first pop: pushed t >= 1 values
    layer = [0] * (n + 1)
    for t in range(1, n + 1):
        layer[t] = 1
    for j in range(1, n):
        nxt = [0] * (n + 1)
        if j in dset:
            for i in range(n + 1):
                if layer[i] and i - j >= 1:
                    nxt[i] += layer[i]
        else:
            running = 0
            for i in range(n + 1):
                # nxt[i] = sum of layer[i'] for i' < i
                nxt[i] += running
                running += layer[i]
        layer = nxt
    return layer[n]


# ---------------------------------------------------------------------------
# binary trees

@dataclass
class Node:
    left: Optional["Node"] = None
    right: Optional["Node"] = None

    def size(self) -> int:
        return 1 + (self.left.size() if self.left else 0) + (
            self.right.size() if self.right else 0)

    def shape(self):
        """Nested-tuple shape, handy for equality checks."""
        return (self.left.shape() if self.left else None,
                self.right.shape() if self.right else None)


def perm_to_tree(p: Sequence[int]) -> Optional[Node]:
    """Split on the maximum: left subtree from the entries before it, right
    subtree from the entries after it."""
    if contains(p, (1, 3, 2)):
        raise InvalidInputError(f"{tuple(p)} contains 132")
    return _build(list(p))


def _build(seq: list) -> Optional[Node]:
    if not seq:
        return None
    m = seq.index(max(seq))
    return Node(_build(seq[:m]), _build(seq[m + 1:]))


def tree_to_perm(tree: Optional[Node]) -> Perm:
    out: list[int] = []

    def emit(node: Optional[Node], lo: int) -> None:
        # values lo+1 .. lo+size; right subtree takes the smallest
        if node is None:
            return
        rsize = node.right.size() if node.right else 0
        lsize = node.left.size() if node.left else 0
        emit(node.left, lo + rsize)
        out.append(lo + rsize + lsize + 1)
        emit(node.right, lo)

    emit(tree, 0)
    return tuple(out)


def g_values(tree: Node) -> list[tuple[Node, int]]:
    """Each node with its g-value, in reverse preorder (node, right, left).

    Walking down from the root, every step to a left child adds the size of
    the parent's right subtree plus one.
    """
    out = []
    stack = [(tree, 0)]
    while stack:
        node, g = stack.pop()
        out.append((node, g))
        if node.left is not None:
            rsize = node.right.size() if node.right else 0
            stack.append((node.left, g + rsize + 1))
        if node.right is not None:
            stack.append((node.right, g))
    return out


def multiset_g(tree: Optional[Node]) -> tuple[int, ...]:
    """Sorted multiset of g over all nodes (one entry per node)."""
    if tree is None:
        return ()
    return tuple(sorted(g for _, g in g_values(tree)))


def removal_multiset(p: Sequence[int]) -> tuple[int, ...]:
    """Number of entries removed by each insertion of a new maximum into the
    132-avoider ``p``, with the front insertion (which removes nothing) dropped.

    This goes through actual insertions and trimming, independently of trees.
    """
    n = len(p)
    removed = sorted(n + 1 - len(insert_and_trim(p, pos, (1, 3, 2)))
                     for pos in range(n + 1))
    removed.remove(0)
    return tuple(removed)


def reconstruct_from_multiset(values: Iterable[int]) -> Perm:
    """Rebuild the unique 132-avoider with the given removal multiset.

    Values are placed in increasing order, which is reverse preorder; each new
    node goes into the only open slot next to the current path whose g-value
    matches.
    """
    vals = sorted(values)
    if not vals:
        return ()
    if vals[0] != 0:
        raise NotRealisableError(f"smallest value must be 0, got {vals[0]}")
    if any(v < 0 for v in vals):
        raise NotRealisableError("negative value in multiset")
    root = Node()
    # path from the root to the most recently placed node, with g-values
    path: list[tuple[Node, int]] = [(root, 0)]
    for s in vals[1:]:
        last, g_last = path[-1]
        # the newest node is still a leaf
        candidates = [("right", len(path) - 1, g_last), ("left", len(path) - 1, g_last + 1)]
        for depth in range(len(path) - 2, -1, -1):
            w, gw = path[depth]
            child = path[depth + 1][0]
            if w.right is child and w.left is None:
                candidates.append(("left", depth, gw + w.right.size() + 1))
        hits = [c for c in candidates if c[2] == s]
        if not hits:
            raise NotRealisableError(f"no open slot has g-value {s}")
        if len(hits) > 1:
            raise NotRealisableError(f"ambiguous slot for g-value {s}")
        side, depth, g_new = hits[0]
        parent = path[depth][0]
        node = Node()
        if side == "right":
            parent.right = node
        else:
            parent.left = node
        del path[depth + 1:]
        path.append((node, g_new))
    p = tree_to_perm(root)
    if multiset_g(root) != tuple(vals):
        raise NotRealisableError("multiset not realised by the rebuilt tree")
    return p
