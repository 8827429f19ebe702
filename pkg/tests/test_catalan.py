import itertools
from collections import Counter

import pytest

from swbound.catalan import (
    NotRealisableError,
    catalan,
    catalan_triangle,
    class_size_A,
    class_size_A_recurrence,
    class_size_B,
    class_size_C,
    g_values,
    multiset_g,
    perm_to_tree,
    reconstruct_from_multiset,
    removal_multiset,
    tree_to_perm,
)
from swbound.oracle import enumerate_avoiders
from swbound.perm import InvalidInputError, descent_mask, initial_run_length, parse_perm, short_count

EXAMPLE_PERM = parse_perm("785649231")
EXAMPLE_MULTISET = (8, 4, 6, 4, 4, 0, 2, 0, 0)


def _catalan_rec(n):
    c = [1]
    for m in range(n):
        c.append(sum(c[i] * c[m - i] for i in range(m + 1)))
    return c[n]


def test_triangle_examples():
    assert all(catalan_triangle(n, 0) == 1 for n in range(30))
    assert catalan_triangle(3, 2) == 5
    assert all(catalan_triangle(n, n) == _catalan_rec(n) for n in range(13))
    assert catalan_triangle(3, 4) == 0 and catalan_triangle(-1, 0) == 0


def test_triangle_matches_ballot_recurrence():
    for n in range(1, 30):
        for k in range(1, n + 1):
            assert catalan_triangle(n, k) == catalan_triangle(n - 1, k) + catalan_triangle(n, k - 1)


@pytest.mark.parametrize("n", range(1, 11))
def test_class_sizes_by_brute_force(n):
    av213 = enumerate_avoiders((2, 1, 3), n)
    runs = Counter(initial_run_length(p) for p in av213)
    assert runs == Counter({r: class_size_B(n, r) for r in range(1, n + 1) if class_size_B(n, r)})
    assert sum(class_size_B(n, r) for r in range(1, n + 1)) == catalan(n)

    av132 = enumerate_avoiders((1, 3, 2), n)
    shorts = Counter(short_count(p) for p in av132)
    assert shorts == Counter({k: class_size_A(n, k) for k in range(n)})
    assert sum(class_size_A(n, k) for k in range(n)) == catalan(n)

    av312 = enumerate_avoiders((3, 1, 2), n)
    masks = Counter(descent_mask(p) for p in av312)
    for mask in range(1 << (n - 1)):
        assert class_size_C(n, mask << 1) == masks.get(mask << 1, 0), (n, mask)


def test_class_size_examples():
    assert class_size_B(4, 1) == 5
    assert all(class_size_B(n, n) == 1 for n in range(1, 20))
    assert class_size_A(4, 2) == 5
    assert all(class_size_A(n, 0) == 1 for n in range(1, 20))
    assert class_size_C(3, set()) == 1
    assert class_size_C(3, {1}) == 1
    assert class_size_C(3, {2}) == 2
    assert class_size_C(3, {3}) == 0


def test_A_recurrence_agrees_with_closed_form():
    for n in range(0, 41):
        for k in range(0, max(n, 1)):
            assert class_size_A_recurrence(n, k) == class_size_A(n, k), (n, k)


def test_tree_examples():
    t = perm_to_tree((1,))
    assert t.left is None and t.right is None
    t = perm_to_tree(EXAMPLE_PERM)
    assert t.size() == 9
    assert tree_to_perm(t) == EXAMPLE_PERM
    with pytest.raises(InvalidInputError):
        perm_to_tree((1, 3, 2))


@pytest.mark.parametrize("n", range(0, 10))
def test_tree_round_trip(n):
    shapes = set()
    for p in enumerate_avoiders((1, 3, 2), n) if n else [()]:
        t = perm_to_tree(p)
        assert tree_to_perm(t) == p
        if t is not None:
            shapes.add(t.shape())
    if n:
        assert len(shapes) == catalan(n)


def test_multiset_examples():
    assert multiset_g(perm_to_tree(EXAMPLE_PERM)) == tuple(sorted(EXAMPLE_MULTISET))
    assert removal_multiset(EXAMPLE_PERM) == tuple(sorted(EXAMPLE_MULTISET))
    assert multiset_g(perm_to_tree((1,))) == (0,)
    # right comb: every node hangs off a right edge
    assert multiset_g(perm_to_tree((5, 4, 3, 2, 1))) == (0,) * 5


def _contributors(tree):
    """Map each node to the g-values of the nodes that contribute to it."""
    out = {}

    def walk(node, g, contrib):
        out[id(node)] = (g, contrib)
        if node.left is not None:
            rsize = node.right.size() if node.right else 0
            walk(node.left, g + rsize + 1, contrib + [g])
        if node.right is not None:
            walk(node.right, g, contrib)

    walk(tree, 0, [])
    return out


@pytest.mark.parametrize("n", range(1, 10))
def test_g_properties(n):
    for p in enumerate_avoiders((1, 3, 2), n):
        t = perm_to_tree(p)
        seq = [g for _, g in g_values(t)]
        assert seq == sorted(seq)
        leaves = [g for node, g in g_values(t) if node.left is None and node.right is None]
        assert len(set(leaves)) == len(leaves)
        for g, contrib in _contributors(t).values():
            assert all(c < g for c in contrib)
        # the tree computation agrees with actual insertion and trimming
        assert multiset_g(t) == removal_multiset(p)


@pytest.mark.parametrize("n", range(1, 10))
def test_reconstruction_is_inverse_and_injective(n):
    seen = {}
    for p in enumerate_avoiders((1, 3, 2), n):
        m = removal_multiset(p)
        assert m not in seen
        seen[m] = p
        assert reconstruct_from_multiset(m) == p
        assert reconstruct_from_multiset(reversed(m)) == p


def test_reconstruct_examples():
    assert reconstruct_from_multiset(EXAMPLE_MULTISET) == EXAMPLE_PERM
    assert reconstruct_from_multiset([]) == ()
    assert reconstruct_from_multiset([0]) == (1,)


@pytest.mark.parametrize("bad", [[1], [0, 5], [-1, 0], [0, 3, 3], [0, 2, 2]])
def test_reconstruct_rejects(bad):
    with pytest.raises(NotRealisableError):
        reconstruct_from_multiset(bad)


def test_unrealisable_multisets_rejected_exhaustively():
    n = 5
    realisable = {removal_multiset(p) for p in enumerate_avoiders((1, 3, 2), n)}
    for m in itertools.combinations_with_replacement(range(n + 1), n):
        if m in realisable:
            assert removal_multiset(reconstruct_from_multiset(m)) == m
        else:
            with pytest.raises(NotRealisableError):
                reconstruct_from_multiset(m)
