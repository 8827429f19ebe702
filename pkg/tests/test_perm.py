import itertools

import pytest
from hypothesis import given, strategies as st

from swbound.perm import (
    InvalidInputError,
    PatternSpec,
    contains,
    contains_generic,
    descent_mask,
    descent_set,
    format_perm,
    initial_run_length,
    insert_and_trim,
    insert_max,
    mask_to_set,
    parse_perm,
    set_to_mask,
    short_count,
    standardise,
    trim_to_avoid,
)

perms = st.integers(min_value=1, max_value=9).flatmap(
    lambda n: st.permutations(list(range(1, n + 1))).map(tuple))
distinct = st.lists(st.integers(-50, 50), unique=True, max_size=10)


def test_standardise_examples():
    assert standardise((5, 7, 6)) == (1, 3, 2)
    assert standardise((1, 2, 3)) == (1, 2, 3)
    assert standardise((3, 4, 2)) == (2, 3, 1)


def test_standardise_rejects_duplicates():
    with pytest.raises(InvalidInputError):
        standardise((1, 2, 2))


@given(distinct)
def test_standardise_idempotent(seq):
    once = standardise(seq)
    assert standardise(once) == once
    assert sorted(once) == list(range(1, len(seq) + 1))


def test_contains_examples():
    assert contains(parse_perm("465213"), (1, 3, 2))
    assert not contains(parse_perm("564213"), (1, 3, 2))
    assert contains((3, 1, 2), (1,))


@pytest.mark.parametrize("pat", [(2, 1), (1, 2), (1, 3, 2), (2, 1, 3), (3, 1, 2), (2, 3, 1)])
def test_fast_containment_agrees_with_backtracking(pat):
    for n in range(0, 9):
        for p in itertools.permutations(range(1, n + 1)):
            assert contains(p, pat) == contains_generic(p, pat), p


@given(perms, st.sampled_from([(1, 3, 2), (2, 1, 3), (1, 3, 2, 4)]))
def test_containment_monotone_in_prefix(p, pat):
    flags = [contains(p[:i], pat) for i in range(len(p) + 1)]
    assert flags == sorted(flags)


def test_insert_max_examples():
    assert insert_max(parse_perm("1243"), 0) == parse_perm("51243")
    assert insert_max((1, 2, 3), 3) == (1, 2, 3, 4)
    assert insert_max(parse_perm("321"), 1) == parse_perm("3421")
    with pytest.raises(InvalidInputError):
        insert_max((1, 2), 3)
    with pytest.raises(InvalidInputError):
        insert_max((1, 2), -1)


@given(perms, st.data())
def test_insert_max_keeps_prefix_and_short_values(p, data):
    pos = data.draw(st.integers(0, len(p)))
    q = insert_max(p, pos)
    assert q[:pos] == p[:pos]
    assert len(q) == len(p) + 1 and q[pos] == len(p) + 1
    assert short_count(q) >= short_count(p)
    # an entry that was short stays short
    rl_before = {v for i, v in enumerate(p) if all(v > w for w in p[i + 1:])}
    rl_after = {v for i, v in enumerate(q) if all(v > w for w in q[i + 1:])}
    assert rl_after - {len(p) + 1} <= rl_before


def test_trim_examples():
    # the walk 1243 -> ... -> 57681243 ends at 576, i.e. 132
    assert trim_to_avoid(parse_perm("57681243"), (2, 1, 3)) == (1, 3, 2)
    assert trim_to_avoid(parse_perm("4123"), (2, 1)) == (1,)
    assert trim_to_avoid((1, 3, 2), (2, 1, 3)) == (1, 3, 2)


@pytest.mark.parametrize("t", [(2, 1), (1, 3, 2), (2, 1, 3), (3, 1, 2)])
def test_trim_is_longest_avoiding_prefix(t):
    for n in range(1, 9):
        for p in itertools.permutations(range(1, n + 1)):
            q = trim_to_avoid(p, t)
            k = len(q)
            assert q == standardise(p[:k])
            assert not contains_generic(q, t)
            if k < n:
                assert contains_generic(p[:k + 1], t)


@pytest.mark.slow
@pytest.mark.parametrize("t", [(2, 1), (1, 3, 2), (2, 1, 3), (3, 1, 2)])
def test_trim_minimality_length_nine(t):
    for p in itertools.permutations(range(1, 10)):
        k = len(trim_to_avoid(p, t))
        assert not contains(p[:k], t)
        if k < 9:
            assert contains(p[:k + 1], t)


@pytest.mark.parametrize("t", [(2, 1), (1, 3, 2), (2, 1, 3), (3, 1, 2), (1, 2, 3), (2, 3, 1)])
def test_insert_and_trim_matches_definition(t):
    for n in range(1, 8):
        for p in itertools.permutations(range(1, n + 1)):
            if contains(p, t):
                continue
            for pos in range(n + 1):
                assert insert_and_trim(p, pos, t) == trim_to_avoid(insert_max(p, pos), t)


def test_statistics_examples():
    assert initial_run_length(parse_perm("1243")) == 3
    assert descent_set((1, 3, 2)) == {2}
    assert short_count(parse_perm("785649231")) == 6
    with pytest.raises(InvalidInputError):
        initial_run_length(())


@given(perms)
def test_descent_mask_round_trip(p):
    assert mask_to_set(descent_mask(p)) == descent_set(p)
    assert set_to_mask(descent_set(p)) == descent_mask(p)


def test_parse_and_format():
    assert parse_perm("1,10,2,3,4,5,6,7,8,9") == (1, 10, 2, 3, 4, 5, 6, 7, 8, 9)
    assert format_perm((1, 10, 2, 3, 4, 5, 6, 7, 8, 9)) == "1,10,2,3,4,5,6,7,8,9"
    assert format_perm((2, 1)) == "21"
    for bad in ("", "12a", "122", "13"):
        with pytest.raises(InvalidInputError):
            parse_perm(bad)


def test_pattern_spec():
    assert PatternSpec.parse("1324").trim_target == (1, 3, 2)
    assert PatternSpec.parse("2134").trim_target == (2, 1, 3)
    assert PatternSpec.parse("3124").trim_target == (3, 1, 2)
    assert PatternSpec.parse("213").trim_target == (2, 1)
    with pytest.raises(InvalidInputError):
        PatternSpec.parse("1342")
    with pytest.raises(InvalidInputError):
        PatternSpec.parse("1")
