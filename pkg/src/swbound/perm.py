"""Permutations in one-line notation, pattern containment and the statistics
used to key quotient classes.

Permutations are plain tuples of ints over 1..n. Nothing here mutates its
arguments, so every function is safe to call from several threads.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

Perm = tuple  # tuple[int, ...] in one-line notation


class InvalidInputError(ValueError):
    """Raised for malformed permutations, positions or patterns."""


def parse_perm(text: str) -> Perm:
    """Parse ``"1324"`` or ``"1,3,2,4"`` / ``"1 3 2 4"`` (needed once n >= 10)."""
    text = text.strip()
    if not text:
        raise InvalidInputError("empty permutation string")
    if "," in text or " " in text:
        parts = [t for t in text.replace(",", " ").split() if t]
    else:
        parts = list(text)
    try:
        values = tuple(int(t) for t in parts)
    except ValueError as exc:
        raise InvalidInputError(f"cannot parse permutation {text!r}") from exc
    return as_perm(values)


def format_perm(p: Sequence[int]) -> str:
    if all(v < 10 for v in p):
        return "".join(str(v) for v in p)
    return ",".join(str(v) for v in p)


def as_perm(values: Iterable[int]) -> Perm:
    p = tuple(values)
    if sorted(p) != list(range(1, len(p) + 1)):
        raise InvalidInputError(f"{p} is not a permutation of 1..{len(p)}")
    return p


def standardise(seq: Sequence[int]) -> Perm:
    """Rename distinct values to 1..n keeping their relative order."""
    order = sorted(range(len(seq)), key=seq.__getitem__)
    out = [0] * len(seq)
    prev = None
    for rank, i in enumerate(order, 1):
        if prev is not None and seq[i] == prev:
            raise InvalidInputError(f"duplicate entry {prev} in {tuple(seq)}")
        prev = seq[i]
        out[i] = rank
    return tuple(out)


# ---------------------------------------------------------------------------
# containment

def _contains_len3(host: Sequence[int], pat: Sequence[int]) -> bool:
    # Fix the middle letter; the outer two only need one comparison between them.
    a, b, c = pat
    n = len(host)
    left_below = a < b
    right_below = c < b
    outer_increasing = a < c
    for j in range(1, n - 1):
        hj = host[j]
        lefts = [x for x in host[:j] if (x < hj) == left_below]
        if not lefts:
            continue
        rights = [x for x in host[j + 1:] if (x < hj) == right_below]
        if not rights:
            continue
        if outer_increasing:
            if min(lefts) < max(rights):
                return True
        elif max(lefts) > min(rights):
            return True
    return False


def _contains_generic(host: Sequence[int], pat: Sequence[int]) -> bool:
    k = len(pat)
    n = len(host)
    chosen: list[int] = []

    def extend(start: int) -> bool:
        t = len(chosen)
        if t == k:
            return True
        # Leave room for the remaining pattern letters.
        for i in range(start, n - (k - t) + 1):
            v = host[i]
            ok = True
            for s in range(t):
                if (host[chosen[s]] < v) != (pat[s] < pat[t]):
                    ok = False
                    break
            if ok:
                chosen.append(i)
                if extend(i + 1):
                    return True
                chosen.pop()
        return False

    return extend(0)


def contains(host: Sequence[int], pat: Sequence[int]) -> bool:
    """True iff some subsequence of ``host`` is order-isomorphic to ``pat``.

    Patterns of length <= 3 use direct scans; longer ones a backtracking
    embedding search. ``contains_generic`` exposes the latter for cross-checks.
    """
    k = len(pat)
    if k == 0:
        return True
    if k > len(host):
        return False
    if k == 1:
        return True
    if k == 2:
        # Without an adjacent ascent the host is decreasing, and vice versa.
        if pat[0] < pat[1]:
            return any(host[i] < host[i + 1] for i in range(len(host) - 1))
        return any(host[i] > host[i + 1] for i in range(len(host) - 1))
    if k == 3:
        return _contains_len3(host, pat)
    return _contains_generic(host, pat)


def contains_generic(host: Sequence[int], pat: Sequence[int]) -> bool:
    if len(pat) == 0:
        return True
    if len(pat) > len(host):
        return False
    return _contains_generic(host, pat)


def avoids(host: Sequence[int], pat: Sequence[int]) -> bool:
    return not contains(host, pat)


# ---------------------------------------------------------------------------
# insertion and trimming

def insert_max(p: Sequence[int], pos: int) -> Perm:
    """Insert the value n+1 with ``pos`` elements to its left."""
    n = len(p)
    if not 0 <= pos <= n:
        raise InvalidInputError(f"insertion position {pos} outside 0..{n}")
    return tuple(p[:pos]) + (n + 1,) + tuple(p[pos:])


def trim_to_avoid(p: Sequence[int], t: Sequence[int]) -> Perm:
    """Longest prefix of ``p`` avoiding ``t``, standardised.

    Containment is monotone in the prefix length, so binary search suffices.
    """
    if not contains(p, t):
        return standardise(p)
    lo, hi = 0, len(p)  # p[:lo] avoids, p[:hi] contains
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if contains(p[:mid], t):
            hi = mid
        else:
            lo = mid
    return standardise(p[:lo])


def insert_and_trim(p: Sequence[int], pos: int, t: Sequence[int]) -> Perm:
    """``trim_to_avoid(insert_max(p, pos), t)`` for ``p`` already avoiding ``t``.

    Every new occurrence must use the inserted maximum, which gives linear
    scans for the trim targets in use (21, 132, 213, 312). Other targets fall
    back to the generic routine.
    """
    n = len(p)
    if not 0 <= pos <= n:
        raise InvalidInputError(f"insertion position {pos} outside 0..{n}")
    t = tuple(t)
    big = n + 1
    if t == (2, 1):
        if pos == n:
            return tuple(p) + (big,)
        return standardise(tuple(p[:pos]) + (big,))
    if t == (1, 3, 2):
        if pos == 0:
            return (big,) + tuple(p)
        a = min(p[:pos])
        for j in range(pos, n):
            if p[j] > a:
                return standardise(tuple(p[:pos]) + (big,) + tuple(p[pos:j]))
        return tuple(p[:pos]) + (big,) + tuple(p[pos:])
    if t == (2, 1, 3):
        head = p[:pos]
        for i in range(len(head) - 1):
            if head[i] > head[i + 1]:
                return standardise(head)
        return tuple(head) + (big,) + tuple(p[pos:])
    if t == (3, 1, 2):
        for j in range(pos + 1, n):
            if p[j] > p[j - 1]:
                return standardise(tuple(p[:pos]) + (big,) + tuple(p[pos:j]))
        return tuple(p[:pos]) + (big,) + tuple(p[pos:])
    return trim_to_avoid(insert_max(p, pos), t)


# ---------------------------------------------------------------------------
# statistics

def initial_run_length(p: Sequence[int]) -> int:
    if not p:
        raise InvalidInputError("empty permutation has no initial run")
    r = 1
    while r < len(p) and p[r - 1] < p[r]:
        r += 1
    return r


def descent_set(p: Sequence[int]) -> frozenset:
    """1-based indices i with p_i > p_{i+1}."""
    return frozenset(i + 1 for i in range(len(p) - 1) if p[i] > p[i + 1])


def descent_mask(p: Sequence[int]) -> int:
    """Descent set as a bitmask: bit i-1 set iff i is a descent."""
    mask = 0
    for i in range(len(p) - 1):
        if p[i] > p[i + 1]:
            mask |= 1 << i
    return mask


def mask_to_set(mask: int) -> frozenset:
    return frozenset(i + 1 for i in range(mask.bit_length()) if mask >> i & 1)


def set_to_mask(s: Iterable[int]) -> int:
    mask = 0
    for i in s:
        mask |= 1 << (i - 1)
    return mask


def rl_maxima_count(p: Sequence[int]) -> int:
    best = 0
    count = 0
    for v in reversed(p):
        if v > best:
            best = v
            count += 1
    return count


def short_count(p: Sequence[int]) -> int:
    """Number of entries that are not right-to-left maxima."""
    if not p:
        raise InvalidInputError("empty permutation")
    return len(p) - rl_maxima_count(p)


def is_increasing(p: Sequence[int]) -> bool:
    return all(p[i] < p[i + 1] for i in range(len(p) - 1))


# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PatternSpec:
    """An avoided pattern that ends in its maximum, plus its trim target."""

    pattern: Perm

    def __post_init__(self):
        pat = as_perm(self.pattern)
        object.__setattr__(self, "pattern", pat)
        if len(pat) < 2 or pat[-1] != len(pat):
            raise InvalidInputError(
                f"pattern {format_perm(pat)} must have length >= 2 and end in its maximum"
            )

    @property
    def trim_target(self) -> Perm:
        return standardise(self.pattern[:-1])

    @property
    def name(self) -> str:
        return format_perm(self.pattern)

    @classmethod
    def parse(cls, text: str) -> "PatternSpec":
        return cls(parse_perm(text))
