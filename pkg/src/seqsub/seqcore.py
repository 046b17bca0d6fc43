"""Sequences, sequence relations, objective oracles and bounded property checkers.

A sequence is a plain ``tuple`` of item indices in ``[0, n)``.  The checkers
enumerate every sequence up to a length bound and test the defining
inequalities of the monotonicity and submodularity notions, so a ``holds=True``
report is a statement about the searched space only.
"""

from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass
from enum import Flag

import numpy as np

from .errors import BudgetExceeded, DegenerateInstance, RepeatViolation

EPS = 1e-9
DEFAULT_MAX_LEN = 3
DEFAULT_BUDGET = 10**6

MONOTONICITY_KINDS = ("subsequence", "prefix", "suffix", "weak")
SUBMODULARITY_KINDS = ("strong", "subsequence", "prefix")


class Relation(Flag):
    """How ``s`` sits inside ``t``; PREFIX and SUFFIX always carry SUBSEQ."""

    NONE = 0
    SUBSEQ = 1
    PREFIX = 2
    SUFFIX = 4


def is_subsequence(s, t):
    """True if ``s`` can be obtained from ``t`` by deleting items."""
    it = iter(t)
    return all(any(x == y for y in it) for x in s)


def relation(s, t):
    """Return the :class:`Relation` flags of ``s`` with respect to ``t``."""
    s, t = tuple(s), tuple(t)
    rel = Relation.NONE
    if len(s) > len(t):
        return rel
    if t[: len(s)] == s:
        rel |= Relation.PREFIX | Relation.SUBSEQ
    if t[len(t) - len(s):] == s:
        rel |= Relation.SUFFIX | Relation.SUBSEQ
    if not rel and is_subsequence(s, t):
        rel |= Relation.SUBSEQ
    return rel


def has_repeats(s):
    return len(set(s)) != len(s)


def concat(s, t, allows_repeats=True):
    """Concatenate two sequences, refusing repeats when they are forbidden."""
    out = tuple(s) + tuple(t)
    if not allows_repeats and has_repeats(out):
        raise RepeatViolation(f"concatenation {out} repeats an item")
    return out


def validate_sequence(s, n, allows_repeats):
    """Return ``s`` as a tuple after checking item range and repeat policy."""
    s = tuple(int(x) for x in s)
    for x in s:
        if not 0 <= x < n:
            raise ValueError(f"item {x} outside ground set of size {n}")
    if not allows_repeats and has_repeats(s):
        raise RepeatViolation(f"sequence {s} repeats an item")
    return s


def enumerate_sequences(n, max_len, allows_repeats=True, min_len=0):
    """Yield all sequences with ``min_len <= len <= max_len``.

    Order is by length, then lexicographic within a length.
    """
    for length in range(min_len, max_len + 1):
        if allows_repeats:
            yield from itertools.product(range(n), repeat=length)
        elif length <= n:
            yield from itertools.permutations(range(n), length)


class Oracle:
    """Sequence objective with a ground-set size, repeat policy and call counter.

    Subclasses implement :meth:`value`.  Calling the oracle counts one
    evaluation; the counter is guarded by a lock so concurrent callers never
    lose increments.  Oracles that set ``kernel`` to a ``(function, data)``
    pair can also be driven by the compiled optimizer loops.
    """

    kernel = None

    def __init__(self, n, allows_repeats=True):
        if n < 1:
            raise ValueError("ground set must be non-empty")
        self.n = int(n)
        self.allows_repeats = bool(allows_repeats)
        self._count = 0
        self._lock = threading.Lock()

    @property
    def eval_count(self):
        return self._count

    def add_evaluations(self, count):
        """Account for evaluations performed outside ``__call__``."""
        with self._lock:
            self._count += int(count)

    def __call__(self, s):
        with self._lock:
            self._count += 1
        return self.value(s)

    def value(self, s):
        raise NotImplementedError


class FunctionOracle(Oracle):
    """Wrap a plain Python callable on tuples."""

    def __init__(self, fn, n, allows_repeats=True):
        super().__init__(n, allows_repeats)
        self.fn = fn

    def value(self, s):
        return float(self.fn(tuple(s)))


class CompiledOracle(Oracle):
    """Oracle backed by a numba evaluator ``fn(data, seq_array, length)``."""

    def __init__(self, n, allows_repeats, fn, data):
        super().__init__(n, allows_repeats)
        self.kernel = (fn, data)

    def value(self, s):
        fn, data = self.kernel
        arr = np.asarray(s, dtype=np.int64).reshape(-1)
        return float(fn(data, arr, arr.shape[0]))


@dataclass(frozen=True)
class PropertyReport:
    """Outcome of one bounded property check.

    ``horizon`` is the longest sequence length that was evaluated, which can
    exceed ``max_len`` because extensions and suffixes are appended.
    """

    property: str
    holds: bool
    witness: tuple | None
    max_len: int
    n: int
    horizon: int
    evaluations: int


def exceeds(a, b, scale=1.0):
    """True if ``a > b`` by more than ``EPS`` times ``max(1, scale, |a|, |b|)``."""
    return a - b > EPS * max(1.0, scale, abs(a), abs(b))


class _Probe:
    """Memoising evaluator with an evaluation budget."""

    def __init__(self, oracle, budget):
        self.oracle = oracle
        self.budget = budget
        self.cache = {}

    def __call__(self, s):
        v = self.cache.get(s)
        if v is None:
            if len(self.cache) >= self.budget:
                raise BudgetExceeded(f"checker exceeded {self.budget} evaluations")
            v = self.oracle(s)
            self.cache[s] = v
        return v

    @property
    def evaluations(self):
        return len(self.cache)


def _single_deletions(t, kind):
    if kind == "prefix":
        return [t[:-1]]
    if kind == "suffix":
        return [t[1:]]
    return list(dict.fromkeys(t[:i] + t[i + 1:] for i in range(len(t))))


def merges(s, t):
    """All common supersequences built by interleaving ``s`` and ``t``.

    Equal items may be merged into one position, so lengths range from
    ``max(|s|, |t|)`` to ``|s| + |t|``.
    """
    out = set()

    def walk(i, j, acc):
        if i == len(s) and j == len(t):
            out.add(acc)
            return
        if i < len(s):
            walk(i + 1, j, acc + (s[i],))
        if j < len(t):
            walk(i, j + 1, acc + (t[j],))
        if i < len(s) and j < len(t) and s[i] == t[j]:
            walk(i + 1, j + 1, acc + (s[i],))

    walk(0, 0, ())
    return sorted(out, key=lambda w: (len(w), w))


def check_monotonicity(oracle, kind, max_len=DEFAULT_MAX_LEN, budget=DEFAULT_BUDGET):
    """Exhaustively test a monotonicity notion.

    For prefix, suffix and subsequence monotonicity every sequence ``t`` up to
    length ``2 * max_len`` is compared with its single-item deletions of the
    matching kind, which covers all related pairs by transitivity.  Weak
    monotonicity pairs every ``s, t`` up to ``max_len`` and searches the
    interleavings of the two for a ``w`` with ``f(w) >= f(s)``.  Under a
    no-repeat policy only pairs with disjoint items are tested, since other
    pairs may have no valid ``w`` at all.
    """
    if kind not in MONOTONICITY_KINDS:
        raise ValueError(f"unknown monotonicity kind {kind!r}")
    probe = _Probe(oracle, budget)
    n, rep = oracle.n, oracle.allows_repeats
    horizon = 2 * max_len

    def report(witness):
        return PropertyReport(f"{kind}-monotone", witness is None, witness,
                              max_len, n, horizon, probe.evaluations)

    if kind != "weak":
        for t in enumerate_sequences(n, horizon, rep, min_len=1):
            ft = probe(t)
            for s in _single_deletions(t, kind):
                if exceeds(probe(s), ft):
                    return report((s, t))
        return report(None)

    seqs = list(enumerate_sequences(n, max_len, rep))
    for s in seqs:
        fs = probe(s)
        for t in seqs:
            if not rep and set(s) & set(t):
                continue
            if not exceeds(fs, probe(s + t)) or not exceeds(fs, probe(t + s)):
                continue
            if not any(not exceeds(fs, probe(w)) for w in merges(s, t)
                       if rep or not has_repeats(w)):
                return report((s, t))
    return report(None)


def check_submodularity(oracle, kind, max_len=DEFAULT_MAX_LEN, budget=DEFAULT_BUDGET):
    """Exhaustively test a submodularity notion.

    Pairs ``s <= t`` are reduced to single deletions from ``t`` (the last item
    for the prefix kind); chains of such steps give every pair.  The strong
    kind additionally ranges over suffixes ``o`` up to ``max_len``.
    Witnesses are ``(s, t, v)`` or ``(s, t, v, o)``.
    """
    if kind not in SUBMODULARITY_KINDS:
        raise ValueError(f"unknown submodularity kind {kind!r}")
    probe = _Probe(oracle, budget)
    n, rep = oracle.n, oracle.allows_repeats
    suffixes = list(enumerate_sequences(n, max_len, rep)) if kind == "strong" else [()]
    horizon = 2 * max_len + 1 if kind == "strong" else max_len + 1
    del_kind = "prefix" if kind == "prefix" else "subsequence"

    def report(witness):
        return PropertyReport(f"{kind}-submodular", witness is None, witness,
                              max_len, n, horizon, probe.evaluations)

    for t in enumerate_sequences(n, max_len, rep, min_len=1):
        for s in _single_deletions(t, del_kind):
            for v in range(n):
                for o in suffixes:
                    tail = (v,) + o
                    if not rep and has_repeats(t + tail):
                        continue
                    gs = probe(s + tail) - probe(s + o)
                    gt = probe(t + tail) - probe(t + o)
                    if exceeds(gt, gs, _scale(probe, s, t, tail, o)):
                        witness = (s, t, v, o) if kind == "strong" else (s, t, v)
                        return report(witness)
    return report(None)


def _scale(probe, s, t, tail, o):
    vals = (probe(s + tail), probe(s + o), probe(t + tail), probe(t + o))
    return max(1.0, *(abs(x) for x in vals))


def submodularity_holds_at(oracle, witness):
    """Re-evaluate a submodularity witness; True if the inequality holds."""
    s, t, v = witness[:3]
    o = witness[3] if len(witness) > 3 else ()
    tail = (v,) + tuple(o)
    vals = [oracle(x) for x in (s + tail, s + o, t + tail, t + o)]
    scale = max(1.0, *(abs(x) for x in vals))
    return not exceeds(vals[2] - vals[3], vals[0] - vals[1], scale)


def curvature(oracle, s, m):
    """Curvature of ``f`` with respect to a nonempty ``s`` over probes ``|t| <= m``.

    Raises :class:`DegenerateInstance` if some probe has ``f(t) == 0``.
    """
    s = tuple(s)
    if not s:
        raise ValueError("curvature is defined only for a nonempty sequence")
    if m < 1:
        raise ValueError("m must be at least 1")
    fs = oracle(s)
    best = -np.inf
    for t in enumerate_sequences(oracle.n, m, oracle.allows_repeats, min_len=1):
        if not oracle.allows_repeats and set(t) & set(s):
            continue
        ft = oracle(t)
        if ft == 0:
            raise DegenerateInstance(f"f{t} = 0, curvature undefined")
        best = max(best, 1.0 - (oracle(t + s) - fs) / ft)
    return float(best)
