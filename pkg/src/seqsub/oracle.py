"""Exact optima by enumeration.

``opt_full`` walks every feasible sequence.  The two subset methods enumerate
item sets and evaluate each in a fixed order: the topological order for DAG
objectives, and time-stamp order for search and tracking.  The time-sorted
method is only trusted after :func:`validate_timesort` has compared it with
``opt_full`` on random small instances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import OracleUnvalidated, TooLarge
from .objectives import InstanceOracle, SearchTrackInstance, searchtrack_kernel
from .seqcore import exceeds

DEFAULT_GUARD = 10**7
METHODS = ("full_sequence", "subset_reorder", "subset_timesort")

_validated = {}


@dataclass(frozen=True)
class OptResult:
    value: float
    witness: tuple
    enumerated: int
    method: str


def count_sequences(n, k, allows_repeats):
    """Number of sequences of length at most ``k``."""
    if allows_repeats:
        return sum(n**j for j in range(k + 1))
    return sum(math.perm(n, j) for j in range(min(k, n) + 1))


def count_subsets(n, k):
    return sum(math.comb(n, j) for j in range(min(k, n) + 1))


def opt_full(oracle, k, guard=DEFAULT_GUARD):
    """Best sequence of length at most ``k``; ties to the lexicographically smallest.

    Enumeration is depth-first in lexicographic order with a strict
    comparison, so the first maximizer met is the smallest one.
    """
    total = count_sequences(oracle.n, k, oracle.allows_repeats)
    if total > guard:
        raise TooLarge(total, guard)
    best = [oracle(()), ()]
    count = 1

    def walk(prefix):
        nonlocal count
        if len(prefix) == k:
            return
        for v in range(oracle.n):
            if not oracle.allows_repeats and v in prefix:
                continue
            s = prefix + (v,)
            val = oracle(s)
            count += 1
            if val > best[0]:
                best[0], best[1] = val, s
            walk(s)

    walk(())
    return OptResult(float(best[0]), best[1], count, "full_sequence")


@njit(cache=True)
def _best_subset(fn, data, order, k):
    """Enumerate subsets of ``order`` of size <= k, each kept in ``order``.

    Depth-first over index combinations, strict improvement only.
    """
    n = order.shape[0]
    k = min(k, n)
    buf = np.zeros(max(k, 1), dtype=np.int64)
    idx = np.zeros(max(k, 1), dtype=np.int64)
    best = fn(data, buf, 0)
    best_len = 0
    best_buf = np.zeros(max(k, 1), dtype=np.int64)
    count = 1
    depth = 0
    if k == 0:
        return best, best_buf[:0], count
    idx[0] = 0
    while depth >= 0:
        if idx[depth] >= n:
            depth -= 1
            if depth >= 0:
                idx[depth] += 1
            continue
        buf[depth] = order[idx[depth]]
        val = fn(data, buf, depth + 1)
        count += 1
        if val > best:
            best = val
            best_len = depth + 1
            for i in range(best_len):
                best_buf[i] = buf[i]
        if depth + 1 < k and idx[depth] + 1 < n:
            idx[depth + 1] = idx[depth] + 1
            depth += 1
        else:
            idx[depth] += 1
    return best, best_buf[:best_len], count


def _subset_opt(fn, data, order, n, k, guard, method):
    total = count_subsets(n, k)
    if total > guard:
        raise TooLarge(total, guard)
    value, witness, count = _best_subset(fn, data, np.asarray(order, dtype=np.int64), k)
    return OptResult(float(value), tuple(int(x) for x in witness), int(count), method)


def opt_subset_reorder(obj, k, guard=DEFAULT_GUARD):
    """OPT of a DAG objective: best item set sorted topologically."""
    oracle = obj.oracle("raw")
    fn, data = oracle.kernel
    return _subset_opt(fn, data, obj.dag.order, obj.n, k, guard, "subset_reorder")


def _timesort(inst, k, guard):
    return _subset_opt(searchtrack_kernel, inst.kernel_data, inst.time_order(),
                       inst.n, k, guard, "subset_timesort")


def opt_subset_timesort(inst: SearchTrackInstance, k, guard=DEFAULT_GUARD):
    """OPT of a search-and-tracking instance: best pattern set in time order.

    Raises :class:`OracleUnvalidated` unless :func:`validate_timesort` passed
    for the instance's repeat policy in this process.
    """
    status = _validated.get(inst.allows_repeats)
    if status is None or not status["passed"]:
        raise OracleUnvalidated(
            f"time-sorted OPT not validated for allows_repeats={inst.allows_repeats}")
    return _timesort(inst, k, guard)


def validate_timesort(allows_repeats=False, trials=200, seed=0):
    """Cross-check time-sorted OPT against full enumeration on small instances.

    Returns a dict with ``passed``, ``trials`` and the first failing
    ``witness`` (instance, k, both results) if any.
    """
    from .bench.generators import gen_searchtrack

    rng = np.random.default_rng(seed)
    result = {"passed": True, "trials": trials, "witness": None}
    for i in range(trials):
        n = int(rng.integers(1, 5))
        k = int(rng.integers(1, 4))
        paths = int(rng.integers(1, 4))
        slope = float(rng.choice([-1.0, -0.5, 0.0, 0.5, 1.0]))
        inst = gen_searchtrack(n, k, paths, slope, seed=int(rng.integers(2**31)),
                               allows_repeats=allows_repeats)
        full = opt_full(InstanceOracle(inst), k)
        fast = _timesort(inst, k, DEFAULT_GUARD)
        if exceeds(full.value, fast.value) or exceeds(fast.value, full.value):
            result.update(passed=False, witness={"instance": inst, "k": k,
                                                 "full": full, "timesort": fast})
            break
    _validated[allows_repeats] = result
    return result
