"""Sequence optimizers: greedy, generalized greedy, OMegA and GSEMO.

GSEMO maximizes ``(f1, f2)`` where ``f1(s) = f(s)`` for ``|s| < cap`` and
``NEG_INF`` otherwise, and ``f2(s) = -|s|``.  Two implementations share one
random stream: a literal Python version that works with any oracle, and a
numba kernel for oracles exposing a compiled evaluator.  Every random number
is drawn with ``rng.random()`` in the same order, so both produce the same
run for the same seed.

Random draws per iteration: one uniform for the parent, one for the Poisson
count ``r``, then per operation a coin (``< 0.5`` inserts) followed by the item
and slot uniforms for an insertion or the position uniform for a deletion.
No-op operations (deleting from the empty sequence, inserting into a
sequence that already holds every item) consume only the coin.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple

import numpy as np
from numba import njit

from .seqcore import has_repeats

NEG_INF = float("-inf")
POISSON_CUTOFF = 20
PROBLEM_CLASSES = ("prefix_monotone", "weakly_monotone", "dag")
VARIANTS = ("standard", "k_variant")


def _poisson_cdf(lam=1.0, cutoff=POISSON_CUTOFF):
    terms = [math.exp(-lam)]
    for r in range(1, cutoff + 1):
        terms.append(terms[-1] * lam / r)
    return np.cumsum(terms)


POISSON_CDF = _poisson_cdf()


class BiValue(NamedTuple):
    f1: float
    f2: int


class Dominance(Enum):
    A_STRICT = "a_strict"
    B_STRICT = "b_strict"
    EQUAL = "equal"
    INCOMPARABLE = "incomparable"


def weakly_dominates(a, b):
    return a.f1 >= b.f1 and a.f2 >= b.f2


def strictly_dominates(a, b):
    return weakly_dominates(a, b) and (a.f1 > b.f1 or a.f2 > b.f2)


def dominate_relation(a, b):
    """Compare two bi-objective values."""
    a, b = BiValue(*a), BiValue(*b)
    if a == b:
        return Dominance.EQUAL
    if strictly_dominates(a, b):
        return Dominance.A_STRICT
    if strictly_dominates(b, a):
        return Dominance.B_STRICT
    return Dominance.INCOMPARABLE


def sample_poisson(u):
    """Poisson(1) count by inversion of a uniform ``u``, capped at 20."""
    return min(int(np.searchsorted(POISSON_CDF, u, side="right")), POISSON_CUTOFF)


def uniform_index(u, m):
    """Map a uniform in ``[0, 1)`` to ``{0, ..., m - 1}``."""
    return min(int(u * m), m - 1)


def mutate(s, n, rng, allows_repeats=True, log=None):
    """Apply ``r ~ Poisson(1)`` random insertions or deletions to ``s``.

    If ``log`` is a list, ``(r, ops)`` is appended where each op is
    ``(kind, applied)``.
    """
    s = list(s)
    r = sample_poisson(rng.random())
    ops = []
    for _ in range(r):
        if rng.random() < 0.5:
            if not allows_repeats and len(s) >= n:
                ops.append(("insert", False))
                continue
            if allows_repeats:
                v = uniform_index(rng.random(), n)
            else:
                present = set(s)
                absent = [x for x in range(n) if x not in present]
                v = absent[uniform_index(rng.random(), len(absent))]
            s.insert(uniform_index(rng.random(), len(s) + 1), v)
            ops.append(("insert", True))
        else:
            if not s:
                ops.append(("delete", False))
                continue
            del s[uniform_index(rng.random(), len(s))]
            ops.append(("delete", True))
    if log is not None:
        log.append((r, ops))
    return tuple(s)


@dataclass(frozen=True)
class GsemoConfig:
    """GSEMO settings.  ``allows_repeats=None`` follows the oracle."""

    k: int
    T: int
    variant: str = "standard"
    allows_repeats: bool | None = None
    seed: int = 0
    dag_reorder: bool = False

    def __post_init__(self):
        if self.k < 1 or self.T < 0:
            raise ValueError("need k >= 1 and T >= 0")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")

    @property
    def cap(self):
        return 2 * self.k if self.variant == "standard" else self.k + 1


@dataclass
class RunRecord:
    """Result of one optimizer run.

    ``improvements`` lists ``(iteration, evaluations, best_f)`` each time the
    best feasible value rises; ``trace`` lists ``(evaluations, best_f)``
    checkpoints every ``trace_every`` evaluations plus the final state.
    """

    best: tuple
    best_value: float
    evaluations_used: int
    iterations: int
    seed: int = 0
    trace: list = field(default_factory=list)
    improvements: list = field(default_factory=list)
    archive: list = field(default_factory=list)
    invariant_violations: int = 0

    def best_at_iteration(self, iteration):
        """Best feasible value after ``iteration`` iterations."""
        best = self.improvements[0][2]
        for it, _, v in self.improvements:
            if it > iteration:
                break
            best = v
        return best


def budget_for(problem_class, n, k, variant="standard"):
    """Iteration budget from the expected-runtime bounds, rounded up."""
    if problem_class not in PROBLEM_CLASSES:
        raise ValueError(f"problem_class must be one of {PROBLEM_CLASSES}")
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    if problem_class == "dag":
        coef = 4 * k * k * n * n if variant == "standard" else 2 * k * (k + 1) * n * n
    else:
        coef = 2 * k * k * (k + 1) * n if variant == "standard" else k * (k + 1) ** 2 * n
    return math.ceil(coef * math.e)


def _make_trace(improvements, evaluations, every):
    points = [(improvements[0][1], improvements[0][2])]
    idx = 0
    for c in range(every, evaluations + 1, every):
        while idx + 1 < len(improvements) and improvements[idx + 1][1] <= c:
            idx += 1
        points.append((c, improvements[idx][2]))
    final = improvements[-1][2]
    if points[-1] != (evaluations, final):
        points.append((evaluations, final))
    return points


def gsemo(oracle, cfg, *, compiled=None, check_invariants=False, trace_every=None):
    """Run GSEMO for ``cfg.T`` iterations and return a :class:`RunRecord`.

    ``compiled=None`` uses the numba kernel when the oracle has one.
    ``check_invariants`` verifies the archive after every iteration and
    reports the number of violations.  ``trace_every`` defaults to ``k * n``.
    """
    source = oracle
    if cfg.dag_reorder:
        if not hasattr(oracle, "obj"):
            raise ValueError("dag_reorder requires a DAG oracle")
        oracle = oracle.obj.oracle("reordered")
    if cfg.allows_repeats is not None and cfg.allows_repeats != oracle.allows_repeats:
        raise ValueError("config repeat policy differs from the oracle's")
    if compiled is None:
        compiled = oracle.kernel is not None
    if compiled and oracle.kernel is None:
        raise ValueError("oracle has no compiled evaluator")
    rng = np.random.default_rng(cfg.seed)
    run = _gsemo_kernel_run if compiled else _gsemo_python
    best, best_value, evals, improvements, archive, violations = run(
        oracle, cfg, rng, check_invariants)
    if oracle is not source:
        source.add_evaluations(evals)
        best = tuple(sorted(set(best), key=lambda v: source.obj.dag.rank[v]))
    every = trace_every or cfg.k * oracle.n
    return RunRecord(best, best_value, evals, cfg.T, cfg.seed,
                     _make_trace(improvements, evals, every), improvements,
                     archive, violations)


def _archive_violations(archive, cap, prev_best, k):
    """Count broken archive invariants; ``archive`` is sorted by length."""
    bad = 0
    if len(archive) > cap:
        bad += 1
    for i, (s, v) in enumerate(archive):
        if v == NEG_INF or len(s) >= cap:
            bad += 1
        for t, w in archive[i + 1:]:
            a, b = BiValue(v, -len(s)), BiValue(w, -len(t))
            if dominate_relation(a, b) is not Dominance.INCOMPARABLE:
                bad += 1
    feasible = [v for s, v in archive if len(s) <= k]
    cur = max(feasible) if feasible else NEG_INF
    if cur < prev_best:
        bad += 1
    return bad, cur


def _gsemo_python(oracle, cfg, rng, check):
    k, cap = cfg.k, cfg.cap
    f0 = oracle(())
    archive = [((), f0)]
    improvements = [(0, 1, f0)]
    best, evals, violations = f0, 1, 0
    for it in range(1, cfg.T + 1):
        parent = archive[uniform_index(rng.random(), len(archive))][0]
        log = []
        child = mutate(parent, oracle.n, rng, oracle.allows_repeats, log)
        if not any(applied for _, applied in log[0][1]):
            continue
        if len(child) >= cap:
            value = NEG_INF
        else:
            value = oracle(child)
            evals += 1
        bv = BiValue(value, -len(child))
        if any(strictly_dominates(BiValue(v, -len(s)), bv) for s, v in archive):
            pass
        else:
            archive = [(s, v) for s, v in archive
                       if not weakly_dominates(bv, BiValue(v, -len(s)))]
            archive.append((child, value))
            archive.sort(key=lambda m: len(m[0]))
            if len(child) <= k and value > best:
                best = value
                improvements.append((it, evals, value))
        if check:
            bad, best_now = _archive_violations(archive, cap, best, k)
            violations += bad + (best_now != best)
    feasible = [m for m in archive if len(m[0]) <= k]
    best_seq, best_value = max(feasible, key=lambda m: m[1])
    return best_seq, best_value, evals, improvements, archive, violations


@njit(cache=True)
def _uidx(u, m):
    i = int(u * m)
    return i if i < m else m - 1


@njit(cache=True)
def _poisson(u, cdf):
    for r in range(cdf.shape[0]):
        if u < cdf[r]:
            return r
    return cdf.shape[0] - 1


@njit(cache=True)
def _gsemo_loop(fn, data, n, k, cap, T, rep, rng, cdf, check):
    width = cap + cdf.shape[0]
    seqs = np.zeros((cap, width), dtype=np.int64)
    vals = np.zeros(cap)
    occ = np.zeros(cap, dtype=np.bool_)
    members = np.zeros(cap, dtype=np.int64)
    child = np.zeros(width, dtype=np.int64)
    used = np.zeros(n, dtype=np.bool_)
    imp_it = np.zeros(64, dtype=np.int64)
    imp_ev = np.zeros(64, dtype=np.int64)
    imp_val = np.zeros(64)

    f0 = fn(data, child, 0)
    occ[0] = True
    vals[0] = f0
    members[0] = 0
    n_members = 1
    evals = 1
    best = f0
    n_imp = 1
    imp_it[0] = 0
    imp_ev[0] = 1
    imp_val[0] = f0
    violations = 0

    for it in range(1, T + 1):
        plen = members[_uidx(rng.random(), n_members)]
        length = plen
        for i in range(plen):
            child[i] = seqs[plen, i]
        if not rep:
            for i in range(plen):
                used[child[i]] = True
        r = _poisson(rng.random(), cdf)
        changed = False
        for _ in range(r):
            if rng.random() < 0.5:
                if not rep and length >= n:
                    continue
                if rep:
                    v = _uidx(rng.random(), n)
                else:
                    j = _uidx(rng.random(), n - length)
                    v = 0
                    while True:
                        if not used[v]:
                            if j == 0:
                                break
                            j -= 1
                        v += 1
                    used[v] = True
                pos = _uidx(rng.random(), length + 1)
                for i in range(length, pos, -1):
                    child[i] = child[i - 1]
                child[pos] = v
                length += 1
                changed = True
            else:
                if length == 0:
                    continue
                pos = _uidx(rng.random(), length)
                if not rep:
                    used[child[pos]] = False
                for i in range(pos, length - 1):
                    child[i] = child[i + 1]
                length -= 1
                changed = True
        if not rep:
            for i in range(length):
                used[child[i]] = False
        if not changed or length >= cap:
            continue
        value = fn(data, child, length)
        evals += 1
        dominated = False
        for j in range(length + 1):
            if occ[j] and (vals[j] > value or (j < length and vals[j] == value)):
                dominated = True
                break
        if not dominated:
            for j in range(length, cap):
                if occ[j] and vals[j] <= value:
                    occ[j] = False
            occ[length] = True
            vals[length] = value
            for i in range(length):
                seqs[length, i] = child[i]
            n_members = 0
            for j in range(cap):
                if occ[j]:
                    members[n_members] = j
                    n_members += 1
            if length <= k and value > best:
                best = value
                if n_imp == imp_it.shape[0]:
                    imp_it = np.concatenate((imp_it, np.zeros(n_imp, dtype=np.int64)))
                    imp_ev = np.concatenate((imp_ev, np.zeros(n_imp, dtype=np.int64)))
                    imp_val = np.concatenate((imp_val, np.zeros(n_imp)))
                imp_it[n_imp] = it
                imp_ev[n_imp] = evals
                imp_val[n_imp] = value
                n_imp += 1
        if check:
            prev = -np.inf
            cur = -np.inf
            for j in range(cap):
                if occ[j]:
                    if vals[j] == -np.inf or vals[j] <= prev:
                        violations += 1
                    prev = vals[j]
                    if j <= k:
                        cur = vals[j]
            if cur != best:
                violations += 1
    return (seqs, vals, occ, evals, imp_it[:n_imp], imp_ev[:n_imp],
            imp_val[:n_imp], violations)


def _gsemo_kernel_run(oracle, cfg, rng, check):
    fn, data = oracle.kernel
    seqs, vals, occ, evals, it, ev, val, violations = _gsemo_loop(
        fn, data, oracle.n, cfg.k, cfg.cap, cfg.T, oracle.allows_repeats,
        rng, POISSON_CDF, check)
    oracle.add_evaluations(evals)
    archive = [(tuple(int(x) for x in seqs[j, :j]), float(vals[j]))
               for j in range(cfg.cap) if occ[j]]
    improvements = [(int(a), int(b), float(c)) for a, b, c in zip(it, ev, val)]
    feasible = [m for m in archive if len(m[0]) <= cfg.k]
    best_seq, best_value = max(feasible, key=lambda m: m[1])
    return best_seq, best_value, int(evals), improvements, archive, int(violations)


def greedy(oracle, k):
    """Append the item with the largest value ``k`` times; ties to the lowest index."""
    s = ()
    for _ in range(k):
        best, best_v = None, NEG_INF
        for v in range(oracle.n):
            if not oracle.allows_repeats and v in s:
                continue
            val = oracle(s + (v,))
            if val > best_v:
                best, best_v = v, val
        if best is None:
            break
        s = s + (best,)
    return s


def generalized_greedy(oracle, k):
    """Insert the best item at the best position ``k`` times.

    Ties go to the lowest position, then the lowest item index.
    """
    s = ()
    for _ in range(k):
        best, best_v = None, NEG_INF
        for pos in range(len(s) + 1):
            for v in range(oracle.n):
                if not oracle.allows_repeats and v in s:
                    continue
                cand = s[:pos] + (v,) + s[pos:]
                val = oracle(cand)
                if val > best_v:
                    best, best_v = cand, val
        if best is None:
            break
        s = best
    return s


def omega(obj, k, oracle=None):
    """Edge-greedy OMegA for DAG objectives.

    Repeatedly adds the edge whose covered vertex set, sorted topologically,
    has the largest value, subject to covering at most ``k`` vertices.  Ties
    go to the lexicographically smallest edge.  Values are cached per vertex
    set, so the evaluation count is the number of distinct sets tried.
    """
    oracle = oracle or obj.oracle("raw")
    dag = obj.dag
    edges = sorted(dag.edges)
    chosen = set()
    covered = set()
    cache = {}

    def value(items):
        key = frozenset(items)
        if key not in cache:
            cache[key] = oracle(tuple(sorted(key, key=lambda v: dag.rank[v])))
        return cache[key]

    while True:
        best, best_v = None, NEG_INF
        for e in edges:
            if e in chosen:
                continue
            items = covered | set(e)
            if len(items) > k:
                continue
            val = value(items)
            if val > best_v:
                best, best_v = e, val
        if best is None:
            break
        chosen.add(best)
        covered |= set(best)
    return tuple(sorted(covered, key=lambda v: dag.rank[v]))


def write_run_csv(record, path):
    """Write ``eval_count,best_f`` rows and a ``best`` footer row."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["eval_count", "best_f"])
        for c, v in record.trace:
            w.writerow([c, repr(float(v))])
        w.writerow(["best", " ".join(str(x) for x in record.best)])


def read_run_csv(path):
    """Return ``(trace, best)`` from a file written by :func:`write_run_csv`."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    trace = [(int(c), float(v)) for c, v in rows[1:-1]]
    footer = rows[-1]
    if footer[0] != "best":
        raise ValueError(f"{path}: missing best footer")
    return trace, tuple(int(x) for x in footer[1].split())


def check_feasible(s, k, allows_repeats):
    """True if ``s`` respects the length bound and repeat policy."""
    return len(s) <= k and (allows_repeats or not has_repeats(s))
