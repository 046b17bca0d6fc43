"""Objectives defined by a weighted preference DAG.

A sequence ``s`` induces the edge set ``E(s)`` of graph edges ``(s_i, s_j)``
with ``i <= j`` (self-loops included), and ``f(s) = h(E(s))`` for a modular or
a coverage-type ``h``.  Sorting an item set along a topological order induces
every edge among the items, so that ordering is optimal for the set.
"""

from __future__ import annotations

import heapq
from collections import defaultdict

import numpy as np
from numba import njit

from .errors import EmptyResult, MalformedRecord, ValidationError
from .seqcore import CompiledOracle, validate_sequence

H_KINDS = ("modular", "coverage")
MODES = ("raw", "reordered")


class PreferenceDag:
    """Weighted DAG over ``n`` vertices; every vertex may carry a self-loop.

    ``edges`` maps ``(src, dst)`` to a weight in ``[0, 1]``.  The stored
    topological order is the smallest-index-first Kahn order, so it only
    depends on the edge set.
    """

    def __init__(self, n, edges):
        self.n = int(n)
        self.edges = {}
        for (u, v), w in edges.items():
            u, v, w = int(u), int(v), float(w)
            if not (0 <= u < n and 0 <= v < n):
                raise ValidationError(f"edge ({u}, {v}) outside {n} vertices")
            if not 0.0 <= w <= 1.0:
                raise ValidationError(f"edge ({u}, {v}) weight {w} outside [0, 1]")
            self.edges[(u, v)] = w
        self.order = self._kahn_order()
        self.rank = np.empty(self.n, dtype=np.int64)
        self.rank[self.order] = np.arange(self.n)

    def _kahn_order(self):
        indeg = [0] * self.n
        succ = defaultdict(list)
        for u, v in self.edges:
            if u != v:
                succ[u].append(v)
                indeg[v] += 1
        heap = [v for v in range(self.n) if indeg[v] == 0]
        heapq.heapify(heap)
        order = []
        while heap:
            u = heapq.heappop(heap)
            order.append(u)
            for v in succ[u]:
                indeg[v] -= 1
                if indeg[v] == 0:
                    heapq.heappush(heap, v)
        if len(order) != self.n:
            raise ValidationError("edges contain a cycle other than self-loops")
        return np.array(order, dtype=np.int64)

    @property
    def num_edges(self):
        return len(self.edges)

    def weight_matrix(self):
        """Dense ``(W, mask)`` pair; ``mask`` marks existing edges."""
        W = np.zeros((self.n, self.n))
        mask = np.zeros((self.n, self.n), dtype=np.bool_)
        for (u, v), w in self.edges.items():
            W[u, v] = w
            mask[u, v] = True
        return W, mask

    def __eq__(self, other):
        return isinstance(other, PreferenceDag) and self.n == other.n and self.edges == other.edges

    def __repr__(self):
        return f"PreferenceDag(n={self.n}, edges={self.num_edges})"


class DagObjective:
    """A DAG together with the kind of ``h`` applied to induced edge sets."""

    def __init__(self, dag, h_kind="modular"):
        if h_kind not in H_KINDS:
            raise ValueError(f"h_kind must be one of {H_KINDS}")
        self.dag = dag
        self.h_kind = h_kind
        W, mask = dag.weight_matrix()
        self._data = (W, mask, dag.rank, H_KINDS.index(h_kind))

    @property
    def n(self):
        return self.dag.n

    def kernel_data(self, mode):
        return self._data + (MODES.index(mode),)

    def oracle(self, mode="raw"):
        return DagOracle(self, mode)


class DagOracle(CompiledOracle):
    """Oracle for a DAG objective in raw or reordered mode (no repeats)."""

    def __init__(self, obj, mode="raw"):
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        super().__init__(obj.n, False, dag_kernel, obj.kernel_data(mode))
        self.obj = obj
        self.mode = mode

    def value(self, s):
        return super().value(validate_sequence(s, self.n, False))


@njit(cache=True)
def dag_kernel(data, seq, length):
    W, mask, rank, kind, reorder = data
    s = seq[:length].copy()
    if reorder == 1:
        # insertion sort by topological rank
        for i in range(1, length):
            x = s[i]
            j = i - 1
            while j >= 0 and rank[s[j]] > rank[x]:
                s[j + 1] = s[j]
                j -= 1
            s[j + 1] = x
    total = 0.0
    if kind == 0:
        for i in range(length):
            for j in range(i, length):
                if mask[s[i], s[j]]:
                    total += W[s[i], s[j]]
        return total
    for j in range(length):
        miss = 1.0
        hit = False
        for i in range(j + 1):
            if mask[s[i], s[j]]:
                miss *= 1.0 - W[s[i], s[j]]
                hit = True
        if hit:
            total += 1.0 - miss
    return total


def induced_edges(dag, s):
    """Edges ``(s_i, s_j)`` of the graph with ``i <= j``."""
    s = validate_sequence(s, dag.n, False)
    return {(s[i], s[j]) for i in range(len(s)) for j in range(i, len(s))
            if (s[i], s[j]) in dag.edges}


def reorder(dag, items):
    """Sort an item set along the DAG's topological order."""
    return tuple(sorted((int(x) for x in set(items)), key=lambda v: dag.rank[v]))


def h_value(obj, edges):
    """Modular sum of weights, or the per-target noisy-or coverage."""
    w = obj.dag.edges
    if obj.h_kind == "modular":
        return float(sum(w[e] for e in sorted(edges)))
    miss = {}
    for u, v in sorted(edges, key=lambda e: (e[1], e[0])):
        miss[v] = miss.get(v, 1.0) * (1.0 - w[(u, v)])
    return float(sum(1.0 - m for m in miss.values()))


def eval_dag(obj, s, mode="raw"):
    """``h(E(s))``; the reordered mode first sorts ``V(s)`` topologically."""
    return obj.oracle(mode).value(s)


def gen_dag_synthetic(n, d, self_loop_range, seed):
    """Random DAG in which vertex ``i`` links to ``min(d, n - 1 - i)`` later vertices.

    Per vertex the draws are: self-loop weight, target subset, forward weights.
    Forward weights are uniform on ``[0, 1]``; the self-loop weight is uniform
    on ``self_loop_range``.
    """
    if n < 1 or d < 0:
        raise ValueError("need n >= 1 and d >= 0")
    lo, hi = self_loop_range
    rng = np.random.default_rng(seed)
    edges = {}
    for i in range(n):
        edges[(i, i)] = float(rng.uniform(lo, hi))
        later = np.arange(i + 1, n)
        size = min(d, later.size)
        targets = np.sort(rng.choice(later, size=size, replace=False)) if size else later[:0]
        weights = rng.uniform(0.0, 1.0, size=size)
        for j, w in zip(targets, weights):
            edges[(i, int(j))] = float(w)
    return PreferenceDag(n, edges)


def save_dag(dag, path):
    """Write ``n m`` then one ``src dst weight`` line per edge."""
    with open(path, "w") as fh:
        fh.write(f"{dag.n} {dag.num_edges}\n")
        for (u, v), w in sorted(dag.edges.items()):
            fh.write(f"{u} {v} {w:.17g}\n")


def load_dag(path):
    with open(path) as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    if not lines:
        raise EmptyResult(f"{path} is empty")
    try:
        n, m = (int(x) for x in lines[0].split())
        edges = {}
        for ln in lines[1:]:
            u, v, w = ln.split()
            edges[(int(u), int(v))] = float(w)
    except ValueError as exc:
        raise MalformedRecord(f"{path}: {exc}") from exc
    if len(edges) != m or len(lines) - 1 != m:
        raise MalformedRecord(f"{path}: header announces {m} edges, found {len(lines) - 1}")
    return PreferenceDag(n, edges)


def read_ratings(path):
    """Parse ``UserID::MovieID::Rating::Timestamp`` lines into an int array."""
    rows = []
    with open(path, encoding="latin-1") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line:
                continue
            parts = line.split("::")
            if len(parts) != 4:
                raise MalformedRecord(f"{path}:{lineno}: expected 4 fields")
            try:
                rows.append([int(x) for x in parts])
            except ValueError as exc:
                raise MalformedRecord(f"{path}:{lineno}: non-integer field") from exc
    if not rows:
        raise EmptyResult(f"{path} has no ratings")
    return np.array(rows, dtype=np.int64)


def load_movielens(ratings_path, min_user=20, max_user=50, min_movie=1000,
                   movie_counts="retained", smoothing=20):
    """Build the movie preference DAG from a ratings file.

    Users with fewer than ``min_user`` or more than ``max_user`` ratings are
    dropped first.  Movies with fewer than ``min_movie`` ratings are then
    dropped, counting ratings of retained users (``movie_counts="retained"``)
    or of all users (``"raw"``).  Movies are ordered by their earliest rating
    among retained users, ties by id, and vertex ``i`` is the ``i``-th movie.

    Returns ``(dag, info)`` where ``info`` holds the user and movie counts and
    the movie ids in vertex order.
    """
    if movie_counts not in ("retained", "raw"):
        raise ValueError("movie_counts must be 'retained' or 'raw'")
    r = read_ratings(ratings_path)
    users, movies, stamps = r[:, 0], r[:, 1], r[:, 3]
    uid, ucount = np.unique(users, return_counts=True)
    keep_users = set(uid[(ucount >= min_user) & (ucount <= max_user)].tolist())
    user_mask = np.isin(users, list(keep_users))
    basis = movies[user_mask] if movie_counts == "retained" else movies
    mid, mcount = np.unique(basis, return_counts=True)
    keep_movies = set(mid[mcount >= min_movie].tolist())
    mask = user_mask & np.isin(movies, list(keep_movies))
    if not keep_users or not mask.any():
        raise EmptyResult("no ratings survive preprocessing")
    U = len(keep_users)

    first = {}
    for m_, ts in zip(movies[mask].tolist(), stamps[mask].tolist()):
        if m_ not in first or ts < first[m_]:
            first[m_] = ts
    ordered = sorted(first, key=lambda m_: (first[m_], m_))
    index = {m_: i for i, m_ in enumerate(ordered)}
    n = len(ordered)

    per_user = defaultdict(list)
    for u, m_, ts in zip(users[mask].tolist(), movies[mask].tolist(), stamps[mask].tolist()):
        per_user[u].append((index[m_], ts))
    N = np.zeros(n, dtype=np.int64)
    Nij = np.zeros((n, n), dtype=np.int64)
    for rated in per_user.values():
        idx = np.array([i for i, _ in rated])
        ts = np.array([t for _, t in rated])
        N[idx] += 1
        before = ts[:, None] < ts[None, :]
        src, dst = np.nonzero(before)
        np.add.at(Nij, (idx[src], idx[dst]), 1)

    edges = {}
    for i in range(n):
        edges[(i, i)] = N[i] / (U + smoothing)
        for j in range(i + 1, n):
            edges[(i, j)] = Nij[i, j] / (N[i] + smoothing)
    info = {"users": U, "movies": n, "movie_ids": ordered}
    return PreferenceDag(n, edges), info
