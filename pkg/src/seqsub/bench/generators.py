"""Random instance generators for the benchmark families.

All generators draw from ``numpy.random.default_rng(seed)`` (PCG64) in a fixed
order, so a seed fully determines the instance.
"""

from __future__ import annotations

import numpy as np

from ..dagmodel import DagObjective, gen_dag_synthetic
from ..objectives import (InfoGainInstance, RecommenderInstance,
                          SearchTrackInstance, TaskInstance)

TASKS_M = 50
SEARCH_PATHS = 40
TOPICS = 50
INFOGAIN_GRID = 1000
SELF_LOOP_RANGES = {"modular": (0.0, 1.0), "coverage": (0.0, 0.1)}


def gen_tasks(n, k, m=TASKS_M, seed=0):
    """``m`` tasks, ``2k`` stages, ``n`` actions; probabilities uniform on [0, 0.2]."""
    rng = np.random.default_rng(seed)
    return TaskInstance(rng.uniform(0.0, 0.2, size=(m, 2 * k, n)))


def infogain_candidates(n, grid=INFOGAIN_GRID):
    """First ``n`` values ``a = i / grid`` by decreasing ``|sqrt(a) - sqrt(1 - a)|``.

    Ties (``a`` and ``1 - a``) go to the larger ``a``.
    """
    i = np.arange(1, grid + 1)
    a = i / grid
    b = (grid - i) / grid
    key = np.abs(np.sqrt(a) - np.sqrt(b))
    order = np.lexsort((-a, -key))
    if n > grid:
        raise ValueError(f"at most {grid} candidates")
    return a[order[:n]]


def _positive_uniform(rng, lo, hi, size):
    x = rng.uniform(lo, hi, size=size)
    while np.any(x <= 0):
        bad = x <= 0
        x[bad] = rng.uniform(lo[bad] if np.ndim(lo) else lo,
                             hi[bad] if np.ndim(hi) else hi)
    return x


def gen_infogain(n, k, seed=0):
    """Candidates from :func:`infogain_candidates`; prior diagonal uniform on
    (0, 1); noise ``sigma_i`` uniform on ``[i - 1, i)`` for stages ``i = 1..2k``.
    Zero draws are redrawn."""
    rng = np.random.default_rng(seed)
    p0 = _positive_uniform(rng, 0.0, 1.0, 2)
    lo = np.arange(2 * k, dtype=float)
    sigma = _positive_uniform(rng, lo, lo + 1.0, 2 * k)
    return InfoGainInstance(infogain_candidates(n), p0, sigma**2)


def detection_probabilities(n, m_slope):
    """``clip(m * i / (n - 1) + 1/2 - m/2, 0.001, 0.999)`` for ``i = 0..n-1``."""
    i = np.arange(n)
    raw = m_slope * i / (n - 1) + 0.5 - m_slope / 2 if n > 1 else np.full(n, 0.5)
    return np.minimum(np.maximum(raw, 0.001), 0.999)


def gen_searchtrack(n, k, num_paths=SEARCH_PATHS, m_slope=0.0, seed=0,
                    allows_repeats=True):
    """Each path joins a pattern's path set with probability 1/2; time stamps
    are ``1 + r_1 + ... + r_i`` with ``r`` uniform on [0, n), zeros redrawn;
    the penalty ``K`` is the largest stamp.  ``k`` does not affect the draw."""
    rng = np.random.default_rng(seed)
    paths = rng.random((n, num_paths)) < 0.5
    r = _positive_uniform(rng, 0.0, float(n), n)
    t = 1.0 + np.cumsum(r)
    return SearchTrackInstance(paths, t, detection_probabilities(n, m_slope),
                               float(t[-1]), allows_repeats)


def gen_recommender(n, num_topics=TOPICS, seed=0):
    """Satisfaction and coverage probabilities uniform on [0, 1)."""
    rng = np.random.default_rng(seed)
    g = rng.random(n)
    p = rng.random((n, num_topics))
    return RecommenderInstance(g, p)


def gen_dag_objective(n, d, h_kind, seed=0):
    """Synthetic DAG objective; self-loops are drawn lower for coverage ``h``."""
    dag = gen_dag_synthetic(n, d, SELF_LOOP_RANGES[h_kind], seed)
    return DagObjective(dag, h_kind)
