"""Objective functions for the four sequence applications.

Each family has an immutable instance dataclass, an ``eval_*`` function and an
oracle class.  The formulas are written once as numba kernels with signature
``fn(data, seq, length)`` so the Python API, the exhaustive oracles and the
compiled optimizer loops all evaluate exactly the same arithmetic.

Instance text format (``save_instance`` / ``load_instance``)::

    seqsub-instance 1
    family <name>
    <field> <dtype> <shape> <values...>

``dtype`` is one of int, float, bool; ``shape`` is ``-`` for a scalar or a
comma-separated list of dimensions.  Floats are written with ``repr`` so a
reloaded instance evaluates bit-identically.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numba import njit

from .errors import MalformedRecord, StageOutOfRange
from .seqcore import CompiledOracle, validate_sequence


@njit(cache=True)
def tasks_kernel(data, seq, length):
    q = data[0]
    m = q.shape[2]
    surv = np.ones(m)
    for j in range(length):
        row = q[j, seq[j]]
        for i in range(m):
            surv[i] *= row[i]
    acc = 0.0
    for i in range(m):
        acc += 1.0 - surv[i]
    return acc / m


@njit(cache=True)
def infogain_kernel(data, seq, length):
    e, p0, sigma2 = data
    acc0 = 0.0
    acc1 = 0.0
    for i in range(length):
        acc0 += e[seq[i], 0] / sigma2[i]
        acc1 += e[seq[i], 1] / sigma2[i]
    # log(P0 * precision) written as log1p keeps f(empty) exactly 0
    return 0.5 * (np.log1p(p0[0] * acc0) + np.log1p(p0[1] * acc1))


@njit(cache=True)
def searchtrack_kernel(data, seq, length):
    factor, reward = data
    g_count = factor.shape[1]
    surv = np.ones(g_count)
    prev = 1.0
    acc = 0.0
    for k in range(length):
        row = factor[seq[k]]
        tot = 0.0
        for g in range(g_count):
            surv[g] *= row[g]
            tot += surv[g]
        cur = tot / g_count
        acc += reward[seq[k]] * (prev - cur)
        prev = cur
    return acc


@njit(cache=True)
def recommender_kernel(data, seq, length):
    g, p = data
    topics = p.shape[1]
    surv = np.ones(topics)
    acc = 0.0
    for i in range(length):
        v = seq[i]
        for t in range(topics):
            acc += g[v] * surv[t] * p[v, t]
            surv[t] *= 1.0 - p[v, t]
    return acc / topics


@dataclass(frozen=True, eq=False)
class TaskInstance:
    """Task accomplishment: ``p[i, j, a]`` is the chance that action ``a`` at
    stage ``j`` accomplishes task ``i``."""

    p: np.ndarray
    allows_repeats: bool = True

    family = "tasks"

    def __post_init__(self):
        if self.p.ndim != 3 or np.any((self.p < 0) | (self.p > 1)):
            raise ValueError("p must be an (m, L, n) array of probabilities")

    m = property(lambda self: self.p.shape[0])
    L = property(lambda self: self.p.shape[1])
    n = property(lambda self: self.p.shape[2])

    @cached_property
    def kernel_data(self):
        return (np.ascontiguousarray(1.0 - self.p.transpose(1, 2, 0)),)

    def max_length(self):
        return self.L


@dataclass(frozen=True, eq=False)
class InfoGainInstance:
    """Bayesian design with diagonal 2x2 measurements ``diag(a, 1 - a)``.

    ``a`` is ordered as the candidates are indexed, ``p0`` is the prior
    covariance diagonal and ``sigma2[i]`` the noise variance at stage ``i``.
    """

    a: np.ndarray
    p0: np.ndarray
    sigma2: np.ndarray
    allows_repeats: bool = True

    family = "infogain"

    def __post_init__(self):
        if np.any((self.a < 0) | (self.a > 1)):
            raise ValueError("a must lie in [0, 1]")
        if self.p0.shape != (2,) or np.any(self.p0 <= 0) or np.any(self.sigma2 <= 0):
            raise ValueError("p0 and sigma2 must be positive, p0 of length 2")

    n = property(lambda self: self.a.shape[0])
    L = property(lambda self: self.sigma2.shape[0])

    @cached_property
    def entries(self):
        return np.column_stack([self.a, 1.0 - self.a])

    @cached_property
    def kernel_data(self):
        return (self.entries, self.p0.astype(np.float64), self.sigma2.astype(np.float64))

    def max_length(self):
        return self.L


@dataclass(frozen=True, eq=False)
class SearchTrackInstance:
    """Search and tracking: pattern ``i`` searches the paths marked in
    ``paths[i]`` at time ``t[i]`` and detects with probability ``p[i]``."""

    paths: np.ndarray
    t: np.ndarray
    p: np.ndarray
    K: float
    allows_repeats: bool = True

    family = "searchtrack"

    def __post_init__(self):
        if self.paths.ndim != 2 or self.paths.shape[0] != self.t.shape[0]:
            raise ValueError("paths must be (n, num_paths) matching t")
        if self.K < np.max(self.t) or np.any(self.t <= 0):
            raise ValueError("need t > 0 and K >= max t")
        if np.any((self.p < 0) | (self.p > 1)):
            raise ValueError("p must lie in [0, 1]")

    n = property(lambda self: self.t.shape[0])
    num_paths = property(lambda self: self.paths.shape[1])

    @cached_property
    def kernel_data(self):
        factor = np.where(self.paths, 1.0 - self.p[:, None], 1.0)
        return (np.ascontiguousarray(factor), float(self.K) - self.t.astype(np.float64))

    def time_order(self):
        """Pattern indices sorted by time stamp, ties by index."""
        return np.lexsort((np.arange(self.n), self.t)).astype(np.int64)

    def max_length(self):
        return None


@dataclass(frozen=True, eq=False)
class RecommenderInstance:
    """Movie recommendation: ``g[v]`` is the satisfaction probability and
    ``p[v, topic]`` the coverage of a topic by movie ``v``."""

    g: np.ndarray
    p: np.ndarray
    allows_repeats: bool = True

    family = "recommender"

    def __post_init__(self):
        if self.p.ndim != 2 or self.p.shape[0] != self.g.shape[0]:
            raise ValueError("p must be (n, topics) matching g")
        if np.any((self.g < 0) | (self.g > 1)) or np.any((self.p < 0) | (self.p > 1)):
            raise ValueError("g and p must lie in [0, 1]")

    n = property(lambda self: self.g.shape[0])
    num_topics = property(lambda self: self.p.shape[1])

    @cached_property
    def kernel_data(self):
        return (self.g.astype(np.float64), np.ascontiguousarray(self.p, dtype=np.float64))

    def max_length(self):
        return None


KERNELS = {
    "tasks": tasks_kernel,
    "infogain": infogain_kernel,
    "searchtrack": searchtrack_kernel,
    "recommender": recommender_kernel,
}

INSTANCE_TYPES = {
    cls.family: cls
    for cls in (TaskInstance, InfoGainInstance, SearchTrackInstance, RecommenderInstance)
}


class InstanceOracle(CompiledOracle):
    """Oracle view of an instance from any of the four families."""

    def __init__(self, inst, allows_repeats=None):
        rep = inst.allows_repeats if allows_repeats is None else allows_repeats
        super().__init__(inst.n, rep, KERNELS[inst.family], inst.kernel_data)
        self.inst = inst
        self.max_length = inst.max_length()

    def value(self, s):
        s = validate_sequence(s, self.n, self.allows_repeats)
        if self.max_length is not None and len(s) > self.max_length:
            raise StageOutOfRange(
                f"length {len(s)} exceeds the {self.max_length} defined stages")
        return super().value(s)


def _evaluate(inst, s):
    s = validate_sequence(s, inst.n, inst.allows_repeats)
    limit = inst.max_length()
    if limit is not None and len(s) > limit:
        raise StageOutOfRange(f"length {len(s)} exceeds the {limit} defined stages")
    arr = np.asarray(s, dtype=np.int64).reshape(-1)
    return float(KERNELS[inst.family](inst.kernel_data, arr, arr.shape[0]))


def eval_tasks(inst: TaskInstance, s) -> float:
    """Mean over tasks of the probability that some stage accomplishes it."""
    return _evaluate(inst, s)


def eval_infogain(inst: InfoGainInstance, s) -> float:
    """Entropy reduction of the posterior, in nats."""
    return _evaluate(inst, s)


def eval_searchtrack(inst: SearchTrackInstance, s) -> float:
    """``K`` minus the expected time of first detection."""
    return _evaluate(inst, s)


def eval_recommender(inst: RecommenderInstance, s) -> float:
    """Expected satisfaction of a user choosing a topic uniformly."""
    return _evaluate(inst, s)


def save_instance(inst, path):
    """Write an instance in the self-describing text format."""
    lines = ["seqsub-instance 1", f"family {inst.family}"]
    for f in dataclasses.fields(inst):
        lines.append(_encode_field(f.name, getattr(inst, f.name)))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_instance(path):
    """Read an instance written by :func:`save_instance`."""
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines or lines[0] != "seqsub-instance 1":
        raise MalformedRecord(f"{path}: missing instance header")
    if not lines[1].startswith("family ") or lines[1][7:] not in INSTANCE_TYPES:
        raise MalformedRecord(f"{path}: unknown family line {lines[1]!r}")
    cls = INSTANCE_TYPES[lines[1][7:]]
    values = dict(_decode_field(ln) for ln in lines[2:])
    names = {f.name for f in dataclasses.fields(cls)}
    if set(values) != names:
        raise MalformedRecord(f"{path}: fields {sorted(values)} != {sorted(names)}")
    return cls(**values)


def _encode_field(name, value):
    if isinstance(value, np.ndarray):
        shape = ",".join(str(d) for d in value.shape)
        flat = value.ravel()
    else:
        shape, flat = "-", [value]
    if isinstance(value, (bool, np.bool_)) or (isinstance(value, np.ndarray) and value.dtype == bool):
        kind, payload = "bool", [str(int(bool(x))) for x in flat]
    elif isinstance(value, (int, np.integer)) or (isinstance(value, np.ndarray)
                                                   and np.issubdtype(value.dtype, np.integer)):
        kind, payload = "int", [str(int(x)) for x in flat]
    else:
        kind, payload = "float", [repr(float(x)) for x in flat]
    return " ".join([name, kind, shape, *payload])


def _decode_field(line):
    parts = line.split()
    if len(parts) < 3:
        raise MalformedRecord(f"bad field line {line!r}")
    name, kind, shape, payload = parts[0], parts[1], parts[2], parts[3:]
    try:
        conv = {"int": int, "float": float, "bool": lambda x: bool(int(x))}[kind]
        vals = [conv(x) for x in payload]
    except (KeyError, ValueError) as exc:
        raise MalformedRecord(f"bad field line {line[:60]!r}") from exc
    if shape == "-":
        if len(vals) != 1:
            raise MalformedRecord(f"scalar field {name} has {len(vals)} values")
        return name, vals[0]
    dims = tuple(int(d) for d in shape.split(","))
    dtype = {"int": np.int64, "float": np.float64, "bool": bool}[kind]
    arr = np.array(vals, dtype=dtype)
    if arr.size != int(np.prod(dims)):
        raise MalformedRecord(f"field {name} has {arr.size} values for shape {dims}")
    return name, arr.reshape(dims)
