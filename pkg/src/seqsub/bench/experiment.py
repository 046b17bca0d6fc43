"""Experiment orchestration: grid cells, seeded instances, algorithm runs and CSV output.

Each grid cell ``(n, k, param)`` gets ``instances`` problem instances seeded
with ``base_seed XOR hash(cell, i)``.  Output files, all starting with one
``#`` header line carrying a timestamp:

``results.csv``
    one row per (cell, instance, algorithm):
    ``family,n,k,param,instance_seed,algorithm,value,evals,opt,ratio``
``aggregate.csv``
    one row per (cell, algorithm) with means and GSEMO's win/tie/loss and
    sign-test verdict against that algorithm
``traces.csv``
    GSEMO anytime curves, only when tracing is requested
"""

from __future__ import annotations

import csv
import datetime
import hashlib
import itertools
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..algorithms import (GsemoConfig, budget_for, generalized_greedy, greedy,
                          gsemo, omega)
from ..dagmodel import DagObjective, load_movielens
from ..errors import ValidationError
from ..objectives import InstanceOracle
from ..oracle import (DEFAULT_GUARD, opt_full, opt_subset_reorder,
                      opt_subset_timesort, validate_timesort, _validated)
from .generators import (gen_dag_objective, gen_infogain, gen_recommender,
                         gen_searchtrack, gen_tasks)
from .signtest import sign_test, win_tie_loss

ALGORITHMS = ("gsemo", "gsemo_k", "greedy", "ggreedy", "omega")
OPT_MODES = ("full", "subset", "timesort", "off")
RESULT_COLUMNS = ["family", "n", "k", "param", "instance_seed", "algorithm",
                  "value", "evals", "opt", "ratio"]
AGGREGATE_COLUMNS = ["family", "n", "k", "param", "algorithm", "instances",
                     "mean_value", "mean_ratio", "baseline", "wins", "ties",
                     "losses", "p_value", "significant"]
TRACE_COLUMNS = ["family", "n", "k", "param", "instance_seed", "algorithm",
                 "eval_count", "best_f", "ratio"]


@dataclass(frozen=True)
class Family:
    problem_class: str
    baseline: str
    param: str | None
    is_dag: bool = False


FAMILIES = {
    "tasks": Family("prefix_monotone", "greedy", None),
    "infogain": Family("prefix_monotone", "greedy", None),
    "searchtrack": Family("weakly_monotone", "ggreedy", "m_slope"),
    "recommender": Family("weakly_monotone", "ggreedy", "topics"),
    "dag-mod": Family("dag", "omega", "d", True),
    "dag-sub": Family("dag", "omega", "d", True),
    "movielens-mod": Family("dag", "omega", None, True),
    "movielens-sub": Family("dag", "omega", None, True),
}

PARAM_DEFAULTS = {"m_slope": 0.0, "topics": 50, "d": 5}


@dataclass
class ExperimentSpec:
    """A benchmark grid.  ``params`` holds values of the family's parameter
    (``d``, ``m_slope`` or ``topics``); ``budget_factor`` scales GSEMO's
    expected-runtime budget."""

    family: str
    n: list
    k: list
    params: list = field(default_factory=list)
    instances: int = 1
    algos: tuple = ("gsemo", "greedy")
    seed: int = 0
    opt: str = "off"
    out: str = "results"
    trace: bool = False
    ratings: str | None = None
    movie_counts: str = "retained"
    budget_factor: float = 1.0
    guard: int = DEFAULT_GUARD
    workers: int = 1

    def validate(self):
        if self.family not in FAMILIES:
            raise ValidationError(f"unknown family {self.family!r}")
        fam = FAMILIES[self.family]
        bad = [a for a in self.algos if a not in ALGORITHMS]
        if bad:
            raise ValidationError(f"unknown algorithms {bad}")
        if "omega" in self.algos and not fam.is_dag:
            raise ValidationError("omega applies to DAG families only")
        if self.opt not in OPT_MODES:
            raise ValidationError(f"opt must be one of {OPT_MODES}")
        if self.opt == "subset" and not fam.is_dag:
            raise ValidationError("subset OPT applies to DAG families only")
        if self.opt == "timesort" and self.family != "searchtrack":
            raise ValidationError("timesort OPT applies to searchtrack only")
        if self.family.startswith("movielens") and not self.ratings:
            raise ValidationError("movielens families need a ratings file")
        if self.instances < 0 or self.budget_factor < 0:
            raise ValidationError("instances and budget_factor must be non-negative")
        if any(k < 1 for k in self.k) or any(n < 1 for n in self.n):
            raise ValidationError("n and k must be positive")

    def cells(self):
        fam = FAMILIES[self.family]
        params = self.params or [PARAM_DEFAULTS.get(fam.param)]
        ns = self.n if not self.family.startswith("movielens") else [0]
        return list(itertools.product(ns, self.k, params))


def derive_seed(base_seed, *key):
    """``base_seed XOR`` a stable 32-bit hash of ``key``."""
    digest = hashlib.blake2b(repr(key).encode(), digest_size=4).digest()
    return int(base_seed) ^ int.from_bytes(digest, "little")


@dataclass
class Problem:
    oracle_fn: object
    problem_class: str
    n: int
    inst: object = None
    obj: object = None


def make_problem(family, n, k, param, seed, movielens=None):
    """Generate the instance of one grid cell and wrap it for the runners."""
    if family == "tasks":
        inst = gen_tasks(n, k, seed=seed)
    elif family == "infogain":
        inst = gen_infogain(n, k, seed=seed)
    elif family == "searchtrack":
        # distinct patterns only, so that the time-sorted OPT applies
        inst = gen_searchtrack(n, k, m_slope=float(param), seed=seed, allows_repeats=False)
    elif family == "recommender":
        inst = gen_recommender(n, int(param), seed=seed)
    elif family in ("dag-mod", "dag-sub"):
        kind = "modular" if family == "dag-mod" else "coverage"
        obj = gen_dag_objective(n, int(param), kind, seed=seed)
        return Problem(lambda: obj.oracle("raw"), "dag", n, obj=obj)
    elif family in ("movielens-mod", "movielens-sub"):
        kind = "modular" if family == "movielens-mod" else "coverage"
        obj = DagObjective(movielens, kind)
        return Problem(lambda: obj.oracle("raw"), "dag", obj.n, obj=obj)
    else:
        raise ValidationError(f"unknown family {family!r}")
    return Problem(lambda: InstanceOracle(inst), FAMILIES[family].problem_class,
                   inst.n, inst=inst)


def run_algorithm(problem, algo, k, seed, budget_factor=1.0):
    """Run one algorithm; returns ``(sequence, value, evals, record_or_None)``."""
    oracle = problem.oracle_fn()
    record = None
    if algo in ("gsemo", "gsemo_k"):
        variant = "standard" if algo == "gsemo" else "k_variant"
        T = math.ceil(budget_for(problem.problem_class, problem.n, k, variant) * budget_factor)
        cfg = GsemoConfig(k=k, T=T, variant=variant, seed=seed,
                          dag_reorder=problem.obj is not None)
        record = gsemo(oracle, cfg)
        seq = record.best
    elif algo == "greedy":
        seq = greedy(oracle, k)
    elif algo == "ggreedy":
        seq = generalized_greedy(oracle, k)
    elif algo == "omega":
        seq = omega(problem.obj, k, oracle)
    else:
        raise ValidationError(f"unknown algorithm {algo!r}")
    evals = oracle.eval_count
    return seq, oracle.value(seq), evals, record


def compute_opt(problem, mode, k, guard):
    if mode == "off":
        return None
    if mode == "full":
        return opt_full(problem.oracle_fn(), k, guard)
    if mode == "subset":
        return opt_subset_reorder(problem.obj, k, guard)
    if not _validated.get(problem.inst.allows_repeats, {}).get("passed"):
        validate_timesort(problem.inst.allows_repeats)
    return opt_subset_timesort(problem.inst, k, guard)


def _fmt(x):
    return "" if x is None else repr(float(x))


def _run_instance(spec, cell, i, movielens):
    n, k, param = cell
    inst_seed = derive_seed(spec.seed, spec.family, n, k, param, i)
    problem = make_problem(spec.family, n, k, param, inst_seed, movielens)
    opt = compute_opt(problem, spec.opt, k, spec.guard)
    opt_value = None if opt is None else opt.value
    rows, traces = [], []
    for algo in spec.algos:
        seed = derive_seed(inst_seed, algo)
        seq, value, evals, record = run_algorithm(problem, algo, k, seed, spec.budget_factor)
        ratio = None if not opt_value else value / opt_value
        param_s = "" if param is None else str(param)
        rows.append([spec.family, problem.n, k, param_s, inst_seed, algo,
                     _fmt(value), evals, _fmt(opt_value), _fmt(ratio)])
        if spec.trace and record is not None:
            for c, v in record.trace:
                r = None if not opt_value else v / opt_value
                traces.append([spec.family, problem.n, k, param_s, inst_seed, algo,
                               c, _fmt(v), _fmt(r)])
    return rows, traces


def _header(fh):
    stamp = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
    fh.write(f"# seqsub run {stamp}\n")


def _write_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        _header(fh)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        w.writerows(rows)


def aggregate(rows, algos, baseline):
    """Per (cell, algorithm) means plus GSEMO's win/tie/loss against each algorithm."""
    cells = {}
    for r in rows:
        cells.setdefault(tuple(r[:4]), {}).setdefault(r[5], []).append(r)
    out = []
    for key, by_algo in cells.items():
        ref = [float(r[6]) for r in by_algo.get("gsemo", [])]
        for algo in algos:
            rs = by_algo.get(algo, [])
            if not rs:
                continue
            vals = [float(r[6]) for r in rs]
            ratios = [float(r[9]) for r in rs if r[9] != ""]
            mean_ratio = _fmt(np.mean(ratios)) if ratios else ""
            wtl = ["", "", "", "", ""]
            if ref and algo != "gsemo":
                st = sign_test(*win_tie_loss(ref, vals))
                wtl = [st.wins, st.ties, st.losses, _fmt(st.p_value), int(st.significant_at_05)]
            out.append(list(key) + [algo, len(rs), _fmt(np.mean(vals)), mean_ratio,
                                    int(algo == baseline)] + wtl)
    return out


def run_experiment(spec: ExperimentSpec):
    """Run every cell of ``spec`` and write the CSV files into ``spec.out``.

    Returns the result rows.  On failure the rows gathered so far are written
    with a ``failure.json`` manifest and the error is re-raised.
    """
    spec.validate()
    os.makedirs(spec.out, exist_ok=True)
    movielens = None
    if spec.family.startswith("movielens"):
        movielens, _ = load_movielens(spec.ratings, movie_counts=spec.movie_counts)
    jobs = [(cell, i) for cell in spec.cells() for i in range(spec.instances)]
    rows, traces = [], []
    try:
        if spec.workers > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(spec.workers) as pool:
                futures = [pool.submit(_run_instance, spec, c, i, movielens) for c, i in jobs]
                for fut in futures:
                    r, t = fut.result()
                    rows += r
                    traces += t
        else:
            for cell, i in jobs:
                r, t = _run_instance(spec, cell, i, movielens)
                rows += r
                traces += t
    except Exception as exc:
        _write_csv(os.path.join(spec.out, "results.csv"), RESULT_COLUMNS, rows)
        with open(os.path.join(spec.out, "failure.json"), "w") as fh:
            json.dump({"error": type(exc).__name__, "message": str(exc),
                       "completed_rows": len(rows)}, fh, indent=2)
        raise
    _write_csv(os.path.join(spec.out, "results.csv"), RESULT_COLUMNS, rows)
    _write_csv(os.path.join(spec.out, "aggregate.csv"), AGGREGATE_COLUMNS,
               aggregate(rows, spec.algos, FAMILIES[spec.family].baseline))
    if spec.trace:
        _write_csv(os.path.join(spec.out, "traces.csv"), TRACE_COLUMNS, traces)
    return rows


def read_results(path):
    """Load a results CSV, skipping the header comment line."""
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))
