"""Command-line entry point ``seqsub``.

Exit codes: 0 success, 2 validation error, 3 resource guard tripped,
4 mismatch reported by ``--assert``.
"""

from __future__ import annotations

import argparse
import sys

from ..dagmodel import load_movielens, save_dag
from ..errors import ResourceGuard, ValidationError
from ..oracle import (DEFAULT_GUARD, opt_full, opt_subset_reorder,
                      opt_subset_timesort, validate_timesort)
from ..seqcore import (MONOTONICITY_KINDS, SUBMODULARITY_KINDS,
                       check_monotonicity, check_submodularity)
from .experiment import (ALGORITHMS, FAMILIES, OPT_MODES, ExperimentSpec,
                         PARAM_DEFAULTS, make_problem, run_experiment)


EXIT_OK, EXIT_VALIDATION, EXIT_GUARD, EXIT_MISMATCH = 0, 2, 3, 4


EXPECTED_CLASS = {
    "tasks": [("monotone", "prefix"), ("submodular", "prefix")],
    "infogain": [("monotone", "prefix"), ("submodular", "prefix")],
    "searchtrack": [("monotone", "weak"), ("submodular", "strong")],
    "recommender": [("monotone", "weak"), ("submodular", "strong")],
    "dag-mod": [("monotone", "subsequence")],
    "dag-sub": [("monotone", "subsequence")],
}


def _ints(text):
    return [int(x) for x in text.split(",") if x]


def _floats(text):
    return [float(x) for x in text.split(",") if x]


def _family_param(args, family):
    name = FAMILIES[family].param
    if name == "d":
        return args.d
    if name == "m_slope":
        return args.m_slope
    if name == "topics":
        return args.topics
    return None


def build_parser():
    p = argparse.ArgumentParser(prog="seqsub", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a benchmark grid and write CSV files")
    r.add_argument("--family", required=True, choices=sorted(FAMILIES))
    r.add_argument("--n", type=_ints, default=[20], help="comma-separated sizes")
    r.add_argument("--k", type=_ints, required=True, help="comma-separated budgets")
    r.add_argument("--d", type=_ints, default=None, help="DAG out-degree values")
    r.add_argument("--m-slope", type=_floats, default=None, help="detection slope values")
    r.add_argument("--topics", type=_ints, default=None, help="topic counts")
    r.add_argument("--instances", type=int, default=1)
    r.add_argument("--algos", default="gsemo,greedy",
                   help=f"comma-separated subset of {','.join(ALGORITHMS)}")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--opt", choices=OPT_MODES, default="off")
    r.add_argument("--out", required=True)
    r.add_argument("--trace", action="store_true", help="also write GSEMO anytime curves")
    r.add_argument("--ratings", help="Movielens ratings.dat for the movielens families")
    r.add_argument("--movie-counts", choices=("retained", "raw"), default="retained")
    r.add_argument("--budget-factor", type=float, default=1.0,
                   help="multiplier on the GSEMO iteration budget")
    r.add_argument("--guard", type=int, default=DEFAULT_GUARD)
    r.add_argument("--workers", type=int, default=1)
    r.add_argument("--assert", dest="assert_", action="store_true",
                   help="exit 4 if GSEMO's mean falls below another algorithm's in any cell")

    c = sub.add_parser("check", help="run the property checkers on a generated instance")
    c.add_argument("--family", required=True, choices=sorted(EXPECTED_CLASS))
    c.add_argument("--n", type=int, default=4)
    c.add_argument("--max-len", type=int, default=3)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--param", type=float, default=None, help="family parameter (d, slope, topics)")
    c.add_argument("--assert", dest="assert_", action="store_true",
                   help="exit 4 if a property of the family's class fails")

    o = sub.add_parser("opt", help="compute OPT of one generated instance")
    o.add_argument("--family", required=True, choices=sorted(FAMILIES))
    o.add_argument("--n", type=int, default=6)
    o.add_argument("--k", type=int, required=True)
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--param", type=float, default=None)
    o.add_argument("--ratings")
    o.add_argument("--method", choices=("full", "subset", "timesort"), default="full")
    o.add_argument("--guard", type=int, default=DEFAULT_GUARD)

    m = sub.add_parser("movielens-prep", help="build the movie preference DAG file")
    m.add_argument("--ratings", required=True)
    m.add_argument("--out", required=True)
    m.add_argument("--movie-counts", choices=("retained", "raw"), default="retained")
    return p


def cmd_run(args):
    family = args.family
    spec = ExperimentSpec(
        family=family, n=args.n, k=args.k,
        params=_family_param(args, family) or [],
        instances=args.instances, algos=tuple(a for a in args.algos.split(",") if a),
        seed=args.seed, opt=args.opt, out=args.out, trace=args.trace,
        ratings=args.ratings, movie_counts=args.movie_counts,
        budget_factor=args.budget_factor, guard=args.guard, workers=args.workers)
    rows = run_experiment(spec)
    print(f"wrote {len(rows)} rows to {args.out}")
    if args.assert_ and "gsemo" in spec.algos:
        means = {}
        for r in rows:
            key = tuple(r[:4])
            means.setdefault(key, {}).setdefault(r[5], []).append(float(r[6]))
        for key, by_algo in means.items():
            g = sum(by_algo["gsemo"]) / len(by_algo["gsemo"])
            for algo, vals in by_algo.items():
                other = sum(vals) / len(vals)
                if other - g > 1e-9 * max(1.0, abs(g)):
                    print(f"mismatch in cell {key}: gsemo {g:.6f} < {algo} {other:.6f}")
                    return EXIT_MISMATCH
    return EXIT_OK


def _small_problem(family, n, k, param, seed, ratings=None):
    movielens = None
    if family.startswith("movielens"):
        if not ratings:
            raise ValidationError("movielens families need --ratings")
        movielens, _ = load_movielens(ratings)
    if param is None:
        param = PARAM_DEFAULTS.get(FAMILIES[family].param)
    if FAMILIES[family].param in ("d", "topics"):
        param = int(param)
    return make_problem(family, n, k, param, seed, movielens)


def cmd_check(args):
    problem = _small_problem(args.family, args.n, args.max_len + 1, args.param, args.seed)
    oracle = problem.oracle_fn()
    expected = set(EXPECTED_CLASS[args.family])
    failed = False
    checks = [("monotone", k, check_monotonicity) for k in MONOTONICITY_KINDS]
    checks += [("submodular", k, check_submodularity) for k in SUBMODULARITY_KINDS]
    for group, kind, fn in checks:
        rep = fn(oracle, kind, args.max_len)
        mark = "*" if (group, kind) in expected else " "
        print(f"{mark} {rep.property:<22} {'holds' if rep.holds else 'fails':<6} "
              f"horizon={rep.horizon} evals={rep.evaluations}"
              + ("" if rep.holds else f" witness={rep.witness}"))
        failed |= (group, kind) in expected and not rep.holds
    print("* marks the properties of the family's class")
    return EXIT_MISMATCH if args.assert_ and failed else EXIT_OK


def cmd_opt(args):
    problem = _small_problem(args.family, args.n, args.k, args.param, args.seed, args.ratings)
    if args.method == "full":
        res = opt_full(problem.oracle_fn(), args.k, args.guard)
    elif args.method == "subset":
        if problem.obj is None:
            raise ValidationError("subset OPT applies to DAG families only")
        res = opt_subset_reorder(problem.obj, args.k, args.guard)
    else:
        if args.family != "searchtrack":
            raise ValidationError("timesort OPT applies to searchtrack only")
        check = validate_timesort(problem.inst.allows_repeats)
        if not check["passed"]:
            print(f"time-sorted OPT failed its cross-check: {check['witness']}")
        res = opt_subset_timesort(problem.inst, args.k, args.guard)
    print(f"method={res.method} value={res.value!r} enumerated={res.enumerated}")
    print("witness=" + " ".join(str(x) for x in res.witness))
    return EXIT_OK


def cmd_movielens_prep(args):
    dag, info = load_movielens(args.ratings, movie_counts=args.movie_counts)
    save_dag(dag, args.out)
    print(f"users={info['users']} movies={info['movies']} edges={dag.num_edges}")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "check": cmd_check, "opt": cmd_opt,
            "movielens-prep": cmd_movielens_prep}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ResourceGuard, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GUARD if isinstance(exc, ResourceGuard) else EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
