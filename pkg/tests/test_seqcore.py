import itertools
import threading

import numpy as np
import pytest

from seqsub.errors import BudgetExceeded, DegenerateInstance, RepeatViolation
from seqsub.seqcore import (FunctionOracle, Relation, check_monotonicity,
                            check_submodularity, concat, curvature,
                            enumerate_sequences, exceeds, is_subsequence,
                            merges, relation, submodularity_holds_at)


def length_oracle(n=3, sign=1.0):
    return FunctionOracle(lambda s: sign * len(s), n)


def table_oracle(n, max_len, seed, allows_repeats=True):
    """Random values on every sequence up to ``max_len``, with f(empty) = 0."""
    rng = np.random.default_rng(seed)
    table = {s: float(rng.integers(0, 4)) for s in enumerate_sequences(n, max_len, allows_repeats)}
    table[()] = 0.0
    return FunctionOracle(lambda s: table[s], n, allows_repeats)


# naive references: every related pair, straight from the definitions

def naive_monotone(oracle, kind, bound):
    seqs = list(enumerate_sequences(oracle.n, bound, oracle.allows_repeats))
    flag = {"prefix": Relation.PREFIX, "suffix": Relation.SUFFIX,
            "subsequence": Relation.SUBSEQ}[kind]
    return all(oracle(s) <= oracle(t) + 1e-9
               for s in seqs for t in seqs if flag in relation(s, t))


def naive_submodular(oracle, kind, max_len):
    rep = oracle.allows_repeats
    seqs = list(enumerate_sequences(oracle.n, max_len, rep))
    flag = Relation.PREFIX if kind == "prefix" else Relation.SUBSEQ
    suffixes = seqs if kind == "strong" else [()]
    for s, t in itertools.product(seqs, seqs):
        if flag not in relation(s, t):
            continue
        for v in range(oracle.n):
            for o in suffixes:
                if not rep and len(set(t + (v,) + o)) < len(t) + 1 + len(o):
                    continue
                gs = oracle(s + (v,) + o) - oracle(s + o)
                gt = oracle(t + (v,) + o) - oracle(t + o)
                if gt > gs + 1e-9:
                    return False
    return True


class TestRelation:
    def test_examples(self):
        assert relation((0,), (0, 1)) == Relation.PREFIX | Relation.SUBSEQ
        assert relation((1,), (0, 1)) == Relation.SUFFIX | Relation.SUBSEQ
        assert relation((0, 2), (0, 1, 2)) == Relation.SUBSEQ
        assert relation((1, 0), (0, 1)) == Relation.NONE

    def test_empty_is_prefix_and_suffix(self):
        rel = relation((), (3, 4))
        assert Relation.PREFIX in rel and Relation.SUFFIX in rel

    def test_lattice_exhaustive(self):
        seqs = list(enumerate_sequences(3, 4))
        for s in enumerate_sequences(3, 3):
            for t in seqs:
                rel = relation(s, t)
                if Relation.PREFIX in rel or Relation.SUFFIX in rel:
                    assert Relation.SUBSEQ in rel
                assert (Relation.SUBSEQ in rel) == is_subsequence(s, t)


class TestConcat:
    def test_examples(self):
        assert concat((0,), (1, 2)) == (0, 1, 2)
        assert concat((), (4, 5)) == (4, 5)
        assert concat((4, 5), ()) == (4, 5)

    def test_repeat_violation(self):
        assert concat((1,), (1,)) == (1, 1)
        with pytest.raises(RepeatViolation):
            concat((1,), (1,), allows_repeats=False)


class TestOracle:
    def test_counter(self):
        o = length_oracle()
        o(()), o((1, 2))
        assert o.eval_count == 2

    def test_counter_threadsafe(self):
        o = length_oracle()

        def work():
            for _ in range(2000):
                o((0,))

        threads = [threading.Thread(target=work) for _ in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert o.eval_count == 16000


def test_merges_cover_both_concatenations():
    ws = merges((0, 1), (1, 2))
    assert (0, 1, 1, 2) in ws and (1, 2, 0, 1) in ws and (0, 1, 2) in ws
    assert all(is_subsequence((0, 1), w) and is_subsequence((1, 2), w) for w in ws)
    assert min(len(w) for w in ws) == 3


class TestMonotonicity:
    def test_decreasing_prefix_witness(self):
        rep = check_monotonicity(length_oracle(sign=-1.0), "prefix")
        assert not rep.holds
        assert rep.witness == ((), (0,))

    def test_length_holds_everywhere(self):
        for kind in ("subsequence", "prefix", "suffix", "weak"):
            assert check_monotonicity(length_oracle(), kind).holds

    def test_report_bounds(self):
        rep = check_monotonicity(length_oracle(), "prefix", max_len=2)
        assert (rep.max_len, rep.n, rep.horizon) == (2, 3, 4)

    def test_weak_fails_for_decreasing(self):
        rep = check_monotonicity(length_oracle(sign=-1.0), "weak", max_len=2)
        assert not rep.holds
        s, t = rep.witness
        assert t != ()

    def test_budget(self):
        with pytest.raises(BudgetExceeded):
            check_monotonicity(length_oracle(4), "prefix", budget=50)

    @pytest.mark.parametrize("seed", range(12))
    @pytest.mark.parametrize("kind", ["prefix", "suffix", "subsequence"])
    def test_matches_naive_pairs(self, seed, kind):
        o = table_oracle(2, 4, seed)
        rep = check_monotonicity(o, kind, max_len=2)
        assert rep.holds == naive_monotone(o, kind, 4)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            check_monotonicity(length_oracle(), "sideways")


class TestSubmodularity:
    def test_modular_length_all_kinds(self):
        for kind in ("strong", "subsequence", "prefix"):
            assert check_submodularity(length_oracle(2), kind, max_len=2).holds

    @pytest.mark.parametrize("seed", range(12))
    @pytest.mark.parametrize("kind", ["prefix", "subsequence", "strong"])
    def test_matches_naive_pairs(self, seed, kind):
        rng = np.random.default_rng(seed)
        w = rng.random((2, 6))
        # concave in a position-weighted sum: sometimes submodular, sometimes not
        o = FunctionOracle(lambda s: float(np.sqrt(sum(w[x, i] for i, x in enumerate(s)))), 2)
        rep = check_submodularity(o, kind, max_len=2)
        assert rep.holds == naive_submodular(o, kind, 2)

    def test_witness_revalidates(self):
        o = FunctionOracle(lambda s: float(len(s) ** 2), 2)
        for kind in ("strong", "subsequence", "prefix"):
            rep = check_submodularity(o, kind, max_len=2)
            assert not rep.holds
            assert not submodularity_holds_at(o, rep.witness)


class TestCurvature:
    def test_modular_is_zero(self):
        assert curvature(length_oracle(), (0, 1), 2) == 0.0

    def test_empty_excluded(self):
        with pytest.raises(ValueError):
            curvature(length_oracle(), (), 2)

    def test_degenerate(self):
        o = FunctionOracle(lambda s: float(sum(s)), 2)
        with pytest.raises(DegenerateInstance):
            curvature(o, (1,), 1)

    def test_increases_with_m(self):
        rng = np.random.default_rng(0)
        w = rng.random(3) + 0.1
        o = FunctionOracle(lambda s: float(np.log1p(sum(w[x] for x in s))), 3)
        vals = [curvature(o, (0, 2), m) for m in (1, 2, 3)]
        assert vals == sorted(vals)
        assert vals[0] >= 0.0


def test_exceeds_scaling():
    assert not exceeds(1e9 + 0.5, 1e9)
    assert exceeds(1.0 + 1e-6, 1.0)
    assert not exceeds(1.0 + 1e-10, 1.0)
