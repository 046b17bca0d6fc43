import itertools
import math

import numpy as np
import pytest

from seqsub.bench.generators import (gen_infogain, gen_recommender,
                                     gen_searchtrack, gen_tasks)
from seqsub.errors import MalformedRecord, RepeatViolation, StageOutOfRange
from seqsub.objectives import (InfoGainInstance, InstanceOracle,
                               RecommenderInstance, SearchTrackInstance,
                               TaskInstance, eval_infogain, eval_recommender,
                               eval_searchtrack, eval_tasks, load_instance,
                               save_instance)
from seqsub.seqcore import enumerate_sequences


def expected_detection_value(inst, s):
    """K - E[first detection time] by enumerating paths and detection outcomes."""
    K = inst.K
    total = 0.0
    for g in range(inst.num_paths):
        for outcome in itertools.product((0, 1), repeat=len(s)):
            prob, tau = 1.0 / inst.num_paths, K
            for k, (v, hit) in enumerate(zip(s, outcome)):
                p = inst.p[v] if inst.paths[v, g] else 0.0
                prob *= p if hit else 1.0 - p
                if hit and tau == K and all(o == 0 for o in outcome[:k]):
                    tau = inst.t[v]
            total += prob * tau
    return K - total


class TestTasks:
    def test_empty(self):
        assert eval_tasks(gen_tasks(3, 2, m=4, seed=1), ()) == 0.0

    def test_hand_value(self):
        p = np.zeros((1, 2, 1))
        p[0, 0, 0], p[0, 1, 0] = 0.1, 0.2
        assert eval_tasks(TaskInstance(p), (0, 0)) == pytest.approx(0.28, abs=1e-15)

    def test_stage_out_of_range(self):
        inst = gen_tasks(3, 1, m=2, seed=0)
        with pytest.raises(StageOutOfRange):
            eval_tasks(inst, (0, 1, 2))

    def test_matches_direct_formula(self):
        inst = gen_tasks(4, 3, m=5, seed=7)
        for s in [(0,), (3, 1, 1), (2, 0, 3, 1, 1, 2)]:
            direct = np.mean([1 - np.prod([1 - inst.p[i, j, a] for j, a in enumerate(s)])
                              for i in range(inst.m)])
            assert eval_tasks(inst, s) == pytest.approx(direct, abs=1e-14)


class TestInfoGain:
    def test_empty(self):
        assert eval_infogain(gen_infogain(5, 2, seed=0), ()) == 0.0

    def test_hand_value(self):
        inst = InfoGainInstance(np.array([1.0]), np.array([1.0, 1.0]), np.array([1.0]))
        assert eval_infogain(inst, (0,)) == pytest.approx(0.5 * math.log(2), abs=1e-15)
        assert eval_infogain(inst, (0,)) == pytest.approx(0.346574, abs=1e-6)

    def test_matches_logdet(self):
        inst = gen_infogain(6, 3, seed=2)
        for s in [(0,), (5, 2), (1, 1, 4, 0)]:
            prec = np.diag(1 / inst.p0)
            for i, v in enumerate(s):
                prec = prec + np.diag([inst.a[v], 1 - inst.a[v]]) / inst.sigma2[i]
            direct = 0.5 * (np.log(np.linalg.det(np.diag(inst.p0))) + np.log(np.linalg.det(prec)))
            assert eval_infogain(inst, s) == pytest.approx(direct, rel=1e-12)


class TestSearchTrack:
    def test_empty(self):
        assert eval_searchtrack(gen_searchtrack(4, 2, 3, 0.0, seed=0), ()) == 0.0

    def test_hand_value(self):
        inst = SearchTrackInstance(np.array([[True]]), np.array([2.0]), np.array([0.5]), 10.0)
        assert eval_searchtrack(inst, (0,)) == 4.0

    @pytest.mark.parametrize("seed", range(6))
    def test_matches_expectation_enumeration(self, seed):
        inst = gen_searchtrack(3, 3, 3, [-1.0, 0.0, 0.5][seed % 3], seed=seed)
        for s in enumerate_sequences(3, 3):
            assert eval_searchtrack(inst, s) == pytest.approx(
                expected_detection_value(inst, s), abs=1e-9)

    def test_repeat_policy(self):
        assert eval_searchtrack(gen_searchtrack(3, 2, 2, 0.0, seed=0), (1, 1)) > 0.0
        inst = gen_searchtrack(3, 2, 2, 0.0, seed=0, allows_repeats=False)
        with pytest.raises(RepeatViolation):
            eval_searchtrack(inst, (1, 1))


class TestRecommender:
    def test_empty(self):
        assert eval_recommender(gen_recommender(4, 3, seed=0), ()) == 0.0

    def test_hand_value(self):
        inst = RecommenderInstance(np.ones(2), np.full((2, 1), 0.5))
        assert eval_recommender(inst, (0, 1)) == 0.75

    def test_direct_formula(self):
        inst = gen_recommender(5, 4, seed=3)
        s = (2, 0, 2, 4)
        total = 0.0
        for t in range(4):
            surv = 1.0
            for v in s:
                total += inst.g[v] * surv * inst.p[v, t]
                surv *= 1 - inst.p[v, t]
        assert eval_recommender(inst, s) == pytest.approx(total / 4, abs=1e-14)


@pytest.mark.parametrize("make,upper", [
    (lambda: gen_tasks(4, 3, m=6, seed=1), lambda i: 1.0),
    (lambda: gen_recommender(4, 5, seed=1), lambda i: 1.0),
    (lambda: gen_searchtrack(4, 3, 5, 0.3, seed=1), lambda i: i.K),
    (lambda: gen_infogain(4, 3, seed=1), lambda i: np.inf),
])
def test_ranges(make, upper):
    inst = make()
    o = InstanceOracle(inst)
    for s in enumerate_sequences(4, 3, inst.allows_repeats):
        v = o(s)
        assert 0.0 <= v <= upper(inst)


@pytest.mark.parametrize("make", [
    lambda: gen_tasks(5, 2, m=3, seed=4),
    lambda: gen_infogain(5, 2, seed=4),
    lambda: gen_searchtrack(5, 2, 4, -0.4, seed=4),
    lambda: gen_recommender(5, 3, seed=4),
])
def test_serialization_roundtrip(tmp_path, make):
    inst = make()
    path = tmp_path / "inst.txt"
    save_instance(inst, path)
    again = load_instance(path)
    assert type(again) is type(inst)
    a, b = InstanceOracle(inst), InstanceOracle(again)
    for s in enumerate_sequences(5, 3, inst.allows_repeats):
        assert a(s) == b(s)


def test_load_rejects_garbage(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("seqsub-instance 1\nfamily tasks\np float 2 0.1\n")
    with pytest.raises(MalformedRecord):
        load_instance(path)
