import itertools

import numpy as np
import pytest

from seqsub.dagmodel import (DagObjective, PreferenceDag, eval_dag,
                             gen_dag_synthetic, h_value, induced_edges,
                             load_dag, load_movielens, read_ratings, reorder,
                             save_dag)
from seqsub.errors import (EmptyResult, MalformedRecord, RepeatViolation,
                           ValidationError)
from seqsub.seqcore import check_monotonicity, enumerate_sequences


def two_vertex():
    return PreferenceDag(2, {(0, 0): 0.3, (1, 1): 0.4, (0, 1): 0.5})


def chain():
    return PreferenceDag(3, {(0, 0): 0.1, (1, 1): 0.2, (2, 2): 0.3,
                             (0, 1): 0.4, (1, 2): 0.5, (0, 2): 0.6})


class TestPreferenceDag:
    def test_cycle_rejected(self):
        with pytest.raises(ValidationError):
            PreferenceDag(2, {(0, 1): 0.5, (1, 0): 0.5})

    def test_weight_range(self):
        with pytest.raises(ValidationError):
            PreferenceDag(2, {(0, 1): 1.5})

    def test_vertex_range(self):
        with pytest.raises(ValidationError):
            PreferenceDag(2, {(0, 2): 0.5})

    def test_order_respects_edges(self):
        dag = PreferenceDag(4, {(3, 0): 0.2, (0, 1): 0.3, (2, 2): 0.1})
        assert list(dag.order) == [2, 3, 0, 1]
        for u, v in dag.edges:
            assert dag.rank[u] <= dag.rank[v]


class TestInducedEdges:
    def test_empty(self):
        assert induced_edges(two_vertex(), ()) == set()

    def test_two_vertex(self):
        assert induced_edges(two_vertex(), (0, 1)) == {(0, 0), (1, 1), (0, 1)}
        assert induced_edges(two_vertex(), (1, 0)) == {(0, 0), (1, 1)}

    def test_chain_skip(self):
        assert induced_edges(chain(), (0, 2)) == {(0, 0), (2, 2), (0, 2)}

    def test_repeats_rejected(self):
        with pytest.raises(RepeatViolation):
            induced_edges(chain(), (0, 0))


class TestHValue:
    def test_empty(self):
        for kind in ("modular", "coverage"):
            assert h_value(DagObjective(two_vertex(), kind), set()) == 0.0

    def test_examples(self):
        edges = {(0, 0), (1, 1), (0, 1)}
        assert h_value(DagObjective(two_vertex(), "modular"), edges) == pytest.approx(1.2)
        assert h_value(DagObjective(two_vertex(), "coverage"), edges) == pytest.approx(1.0)

    @pytest.mark.parametrize("kind", ["modular", "coverage"])
    def test_monotone_submodular_exhaustive(self, kind):
        obj = DagObjective(gen_dag_synthetic(4, 2, (0.0, 1.0), seed=3), kind)
        edges = sorted(obj.dag.edges)
        assert len(edges) <= 10
        subsets = [frozenset(c) for r in range(len(edges) + 1)
                   for c in itertools.combinations(edges, r)]
        h = {x: h_value(obj, x) for x in subsets}
        for x in subsets:
            for e in edges:
                if e in x:
                    continue
                y = x | {e}
                assert h[x] <= h[y] + 1e-12
                # marginal gain of e shrinks on supersets of x
                for f in edges:
                    if f in y or f == e:
                        continue
                    assert h[y | {f}] - h[x | {f}] <= h[y] - h[x] + 1e-12


class TestEvalDag:
    def test_empty(self):
        obj = DagObjective(two_vertex())
        assert eval_dag(obj, (), "raw") == 0.0
        assert eval_dag(obj, (), "reordered") == 0.0

    def test_two_vertex_modes(self):
        obj = DagObjective(two_vertex())
        assert eval_dag(obj, (1, 0), "raw") == pytest.approx(0.7)
        assert eval_dag(obj, (1, 0), "reordered") == pytest.approx(1.2)

    @pytest.mark.parametrize("kind", ["modular", "coverage"])
    def test_kernel_matches_h_of_edges(self, kind):
        obj = DagObjective(gen_dag_synthetic(5, 2, (0.0, 0.5), seed=1), kind)
        for s in enumerate_sequences(5, 3, allows_repeats=False):
            raw = h_value(obj, induced_edges(obj.dag, s))
            assert eval_dag(obj, s, "raw") == pytest.approx(raw, abs=1e-12)
            best = h_value(obj, induced_edges(obj.dag, reorder(obj.dag, s)))
            assert eval_dag(obj, s, "reordered") == pytest.approx(best, abs=1e-12)
            assert eval_dag(obj, s, "reordered") >= eval_dag(obj, s, "raw") - 1e-12

    @pytest.mark.parametrize("seed", range(5))
    @pytest.mark.parametrize("kind", ["modular", "coverage"])
    def test_reorder_is_best_permutation(self, seed, kind):
        obj = DagObjective(gen_dag_synthetic(5, 3, (0.0, 1.0), seed=seed), kind)
        oracle = obj.oracle("raw")
        for r in range(4):
            for items in itertools.combinations(range(5), r):
                best = max(oracle(p) for p in itertools.permutations(items))
                assert oracle(reorder(obj.dag, items)) == pytest.approx(best, abs=1e-12)

    def test_raw_mode_subsequence_monotone(self):
        for kind in ("modular", "coverage"):
            obj = DagObjective(gen_dag_synthetic(5, 2, (0.0, 1.0), seed=2), kind)
            assert check_monotonicity(obj.oracle("raw"), "subsequence", max_len=2).holds


def test_reorder_examples():
    assert reorder(chain(), ()) == ()
    assert reorder(chain(), {2, 0}) == (0, 2)


class TestSynthetic:
    def test_single_vertex(self):
        dag = gen_dag_synthetic(1, 5, (0.0, 1.0), seed=0)
        assert list(dag.edges) == [(0, 0)]

    def test_out_degree(self):
        dag = gen_dag_synthetic(30, 5, (0.0, 1.0), seed=4)
        for i in range(30):
            out = sum(1 for (u, v) in dag.edges if u == i and v != i)
            assert out == min(5, 29 - i)
            assert (i, i) in dag.edges

    def test_deterministic(self):
        assert gen_dag_synthetic(12, 3, (0.0, 0.1), 7) == gen_dag_synthetic(12, 3, (0.0, 0.1), 7)
        assert gen_dag_synthetic(12, 3, (0.0, 0.1), 7) != gen_dag_synthetic(12, 3, (0.0, 0.1), 8)

    def test_self_loop_range(self):
        dag = gen_dag_synthetic(40, 3, (0.0, 0.1), seed=1)
        assert all(w <= 0.1 for (u, v), w in dag.edges.items() if u == v)


class TestFiles:
    def test_roundtrip(self, tmp_path):
        dag = gen_dag_synthetic(10, 3, (0.0, 1.0), seed=5)
        path = tmp_path / "dag.txt"
        save_dag(dag, path)
        assert load_dag(path) == dag

    def test_count_mismatch(self, tmp_path):
        path = tmp_path / "dag.txt"
        path.write_text("2 2\n0 0 0.5\n")
        with pytest.raises(MalformedRecord):
            load_dag(path)


# users 1-3 each rate movies 10 and 20; user 4 rates only one movie
RATINGS = """\
1::10::5::100
1::20::3::200
2::20::4::50
2::10::2::60
3::10::4::300
3::20::4::400
4::10::1::10
"""


class TestMovielens:
    def test_hand_fixture(self, tmp_path):
        path = tmp_path / "ratings.dat"
        path.write_text(RATINGS)
        dag, info = load_movielens(path, min_user=2, max_user=2, min_movie=3, smoothing=20)
        assert info["users"] == 3
        assert info["movie_ids"] == [20, 10]  # movie 20 first rated at t=50
        # N = (3, 3); user 2 rated 20 before 10, users 1 and 3 the other way
        assert dag.edges[(0, 0)] == pytest.approx(3 / 23)
        assert dag.edges[(1, 1)] == pytest.approx(3 / 23)
        assert dag.edges[(0, 1)] == pytest.approx(1 / 23)
        assert (1, 0) not in dag.edges

    def test_raw_counts_option(self, tmp_path):
        path = tmp_path / "ratings.dat"
        path.write_text(RATINGS)
        _, info = load_movielens(path, min_user=2, max_user=2, min_movie=4, movie_counts="raw")
        assert info["movie_ids"] == [10]
        with pytest.raises(EmptyResult):
            load_movielens(path, min_user=2, max_user=2, min_movie=4)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "ratings.dat"
        path.write_text("")
        with pytest.raises(EmptyResult):
            read_ratings(path)

    def test_malformed_line_number(self, tmp_path):
        path = tmp_path / "ratings.dat"
        path.write_text("1::10::5::100\n1:20:3:200\n")
        with pytest.raises(MalformedRecord, match=":2:"):
            read_ratings(path)

    def test_filters_eliminate_everything(self, tmp_path):
        path = tmp_path / "ratings.dat"
        path.write_text(RATINGS)
        with pytest.raises(EmptyResult):
            load_movielens(path)


def test_weight_matrix():
    dag = gen_dag_synthetic(6, 2, (0.0, 1.0), seed=0)
    W, mask = dag.weight_matrix()
    assert mask.sum() == dag.num_edges
    assert np.all(W[~mask] == 0.0)
