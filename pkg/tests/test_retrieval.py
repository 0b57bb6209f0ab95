import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from synnorm.corpus import Dictionary
from synnorm.retrieval import (
    SynonymIndex,
    compose_from_scores,
    distinct_cuis,
    recall_at_k,
    topk_dense,
    topk_ids,
    topk_sparse,
)
from synnorm.sparse import encode_sparse

from conftest import small_encoder


def oracle_topk(scores, j):
    return sorted(range(len(scores)), key=lambda i: (-scores[i], i))[:j]


class TestTopK:
    @given(
        hnp.arrays(np.float64, st.integers(1, 60),
                   elements=st.sampled_from([0.0, 0.5, 1.0, -1.0, 0.25, 2.0])),
        st.integers(0, 70),
    )
    def test_oracle_with_ties(self, scores, j):
        assert topk_ids(scores, j).tolist() == oracle_topk(scores, j)

    def test_zero(self):
        assert topk_ids(np.ones(5), 0).size == 0

    def test_all_equal_returns_lowest_ids(self):
        mat = np.tile(np.array([0.1, 0.2, 0.3]), (8, 1))
        assert topk_dense(np.ones(3), mat, 3).tolist() == [0, 1, 2]

    def test_sparse_self_match_first(self, toy_dict):
        index = SynonymIndex.build(toy_dict)
        for i, name in enumerate(toy_dict.names):
            v = encode_sparse(name, index.tfidf)
            assert topk_sparse(v, index.sparse, 1).tolist() == [i]


class TestCompose:
    def test_counts_without_overlap(self):
        sparse = np.array([9, 8, 7, 6, 0, 0, 0, 0], dtype=float)
        dense = np.array([0, 0, 0, 0, 9, 8, 7, 6], dtype=float)
        cs = compose_from_scores("m", sparse, dense, 4, 0.5)
        assert cs.ids.tolist() == [0, 1, 4, 5]
        assert [c.source for c in cs.candidates] == ["sparse", "sparse", "dense", "dense"]

    def test_refill_hand_example(self):
        # sparse top-2 = {a, b}; dense ranking (a, e, f, ...)
        a, b, e, f = 0, 1, 4, 5
        sparse = np.array([9, 8, 1, 1, 0, 0, 0], dtype=float)
        dense = np.array([9, 0, 0, 0, 8, 7, 6], dtype=float)
        cs = compose_from_scores("m", sparse, dense, 4, 0.5)
        assert cs.ids.tolist() == [a, b, e, f]

    def test_alpha_bounds(self):
        rng = np.random.default_rng(0)
        s, d = rng.random(40), rng.random(40)
        assert all(c.source == "sparse" for c in compose_from_scores("m", s, d, 20, 0.0).candidates)
        assert compose_from_scores("m", s, d, 20, 0.0).ids.tolist() == oracle_topk(s, 20)
        assert compose_from_scores("m", s, d, 20, 1.0).ids.tolist() == oracle_topk(d, 20)

    def test_small_dictionary_falls_back_to_sparse(self):
        sparse = np.array([3.0, 2.0, 1.0])
        dense = np.array([0.0, 0.0, 0.0])
        cs = compose_from_scores("m", sparse, dense, 10, 0.5)
        assert sorted(cs.ids.tolist()) == [0, 1, 2]

    @given(st.integers(1, 30), st.floats(0, 1), st.integers(1, 50), st.integers(0, 10**6))
    def test_cardinality_and_uniqueness(self, k, alpha, n, seed):
        rng = np.random.default_rng(seed)
        s = rng.integers(0, 4, n).astype(float)
        d = rng.integers(0, 4, n).astype(float)
        cs = compose_from_scores("m", s, d, k, alpha)
        ids = cs.ids.tolist()
        assert len(ids) == min(k, n) == len(set(ids))
        n_sparse = min(k - int(np.floor(alpha * k)), n)
        assert ids[:n_sparse] == oracle_topk(s, n_sparse)

    @pytest.mark.parametrize("k, alpha", [(0, 0.5), (5, -0.1), (5, 1.5)])
    def test_invalid(self, k, alpha):
        with pytest.raises(ValueError):
            compose_from_scores("m", np.zeros(3), np.zeros(3), k, alpha)


class TestIndex:
    def test_empty_dictionary(self):
        with pytest.raises(ValueError):
            SynonymIndex(Dictionary((), ()), None)

    def test_mips_matches_full_scan(self, toy_dict):
        enc = small_encoder(seed=2)
        index = SynonymIndex.build(toy_dict, enc)
        texts = ["breast carcinoma", "lung tumor", "colon", "ovary cancer", "xyz"]
        preds = index.mips_infer(texts, enc, 1.7, k=5)
        for text, pred in zip(texts, preds):
            dense = enc.encode(list(toy_dict.names))[0] @ enc.encode([text])[0][0]
            sparse = np.array([
                float(np.dot(encode_sparse(text, index.tfidf).to_dense(len(index.tfidf)), row))
                for row in index.sparse.toarray()
            ])
            ref = oracle_topk(dense + 1.7 * sparse, 5)
            assert pred.synonym_ids.tolist() == ref
            assert pred.cui == toy_dict.cuis[ref[0]]

    def test_sparse_dominates_with_zero_w(self, toy_dict):
        enc = small_encoder()
        enc.params["W"][:] = 0.0
        index = SynonymIndex.build(toy_dict, enc)
        preds = index.mips_infer(list(toy_dict.names), enc, 50.0, k=1)
        assert [p.cui for p in preds] == list(toy_dict.cuis)

    def test_distinct_cuis_and_prefix(self, toy_dict):
        enc = small_encoder()
        index = SynonymIndex.build(toy_dict, enc)
        (p5,) = index.mips_infer(["breast cancer"], enc, 1.0, k=5)
        (p1,) = index.mips_infer(["breast cancer"], enc, 1.0, k=1)
        assert len(p5.cuis) == len(set(p5.cuis)) == 5
        assert p5.cuis[0] == p1.cuis[0] == p1.cui
        assert p5.synonym_ids[0] == p1.synonym_ids[0]
        assert [toy_dict.cuis[i] for i in p5.cui_synonym_ids] == p5.cuis

    def test_unknown_mode(self, toy_dict):
        enc = small_encoder()
        with pytest.raises(ValueError):
            SynonymIndex.build(toy_dict, enc).score_block(["a"], enc, 1.0, "both")


class TestRecall:
    def test_values(self):
        d = Dictionary(("a", "b", "c"), ("X", "Y", "Z"))
        cands = [[0], [1, 2], [2], [0, 1]]
        assert recall_at_k(cands, [{"X"}, {"Z"}, {"Z"}, {"Z"}], d) == 0.75
        assert recall_at_k(cands, [{"Q"}] * 4, d) == 0.0
        assert recall_at_k([[0]] * 2, [{"X"}] * 2, d) == 1.0

    def test_monotone_in_k(self, toy_dict):
        rng = np.random.default_rng(1)
        ranking = rng.permutation(len(toy_dict))
        golds = [{"C3"}]
        values = [recall_at_k([ranking[:k]], golds, toy_dict) for k in range(1, len(toy_dict) + 1)]
        assert values == sorted(values)

    def test_distinct_cuis(self, toy_dict):
        assert distinct_cuis([0, 1, 3, 2, 5], toy_dict, 3) == ["C1", "C2", "C3"]
