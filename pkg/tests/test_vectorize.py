import math

import numpy as np
import pytest

from cascadescope.vectorize import (
    EmptyCorpusError,
    SparseMatrix,
    Vocabulary,
    build_vocab,
    count_matrix,
    tfidf,
    top_features,
)
from oracles import random_corpus, tfidf_dense
import scipy.sparse as sp


def test_df_by_hand():
    v = build_vocab([["a", "b"], ["b", "c"]])
    assert v.terms == ["a", "b", "c"]
    assert v.df.tolist() == [1, 2, 1]
    assert v.n_docs == 2


def test_bigram():
    v = build_vocab([["icu", "bed"]], ngram_range=(2, 2))
    assert v.terms == ["icu bed"] and v.df.tolist() == [1]


def test_max_features_keeps_most_frequent():
    docs = [[f"w{i:02d}"] * (i + 1) for i in range(15)]
    v = build_vocab(docs, max_features=10)
    assert v.terms == [f"w{i:02d}" for i in range(5, 15)]


def test_ties_broken_lexicographically():
    v = build_vocab([["b", "a", "c"]], max_features=2)
    assert v.terms == ["a", "b"]


def test_empty_corpus():
    with pytest.raises(EmptyCorpusError):
        build_vocab([[], []])
    with pytest.raises(ValueError):
        build_vocab([["a"]], ngram_range=(2, 1))


def test_count_rows():
    v = build_vocab([["mask", "icu", "bed"]])
    m = count_matrix([["mask", "mask", "icu"], ["zzz"]], v).matrix.toarray()
    assert m[0].tolist() == [0, 1, 2]
    assert m[1].tolist() == [0, 0, 0]


def test_three_doc_tabulation():
    docs = [["a", "b", "a"], ["c"], ["b", "c", "c", "c"]]
    v = build_vocab(docs)
    expected = [[2, 1, 0], [0, 0, 1], [0, 1, 3]]
    assert count_matrix(docs, v).matrix.toarray().tolist() == expected


def test_tfidf_hand_value():
    # N=4, df=2, tf=3/6 -> 0.5 ln 2
    docs = [["x"] * 3 + ["y"] * 3, ["x"], ["y"], ["y"]]
    v = build_vocab(docs)
    w = tfidf(count_matrix(docs, v), v).matrix.toarray()
    assert w[0, v.index["x"]] == pytest.approx(0.34657, abs=5e-6)
    assert w[0, v.index["x"]] == pytest.approx(0.5 * math.log(2), abs=1e-15)


def test_term_in_every_doc_is_zero():
    docs = [["a", "b"], ["a"], ["a", "c"]]
    v = build_vocab(docs)
    w = tfidf(count_matrix(docs, v), v)
    assert w.matrix.toarray()[:, v.index["a"]].tolist() == [0, 0, 0]
    assert (w.matrix.data != 0).all()


def test_tfidf_matches_dense_formula():
    rng = np.random.default_rng(11)
    for _ in range(10):
        docs = random_corpus(rng, 60, 40)
        v = build_vocab(docs, max_features=25)
        got = tfidf(count_matrix(docs, v), v).matrix.toarray()
        np.testing.assert_allclose(got, tfidf_dense(docs, v.terms), rtol=0, atol=1e-12)


def test_tfidf_sparsity_and_sign():
    rng = np.random.default_rng(5)
    docs = random_corpus(rng, 40, 30)
    v = build_vocab(docs)
    c = count_matrix(docs, v)
    w = tfidf(c, v)
    assert (np.diff(w.matrix.indptr) <= np.diff(c.matrix.indptr)).all()
    assert (w.matrix.data > 0).all()


def test_df_monotonicity():
    docs = [["a", "b"], ["a", "b"], ["a", "c"], ["d"]]
    v = build_vocab(docs)
    w = tfidf(count_matrix(docs, v), v).matrix.toarray()
    # same tf (1/2) in doc 2 for a (df 3) and c (df 1)
    assert w[2, v.index["c"]] > w[2, v.index["a"]]


def test_tfidf_rejects_weights():
    v = build_vocab([["a"]])
    with pytest.raises(ValueError):
        tfidf(SparseMatrix(sp.csr_matrix([[1.0]]), "tfidf"), v)


def test_top_features():
    v = Vocabulary(["a", "b"], np.array([2, 1]), 2)
    m = SparseMatrix(sp.csr_matrix([[0.2, 0.0], [0.3, 0.4]]), "tfidf")
    got = top_features(m, v, 2)
    assert got[0][0] == "a" and got[0][1] == pytest.approx(0.5)
    assert got[1] == ("b", 0.4)
    single = top_features(SparseMatrix(sp.csr_matrix([[0.5]]), "tfidf"), Vocabulary(["a"], np.array([1]), 1), 1)
    assert single == [("a", 0.5)]
    with pytest.warns(UserWarning):
        assert len(top_features(m, v, 50)) == 2


def test_persistence_round_trip(tmp_path):
    rng = np.random.default_rng(2)
    docs = random_corpus(rng, 20, 15)
    v = build_vocab(docs, ngram_range=(1, 2))
    c = count_matrix(docs, v)
    w = tfidf(c, v)
    v.write(tmp_path / "v.tsv")
    c.write(tmp_path / "c.mtx")
    w.write(tmp_path / "w.mtx")
    v2 = Vocabulary.read(tmp_path / "v.tsv")
    assert v2.terms == v.terms and v2.df.tolist() == v.df.tolist() and v2.ngram_range == (1, 2)
    assert (SparseMatrix.read(tmp_path / "c.mtx").matrix != c.matrix).nnz == 0
    np.testing.assert_array_equal(SparseMatrix.read(tmp_path / "w.mtx").matrix.toarray(), w.matrix.toarray())
    assert (tmp_path / "c.mtx").read_text().splitlines()[0].endswith("count")
