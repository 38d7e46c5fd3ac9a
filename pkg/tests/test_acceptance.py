"""Acceptance checks, one test per criterion.

Each test records a PASS/FAIL line that is printed as it finishes and
again in the terminal summary.
"""
import math
import random
import time
from contextlib import contextmanager

import numpy as np
import pytest
import scipy.sparse as sp
from sklearn.cluster import KMeans
from sklearn.manifold import trustworthiness

from cascadescope import cli
from cascadescope.cascade import TIME_POINTS, build_cascade, graph_stats, retweet_stats
from cascadescope.changepoint import binseg
from cascadescope.coherence import sliding_windows, topic_cv
from cascadescope.embed import exact_knn, fit_umap, hellinger
from cascadescope.layout import kamada_kawai_layout, stress
from cascadescope.synth import cluster_fixture, implied_edges, table_events
from cascadescope.topics import LdaHyperparams, train_lda
from cascadescope.trends import per_minute_rate
from cascadescope.vectorize import SparseMatrix, build_vocab, count_matrix, tfidf
from conftest import ACCEPTANCE
from oracles import brute_knn, dp_segmentation, gibbs_coassignment, random_corpus, sorted_stats, tfidf_dense
from test_changepoint import staircase
from test_layout import random_graph
from test_topics import two_topic_corpus


@contextmanager
def criterion(n, title):
    ok = False
    try:
        yield
        ok = True
    finally:
        ACCEPTANCE[n] = (title, ok)
        print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {n:>2}: {title}")


def _cos(x, y):
    return float(x @ y / (np.linalg.norm(x) * np.linalg.norm(y)))


def test_01_tfidf_oracle():
    with criterion(1, "sparse TF-IDF equals dense evaluation on 50 random corpora (1e-12, <10 s)"):
        rng = np.random.default_rng(101)
        t = time.perf_counter()
        worst = 0.0
        for _ in range(50):
            docs = random_corpus(rng, int(rng.integers(1, 201)), int(rng.integers(1, 501)))
            v = build_vocab(docs)
            got = tfidf(count_matrix(docs, v), v).matrix.toarray()
            worst = max(worst, float(np.abs(got - tfidf_dense(docs, v.terms)).max()))
        elapsed = time.perf_counter() - t
        assert worst <= 1e-12
        assert elapsed < 10


# keyword raw counts, rates per minute and corpus spans as printed
KEYWORDS = ["bed", "hospital", "mask", "icu", "help", "nurse", "doctors", "vent",
            "test_pos", "serious_cond", "exposure", "cough", "fever"]
MINUTES = [44, 94, 105, 530, 929, 2737, 2547]
RAW = [
    [147, 1323, 1685, 139, 114, 215, 372, 1143, 28, 1, 11, 18, 1],
    [293, 3104, 3641, 265, 299, 352, 758, 2321, 122, 4, 26, 35, 10],
    [191, 3218, 3607, 180, 248, 504, 891, 4073, 101, 2, 19, 19, 3],
    [1475, 21707, 28512, 1225, 1742, 3708, 6895, 13190, 589, 13, 114, 157, 23],
    [1959, 28495, 67703, 1344, 3416, 5233, 9671, 16717, 948, 13, 141, 459, 137],
    [5652, 80495, 231185, 4034, 8661, 16823, 28603, 64112, 2228, 48, 525, 977, 122],
    [5648, 81025, 159915, 6350, 7741, 14767, 27341, 45614, 2612, 36, 445, 786, 133],
]
RATES = [
    [3.341, 30.068, 38.295, 3.159, 2.591, 4.886, 8.455, 25.977, 0.636, 0.023, 0.250, 0.409, 0.023],
    [3.117, 33.021, 38.734, 2.819, 3.181, 3.745, 8.064, 24.691, 1.298, 0.043, 0.277, 0.372, 0.106],
    [1.819, 30.648, 34.352, 1.714, 2.362, 4.800, 8.486, 38.790, 0.962, 0.019, 0.181, 0.181, 0.029],
    [2.783, 40.957, 53.796, 2.311, 3.287, 6.996, 13.009, 24.887, 1.111, 0.025, 0.215, 0.296, 0.043],
    [2.109, 30.673, 72.877, 1.447, 3.677, 5.633, 10.410, 17.995, 1.020, 0.014, 0.152, 0.494, 0.147],
    [2.065, 29.410, 84.467, 1.474, 3.164, 6.147, 10.450, 23.424, 0.814, 0.018, 0.192, 0.357, 0.045],
    [2.218, 31.812, 62.786, 2.493, 3.039, 5.798, 10.735, 17.909, 1.026, 0.014, 0.175, 0.309, 0.052],
]


def test_02_keyword_rate_table():
    with criterion(2, "per-minute rates reproduce all 13x7 published cells (+-0.001)"):
        misses = [
            (MINUTES[r], KEYWORDS[c])
            for r in range(7)
            for c in range(13)
            if abs(per_minute_rate(RAW[r][c], MINUTES[r]) - RATES[r][c]) > 0.001
        ]
        assert per_minute_rate(1685, 44) == 38.295
        assert misses == []


def test_03_lda():
    with criterion(3, "LDA row sums per pass, two-topic recovery, Gibbs vs exhaustive posterior"):
        docs, words, dists = two_topic_corpus(0)
        vocab = build_vocab(docs)
        counts = count_matrix(docs, vocab)
        truth = np.zeros((2, len(vocab)))
        for k in range(2):
            for w, p in zip(words[k], dists[k]):
                truth[k, vocab.index[w]] = p

        passes = []

        def check(model):
            passes.append(max(np.abs(model.phi.sum(1) - 1).max(), np.abs(model.theta.sum(1) - 1).max()))

        train_lda(counts, LdaHyperparams(K=3, iterations=5, passes=4, gamma_threshold=0.0), vocab, on_pass=check)
        assert len(passes) == 4 and max(passes) <= 1e-9

        t = time.perf_counter()
        m = train_lda(counts, LdaHyperparams(K=2, seed=0), vocab)
        assert time.perf_counter() - t < 30
        best = max(min(_cos(m.phi[0], truth[0]), _cos(m.phi[1], truth[1])),
                   min(_cos(m.phi[0], truth[1]), _cos(m.phi[1], truth[0])))
        assert best >= 0.95

        micro = [[0, 0, 1], [1, 1, 0]]
        dense = np.zeros((2, 2))
        for d, doc in enumerate(micro):
            for w in doc:
                dense[d, w] += 1
        exact = gibbs_coassignment([sorted(d) for d in micro], 2, 2, 0.5, 0.5)
        freq = np.zeros_like(exact)
        n = 0
        for seed in range(4):
            def tally(model):
                nonlocal n
                z = model.assignments
                freq[:] += z[:, None] == z[None, :]
                n += 1

            params = LdaHyperparams(K=2, alpha=0.5, eta=0.5, iterations=1, passes=8000, gamma_threshold=-1.0, seed=seed)
            train_lda(SparseMatrix(sp.csr_matrix(dense), "count"), params, on_pass=tally)
        assert np.abs(freq / n - exact).max() <= 0.02


def test_04_coherence():
    with criterion(4, "C_v hand fixture 0.9241, single word 1.0, co-occurring set 1"):
        four = sliding_windows([["a", "b"], ["b", "a"], ["a"], ["c"]], 110)
        assert topic_cv(["a", "b"], four) == pytest.approx(0.9241, abs=0.001)
        assert topic_cv(["a"], four) == 1.0
        docs = [["x", "y", "z", "q"][: random.Random(i).randint(3, 4)] for i in range(30)]
        assert topic_cv(["x", "y", "z"], sliding_windows(docs, 110)) == pytest.approx(1.0, abs=1e-6)


def test_05_changepoint():
    with criterion(5, "binseg equals DP where optima nest, +-2 accuracy 100/100, flat series splits nowhere"):
        rng = np.random.default_rng(55)
        checked = 0
        for _ in range(300):
            n = int(rng.integers(2, 65))
            y = rng.normal(size=n) + np.repeat(rng.normal(scale=3, size=4), math.ceil(n / 4))[:n]
            top = min(3, n - 1)
            optima = [dp_segmentation(y, K) for K in range(top + 1)]
            for K in range(1, top + 1):
                if all(set(optima[k][1]) <= set(optima[k + 1][1]) for k in range(K)):
                    assert binseg(y, n_bkps=K).total_cost == pytest.approx(optima[K][0], rel=1e-9, abs=1e-9)
                    checked += 1
        assert checked >= 300

        rng = np.random.default_rng(2024)
        hits = 0
        for _ in range(100):
            y, taus = staircase(rng)
            got = binseg(y, n_bkps=3).breakpoints
            hits += all(abs(g - t) <= 2 for g, t in zip(got, taus))
        assert hits == 100

        for value, n in ((0.0, 10), (2.0, 30), (-7.5, 64)):
            assert binseg([value] * n, penalty=0.1).breakpoints == []


def _purity(labels, clusters):
    return sum(np.bincount(labels[clusters == c]).max() for c in np.unique(clusters)) / len(labels)


def test_06_hellinger_umap():
    with criterion(6, "Hellinger exact, k-NN equals brute force, 3-cluster fixture in 5/5 seeds"):
        assert hellinger([0.2, 0.8], [0.2, 0.8]) == 0.0
        assert abs(hellinger([1, 0], [0, 1]) - 1.0) <= 1e-12
        expected = math.sqrt((math.sqrt(0.5) - 1) ** 2 + 0.5) / math.sqrt(2)
        assert abs(hellinger([0.5, 0.5], [1, 0]) - expected) <= 1e-12

        for n in (50, 500, 2000):
            x = np.round(np.random.default_rng(n).normal(size=(n, 4)), 1)
            idx, dist = exact_knn(x, 15)
            ref, d = brute_knn(x, 15)
            assert (idx == ref).all()
            assert np.abs(dist - np.take_along_axis(d, ref, 1)).max() <= 1e-12

        for metric in ("euclidean", "hellinger"):
            for seed in range(5):
                x, y = cluster_fixture(seed=seed)
                t = time.perf_counter()
                emb = fit_umap(x, metric=metric, seed=seed)
                assert time.perf_counter() - t < 60
                assert trustworthiness(x, emb.coords, n_neighbors=15) >= 0.90, (metric, seed)
                km = KMeans(3, n_init=10, random_state=0).fit_predict(emb.coords)
                assert _purity(y, km) >= 0.9, (metric, seed)


def test_07_retweet_timing():
    with criterion(7, "timing median, mean and log histogram match a sort oracle on 1000 sets"):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            size = int(rng.integers(1, 400))
            if rng.random() < 0.5:
                deltas = rng.integers(0, 10 ** int(rng.integers(1, 7)), size=size).tolist()
            else:
                deltas = (rng.lognormal(8, 2.5, size=size)).tolist()
            st = retweet_stats(deltas)
            assert (st.median_s, st.mean_s, st.log_hist) == sorted_stats(deltas)
        # published references, only checked for unit arithmetic
        assert round(10_332 / 3600, 2) == 2.87


CASCADE_ROWS = [(0.000428, 1278), (0.000449, 1248), (0.000450, 1247), (0.000460, 1234), (0.000567, 1110),
                (0.000538, 1139), (0.000540, 1138), (0.000685, 1005), (0.000598, 1067)]


def test_08_cascade_density():
    with criterion(8, "published densities imply ~700 edges; 700-event generator reproduces each row (5e-6)"):
        for d, n in CASCADE_ROWS:
            assert 670 <= d * n * (n - 1) <= 701
        pool = []
        for (label, tp), (d, n) in zip(TIME_POINTS, CASCADE_ROWS):
            pool += table_events(d, n, tp, n_events=700, seed=8, label=label)
        for (label, tp), (d, n) in zip(TIME_POINTS, CASCADE_ROWS):
            s = graph_stats(build_cascade(pool, tp, max_edges=700, label=label))
            assert s.n_events == 700
            assert s.n_nodes == n and s.n_edges == implied_edges(d, n)
            assert abs(s.density - d) <= 5e-6, label


def test_09_kamada_kawai():
    with criterion(9, "KK path optimum, monotone stress on 20 graphs, rigid-motion invariance"):
        lay = kamada_kawai_layout(["a", "b", "c"], [("a", "b"), ("b", "c")], seed=0)
        assert lay.stress <= 1e-6
        for seed in range(20):
            rng = np.random.default_rng(seed)
            nodes, edges = random_graph(rng, int(rng.integers(5, 40)), 0.15)
            h = np.array(kamada_kawai_layout(nodes, edges, iterations=50, seed=seed).history)
            assert (np.diff(h) <= 1e-12 * max(1.0, h[0])).all()
        nodes, edges = random_graph(np.random.default_rng(2), 30, 0.12)
        lay = kamada_kawai_layout(nodes, edges, seed=0)
        th = 0.7
        rot = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
        moved = {v: tuple(rot @ np.array(p) + np.array([3.0, -11.0])) for v, p in lay.positions.items()}
        assert abs(stress(moved, nodes, edges) - stress(lay.positions, nodes, edges)) <= 1e-9


@pytest.mark.slow
def test_10_end_to_end(shipped_archive, tmp_path):
    with criterion(10, "pipeline on the shipped 10k archive twice: <5 min each, identical manifests"):
        manifests = []
        for name in ("run1", "run2"):
            t = time.perf_counter()
            rc = cli.main(["pipeline", "--input", str(shipped_archive), "--out-dir", str(tmp_path / name), "--seed", "0"])
            assert rc == 0
            assert time.perf_counter() - t < 300
            manifests.append((tmp_path / name / "manifest.json").read_bytes())
        assert manifests[0] == manifests[1]
        assert (tmp_path / "run1" / "report.md").read_text().count("\n## ") == 7
