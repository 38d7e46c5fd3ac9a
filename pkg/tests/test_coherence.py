import math
import random

import pytest

from cascadescope.coherence import (
    CoherenceResult,
    WindowStats,
    c_v,
    npmi,
    sliding_windows,
    topic_cv,
    write_coherence_csv,
)

FOUR_WINDOWS = [["a", "b"], ["b", "a"], ["a"], ["c"]]


@pytest.fixture
def four():
    return sliding_windows(FOUR_WINDOWS, 110)


def test_window_counts(four):
    assert four.n_windows == 4
    assert (four.p("a"), four.p("b"), four.co("a", "b") / 4) == (0.75, 0.5, 0.5)


def test_short_doc_is_one_window():
    assert sliding_windows([["w", "x", "y", "z"]], 110).n_windows == 1


def test_width_two_windows():
    s = sliding_windows([["a", "b", "c"]], 2)
    assert s.n_windows == 2 and s.occ("b") == 2 and s.occ("a") == 1
    assert s.co("a", "c") == 0 and s.co("b", "c") == 1


def test_windows_do_not_cross_documents():
    s = sliding_windows([["a"], ["b"]], 110)
    assert s.co("a", "b") == 0


def test_self_cooccurrence_identity(four):
    assert four.co("a", "a") == four.occ("a") == 3


def test_empty_corpus():
    with pytest.raises(ValueError):
        sliding_windows([[], []])
    with pytest.raises(ValueError):
        sliding_windows([["a"]], 0)


def test_npmi_hand_value(four):
    assert npmi("a", "b", four) == pytest.approx(math.log(4 / 3) / -math.log(0.5), abs=1e-9)
    assert npmi("a", "b", four) == pytest.approx(0.4150, abs=5e-5)


def test_npmi_identities(four):
    assert npmi("a", "a", four) == pytest.approx(1.0, abs=1e-9)
    tiny = WindowStats(110, four.n_windows, four.occurrence, four.co_occurrence, epsilon=1e-300)
    assert npmi("b", "c", tiny) < -0.99


def test_npmi_unseen_word_warns(four):
    with pytest.warns(UserWarning):
        assert npmi("a", "zzz", four) == 0.0


def test_topic_score_hand_value(four):
    assert topic_cv(["a", "b"], four) == pytest.approx(0.9241, abs=1e-4)
    assert topic_cv(["b", "a"], four) == topic_cv(["a", "b"], four)


def test_single_word_topic(four):
    assert topic_cv(["a"], four) == 1.0


def test_always_cooccurring_words():
    docs = [["x", "y", "z", "q"][: random.Random(i).randint(3, 4)] for i in range(30)]
    s = sliding_windows(docs, 110)
    assert topic_cv(["x", "y", "z"], s) == pytest.approx(1.0, abs=1e-6)


def test_order_invariance():
    rng = random.Random(4)
    docs = [[rng.choice("abcdef") for _ in range(rng.randint(1, 12))] for _ in range(40)]
    a = topic_cv(["a", "b", "c", "d"], sliding_windows(docs, 5))
    rng.shuffle(docs)
    b = topic_cv(["a", "b", "c", "d"], sliding_windows(docs, 5))
    assert a == pytest.approx(b, abs=1e-12)
    assert -1.0 <= a <= 1.0


def test_merge_equals_joint_count():
    docs = [["a", "b", "c"], ["b", "c"], ["a"], ["c", "a", "a"]]
    joint = sliding_windows(docs, 2)
    merged = sliding_windows(docs[:2], 2).merge(sliding_windows(docs[2:], 2))
    assert (merged.n_windows, merged.occurrence, merged.co_occurrence) == (
        joint.n_windows, joint.occurrence, joint.co_occurrence)
    with pytest.raises(ValueError):
        joint.merge(sliding_windows(docs, 3))


def test_undefined_topic_excluded(four):
    with pytest.warns(UserWarning, match="excluded"):
        res = c_v([["a", "b"], ["nope"]], four)
    assert res.per_topic[1] is None and res.undefined == [1]
    assert res.mean == pytest.approx(res.per_topic[0])
    assert math.isnan(CoherenceResult([None]).mean)


def test_csv(tmp_path, four):
    write_coherence_csv([(2, c_v([["a", "b"], ["a"]], four))], tmp_path / "c.csv")
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "K,topic,score"
    assert lines[-1].startswith("2,mean,")
