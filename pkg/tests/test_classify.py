import math
import random
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from surprise_stats.classify import (
    Classifier,
    EvalSuite,
    bootstrap,
    classify,
    cross_entropy,
    cross_entropy_from_probs,
    evaluate,
    make_eval_suite,
    normalize,
    soft_classify,
    train,
)
from surprise_stats.ngram import Alphabet, count_ngrams

SYMBOLS = "abcd"

# Doubly stochastic transition matrices: both sources have uniform unigram
# frequencies, so only order >= 1 models can tell them apart.
FORWARD = [[0.1, 0.6, 0.2, 0.1], [0.1, 0.1, 0.6, 0.2], [0.2, 0.1, 0.1, 0.6], [0.6, 0.2, 0.1, 0.1]]
BACKWARD = [list(col) for col in zip(*FORWARD)]


def markov_text(rng, matrix, n):
    state = rng.randrange(4)
    out = []
    for _ in range(n):
        state = rng.choices(range(4), weights=matrix[state])[0]
        out.append(SYMBOLS[state])
    return "".join(out).encode()


@pytest.fixture(scope="module")
def markov_pair():
    rng = random.Random(7)
    return train({"fwd": markov_text(rng, FORWARD, 20000), "bwd": markov_text(rng, BACKWARD, 20000)}, k=1)


class TestTrain:
    def test_single_label(self):
        clf = train({"only": b"hello there"}, k=2)
        assert classify(clf, b"anything at all").label == "only"
        assert soft_classify(clf, b"xyz") == {"only": 1.0}

    def test_identical_corpora(self):
        clf = train({"a": b"same text", "b": b"same text"}, k=2)
        assert clf.categories[0].counts == clf.categories[1].counts

    def test_errors(self):
        with pytest.raises(ValueError):
            train([("a", b"x"), ("a", b"y")])
        with pytest.raises(ValueError):
            train({"a": b""})
        with pytest.raises(ValueError):
            train({"a": b"x"}, default_label="zzz")

    def test_top_bigrams_differ(self):
        clf = train({"en": b"the cat sat on the mat with the hat",
                     "es": b"el gato se sienta en la alfombra con el sombrero"}, k=1)
        top = [max(c.counts.grams[2].items(), key=lambda kv: (kv[1], kv[0]))[0] for c in clf.categories]
        assert top[0] != top[1]

    def test_multiple_texts_padded_separately(self):
        clf = train({"a": [b"ab", b"ab"]}, k=1)
        assert clf.categories[0].counts == count_ngrams(b"ab", 1, Alphabet.bytes()) + count_ngrams(
            b"ab", 1, Alphabet.bytes())

    def test_json_roundtrip(self, markov_pair):
        again = Classifier.from_json(markov_pair.to_json())
        assert again == markov_pair

    def test_combine(self):
        a = train({"x": b"aaaa"}, k=1)
        b = train({"y": b"bbbb"}, k=1)
        assert Classifier.combine([a, b]).labels == ["x", "y"]


class TestClassify:
    def test_disjoint_alphabets(self):
        clf = train({"ab": b"abababab" * 20, "cd": b"cdcdcdcd" * 20}, k=2)
        assert classify(clf, b"abababab").label == "ab"
        assert classify(clf, b"cdcd").label == "cd"

    def test_tie_policy(self):
        clf = train({"b": b"xyz", "a": b"xyz"}, k=1)
        assert classify(clf, b"xy").label == "a"
        rigged = train({"b": b"xyz", "a": b"xyz"}, k=1, default_label="b")
        assert classify(rigged, b"xy").label == "b"

    def test_empty_test(self):
        clf = train({"b": b"xyz", "a": b"qrs"}, k=1, default_label="b")
        assert classify(clf, b"").label == "b"
        assert soft_classify(clf, b"") == {"b": 1.0, "a": 0.0}

    def test_whitespace_collapsed_before_scoring(self):
        clf = train({"a": b"one two", "b": b"xyz"}, k=1)
        assert classify(clf, b"one \t\n two").scores == classify(clf, b"one two").scores

    def test_markov_sources(self, markov_pair):
        rng = random.Random(99)
        correct = 0
        for i in range(1000):
            label, matrix = ("fwd", FORWARD) if i % 2 else ("bwd", BACKWARD)
            correct += classify(markov_pair, markov_text(rng, matrix, 500)).label == label
        assert correct >= 990

    def test_order3_beats_order0(self):
        rng = random.Random(3)
        corpora = {"fwd": markov_text(rng, FORWARD, 30000), "bwd": markov_text(rng, BACKWARD, 30000)}
        suite = make_eval_suite(corpora, train_sizes=(5000,), test_sizes=(500,), seed=4, n_train=2, n_test=40)
        report = evaluate(suite, orders=(0, 3))
        assert report.row(5000, 500, 3).err_median <= report.row(5000, 500, 0).err_median
        assert report.row(5000, 500, 0).err_median > 0.2

    def test_error_falls_with_length(self, markov_pair):
        # trend test: error indicator vs test length, one-sided
        rng = random.Random(17)
        lengths, errors = [], []
        for n in (10, 20, 50, 100, 200, 500):
            for i in range(1000):
                label, matrix = ("fwd", FORWARD) if i % 2 else ("bwd", BACKWARD)
                lengths.append(n)
                errors.append(classify(markov_pair, markov_text(rng, matrix, n)).label != label)
        tau, p = stats.kendalltau(lengths, errors)
        assert tau < 0 and p / 2 < 0.01


class TestSoftClassify:
    def test_symmetric_tie(self):
        clf = train({"a": b"xyz", "b": b"xyz"}, k=1)
        probs = soft_classify(clf, b"xy")
        assert probs == {"a": 0.5, "b": 0.5}

    def test_gap_monotone(self):
        clf = train({"a": b"aaaaaaaaab", "b": b"bbbbbbbbba"}, k=0)
        gaps = []
        for n in range(1, 8):
            p = soft_classify(clf, b"a" * n + b"b" * (8 - n))
            gaps.append(p["a"] - p["b"])
        assert all(x < y for x, y in zip(gaps, gaps[1:]))

    @given(st.binary(min_size=1, max_size=40))
    @settings(max_examples=60, deadline=None)
    def test_sums_to_one_and_argmax(self, data):
        clf = _small_clf()
        probs = soft_classify(clf, data)
        assert math.fsum(probs.values()) == pytest.approx(1.0, abs=1e-9)
        label = classify(clf, data).label
        assert probs[label] == max(probs.values())

    @given(st.binary(min_size=1, max_size=40), st.floats(0.1, 10), st.floats(-50, 50))
    @settings(max_examples=40, deadline=None)
    def test_argmin_invariant_under_monotone_map(self, data, scale, shift):
        clf = _small_clf()
        scores = classify(clf, data).scores
        mapped = {k: scale * v + shift for k, v in scores.items()}
        assert min(scores, key=lambda k: (scores[k], k)) == min(mapped, key=lambda k: (mapped[k], k))


_SMALL = None


def _small_clf():
    global _SMALL
    if _SMALL is None:
        _SMALL = train({"en": b"the quick brown fox jumps over the lazy dog " * 5,
                        "es": b"el veloz murcielago hindu comia feliz cardillo y kiwi " * 5,
                        "de": b"zwoelf boxkaempfer jagen viktor quer ueber den sylter deich " * 5}, k=2)
    return _SMALL


class TestCrossEntropy:
    def test_perfect(self):
        assert cross_entropy_from_probs({"a": [1.0, 1.0], "b": [1.0]}).bits == 0.0

    def test_uniform_eight(self):
        probs = {f"c{i}": [1 / 8] * 10 for i in range(8)}
        assert cross_entropy_from_probs(probs).bits == pytest.approx(24.0)

    def test_zero(self):
        res = cross_entropy_from_probs({"a": [0.5, 0.0], "b": [1.0]})
        assert res.bits == math.inf
        assert res.zero_cases == (("a", 1),)

    def test_from_classifier(self, markov_pair):
        rng = random.Random(2)
        tests = {"fwd": [markov_text(rng, FORWARD, 100) for _ in range(20)],
                 "bwd": [markov_text(rng, BACKWARD, 100) for _ in range(20)]}
        res = cross_entropy(markov_pair, tests)
        assert 0 <= res.bits < 2.0


def corpora_fixture():
    rng = random.Random(0)
    return {"x": bytes(rng.choice(b"ab \n\t") for _ in range(3000)),
            "y": bytes(rng.choice(b"cd  ") for _ in range(3000))}


class TestEvalSuite:
    def test_sizes_and_determinism(self):
        c = corpora_fixture()
        a = make_eval_suite(c, train_sizes=(100, 200), test_sizes=(10, 20), seed=5)
        b = make_eval_suite(c, train_sizes=(100, 200), test_sizes=(10, 20), seed=5)
        assert a.to_json() == b.to_json()
        for label in ("x", "y"):
            assert len(a.train[label]) == 20 and len(a.test[label]) == 200
            for s in a.train[label] + a.test[label]:
                assert len(s.text) == s.size
        assert make_eval_suite(c, (100,), (10,), seed=6).to_json() != make_eval_suite(c, (100,), (10,), seed=5).to_json()

    def test_default_shape(self):
        c = {"x": b"ab" * 30000, "y": b"cd" * 30000}
        s = make_eval_suite(c, seed=1)
        assert len(s.train["x"]) == 60 and len(s.test["x"]) == 600
        assert sorted({t.size for t in s.train["x"]}) == [1000, 2000, 5000, 10000, 20000, 50000]

    def test_offsets_recorded(self):
        c = corpora_fixture()
        suite = make_eval_suite(c, (100,), (10,), seed=2)
        text = normalize(c["x"])
        for s in suite.train["x"] + suite.test["x"]:
            assert text[s.offset:s.offset + s.size] == s.text

    def test_collapse(self):
        assert normalize(b"a \t\n b") == b"a b"
        assert normalize("a \t\n b") == "a b"
        assert normalize(b"AbC", casefold=True) == b"abc"

    def test_too_small(self):
        with pytest.raises(ValueError):
            make_eval_suite({"x": b"abc"}, (100,), (10,))

    def test_json_roundtrip(self):
        suite = make_eval_suite({"x": bytes(range(256)) * 4}, (100,), (10,), seed=3)
        assert EvalSuite.from_json(suite.to_json()).to_json() == suite.to_json()


class TestEvaluate:
    def test_always_right(self):
        suite = make_eval_suite({"a": b"aaaa" * 100}, (100,), (10,), n_train=2, n_test=5)
        report = evaluate(suite, orders=(1,))
        assert report.rows[0].err_median == 0.0
        assert report.rows[0].cross_entropy == 0.0

    def test_deterministic(self):
        c = corpora_fixture()
        suite = make_eval_suite(c, (200,), (10, 20), seed=8, n_train=3, n_test=10)
        r1 = evaluate(suite, orders=(0, 1)).to_tsv()
        r2 = evaluate(suite, orders=(0, 1), workers=4).to_tsv()
        assert r1 == r2
        assert r1.splitlines()[0].split("\t")[:7] == [
            "train_size", "test_size", "k", "err_median", "err_best", "err_worst", "cross_entropy"]

    def test_best_median_worst(self):
        c = corpora_fixture()
        suite = make_eval_suite(c, (100,), (10,), seed=8, n_train=5, n_test=10)
        for row in evaluate(suite, orders=(0,)).rows:
            assert row.err_best <= row.err_median <= row.err_worst


class TestBootstrap:
    def test_constant(self):
        assert bootstrap([3.0] * 20, 200, seed=1) == (3.0, 3.0)

    def test_single_replicate(self):
        data = [1.0, 2.0, 5.0]
        lo, hi = bootstrap(data, 1, seed=4)
        rng = np.random.default_rng(4)
        expected = float(np.mean(np.asarray(data)[rng.integers(0, 3, size=(1, 3))][0]))
        assert lo == hi == pytest.approx(expected)

    def test_empty(self):
        with pytest.raises(ValueError):
            bootstrap([])

    def test_deterministic(self):
        data = list(range(30))
        assert bootstrap(data, 100, seed=9) == bootstrap(data, 100, seed=9)

    def test_coverage(self):
        rng = np.random.default_rng(0)
        covered = 0
        for i in range(300):
            sample = rng.normal(size=40)
            lo, hi = bootstrap(sample, 300, seed=i)
            covered += lo <= 0.0 <= hi
        assert covered / 300 >= 0.90
