"""Source identification with n-gram compatibility scores.

A classifier holds one count table per category and labels a test string
with the category whose training counts it is most compatible with.  The
evaluation helpers rebuild the bilingual experiment design: many training
texts and test strings sampled at random offsets from each corpus.
"""

from __future__ import annotations

import json
import math
import random
import re
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .ngram import Alphabet, NgramCounts, compat_score, count_ngrams, _thread_count

TRAIN_SIZES = (1000, 2000, 5000, 10000, 20000, 50000)
TEST_SIZES = (10, 20, 50, 100, 200, 500)
SUITE_VERSION = 1

_WS_BYTES = re.compile(rb"\s+")
_WS_STR = re.compile(r"\s+")


def normalize(text, collapse_whitespace: bool = True, casefold: bool = False):
    """Collapse whitespace runs to one space; optionally fold case."""
    if isinstance(text, str):
        if collapse_whitespace:
            text = _WS_STR.sub(" ", text)
        return text.lower() if casefold else text
    text = bytes(text)
    if collapse_whitespace:
        text = _WS_BYTES.sub(b" ", text)
    return text.lower() if casefold else text


@dataclass(frozen=True)
class CategoryModel:
    label: str
    counts: NgramCounts

    @property
    def training_size(self) -> int:
        return self.counts.length


@dataclass(frozen=True)
class Classifier:
    categories: tuple[CategoryModel, ...]
    order: int
    alpha: float = 0.2
    default_label: str | None = None
    collapsed: bool = True
    collapse_whitespace: bool = True
    casefold: bool = False

    def __post_init__(self):
        if not self.categories:
            raise ValueError("a classifier needs at least one category")
        labels = [c.label for c in self.categories]
        if len(set(labels)) != len(labels):
            raise ValueError("duplicate category labels")
        alphabets = {c.counts.alphabet for c in self.categories}
        if len(alphabets) != 1:
            raise ValueError("all categories must share one alphabet")
        if any(c.counts.order < self.order for c in self.categories):
            raise ValueError(f"category counts must have order >= {self.order}")
        if self.default_label is not None and self.default_label not in labels:
            raise ValueError(f"default label {self.default_label!r} is not a category")

    @property
    def labels(self) -> list[str]:
        return [c.label for c in self.categories]

    @property
    def alphabet(self) -> Alphabet:
        return self.categories[0].counts.alphabet

    @property
    def fallback(self) -> str:
        return self.default_label if self.default_label is not None else min(self.labels)

    def with_order(self, order: int) -> "Classifier":
        return Classifier(self.categories, order, self.alpha, self.default_label, self.collapsed,
                          self.collapse_whitespace, self.casefold)

    def to_dict(self) -> dict:
        return {
            "format_version": 1,
            "order": self.order,
            "alpha": self.alpha,
            "default_label": self.default_label,
            "collapsed": self.collapsed,
            "collapse_whitespace": self.collapse_whitespace,
            "casefold": self.casefold,
            "categories": [{"label": c.label, "counts": c.counts.to_dict()} for c in self.categories],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: Mapping) -> "Classifier":
        cats = tuple(CategoryModel(c["label"], NgramCounts.from_dict(c["counts"])) for c in d["categories"])
        return cls(cats, d["order"], d["alpha"], d.get("default_label"), d.get("collapsed", True),
                   d.get("collapse_whitespace", True), d.get("casefold", False))

    @classmethod
    def from_json(cls, text: str) -> "Classifier":
        return cls.from_dict(json.loads(text))

    @classmethod
    def combine(cls, classifiers: Sequence["Classifier"]) -> "Classifier":
        """Merge single-category model files into one classifier."""
        first = classifiers[0]
        cats = tuple(c for clf in classifiers for c in clf.categories)
        return cls(cats, min(c.order for c in classifiers), first.alpha, first.default_label,
                   first.collapsed, first.collapse_whitespace, first.casefold)


def _as_items(corpora) -> list[tuple[str, list]]:
    items = list(corpora.items()) if isinstance(corpora, Mapping) else list(corpora)
    labels = [label for label, _ in items]
    if len(set(labels)) != len(labels):
        raise ValueError("duplicate labels")
    out = []
    for label, texts in items:
        if isinstance(texts, (str, bytes, bytearray)):
            texts = [texts]
        out.append((label, list(texts)))
    return out


def train(corpora, k: int = 3, alpha: float = 0.2, alphabet: Alphabet | None = None,
          default_label: str | None = None, collapsed: bool = True,
          collapse_whitespace: bool = True, casefold: bool = False) -> Classifier:
    """Build one count table per label.

    ``corpora`` maps label -> text or list of texts (or is a list of
    (label, texts) pairs).  Separate texts are counted independently, each
    with its own padding, and merged.
    """
    alphabet = alphabet or Alphabet.bytes()
    categories = []
    for label, texts in _as_items(corpora):
        texts = [normalize(t, collapse_whitespace, casefold) if alphabet.mode == "bytes" else t for t in texts]
        if not texts or all(len(t) == 0 for t in texts):
            raise ValueError(f"empty corpus for label {label!r}")
        counts = None
        for t in texts:
            c = count_ngrams(t, k, alphabet)
            counts = c if counts is None else counts + c
        categories.append(CategoryModel(label, counts))
    return Classifier(tuple(categories), k, alpha, default_label, collapsed, collapse_whitespace, casefold)


@dataclass(frozen=True)
class Classification:
    label: str
    scores: dict

    def to_dict(self) -> dict:
        return {"label": self.label, "scores": self.scores}


def _pick(clf: Classifier, scores: Mapping[str, float]) -> str:
    best = min(scores.values())
    tied = [label for label, s in scores.items() if s == best]
    if clf.default_label in tied:
        return clf.default_label
    return min(tied)


def _test_counts(clf: Classifier, test) -> NgramCounts:
    if isinstance(test, NgramCounts):
        return test
    if clf.alphabet.mode == "bytes":
        test = normalize(test, clf.collapse_whitespace, clf.casefold)
    return count_ngrams(test, clf.order, clf.alphabet)


def score_all(clf: Classifier, test) -> dict[str, float]:
    counts = _test_counts(clf, test)
    if counts.length == 0:
        return {}
    return {c.label: compat_score(counts, c.counts, clf.order, clf.alpha, clf.collapsed) for c in clf.categories}


def classify(clf: Classifier, test) -> Classification:
    """Label with the smallest compatibility score; empty input gets the default."""
    scores = score_all(clf, test)
    if not scores:
        return Classification(clf.fallback, {})
    return Classification(_pick(clf, scores), scores)


def soft_classify(clf: Classifier, test) -> dict[str, float]:
    """Probabilities proportional to exp(-s / 2L) with L the test length."""
    counts = _test_counts(clf, test)
    scores = score_all(clf, counts)
    if not scores:
        return {label: float(label == clf.fallback) for label in clf.labels}
    best = min(scores.values())
    scale = 2.0 * counts.length
    weights = {label: math.exp(-(s - best) / scale) for label, s in scores.items()}
    total = math.fsum(weights.values())
    return {label: w / total for label, w in weights.items()}


@dataclass(frozen=True)
class CrossEntropy:
    bits: float
    zero_cases: tuple = ()


def cross_entropy_from_probs(true_probs: Mapping[str, Sequence[float]]) -> CrossEntropy:
    """-sum over categories of the mean log2 probability given to the truth."""
    terms, zeros = [], []
    for label, probs in true_probs.items():
        if not probs:
            continue
        for i, q in enumerate(probs):
            if q <= 0.0:
                zeros.append((label, i))
        if not zeros:
            terms.append(-math.fsum(math.log2(q) for q in probs) / len(probs))
    if zeros:
        return CrossEntropy(math.inf, tuple(zeros))
    return CrossEntropy(math.fsum(terms))


def cross_entropy(clf: Classifier, labeled_tests: Mapping[str, Sequence]) -> CrossEntropy:
    return cross_entropy_from_probs(
        {label: [soft_classify(clf, t)[label] for t in tests] for label, tests in labeled_tests.items()}
    )


@dataclass(frozen=True)
class Sample:
    size: int
    offset: int
    text: bytes


@dataclass
class EvalSuite:
    seed: int
    train: dict[str, list[Sample]] = field(default_factory=dict)
    test: dict[str, list[Sample]] = field(default_factory=dict)

    @property
    def labels(self) -> list[str]:
        return sorted(self.train)

    def training_texts(self, label: str, size: int) -> list[bytes]:
        return [s.text for s in self.train[label] if s.size == size]

    def test_texts(self, label: str, size: int) -> list[bytes]:
        return [s.text for s in self.test[label] if s.size == size]

    def to_dict(self) -> dict:
        def enc(samples):
            return [{"size": s.size, "offset": s.offset, "text": s.text.decode("latin-1")} for s in samples]

        return {"format_version": SUITE_VERSION, "seed": self.seed,
                "train": {k: enc(v) for k, v in self.train.items()},
                "test": {k: enc(v) for k, v in self.test.items()}}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: Mapping) -> "EvalSuite":
        if d.get("format_version") != SUITE_VERSION:
            raise ValueError("unsupported suite version")

        def dec(samples):
            return [Sample(s["size"], s["offset"], s["text"].encode("latin-1")) for s in samples]

        return cls(d["seed"], {k: dec(v) for k, v in d["train"].items()}, {k: dec(v) for k, v in d["test"].items()})

    @classmethod
    def from_json(cls, text: str) -> "EvalSuite":
        return cls.from_dict(json.loads(text))


def make_eval_suite(corpora: Mapping[str, bytes], train_sizes: Sequence[int] = TRAIN_SIZES,
                    test_sizes: Sequence[int] = TEST_SIZES, seed: int = 0, n_train: int = 10,
                    n_test: int = 100, collapse_whitespace: bool = True) -> EvalSuite:
    """Sample training and test regions at uniform random offsets.

    Training and test regions are drawn independently, so they may overlap;
    offsets are recorded in the suite.
    """
    suite = EvalSuite(seed)
    need = max(train_sizes) + max(test_sizes)
    for label in sorted(corpora):
        text = corpora[label]
        if isinstance(text, str):
            text = text.encode("utf-8")
        text = normalize(text, collapse_whitespace)
        if len(text) < need:
            raise ValueError(f"corpus {label!r} has {len(text)} bytes after normalization; need {need}")
        rng = random.Random(f"{seed}:{label}")

        def draw(size):
            off = rng.randrange(len(text) - size + 1)
            return Sample(size, off, text[off:off + size])

        suite.train[label] = [draw(size) for size in train_sizes for _ in range(n_train)]
        suite.test[label] = [draw(size) for size in test_sizes for _ in range(n_test)]
    return suite


def bootstrap(values: Sequence[float], replicates: int = 1000, seed: int = 0,
              statistic: Callable = np.mean, level: float = 0.95) -> tuple[float, float]:
    """Percentile bootstrap band for ``statistic`` of ``values``."""
    data = np.asarray(values, dtype=float)
    if data.size == 0:
        raise ValueError("bootstrap needs at least one observation")
    if replicates < 1:
        raise ValueError("replicates must be positive")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, data.size, size=(replicates, data.size))
    stats = np.array([statistic(row) for row in data[idx]])
    tail = 100.0 * (1.0 - level) / 2.0
    lo, hi = np.percentile(stats, [tail, 100.0 - tail])
    return float(lo), float(hi)


@dataclass(frozen=True)
class EvalRow:
    train_size: int
    test_size: int
    k: int
    err_median: float
    err_best: float
    err_worst: float
    cross_entropy: float
    band_low: float
    band_high: float

    COLUMNS = ("train_size", "test_size", "k", "err_median", "err_best", "err_worst",
               "cross_entropy", "band_low", "band_high")

    def to_tsv(self) -> str:
        return "%d\t%d\t%d\t%.4f\t%.4f\t%.4f\t%.4f\t%.4f\t%.4f" % (
            self.train_size, self.test_size, self.k, self.err_median, self.err_best,
            self.err_worst, self.cross_entropy, self.band_low, self.band_high)


@dataclass
class EvalReport:
    rows: list[EvalRow]

    def row(self, train_size: int, test_size: int, k: int) -> EvalRow:
        for r in self.rows:
            if (r.train_size, r.test_size, r.k) == (train_size, test_size, k):
                return r
        raise KeyError((train_size, test_size, k))

    def to_tsv(self) -> str:
        return "\n".join(["\t".join(EvalRow.COLUMNS)] + [r.to_tsv() for r in self.rows]) + "\n"


def _replicate_results(suite: EvalSuite, train_size: int, k: int, alpha: float, rep: int,
                       test_sizes: Sequence[int], default_label: str | None):
    labels = suite.labels
    texts = {label: suite.training_texts(label, train_size)[rep] for label in labels}
    clf = train(texts, k, alpha, default_label=default_label)
    out = {}
    for size in test_sizes:
        wrong = []
        probs = {}
        for label in labels:
            probs[label] = []
            for t in suite.test_texts(label, size):
                counts = count_ngrams(t, k, clf.alphabet)
                wrong.append(classify(clf, counts).label != label)
                probs[label].append(soft_classify(clf, counts)[label])
        out[size] = (wrong, cross_entropy_from_probs(probs).bits)
    return out


def evaluate(suite: EvalSuite, orders: Sequence[int] = (0, 1, 2, 3), alpha: float = 0.2,
             train_sizes: Sequence[int] | None = None, test_sizes: Sequence[int] | None = None,
             default_label: str | None = None, bootstrap_replicates: int = 200,
             seed: int = 0, workers: int | None = None) -> EvalReport:
    """Error rates over the (k, train size, test size) grid.

    Each training replicate gets its own classifier; the report gives the
    median, best and worst error over replicates, the median cross entropy,
    and a bootstrap band for the pooled error rate.
    """
    first = suite.labels[0]
    train_sizes = sorted(train_sizes or {s.size for s in suite.train[first]})
    test_sizes = sorted(test_sizes or {s.size for s in suite.test[first]})
    n_rep = min(len(suite.training_texts(label, train_sizes[0])) for label in suite.labels)
    jobs = [(k, size, rep) for k in orders for size in train_sizes for rep in range(n_rep)]

    def run(job):
        k, size, rep = job
        return _replicate_results(suite, size, k, alpha, rep, test_sizes, default_label)

    with ThreadPoolExecutor(max_workers=workers or _thread_count()) as pool:
        results = dict(zip(jobs, pool.map(run, jobs)))
    rows = []
    for k in orders:
        for size in train_sizes:
            for tsize in test_sizes:
                per_rep = [results[(k, size, rep)][tsize] for rep in range(n_rep)]
                errs = [sum(w) / len(w) for w, _ in per_rep]
                pooled = [float(x) for w, _ in per_rep for x in w]
                low, high = bootstrap(pooled, bootstrap_replicates, seed)
                rows.append(EvalRow(size, tsize, k, statistics.median(errs), min(errs), max(errs),
                                    statistics.median(ce for _, ce in per_rep), low, high))
    return EvalReport(rows)
