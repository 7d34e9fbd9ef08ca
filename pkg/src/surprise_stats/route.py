"""Routing-query construction from judged documents.

Terms are selected by a 2x2 G2 test of occurrence in relevant versus
non-relevant documents, keeping only terms over-represented on the relevant
side.  A plain lnc.ltc cosine ranker scores documents against the result.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

from .colloc import tokenize
from .special import chi2_sf
from .tables import g2_statistic

DEFAULT_THRESHOLD = 20.0


def _tokens(doc, stem: Callable[[str], str] | None) -> list[str]:
    toks = tokenize(doc).tokens if isinstance(doc, (str, bytes)) else list(doc)
    return [stem(t) for t in toks] if stem else toks


@dataclass(frozen=True)
class LabeledCorpus:
    """Term counts of judged relevant (R) and non-relevant (N) documents."""

    relevant: tuple[Counter, ...]
    nonrelevant: tuple[Counter, ...]

    @classmethod
    def from_documents(cls, relevant: Iterable, nonrelevant: Iterable,
                       stem: Callable[[str], str] | None = None) -> "LabeledCorpus":
        """Documents are texts (tokenized here) or token sequences."""
        return cls(tuple(Counter(_tokens(d, stem)) for d in relevant),
                   tuple(Counter(_tokens(d, stem)) for d in nonrelevant))

    def side_counts(self, binarize: bool = False) -> tuple[Counter, Counter, int, int]:
        """T(t,R), T(t,N), T(*,R), T(*,N); document counts when ``binarize``."""
        out = []
        for docs in (self.relevant, self.nonrelevant):
            total = Counter()
            for d in docs:
                total.update({t: 1 for t in d} if binarize else d)
            size = len(docs) if binarize else sum(total.values())
            out.append((total, size))
        (tr, nr), (tn, nn) = out
        return tr, tn, nr, nn


@dataclass(frozen=True)
class QueryTerm:
    term: str
    g2: float
    t_r: int
    t_n: int

    def to_tsv(self) -> str:
        return "%.2f\t%d\t%d\t%s" % (self.g2, self.t_r, self.t_n, self.term)


@dataclass(frozen=True)
class RoutingQuery:
    terms: tuple[QueryTerm, ...]
    threshold: float

    @property
    def words(self) -> list[str]:
        return [t.term for t in self.terms]

    def to_tsv(self) -> str:
        return "".join(t.to_tsv() + "\n" for t in self.terms)

    @classmethod
    def from_tsv(cls, text: str, threshold: float = DEFAULT_THRESHOLD) -> "RoutingQuery":
        terms = []
        for line in text.splitlines():
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) == 1:
                terms.append(QueryTerm(parts[0], math.inf, 0, 0))
            else:
                terms.append(QueryTerm(parts[3], float(parts[0]), int(parts[1]), int(parts[2])))
        return cls(tuple(terms), threshold)


def select_terms(corpus: LabeledCorpus, threshold: float = DEFAULT_THRESHOLD,
                 binarize: bool = False) -> RoutingQuery:
    """Terms of the relevant documents with G2 >= threshold and higher
    relative frequency in R than in N, by decreasing G2."""
    if not corpus.relevant or not corpus.nonrelevant:
        raise ValueError("term selection needs both relevant and non-relevant documents")
    tr, tn, nr, nn = corpus.side_counts(binarize)
    if nr == 0 or nn == 0:
        raise ValueError("one side of the corpus has no tokens")
    picked = []
    for term, a in tr.items():
        b = tn.get(term, 0)
        if a * nn <= b * nr:
            continue
        g2 = g2_statistic(((a, nr - a), (b, nn - b)))
        if g2 >= threshold:
            picked.append(QueryTerm(term, g2, a, b))
    picked.sort(key=lambda q: (-q.g2, q.term))
    return RoutingQuery(tuple(picked), threshold)


def key_terms(target, reference, threshold: float = DEFAULT_THRESHOLD,
              binarize: bool = False) -> RoutingQuery:
    """Terms characteristic of ``target`` relative to ``reference``.

    Each argument is one text or a list of documents (texts or token lists).
    """
    def docs(x):
        return [x] if isinstance(x, (str, bytes)) else list(x)

    return select_terms(LabeledCorpus.from_documents(docs(target), docs(reference)), threshold, binarize)


@dataclass
class CorpusStats:
    n_docs: int
    df: Counter = field(default_factory=Counter)

    @classmethod
    def from_documents(cls, documents: Iterable[Counter]) -> "CorpusStats":
        stats = cls(0)
        for d in documents:
            stats.n_docs += 1
            stats.df.update(d.keys())
        return stats

    def idf(self, term: str) -> float:
        df = self.df.get(term, 0)
        return math.log(self.n_docs / df) if df else 0.0


def _log_tf(tf: int) -> float:
    return 1.0 + math.log(tf) if tf > 0 else 0.0


def rank_documents(query: RoutingQuery, documents: Mapping[str, object],
                   corpus_stats: CorpusStats | None = None,
                   stem: Callable[[str], str] | None = None) -> list[tuple[float, str]]:
    """(score, doc_id) by decreasing cosine score, ties by doc_id."""
    if not query.terms:
        raise ValueError("empty query")
    docs = {doc_id: Counter(_tokens(d, stem)) if not isinstance(d, Counter) else d
            for doc_id, d in documents.items()}
    stats = corpus_stats or CorpusStats.from_documents(docs.values())
    q = {t: _log_tf(1) * stats.idf(t) for t in dict.fromkeys(query.words)}
    q_norm = math.sqrt(math.fsum(w * w for w in q.values()))
    ranked = []
    for doc_id, d in docs.items():
        weights = {t: _log_tf(c) for t, c in d.items()}
        d_norm = math.sqrt(math.fsum(w * w for w in weights.values()))
        if q_norm == 0 or d_norm == 0:
            score = 0.0
        else:
            score = math.fsum(qw * weights.get(t, 0.0) for t, qw in q.items()) / (q_norm * d_norm)
        ranked.append((score, doc_id))
    ranked.sort(key=lambda x: (-x[0], x[1]))
    return ranked


def threshold_significance(threshold: float = DEFAULT_THRESHOLD) -> float:
    """Nominal p-value of a G2 threshold with one degree of freedom."""
    return chi2_sf(threshold, 1)
