"""Collocation discovery: adjacent-pair 2x2 tables ranked by G2 or Pearson."""

from __future__ import annotations

import re
import warnings
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .tables import DegenerateMarginError, applicability, g2_statistic, pearson_test

_WORD = r"[^\W_]"
_JOIN = r"['’.\-]+"
TOKEN_RULES = {
    # abbreviations like "u.s." keep their dots; internal apostrophes,
    # hyphens and periods join alphanumeric runs ("israel's", "u.s.-made")
    "default": re.compile(
        rf"(?:{_WORD}\.){{2,}}(?:-{_WORD}+(?:{_JOIN}{_WORD}+)*)?|{_WORD}+(?:{_JOIN}{_WORD}+)*"
    ),
    "alnum": re.compile(rf"{_WORD}+"),
    "whitespace": re.compile(r"\S+"),
}


@dataclass(frozen=True)
class TokenStream:
    """Tokens split into segments; adjacent pairs never cross a segment edge."""

    segments: tuple[tuple[str, ...], ...]

    @property
    def tokens(self) -> list[str]:
        return [t for seg in self.segments for t in seg]

    @property
    def n(self) -> int:
        return sum(len(s) for s in self.segments)

    @property
    def n_pairs(self) -> int:
        return sum(max(0, len(s) - 1) for s in self.segments)

    @property
    def vocabulary(self) -> Counter:
        return Counter(self.tokens)

    def pairs(self) -> Iterable[tuple[str, str]]:
        for seg in self.segments:
            yield from zip(seg, seg[1:])


def tokenize(text, rule: str = "default", lowercase: bool = True,
             line_delimited: bool = False) -> TokenStream:
    if isinstance(text, (bytes, bytearray)):
        try:
            text = bytes(text).decode("utf-8")
        except UnicodeDecodeError:
            warnings.warn("input is not valid UTF-8; undecodable bytes replaced", UnicodeWarning)
            text = bytes(text).decode("utf-8", errors="replace")
    try:
        pattern = TOKEN_RULES[rule]
    except KeyError:
        raise ValueError(f"unknown tokenizer rule {rule!r}") from None
    if lowercase:
        text = text.lower()
    chunks = text.splitlines() if line_delimited else [text]
    return TokenStream(tuple(tuple(pattern.findall(chunk)) for chunk in chunks))


@dataclass(frozen=True)
class ScoredBigram:
    a: str
    b: str
    t_ab: int
    t_a_not_b: int
    t_not_a_b: int
    t_not_a_not_b: int
    g2: float
    pearson: float
    applicable: bool

    @property
    def cells(self) -> tuple[tuple[int, int], tuple[int, int]]:
        return ((self.t_ab, self.t_a_not_b), (self.t_not_a_b, self.t_not_a_not_b))

    def score(self, method: str) -> float:
        return self.g2 if method == "g2" else self.pearson

    def to_tsv(self, method: str = "g2") -> str:
        return "%.2f\t%d\t%d\t%d\t%d\t%s\t%s" % (self.score(method), self.t_ab, self.t_a_not_b,
                                                 self.t_not_a_b, self.t_not_a_not_b, self.a, self.b)


def bigram_tables(stream: TokenStream) -> dict[tuple[str, str], tuple[int, int, int, int]]:
    """2x2 counts over the adjacent pairs for every distinct pair."""
    pair_counts = Counter(stream.pairs())
    first, second = Counter(), Counter()
    for (a, b), c in pair_counts.items():
        first[a] += c
        second[b] += c
    n = stream.n_pairs
    return {
        (a, b): (c, first[a] - c, second[b] - c, n - first[a] - second[b] + c)
        for (a, b), c in pair_counts.items()
    }


def score_bigram(a: str, b: str, counts: Sequence[int], transpose: bool = False) -> ScoredBigram:
    t_ab, t_anb, t_nab, t_nanb = counts
    cells = ((t_ab, t_nab), (t_anb, t_nanb)) if transpose else ((t_ab, t_anb), (t_nab, t_nanb))
    g2 = g2_statistic(cells)
    try:
        pearson = pearson_test(cells).statistic
    except DegenerateMarginError:
        pearson = 0.0
    return ScoredBigram(a, b, t_ab, t_anb, t_nab, t_nanb, g2, pearson, applicability(cells))


def rank_bigrams(stream: TokenStream, method: str = "g2", top: int | None = None,
                 applicable_only: bool = False, transpose: bool = False) -> list[ScoredBigram]:
    """Bigrams by decreasing statistic, ties by (T(AB) desc, A, B)."""
    if method not in ("g2", "pearson"):
        raise ValueError(f"unknown method {method!r}")
    scored = [score_bigram(a, b, counts, transpose) for (a, b), counts in bigram_tables(stream).items()]
    if applicable_only:
        scored = [s for s in scored if s.applicable]
    scored.sort(key=lambda s: (-s.score(method), -s.t_ab, s.a, s.b))
    return scored if top is None else scored[:top]


def zipf_profile(stream: TokenStream) -> list[tuple[int, int]]:
    """(f, number of distinct words occurring exactly f times), f ascending."""
    return sorted(Counter(stream.vocabulary.values()).items())


def zipf_slope(profile: Sequence[tuple[int, int]], max_frequency: int | None = None) -> float:
    """Least-squares slope of log(word count) against log(frequency).

    By default only the contiguous head f = 1, 2, ... up to the first missing
    frequency is fitted; beyond it the classes hold a word or two each and
    flatten the fit.
    """
    if max_frequency is None:
        present = {f for f, _ in profile}
        max_frequency = 1
        while max_frequency + 1 in present:
            max_frequency += 1
    pts = [(f, c) for f, c in profile if f <= max_frequency]
    if len(pts) < 2:
        raise ValueError("need at least two frequency classes")
    x = np.log([f for f, _ in pts])
    y = np.log([c for _, c in pts])
    return float(np.polyfit(x, y, 1)[0])
