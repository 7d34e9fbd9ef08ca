"""Alphabets, padded n-gram counting, estimators and Markov-model LLR scores.

Sequences are encoded to integer ids before counting.  Every sequence is
left-padded with ``k`` copies of the pad id so that each real position has a
full order-``k`` history; the pad id (-1) never appears in user data.

Counts are kept per tuple length m = 1..k+1, each m-gram ending at a real
position, so T(*^m) equals the sequence length for every m.  Context totals
T(c) = sum_s T(c s) are stored separately; these are the denominators of all
conditional estimates.
"""

from __future__ import annotations

import json
import math
import os
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .special import chi2_sf, digamma
from .tables import g2_statistic

PAD = -1
FORMAT_VERSION = 1
UNKNOWN_TOKEN = "<unk>"


class AlphabetError(ValueError):
    pass


class UnseenContextError(KeyError):
    """Maximum-likelihood estimate requested for a context never observed."""


class Alphabet:
    """Symbol <-> id mapping.

    ``bytes`` mode covers all 256 octets; ``tokens`` mode uses a closed
    vocabulary plus an unknown-word sentinel; ``symbols`` mode is a small
    explicit set (DNA, toy alphabets) where unknown symbols are an error.
    """

    def __init__(self, mode: str, symbols: Sequence = ()):
        if mode not in ("bytes", "tokens", "symbols"):
            raise AlphabetError(f"unknown alphabet mode {mode!r}")
        self.mode = mode
        if mode == "bytes":
            symbols = tuple(range(256))
        else:
            symbols = tuple(symbols)
            if mode == "tokens" and UNKNOWN_TOKEN not in symbols:
                symbols = symbols + (UNKNOWN_TOKEN,)
        if len(set(symbols)) != len(symbols):
            raise AlphabetError("duplicate symbols in alphabet")
        if len(symbols) < 2:
            raise AlphabetError("alphabet needs at least 2 symbols")
        self.symbols = symbols
        self._index = {s: i for i, s in enumerate(symbols)}

    @classmethod
    def bytes(cls) -> "Alphabet":
        return cls("bytes")

    @classmethod
    def tokens(cls, vocabulary: Iterable[str]) -> "Alphabet":
        vocab = list(dict.fromkeys(vocabulary))
        return cls("tokens", vocab)

    @classmethod
    def from_symbols(cls, symbols: Iterable) -> "Alphabet":
        return cls("symbols", list(dict.fromkeys(symbols)))

    @classmethod
    def from_vocab_file(cls, path: str) -> "Alphabet":
        with open(path, encoding="utf-8") as fh:
            return cls.tokens(line.strip() for line in fh if line.strip())

    @property
    def size(self) -> int:
        return len(self.symbols)

    def __len__(self) -> int:
        return len(self.symbols)

    def __eq__(self, other) -> bool:
        return isinstance(other, Alphabet) and self.mode == other.mode and self.symbols == other.symbols

    def __hash__(self) -> int:
        return hash((self.mode, self.symbols))

    def __repr__(self) -> str:
        return f"Alphabet({self.mode!r}, size={self.size})"

    def encode(self, sequence) -> list[int]:
        if self.mode == "bytes":
            if isinstance(sequence, str):
                sequence = sequence.encode("utf-8")
            return list(bytes(sequence))
        if self.mode == "tokens":
            unk = self._index[UNKNOWN_TOKEN]
            if isinstance(sequence, str):
                sequence = sequence.split()
            return [self._index.get(tok, unk) for tok in sequence]
        try:
            return [self._index[s] for s in sequence]
        except KeyError as exc:
            raise AlphabetError(f"symbol {exc.args[0]!r} is not in the alphabet") from None

    def encode_symbol(self, symbol) -> int:
        if isinstance(symbol, int) and not isinstance(symbol, bool):
            if symbol == PAD or 0 <= symbol < self.size:
                return symbol
            raise AlphabetError(f"id {symbol} out of range")
        ids = self.encode(symbol if isinstance(symbol, (bytes, str)) and self.mode != "tokens" else [symbol])
        if len(ids) != 1:
            raise AlphabetError(f"{symbol!r} is not a single symbol")
        return ids[0]

    def encode_tuple(self, symbols) -> tuple[int, ...]:
        """Encode a context or gram.  Integers are taken as ids, so PAD passes through."""
        if isinstance(symbols, (str, bytes)):
            return tuple(self.encode(symbols))
        return tuple(self.encode_symbol(s) for s in symbols)

    def decode(self, ids: Iterable[int]) -> list:
        return ["<pad>" if i == PAD else self.symbols[i] for i in ids]

    def to_dict(self) -> dict:
        d = {"mode": self.mode}
        if self.mode != "bytes":
            d["symbols"] = list(self.symbols)
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "Alphabet":
        return cls(d["mode"], d.get("symbols", ()))


def _thread_count() -> int:
    try:
        return max(1, int(os.environ.get("SURPRISE_THREADS", "1")))
    except ValueError:
        return 1


@dataclass
class NgramCounts:
    """Per-order gram counts T(tuple, S) of one padded sequence."""

    order: int
    alphabet: Alphabet
    grams: dict[int, Counter] = field(default_factory=dict)
    contexts: dict[int, Counter] = field(default_factory=dict)
    length: int = 0

    def __post_init__(self):
        if self.order < 0:
            raise ValueError("order must be non-negative")
        for m in range(1, self.order + 2):
            self.grams.setdefault(m, Counter())
        if not self.contexts:
            self._rebuild_contexts()

    def _rebuild_contexts(self) -> None:
        self.contexts = {m: Counter() for m in range(0, self.order + 1)}
        for m in range(1, self.order + 2):
            ctx = self.contexts[m - 1]
            for gram, c in self.grams[m].items():
                ctx[gram[:-1]] += c

    def gram_count(self, gram: tuple) -> int:
        return self.grams.get(len(gram), Counter()).get(gram, 0)

    def context_count(self, context: tuple) -> int:
        return self.contexts.get(len(context), Counter()).get(context, 0)

    def total(self, m: int | None = None) -> int:
        """T(*^m): number of m-grams, equal to the sequence length."""
        return self.length

    def merge(self, other: "NgramCounts") -> "NgramCounts":
        if self.order != other.order or self.alphabet != other.alphabet:
            raise ValueError("cannot merge counts of different order or alphabet")
        merged = NgramCounts(self.order, self.alphabet, length=self.length + other.length,
                             grams={m: self.grams[m] + other.grams[m] for m in self.grams})
        return merged

    def __add__(self, other: "NgramCounts") -> "NgramCounts":
        return self.merge(other)

    def __eq__(self, other) -> bool:
        if not isinstance(other, NgramCounts):
            return NotImplemented
        return (self.order == other.order and self.alphabet == other.alphabet
                and self.length == other.length
                and all(+self.grams[m] == +other.grams[m] for m in self.grams))

    def restricted(self, order: int) -> "NgramCounts":
        """Counts truncated to a lower order."""
        if order > self.order:
            raise ValueError("cannot raise the order of existing counts")
        return NgramCounts(order, self.alphabet, length=self.length,
                           grams={m: Counter(self.grams[m]) for m in range(1, order + 2)})

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "mode": self.alphabet.mode,
            "k": self.order,
            "alphabet": self.alphabet.to_dict(),
            "length": self.length,
            "counts": {
                str(m): {" ".join(map(str, g)): c for g, c in sorted(self.grams[m].items()) if c}
                for m in sorted(self.grams)
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    @classmethod
    def from_dict(cls, d: Mapping) -> "NgramCounts":
        if d.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported model format version {d.get('format_version')!r}")
        grams = {
            int(m): Counter({tuple(int(x) for x in key.split(" ")): int(c) for key, c in table.items()})
            for m, table in d["counts"].items()
        }
        return cls(int(d["k"]), Alphabet.from_dict(d["alphabet"]), grams=grams, length=int(d["length"]))

    @classmethod
    def from_json(cls, text: str) -> "NgramCounts":
        return cls.from_dict(json.loads(text))


def _count_range(ids: Sequence[int], k: int, start: int, stop: int) -> dict[int, Counter]:
    padded = [PAD] * k + list(ids)
    grams = {m: Counter() for m in range(1, k + 2)}
    for i in range(start, stop):
        end = i + k + 1  # position i sits at padded[i + k]
        for m in range(1, k + 2):
            grams[m][tuple(padded[end - m:end])] += 1
    return grams


def count_ngrams(sequence, k: int, alphabet: Alphabet, *, encoded: bool = False) -> NgramCounts:
    """Count all 1..k+1 grams of the pad-prefixed sequence."""
    if k < 0:
        raise ValueError("order must be non-negative")
    ids = list(sequence) if encoded else alphabet.encode(sequence)
    grams = _count_range(ids, k, 0, len(ids))
    return NgramCounts(k, alphabet, grams=grams, length=len(ids))


def count_ngrams_sharded(sequence, k: int, alphabet: Alphabet, shards: int = 4,
                         workers: int | None = None, *, encoded: bool = False) -> NgramCounts:
    """Count disjoint slices independently and merge.

    Each slice sees the k symbols before it as history, so the merged counts
    are identical to :func:`count_ngrams` on the whole sequence.
    """
    ids = list(sequence) if encoded else alphabet.encode(sequence)
    n = len(ids)
    shards = max(1, min(shards, n or 1))
    bounds = [(n * s // shards, n * (s + 1) // shards) for s in range(shards)]

    def work(bound):
        start, stop = bound
        grams = _count_range(ids, k, start, stop)
        return NgramCounts(k, alphabet, grams=grams, length=stop - start)

    with ThreadPoolExecutor(max_workers=workers or _thread_count()) as pool:
        parts = list(pool.map(work, bounds))
    total = parts[0]
    for part in parts[1:]:
        total = total + part
    return total


def _ctx(counts: NgramCounts, context) -> tuple[int, ...]:
    return counts.alphabet.encode_tuple(context)


def _sym(counts: NgramCounts, symbol) -> int:
    return counts.alphabet.encode_symbol(symbol)


def mle_conditional(counts: NgramCounts, context, symbol) -> float:
    """T(context symbol) / T(context); raises for an unseen context."""
    c = _ctx(counts, context)
    if len(c) > counts.order:
        raise ValueError(f"context of length {len(c)} exceeds model order {counts.order}")
    denom = counts.context_count(c)
    if denom == 0:
        raise UnseenContextError(f"context {c!r} was never observed")
    return counts.gram_count(c + (_sym(counts, symbol),)) / denom


@dataclass(frozen=True)
class Dirichlet:
    """Dirichlet prior with concentration ``alpha`` and mean vector ``m``.

    ``m`` maps symbol ids to prior means; ``None`` means uniform.  The
    estimate is (T + alpha |S| m_s) / (T(ctx) + alpha |S|), so alpha = 1 with
    uniform m is Laplace's add-one rule and every row sums to 1.

    ``unnormalized=True`` gives (T + alpha m_s) / (T(ctx) + alpha |S|) instead,
    which is not normalized for |S| > 1 and exists only for comparison.
    """

    alpha: float = 1.0
    m: Mapping[int, float] | None = None
    unnormalized: bool = False

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        if self.m is not None and abs(math.fsum(self.m.values()) - 1.0) > 1e-9:
            raise ValueError("prior means must sum to 1")


UNIFORM = Dirichlet(1.0)


def bayes_conditional(counts: NgramCounts, context, symbol, prior: Dirichlet | str = "uniform") -> float:
    if isinstance(prior, str):
        if prior != "uniform":
            raise ValueError(f"unknown prior {prior!r}")
        prior = UNIFORM
    c = _ctx(counts, context)
    s = _sym(counts, symbol)
    size = counts.alphabet.size
    mean = (1.0 / size) if prior.m is None else prior.m.get(s, 0.0)
    pseudo = prior.alpha * size
    denom = counts.context_count(c) + pseudo
    if denom == 0:
        raise ValueError("alpha = 0 with an unseen context leaves the estimate undefined")
    weight = prior.alpha if prior.unnormalized else pseudo
    return (counts.gram_count(c + (s,)) + weight * mean) / denom


@dataclass(frozen=True)
class LogEstimate:
    exact: float
    approx: float

    @property
    def discrepancy(self) -> float:
        return self.exact - self.approx


def bayes_log_conditional(counts: NgramCounts, context, symbol) -> LogEstimate:
    """Uniform-prior estimate of log p(symbol | context).

    ``exact`` is psi(T(c s) + 2) - psi(T(c) + |S| + 1); ``approx`` is the log
    of the add-one estimate, which it approaches as counts grow.
    """
    c = _ctx(counts, context)
    t = counts.gram_count(c + (_sym(counts, symbol),))
    tc = counts.context_count(c)
    size = counts.alphabet.size
    return log_estimate_from_counts(t, tc, size)


def log_estimate_from_counts(t: int, tc: int, size: int) -> LogEstimate:
    exact = digamma(t + 2) - digamma(tc + size + 1)
    approx = math.log((t + 1) / (tc + size))
    return LogEstimate(exact, approx)


@dataclass(frozen=True)
class MarkovTestResult:
    statistic: float
    df: int
    p_value: float
    effective_df: int
    contributions: dict

    def to_dict(self) -> dict:
        return {"statistic": self.statistic, "df": self.df, "p_value": self.p_value,
                "effective_df": self.effective_df}


def markov_g2(counts1: NgramCounts, counts2: NgramCounts, k: int) -> MarkovTestResult:
    """Test whether two strings share one order-k Markov source.

    The statistic is the sum over length-k contexts of the 2-row G2 comparing
    the symbols that follow the context in each string.
    """
    if counts1.alphabet != counts2.alphabet:
        raise ValueError("alphabets differ")
    if counts1.order < k or counts2.order < k:
        raise ValueError(f"both counts need order >= {k}")
    by_context: dict[tuple, dict[int, list[int]]] = {}
    for row, counts in enumerate((counts1, counts2)):
        for gram, c in counts.grams[k + 1].items():
            if c:
                cell = by_context.setdefault(gram[:-1], {}).setdefault(gram[-1], [0, 0])
                cell[row] += c
    contributions = {}
    effective_df = 0
    for ctx in sorted(by_context):
        cols = [by_context[ctx][s] for s in sorted(by_context[ctx])]
        table = [[c[0] for c in cols], [c[1] for c in cols]]
        contributions[ctx] = g2_statistic(table)
        if sum(table[0]) and sum(table[1]):
            effective_df += len(cols) - 1
    stat = math.fsum(contributions.values())
    size = counts1.alphabet.size
    df = (size - 1) * (size**k - 1) if k > 0 else size - 1
    return MarkovTestResult(stat, df, chi2_sf(stat, df), effective_df, contributions)


def _check_score_args(test: NgramCounts, train: NgramCounts, k: int, alpha: float) -> None:
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if test.length == 0:
        raise ValueError("empty test counts")
    if test.order < k or train.order < k:
        raise ValueError(f"counts need order >= {k}")
    if test.alphabet != train.alphabet:
        raise ValueError("alphabets differ")


def compat_score(test: NgramCounts, train: NgramCounts, k: int, alpha: float = 0.2,
                 collapsed: bool = True) -> float:
    """Compatibility of a short test string with a long training string.

    Lower is more compatible.  The test counts are blended into the training
    model with weight ``alpha``.  ``collapsed`` uses the order-(k+1) gram
    totals as denominators (combining orders 1..k); otherwise each gram is
    scored against its own context total.
    """
    _check_score_args(test, train, k, alpha)
    terms = []
    n_test, n_train = test.length, train.length
    train_grams = train.grams[k + 1]
    for gram, t in test.grams[k + 1].items():
        if not t:
            continue
        if collapsed:
            tot_test, tot_train = n_test, n_train
        else:
            ctx = gram[:-1]
            tot_test, tot_train = test.context_count(ctx), train.context_count(ctx)
        ratio = (t * (alpha * tot_test + tot_train)) / (tot_test * (alpha * t + train_grams.get(gram, 0)))
        terms.append(t * math.log(ratio))
    return 2.0 * math.fsum(terms)


def bayes_score(test: NgramCounts, train: NgramCounts, k: int, alpha: float = 1.0) -> float:
    """log p(test) under add-alpha estimates from the training counts (higher = more likely)."""
    _check_score_args(test, train, k, alpha)
    size = train.alphabet.size
    train_grams = train.grams[k + 1]
    terms = []
    for gram, t in test.grams[k + 1].items():
        if t:
            p = (alpha + train_grams.get(gram, 0)) / (alpha * size + train.context_count(gram[:-1]))
            terms.append(t * math.log(p))
    return math.fsum(terms)
