"""Mixed-order Markov models grown by G2 tests, and quasi-Bayesian smoothing.

Contexts are tuples of symbol ids in reading order, oldest first.  A history
resolves to its longest suffix that is in the context set, so the empty
context catches everything.  Growth repeatedly extends some context c with
one older symbol s, giving (s,) + c, when the G2 of the split beats epsilon.

Two statistics are available.  ``disjoint`` (the default) compares the
positions that move to (s,) + c against those that stay with c, and the
model's probabilities are the MLE over the positions each context resolves.
``overlap`` compares (s,) + c against all occurrences of c and uses
T(c w) / T(c) over all occurrences as probabilities.  In both cases an
accepted split raises the training log-likelihood by exactly delta / 2.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .ngram import PAD, Alphabet, NgramCounts, count_ngrams
from .special import chi2_isf
from .tables import g2_statistic

MODES = ("disjoint", "overlap")
FORMAT_VERSION = 1


def default_epsilon(alphabet_size: int, p: float = 1e-3) -> float:
    """chi2 critical value at ``p`` with |S| - 1 degrees of freedom."""
    return chi2_isf(p, alphabet_size - 1)


def _loglik(counts: Mapping[int, int]) -> float:
    n = sum(counts.values())
    return math.fsum(c * math.log(c / n) for c in counts.values() if c)


def _split_delta(child: Mapping[int, int], parent: Mapping[int, int], disjoint: bool) -> float:
    """G2 of the child row against the parent (remainder or whole) row."""
    if disjoint:
        symbols = sorted(set(child) | set(parent))
        rest = [parent.get(w, 0) - child.get(w, 0) for w in symbols]
        return g2_statistic([[child.get(w, 0) for w in symbols], rest])
    n_child = sum(child.values())
    n_parent = sum(parent.values())
    terms = [t * math.log((t * n_parent) / (n_child * parent[w])) for w, t in child.items() if t]
    return max(0.0, 2.0 * math.fsum(terms))


class _Trainer:
    def __init__(self, seq: Sequence[int], mode: str):
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}")
        self.seq = list(seq)
        self.disjoint = mode == "disjoint"
        self.occ = {(): list(range(len(self.seq)))}
        self.res = {(): list(range(len(self.seq)))}
        self.cands: dict[tuple, dict[int, float]] = {}

    def successors(self, positions) -> Counter:
        seq = self.seq
        return Counter(seq[i] for i in positions)

    def row_positions(self, ctx):
        return self.res[ctx] if self.disjoint else self.occ[ctx]

    def candidates(self, ctx) -> dict[int, float]:
        """delta for every unseen extension (s,) + ctx with data."""
        seq, k = self.seq, len(ctx)
        groups: dict[int, list[int]] = {}
        for i in self.row_positions(ctx):
            if i > k:
                groups.setdefault(seq[i - k - 1], []).append(i)
        parent = self.successors(self.row_positions(ctx))
        out = {}
        for s, positions in groups.items():
            if (s,) + ctx in self.occ:
                continue
            out[s] = _split_delta(self.successors(positions), parent, self.disjoint)
        return out

    def add(self, s: int, ctx: tuple) -> None:
        seq, k = self.seq, len(ctx)
        child = (s,) + ctx
        self.occ[child] = [i for i in self.occ[ctx] if i > k and seq[i - k - 1] == s]
        moved = set(self.occ[child])
        self.res[ctx] = [i for i in self.res[ctx] if i not in moved]
        self.res[child] = list(self.occ[child])

    def counts(self) -> dict[tuple, Counter]:
        return {c: self.successors(self.row_positions(c)) for c in self.occ}


def extension_delta(sequence, context, symbol, alphabet: Alphabet | None = None,
                    contexts: Iterable[tuple] = ((),), mode: str = "disjoint") -> float:
    """delta for extending ``context`` by the older ``symbol`` given a context set.

    ``sequence``, ``context`` and ``symbol`` are raw symbols when
    ``alphabet`` is given, ids otherwise.
    """
    if alphabet is not None:
        seq = alphabet.encode(sequence)
        ctx = alphabet.encode_tuple(context)
        s = alphabet.encode_symbol(symbol)
    else:
        seq, ctx, s = list(sequence), tuple(context), symbol
    trainer = _Trainer(seq, mode)
    for c in sorted(set(contexts) - {()}, key=len):
        if c[1:] not in trainer.occ:
            raise ValueError(f"context set is not suffix-closed at {c!r}")
        trainer.add(c[0], c[1:])
    if ctx not in trainer.occ:
        raise ValueError(f"context {ctx!r} is not in the context set")
    if (s,) + ctx in trainer.occ:
        raise ValueError("extension is already in the context set")
    cands = trainer.candidates(ctx)
    if s not in cands:
        raise ValueError("the extended context never occurs")
    return cands[s]


@dataclass(frozen=True)
class GrowthStep:
    context: tuple
    delta: float
    loglik: float


@dataclass
class MixedModel:
    alphabet: Alphabet
    counts: dict[tuple, Counter]
    mode: str = "disjoint"
    epsilon: float = math.inf
    alpha: float | None = None
    trace: list[GrowthStep] = field(default_factory=list)

    @property
    def contexts(self) -> list[tuple]:
        return sorted(self.counts, key=lambda c: (len(c), c))

    @property
    def max_order(self) -> int:
        return max(len(c) for c in self.counts)

    def is_suffix_closed(self) -> bool:
        return all(c[1:] in self.counts for c in self.counts if c)

    def resolve(self, history: Sequence[int]) -> tuple:
        best = ()
        for k in range(1, min(len(history), self.max_order) + 1):
            c = tuple(history[len(history) - k:])
            if c in self.counts:
                best = c
            elif c[1:] not in self.counts:
                break
        return best

    def distribution(self, context: tuple) -> np.ndarray:
        """p(. | context).  Unsmoothed contexts without data use their
        nearest suffix that has data."""
        size = self.alphabet.size
        if self.alpha is not None:
            dist = np.full(size, 1.0 / size)
            chain = [context[len(context) - k:] if k else () for k in range(len(context) + 1)]
            weight = self.alpha * size
            for c in chain:
                vec = np.zeros(size)
                for w, t in self.counts.get(c, {}).items():
                    vec[w] = t
                dist = (vec + weight * dist) / (vec.sum() + weight)
            return dist
        c = context
        while True:
            total = sum(self.counts.get(c, {}).values())
            if total or not c:
                break
            c = c[1:]
        vec = np.zeros(size)
        for w, t in self.counts.get(c, {}).items():
            vec[w] = t
        return vec / total if total else np.full(size, 1.0 / size)

    def prob(self, history: Sequence[int], symbol: int) -> float:
        return float(self.distribution(self.resolve(history))[symbol])

    def smoothed(self, alpha: float) -> "MixedModel":
        return MixedModel(self.alphabet, self.counts, self.mode, self.epsilon, alpha, list(self.trace))

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "alphabet": self.alphabet.to_dict(),
            "mode": self.mode,
            "epsilon": float(self.epsilon) if math.isfinite(self.epsilon) else "inf",
            "alpha": self.alpha,
            "contexts": [
                {"context": list(c),
                 "counts": {str(w): n for w, n in sorted(self.counts[c].items())},
                 "probs": {str(w): p for w, p in enumerate(self.distribution(c).tolist()) if p > 0}}
                for c in self.contexts
            ],
            "trace": [{"context": list(s.context), "delta": s.delta, "loglik": s.loglik} for s in self.trace],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    @classmethod
    def from_dict(cls, d: Mapping) -> "MixedModel":
        if d.get("format_version") != FORMAT_VERSION:
            raise ValueError("unsupported model format version")
        eps = d["epsilon"]
        counts = {tuple(c["context"]): Counter({int(w): n for w, n in c["counts"].items()}) for c in d["contexts"]}
        trace = [GrowthStep(tuple(s["context"]), s["delta"], s["loglik"]) for s in d.get("trace", [])]
        return cls(Alphabet.from_dict(d["alphabet"]), counts, d["mode"],
                   math.inf if eps == "inf" else float(eps), d.get("alpha"), trace)

    @classmethod
    def from_json(cls, text: str) -> "MixedModel":
        return cls.from_dict(json.loads(text))


def grow_model(sequence, alphabet: Alphabet, epsilon: float | None = None, mode: str = "disjoint",
               max_order: int | None = None, max_steps: int | None = None) -> MixedModel:
    """Greedy growth: add the best extension while its delta exceeds epsilon.

    Every round considers all one-symbol extensions of every context in the
    set; ties go to the lexicographically smallest new context.
    """
    if epsilon is None:
        epsilon = default_epsilon(alphabet.size)
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    seq = alphabet.encode(sequence)
    trainer = _Trainer(seq, mode)
    loglik = _loglik(trainer.successors(trainer.res[()]))
    trace = []
    pending = {()}
    while max_steps is None or len(trace) < max_steps:
        for ctx in pending:
            if max_order is None or len(ctx) < max_order:
                trainer.cands[ctx] = trainer.candidates(ctx)
            else:
                trainer.cands[ctx] = {}
        best = None
        for ctx, cands in trainer.cands.items():
            for s, delta in cands.items():
                key = (-delta, (s,) + ctx)
                if best is None or key < best[0]:
                    best = (key, s, ctx, delta)
        if best is None or not best[3] > epsilon:
            break
        _, s, ctx, delta = best
        trainer.add(s, ctx)
        del trainer.cands[ctx][s]
        loglik += delta / 2.0
        trace.append(GrowthStep((s,) + ctx, delta, loglik))
        pending = {(s,) + ctx}
        if trainer.disjoint:
            pending.add(ctx)
    return MixedModel(alphabet, trainer.counts(), mode, epsilon, None, trace)


def training_loglik(model: MixedModel, sequence) -> float:
    """Natural-log likelihood of ``sequence`` under ``model``."""
    seq = model.alphabet.encode(sequence)
    terms = []
    for i, w in enumerate(seq):
        p = model.prob(seq[:i], w)
        if p <= 0:
            return -math.inf
        terms.append(math.log(p))
    return math.fsum(terms)


@dataclass
class QuasiBayesModel:
    """Recursive smoothing of order-k counts toward the order-(k-1) estimate.

    p_j(s | c_j) = (T(c_j s) + w p_{j-1}(s | c_{j-1})) / (T(c_j) + w), where
    c_j is the last j symbols of the (padded) history, grounded at order-0
    Laplace.  w = alpha |S| when fixed; adaptively w = exp(H) of the
    smoothed lower-order distribution, which lies in [1, |S|].
    """

    counts: NgramCounts
    alpha: float = 1.0
    adaptive: bool = False

    def __post_init__(self):
        if self.alpha <= 0 and not self.adaptive:
            raise ValueError("alpha must be positive")

    @classmethod
    def train(cls, sequence, k: int, alphabet: Alphabet, alpha: float = 1.0,
              adaptive: bool = False) -> "QuasiBayesModel":
        return cls(count_ngrams(sequence, k, alphabet), alpha, adaptive)

    @property
    def order(self) -> int:
        return self.counts.order

    @property
    def alphabet(self) -> Alphabet:
        return self.counts.alphabet

    def _vector(self, ctx: tuple) -> np.ndarray:
        vec = np.zeros(self.alphabet.size)
        grams = self.counts.grams[len(ctx) + 1]
        if self.counts.context_count(ctx):
            for w in range(self.alphabet.size):
                vec[w] = grams.get(ctx + (w,), 0)
        return vec

    def weight(self, lower: np.ndarray) -> float:
        if self.adaptive:
            nz = lower[lower > 0]
            return float(np.exp(-np.sum(nz * np.log(nz))))
        return self.alpha * self.alphabet.size

    def distribution(self, context: Sequence[int]) -> np.ndarray:
        """Smoothed p(. | context); the context is clipped to the model order."""
        context = tuple(context)[max(0, len(context) - self.order):] if self.order else ()
        size = self.alphabet.size
        dist = (self._vector(()) + 1.0) / (self.counts.length + size)
        for j in range(1, len(context) + 1):
            ctx = context[len(context) - j:]
            vec = self._vector(ctx)
            w = self.weight(dist)
            dist = (vec + w * dist) / (vec.sum() + w)
        return dist

    def history_context(self, history: Sequence[int]) -> tuple:
        padded = [PAD] * self.order + list(history)
        return tuple(padded[len(padded) - self.order:]) if self.order else ()


def quasi_bayes_prob(model: QuasiBayesModel, context, symbol) -> float:
    ctx = model.alphabet.encode_tuple(context)
    return float(model.distribution(ctx)[model.alphabet.encode_symbol(symbol)])


@dataclass(frozen=True)
class Perplexity:
    value: float
    position: int | None = None

    def __float__(self) -> float:
        return self.value


def perplexity(model, text) -> Perplexity:
    """exp of the mean negative log probability per symbol.

    A zero probability gives +inf and the first offending position.
    """
    seq = model.alphabet.encode(text)
    if not seq:
        raise ValueError("perplexity of empty text")
    terms = []
    for i, w in enumerate(seq):
        if isinstance(model, QuasiBayesModel):
            p = float(model.distribution(model.history_context(seq[:i]))[w])
        else:
            p = model.prob(seq[:i], w)
        if p <= 0:
            return Perplexity(math.inf, i)
        terms.append(math.log(p))
    return Perplexity(math.exp(-math.fsum(terms) / len(seq)))
