"""Contingency-table statistics and the small exact distributions built on them.

The central quantity is the log-likelihood ratio statistic

    G2 = 2 * sum_ij T_ij * ln(T_ij * N / (row_i * col_j))

with 0 * ln 0 taken as 0.  Pearson's chi-squared, mutual information and
the strength-of-association coefficients are provided alongside it so the
measures can be compared on identical tables.
"""

from __future__ import annotations

import json
import math
import numbers
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .special import chi2_sf, normal_sf

LN2 = math.log(2.0)


class TableError(ValueError):
    """Malformed contingency table (shape, negative or non-integer cells)."""


class DegenerateMarginError(ValueError):
    """A row or column sums to zero, so expected counts are undefined."""


def _as_count(value, where: str) -> int:
    if isinstance(value, bool):
        raise TableError(f"{where}: boolean is not a count")
    if isinstance(value, numbers.Integral):
        v = int(value)
    elif isinstance(value, numbers.Real):
        if not math.isfinite(value) or not float(value).is_integer():
            raise TableError(f"{where}: non-integer count {value!r}")
        v = int(value)
    else:
        raise TableError(f"{where}: not a number: {value!r}")
    if v < 0:
        raise TableError(f"{where}: negative count {v}")
    return v


@dataclass(frozen=True)
class ContingencyTable:
    """An r x c table of non-negative integer counts (r, c >= 2)."""

    cells: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        rows = tuple(tuple(_as_count(v, f"cell[{i}][{j}]") for j, v in enumerate(row))
                     for i, row in enumerate(self.cells))
        if len(rows) < 2:
            raise TableError(f"need at least 2 rows, got {len(rows)}")
        width = len(rows[0])
        if width < 2:
            raise TableError(f"need at least 2 columns, got {width}")
        if any(len(r) != width for r in rows):
            raise TableError("ragged table: rows have different lengths")
        object.__setattr__(self, "cells", rows)

    @classmethod
    def from_rows(cls, rows: Iterable[Iterable]) -> "ContingencyTable":
        return cls(tuple(tuple(r) for r in rows))

    @classmethod
    def from_flat(cls, values: Sequence, ncols: int = 2) -> "ContingencyTable":
        """Build from a row-major flat list, e.g. ``[a, b, c, d]`` for a 2x2."""
        values = list(values)
        if ncols < 2 or len(values) % ncols:
            raise TableError(f"{len(values)} cells cannot form rows of {ncols}")
        return cls.from_rows(values[i:i + ncols] for i in range(0, len(values), ncols))

    @classmethod
    def bigram(cls, t_ab: int, t_a_not_b: int, t_not_a_b: int, t_not_a_not_b: int) -> "ContingencyTable":
        return cls(((t_ab, t_a_not_b), (t_not_a_b, t_not_a_not_b)))

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.cells), len(self.cells[0])

    @property
    def row_sums(self) -> tuple[int, ...]:
        return tuple(sum(r) for r in self.cells)

    @property
    def col_sums(self) -> tuple[int, ...]:
        return tuple(sum(col) for col in zip(*self.cells))

    @property
    def total(self) -> int:
        return sum(self.row_sums)

    def transpose(self) -> "ContingencyTable":
        return ContingencyTable(tuple(zip(*self.cells)))

    def scaled(self, factor: int) -> "ContingencyTable":
        return ContingencyTable(tuple(tuple(v * factor for v in r) for r in self.cells))

    def array(self) -> np.ndarray:
        return np.array(self.cells, dtype=float)

    def expected(self) -> tuple[tuple[float, ...], ...]:
        n = self.total
        if n == 0:
            raise DegenerateMarginError("empty table")
        cols = self.col_sums
        return tuple(tuple(r * c / n for c in cols) for r in self.row_sums)

    def check_margins(self) -> None:
        if self.total == 0:
            raise DegenerateMarginError("empty table: total count is 0")
        for i, r in enumerate(self.row_sums):
            if r == 0:
                raise DegenerateMarginError(f"row {i} is empty")
        for j, c in enumerate(self.col_sums):
            if c == 0:
                raise DegenerateMarginError(f"column {j} is empty")


@dataclass(frozen=True)
class TestResult:
    statistic: float
    df: int
    p_value: float

    __test__ = False  # not a pytest class

    def to_dict(self) -> dict:
        return {"statistic": self.statistic, "df": self.df, "p_value": self.p_value}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def to_tsv(self) -> str:
        return f"{self.statistic:.2f}\t{self.df}\t{format_p(self.p_value)}"


def format_p(p: float) -> str:
    """Four decimals, switching to scientific notation below 1e-4."""
    return "%.4f" % p if p >= 1e-4 or p == 0 else "%.3e" % p


def _as_table(table) -> ContingencyTable:
    if isinstance(table, ContingencyTable):
        return table
    return ContingencyTable.from_rows(table)


def _llr_terms(cells, row_sums, col_sums, n) -> list[float]:
    # exact integer products keep the ratio correctly rounded
    terms = []
    for i, row in enumerate(cells):
        r = row_sums[i]
        for j, t in enumerate(row):
            if t:
                terms.append(t * math.log((t * n) / (r * col_sums[j])))
    return terms


def g2_statistic(cells: Sequence[Sequence[int]]) -> float:
    """G2 over the non-empty rows and columns of ``cells``.

    Unlike :func:`g2_test` this never raises on empty margins: an empty row
    or column contributes nothing.  Used where a table is one slice of a
    larger sum (per-context Markov tables, mixed-order extensions).
    """
    row_sums = [sum(r) for r in cells]
    col_sums = [sum(c) for c in zip(*cells)]
    n = sum(row_sums)
    if n == 0:
        return 0.0
    return max(0.0, 2.0 * math.fsum(_llr_terms(cells, row_sums, col_sums, n)))


def g2_test(table) -> TestResult:
    """Log-likelihood ratio test of independence for an r x c table."""
    table = _as_table(table)
    table.check_margins()
    stat = g2_statistic(table.cells)
    rows, cols = table.shape
    df = (rows - 1) * (cols - 1)
    return TestResult(stat, df, chi2_sf(stat, df))


def pearson_test(table) -> TestResult:
    """Pearson's chi-squared test of independence."""
    table = _as_table(table)
    table.check_margins()
    n = table.total
    rs, cs = table.row_sums, table.col_sums
    terms = []
    for i, row in enumerate(table.cells):
        for j, t in enumerate(row):
            # (T - r c / N)^2 / (r c / N) == (T N - r c)^2 / (N r c), exact in integers
            num = t * n - rs[i] * cs[j]
            terms.append((num * num) / (n * rs[i] * cs[j]))
    stat = math.fsum(terms)
    rows, cols = table.shape
    df = (rows - 1) * (cols - 1)
    return TestResult(stat, df, chi2_sf(stat, df))


def applicability(table, min_expected: float = 5.0) -> bool:
    """True when every expected count reaches ``min_expected``."""
    table = _as_table(table)
    if table.total == 0:
        return False
    return all(e >= min_expected for row in table.expected() for e in row)


def mutual_information(table, log_base: float = math.e) -> float:
    """Average mutual information of the maximum-likelihood joint distribution.

    Entropy is taken with the usual sign (H = -sum p log p); MI = H(X) + H(Y)
    - H(X, Y) is the same under either sign convention.
    """
    table = _as_table(table)
    n = table.total
    if n == 0:
        raise DegenerateMarginError("empty table")
    mi = math.fsum(_llr_terms(table.cells, table.row_sums, table.col_sums, n)) / n
    return max(0.0, mi) / math.log(log_base)


def single_cell_mi(table, i: int, j: int, log_base: float = math.e) -> float:
    """log p(x, y) / (p(x) p(y)) for cell (i, j); may be negative."""
    table = _as_table(table)
    t = table.cells[i][j]
    if t == 0:
        raise ValueError(f"cell ({i}, {j}) is zero: single-cell MI is undefined")
    return math.log((t * table.total) / (table.row_sums[i] * table.col_sums[j])) / math.log(log_base)


def dice(t_ab: int, t_a: int, t_b: int) -> float:
    denom = t_a + t_b
    if denom <= 0:
        raise ValueError("dice: T(A) + T(B) must be positive")
    return 2.0 * t_ab / denom


def jaccard(t_ab: int, t_a_or_b: int) -> float:
    if t_a_or_b <= 0:
        raise ValueError("jaccard: T(A or B) must be positive")
    return t_ab / t_a_or_b


def _log_choose(n: int, k: int) -> float:
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def hypergeom_log_pmf(a: int, row1: int, col1: int, n: int) -> float:
    """log P(T_11 = a) for a 2x2 table with fixed margins."""
    return _log_choose(col1, a) + _log_choose(n - col1, row1 - a) - _log_choose(n, row1)


def fisher_exact_2x2(table) -> float:
    """Two-sided Fisher exact p-value.

    Sums the hypergeometric probabilities of every table with the observed
    margins whose probability does not exceed that of the observed table.
    """
    table = _as_table(table)
    if table.shape != (2, 2):
        raise TableError(f"Fisher's exact test needs a 2x2 table, got {table.shape}")
    (a, b), (c, d) = table.cells
    n = a + b + c + d
    if n == 0:
        raise DegenerateMarginError("empty table")
    row1, col1 = a + b, a + c
    lo, hi = max(0, row1 + col1 - n), min(row1, col1)
    logs = [hypergeom_log_pmf(k, row1, col1, n) for k in range(lo, hi + 1)]
    observed = logs[a - lo]
    # relative slack so that tables tied with the observed one are not lost to rounding
    cutoff = observed + 1e-7
    top = max(logs)
    mass = math.fsum(math.exp(v - top) for v in logs if v <= cutoff)
    total = math.fsum(math.exp(v - top) for v in logs)
    return min(1.0, mass / total)


def binomial_log_pmf(k: int, n: int, p: float) -> float:
    if p == 0.0:
        return 0.0 if k == 0 else -math.inf
    if p == 1.0:
        return 0.0 if k == n else -math.inf
    return _log_choose(n, k) + k * math.log(p) + (n - k) * math.log1p(-p)


def _check_binomial(n: int, p: float, k_min: int) -> None:
    if n < 0 or int(n) != n:
        raise ValueError(f"n must be a non-negative integer, got {n}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    if k_min < 0 or k_min > n or int(k_min) != k_min:
        raise ValueError(f"k_min must be an integer in [0, n], got {k_min}")


def binomial_tail(n: int, p: float, k_min: int) -> float:
    """Exact P(K >= k_min) for K ~ Binomial(n, p)."""
    _check_binomial(n, p, k_min)
    if k_min == 0:
        return 1.0
    # terms are all positive, so the direct sum has no cancellation
    tail = math.fsum(math.exp(binomial_log_pmf(k, n, p)) for k in range(k_min, n + 1))
    return min(1.0, tail)


def normal_tail_approx(n: int, p: float, k_min: int, continuity: bool = True) -> float:
    """Upper tail of Normal(np, np(1-p)) at k_min (or k_min - 0.5)."""
    _check_binomial(n, p, k_min)
    mean = n * p
    sd = math.sqrt(n * p * (1.0 - p))
    threshold = k_min - 0.5 if continuity else k_min
    if sd == 0.0:
        return 1.0 if mean >= threshold else 0.0
    return normal_sf((threshold - mean) / sd)


def llr_normal_two_sample(a: Sequence[float], b: Sequence[float]) -> TestResult:
    """-2 log lambda for equal means of two normal samples with a shared variance.

    Under both hypotheses the common variance is fitted by maximum
    likelihood, so the statistic reduces to N ln(RSS_pooled / RSS_groups).
    """
    xa = np.asarray(a, dtype=float)
    xb = np.asarray(b, dtype=float)
    if xa.size < 2 or xb.size < 2:
        raise ValueError("each sample needs at least 2 values")
    if not (np.all(np.isfinite(xa)) and np.all(np.isfinite(xb))):
        raise ValueError("samples must be finite")
    pooled = np.concatenate([xa, xb])
    rss0 = float(np.sum((pooled - pooled.mean()) ** 2))
    rss1 = float(np.sum((xa - xa.mean()) ** 2) + np.sum((xb - xb.mean()) ** 2))
    if rss1 <= 0.0:
        raise ValueError("zero within-group variance: likelihood is unbounded")
    stat = max(0.0, pooled.size * math.log(rss0 / rss1))
    return TestResult(stat, 1, chi2_sf(stat, 1))


def _binomial_pmf_vector(n: int, p: float) -> np.ndarray:
    return np.array([math.exp(binomial_log_pmf(k, n, p)) for k in range(n + 1)])


def g2_2x2_vectorized(a, b, c, d) -> np.ndarray:
    """G2 for many 2x2 tables at once; empty margins contribute zero."""
    a, b, c, d = (np.asarray(x, dtype=float) for x in (a, b, c, d))
    n = a + b + c + d
    r1, r2, c1, c2 = a + b, c + d, a + c, b + d

    def term(t, r, col):
        with np.errstate(divide="ignore", invalid="ignore"):
            v = t * np.log(t * n / (r * col))
        return np.where(t > 0, v, 0.0)

    g = 2.0 * (term(a, r1, c1) + term(b, r1, c2) + term(c, r2, c1) + term(d, r2, c2))
    return np.maximum(g, 0.0)


MAX_CALIBRATION_OUTCOMES = 20_000_000


def g2_calibration(p: float, n1: int, n2: int, thresholds: Sequence[float] | None = None):
    """Exact null distribution of the 2x2 G2 for two binomial samples.

    Every outcome (k1, k2) of Binomial(n1, p) x Binomial(n2, p) is enumerated
    with its exact probability.  Returns ``(threshold, P(G2 >= threshold),
    chi2_sf(threshold, 1))`` rows; the default thresholds are the integers
    from 0 up to the largest attainable statistic (capped at 60).
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    if n1 < 1 or n2 < 1:
        raise ValueError("sample sizes must be positive")
    if (n1 + 1) * (n2 + 1) > MAX_CALIBRATION_OUTCOMES:
        raise ValueError(f"{(n1 + 1) * (n2 + 1)} outcomes exceeds the enumeration limit")
    stats, probs = calibration_outcomes(p, n1, n2)
    order = np.argsort(stats, kind="stable")
    stats, probs = stats[order], probs[order]
    # tail[i] = P(G2 >= stats[i]); reversed cumulative sum of sorted masses
    tail = np.cumsum(probs[::-1])[::-1]
    if thresholds is None:
        top = min(60, int(math.floor(stats[-1])))
        thresholds = range(0, top + 1)
    rows = []
    for th in thresholds:
        # tolerate rounding in stats that are mathematically equal to th
        i = int(np.searchsorted(stats, th - 1e-9 * max(1.0, th), side="left"))
        emp = float(tail[i]) if i < stats.size else 0.0
        rows.append((float(th), min(1.0, emp), chi2_sf(float(th), 1)))
    return rows


def calibration_outcomes(p: float, n1: int, n2: int) -> tuple[np.ndarray, np.ndarray]:
    """Flat arrays of (G2, probability) over all (k1, k2) outcomes."""
    pmf1 = _binomial_pmf_vector(n1, p)
    pmf2 = _binomial_pmf_vector(n2, p)
    k1 = np.arange(n1 + 1, dtype=float)[:, None]
    k2 = np.arange(n2 + 1, dtype=float)[None, :]
    stats = g2_2x2_vectorized(k1, n1 - k1, k2, n2 - k2)
    probs = pmf1[:, None] * pmf2[None, :]
    return stats.ravel(), probs.ravel()


def multinomial_log_pmf(counts: Sequence[int], probs: Sequence[float]) -> float:
    """log( n! prod p^k / k! ); -inf when a zero-probability symbol is observed."""
    if len(counts) != len(probs):
        raise ValueError("counts and probs differ in length")
    if any(k < 0 for k in counts) or any(p < 0 for p in probs):
        raise ValueError("counts and probabilities must be non-negative")
    if abs(math.fsum(probs) - 1.0) > 1e-12:
        raise ValueError("probabilities must sum to 1")
    n = sum(counts)
    total = math.lgamma(n + 1)
    for k, p in zip(counts, probs):
        if k == 0:
            continue
        if p == 0:
            return -math.inf
        total += k * math.log(p) - math.lgamma(k + 1)
    return total
