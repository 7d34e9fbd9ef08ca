"""Structure around a boundary in aligned sequences.

Each record is split at a boundary (a splice site, say) into a left and a
right flank.  Position -1 is the last residue of the left flank and position
0 the first residue of the right flank.  Records too short to reach a
requested position are skipped for that position.

Also here: Levenshtein distance and near-duplicate removal screened by
hashed n-mer bit signatures.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .special import chi2_cdf, chi2_sf, kolmogorov_critical, kolmogorov_sf
from .tables import DegenerateMarginError, TestResult, format_p, g2_test, mutual_information

DNA = "ACGT"
MAX_FLANK = 30


@dataclass(frozen=True)
class SequenceRecord:
    id: str
    left: str
    right: str

    @property
    def sequence(self) -> str:
        return self.left + self.right

    @property
    def boundary(self) -> int:
        return len(self.left)

    def residue(self, pos: int) -> str | None:
        if pos < 0:
            return self.left[pos] if -pos <= len(self.left) else None
        return self.right[pos] if pos < len(self.right) else None


def read_fasta(text: str) -> list[tuple[str, str]]:
    """(id, sequence) pairs; the id is the first word after '>'."""
    out, ident, chunks = [], None, []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith(";"):
            continue
        if line.startswith(">"):
            if ident is not None:
                out.append((ident, "".join(chunks)))
            ident, chunks = (line[1:].split() or [""])[0], []
        elif ident is None:
            raise ValueError("sequence data before the first '>' header")
        else:
            chunks.append(line)
    if ident is not None:
        out.append((ident, "".join(chunks)))
    return out


def read_boundaries(text: str) -> dict[str, int]:
    """Sidecar TSV of (id, boundary offset)."""
    out = {}
    for line in text.splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        ident, offset = line.split("\t")[:2]
        out[ident] = int(offset)
    return out


def make_records(entries: Iterable[tuple[str, str]], boundaries: Mapping[str, int] | None = None,
                 split_char: str = "|", flank: int = MAX_FLANK, alphabet: str = DNA) -> list[SequenceRecord]:
    """Split sequences at their boundary and trim each flank to ``flank``."""
    if flank > MAX_FLANK:
        raise ValueError(f"flank windows are limited to {MAX_FLANK} positions")
    allowed = set(alphabet)
    records = []
    for ident, seq in entries:
        seq = seq.upper()
        if boundaries is not None:
            if ident not in boundaries:
                raise ValueError(f"no boundary given for record {ident!r}")
            b = boundaries[ident]
            if not 0 <= b <= len(seq):
                raise ValueError(f"boundary {b} outside record {ident!r}")
            left, right = seq[:b], seq[b:]
        else:
            if seq.count(split_char) != 1:
                raise ValueError(f"record {ident!r} needs exactly one {split_char!r} boundary marker")
            left, right = seq.split(split_char)
        left, right = left[len(left) - min(flank, len(left)):], right[:flank]
        bad = set(left + right) - allowed
        if bad:
            raise ValueError(f"record {ident!r} has residues outside the alphabet: {sorted(bad)}")
        records.append(SequenceRecord(ident, left, right))
    return records


def records_from_pairs(pairs: Iterable[tuple[str, str]]) -> list[SequenceRecord]:
    return [SequenceRecord(f"r{i}", l, r) for i, (l, r) in enumerate(pairs)]


def _column(records: Sequence[SequenceRecord], pos: int, alphabet: str) -> np.ndarray:
    """Residue ids at ``pos``; -1 where a record is too short."""
    index = {c: i for i, c in enumerate(alphabet)}
    return np.array([index[r] if (r := rec.residue(pos)) is not None else -1 for rec in records], dtype=np.int64)


def entropy_bits(probs) -> float:
    return -math.fsum(p * math.log2(p) for p in probs if p > 0)


def information_bits(probs, baseline=None) -> float:
    """Relative entropy (bits) of ``probs`` from ``baseline`` (uniform by default)."""
    if baseline is None:
        return math.log2(len(probs)) - entropy_bits(probs)
    return math.fsum(p * math.log2(p / q) for p, q in zip(probs, baseline) if p > 0)


def _info_from_counts(counts: np.ndarray, baseline: np.ndarray | None) -> np.ndarray:
    """Row-wise information of count vectors (last axis = symbols)."""
    n = counts.sum(axis=-1, keepdims=True)
    p = counts / n
    with np.errstate(divide="ignore", invalid="ignore"):
        if baseline is None:
            terms = np.where(p > 0, p * np.log2(p), 0.0)
            return math.log2(counts.shape[-1]) + terms.sum(axis=-1)
        terms = np.where(p > 0, p * np.log2(p / baseline), 0.0)
        return terms.sum(axis=-1)


@dataclass(frozen=True)
class PositionInfo:
    position: int
    bits: float
    low: float
    high: float
    n: int

    def to_tsv(self) -> str:
        return "%d\t%.4f\t%.4f\t%.4f\t%d" % (self.position, self.bits, self.low, self.high, self.n)


def composition(records: Sequence[SequenceRecord], alphabet: str = DNA) -> np.ndarray:
    counts = np.zeros(len(alphabet))
    for rec in records:
        for c in rec.sequence:
            counts[alphabet.index(c)] += 1
    return counts / counts.sum()


def positional_information(records: Sequence[SequenceRecord], positions: Iterable[int],
                           bootstrap_replicates: int = 1000, seed: int = 0, level: float = 0.95,
                           alphabet: str = DNA, relative_to_marginal: bool = False) -> list[PositionInfo]:
    """Information (bits) of the residue distribution at each position.

    The baseline is the uniform distribution unless ``relative_to_marginal``,
    which measures against the overall residue composition instead.  Bands
    are percentile bootstrap intervals over resampled records.
    """
    size = len(alphabet)
    baseline = composition(records, alphabet) if relative_to_marginal else None
    rng = np.random.default_rng(seed)
    tail = 100.0 * (1.0 - level) / 2.0
    out = []
    for pos in positions:
        col = _column(records, pos, alphabet)
        col = col[col >= 0]
        if col.size < 2:
            raise ValueError(f"position {pos} is covered by fewer than 2 records")
        counts = np.bincount(col, minlength=size).astype(float)
        bits = float(_info_from_counts(counts, baseline))
        if bootstrap_replicates > 0:
            idx = rng.integers(0, col.size, size=(bootstrap_replicates, col.size))
            sample = col[idx]
            boot_counts = np.stack([(sample == s).sum(axis=1) for s in range(size)], axis=1).astype(float)
            lo, hi = np.percentile(_info_from_counts(boot_counts, baseline), [tail, 100.0 - tail])
        else:
            lo = hi = bits
        out.append(PositionInfo(pos, bits, float(lo), float(hi), int(col.size)))
    return out


@dataclass(frozen=True)
class PositionPairTable:
    left: int
    right: int
    cells: tuple[tuple[int, ...], ...]

    @property
    def n(self) -> int:
        return sum(map(sum, self.cells))


def _pair_cells(lcol: np.ndarray, rcol: np.ndarray, size: int) -> tuple[tuple[int, ...], ...]:
    ok = (lcol >= 0) & (rcol >= 0)
    flat = np.bincount(lcol[ok] * size + rcol[ok], minlength=size * size)
    return tuple(tuple(int(x) for x in flat[i * size:(i + 1) * size]) for i in range(size))


def pair_correlation(records: Sequence[SequenceRecord], pos_l: int, pos_r: int,
                     alphabet: str = DNA) -> tuple[PositionPairTable, TestResult]:
    """Residue-pair table for two positions and its G2 independence test."""
    cells = _pair_cells(_column(records, pos_l, alphabet), _column(records, pos_r, alphabet), len(alphabet))
    table = PositionPairTable(pos_l, pos_r, cells)
    if table.n == 0:
        raise ValueError(f"no record covers both positions {pos_l} and {pos_r}")
    return table, g2_test(cells)


def pair_mutual_information_bits(table: PositionPairTable) -> float:
    return mutual_information(table.cells, log_base=2.0)


@dataclass(frozen=True)
class PairScore:
    left: int
    right: int
    g2: float
    p_value: float
    n: int

    def to_tsv(self) -> str:
        return "%d\t%d\t%.2f\t%s" % (self.left, self.right, self.g2, format_p(self.p_value))


@dataclass
class StructureReport:
    pairs: list[PairScore]
    degenerate: list[tuple[int, int]]
    df: int
    label: str = ""
    ks: float = field(init=False)
    ks_p_value: float = field(init=False)

    def __post_init__(self):
        self.ks = ks_distance(self.values, self.df) if self.pairs else float("nan")
        self.ks_p_value = kolmogorov_sf(self.ks, len(self.pairs)) if self.pairs else float("nan")

    @property
    def values(self) -> list[float]:
        return sorted(p.g2 for p in self.pairs)

    def ks_critical(self, alpha: float = 0.01) -> float:
        return kolmogorov_critical(alpha, len(self.pairs))

    def ecdf(self, x: float) -> float:
        vals = self.values
        return float(np.searchsorted(vals, x, side="right")) / len(vals)

    def cdf_table(self, points: Sequence[float] | None = None) -> list[tuple[float, float, float]]:
        """(x, empirical CDF, reference chi2 CDF) rows."""
        xs = self.values if points is None else list(points)
        return [(x, self.ecdf(x), chi2_cdf(x, self.df)) for x in xs]


def ks_distance(values: Sequence[float], df: int) -> float:
    """sup |empirical CDF - chi2(df) CDF|."""
    xs = sorted(values)
    n = len(xs)
    if n == 0:
        raise ValueError("no values")
    d = 0.0
    for i, x in enumerate(xs):
        f = chi2_cdf(x, df)
        d = max(d, (i + 1) / n - f, f - i / n)
    return d


def region_structure(records: Sequence[SequenceRecord], left_region: Iterable[int],
                     right_region: Iterable[int], alphabet: str = DNA, label: str = "") -> StructureReport:
    """G2 for every (left, right) position pair and the KS distance of their
    distribution from chi2((|S|-1)^2).  Pairs with an empty row or column
    are listed as degenerate and left out of the distribution."""
    left_region, right_region = list(left_region), list(right_region)
    if not left_region or not right_region:
        raise ValueError("empty region")
    size = len(alphabet)
    cols = {p: _column(records, p, alphabet) for p in set(left_region) | set(right_region)}
    pairs, degenerate = [], []
    for l in left_region:
        for r in right_region:
            cells = _pair_cells(cols[l], cols[r], size)
            try:
                res = g2_test(cells)
            except DegenerateMarginError:
                degenerate.append((l, r))
                continue
            pairs.append(PairScore(l, r, res.statistic, res.p_value, sum(map(sum, cells))))
    return StructureReport(pairs, degenerate, (size - 1) ** 2, label)


def shuffled_control(records: Sequence[SequenceRecord], seed: int = 0) -> list[SequenceRecord]:
    """Re-pair left halves with a random permutation of the right halves."""
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(records))
    return [SequenceRecord(rec.id, rec.left, records[int(j)].right) for rec, j in zip(records, perm)]


def edit_distance(a: str, b: str) -> int:
    """Unit-cost Levenshtein distance."""
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    bb = np.frombuffer(b.encode("utf-32-le"), dtype=np.uint32)
    j = np.arange(len(b) + 1, dtype=np.int64)
    prev = j.copy()
    for i, ch in enumerate(a, start=1):
        sub = prev[:-1] + (bb != ord(ch))
        cur = np.empty_like(prev)
        cur[0] = i
        cur[1:] = np.minimum(sub, prev[1:] + 1)
        # insertions: cur[j] = min(cur[j], cur[j-1] + 1), a running minimum of cur - j
        cur = np.minimum.accumulate(cur - j) + j
        prev = cur
    return int(prev[-1])


SIGNATURE_BITS = 4096


def signature(seq: str, n: int = 8, bits: int = SIGNATURE_BITS) -> int:
    """Bit table of hashed n-mers, as a Python int."""
    sig = 0
    data = seq.encode()
    for i in range(len(data) - n + 1):
        sig |= 1 << (zlib.crc32(data[i:i + n]) % bits)
    return sig


def signature_bound(sig_a: int, sig_b: int, n: int = 8) -> int:
    """Lower bound on edit distance from two n-mer signatures.

    A bit set in one signature only marks an n-mer absent from the other
    string; one edit can remove at most n n-mers (and add at most n), so the
    unmatched bits on either side need at least ceil(count / n) edits.
    """
    only_a = (sig_a & ~sig_b).bit_count()
    only_b = (sig_b & ~sig_a).bit_count()
    return -(-max(only_a, only_b) // n)


@dataclass(frozen=True)
class DedupResult:
    kept: list[SequenceRecord | tuple[str, str]]
    removed: list[str]


def dedup(records: Sequence, identity: float = 0.95, nmer: int = 8,
          bits: int = SIGNATURE_BITS) -> DedupResult:
    """Remove near-duplicates, keeping the shorter record of each pair.

    Records are (id, sequence) pairs or :class:`SequenceRecord` objects.
    Identity is 1 - edit distance / longer length.  Pairs are screened by
    length ratio and by the signature bound before the exact distance.
    """
    def seq_of(r):
        return r.sequence if isinstance(r, SequenceRecord) else r[1]

    def id_of(r):
        return r.id if isinstance(r, SequenceRecord) else r[0]

    order = sorted(range(len(records)), key=lambda i: (len(seq_of(records[i])), i))
    kept_idx, removed = [], []
    sigs = {}
    for i in order:
        s = seq_of(records[i])
        sig = sigs[i] = signature(s, nmer, bits)
        duplicate = False
        for j in kept_idx:
            t = seq_of(records[j])
            longer = max(len(s), len(t))
            if longer == 0:
                duplicate = True
                break
            if min(len(s), len(t)) / longer < identity:
                continue
            max_dist = math.floor((1.0 - identity) * longer + 1e-9)
            bound = max(signature_bound(sig, sigs[j], nmer), abs(len(s) - len(t)))
            if bound > max_dist:
                continue
            if edit_distance(s, t) <= max_dist:
                duplicate = True
                break
        if duplicate:
            removed.append(id_of(records[i]))
        else:
            kept_idx.append(i)
    kept_set = set(kept_idx)
    return DedupResult([r for i, r in enumerate(records) if i in kept_set], removed)
