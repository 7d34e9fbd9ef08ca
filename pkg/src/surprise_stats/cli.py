"""``surprise``: command-line front end for every module.

Every subcommand is declared once in :data:`COMMANDS`; the argparse tree is
built from that registry so help output and accepted flags cannot drift
apart.  Exit status is 0 on success, 1 on usage errors and 2 on data errors.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from . import __version__
from .classify import (
    TEST_SIZES,
    TRAIN_SIZES,
    Classifier,
    EvalRow,
    EvalSuite,
    classify,
    evaluate,
    make_eval_suite,
    soft_classify,
    train,
)
from .colloc import TOKEN_RULES, rank_bigrams, tokenize, zipf_profile, zipf_slope
from .mixedmarkov import MODES, MixedModel, grow_model, perplexity
from .ngram import Alphabet
from .route import DEFAULT_THRESHOLD, LabeledCorpus, RoutingQuery, key_terms, rank_documents, select_terms
from .seqstruct import (
    MAX_FLANK,
    dedup,
    make_records,
    positional_information,
    read_boundaries,
    read_fasta,
    region_structure,
    shuffled_control,
)
from .tables import ContingencyTable, TableError, format_p, g2_test, pearson_test

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


@dataclass(frozen=True)
class Opt:
    flags: tuple[str, ...]
    help: str
    kwargs: dict = field(default_factory=dict)

    @property
    def dest(self) -> str:
        long = [f for f in self.flags if f.startswith("--")]
        name = long[0] if long else self.flags[0]
        return self.kwargs.get("dest", name.lstrip("-").replace("-", "_"))


@dataclass
class Report:
    """What a handler produces: TSV rows plus a JSON payload."""

    columns: tuple[str, ...] = ()
    rows: list[str] = field(default_factory=list)
    payload: object = None
    notes: dict = field(default_factory=dict)


@dataclass
class Model:
    """A handler result that is always written as a loadable JSON model."""

    data: dict


@dataclass(frozen=True)
class Command:
    path: tuple[str, ...]
    help: str
    opts: tuple[Opt, ...]
    handler: Callable
    formats: bool = True


SEED = Opt(("--seed",), "random seed recorded in the output header", {"type": int, "default": 0})
FORMAT = Opt(("--format",), "output format", {"choices": ("tsv", "json"), "default": "tsv"})
OUTPUT = Opt(("-o", "--output"), "output path (default: standard output)", {"default": None})


# input helpers

def read_bytes(path: str) -> bytes:
    if path == "-":
        return sys.stdin.buffer.read()
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror or exc}") from None


def read_text(path: str) -> str:
    return read_bytes(path).decode("utf-8", errors="replace")


def parse_ints(text: str, what: str) -> list[int]:
    try:
        return [int(x) for x in text.replace(",", " ").split()]
    except ValueError:
        raise DataError(f"malformed {what}: expected integers, got {text!r}") from None


def parse_range(text: str) -> list[int]:
    """``a..b`` (inclusive) or a comma-separated list of positions."""
    try:
        if ".." in text:
            lo, hi = text.split("..")
            lo, hi = int(lo), int(hi)
            if lo > hi:
                raise ValueError
            return list(range(lo, hi + 1))
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"bad position range {text!r}; use a..b or a,b,c") from None


def parse_sizes(text: str) -> list[int]:
    try:
        sizes = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"bad size list {text!r}") from None
    if not sizes or min(sizes) <= 0:
        raise UsageError(f"sizes must be positive: {text!r}")
    return sizes


def load_table(args) -> ContingencyTable:
    if (args.cells is None) == (args.table is None):
        raise DataError("invalid flag combination: give exactly one of --cells or a TABLE file")
    try:
        if args.cells is not None:
            values = parse_ints(args.cells, "table")
            if not values or len(values) % args.cols:
                raise DataError(f"malformed table: {len(values)} cells do not fill rows of {args.cols}")
            return ContingencyTable.from_flat(values, args.cols)
        rows = [parse_ints(line, "table") for line in read_text(args.table).splitlines()
                if line.strip() and not line.startswith("#")]
        return ContingencyTable.from_rows(rows)
    except TableError as exc:
        raise DataError(f"malformed table: {exc}") from None


def load_records(args):
    entries = read_fasta(read_text(args.fasta))
    if not entries:
        raise DataError(f"no FASTA records in {args.fasta}")
    boundaries = read_boundaries(read_text(args.boundaries)) if args.boundaries else None
    if not 1 <= args.flank <= MAX_FLANK:
        raise UsageError(f"--flank must be between 1 and {MAX_FLANK}")
    return make_records(entries, boundaries, args.split_char, args.flank)


def directory_texts(path: str) -> list[str]:
    p = Path(path)
    if not p.is_dir():
        raise DataError(f"cannot read {path}: not a directory")
    return [read_text(str(f)) for f in sorted(p.iterdir()) if f.is_file()]


def load_classifiers(paths) -> Classifier:
    models = []
    for path in paths:
        try:
            models.append(Classifier.from_json(read_text(path)))
        except (KeyError, TypeError, json.JSONDecodeError) as exc:
            raise DataError(f"malformed model {path}: {exc}") from None
    return models[0] if len(models) == 1 else Classifier.combine(models)


# handlers

def result_report(result) -> Report:
    return Report(("statistic", "df", "p_value"), [result.to_tsv()], result.to_dict())


def cmd_g2(args):
    return result_report(g2_test(load_table(args)))


def cmd_chi2(args):
    return result_report(pearson_test(load_table(args)))


def _stream(args):
    return tokenize(read_text(args.file), args.rule, not args.keep_case, args.line_delimited)


def cmd_colloc_rank(args):
    if args.top is not None and args.top < 0:
        raise UsageError("--top must be non-negative")
    ranked = rank_bigrams(_stream(args), args.method, args.top, args.applicable_only, args.transpose)
    return Report(
        ("score", "T(AB)", "T(A~B)", "T(~AB)", "T(~A~B)", "A", "B"),
        [b.to_tsv(args.method) for b in ranked],
        [{"a": b.a, "b": b.b, "score": b.score(args.method), "cells": b.cells} for b in ranked],
    )


def cmd_zipf(args):
    profile = zipf_profile(_stream(args))
    try:
        slope = zipf_slope(profile)
    except ValueError:
        slope = float("nan")
    return Report(("frequency", "word_count"), ["%d\t%d" % fc for fc in profile],
                  {"profile": profile, "slope": slope}, {"slope": "%.4f" % slope})


def cmd_langid_train(args):
    corpus = b"".join(read_bytes(p) for p in args.files)
    if not corpus:
        raise DataError("training corpus is empty")
    clf = train({args.label: corpus}, k=args.order, alpha=args.alpha, casefold=args.casefold,
                collapse_whitespace=not args.keep_whitespace)
    return Model(clf.to_dict())


def cmd_langid_classify(args):
    clf = load_classifiers(args.models)
    text = read_bytes(args.text)
    result = classify(clf, text)
    probs = soft_classify(clf, text)
    order = sorted(result.scores, key=lambda l: (l != result.label, result.scores[l], l))
    rows = ["%s\t%.2f\t%.4f" % (l, result.scores[l], probs[l]) for l in order]
    return Report(("label", "score_bits", "probability"), rows,
                  {"label": result.label, "scores": result.scores, "probabilities": probs},
                  {"predicted": result.label})


def cmd_langid_suite(args):
    corpora = {}
    for item in args.corpus:
        label, sep, path = item.partition("=")
        if not sep or not label or not path:
            raise UsageError(f"--corpus expects LABEL=PATH, got {item!r}")
        if label in corpora:
            raise UsageError(f"duplicate label {label!r}")
        corpora[label] = read_bytes(path)
    suite = make_eval_suite(corpora, parse_sizes(args.train_sizes), parse_sizes(args.test_sizes),
                            seed=args.seed, n_train=args.n_train, n_test=args.n_test)
    return Model(suite.to_dict())


def cmd_langid_eval(args):
    try:
        suite = EvalSuite.from_json(read_text(args.suite))
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise DataError(f"malformed suite {args.suite}: {exc}") from None
    orders = [int(x) for x in args.orders.split(",")] if args.orders else [0, 1, 2, 3]
    report = evaluate(
        suite, orders=orders, alpha=args.alpha,
        train_sizes=parse_sizes(args.train_sizes) if args.train_sizes else None,
        test_sizes=parse_sizes(args.test_sizes) if args.test_sizes else None,
        default_label=args.default_label, bootstrap_replicates=args.replicates, seed=args.seed,
    )
    lines = report.to_tsv().splitlines()
    return Report(EvalRow.COLUMNS, lines[1:], [dict(zip(EvalRow.COLUMNS, _row_values(r))) for r in report.rows])


def _row_values(row):
    return [getattr(row, c) for c in EvalRow.COLUMNS]


def query_report(query: RoutingQuery) -> Report:
    return Report(("g2", "T(t,R)", "T(t,N)", "term"), query.to_tsv().splitlines(),
                  [{"term": t.term, "g2": t.g2, "t_r": t.t_r, "t_n": t.t_n} for t in query.terms])


def cmd_route_select(args):
    corpus = LabeledCorpus.from_documents(directory_texts(args.rel), directory_texts(args.nonrel))
    return query_report(select_terms(corpus, args.threshold, args.binarize))


def cmd_route_rank(args):
    query = RoutingQuery.from_tsv(read_text(args.query))
    docs = {d: read_text(d) for d in args.docs}
    ranked = rank_documents(query, docs)
    return Report(("score", "doc_id"), ["%.4f\t%s" % sd for sd in ranked],
                  [{"score": s, "doc_id": d} for s, d in ranked])


def cmd_keyterms(args):
    return query_report(key_terms(read_text(args.target), read_text(args.reference),
                                  args.threshold, args.binarize))


def cmd_posinfo(args):
    records = load_records(args)
    infos = positional_information(records, parse_range(args.positions), args.replicates,
                                   args.seed, args.level, relative_to_marginal=args.relative)
    return Report(("position", "bits", "low", "high", "n"), [i.to_tsv() for i in infos],
                  [vars(i) for i in infos])


def _structure(args):
    records = load_records(args)
    if getattr(args, "control", False):
        records = shuffled_control(records, args.seed)
    return region_structure(records, parse_range(args.left), parse_range(args.right))


def cmd_paircorr(args):
    rep = _structure(args)
    return Report(("posL", "posR", "g2", "p"), [p.to_tsv() for p in rep.pairs],
                  {"pairs": [vars(p) for p in rep.pairs], "degenerate": rep.degenerate},
                  {"degenerate_pairs": len(rep.degenerate)})


def cmd_structure(args):
    rep = _structure(args)
    if not rep.pairs:
        raise DataError("no testable position pairs")
    rows = ["%.4f\t%.4f\t%.4f" % t for t in rep.cdf_table()]
    notes = {"pairs": len(rep.pairs), "degenerate_pairs": len(rep.degenerate), "df": rep.df,
             "ks": "%.4f" % rep.ks, "ks_p": format_p(rep.ks_p_value),
             "ks_critical_1pct": "%.4f" % rep.ks_critical(0.01)}
    payload = {"ks": rep.ks, "ks_p_value": rep.ks_p_value, "ks_critical_1pct": rep.ks_critical(0.01),
               "df": rep.df, "values": rep.values, "degenerate": rep.degenerate}
    return Report(("x", "ecdf", "chi2_cdf"), rows, payload, notes)


def cmd_dedup(args):
    entries = read_fasta(read_text(args.fasta))
    if not entries:
        raise DataError(f"no FASTA records in {args.fasta}")
    if not 0 < args.identity <= 1:
        raise UsageError("--identity must be in (0, 1]")
    result = dedup(entries, args.identity, args.nmer)
    removed = set(result.removed)
    rows = ["%s\t%s" % (ident, "removed" if ident in removed else "kept") for ident, _ in entries]
    return Report(("id", "status"), rows, {"kept": [e[0] for e in result.kept], "removed": result.removed},
                  {"removed": len(removed)})


def _alphabet(kind: str, text: bytes) -> Alphabet:
    if kind == "bytes":
        return Alphabet.bytes()
    return Alphabet.from_symbols(sorted(set(text.decode("utf-8", errors="replace"))))


def _sequence(kind: str, text: bytes):
    return text if kind == "bytes" else text.decode("utf-8", errors="replace")


def cmd_mm_grow(args):
    text = read_bytes(args.corpus)
    if not text:
        raise DataError("corpus is empty")
    if args.epsilon is not None and not args.epsilon >= 0:
        raise UsageError("--epsilon must be non-negative")
    alphabet = _alphabet(args.alphabet, text)
    model = grow_model(_sequence(args.alphabet, text), alphabet, args.epsilon, args.mode, args.max_order)
    if args.alpha is not None:
        model = model.smoothed(args.alpha)
    return Model(model.to_dict())


def cmd_mm_perplexity(args):
    try:
        model = MixedModel.from_json(read_text(args.model))
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise DataError(f"malformed model {args.model}: {exc}") from None
    if args.alpha is not None:
        model = model.smoothed(args.alpha)
    text = read_bytes(args.text)
    seq = text if model.alphabet.mode == "bytes" else text.decode("utf-8", errors="replace")
    res = perplexity(model, seq)
    value = "inf" if math.isinf(res.value) else "%.4f" % res.value
    pos = "-" if res.position is None else str(res.position)
    return Report(("perplexity", "length", "zero_position"), [f"{value}\t{len(seq)}\t{pos}"],
                  {"perplexity": value if math.isinf(res.value) else res.value,
                   "length": len(seq), "zero_position": res.position})


# registry

TABLE_OPTS = (
    Opt(("table",), "TSV file of integer rows ('-' for stdin)", {"nargs": "?", "default": None}),
    Opt(("--cells",), "inline cells in row-major order, e.g. \"110 2442 111 29114\"", {"default": None}),
    Opt(("--cols",), "number of columns for --cells", {"type": int, "default": 2}),
)
TOKEN_OPTS = (
    Opt(("file",), "text file ('-' for stdin)"),
    Opt(("--rule",), "tokenizer rule", {"choices": tuple(sorted(TOKEN_RULES)), "default": "default"}),
    Opt(("--keep-case",), "do not lowercase tokens", {"action": "store_true"}),
    Opt(("--line-delimited",), "do not form pairs across line breaks", {"action": "store_true"}),
)
RECORD_OPTS = (
    Opt(("fasta",), "FASTA file of records"),
    Opt(("--boundaries",), "TSV sidecar of (id, boundary offset); otherwise --split-char marks it",
        {"default": None}),
    Opt(("--split-char",), "boundary marker inside each sequence", {"default": "|"}),
    Opt(("--flank",), "residues kept on each side of the boundary", {"type": int, "default": MAX_FLANK}),
)
REGION_OPTS = (
    Opt(("--left",), "left-flank positions, a..b or a,b,c", {"default": "-30..-1"}),
    Opt(("--right",), "right-flank positions, a..b or a,b,c", {"default": "0..29"}),
)
ROUTE_THRESHOLD = Opt(("--threshold",), "minimum G2 for a selected term", {"type": float, "default": DEFAULT_THRESHOLD})
BINARIZE = Opt(("--binarize",), "count documents containing a term instead of occurrences", {"action": "store_true"})

COMMANDS = (
    Command(("g2",), "log-likelihood ratio test of a contingency table", TABLE_OPTS, cmd_g2),
    Command(("chi2",), "Pearson chi-square test of a contingency table", TABLE_OPTS, cmd_chi2),
    Command(("colloc", "rank"), "rank adjacent word pairs by association", TOKEN_OPTS + (
        Opt(("--method",), "association statistic", {"choices": ("g2", "pearson"), "default": "g2"}),
        Opt(("--top",), "keep only the best N pairs", {"type": int, "default": None}),
        Opt(("--applicable-only",), "drop tables with an expected count below 5", {"action": "store_true"}),
        Opt(("--transpose",), "score the transposed tables", {"action": "store_true"}),
    ), cmd_colloc_rank),
    Command(("colloc", "zipf"), "frequency-of-frequencies profile", TOKEN_OPTS, cmd_zipf),
    Command(("zipf",), "frequency-of-frequencies profile (same as colloc zipf)", TOKEN_OPTS, cmd_zipf),
    Command(("langid", "train"), "train a one-category character n-gram model", (
        Opt(("files",), "training text files", {"nargs": "+"}),
        Opt(("--label",), "category label", {"required": True}),
        Opt(("--order",), "Markov order k", {"type": int, "default": 3}),
        Opt(("--alpha",), "Dirichlet prior weight", {"type": float, "default": 0.2}),
        Opt(("--casefold",), "fold case before counting", {"action": "store_true"}),
        Opt(("--keep-whitespace",), "do not collapse whitespace runs", {"action": "store_true"}),
    ), cmd_langid_train, formats=False),
    Command(("langid", "classify"), "classify text read from --text or stdin", (
        Opt(("models",), "model files; several one-category models are combined", {"nargs": "+"}),
        Opt(("--text",), "text file to classify ('-' for stdin)", {"default": "-"}),
    ), cmd_langid_classify),
    Command(("langid", "suite"), "build a seeded evaluation suite", (
        Opt(("--corpus",), "LABEL=PATH, repeat once per category", {"action": "append", "required": True}),
        Opt(("--train-sizes",), "comma-separated training sizes in bytes",
            {"default": ",".join(map(str, TRAIN_SIZES))}),
        Opt(("--test-sizes",), "comma-separated test sizes in bytes",
            {"default": ",".join(map(str, TEST_SIZES))}),
        Opt(("--n-train",), "training replicates per size", {"type": int, "default": 10}),
        Opt(("--n-test",), "test samples per size and category", {"type": int, "default": 100}),
    ), cmd_langid_suite, formats=False),
    Command(("langid", "eval"), "error rate and cross entropy over an evaluation suite", (
        Opt(("--suite",), "suite JSON from langid suite", {"required": True}),
        Opt(("--orders",), "comma-separated model orders", {"default": None}),
        Opt(("--alpha",), "Dirichlet prior weight", {"type": float, "default": 0.2}),
        Opt(("--train-sizes",), "subset of the suite's training sizes", {"default": None}),
        Opt(("--test-sizes",), "subset of the suite's test sizes", {"default": None}),
        Opt(("--default-label",), "label that wins score ties", {"default": None}),
        Opt(("--replicates",), "bootstrap replicates for the error band", {"type": int, "default": 200}),
    ), cmd_langid_eval),
    Command(("route", "select"), "select routing query terms from judged documents", (
        Opt(("--rel",), "directory of relevant documents", {"required": True}),
        Opt(("--nonrel",), "directory of non-relevant documents", {"required": True}),
        ROUTE_THRESHOLD, BINARIZE,
    ), cmd_route_select),
    Command(("route", "rank"), "rank documents against a routing query", (
        Opt(("--query",), "query TSV from route select, or one term per line", {"required": True}),
        Opt(("docs",), "document files; the path is the document id", {"nargs": "+"}),
    ), cmd_route_rank),
    Command(("keyterms",), "terms over-represented in TARGET relative to REFERENCE", (
        Opt(("target",), "target text file"),
        Opt(("reference",), "reference text file"),
        ROUTE_THRESHOLD, BINARIZE,
    ), cmd_keyterms),
    Command(("posinfo",), "information content per position with bootstrap bands", RECORD_OPTS + (
        Opt(("--positions",), "positions to report, a..b or a,b,c", {"default": "-30..29"}),
        Opt(("--replicates",), "bootstrap replicates", {"type": int, "default": 1000}),
        Opt(("--level",), "band coverage", {"type": float, "default": 0.95}),
        Opt(("--relative",), "measure against the pooled composition instead of uniform",
            {"action": "store_true"}),
    ), cmd_posinfo),
    Command(("paircorr",), "G2 for every left/right position pair", RECORD_OPTS + REGION_OPTS, cmd_paircorr),
    Command(("structure",), "compare pair G2 values with chi-square", RECORD_OPTS + REGION_OPTS + (
        Opt(("--control",), "re-pair flanks at random (seeded) before testing", {"action": "store_true"}),
    ), cmd_structure),
    Command(("dedup",), "flag near-duplicate sequences", (
        Opt(("fasta",), "FASTA file of sequences"),
        Opt(("--identity",), "identity at or above which records are duplicates", {"type": float, "default": 0.95}),
        Opt(("--nmer",), "n-mer length for the signature screen", {"type": int, "default": 8}),
    ), cmd_dedup),
    Command(("mm", "grow"), "grow a mixed-order Markov model", (
        Opt(("corpus",), "training text file"),
        Opt(("--epsilon",), "minimum G2 gain per added context (default: chi2 critical value at p=0.001)",
            {"type": float, "default": None}),
        Opt(("--mode",), "row comparison for the split statistic", {"choices": MODES, "default": "disjoint"}),
        Opt(("--max-order",), "longest context allowed", {"type": int, "default": None}),
        Opt(("--alphabet",), "bytes, or the characters seen in the corpus",
            {"choices": ("bytes", "symbols"), "default": "bytes"}),
        Opt(("--alpha",), "store quasi-Bayes smoothing with this prior weight", {"type": float, "default": None}),
    ), cmd_mm_grow, formats=False),
    Command(("mm", "perplexity"), "perplexity of a text under a mixed-order model", (
        Opt(("model",), "model JSON from mm grow"),
        Opt(("text",), "text file ('-' for stdin)"),
        Opt(("--alpha",), "apply quasi-Bayes smoothing with this prior weight", {"type": float, "default": None}),
    ), cmd_mm_perplexity),
)


def command_opts(cmd: Command) -> tuple[Opt, ...]:
    common = (SEED, FORMAT, OUTPUT) if cmd.formats else (SEED, OUTPUT)
    return cmd.opts + common


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="surprise", description="Likelihood-ratio statistics for text and sequences.")
    parser.add_argument("--version", action="version", version=f"surprise {__version__}")
    groups = {(): parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)}
    nodes = {}
    for cmd in COMMANDS:
        for depth in range(1, len(cmd.path)):
            prefix = cmd.path[:depth]
            if prefix not in nodes:
                node = groups[prefix[:-1]].add_parser(prefix[-1], help=f"{prefix[-1]} subcommands")
                nodes[prefix] = node
                groups[prefix] = node.add_subparsers(dest="sub_" + "_".join(prefix), metavar="SUBCOMMAND",
                                                     parser_class=_Parser)
                groups[prefix].required = True
        sub = groups[cmd.path[:-1]].add_parser(cmd.path[-1], help=cmd.help, description=cmd.help)
        for opt in command_opts(cmd):
            sub.add_argument(*opt.flags, help=opt.help, **opt.kwargs)
        sub.set_defaults(_command=cmd)
    return parser


def header(cmd: Command, args, notes: dict) -> list[str]:
    flags = []
    for opt in command_opts(cmd):
        if opt in (SEED, OUTPUT):
            continue
        value = getattr(args, opt.dest)
        if isinstance(value, list):
            value = ",".join(map(str, value))
        flags.append(f"{opt.dest}={value}")
    lines = [f"# surprise {__version__}", f"# command: {' '.join(cmd.path)}", f"# seed: {args.seed}",
             f"# flags: {' '.join(sorted(flags))}"]
    lines += [f"# {k}: {v}" for k, v in notes.items()]
    return lines


def provenance(cmd: Command, args) -> dict:
    return {"tool": "surprise", "version": __version__, "command": " ".join(cmd.path), "seed": args.seed,
            "flags": {o.dest: getattr(args, o.dest) for o in command_opts(cmd) if o not in (SEED, OUTPUT)}}


def emit(cmd: Command, args, result) -> bytes:
    if isinstance(result, Model):
        data = dict(result.data, provenance=provenance(cmd, args))
        return (json.dumps(data, sort_keys=True, indent=1) + "\n").encode()
    if args.format == "json":
        data = {"provenance": provenance(cmd, args), "result": result.payload, "notes": result.notes}
        return (json.dumps(data, sort_keys=True, indent=1, default=str) + "\n").encode()
    lines = header(cmd, args, result.notes)
    if result.columns:
        lines.append("# columns: " + "\t".join(result.columns))
    lines += result.rows
    return ("\n".join(lines) + "\n").encode()


def write_output(path: str | None, data: bytes) -> None:
    if path is None or path == "-":
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
        return
    try:
        Path(path).write_bytes(data)
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc.strerror or exc}") from None


RANGE_FLAGS = ("--positions", "--left", "--right")


def _join_ranges(argv) -> list[str]:
    """Glue range flags to their values so "--left -30..-1" is not read as
    two options."""
    out, it = [], iter(argv)
    for token in it:
        if token in RANGE_FLAGS:
            out.append(f"{token}={next(it, '')}")
        else:
            out.append(token)
    return out


def dispatch(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(_join_ranges(argv))
        cmd = getattr(args, "_command", None)
        if cmd is None:
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        write_output(args.output, emit(cmd, args, cmd.handler(args)))
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def main(argv=None) -> None:
    threads = os.environ.get("SURPRISE_THREADS")
    if threads is not None and not threads.isdigit():
        print("error: SURPRISE_THREADS must be a positive integer", file=sys.stderr)
        sys.exit(EXIT_USAGE)
    sys.exit(dispatch(sys.argv[1:] if argv is None else argv))


if __name__ == "__main__":
    main()
