"""Command-line front end: ``emfprint <subcommand> ...``.

Options left unset on the command line fall back to an ``EMF_<NAME>``
environment variable (for example ``EMF_REGISTRY`` or ``EMF_NU``) and then to
the built-in default. Results go to ``--out`` files or standard output;
progress and errors go to standard error.

Exit status: 0 success (``classify``: Authorized), 1 ``classify`` Rejected,
2 usage, configuration, parse or I/O errors, 3 training failures.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Sequence

import numpy as np

from . import evaluation, ranking, registry, synth
from .errors import (
    CorruptProfile,
    DimensionMismatch,
    DuplicateLabel,
    EmfError,
    IoFailure,
    LayoutBandMismatch,
    MalformedRecord,
    OutOfBandFrequency,
    UnsupportedFormatVersion,
)
from .features import (
    FeatureVector,
    RegionLayout,
    feature_names,
    features_from_trace,
    normalize,
    read_feature_table,
    window_trace,
    write_feature_table,
    write_heatmap,
)
from .ocsvm import Verdict, decide, score, train
from .trace import SpectralTrace, detect_boot_onset, read_trace

log = logging.getLogger("emfprint")

EXIT_OK = 0
EXIT_REJECTED = 1
EXIT_USAGE = 2
EXIT_TRAINING = 3

ENV_PREFIX = "EMF_"


def _gamma(text: str) -> float | None:
    return None if text.strip().lower() in ("", "auto") else float(text)


def _method(text: str) -> str:
    text = text.strip().lower()
    if text not in ("mim", "jmi"):
        raise ValueError(f"unknown method {text!r}")
    return text


# dest -> (parser for environment text, default)
DEFAULTS = {
    "registry": (str, "registry"),
    "window_ms": (float, 1080.0),
    "time_splits": (int, 4),
    "frequency_splits": (int, 15),
    "nu": (float, 0.1),
    "gamma": (_gamma, None),
    "tol": (float, 1e-4),
    "threshold": (float, None),
    "fpr_cap": (float, 0.01),
    "folds": (int, 10),
    "seed": (int, 0),
    "bins": (int, ranking.DEFAULT_BINS),
    "method": (_method, "mim"),
}


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_USAGE):
        super().__init__(message)
        self.code = code


def resolve_defaults(args: argparse.Namespace, environ=os.environ) -> argparse.Namespace:
    """Fill options left at ``None``: environment first, then the default."""
    for dest, (parse, default) in DEFAULTS.items():
        if not hasattr(args, dest) or getattr(args, dest) is not None:
            continue
        key = ENV_PREFIX + dest.upper()
        if key in environ:
            try:
                value = parse(environ[key])
            except ValueError as exc:
                raise CliError(f"bad {key}={environ[key]!r}: {exc}") from exc
        else:
            value = default
        setattr(args, dest, value)
    return args


def validate(args: argparse.Namespace) -> None:
    checks = [
        ("nu", lambda v: 0 < v <= 1, "must lie in (0, 1]"),
        ("gamma", lambda v: v is None or v > 0, "must be positive"),
        ("tol", lambda v: v > 0, "must be positive"),
        ("window_ms", lambda v: v > 0, "must be positive"),
        ("time_splits", lambda v: v >= 1, "must be >= 1"),
        ("frequency_splits", lambda v: v >= 1, "must be >= 1"),
        ("fpr_cap", lambda v: 0 <= v <= 1, "must lie in [0, 1]"),
        ("folds", lambda v: v >= 2, "must be >= 2"),
        ("bins", lambda v: v >= 2, "must be >= 2"),
    ]
    for dest, ok, message in checks:
        if hasattr(args, dest) and not ok(getattr(args, dest)):
            raise CliError(f"--{dest.replace('_', '-')} {message} (got {getattr(args, dest)!r})")
    if getattr(args, "threshold", None) is not None and getattr(args, "thresholds", None):
        raise CliError("--threshold and --thresholds are mutually exclusive")


# ---------------------------------------------------------------- input helpers

def _read(path: Path, label: str | None = None) -> SpectralTrace:
    try:
        return read_trace(path, label=label)
    except (MalformedRecord, OutOfBandFrequency, EmfError, ValueError) as exc:
        raise CliError(f"{path}: {exc}") from exc
    except OSError as exc:
        raise CliError(f"{path}: {exc.strerror or exc}") from exc


def trace_files(paths: Sequence[str]) -> list[Path]:
    """Expand directories to their ``*.csv`` files, sorted by name."""
    out: list[Path] = []
    for p in map(Path, paths):
        if p.is_dir():
            out.extend(sorted(f for f in p.glob("*.csv") if f.name != "manifest.csv"))
        elif p.exists():
            out.append(p)
        else:
            raise CliError(f"{p}: no such file or directory")
    return out


def load_labelled_traces(root: Path) -> list[SpectralTrace]:
    """Traces of a corpus directory.

    Uses ``manifest.csv`` when present, else one sub-directory per class, else
    the ``label`` header of each file.
    """
    if not root.is_dir():
        raise CliError(f"{root}: not a directory")
    manifest = root / "manifest.csv"
    if manifest.exists():
        try:
            with open(manifest, "r", encoding="utf-8", newline="") as fh:
                rows = list(csv.DictReader(fh))
        except OSError as exc:
            raise CliError(f"{manifest}: {exc}") from exc
        if rows and not {"file", "label"} <= set(rows[0]):
            raise CliError(f"{manifest}: needs file and label columns")
        return [_read(root / row["file"], row["label"]) for row in rows]
    subdirs = sorted(d for d in root.iterdir() if d.is_dir())
    if subdirs:
        return [_read(f, d.name) for d in subdirs for f in sorted(d.glob("*.csv"))]
    traces = [_read(f) for f in trace_files([str(root)])]
    missing = [t.source_id for t in traces if not t.label]
    if missing:
        raise CliError(f"{root}: no label for {missing[0]} (use a manifest or class sub-directories)")
    return traces


def layout_for(traces: Sequence[SpectralTrace], args) -> RegionLayout:
    bands = {t.format.band for t in traces}
    if len(bands) != 1:
        raise CliError(f"traces mix instrument bands {sorted(bands)}")
    return RegionLayout(args.window_ms, bands.pop(), args.time_splits, args.frequency_splits)


def extract_all(traces: Sequence[SpectralTrace], layout: RegionLayout, align: bool,
                code: int = EXIT_USAGE) -> list[FeatureVector]:
    out = []
    for t in traces:
        try:
            out.append(features_from_trace(t, layout, align=align))
        except (EmfError, ValueError) as exc:
            raise CliError(f"{t.source_id}: {exc}", code) from exc
    return out


def load_features(path: Path, args) -> tuple[list[str], list[str], np.ndarray, RegionLayout | None]:
    """Feature table file or corpus directory -> ids, labels, matrix, layout."""
    if path.is_file():
        try:
            with open(path, "r", encoding="utf-8", newline="") as fh:
                ids, labels, X = read_feature_table(fh)
        except (OSError, ValueError) as exc:
            raise CliError(f"{path}: {exc}") from exc
        return ids, labels, X, None
    traces = load_labelled_traces(path)
    if not traces:
        raise CliError(f"{path}: no traces")
    layout = layout_for(traces, args)
    log.info("extracting %d features from %d traces", layout.feature_count, len(traces))
    vectors = extract_all(traces, layout, not args.no_align)
    return ([fv.trace_source for fv in vectors], [fv.label or "" for fv in vectors],
            np.vstack([fv.values for fv in vectors]), layout)


@contextmanager
def output(path: str | None):
    """Text stream for ``path``; ``-`` or ``None`` means standard output."""
    if path in (None, "-"):
        yield sys.stdout
        return
    target = Path(path)
    try:
        if target.parent != Path(""):
            target.parent.mkdir(parents=True, exist_ok=True)
        buf = io.StringIO()
        yield buf
        tmp = target.with_name(target.name + ".tmp")
        with open(tmp, "w", encoding="utf-8", newline="") as fh:
            fh.write(buf.getvalue())
        os.replace(tmp, target)
    except OSError as exc:
        raise CliError(f"{target}: {exc.strerror or exc}") from exc


def read_thresholds(path: str) -> dict[str, float]:
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            rows = list(csv.DictReader(fh))
        return {row["label"]: float(row["threshold"]) for row in rows}
    except (OSError, KeyError, ValueError, TypeError) as exc:
        raise CliError(f"{path}: cannot read thresholds ({exc})") from exc


def write_thresholds(stream, thresholds: dict[str, float]) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["label", "threshold"])
    for label, value in thresholds.items():
        writer.writerow([label, repr(float(value))])


# ---------------------------------------------------------------- subcommands

def cmd_train(args) -> int:
    files = trace_files(args.traces)
    if len(files) < 2:
        raise CliError(f"need ≥ 2 traces, got {len(files)}", EXIT_TRAINING)
    traces = [_read(f, args.label) for f in files]
    layout = layout_for(traces, args)
    formats = {t.format for t in traces}
    if len(formats) != 1:
        raise CliError("training traces come from different instrument formats")
    vectors = extract_all(traces, layout, not args.no_align, EXIT_TRAINING)
    X = np.vstack([fv.values for fv in vectors])
    try:
        model = train(X, nu=args.nu, gamma=args.gamma, tol=args.tol, class_label=args.label)
        threshold = None
        if not args.no_calibrate and len(X) >= 3:
            threshold = evaluation.calibrate_threshold(X, nu=args.nu, gamma=args.gamma, tol=args.tol)
    except (EmfError, ValueError, ArithmeticError) as exc:
        raise CliError(f"training failed: {exc}", EXIT_TRAINING) from exc
    profile = registry.DeviceProfile(args.label, model, layout, formats.pop(),
                                     training_trace_ids=tuple(t.source_id for t in traces),
                                     threshold=threshold)
    try:
        name = registry.store_profile(args.registry, profile, replace=args.replace)
    except DuplicateLabel as exc:
        raise CliError(f"DuplicateLabel: {exc} (use --replace)", EXIT_TRAINING) from exc
    except IoFailure as exc:
        raise CliError(str(exc)) from exc
    log.info("stored %s in %s", name, args.registry)
    print(f"label={args.label}")
    print(f"traces={len(X)}")
    print(f"threshold={'none' if threshold is None else repr(threshold)}")
    return EXIT_OK


def cmd_classify(args) -> int:
    try:
        profiles = registry.load_all(args.registry)
    except (IoFailure, CorruptProfile, UnsupportedFormatVersion) as exc:
        raise CliError(str(exc)) from exc
    if args.strict_label is not None:
        profiles = [p for p in profiles if p.class_label == args.strict_label]
        if not profiles:
            raise CliError(f"no profile labelled {args.strict_label!r}")
    if not profiles:
        raise CliError("no profiles in registry")
    table = read_thresholds(args.thresholds) if args.thresholds else None
    trace = _read(Path(args.trace))

    cache: dict[RegionLayout, np.ndarray] = {}
    authorized = False
    for p in profiles:
        if p.layout not in cache:
            try:
                cache[p.layout] = features_from_trace(trace, p.layout, align=not args.no_align).values
            except (LayoutBandMismatch, EmfError, ValueError) as exc:
                raise CliError(f"{args.trace}: profile {p.class_label!r}: {exc}") from exc
        if table is not None:
            if p.class_label not in table:
                raise CliError(f"{args.thresholds}: no threshold for {p.class_label!r}")
            thr = table[p.class_label]
        elif args.threshold is not None:
            thr = args.threshold
        else:
            thr = p.threshold if p.threshold is not None else 0.0
        try:
            s = score(p.model, cache[p.layout])
        except DimensionMismatch as exc:
            raise CliError(f"profile {p.class_label!r}: {exc}") from exc
        verdict = decide(s, thr)
        authorized |= verdict is Verdict.AUTHORIZED
        print(f"{p.class_label} {s!r} {verdict}")
    overall = Verdict.AUTHORIZED if authorized else Verdict.REJECTED
    log.info("overall %s", overall)
    return EXIT_OK if authorized else EXIT_REJECTED


def cmd_evaluate(args) -> int:
    ids, labels, X, _ = load_features(Path(args.input), args)
    columns = None
    if args.features:
        try:
            with open(args.features, "r", encoding="utf-8", newline="") as fh:
                columns = ranking.read_ranking(fh)
        except (OSError, KeyError, ValueError) as exc:
            raise CliError(f"{args.features}: {exc}") from exc
        if columns.size == 0 or columns.max() >= X.shape[1] or columns.min() < 0:
            raise CliError(f"{args.features}: feature indices outside [0, {X.shape[1]})")
    svm = dict(nu=args.nu, gamma=args.gamma, tol=args.tol)
    Xe = X if columns is None else X[:, columns]
    log.info("cross-validating %d samples x %d features, k=%d", *Xe.shape, args.folds)
    try:
        matrix = evaluation.cross_validate(Xe, labels, args.folds, seed=args.seed, sample_ids=ids, **svm)
    except (EmfError, ValueError) as exc:
        raise CliError(str(exc)) from exc
    if args.per_class:
        thr = evaluation.per_class_thresholds(matrix, args.fpr_cap)
        report = evaluation.tpr_fpr(matrix, thr)
    else:
        _, report = evaluation.best_common_threshold(matrix, args.fpr_cap)
    report.fold_count = args.folds
    report.seed = args.seed

    out = Path(args.out)
    with output(str(out / "scores.csv")) as fh:
        evaluation.write_score_matrix(fh, matrix)
    if args.per_class:
        with output(str(out / "thresholds.csv")) as fh:
            write_thresholds(fh, thr)
    if columns is not None:
        k_values = args.k or [len(columns)]
        rows = ranking.evaluate_top_k(X, labels, columns, k_values, fpr_cap=args.fpr_cap,
                                      folds=args.folds, seed=args.seed, **svm)
        with output(str(out / "topk.csv")) as fh:
            ranking.write_top_k_table(fh, rows)
        with output("-") as fh:
            ranking.write_top_k_table(fh, rows)
    if args.latency:
        models = [train(Xe[[y == c for y in labels]], class_label=c, **svm)
                  for c in matrix.class_labels]
        report.timing = evaluation.measure_decision_latency(models, list(Xe))
    summary = evaluation.format_summary(report.summary())
    with output(str(out / "summary.txt")) as fh:
        fh.write(summary)
    sys.stdout.write(summary)
    return EXIT_OK


def cmd_rank(args) -> int:
    _, labels, X, layout = load_features(Path(args.input), args)
    k = args.k if args.k is not None else X.shape[1]
    if not 1 <= k <= X.shape[1]:
        raise CliError(f"--k must lie in [1, {X.shape[1]}]")
    log.info("ranking %d features by %s", X.shape[1], args.method)
    ranked = ranking.rank_features(X, labels, args.method, args.bins,
                                   k=k if args.method == "jmi" else None)
    if layout is None and X.shape[1] == 5 * (1 + args.time_splits * (1 + args.frequency_splits)):
        layout = RegionLayout(args.window_ms, (0.0, 1.0), args.time_splits, args.frequency_splits)
    names = feature_names(layout) if layout is not None else None
    with output(args.out) as fh:
        ranking.write_ranking(fh, ranked, k, names)
    return EXIT_OK


SCENARIOS = {"1": synth.scenario1_spec, "2": synth.scenario2_spec, "firmware": synth.firmware_spec}


def cmd_synth(args) -> int:
    make = SCENARIOS[args.scenario]
    kwargs = {"seed": args.seed}
    if args.traces_per_class is not None:
        kwargs["traces_per_class"] = args.traces_per_class
    if args.classes is not None:
        kwargs["variants" if args.scenario == "firmware" else "classes"] = args.classes
    try:
        spec = make(**kwargs)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    log.info("synthesizing %d x %d traces", len(spec.archetypes), spec.traces_per_class)
    entries = synth.generate_corpus(spec)
    try:
        root = synth.write_corpus(args.out, entries)
    except OSError as exc:
        raise CliError(f"{args.out}: {exc}") from exc
    layout = synth.scenario_layout(spec)
    log.info("wrote %s (suggested --window-ms %r)", root, layout.window_duration)
    return EXIT_OK


def cmd_features(args) -> int:
    path = Path(args.input)
    if path.is_dir():
        traces = load_labelled_traces(path)
    else:
        traces = [_read(path)]
    if not traces:
        raise CliError(f"{path}: no traces")
    vectors = extract_all(traces, layout_for(traces, args), not args.no_align)
    with output(args.out) as fh:
        write_feature_table(fh, vectors)
    return EXIT_OK


def cmd_heatmap(args) -> int:
    trace = _read(Path(args.trace))
    start = float(trace.timestamps[0])
    if not args.no_align:
        start = max(start, detect_boot_onset(trace))
    try:
        windowed = window_trace(trace, start, args.window_ms)
    except (EmfError, ValueError) as exc:
        raise CliError(f"{args.trace}: {exc}") from exc
    with output(args.out) as fh:
        write_heatmap(fh, normalize(windowed))
    return EXIT_OK


# ---------------------------------------------------------------- parser

def _layout_options(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("layout")
    g.add_argument("--window-ms", type=float, help="window length after the boot onset (default 1080)")
    g.add_argument("--time-splits", type=int, help="time regions T (default 4)")
    g.add_argument("--frequency-splits", type=int, help="frequency sub-bands per time region F (default 15)")
    g.add_argument("--no-align", action="store_true", help="start the window at the first sweep")


def _svm_options(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("one-class SVM")
    g.add_argument("--nu", type=float, help="outlier fraction bound (default 0.1)")
    g.add_argument("--gamma", type=_gamma, help="RBF width, or 'auto' (default)")
    g.add_argument("--tol", type=float, help="SMO stopping gap (default 1e-4)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="emfprint", description=__doc__.split("\n\n")[0])
    parser.add_argument("-q", "--quiet", action="store_true", help="only report errors")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    # -q is also accepted after the subcommand; SUPPRESS keeps the top-level value otherwise
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-q", "--quiet", action="store_true", default=argparse.SUPPRESS,
                        help="only report errors")

    p = sub.add_parser("train", parents=[common], help="train and store a device profile")
    p.add_argument("traces", nargs="+", help="trace files or directories of *.csv traces")
    p.add_argument("--label", required=True)
    p.add_argument("--registry")
    p.add_argument("--replace", action="store_true", help="overwrite an existing profile")
    p.add_argument("--no-calibrate", action="store_true",
                   help="skip the leave-one-out acceptance threshold")
    _layout_options(p)
    _svm_options(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("classify", parents=[common], help="score one trace against the registry")
    p.add_argument("trace")
    p.add_argument("--registry")
    p.add_argument("--threshold", type=float, help="one threshold for every profile")
    p.add_argument("--thresholds", help="CSV label,threshold")
    p.add_argument("--strict-label", help="only consult this profile")
    p.add_argument("--no-align", action="store_true")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("evaluate", parents=[common], help="k-fold cross-validation report")
    p.add_argument("input", help="corpus directory or feature table")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--folds", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--fpr-cap", type=float)
    p.add_argument("--per-class", action="store_true", help="one threshold per class")
    p.add_argument("--features", help="ranking file selecting the feature columns")
    p.add_argument("--k", type=int, nargs="+", help="top-k sizes for the ranking table")
    p.add_argument("--latency", action="store_true", help="also time whole-registry decisions")
    _layout_options(p)
    _svm_options(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("rank", parents=[common], help="mutual-information feature ranking")
    p.add_argument("input", help="corpus directory or feature table")
    p.add_argument("--out", default="-")
    p.add_argument("--method", type=_method)
    p.add_argument("--k", type=int, help="rows to write (default all)")
    p.add_argument("--bins", type=int)
    _layout_options(p)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("synth", parents=[common], help="write a synthetic corpus")
    p.add_argument("--scenario", choices=sorted(SCENARIOS), default="1")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--classes", type=int)
    p.add_argument("--traces-per-class", type=int)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("features", parents=[common], help="write the feature table of traces")
    p.add_argument("input", help="trace file or corpus directory")
    p.add_argument("--out", default="-")
    _layout_options(p)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("heatmap", parents=[common], help="color-band grid of the aligned window")
    p.add_argument("trace")
    p.add_argument("--out", default="-")
    _layout_options(p)
    p.set_defaults(func=cmd_heatmap)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(stream=sys.stderr, format="emfprint: %(message)s",
                        level=logging.ERROR if args.quiet else logging.INFO, force=True)
    try:
        resolve_defaults(args)
        validate(args)
        return args.func(args)
    except CliError as exc:
        print(f"emfprint {args.command}: error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
