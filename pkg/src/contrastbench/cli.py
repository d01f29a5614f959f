"""Command-line entry point wiring all modules.

Subcommands: ingest, lexicon-stats, build, contrast, ranks, ledger.
Exit codes: 0 success, 1 validation error, 2 I/O error, 3 invariant or
audit violation. `--config` loads flat key=value text overridden by flags.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import fields
from pathlib import Path

from . import __version__
from .budget import BudgetLedger, audit as audit_ledger, render_audit
from .contrast import (
    distinguishability,
    gloss_similarity_report,
    inter_class_similarity,
    intra_class_similarity,
    render_rows,
    summary_table,
)
from .corpus import open_corpus
from .embeddings import MockProvider, read_sidecar, stable_text_key, store_from_texts
from .errors import AuditViolation, InputError, ValidationError
from .lexicon import dataset_pair_stats, load_lexicon, load_reference, subtree_stats
from .pipeline import (
    BlocklistNsfwClassifier,
    MANIFEST_FORMAT,
    PipelineConfig,
    PipelineStores,
    read_manifest,
    run_pipeline,
    verify_manifest,
    write_manifest,
)
from .ranks import AccuracyTable, compare_protocols, render_rank_report

FORMAT_VERSIONS = f"manifest={MANIFEST_FORMAT} sidecar=EMBSIDE1 ledger=budget-ledger-v1"


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems as ValidationError (exit 1)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise ValidationError(message)


def load_config_file(path: Path | str) -> dict[str, str]:
    """Flat key=value config; '#' comments and blank lines are ignored."""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"config file not found: {path}")
    values: dict[str, str] = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValidationError(f"{path.name}:{lineno}: expected key=value")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def _positive_jobs(raw: str) -> int:
    jobs = int(raw)
    if jobs < 1:
        raise argparse.ArgumentTypeError("jobs must be >= 1")
    return jobs


def _write_output(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


# -- subcommand handlers --------------------------------------------------


def _cmd_ingest(args) -> int:
    stream = open_corpus(args.corpus, args.format)
    for _ in stream:
        pass
    print(f"records={stream.count} skipped={stream.skipped}")
    return 0


def _read_class_list(path: Path | str) -> list[str]:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"class list not found: {path}")
    return [
        line.strip()
        for line in path.read_text(encoding="utf-8").splitlines()
        if line.strip() and not line.startswith("#")
    ]


def _cmd_lexicon_stats(args) -> int:
    graph, _ = load_lexicon(args.lexicon)
    classes_a = _read_class_list(args.classes)
    if args.classes_b:
        classes_b = _read_class_list(args.classes_b)
        stats_a, stats_b = dataset_pair_stats(graph, classes_a, classes_b)
        rows = summary_table(stats_a, stats_b)
        text = render_rows(
            [(label, a, b, "" if ratio is None else ratio) for label, a, b, ratio in rows],
            header=("stat", "a", "b", "ratio"),
            csv=args.csv,
        )
    else:
        stats = subtree_stats(graph, classes_a)
        rows = [
            (name, getattr(stats, name))
            for name in (
                "node_count",
                "edge_count",
                "min_depth",
                "median_depth",
                "max_depth",
                "density",
                "modularity",
            )
        ]
        text = render_rows(rows, header=("stat", "value"), csv=args.csv)
    _write_output(text, args.out)
    return 0


_CONFIG_FIELD_NAMES = tuple(f.name for f in fields(PipelineConfig))
_PATH_KEYS = (
    "corpus",
    "lexicon",
    "reference",
    "sidecar_captions",
    "sidecar_glosses",
    "sidecar_class_names",
    "sidecar_images",
    "blocklist",
)


def _cmd_build(args) -> int:
    settings: dict[str, str] = {}
    if args.config:
        settings.update(load_config_file(args.config))
    for key in (*_CONFIG_FIELD_NAMES, *_PATH_KEYS, "mock_seed", "mock_dim"):
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = str(value)

    config = PipelineConfig.from_mapping(
        {k: v for k, v in settings.items() if k in _CONFIG_FIELD_NAMES}
    )
    for key in ("corpus", "lexicon", "reference"):
        if key not in settings:
            raise ValidationError(f"build needs {key} (flag or config)")

    records = list(open_corpus(settings["corpus"]))
    graph, index = load_lexicon(settings["lexicon"])
    reference = load_reference(settings["reference"])

    if "mock_seed" in settings:
        provider = MockProvider(
            seed=int(settings["mock_seed"]), dim=int(settings.get("mock_dim", 128))
        )
        stores = PipelineStores(
            captions=store_from_texts(provider, ((r.record_id, r.caption) for r in records)),
            glosses=store_from_texts(
                provider,
                ((stable_text_key(s), graph.synset(s).gloss) for s in graph.synset_ids()),
            ),
            class_names=store_from_texts(
                provider,
                ((stable_text_key(s), graph.synset(s).lemmas[0]) for s in graph.synset_ids()),
            ),
            # Image embeddings are stand-ins built from the caption text.
            images=store_from_texts(
                provider,
                ((r.record_id, r.caption) for r in records),
                source_tag=provider.source_tag + ",role=image-stand-in",
            ),
        )
    else:
        for key in ("sidecar_captions", "sidecar_glosses", "sidecar_class_names", "sidecar_images"):
            if key not in settings:
                raise ValidationError(f"build needs {key} (flag or config) or mock_seed")
        stores = PipelineStores(
            captions=read_sidecar(settings["sidecar_captions"]),
            glosses=read_sidecar(settings["sidecar_glosses"]),
            class_names=read_sidecar(settings["sidecar_class_names"]),
            images=read_sidecar(settings["sidecar_images"]),
        )

    blocked: frozenset[str] = frozenset()
    if "blocklist" in settings:
        blocklist_path = Path(settings["blocklist"])
        if not blocklist_path.is_file():
            raise InputError(f"blocklist not found: {blocklist_path}")
        blocked = frozenset(blocklist_path.read_text(encoding="utf-8").split())

    manifest = run_pipeline(
        records,
        graph,
        index,
        reference,
        stores,
        config,
        nsfw_classifier=BlocklistNsfwClassifier(blocked),
    )
    records_by_id = {r.record_id: r for r in records}
    violations = verify_manifest(
        manifest, graph=graph, reference=reference, records_by_id=records_by_id
    )
    if violations:
        for violation in violations:
            print(f"violation: {violation}", file=sys.stderr)
        raise AuditViolation(f"manifest failed {len(violations)} invariant check(s)")
    write_manifest(manifest, args.out)
    for warning in manifest.provenance.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    print(
        f"classes={len(manifest.classes)}"
        f" drops={sorted(manifest.provenance.drop_counts.items())}"
        f" out={args.out}"
    )
    return 0


def _cmd_contrast(args) -> int:
    if args.report in ("intra", "inter", "gloss"):
        manifest = read_manifest(args.manifest)
    if args.report == "intra":
        images = read_sidecar(args.sidecar_images)
        report = intra_class_similarity(manifest, images, pair_cap=args.pair_cap, seed=args.seed)
        rows = [(r.synset_id, "" if r.mean is None else r.mean, r.pair_count) for r in report.rows]
        rows.append(("summary:min/median/max", f"{report.minimum!r}/{report.median!r}/{report.maximum!r}", ""))
        text = render_rows(rows, header=("class", "mean_similarity", "pairs"), csv=args.csv)
    elif args.report == "inter":
        images = read_sidecar(args.sidecar_images)
        report = inter_class_similarity(
            manifest,
            images,
            max_class_pairs=args.max_class_pairs,
            pair_cap=args.pair_cap,
            seed=args.seed,
        )
        rows = [(r.synset_a, r.synset_b, r.mean, r.pair_count) for r in report.rows]
        text = render_rows(rows, header=("class_a", "class_b", "mean_similarity", "pairs"), csv=args.csv)
    elif args.report == "gloss":
        rows, warnings = gloss_similarity_report(manifest)
        for warning in warnings:
            print(f"warning: {warning}", file=sys.stderr)
        text = render_rows(
            [(r.synset_id, r.minimum, r.q25, r.median, r.q75, r.maximum, r.count) for r in rows],
            header=("class", "min", "q25", "median", "q75", "max", "count"),
            csv=args.csv,
        )
    else:  # distinguish
        store_a = read_sidecar(args.sidecar_a)
        store_b = read_sidecar(args.sidecar_b)
        result = distinguishability(
            store_a,
            store_b,
            n_per_class=args.n_per_class,
            trials=args.trials,
            seed=args.seed,
            n_test_per_class=args.n_test_per_class,
            epochs=args.epochs,
            learning_rate=args.learning_rate,
        )
        rows = [(i, acc) for i, acc in enumerate(result.per_trial)]
        rows.append(("mean", result.mean_accuracy))
        rows.append(("std", result.std_accuracy))
        text = render_rows(rows, header=("trial", "accuracy"), csv=args.csv)
    _write_output(text, args.out)
    return 0


def _cmd_ranks(args) -> int:
    table = AccuracyTable.read(args.table)
    report = compare_protocols(table, args.x, args.y, baseline=args.baseline)
    _write_output(render_rank_report(report, csv=args.csv), args.out)
    return 0


def _cmd_ledger(args) -> int:
    if args.ledger_command == "init":
        space_text = Path(args.space_file).read_text(encoding="utf-8")
        BudgetLedger.create(
            args.path, models=args.models.split(","), space_text=space_text, budget=args.budget
        )
        print(f"ledger initialized at {args.path}")
        return 0
    if args.ledger_command == "draw":
        ledger = BudgetLedger.load(args.path)
        trial = ledger.draw_trial(args.model, args.seed)
        assignment = " ".join(f"{k}={v}" for k, v in trial.assignment.items())
        print(f"{trial.trial_id} model={trial.model} version={trial.space_version} {assignment}")
        return 0
    if args.ledger_command == "report":
        ledger = BudgetLedger.load(args.path)
        ledger.report_result(
            args.trial, args.outcome, accuracy=args.accuracy, reason=args.reason
        )
        print(f"{args.trial} -> {args.outcome}")
        return 0
    if args.ledger_command == "expand":
        ledger = BudgetLedger.load(args.path)
        space_text = Path(args.space_file).read_text(encoding="utf-8")
        version = ledger.request_expansion(space_text, args.evidence.split(","))
        print(f"search space expanded to version {version}")
        return 0
    # audit
    report = audit_ledger(args.path)
    sys.stdout.write(render_audit(report))
    if not report.ok:
        raise AuditViolation(f"{len(report.violations)} ledger violation(s)")
    return 0


# -- parser ------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="contrastbench", description=__doc__)
    parser.add_argument(
        "--version", action="version", version=f"contrastbench {__version__} ({FORMAT_VERSIONS})"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="stream a corpus file and report counts")
    p.add_argument("--corpus", required=True)
    p.add_argument("--format", default="line-delimited-records")
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("lexicon-stats", help="subtree statistics for class lists")
    p.add_argument("--lexicon", required=True)
    p.add_argument("--classes", required=True, help="file with one synset id per line")
    p.add_argument("--classes-b", help="second class list: emit the paired summary table")
    p.add_argument("--csv", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_lexicon_stats)

    p = sub.add_parser("build", help="run the eight-stage pipeline to a manifest")
    p.add_argument("--config", help="key=value config file; flags override")
    for key in _PATH_KEYS:
        p.add_argument(f"--{key.replace('_', '-')}", dest=key)
    for name in _CONFIG_FIELD_NAMES:
        p.add_argument(f"--{name.replace('_', '-')}", dest=name)
    p.add_argument("--mock-seed", dest="mock_seed", type=int, help="build mock sidecars in-process")
    p.add_argument("--mock-dim", dest="mock_dim", type=int)
    p.add_argument("--jobs", type=_positive_jobs, default=1, help="worker bound; output is independent of N")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_build)

    p = sub.add_parser("contrast", help="dataset difference reports")
    p.add_argument("--report", required=True, choices=("intra", "inter", "gloss", "distinguish"))
    p.add_argument("--manifest")
    p.add_argument("--sidecar-images", dest="sidecar_images")
    p.add_argument("--sidecar-a", dest="sidecar_a")
    p.add_argument("--sidecar-b", dest="sidecar_b")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--pair-cap", dest="pair_cap", type=int, default=50_000)
    p.add_argument("--max-class-pairs", dest="max_class_pairs", type=int, default=1000)
    p.add_argument("--n-per-class", dest="n_per_class", type=int, default=100)
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--n-test-per-class", dest="n_test_per_class", type=int, default=100)
    p.add_argument("--epochs", type=int, default=300)
    p.add_argument("--learning-rate", dest="learning_rate", type=float, default=1.0)
    p.add_argument("--jobs", type=_positive_jobs, default=1)
    p.add_argument("--csv", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_contrast)

    p = sub.add_parser("ranks", help="ranking agreement between two accuracy columns")
    p.add_argument("--table", required=True)
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--baseline")
    p.add_argument("--csv", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_ranks)

    p = sub.add_parser("ledger", help="tuning-budget ledger operations")
    ledger_sub = p.add_subparsers(dest="ledger_command", required=True)
    lp = ledger_sub.add_parser("init")
    lp.add_argument("--path", required=True)
    lp.add_argument("--models", required=True, help="comma-separated model names")
    lp.add_argument("--budget", type=int, required=True)
    lp.add_argument("--space-file", dest="space_file", required=True)
    lp = ledger_sub.add_parser("draw")
    lp.add_argument("--path", required=True)
    lp.add_argument("--model", required=True)
    lp.add_argument("--seed", type=int, required=True)
    lp = ledger_sub.add_parser("report")
    lp.add_argument("--path", required=True)
    lp.add_argument("--trial", required=True)
    lp.add_argument("--outcome", required=True, choices=("trained", "failed_to_train"))
    lp.add_argument("--accuracy", type=float)
    lp.add_argument("--reason")
    lp = ledger_sub.add_parser("expand")
    lp.add_argument("--path", required=True)
    lp.add_argument("--space-file", dest="space_file", required=True)
    lp.add_argument("--evidence", required=True, help="comma-separated trial ids")
    lp = ledger_sub.add_parser("audit")
    lp.add_argument("--path", required=True)
    p.set_defaults(func=_cmd_ledger)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2
    except AuditViolation as exc:
        print(f"audit violation: {exc}", file=sys.stderr)
        return 3


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
