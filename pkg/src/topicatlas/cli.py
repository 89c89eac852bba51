"""Command-line driver: train, aggregate, eval, bundle, serve, schedule.

Exit codes: 0 success, 1 domain error (one structured JSON line on stderr),
2 usage error.  Every artifact-producing run writes a RunManifest JSON next
to its primary output recording flags, seeds, input hashes and duration.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
from pathlib import Path

from . import __version__
from .aggregate import STRATEGY_ALIASES, STRATEGY_NAMES, Strategy, aggregate, batch_schedule
from .artm import SUBJECT, FitSchedule, RegularizerConfig, TopicConfig
from .corpus import Corpus, PruneConfig, Vocabulary, build_vocabulary, parse_corpus_file, project_corpus, write_corpus_file
from .errors import TopicAtlasError, VersionMismatchError
from .evalsuite import STRATEGY_LABELS, ablation_report, load_embeddings
from .explorer import build_bundle, save_bundle
from .hierarchy import HierarchicalModel, HierarchyConfig, train_hierarchy
from .modelstore import load_hierarchy, save_hierarchy
from .service import serve

logger = logging.getLogger(__name__)

CONFIG_VERSION = 1

# Single source of defaults; a config file overrides these, flags override both.
DEFAULT_CONFIG: dict[str, str] = {
    "config_version": str(CONFIG_VERSION),
    "level1.subject": "20",
    "level1.background": "1",
    "level1.seed": "0",
    "level2.subject": "60",
    "level2.background": "1",
    "level2.seed": "1",
    "pseudo_doc_weight": "1.0",
    "reg1.smooth_beta": "0.1",
    "reg1.smooth_alpha": "0.1",
    "reg1.sparse_beta": "0.05",
    "reg1.decorr_gamma": "auto",
    "reg2.smooth_beta": "0.1",
    "reg2.smooth_alpha": "0.1",
    "reg2.sparse_beta": "0.05",
    "reg2.decorr_gamma": "auto",
    "max_passes": "40",
    "rel_tol": "0.001",
    "batch_cap": "0.10",
    "min_df": "2",
    "max_df_fraction": "0.5",
    "tau_grid": "0.0:1.0:0.01",
    "edge_tau": "0.05",
    "docs_per_cell": "10",
    "fold_in_iterations": "20",
    "relevance_percentile": "75",
    "top_k_words": "10",
}

# Flag destination -> config key, applied when the flag was given.
_FLAG_TO_KEY = {
    "level1_subject": "level1.subject",
    "level1_background": "level1.background",
    "level2_subject": "level2.subject",
    "level2_background": "level2.background",
    "seed1": "level1.seed",
    "seed2": "level2.seed",
    "pseudo_doc_weight": "pseudo_doc_weight",
    "max_passes": "max_passes",
    "rel_tol": "rel_tol",
    "cap": "batch_cap",
    "min_df": "min_df",
    "max_df_fraction": "max_df_fraction",
    "edge_tau": "edge_tau",
    "docs_per_cell": "docs_per_cell",
    "relevance_percentile": "relevance_percentile",
}


def read_config(path: str | Path | None) -> tuple[dict[str, str], set[str]]:
    """Merge a flat key=value config file over the built-in defaults.

    Also reports which keys the file set explicitly, so commands that derive
    values from other inputs can tell an override from a default.
    """
    values = dict(DEFAULT_CONFIG)
    explicit: set[str] = set()
    if path is None:
        return values, explicit
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            key, sep, value = text.partition("=")
            key, value = key.strip(), value.strip()
            if not sep or not key:
                raise TopicAtlasError(f"config line {line_no}: expected key=value, got {text!r}")
            if key not in DEFAULT_CONFIG:
                raise TopicAtlasError(f"config line {line_no}: unknown key {key!r}")
            values[key] = value
            explicit.add(key)
    if values["config_version"] != str(CONFIG_VERSION):
        raise VersionMismatchError(
            f"config version {values['config_version']}, expected {CONFIG_VERSION}"
        )
    return values, explicit


def apply_flag_overrides(
    values: dict[str, str], explicit: set[str], args: argparse.Namespace
) -> tuple[dict[str, str], set[str]]:
    out = dict(values)
    marked = set(explicit)
    for dest, key in _FLAG_TO_KEY.items():
        flag = getattr(args, dest, None)
        if flag is not None:
            out[key] = str(flag)
            marked.add(key)
    return out, marked


def adopt_model_shape(
    model: HierarchicalModel, values: dict[str, str], explicit: set[str]
) -> dict[str, str]:
    """Take topic counts from a loaded model; explicit conflicts are errors."""
    derived = {
        "level1.subject": sum(r == SUBJECT for r in model.parent_level.roles),
        "level1.background": sum(r != SUBJECT for r in model.parent_level.roles),
        "level2.subject": sum(r == SUBJECT for r in model.child_level.roles),
        "level2.background": sum(r != SUBJECT for r in model.child_level.roles),
    }
    out = dict(values)
    for key, count in derived.items():
        if key in explicit and int(out[key]) != count:
            raise TopicAtlasError(f"{key}={out[key]} conflicts with the loaded model ({count})")
        out[key] = str(count)
    return out


def _auto_gamma(corpus: Corpus, n_topics: int, scale: float = 0.05) -> float:
    """Decorrelation strength scaled to the count level of the fit."""
    total = sum(doc.total for doc in corpus.documents)
    return scale * (total / n_topics) / max(len(corpus.vocabulary), 1)


def _regularizers(values: dict[str, str], prefix: str, corpus: Corpus, n_topics: int) -> RegularizerConfig:
    gamma_text = values[f"{prefix}.decorr_gamma"]
    gamma = _auto_gamma(corpus, n_topics) if gamma_text == "auto" else float(gamma_text)
    return RegularizerConfig(
        smooth_beta=float(values[f"{prefix}.smooth_beta"]),
        smooth_alpha=float(values[f"{prefix}.smooth_alpha"]),
        sparse_beta=float(values[f"{prefix}.sparse_beta"]),
        decorr_gamma=gamma,
    )


def hierarchy_config(values: dict[str, str], corpus: Corpus) -> HierarchyConfig:
    level1 = TopicConfig(
        n_subject=int(values["level1.subject"]),
        n_background=int(values["level1.background"]),
        seed=int(values["level1.seed"]),
    )
    level2 = TopicConfig(
        n_subject=int(values["level2.subject"]),
        n_background=int(values["level2.background"]),
        seed=int(values["level2.seed"]),
    )
    return HierarchyConfig(
        level1=level1,
        level2=level2,
        pseudo_doc_weight=float(values["pseudo_doc_weight"]),
        reg1=_regularizers(values, "reg1", corpus, level1.total),
        reg2=_regularizers(values, "reg2", corpus, level2.total),
        schedule=FitSchedule(max_passes=int(values["max_passes"]), rel_tol=float(values["rel_tol"])),
    )


def parse_tau_grid(text: str) -> tuple[float, ...]:
    try:
        start, stop, step = (float(x) for x in text.split(":"))
    except ValueError:
        raise TopicAtlasError(f"tau_grid must be start:stop:step, got {text!r}") from None
    if step <= 0 or stop < start:
        raise TopicAtlasError(f"tau_grid must be an ascending range, got {text!r}")
    n = int(round((stop - start) / step))
    return tuple(start + i * step for i in range(n + 1))


def file_digest(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(
    manifest_path: Path,
    args: argparse.Namespace,
    seeds: dict[str, int],
    input_paths: list[str | Path],
    output_paths: list[str | Path],
    started: float,
) -> None:
    """Atomic JSON sidecar describing one artifact-producing run."""
    flags = {
        k: (str(v) if isinstance(v, Path) else v)
        for k, v in vars(args).items()
        if k != "func"
    }
    manifest = {
        "tool_version": __version__,
        "command": args.command,
        "flags": flags,
        "seeds": seeds,
        "input_hashes": {str(p): file_digest(p) for p in input_paths},
        "outputs": [str(p) for p in output_paths],
        "duration_seconds": round(time.time() - started, 3),
    }
    tmp = manifest_path.with_name(manifest_path.name + ".tmp")
    tmp.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    os.replace(tmp, manifest_path)


def _load_pruned_corpus(path: str | Path, values: dict[str, str], no_prune: bool) -> Corpus:
    """Parse a corpus file and reproject it onto its pruned vocabulary."""
    prune = (
        PruneConfig(min_df=1, max_df_fraction=1.0)
        if no_prune
        else PruneConfig(min_df=int(values["min_df"]), max_df_fraction=float(values["max_df_fraction"]))
    )
    with open(path, encoding="utf-8") as fh:
        vocabulary = build_vocabulary(fh, prune)
    with open(path, encoding="utf-8") as fh:
        raw = parse_corpus_file(fh)
    result = project_corpus(raw, vocabulary)
    if result.dropped_documents:
        logger.warning("pruning dropped %d empty documents", result.dropped_documents)
    return result.corpus


def _load_aligned_corpus(path: str | Path, vocabulary: Vocabulary) -> Corpus:
    """Parse a corpus file and project it onto an existing model vocabulary."""
    with open(path, encoding="utf-8") as fh:
        raw = parse_corpus_file(fh)
    result = project_corpus(raw, vocabulary)
    if result.dropped_documents:
        logger.warning("projection dropped %d empty documents", result.dropped_documents)
    return result.corpus


def _seeds(values: dict[str, str]) -> dict[str, int]:
    return {"level1": int(values["level1.seed"]), "level2": int(values["level2.seed"])}


def cmd_train(args: argparse.Namespace) -> int:
    started = time.time()
    values, _ = apply_flag_overrides(*read_config(args.config), args)
    corpus = _load_pruned_corpus(args.corpus, values, args.no_prune)
    config = hierarchy_config(values, corpus)
    model = train_hierarchy(corpus, config)
    out = Path(args.out)
    save_hierarchy(model, out)
    outputs: list[str | Path] = [out]
    if args.out_corpus:
        with open(args.out_corpus, "w", encoding="utf-8") as fh:
            write_corpus_file(corpus, fh)
        outputs.append(args.out_corpus)
    inputs = [args.corpus] + ([args.config] if args.config else [])
    write_manifest(out.with_name(out.name + ".manifest.json"), args, _seeds(values), inputs, outputs, started)
    print(f"trained {model.n_parents}x{model.n_children} hierarchy on {len(corpus.documents)} documents -> {out}")
    return 0


def cmd_aggregate(args: argparse.Namespace) -> int:
    started = time.time()
    values, explicit = apply_flag_overrides(*read_config(args.config), args)
    model = load_hierarchy(args.model)
    values = adopt_model_shape(model, values, explicit)
    initial_corpus = _load_aligned_corpus(args.initial_corpus, model.parent_level.vocabulary)
    with open(args.added_corpus, encoding="utf-8") as fh:
        added_corpus = parse_corpus_file(fh)
    config = hierarchy_config(values, initial_corpus)
    strategy = Strategy.from_name(args.strategy, float(values["batch_cap"]))
    result = aggregate(model, initial_corpus, added_corpus, strategy, config)
    out = Path(args.out)
    save_hierarchy(result.model, out)
    provenance_path = out.with_name(out.name + ".provenance.json")
    provenance_path.write_text(
        json.dumps(result.provenance, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    outputs: list[str | Path] = [out, provenance_path]
    if args.out_corpus:
        with open(args.out_corpus, "w", encoding="utf-8") as fh:
            write_corpus_file(result.merged_corpus, fh)
        outputs.append(args.out_corpus)
    inputs = [args.model, args.initial_corpus, args.added_corpus] + ([args.config] if args.config else [])
    write_manifest(
        out.with_name(out.name + ".manifest.json"), args, _seeds(values), inputs, outputs, started
    )
    print(
        f"aggregated {len(added_corpus.documents)} documents with {strategy.name} "
        f"({result.dropped_documents} dropped) -> {out}"
    )
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    started = time.time()
    values, explicit = apply_flag_overrides(*read_config(args.config), args)
    strategies = [s.strip() for s in args.strategies.split(",") if s.strip()]
    for name in strategies:
        canonical = STRATEGY_ALIASES.get(name.lower(), name)
        if canonical not in STRATEGY_NAMES:
            raise TopicAtlasError(f"unknown strategy {name!r}; expected one of {STRATEGY_NAMES}")
    model = load_hierarchy(args.model)
    values = adopt_model_shape(model, values, explicit)
    initial_corpus = _load_aligned_corpus(args.initial_corpus, model.parent_level.vocabulary)
    with open(args.added_corpus, encoding="utf-8") as fh:
        added_corpus = parse_corpus_file(fh)
    with open(args.embeddings, encoding="utf-8") as fh:
        table = load_embeddings(fh)
    config = hierarchy_config(values, initial_corpus)
    report = ablation_report(
        initial_corpus,
        model,
        added_corpus,
        strategies,
        table,
        config,
        k_list=tuple(int(k) for k in args.k_list.split(",")),
        tau_grid=parse_tau_grid(values["tau_grid"]),
        percentile=float(values["relevance_percentile"]),
        top_k_words=int(values["top_k_words"]),
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    json_path = out_dir / "report.json"
    json_path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    text_path = out_dir / "report.txt"
    text_path.write_text(report.to_text(), encoding="utf-8")
    outputs: list[str | Path] = [json_path, text_path]
    for row in report.rows:
        if row.status != "ok":
            continue
        curve_path = out_dir / f"edge_curve_{row.strategy}.csv"
        with open(curve_path, "w", encoding="utf-8", newline="") as fh:
            fh.write("tau,n_tau\n")
            for tau, n in row.edge_curve:
                fh.write(f"{tau:g},{n}\n")
        outputs.append(curve_path)
    inputs = [args.model, args.initial_corpus, args.added_corpus, args.embeddings] + (
        [args.config] if args.config else []
    )
    write_manifest(out_dir / "manifest.json", args, _seeds(values), inputs, outputs, started)
    print(report.to_text(), end="")
    return 0


def cmd_bundle(args: argparse.Namespace) -> int:
    started = time.time()
    values, _ = apply_flag_overrides(*read_config(args.config), args)
    model = load_hierarchy(args.model)
    corpus = _load_aligned_corpus(args.corpus, model.parent_level.vocabulary)
    bundle = build_bundle(
        model,
        corpus,
        {
            "edge_tau": float(values["edge_tau"]),
            "docs_per_cell": int(values["docs_per_cell"]),
            "fold_in_iterations": int(values["fold_in_iterations"]),
        },
    )
    out = Path(args.out)
    digest = save_bundle(bundle, out)
    inputs = [args.model, args.corpus] + ([args.config] if args.config else [])
    write_manifest(out.with_name(out.name + ".manifest.json"), args, _seeds(values), inputs, [out], started)
    print(f"bundled {bundle.index.n_documents} documents -> {out} ({digest[:12]})")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    serve(args.bundle, args.bind, args.static)
    return 0


def cmd_schedule(args: argparse.Namespace) -> int:
    sizes = batch_schedule(args.initial, args.added, args.cap)
    print(" ".join(str(s) for s in sizes))
    return 0


def _add_config_flags(sub: argparse.ArgumentParser, with_topics: bool = True) -> None:
    sub.add_argument("--config", type=Path, default=None, help="flat key=value config file")
    if with_topics:
        sub.add_argument("--level1-subject", type=int, default=None)
        sub.add_argument("--level1-background", type=int, default=None)
        sub.add_argument("--level2-subject", type=int, default=None)
        sub.add_argument("--level2-background", type=int, default=None)
        sub.add_argument("--seed1", type=int, default=None)
        sub.add_argument("--seed2", type=int, default=None)
        sub.add_argument("--pseudo-doc-weight", type=float, default=None)
        sub.add_argument("--max-passes", type=int, default=None)
        sub.add_argument("--rel-tol", type=float, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="topicatlas", description=__doc__)
    parser.add_argument("--version", action="version", version=f"topicatlas {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    train = commands.add_parser("train", help="fit a two-level model on a corpus file")
    train.add_argument("--corpus", type=Path, required=True)
    train.add_argument("--out", type=Path, required=True)
    train.add_argument("--out-corpus", type=Path, default=None, help="write the pruned training corpus")
    train.add_argument("--no-prune", action="store_true", help="keep the full vocabulary")
    train.add_argument("--min-df", type=int, default=None)
    train.add_argument("--max-df-fraction", type=float, default=None)
    _add_config_flags(train)
    train.set_defaults(func=cmd_train)

    agg = commands.add_parser("aggregate", help="fold an added corpus into a trained model")
    agg.add_argument("--model", type=Path, required=True)
    agg.add_argument("--initial-corpus", type=Path, required=True)
    agg.add_argument("--added-corpus", type=Path, required=True)
    agg.add_argument(
        "--strategy",
        required=True,
        choices=list(STRATEGY_NAMES) + sorted(STRATEGY_ALIASES),
        help="aggregation strategy (aliases: baseline=D-I-, proposed=D+I+)",
    )
    agg.add_argument("--cap", type=float, default=None, help="iterative batch growth cap")
    agg.add_argument("--out", type=Path, required=True)
    agg.add_argument("--out-corpus", type=Path, default=None, help="write the merged corpus")
    _add_config_flags(agg)
    agg.set_defaults(func=cmd_aggregate)

    evalp = commands.add_parser("eval", help="score aggregation strategies against embeddings")
    evalp.add_argument("--model", type=Path, required=True, help="model trained on the initial corpus")
    evalp.add_argument("--initial-corpus", type=Path, required=True)
    evalp.add_argument("--added-corpus", type=Path, required=True)
    evalp.add_argument("--embeddings", type=Path, required=True)
    evalp.add_argument("--strategies", default=",".join(STRATEGY_LABELS), help="comma-separated strategy names")
    evalp.add_argument("--k-list", default="100,200,500,1000", help="AP cutoffs, comma-separated")
    evalp.add_argument("--relevance-percentile", type=float, default=None)
    evalp.add_argument("--out-dir", type=Path, required=True)
    _add_config_flags(evalp)
    evalp.set_defaults(func=cmd_eval)

    bundle = commands.add_parser("bundle", help="pack a model and its corpus for serving")
    bundle.add_argument("--model", type=Path, required=True)
    bundle.add_argument("--corpus", type=Path, required=True)
    bundle.add_argument("--out", type=Path, required=True)
    bundle.add_argument("--edge-tau", type=float, default=None)
    bundle.add_argument("--docs-per-cell", type=int, default=None)
    _add_config_flags(bundle, with_topics=False)
    bundle.set_defaults(func=cmd_bundle)

    srv = commands.add_parser("serve", help="serve a bundle over HTTP")
    srv.add_argument("--bundle", type=Path, required=True)
    srv.add_argument("--bind", default="127.0.0.1:8080")
    srv.add_argument("--static", type=Path, default=None, help="static UI directory to mount at /")
    srv.set_defaults(func=cmd_serve)

    sched = commands.add_parser("schedule", help="print the iterative merge batch sizes")
    sched.add_argument("--initial", type=int, required=True)
    sched.add_argument("--added", type=int, required=True)
    sched.add_argument("--cap", type=float, default=0.10)
    sched.set_defaults(func=cmd_schedule)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except TopicAtlasError as exc:
        print(json.dumps({"error": {"code": exc.code, "message": str(exc)}}), file=sys.stderr)
        return 1
    except OSError as exc:
        print(json.dumps({"error": {"code": "io_error", "message": str(exc)}}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
