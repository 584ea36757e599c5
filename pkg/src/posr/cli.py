"""Command-line entry point.

Commands: gen-corpus, segment, retrieve, calibrate, posr, analyze, stats.
Every command writes CSV reports plus a run manifest (config, seed,
version) into the output directory; reruns with the same seed and
cassette are byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .analysis import AnalysisError, quartile_language_compare, talk_time
from .corpus import (
    Corpus,
    SyntheticSpec,
    corpus_stats,
    generate_synthetic,
    load_corpus,
    load_manifest,
    write_corpus,
)
from .llm import CassetteClient, HttpChatClient, LLMEndpointConfig, PromptKind, run_posr_llm
from .metrics import TokenUsage, cost_per_100, evaluate
from .model import labeling_to_spans
from .retrieval import (
    RetrieverConfig,
    calibrate_threshold,
    retrieval_accuracy,
    retrieve_labeling,
)
from .segmentation import (
    TextTilingParams,
    fit_boundary_words,
    segment_boundary_words,
    segment_texttiling,
)

logger = logging.getLogger(__name__)

SEG_METHODS = ("top10", "top20", "texttiling")
RETRIEVAL_METHODS = ("jaccard", "tfidf", "bm25")


def _write_run_manifest(out: Path, command: str, args: argparse.Namespace) -> None:
    doc = {
        "command": command,
        "version": __version__,
        "seed": getattr(args, "seed", None),
        "args": {k: str(v) for k, v in vars(args).items() if k != "func"},
    }
    (out / "run_manifest.json").write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def _write_csv(path: Path, header: list[str], rows: list[dict]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=header)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def _out_dir(args: argparse.Namespace) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _segment_one(method: str, entry, model, tt_params) -> "object":
    if method in ("top10", "top20"):
        return segment_boundary_words(model, entry.transcript)
    return segment_texttiling(tt_params, entry.transcript)


def cmd_gen_corpus(args: argparse.Namespace) -> int:
    out = _out_dir(args)
    spec = SyntheticSpec(
        n_transcripts=args.n_transcripts,
        n_problems=args.n_problems,
        vocab_overlap=args.vocab_overlap,
        informal_prob=args.informal_prob,
        seed=args.seed,
    )
    corpus = generate_synthetic(spec)
    manifest_path = write_corpus(corpus, out)
    _write_run_manifest(out, "gen-corpus", args)
    print(f"wrote {len(corpus)} transcripts; manifest at {manifest_path}")
    return 0


def cmd_segment(args: argparse.Namespace) -> int:
    out = _out_dir(args)
    corpus = load_corpus(load_manifest(args.manifest))
    model = None
    tt_params = TextTilingParams()
    if args.method in ("top10", "top20"):
        if args.train_manifest is None:
            print("error: top10/top20 require --train-manifest with annotations", file=sys.stderr)
            return 2
        train = load_corpus(load_manifest(args.train_manifest))
        model = fit_boundary_words(train, k=10 if args.method == "top10" else 20)
    rows = []
    for entry in corpus.entries:
        pred = _segment_one(args.method, entry, model, tt_params)
        spans = [
            {"start_line": s.start_line, "end_line": s.end_line}
            for s in labeling_to_spans(pred)
        ]
        (out / f"{entry.transcript.id}.spans.json").write_text(
            json.dumps(spans, indent=2) + "\n", encoding="utf-8"
        )
        if entry.gold is not None:
            report = evaluate(pred, entry.gold, entry.transcript)
            rows.append({"transcript_id": entry.transcript.id,
                         "pk_line": report.pk_line, "pk_time": report.pk_time,
                         "wd_line": report.wd_line, "wd_time": report.wd_time,
                         "seg_count_diff": report.seg_count_diff})
    if rows:
        _write_csv(out / "segmentation_metrics.csv",
                   ["transcript_id", "pk_line", "pk_time", "wd_line", "wd_time",
                    "seg_count_diff"], rows)
    _write_run_manifest(out, "segment", args)
    print(f"segmented {len(corpus)} transcripts with {args.method}")
    return 0


def cmd_retrieve(args: argparse.Namespace) -> int:
    out = _out_dir(args)
    corpus = load_corpus(load_manifest(args.manifest)).annotated()
    if not corpus.entries:
        print("error: retrieval evaluation needs annotated transcripts", file=sys.stderr)
        return 2
    config = RetrieverConfig(method=args.method, threshold=args.threshold)
    rows = []
    for entry in corpus.entries:
        pred = retrieve_labeling(config, entry.transcript, entry.gold, entry.worksheet)
        for span in labeling_to_spans(pred):
            gold_ref = entry.gold.per_line[span.start_line][1]
            rows.append({
                "transcript_id": entry.transcript.id,
                "start_line": span.start_line,
                "end_line": span.end_line,
                "decision": span.ref.serialize() if span.ref else "null",
                "gold": gold_ref.serialize(),
            })
        acc = retrieval_accuracy(config, Corpus((entry,), corpus.split))
        logger.info("%s: accuracy %.3f", entry.transcript.id, acc)
    overall = retrieval_accuracy(config, corpus)
    _write_csv(out / "retrieval_decisions.csv",
               ["transcript_id", "start_line", "end_line", "decision", "gold"], rows)
    (out / "retrieval_accuracy.json").write_text(
        json.dumps({"method": args.method, "threshold": args.threshold,
                    "accuracy": overall}, indent=2) + "\n",
        encoding="utf-8",
    )
    _write_run_manifest(out, "retrieve", args)
    print(f"{args.method} accuracy on ground-truth segments: {overall:.4f}")
    return 0


def cmd_calibrate(args: argparse.Namespace) -> int:
    out = _out_dir(args)
    train = load_corpus(load_manifest(args.manifest))
    methods = [args.method] if args.method else list(RETRIEVAL_METHODS)
    thresholds = {}
    for method in methods:
        thresholds[method] = calibrate_threshold(
            method, train, folds=args.folds, seed=args.seed
        )
        print(f"{method}: {thresholds[method]:.4f}")
    (out / "thresholds.json").write_text(
        json.dumps({"seed": args.seed, "folds": args.folds,
                    "thresholds": thresholds}, indent=2) + "\n",
        encoding="utf-8",
    )
    _write_run_manifest(out, "calibrate", args)
    return 0


def _load_prices(path: str | None) -> dict:
    if path is None:
        return {}
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _make_client(args: argparse.Namespace):
    inner = None
    if args.llm_config:
        inner = HttpChatClient(LLMEndpointConfig.from_file(args.llm_config))
    if args.cassette:
        return CassetteClient(args.cassette, inner=inner)
    if inner is None:
        print("error: LLM methods need --llm-config and/or --cassette", file=sys.stderr)
        raise SystemExit(2)
    return inner


def cmd_posr(args: argparse.Namespace) -> int:
    out = _out_dir(args)
    corpus = load_corpus(load_manifest(args.manifest))
    prices = _load_prices(args.prices)
    rows = []
    llm_mode = args.method in ("joint-llm", "independent-llm", "segment-llm")
    client = _make_client(args) if llm_mode else None
    model = None
    if args.method.startswith("top"):
        if args.train_manifest is None:
            print("error: top10/top20 need --train-manifest", file=sys.stderr)
            return 2
        train = load_corpus(load_manifest(args.train_manifest))
        model = fit_boundary_words(train, k=10 if args.method == "top10" else 20)

    usages: list[TokenUsage] = []
    failed: list[str] = []
    for entry in corpus.entries:
        if llm_mode:
            kind = {
                "joint-llm": PromptKind.JOINT_POSR,
                "independent-llm": PromptKind.INDEPENDENT_RETRIEVAL,
                "segment-llm": PromptKind.INDEPENDENT_SEGMENTATION,
            }[args.method]
            try:
                result = run_posr_llm(client, args.model, entry.transcript,
                                      entry.worksheet, kind)
            except Exception as exc:  # noqa: BLE001 - keep the batch going
                logger.error("%s: LLM run failed: %s", entry.transcript.id, exc)
                failed.append(entry.transcript.id)
                continue
            pred = result.labeling
            usages.append(result.usage)
            if result.parse_failed:
                failed.append(entry.transcript.id)
        else:
            seg = _segment_one(args.method, entry, model, TextTilingParams())
            rconf = RetrieverConfig(method=args.retrieval, threshold=args.threshold)
            pred = retrieve_labeling(rconf, entry.transcript, seg, entry.worksheet)
        (out / f"{entry.transcript.id}.pred.jsonl").write_text(
            "\n".join(
                json.dumps({"line_index": i, "segment_id": seg_id, "ref": ref.serialize()})
                for i, (seg_id, ref) in enumerate(pred.per_line)
            ) + "\n",
            encoding="utf-8",
        )
        if entry.gold is not None:
            report = evaluate(pred, entry.gold, entry.transcript)
            row = {"transcript_id": entry.transcript.id, **report.as_row()}
            rows.append(row)
    cost = None
    if usages and prices and args.model in prices:
        cost = cost_per_100(usages, args.model, prices)
        for row in rows:
            row["cost_usd_per_100"] = cost
    if rows:
        _write_csv(out / "posr_metrics.csv",
                   ["transcript_id", "pk_line", "pk_time", "wd_line", "wd_time",
                    "srs_line", "srs_time", "seg_count_diff", "cost_usd_per_100"],
                   rows)
    if failed:
        (out / "failed_transcripts.json").write_text(
            json.dumps(failed, indent=2) + "\n", encoding="utf-8"
        )
    _write_run_manifest(out, "posr", args)
    print(f"evaluated {len(rows)} transcripts"
          + (f", cost/100 = ${cost:.2f}" if cost is not None else "")
          + (f", {len(failed)} flagged" if failed else ""))
    return 0


def cmd_analyze(args: argparse.Namespace) -> int:
    out = _out_dir(args)
    corpus = load_corpus(load_manifest(args.manifest)).annotated()
    if not corpus.entries:
        print("error: analyze needs annotated transcripts", file=sys.stderr)
        return 2
    table = talk_time(corpus)
    _write_csv(out / "talk_time.csv",
               ["problem_id", "transcript_id", "seconds"],
               [{"problem_id": pid, "transcript_id": tid, "seconds": secs}
                for (pid, tid), secs in sorted(table.per_cell.items())])
    _write_csv(out / "talk_time_summary.csv",
               ["problem_id", "mean", "q1", "median", "q3"],
               [{"problem_id": pid, **stats} for pid, stats in sorted(table.summary.items())])
    if args.problem:
        try:
            ranked = quartile_language_compare(corpus, args.problem)
        except AnalysisError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        _write_csv(out / f"logodds_{args.problem}.csv",
                   ["bigram", "z"],
                   [{"bigram": b, "z": z} for b, z in ranked])
    _write_run_manifest(out, "analyze", args)
    print(f"analysis artifacts written to {out}")
    return 0


def cmd_stats(args: argparse.Namespace) -> int:
    corpus = load_corpus(load_manifest(args.manifest))
    stats = corpus_stats(corpus)
    for key, value in stats.items():
        print(f"{key}: {value}")
    if args.out:
        out = _out_dir(args)
        (out / "corpus_stats.json").write_text(
            json.dumps(stats, indent=2) + "\n", encoding="utf-8"
        )
        _write_run_manifest(out, "stats", args)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="posr")
    parser.add_argument("--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-corpus", help="write a synthetic corpus to disk")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-transcripts", type=int, default=4)
    p.add_argument("--n-problems", type=int, default=8)
    p.add_argument("--vocab-overlap", type=float, default=0.0)
    p.add_argument("--informal-prob", type=float, default=0.0)
    p.set_defaults(func=cmd_gen_corpus)

    p = sub.add_parser("segment", help="run a segmentation baseline")
    p.add_argument("--manifest", required=True)
    p.add_argument("--train-manifest")
    p.add_argument("--method", required=True, choices=SEG_METHODS)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("retrieve", help="retrieval over ground-truth segments")
    p.add_argument("--manifest", required=True)
    p.add_argument("--method", required=True, choices=RETRIEVAL_METHODS)
    p.add_argument("--threshold", type=float, default=0.0)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_retrieve)

    p = sub.add_parser("calibrate", help="cross-validated threshold search")
    p.add_argument("--manifest", required=True)
    p.add_argument("--method", choices=RETRIEVAL_METHODS)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("posr", help="full segmentation+retrieval evaluation")
    p.add_argument("--manifest", required=True)
    p.add_argument("--train-manifest")
    p.add_argument("--method", required=True,
                   choices=SEG_METHODS + ("joint-llm", "independent-llm", "segment-llm"))
    p.add_argument("--retrieval", default="jaccard", choices=RETRIEVAL_METHODS)
    p.add_argument("--threshold", type=float, default=0.0)
    p.add_argument("--model", default="default-model")
    p.add_argument("--llm-config")
    p.add_argument("--cassette")
    p.add_argument("--prices")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_posr)

    p = sub.add_parser("analyze", help="talk time + log-odds analyses")
    p.add_argument("--manifest", required=True)
    p.add_argument("--problem", help="problem id for quartile language comparison")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("stats", help="corpus summary statistics")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_stats)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
