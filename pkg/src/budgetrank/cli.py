"""Command-line pipeline: validate, split, classify, train-adapter, returns,
train-ranker, rank, llm-rank, report.

Exit codes: 0 success, 1 domain or validation failure, 2 I/O or configuration
failure, 3 remote-service failure. All output files are written atomically
and depend only on inputs and --seed, never on wall clock or locale.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys

from . import classifier, corpus, embeddings, llm_client, market, ranker
from ._io import atomic_writer
from .errors import AuthMissing, BudgetRankError, RequestError

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_CONFIG = 2
EXIT_REMOTE = 3

MODEL_KINDS = ("logistic", "linear", "gbt-cls", "gbt-reg", "gbt-ltr",
               "forest-cls", "forest-reg")
SPLIT_NAMES = ("train", "val", "test", "all")


def _add_split_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--train-end", type=int, default=2019,
                   help="last year of the training split (default 2019)")
    p.add_argument("--val-end", type=int, default=2023,
                   help="last year of the validation split (default 2023)")


def _split_of_year(year: int, args) -> str:
    if year <= args.train_end:
        return "train"
    if year <= args.val_end:
        return "val"
    return "test"


def _pick_split(full: corpus.Corpus, args, which: str) -> corpus.Corpus:
    if which == "all":
        return full
    spec = corpus.SplitSpec(args.train_end, args.val_end)
    train, val, test = corpus.temporal_split(full, spec)
    return {"train": train, "val": val, "test": test}[which]


def _ensure_out(args) -> str:
    os.makedirs(args.out, exist_ok=True)
    return args.out


def cmd_validate(args) -> int:
    """Collect every validation error per file; exit 0 only when all clean."""
    failures = 0

    def check(label: str, loader, *loader_args):
        nonlocal failures
        errors: list[Exception] = []
        result = loader(*loader_args, on_error=errors.append)
        plural = "" if len(errors) == 1 else "s"
        print(f"{label}: {len(errors)} error{plural}")
        for err in errors:
            print(f"  {err}")
        failures += len(errors)
        return result

    taxonomy = check(args.taxonomy, corpus.load_taxonomy, args.taxonomy)
    if args.segments:
        check(args.segments, corpus.load_segments, args.segments, taxonomy)
    if args.embeddings:
        check(args.embeddings, embeddings.load_store, args.embeddings)
    if args.prices:
        check(args.prices, market.load_prices, args.prices)
    return EXIT_OK if failures == 0 else EXIT_DOMAIN


def cmd_split(args) -> int:
    taxonomy = corpus.load_taxonomy(args.taxonomy)
    full = corpus.load_segments(args.segments, taxonomy)
    spec = corpus.SplitSpec(args.train_end, args.val_end)
    parts = corpus.temporal_split(full, spec)
    out = _ensure_out(args)
    for name, part in zip(("train", "val", "test"), parts):
        path = os.path.join(out, f"{name}.jsonl")
        corpus.save_segments(part, path)
        print(f"{name} {len(part)}")
    return EXIT_OK


def _load_classify_model(args, store, taxonomy):
    if args.adapter:
        return embeddings.load_adapter(args.adapter)
    return embeddings.init_adapter(store, taxonomy)


def cmd_classify(args) -> int:
    taxonomy = corpus.load_taxonomy(args.taxonomy)
    full = corpus.load_segments(args.segments, taxonomy)
    store = embeddings.load_store(args.embeddings)
    part = _pick_split(full, args, args.split)
    model = _load_classify_model(args, store, taxonomy)

    results = classifier.classify_corpus(model, store, part, args.tau)
    out = _ensure_out(args)
    classifier.write_predictions(os.path.join(out, "predictions.csv"), results,
                                 full=args.full)

    if any(seg.sectors for seg in part):
        report = classifier.evaluate_f1([pred for _, pred in results], part, taxonomy)
        classifier.write_f1_report(os.path.join(out, "f1.csv"), report)
        print(f"macro_f1 {report.macro!r}")
        print(f"micro_f1 {report.micro!r}")
        print(f"weighted_f1 {report.weighted!r}")
    else:
        print("no gold labels in split; skipping F1")
    return EXIT_OK


def cmd_train_adapter(args) -> int:
    taxonomy = corpus.load_taxonomy(args.taxonomy)
    full = corpus.load_segments(args.segments, taxonomy)
    store = embeddings.load_store(args.embeddings)
    train = _pick_split(full, args, "train")

    base = embeddings.init_adapter(store, taxonomy, temperature=args.temperature,
                                   seed=args.seed)
    config = embeddings.TrainConfig(args.lr, args.epochs, args.batch_size,
                                    args.l2, args.seed)
    batch = embeddings.make_batch(train, store)
    initial = embeddings.adapter_loss(base, batch, config.l2)
    model = embeddings.train_adapter(base, train, store, config)
    final = embeddings.adapter_loss(model, batch, config.l2)

    out = _ensure_out(args)
    embeddings.save_adapter(model, os.path.join(out, "adapter.json"))
    print(f"segments {len(batch)}")
    print(f"loss_initial {initial!r}")
    print(f"loss_final {final!r}")
    return EXIT_OK


def cmd_returns(args) -> int:
    taxonomy = corpus.load_taxonomy(args.taxonomy)
    full = corpus.load_segments(args.segments, taxonomy)
    table = market.load_prices(args.prices)
    rows: list[market.SectorReturn] = []
    for day in full.events:
        rows.extend(market.event_returns(taxonomy, table, day))
    out = _ensure_out(args)
    market.write_returns(os.path.join(out, "returns.csv"), rows)
    print(f"events {len(full.events)}")
    print(f"sector_returns {len(rows)}")
    return EXIT_OK


def _ensemble_config(args, bagged: bool) -> ranker.EnsembleConfig:
    depth = args.depth if args.depth is not None else (6 if bagged else 3)
    return ranker.EnsembleConfig(n_trees=args.trees, max_depth=depth,
                                 shrinkage=1.0 if bagged else args.shrinkage,
                                 mode="bagged" if bagged else "boosted",
                                 seed=args.seed)


def _train_ranker_model(kind: str, instances, args):
    if kind == "logistic":
        return ranker.train_logistic(instances)
    if kind == "linear":
        return ranker.train_linear(instances)
    bagged = kind.startswith("forest")
    objective = {"gbt-cls": "logistic", "gbt-reg": "squared", "gbt-ltr": "pairwise",
                 "forest-cls": "logistic", "forest-reg": "squared"}[kind]
    return ranker.train_ensemble(instances, objective, _ensemble_config(args, bagged))


def _adapter_or_none(args, store):
    if getattr(args, "adapter", None):
        return embeddings.load_adapter(args.adapter)
    return None


def _instances_for(returns_rows, full, store, adapter):
    return ranker.build_instances(
        full, store, returns_rows, adapter,
        on_skip=lambda exc: log.warning("%s", exc))


def cmd_train_ranker(args) -> int:
    taxonomy = corpus.load_taxonomy(args.taxonomy)
    full = corpus.load_segments(args.segments, taxonomy)
    store = embeddings.load_store(args.embeddings)
    returns_rows = market.load_returns(args.returns)
    adapter = _adapter_or_none(args, store)

    train_rows = [r for r in returns_rows
                  if _split_of_year(r.budget_date.year, args) == "train"]
    instances = _instances_for(train_rows, full, store, adapter)
    model = _train_ranker_model(args.model_kind, instances, args)

    out = _ensure_out(args)
    ranker.save_model(model, os.path.join(out, "ranker.json"))
    print(f"model_kind {args.model_kind}")
    print(f"train_instances {len(instances)}")
    return EXIT_OK


def cmd_rank(args) -> int:
    """Apply a saved model (--model) or train one first (--model-kind), then
    rank each event of the requested split and report NDCG."""
    taxonomy = corpus.load_taxonomy(args.taxonomy)
    full = corpus.load_segments(args.segments, taxonomy)
    store = embeddings.load_store(args.embeddings)
    returns_rows = market.load_returns(args.returns)
    adapter = _adapter_or_none(args, store)

    if args.model:
        model = ranker.load_model(args.model)
    else:
        train_rows = [r for r in returns_rows
                      if _split_of_year(r.budget_date.year, args) == "train"]
        model = _train_ranker_model(
            args.model_kind, _instances_for(train_rows, full, store, adapter), args)

    wanted = [r for r in returns_rows
              if args.split == "all" or _split_of_year(r.budget_date.year, args) == args.split]
    instances = _instances_for(wanted, full, store, adapter)

    by_date: dict = {}
    for inst in instances:
        by_date.setdefault(inst.budget_date, []).append(inst)

    rankings = []
    per_event = []
    for day in sorted(by_date):
        group = by_date[day]
        scores = {inst.sector: ranker.score(model, inst.feature) for inst in group}
        ranked = ranker.rank_event(scores, day)
        rankings.append(ranked)
        truth = market.ground_truth_ranking(
            [market.SectorReturn(inst.sector, day, inst.target_return, 0, 0)
             for inst in group])
        value = ranker.ndcg(ranked, truth)
        per_event.append((day, value))
        print(f"{day.isoformat()} ndcg {value!r}")

    out = _ensure_out(args)
    ranker.write_rankings(os.path.join(out, "rankings.csv"), rankings)
    ranker.write_ndcg(os.path.join(out, "ndcg.csv"), per_event)
    if per_event:
        mean = sum(v for _, v in per_event) / len(per_event)
        print(f"mean_ndcg {mean!r}")
    else:
        print("no events in split; nothing ranked")
    return EXIT_OK


def cmd_llm_rank(args) -> int:
    """Zero-shot ranking: one performance estimate per (event, sector) via the
    chat endpoint, ranked per event; failed pairs are reported, not fatal."""
    taxonomy = corpus.load_taxonomy(args.taxonomy)
    full = corpus.load_segments(args.segments, taxonomy)
    part = _pick_split(full, args, args.split)
    config = llm_client.config_from_env(args.base_url, args.model_name,
                                        timeout=args.timeout,
                                        max_retries=args.retries)
    truth_rows = market.load_returns(args.returns) if args.returns else []
    truth_by_pair = {(r.budget_date, r.sector): r.value for r in truth_rows}

    rankings = []
    per_event = []
    failures: list[tuple] = []
    for day in part.events:
        segs = part.segments_for(day)
        labels = set().union(*(seg.sectors for seg in segs)) if segs else set()
        scores: dict[str, float] = {}
        for sector in (s for s in taxonomy.sectors if s in labels):
            excerpt = "\n".join(seg.text for seg in part.segments_for(day, sector=sector))
            try:
                estimate = llm_client.estimate_performance(config, sector, excerpt)
            except BudgetRankError as exc:
                failures.append((day, sector, type(exc).__name__, str(exc)))
                continue
            scores[sector] = estimate.value
        if not scores:
            continue
        ranked = ranker.rank_event(scores, day)
        rankings.append(ranked)
        covered = [(s, truth_by_pair[(day, s)]) for s in scores
                   if (day, s) in truth_by_pair]
        if len(covered) == len(scores):
            truth = market.ground_truth_ranking(
                [market.SectorReturn(s, day, v, 0, 0) for s, v in covered])
            value = ranker.ndcg(ranked, truth)
            per_event.append((day, value))
            print(f"{day.isoformat()} ndcg {value!r}")
        elif truth_by_pair:
            log.warning("ground truth incomplete for %s; skipping NDCG", day)

    out = _ensure_out(args)
    ranker.write_rankings(os.path.join(out, "rankings.csv"), rankings)
    if per_event:
        ranker.write_ndcg(os.path.join(out, "ndcg.csv"), per_event)
        mean = sum(v for _, v in per_event) / len(per_event)
        print(f"mean_ndcg {mean!r}")
    with atomic_writer(os.path.join(out, "failures.csv")) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["date", "sector", "error", "message"])
        for day, sector, kind, message in failures:
            writer.writerow([day.isoformat(), sector, kind, message])
    if failures:
        print(f"failed_pairs {len(failures)}")
        return EXIT_REMOTE
    return EXIT_OK


def _read_csv(path: str) -> list[list[str]]:
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.reader(fh))


def cmd_report(args) -> int:
    """Aggregate f1.csv / ndcg.csv from --out into a markdown summary."""
    out = _ensure_out(args)
    lines = ["# Pipeline report", ""]

    f1_path = os.path.join(out, "f1.csv")
    lines.append("## Sector classification (F1)")
    lines.append("")
    if os.path.exists(f1_path):
        rows = {r[0]: r[3] for r in _read_csv(f1_path)[1:] if r}
        lines.append("| Metric | F1 |")
        lines.append("| --- | --- |")
        for label, key in (("Macro", "MACRO"), ("Micro", "MICRO"),
                           ("Weighted", "WEIGHTED")):
            lines.append(f"| {label} | {rows.get(key, 'n/a')} |")
    else:
        lines.append("no f1.csv found")
    lines.append("")

    ndcg_path = os.path.join(out, "ndcg.csv")
    lines.append("## Sector ranking (NDCG)")
    lines.append("")
    if os.path.exists(ndcg_path):
        lines.append("| Budget event | NDCG |")
        lines.append("| --- | --- |")
        for row in _read_csv(ndcg_path)[1:]:
            if row:
                lines.append(f"| {row[0]} | {row[1]} |")
    else:
        lines.append("no ndcg.csv found")
    lines.append("")

    path = os.path.join(out, "report.md")
    with atomic_writer(path) as fh:
        fh.write("\n".join(lines))
    print(f"wrote {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="budgetrank",
        description="Identify budget-relevant sectors and rank them by "
                    "predicted post-announcement market performance.")
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="debug logging to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="validate input files, report all errors")
    p.add_argument("--taxonomy", required=True)
    p.add_argument("--segments")
    p.add_argument("--embeddings")
    p.add_argument("--prices")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("split", help="write temporal train/val/test JSONL files")
    p.add_argument("--taxonomy", required=True)
    p.add_argument("--segments", required=True)
    _add_split_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("classify", help="score sectors per segment and report F1")
    p.add_argument("--taxonomy", required=True)
    p.add_argument("--segments", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--tau", type=float, default=0.5)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--adapter", help="trained adapter model JSON")
    group.add_argument("--base", action="store_true",
                       help="untrained base scoring (identity adapter)")
    p.add_argument("--split", choices=SPLIT_NAMES, default="all")
    _add_split_args(p)
    p.add_argument("--full", action="store_true",
                   help="emit every sector row, not only predictions")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("train-adapter", help="fit the embedding adapter on the train split")
    p.add_argument("--taxonomy", required=True)
    p.add_argument("--segments", required=True)
    p.add_argument("--embeddings", required=True)
    _add_split_args(p)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--l2", type=float, default=1e-3)
    p.add_argument("--temperature", type=float, default=0.07)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_adapter)

    p = sub.add_parser("returns", help="compute per-sector post-budget returns")
    p.add_argument("--taxonomy", required=True)
    p.add_argument("--segments", required=True)
    p.add_argument("--prices", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_returns)

    def ranker_shared(p):
        p.add_argument("--taxonomy", required=True)
        p.add_argument("--segments", required=True)
        p.add_argument("--embeddings", required=True)
        p.add_argument("--returns", required=True,
                       help="returns CSV from the `returns` subcommand")
        p.add_argument("--adapter", help="optional adapter for feature vectors")
        _add_split_args(p)
        p.add_argument("--seed", type=int, default=42)
        p.add_argument("--trees", type=int, default=100)
        p.add_argument("--depth", type=int, default=None,
                       help="tree depth (default 3 boosted, 6 bagged)")
        p.add_argument("--shrinkage", type=float, default=0.1)
        p.add_argument("--out", required=True)

    p = sub.add_parser("train-ranker", help="train a sector-performance ranker")
    ranker_shared(p)
    p.add_argument("--model-kind", choices=MODEL_KINDS, required=True)
    p.set_defaults(func=cmd_train_ranker)

    p = sub.add_parser("rank", help="rank sectors per event and report NDCG")
    ranker_shared(p)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--model", help="saved ranker model JSON")
    group.add_argument("--model-kind", choices=MODEL_KINDS,
                       help="train this kind on the train split first")
    p.add_argument("--split", choices=SPLIT_NAMES, default="test")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("llm-rank", help="zero-shot sector ranking via a chat endpoint")
    p.add_argument("--taxonomy", required=True)
    p.add_argument("--segments", required=True)
    p.add_argument("--returns", help="returns CSV for NDCG against ground truth")
    p.add_argument("--split", choices=SPLIT_NAMES, default="test")
    _add_split_args(p)
    p.add_argument("--base-url", required=True)
    p.add_argument("--model-name", required=True)
    p.add_argument("--timeout", type=float, default=60.0)
    p.add_argument("--retries", type=int, default=3)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_llm_rank)

    p = sub.add_parser("report", help="aggregate metrics CSVs into report.md")
    p.add_argument("--out", required=True,
                   help="directory holding f1.csv / ndcg.csv")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except AuthMissing as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RequestError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_REMOTE
    except BudgetRankError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
