"""Command-line entry points: label, simulate, crossval, serve,
metrics, export."""

from __future__ import annotations

import argparse
import json
import socket
import sys
from pathlib import Path

from .analytics import (
    compare_groups,
    parse_export,
    throughput_metrics,
    write_comparison_csv,
    write_metrics_csv,
)
from .data import apply_label_heuristic, load_dataset, write_dataset
from .errors import ForageError
from .policies import PolicySpec
from .relevance import AttributeModel, RelevanceModel
from .simulate import (
    SimulationConfig,
    cross_validate,
    format_summary,
    run_benchmark,
    write_runs_csv,
    write_summary_csv,
)
from .text import HashedVectors, KeywordLexicon, load_embedding_table


def _add_embedding_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--embeddings",
        type=Path,
        help="term-vector table file (term then d floats per line)",
    )
    parser.add_argument(
        "--hash-dim",
        type=int,
        default=32,
        help="dimension for deterministic hashed vectors when no table is given",
    )


def _table(args):
    if args.embeddings is not None:
        return load_embedding_table(args.embeddings)
    return HashedVectors(args.hash_dim)


def _add_model_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--k", type=int, default=50, help="neighbor count")
    parser.add_argument("--gamma", type=float, default=1.0, help="smoothing pseudocount")
    parser.add_argument("--pi", type=float, default=0.05, help="prior relevance")


def _model(args) -> RelevanceModel:
    return RelevanceModel(
        text=AttributeModel("text", k=args.k, gamma=args.gamma, pi=args.pi),
        location=AttributeModel("location", k=args.k, gamma=args.gamma, pi=args.pi),
    )


def _load(args, need_embeddings: bool = True):
    table = _table(args) if need_embeddings else None
    return load_dataset(args.dataset, args.format, table=table)


def _cmd_label(args) -> int:
    ds = load_dataset(args.input, args.format)
    lexicon = (
        KeywordLexicon.from_file(args.lexicon)
        if args.lexicon
        else KeywordLexicon.default()
    )
    labeled = apply_label_heuristic(ds, lexicon)
    out_format = args.output_format or args.format
    write_dataset(labeled, args.output, out_format)
    print(
        f"labeled {len(labeled)} points, incidence {labeled.incidence:.2%}"
        f" -> {args.output}"
    )
    return 0


def _cmd_simulate(args) -> int:
    ds = _load(args)
    policies = [PolicySpec.parse(p) for p in args.policy] or [PolicySpec("one_step")]
    cfg = SimulationConfig(
        iterations=args.iterations,
        runs=args.runs,
        policy=policies[0],
        seed=args.seed,
        flip_probability=args.flip,
    )
    reports = run_benchmark(ds, policies, cfg, rm=_model(args))
    args.out_dir.mkdir(parents=True, exist_ok=True)
    write_runs_csv(reports, args.out_dir / "runs.csv")
    write_summary_csv(reports, args.out_dir / "summary.csv")
    print(format_summary(reports))
    print(f"reports written to {args.out_dir}")
    return 0


def _cmd_crossval(args) -> int:
    ds = _load(args)
    rep = cross_validate(ds, args.train_fraction, args.seed, rm=_model(args))
    record = {
        "auc": rep.auc,
        **{f"p_at_{k}": v for k, v in rep.p_at.items()},
        "q": rep.q,
        "train_size": rep.train_size,
        "test_size": rep.test_size,
        "degenerate_train": rep.degenerate_train,
    }
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(",".join(record) + "\n")
            fh.write(",".join(repr(v) for v in record.values()) + "\n")
    print(json.dumps(record, indent=2))
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import ServiceConfig, create_app

    host, _, port = args.bind.rpartition(":")
    host = host or "127.0.0.1"
    port = int(port)
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.bind((host, port))
    except OSError as exc:
        print(f"cannot bind {host}:{port}: {exc}", file=sys.stderr)
        return 1
    finally:
        probe.close()
    cfg = ServiceConfig(
        data_dir=args.data_dir,
        persist=args.persist,
        default_policy=PolicySpec.parse(args.policy),
        default_batch_size=args.batch_size,
        embed_dim=args.hash_dim,
        embedding_table=args.embeddings,
    )
    uvicorn.run(create_app(cfg), host=host, port=port, log_level="warning")
    return 0


def _cmd_metrics(args) -> int:
    ds = load_dataset(args.dataset, args.format)
    if not ds.has_truth:
        print("dataset has no truth labels; run `label` first", file=sys.stderr)
        return 1
    truth = ds.truth_map()
    paths: list[Path] = []
    for entry in args.exports:
        p = Path(entry)
        if p.is_dir():
            paths.extend(sorted(p.glob("*.jsonl")))
        else:
            paths.append(p)
    rows = []
    by_group: dict[str, list] = {}
    for path in paths:
        export = parse_export(path)
        tm = throughput_metrics(
            export, truth, fixed_duration_ms=args.fixed_duration_ms
        )
        rows.append((export.session_id, export.group, tm))
        by_group.setdefault(export.group, []).append(tm)
    write_metrics_csv(rows, args.output)
    print(f"wrote {len(rows)} session rows to {args.output}")
    if args.compare:
        groups = sorted(by_group)
        if len(groups) != 2 or any(len(by_group[g]) < 2 for g in groups):
            print(
                "comparison needs two groups with >= 2 sessions each",
                file=sys.stderr,
            )
            return 1
        tests = compare_groups(by_group[groups[0]], by_group[groups[1]])
        write_comparison_csv(tests, args.compare)
        print(f"wrote {groups[0]} vs {groups[1]} comparison to {args.compare}")
    return 0


def _cmd_export(args) -> int:
    from .session import InteractionEvent, Session

    log_path = Path(args.data_dir) / "sessions" / f"{args.session_id}.jsonl"
    if not log_path.exists():
        print(f"no persisted session {args.session_id}", file=sys.stderr)
        return 1
    lines = log_path.read_text(encoding="utf-8").splitlines()
    header = json.loads(lines[0])
    dataset_id = header["dataset_id"]
    ds_path = None
    for fmt in ("csv", "jsonl"):
        cand = Path(args.data_dir) / "datasets" / f"{dataset_id}.{fmt}"
        if cand.exists():
            ds_path = cand
            break
    if ds_path is None:
        print(f"dataset {dataset_id} not found in {args.data_dir}", file=sys.stderr)
        return 1
    ds = load_dataset(ds_path, ds_path.suffix.lstrip("."), table=_table(args))
    session = Session(
        ds,
        PolicySpec.from_dict(header["policy"]),
        batch_size=header["batch_size"],
        budget_ms=header["budget_ms"],
        session_id=header["session_id"],
        dataset_ref=dataset_id,
    )
    for raw in lines[1:]:
        rec = json.loads(raw)
        session.apply_event(
            InteractionEvent(rec["kind"], rec.get("point_id"), rec["at"])
        )
    Path(args.output).write_text(
        "\n".join(session.export_lines()) + "\n", encoding="utf-8"
    )
    print(f"wrote session export to {args.output}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="activeforage",
        description="Active-search data foraging toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("label", help="apply the keyword labeling heuristic")
    p.add_argument("--input", required=True, type=Path)
    p.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    p.add_argument("--lexicon", type=Path, help="phrase file (default: shipped list)")
    p.add_argument("--output", required=True, type=Path)
    p.add_argument("--output-format", choices=("csv", "jsonl"))
    p.set_defaults(func=_cmd_label)

    p = sub.add_parser("simulate", help="benchmark query policies")
    p.add_argument("--dataset", required=True, type=Path)
    p.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    p.add_argument(
        "--policy",
        action="append",
        default=[],
        help="random[:seed] | one_step | ell_step:L | ens:BUDGET[:cap] (repeatable)",
    )
    p.add_argument("--iterations", type=int, default=500)
    p.add_argument("--runs", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--flip", type=float, default=0.0, help="oracle mistake probability")
    p.add_argument("--out-dir", required=True, type=Path)
    _add_embedding_args(p)
    _add_model_args(p)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("crossval", help="sparse-label cross-validation")
    p.add_argument("--dataset", required=True, type=Path)
    p.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    p.add_argument("--train-fraction", type=float, default=0.001)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", type=Path)
    _add_embedding_args(p)
    _add_model_args(p)
    p.set_defaults(func=_cmd_crossval)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--bind", default="127.0.0.1:8765")
    p.add_argument("--data-dir", type=Path)
    p.add_argument("--persist", action="store_true")
    p.add_argument("--policy", default="one_step")
    p.add_argument("--batch-size", type=int, default=10)
    _add_embedding_args(p)
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("metrics", help="throughput metrics from session exports")
    p.add_argument("--exports", nargs="+", required=True)
    p.add_argument("--dataset", required=True, type=Path)
    p.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    p.add_argument("--output", required=True, type=Path)
    p.add_argument("--compare", type=Path, help="also write a group comparison table")
    p.add_argument("--fixed-duration-ms", type=int)
    p.set_defaults(func=_cmd_metrics)

    p = sub.add_parser("export", help="rebuild a persisted session's export")
    p.add_argument("--data-dir", required=True, type=Path)
    p.add_argument("--session-id", required=True)
    p.add_argument("--output", required=True, type=Path)
    _add_embedding_args(p)
    p.set_defaults(func=_cmd_export)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ForageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
