"""Command-line entry point: ``gqlbench <subcommand> ...``.

Parameter precedence is flags > ``--config`` file > environment > built-in
defaults; the environment only supplies the endpoint URL and output
directory. The config file holds ``key=value`` lines whose keys are the long
flag names (``duration=60``, ``pool-size=10``). Every subcommand writes a
``manifest.txt`` with all resolved parameters beside its outputs.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path
from typing import Sequence

from . import __version__

ENV_ENDPOINT = "GQLBENCH_ENDPOINT"
ENV_OUTPUT_DIR = "GQLBENCH_OUTPUT_DIR"


class CliError(Exception):
    pass


def read_config(path: str | Path) -> dict[str, str]:
    out = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise CliError(f"{path}:{lineno}: expected key=value")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def write_manifest(out_dir: Path, command: str, params: dict, name: str = "manifest.txt") -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / name
    lines = [f"command={command}", f"version={__version__}"]
    for k in sorted(params):
        v = params[k]
        if k in ("func", "config", "command"):
            continue
        if isinstance(v, (list, tuple)):
            v = ",".join(map(str, v))
        lines.append(f"{k}={v}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def _out_dir(args) -> Path:
    return Path(args.out or os.environ.get(ENV_OUTPUT_DIR) or ".")


def _endpoint(args) -> str:
    url = args.endpoint or os.environ.get(ENV_ENDPOINT)
    if not url:
        raise CliError(f"no endpoint given (use --endpoint or set {ENV_ENDPOINT})")
    return url


def _template_list(values) -> list[str]:
    from .workload import templates

    if not values:
        return [t.template_id for t in templates()]
    out = []
    for v in values:
        out.extend(x.strip() for x in v.split(",") if x.strip())
    return out


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------


def cmd_generate(args) -> int:
    from .datagen import generate, write_metadata, write_sql
    from .model import validate
    from .words import WORD_SET

    out = _out_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    ds = generate(args.sf, args.seed)
    problems = validate(ds, WORD_SET)
    if problems:
        for p in problems[:20]:
            print(f"violation: {p}", file=sys.stderr)
        return 1
    rows = write_sql(ds, out / f"dataset-{args.dialect}.sql", args.dialect)
    write_metadata(ds, out / "metadata.txt")
    write_manifest(out, "generate", vars(args) | {"out": str(out), "rows": rows})
    print(f"wrote {rows} rows ({ds.entity_count()} entities) to {out}")
    return 0


def cmd_queries(args) -> int:
    from .datagen import read_metadata
    from .workload import compose_mixed, instantiate, write_workload

    meta_path = Path(args.metadata)
    if meta_path.is_dir():
        meta_path = meta_path / "metadata.txt"
    if not meta_path.exists():
        raise CliError(f"metadata file not found: {meta_path}")
    meta = read_metadata(meta_path)
    out = _out_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    ids = _template_list(args.template)
    if args.mixed:
        for k in range(args.mixed):
            wl = compose_mixed(ids, args.n, meta, seed=args.shuffle_seed + k, instance_seed=args.seed)
            n = write_workload(wl, out / f"workload-mixed{k + 1}.txt")
            print(f"mixed workload {k + 1}: {n} queries")
    else:
        for tid in ids:
            n = write_workload(instantiate(tid, meta, args.n, args.seed), out / f"workload-{tid}.txt")
            print(f"{tid}: {n} instances")
    write_manifest(out, "queries", vars(args) | {"out": str(out), "template": ids,
                                                 "scaleFactor": meta.scale_factor, "dataSeed": meta.seed})
    return 0


def cmd_serve(args) -> int:
    from .refserver import DataSourceConfig, RefServer, load_dataset

    if args.dataset is None and args.sf is None:
        raise CliError("serve needs --dataset DIR or --sf N")
    ds = load_dataset(args.dataset, args.sf, args.seed)
    config = DataSourceConfig(args.latency_ms, args.pool_size, args.db_workers)
    server = RefServer(ds, args.mode, config, args.host, args.port)
    if args.out:
        write_manifest(Path(args.out), "serve", vars(args) | {"scaleFactor": ds.scale_factor.value,
                                                              "dataSeed": ds.seed})
    print(f"serving {server.service.mode.value} mode at {server.url}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return 0


def _load_workloads(paths: Sequence[str]):
    from .workload import read_workload

    if not paths:
        raise CliError("no workload file given (use --workload)")
    out = []
    for p in paths:
        if not Path(p).exists():
            raise CliError(f"workload file not found: {p}")
        out.append(read_workload(p))
    return out


def cmd_bench_throughput(args) -> int:
    from .bench import run_distinct_workloads, run_throughput

    endpoint = _endpoint(args)
    workloads = _load_workloads(args.workload)
    out = _out_dir(args)
    write_manifest(out, "bench-throughput", vars(args) | {"endpoint": endpoint, "out": str(out)})
    if args.kind == "aTPm":
        res = run_distinct_workloads(endpoint, workloads, args.clients, args.duration, args.timeout, out)
        reports = [res.report]
    else:
        reports = []
        for path, wl in zip(args.workload, workloads):
            group = Path(path).stem.removeprefix("workload-")
            res = run_throughput(endpoint, wl, args.clients, args.duration, args.runs, args.warmup,
                                 args.kind, group, args.timeout, out,
                                 on_run=lambda r, g=group: print(
                                     f"{g} run {r.index + 1}{' (warm-up)' if r.warmup else ''}: "
                                     f"{r.completed} completed, {r.failed} failed", flush=True))
            reports.append(res.report)
    for r in reports:
        print(f"{r.kind} {r.group}: {r.value:.2f} ± {r.stddev:.2f} over {r.n} runs")
    return 0


def cmd_bench_latency(args) -> int:
    from .bench import run_latency
    from .metrics import compute_metrics, write_reports

    endpoint = _endpoint(args)
    instances = [q for wl in _load_workloads(args.workload) for q in wl]
    groups: dict[str, list] = {}
    for q in instances:
        groups.setdefault(q.template_id, []).append(q)
    if args.n:
        groups = {k: v[: args.n] for k, v in groups.items()}
    out = _out_dir(args)
    write_manifest(out, "bench-latency", vars(args) | {"endpoint": endpoint, "out": str(out)})
    records = run_latency(endpoint, list(groups.values()), args.wait_ms, args.repetitions, args.timeout, out)
    reports = compute_metrics(records, "query") + compute_metrics(records, "template")
    write_reports(reports, out / "metrics-latency.json")
    failed = sum(1 for r in records if not r.ok)
    print(f"{len(records)} queries, {failed} failed; metrics in {out / 'metrics-latency.json'}")
    return 0


def cmd_report(args) -> int:
    from .metrics import compute_metrics, read_records, read_summary, throughput_report, write_reports

    src = Path(args.input)
    if not src.is_dir():
        raise CliError(f"not a directory: {src}")
    reports = []
    latency = src / "records-latency.csv"
    if latency.exists():
        records = read_records(latency)
        reports += compute_metrics(records, "query") + compute_metrics(records, "template")
    groups: dict[str, list[tuple[int, bool, int, float]]] = {}
    for summary in sorted(src.glob("summary-*-run*.csv")):
        _, meta = read_summary(summary)
        group = summary.stem.removeprefix("summary-").rsplit("-run", 1)[0]
        records = read_records(summary.with_name(summary.name.replace("summary-", "records-", 1)))
        completed = sum(1 for r in records if r.ok)
        groups.setdefault(group, []).append(
            (int(meta["run"]), meta.get("warmup") == "true", completed, float(meta["duration_s"])))
    for group, runs in sorted(groups.items()):
        runs.sort()
        kind = "aTPm" if group == "mixed" else args.kind
        counts = [c for _, warm, c, _ in runs if not warm]
        if not counts:
            print(f"no measured runs for {group}; report omitted", file=sys.stderr)
            continue
        reports.append(throughput_report(kind, counts, group, runs[0][3]))
    if not reports:
        raise CliError(f"no records or summaries found in {src}")
    out = Path(args.out) if args.out else src
    write_reports(reports, out / "report.json")
    # the input directory already holds the manifest of the measured run
    write_manifest(out, "report", vars(args) | {"out": str(out)}, "manifest-report.txt")
    for r in reports:
        if r.kind in ("aTPt", "aTPw", "aTPm"):
            print(f"{r.kind} {r.group}: {r.value:.2f} ± {r.stddev:.2f} over {r.n} runs")
    print(f"{len(reports)} reports written to {out / 'report.json'}")
    return 0


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gqlbench", description="GraphQL server benchmark toolkit")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--config", help="key=value file with parameter defaults")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate a dataset: SQL dump and metadata")
    g.add_argument("--sf", type=int, default=1, help="scale factor (number of universities)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--dialect", choices=("postgres", "mysql"), default="postgres")
    g.add_argument("--out", help=f"output directory (env {ENV_OUTPUT_DIR})")
    g.set_defaults(func=cmd_generate)

    q = sub.add_parser("queries", help="instantiate query templates into workload files")
    q.add_argument("--metadata", default="metadata.txt", help="metadata file or dataset directory")
    q.add_argument("--template", action="append", help="template id(s), repeatable or comma-separated")
    q.add_argument("--n", type=int, default=5000, help="instances per template (capped by availability)")
    q.add_argument("--seed", type=int, default=0, help="instance selection seed")
    q.add_argument("--mixed", type=int, default=0, help="compose this many shuffled mixed workloads")
    q.add_argument("--shuffle-seed", type=int, default=0)
    q.add_argument("--out")
    q.set_defaults(func=cmd_queries)

    s = sub.add_parser("serve", help="run the reference GraphQL server")
    s.add_argument("--dataset", help="dataset directory written by 'generate'")
    s.add_argument("--sf", type=int)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--mode", choices=("Naive", "Cache", "Batch", "BatchCache"), default="Naive")
    s.add_argument("--latency-ms", type=float, default=1.0)
    s.add_argument("--pool-size", type=int, default=10)
    s.add_argument("--db-workers", type=int, default=2)
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--port", type=int, default=8080)
    s.add_argument("--out", help="directory for the manifest")
    s.set_defaults(func=cmd_serve)

    t = sub.add_parser("bench-throughput", help="throughput test driver")
    t.add_argument("--endpoint", help=f"GraphQL endpoint URL (env {ENV_ENDPOINT})")
    t.add_argument("--workload", action="append", help="workload file, repeatable")
    t.add_argument("--clients", type=int, default=1)
    t.add_argument("--duration", type=float, default=60.0, help="seconds per run")
    t.add_argument("--runs", type=int, default=6)
    t.add_argument("--warmup", type=int, default=1, help="leading runs excluded from the average")
    t.add_argument("--kind", choices=("aTPt", "aTPw", "aTPm"), default="aTPt")
    t.add_argument("--timeout", type=float, default=30.0)
    t.add_argument("--out")
    t.set_defaults(func=cmd_bench_throughput)

    lt = sub.add_parser("bench-latency", help="latency test driver")
    lt.add_argument("--endpoint")
    lt.add_argument("--workload", action="append", help="workload file, repeatable")
    lt.add_argument("--n", type=int, default=0, help="instances per template to use (0 = all)")
    lt.add_argument("--wait-ms", type=float, default=1000.0)
    lt.add_argument("--repetitions", type=int, default=1)
    lt.add_argument("--timeout", type=float, default=30.0)
    lt.add_argument("--out")
    lt.set_defaults(func=cmd_bench_latency)

    r = sub.add_parser("report", help="recompute metrics from recorded CSV files")
    r.add_argument("--input", default=".", help="directory with records/summary files")
    r.add_argument("--kind", choices=("aTPt", "aTPw"), default="aTPt")
    r.add_argument("--out")
    r.set_defaults(func=cmd_report)
    return p


def parse_args(argv: Sequence[str] | None = None) -> argparse.Namespace:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    args = parser.parse_args(argv)
    if args.config:
        try:
            config = read_config(args.config)
        except OSError as exc:
            parser.error(f"cannot read config: {exc}")
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        unknown = set(config) - known
        if unknown:
            parser.error(f"unknown config key(s): {', '.join(sorted(unknown))}")
        appended = {a.dest for a in sub._actions if isinstance(a, argparse._AppendAction)}
        sub.set_defaults(**{k: v for k, v in config.items() if k not in appended})
        args = parser.parse_args(argv)
        for key in appended & set(config):
            if getattr(args, key) is None:
                setattr(args, key, [v.strip() for v in config[key].split(",") if v.strip()])
    return args


def main(argv: Sequence[str] | None = None) -> int:
    args = parse_args(argv)
    try:
        return args.func(args)
    except (CliError, FileNotFoundError, ValueError) as exc:
        print(f"gqlbench {args.command}: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - top-level diagnostic
        from .bench import EndpointUnreachable

        if isinstance(exc, EndpointUnreachable):
            print(f"gqlbench {args.command}: {exc}", file=sys.stderr)
            return 1
        raise


if __name__ == "__main__":
    sys.exit(main())
