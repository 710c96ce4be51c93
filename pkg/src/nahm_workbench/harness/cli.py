"""Command line entry point ``nahm-workbench``.

Exit codes: 0 success, 1 a tolerance failed, 2 config/schema error,
3 missing input (config, cache or results), 4 corrupt file.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from pathlib import Path

from ..nahm import CacheFormatError, read_frames
from .config import ConfigError, bundled_config_dir, load_config
from .experiments import REGISTRY, MissingCacheError
from .runner import CSV_FIELDS, RecordError, bundled_suite, format_table, record_stem, report, run_experiment, write_record

EXIT_OK, EXIT_FAIL, EXIT_SCHEMA, EXIT_MISSING, EXIT_CORRUPT = 0, 1, 2, 3, 4


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nahm-workbench", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run experiments from config files")
    r.add_argument("configs", nargs="*", help="config paths or bundled config names")
    r.add_argument("--config", action="append", default=[], help="config path (repeatable)")
    r.add_argument("--all", action="store_true", help="run every bundled config")
    r.add_argument("--list", action="store_true", help="list built-in experiments and bundled configs")
    r.add_argument("--out", default="results", help="output directory (default: results)")
    r.add_argument("--workers", type=int, help="worker processes for parallel experiments")
    r.add_argument("--seed", type=int, help="override the config seed")

    rep = sub.add_parser("report", help="summarise result records")
    rep.add_argument("result_dir")
    rep.add_argument("--out", help="write the summary table as CSV here")

    c = sub.add_parser("cache", help="write or verify Nahm frame caches")
    csub = c.add_subparsers(dest="action", required=True)
    cw = csub.add_parser("write", help="compute the frames of a nahm_transform config into the cache")
    cw.add_argument("--config", default="nahm_transform")
    cw.add_argument("--workers", type=int)
    cv = csub.add_parser("verify", help="check frame cache files (default: all in the cache dir)")
    cv.add_argument("paths", nargs="*")
    return p


def _cmd_list() -> int:
    print("experiments:")
    for name, spec in sorted(REGISTRY.items(), key=lambda kv: kv[1].criterion):
        print(f"  {name:22s} criterion {spec.criterion}: {spec.description}")
    print(f"bundled configs ({bundled_config_dir()}):")
    for p in bundled_suite():
        print(f"  {p.stem}")
    return EXIT_OK


def _cmd_run(args) -> int:
    if args.list:
        return _cmd_list()
    paths = list(args.configs) + list(args.config)
    if args.all:
        paths += [str(p) for p in bundled_suite()]
    if not paths:
        print("error: no config given (use --config, --all or --list)", file=sys.stderr)
        return EXIT_SCHEMA
    status = EXIT_OK
    for path in paths:
        try:
            cfg = load_config(path).with_overrides(seed=args.seed, workers=args.workers)
        except ConfigError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_SCHEMA
        except FileNotFoundError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_MISSING
        try:
            rec = run_experiment(cfg)
        except MissingCacheError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_MISSING
        except CacheFormatError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CORRUPT
        out = Path(cfg.output_dir or args.out)
        write_record(rec, out, record_stem(cfg, Path(path)))
        for m in rec.measurements:
            tag = "PASS" if m["passed"] else "FAIL"
            print(f"{tag} {cfg.experiment}.{m['name']} = {m['value']!r} ({rec.config_hash[:10]})")
        if not rec.passed:
            status = EXIT_FAIL
    return status


def _cmd_report(args) -> int:
    try:
        rows = report(args.result_dir)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except RecordError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CORRUPT
    print(format_table(rows))
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.DictWriter(fh, ["record"] + CSV_FIELDS)
            w.writeheader()
            w.writerows(rows)
    if any(r["status"] == "MISSING" for r in rows):
        return EXIT_MISSING
    return EXIT_FAIL if any(r["status"] == "FAIL" for r in rows) else EXIT_OK


def _cmd_cache(args) -> int:
    from .experiments import default_cache_dir

    if args.action == "write":
        try:
            cfg = load_config(args.config).with_overrides(workers=args.workers)
        except ConfigError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_SCHEMA
        except FileNotFoundError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_MISSING
        if cfg.experiment != "nahm_transform":
            print("error: cache write needs a nahm_transform config", file=sys.stderr)
            return EXIT_SCHEMA
        rec = run_experiment(cfg)
        print(f"frames cached in {default_cache_dir()} ({rec.wall_time:.1f} s)")
        return EXIT_OK
    paths = [Path(p) for p in args.paths] or sorted(default_cache_dir().glob("frames-*.bin"))
    if not paths:
        print(f"error: no frame caches in {default_cache_dir()}", file=sys.stderr)
        return EXIT_MISSING
    status = EXIT_OK
    for p in paths:
        if not p.exists():
            print(f"MISSING {p}")
            status = max(status, EXIT_MISSING)
            continue
        try:
            c = read_frames(p)
            print(f"OK {p} L={c.L} grid={c.grid} q={c.q}")
        except CacheFormatError as exc:
            print(f"CORRUPT {exc}")
            status = EXIT_CORRUPT
    return status


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    handler = {"run": _cmd_run, "report": _cmd_report, "cache": _cmd_cache}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
