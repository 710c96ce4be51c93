"""Running experiments, persisting result records and summarising them."""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

from .config import ExperimentConfig, bundled_config_dir, load_config
from .experiments import REGISTRY, Context, default_cache_dir

CSV_FIELDS = ["experiment", "config_hash", "name", "value", "kind", "target", "tolerance", "status"]


class RecordError(ValueError):
    """A result file is unreadable or malformed."""


@dataclass
class ResultRecord:
    experiment: str
    config_hash: str
    config: dict
    measurements: list
    diagnostics: dict = field(default_factory=dict)
    wall_time: float = 0.0

    @property
    def passed(self) -> bool:
        return all(m["passed"] for m in self.measurements)

    @property
    def scalars(self) -> dict:
        return {m["name"]: m["value"] for m in self.measurements}

    def as_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "config_hash": self.config_hash,
            "config": self.config,
            "measurements": self.measurements,
            "diagnostics": self.diagnostics,
            "wall_time": self.wall_time,
            "passed": self.passed,
        }


def run_experiment(cfg: ExperimentConfig, cache_dir: Path | None = None) -> ResultRecord:
    spec = REGISTRY[cfg.experiment]
    ctx = Context(cfg.seed, cfg.workers, Path(cache_dir) if cache_dir else default_cache_dir())
    ctx.cache_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    rows = spec.func(cfg.params, cfg.tolerances, ctx)
    wall = time.perf_counter() - t0
    return ResultRecord(
        cfg.experiment,
        cfg.hash,
        cfg.raw,
        [_plain(m.as_dict()) for m in rows],
        _plain(ctx.diagnostics),
        wall,
    )


def _plain(obj):
    """JSON-safe copy (numpy scalars to Python, tuples to lists)."""
    return json.loads(json.dumps(obj, default=lambda o: o.item() if hasattr(o, "item") else str(o)))


def record_stem(cfg: ExperimentConfig, path: Path | None = None) -> str:
    if cfg.prefix:
        return cfg.prefix
    return path.stem if path is not None else cfg.experiment


def write_record(record: ResultRecord, out_dir, stem: str) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    jpath, cpath = out / f"{stem}.json", out / f"{stem}.csv"
    jpath.write_text(json.dumps(record.as_dict(), indent=2))
    with open(cpath, "w", newline="") as fh:
        w = csv.DictWriter(fh, CSV_FIELDS)
        w.writeheader()
        for m in record.measurements:
            w.writerow(_csv_row(record.experiment, record.config_hash, m))
    return jpath, cpath


def _csv_row(experiment, config_hash, m) -> dict:
    return {
        "experiment": experiment,
        "config_hash": config_hash,
        "name": m["name"],
        "value": repr(m["value"]),
        "kind": m["kind"],
        "target": "" if m["target"] is None else repr(m["target"]),
        "tolerance": "" if m["tolerance"] is None else repr(m["tolerance"]),
        "status": "PASS" if m["passed"] else "FAIL",
    }


def bundled_suite() -> list[Path]:
    return sorted(bundled_config_dir().glob("*.json"))


def read_record(path) -> ResultRecord:
    try:
        d = json.loads(Path(path).read_text())
        return ResultRecord(d["experiment"], d["config_hash"], d["config"], d["measurements"], d.get("diagnostics", {}), d.get("wall_time", 0.0))
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise RecordError(f"{path}: corrupt result record ({exc})") from None


def report(result_dir, expected: list[str] | None = None) -> list[dict]:
    """One row per measurement of every record, plus MISSING rows for absent experiments.

    ``expected`` lists record stems that should be present (by default the
    bundled suite).  Raises ``FileNotFoundError`` when no records exist.
    """
    d = Path(result_dir)
    files = sorted(d.glob("*.json")) if d.is_dir() else []
    if not files:
        raise FileNotFoundError(f"no result records in {result_dir}")
    rows, seen = [], set()
    for f in files:
        rec = read_record(f)
        seen.add(f.stem)
        for m in rec.measurements:
            rows.append({"record": f.stem, **_csv_row(rec.experiment, rec.config_hash, m)})
    if expected is None:
        expected = [p.stem for p in bundled_suite()]
    for stem in expected:
        if stem not in seen:
            exp = load_config(bundled_config_dir() / f"{stem}.json").experiment if (bundled_config_dir() / f"{stem}.json").exists() else stem
            rows.append(
                {"record": stem, "experiment": exp, "config_hash": "", "name": "", "value": "", "kind": "", "target": "", "tolerance": "", "status": "MISSING"}
            )
    return rows


def format_table(rows: list[dict]) -> str:
    cols = ["record", "name", "target", "value", "tolerance", "status"]
    width = {c: max(len(c), *(len(str(r[c])) for r in rows)) for c in cols}
    line = lambda r: "  ".join(str(r[c]).ljust(width[c]) for c in cols)
    return "\n".join([line({c: c for c in cols}), line({c: "-" * width[c] for c in cols})] + [line(r) for r in rows])
