"""Batch entry point: ``exrisk <subcommand> --config <path> [--out DIR] [--seed U64] [--threads K]``.

Exit codes: 0 when every check passes, 1 when any check fails, 2 on a
configuration error. Output files are written atomically.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__, harness
from .config import ConfigError, load
from .parallel import THREADS_ENV

SCHEMA_VERSION = 1

RUNNERS = {
    "concentration": harness.run_concentration,
    "margin": harness.verify_margin,
    "second-order": harness.verify_second_order,
    "representation": harness.verify_representation,
    "tails": harness.verify_tail_lemma,
    "scaling": harness.scaling_study,
    "curves": harness.run_curves,
}


def _plain(obj):
    """Recursively convert numpy scalars/arrays and non-finite floats for JSON."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        obj = float(obj)
        return obj if math.isfinite(obj) else None
    return obj


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["" if v is None else repr(float(v)) if isinstance(v, (float, np.floating)) else v
                    for v in _plain(row)])
    return buf.getvalue()


def report_document(report: harness.Report, cfg) -> dict:
    return _plain({"schema_version": SCHEMA_VERSION, "version": __version__, "config": cfg.to_dict(),
                   **report.to_dict()})


def write_outputs(report: harness.Report, cfg, out: Path) -> list:
    formats = cfg.get("output.formats")
    written = []
    if "json" in formats:
        doc = report_document(report, cfg)
        write_atomic(out / "report.json", json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n")
        written.append(out / "report.json")
    if "csv" in formats:
        for name, (header, rows) in sorted(report.tables.items()):
            write_atomic(out / f"{name}.csv", _csv_text(header, rows))
            written.append(out / f"{name}.csv")
    return written


def _print_describe(info: dict, out=None):
    out = out or sys.stdout
    for key in ("A1", "A2", "K", "C", "c_M", "s_box", "s_tilde0_proxy", "A_J_proxy", "A_inf", "A0_proxy",
                "squared_bias", "g0_sup"):
        print(f"{key:>15} = {info[key]:.6g}", file=out)
    print("regime:", file=out)
    for r in info["regime"]:
        mark = "pass" if r["passed"] else "FAIL"
        print(f"  [{mark}] {r['name']}: {r['lhs']:.4g} vs {r['rhs']:.4g}", file=out)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="exrisk", description="Monte Carlo checks of excess-risk concentration.")
    p.add_argument("--version", action="version", version=f"exrisk {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in (*RUNNERS, "describe"):
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, help="INI or JSON experiment configuration")
        s.add_argument("--seed", type=int, help="override plan.seed")
        s.add_argument("--threads", type=int, help=f"worker threads (default ${THREADS_ENV} or 1)")
        if name != "describe":
            s.add_argument("--out", help="output directory (overrides output.directory)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load(args.config)
        if args.seed is not None:
            cfg = cfg.with_value("plan.seed", args.seed)
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads: must be >= 1")
        plan = cfg.plan(threads=args.threads)
    except ConfigError as exc:
        print(f"exrisk: configuration error: {exc}", file=sys.stderr)
        return 2
    if args.command == "describe":
        _print_describe(harness.describe(plan))
        return 0
    report = RUNNERS[args.command](plan)
    out = Path(args.out or cfg.get("output.directory"))
    for path in write_outputs(report, cfg, out):
        print(path)
    for c in report.checks:
        print(f"[{'PASS' if c.passed else 'FAIL'}] {c.name}: value={c.value:.6g} threshold={c.threshold:.6g}")
    failed = report.payload.get("failed_trials", [])
    if failed:
        print(f"{len(failed)} trial(s) flagged with numeric failures", file=sys.stderr)
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
