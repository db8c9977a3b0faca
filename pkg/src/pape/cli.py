"""Command-line interface.

Subcommands ``validate``, ``estimate``, ``evaluate``, ``sweep`` and ``synth``.
Settings come from built-in defaults, then an optional JSON ``--config``
file, then command-line flags (flags win).

Exit codes: 0 success, 1 validation failure, 2 I/O failure, 3 internal error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from . import __version__
from .data_model import DatasetSchema, Role, load_dataset, save_dataset, split_chunks
from .errors import PapeError, ValidationError, quiet
from .estimators.methods import METHOD_ORDER
from .estimators.metrics import MetricKind, metric_of
from .estimators.suite import EstimatorSuite, SuiteConfig
from .evaluation import (
    SWEEP_SIZES,
    SWEEP_STEP,
    EstimationPoint,
    EvaluationCase,
    build_report,
    estimate_chunks,
    filter_case,
    prepare_case,
    run_evaluation,
    sample_size_sweep,
)
from .synthetic import ShiftSpec, default_schema, generate

log = logging.getLogger("pape")

EXIT_OK, EXIT_VALIDATION, EXIT_IO, EXIT_INTERNAL = 0, 1, 2, 3
DEFAULT_METRICS = ("accuracy", "auroc", "f1")


@dataclass
class RunConfig:
    reference: Optional[str] = None
    production: Optional[str] = None
    schema: Optional[dict] = None
    cases: list = field(default_factory=list)
    chunk_size: int = 2000
    step: Optional[int] = None
    metrics: tuple = DEFAULT_METRICS
    methods: tuple = METHOD_ORDER
    seed: int = 0
    weight_clip: float = 50.0
    doc_n_resamples: int = 50
    n_boot: int = 500
    sizes: tuple = SWEEP_SIZES
    sweep_step: int = SWEEP_STEP
    out: str = "out"
    workers: Optional[int] = None

    @property
    def n_workers(self) -> int:
        return self.workers if self.workers else (os.cpu_count() or 1)

    def suite_config(self) -> SuiteConfig:
        return SuiteConfig(weight_clip=self.weight_clip, doc_n_resamples=self.doc_n_resamples, seed=self.seed)

    def dataset_schema(self) -> DatasetSchema:
        if self.schema is None:
            raise ValidationError("no schema given (use --schema or a 'schema' entry in the config)")
        return DatasetSchema.from_dict(self.schema)

    def case_list(self) -> list[dict]:
        if self.cases:
            return [{"id": str(c.get("id", i)), **c} for i, c in enumerate(self.cases)]
        if not (self.reference and self.production):
            raise ValidationError("need --reference and --production (or 'cases' in the config)")
        return [{"id": "case0", "reference": self.reference, "production": self.production}]

    def manifest(self, command: str) -> dict:
        # worker count and output location do not affect results
        echo = asdict(self)
        echo.pop("workers")
        echo.pop("out")
        return {"command": command, "version": __version__, "seed": self.seed, "config": echo}


def _read_json(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON ({exc})") from None


def _csv_list(text: str) -> tuple:
    return tuple(part.strip() for part in text.split(",") if part.strip())


def build_config(args: argparse.Namespace) -> RunConfig:
    values: dict = {}
    if getattr(args, "config", None):
        values.update(_read_json(args.config))
    overrides = {
        "reference": args.reference,
        "production": args.production,
        "chunk_size": args.chunk_size,
        "step": args.step,
        "metrics": _csv_list(args.metrics) if args.metrics else None,
        "methods": _csv_list(args.methods) if args.methods else None,
        "seed": args.seed,
        "weight_clip": args.weight_clip,
        "doc_n_resamples": args.doc_resamples,
        "n_boot": args.n_boot,
        "out": args.out,
        "workers": args.workers,
        "sizes": tuple(int(s) for s in _csv_list(args.sizes)) if getattr(args, "sizes", None) else None,
    }
    values.update({k: v for k, v in overrides.items() if v is not None})
    if args.schema:
        values["schema"] = _read_json(args.schema)
    elif isinstance(values.get("schema"), str):
        values["schema"] = _read_json(values["schema"])
    known = set(RunConfig.__dataclass_fields__)
    unknown = set(values) - known
    if unknown:
        raise ValidationError(f"unknown configuration keys: {sorted(unknown)}")
    for key in ("metrics", "methods", "sizes"):
        if key in values:
            values[key] = tuple(values[key])
    cfg = RunConfig(**values)
    for m in cfg.metrics:
        MetricKind(m)
    bad = set(cfg.methods) - set(METHOD_ORDER)
    if bad:
        raise ValidationError(f"unknown methods {sorted(bad)}; choose from {list(METHOD_ORDER)}")
    if cfg.chunk_size < 1 or (cfg.step is not None and cfg.step < 1):
        raise ValidationError("chunk size and step must be positive")
    return cfg


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return "" if np.isnan(value) else repr(float(value))
    return str(value)


def _write_csv(path: Path, columns: list[str], rows: list[dict]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row.get(c)) for c in columns])


def _write_manifest(out: Path, cfg: RunConfig, command: str, **extra) -> None:
    manifest = cfg.manifest(command)
    manifest.update(extra)
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_cases(cfg: RunConfig, need_production_labels: bool = False) -> list[EvaluationCase]:
    schema = cfg.dataset_schema()
    cases = []
    for spec in cfg.case_list():
        reference = load_dataset(spec["reference"], schema, Role.REFERENCE)
        production = load_dataset(spec["production"], schema, Role.PRODUCTION)
        if need_production_labels and production.labels is None:
            raise ValidationError(f"{spec['production']}: evaluation needs production labels")
        cases.append(EvaluationCase(spec["id"], reference, production, cfg.chunk_size))
    return cases


# ---------------------------------------------------------------------------
# commands


def cmd_validate(cfg: RunConfig) -> int:
    accepted = True
    for case in _load_cases(cfg):
        for row in prepare_case(case, cfg.metrics, cfg.n_boot, cfg.seed):
            print(f"{case.case_id}: warning: {row['metric']}: {row['reason']}")
        verdict = filter_case(case)
        if verdict:
            print(f"{case.case_id}: accept ({case.reference.n_rows} reference rows, {case.chunk_count} production chunks)")
        else:
            accepted = False
            for reason in verdict.reasons:
                print(f"{case.case_id}: reject: {reason}")
    return EXIT_OK if accepted else EXIT_VALIDATION


ESTIMATE_COLUMNS = [
    "case_id", "chunk_index", "start_index", "chunk_size", "metric", "method", "estimate", "realized", "flags", "error",
]


def cmd_estimate(cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    rows = []
    for case in _load_cases(cfg):
        suite = EstimatorSuite(cfg.methods, cfg.suite_config()).fit(case.reference, cfg.metrics, cfg.chunk_size)
        chunks = split_chunks(case.production, cfg.chunk_size, cfg.step)
        results = estimate_chunks(suite, case.production, chunks, cfg.n_workers)
        labeled = case.production.labels is not None
        for j, (chunk, res) in enumerate(zip(chunks, results)):
            for kind in suite.kinds:
                realized = None
                if labeled:
                    try:
                        with quiet():
                            realized = metric_of(kind, chunk)
                    except PapeError:
                        realized = None
                for method in suite.methods:
                    est = res[(method, kind)]
                    rows.append(
                        {
                            "case_id": case.case_id,
                            "chunk_index": j,
                            "start_index": chunk.start_index,
                            "chunk_size": chunk.size,
                            "metric": kind.value,
                            "method": method,
                            "estimate": est.value,
                            "realized": realized,
                            "flags": ";".join(est.flags),
                            "error": est.error,
                        }
                    )
    any_labels = any(r["realized"] is not None for r in rows)
    columns = ESTIMATE_COLUMNS if any_labels else [c for c in ESTIMATE_COLUMNS if c != "realized"]
    _write_csv(out / "estimates.csv", columns, rows)
    _write_manifest(out, cfg, "estimate", n_records=len(rows))
    print(f"wrote {len(rows)} estimates to {out / 'estimates.csv'}")
    return EXIT_OK


def points_from_estimates(path: str, cases: list[EvaluationCase]) -> list[EstimationPoint]:
    """Rebuild evaluation points from an ``estimates.csv`` written by ``estimate``."""
    frame = pd.read_csv(path, dtype={"case_id": str, "flags": str, "error": str}, float_precision="round_trip")
    if "realized" not in frame.columns:
        raise ValidationError(f"{path}: has no realized column; rerun estimate with labeled production data")
    by_id = {c.case_id: c for c in cases}
    points = []
    for (case_id, chunk_index, metric), group in frame.groupby(["case_id", "chunk_index", "metric"], sort=False):
        case = by_id.get(case_id)
        kind = MetricKind(metric)
        if case is None:
            raise ValidationError(f"{path}: unknown case id {case_id!r}")
        se = case.se.get(kind)
        realized = group["realized"].iloc[0]
        if not isinstance(se, float) or not se > 0 or not np.isfinite(realized):
            continue
        with quiet():
            ref_value = metric_of(kind, case.reference)
        points.append(
            EstimationPoint(
                case_id,
                int(chunk_index),
                int(group["start_index"].iloc[0]),
                kind,
                float(realized),
                ref_value,
                se,
                {m: float(v) for m, v in zip(group["method"], group["estimate"])},
            )
        )
    return points


def cmd_evaluate(cfg: RunConfig, estimates: Optional[str] = None) -> int:
    out = _out_dir(cfg)
    cases = _load_cases(cfg, need_production_labels=True)
    if estimates is None:
        report, _ = run_evaluation(
            cases, cfg.metrics, cfg.methods, cfg.suite_config(), cfg.n_boot, cfg.seed, cfg.step, cfg.n_workers
        )
    else:
        audit, se_rows = [], []
        for case in cases:
            audit += prepare_case(case, cfg.metrics, cfg.n_boot, cfg.seed)
            se_rows += [
                {"case_id": case.case_id, "metric": MetricKind(k).value, "se": v}
                for k, v in case.se.items()
                if isinstance(v, float)
            ]
            verdict = filter_case(case)
            if not verdict:
                audit += [{"case_id": case.case_id, "metric": "", "reason": r} for r in verdict.reasons]
        accepted = [c for c in cases if filter_case(c)]
        points = points_from_estimates(estimates, accepted)
        methods = [m for m in cfg.methods if any(m in p.estimates for p in points)]
        report = build_report(points, methods, cfg.metrics)
        report.standard_errors, report.audit = se_rows, audit
    _write_csv(out / "summary.csv", ["method", "metric", "maste", "rmsste", "n_points"], report.summary)
    _write_csv(out / "buckets.csv", ["method", "metric", "center", "maste", "count"], report.buckets)
    _write_csv(out / "standard_errors.csv", ["case_id", "metric", "se"], report.standard_errors)
    _write_csv(out / "audit.csv", ["case_id", "metric", "reason"], report.audit)
    _write_manifest(out, cfg, "evaluate", estimates=estimates)
    for row in report.summary:
        print(f"{row['method']:>8} {row['metric']:>9}  MASTE {row['maste']:.3f}  RMSSTE {row['rmsste']:.3f}  n={row['n_points']}")
    return EXIT_OK


def cmd_sweep(cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    rows = []
    for case in _load_cases(cfg, need_production_labels=True):
        for kind in cfg.metrics:
            for r in sample_size_sweep(
                case, kind, cfg.sizes, cfg.sweep_step, cfg.methods, cfg.seed, cfg.suite_config(), cfg.n_workers
            ):
                rows.append(
                    {
                        "case_id": case.case_id,
                        "metric": MetricKind(kind).value,
                        "size": r.size,
                        "method": r.method,
                        "mae": r.mae,
                        "n_chunks": r.n_chunks,
                        "status": "skipped: " + r.skipped if r.skipped else "ok",
                    }
                )
    _write_csv(out / "sweep.csv", ["case_id", "metric", "size", "method", "mae", "n_chunks", "status"], rows)
    _write_manifest(out, cfg, "sweep")
    print(f"wrote {len(rows)} rows to {out / 'sweep.csv'}")
    return EXIT_OK


def cmd_synth(spec_path: str, out_dir: str) -> int:
    spec = ShiftSpec.from_dict(_read_json(spec_path))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    reference, production, oracle = generate(spec)
    schema = default_schema(spec.n_features)
    save_dataset(out / "reference.csv", reference, schema)
    save_dataset(out / "production.csv", production, schema)
    oracle_rows = [{"role": "reference", "row": i, "true_probability": p} for i, p in enumerate(oracle.reference_proba)]
    oracle_rows += [{"role": "production", "row": i, "true_probability": p} for i, p in enumerate(oracle.production_proba)]
    _write_csv(out / "oracle.csv", ["role", "row", "true_probability"], oracle_rows)
    with open(out / "schema.json", "w", encoding="utf-8") as fh:
        json.dump(schema.to_dict(), fh, indent=2)
        fh.write("\n")
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump({"command": "synth", "version": __version__, "seed": spec.seed, "spec": spec.to_dict()}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote synthetic pair to {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--reference", help="reference CSV (labeled)")
    p.add_argument("--production", help="production CSV")
    p.add_argument("--schema", help="JSON schema file: features, score, prediction, label")
    p.add_argument("--chunk-size", type=int)
    p.add_argument("--step", type=int, help="rows between chunk starts (default: chunk size)")
    p.add_argument("--metrics", help=f"comma-separated, from {[k.value for k in MetricKind]}")
    p.add_argument("--methods", help=f"comma-separated, from {list(METHOD_ORDER)}")
    p.add_argument("--seed", type=int)
    p.add_argument("--weight-clip", type=float)
    p.add_argument("--doc-resamples", type=int)
    p.add_argument("--n-boot", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--workers", type=int, help="worker processes (default: CPU count)")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pape", description="Label-free performance estimation under covariate shift")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in [
        ("validate", "check schema and case filtering rules"),
        ("estimate", "estimate per-chunk performance"),
        ("evaluate", "compare estimates with realized performance"),
        ("sweep", "estimation error versus chunk size"),
    ]:
        p = sub.add_parser(name, help=help_)
        _add_run_flags(p)
        if name == "evaluate":
            p.add_argument("--estimates", help="estimates.csv from a previous estimate run")
        if name == "sweep":
            p.add_argument("--sizes", help="comma-separated chunk sizes")
    p = sub.add_parser("synth", help="generate a synthetic reference/production pair")
    p.add_argument("spec", help="JSON ShiftSpec file")
    p.add_argument("--out", default="synth")
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "synth":
            return cmd_synth(args.spec, args.out)
        cfg = build_config(args)
        if args.command == "validate":
            return cmd_validate(cfg)
        if args.command == "estimate":
            return cmd_estimate(cfg)
        if args.command == "evaluate":
            return cmd_evaluate(cfg, args.estimates)
        return cmd_sweep(cfg)
    except (OSError, pd.errors.ParserError, UnicodeDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
