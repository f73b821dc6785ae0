"""Command line entry point: ``facegrowth <command> [options]``.

Commands: synth, ingest, align, measure, label, correlate, run, report.
Exit status: 0 success, 1 validation failure (bad config or input data),
2 runtime failure.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import platform
import resource
import sys
import time
import traceback
from pathlib import Path

import numpy as np

from . import __version__, analysis, cephalometrics, evaluation, features, geometry, synthgen
from .config import ConfigError, RunConfig, load as load_config
from .data_model import Cohort, ValidationError, cohort_summary, ingest_landmarks, landmarks_to_csv
from .models import backend, pinned_hyperparameters

log = logging.getLogger("facegrowth")

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2


class Context:
    """Output directory bookkeeping: every artifact is hashed into the command's metadata file."""

    def __init__(self, cfg: RunConfig, out: Path, command: str, threads: int):
        self.cfg = cfg
        self.out = out
        self.command = command
        self.threads = threads
        self.artifacts: dict[str, str] = {}
        self.stage = "setup"
        self.extra: dict = {}
        out.mkdir(parents=True, exist_ok=True)

    def write(self, name: str, text: str) -> Path:
        path = self.out / name
        path.parent.mkdir(parents=True, exist_ok=True)
        data = text.encode("utf-8")
        path.write_bytes(data)
        self.artifacts[name] = hashlib.sha256(data).hexdigest()
        log.info("wrote %s", path)
        return path

    def write_json(self, name: str, obj) -> Path:
        body = {"config_digest": self.cfg.digest, "seed": self.cfg.seed, **obj}
        return self.write(name, json.dumps(body, indent=2, sort_keys=False, default=_json_default) + "\n")

    def metadata(self, status: str, error: str | None = None) -> dict:
        meta = {
            "command": self.command,
            "status": status,
            "config_digest": self.cfg.digest,
            "seed": self.cfg.seed,
            "config": self.cfg.raw,
            "facegrowth_version": __version__,
            "kernel_backend": backend.BACKEND,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "threads": self.threads,
            "artifacts": dict(sorted(self.artifacts.items())),
            **self.extra,
        }
        if error is not None:
            meta["failed_stage"] = self.stage
            meta["error"] = error
        return meta


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


# pipeline stages --------------------------------------------------------------

def load_cohort(ctx: Context, input_path: str | None) -> Cohort:
    """Landmark file from --input, else the configured source (file or synthetic)."""
    cfg = ctx.cfg
    ctx.stage = "input"
    path = Path(input_path) if input_path else cfg.path
    if path is not None:
        if not path.exists():
            raise ValidationError(f"input file {path} does not exist")
        cohort, report = ingest_landmarks(path, cfg.schema)
        report.emit(sys.stderr, sidecar=ctx.out / "ingest_report.txt")
        ctx.artifacts["ingest_report.txt"] = hashlib.sha256(
            (ctx.out / "ingest_report.txt").read_bytes()).hexdigest()
        for w in report.warnings:
            log.warning(w)
        ctx.extra["ingest"] = {"rejected": len(report.rejects), "excluded": len(report.excluded),
                               "warnings": len(report.warnings), "source": str(path)}
    else:
        cohort = synthgen.generate(cfg.synth, cfg.schema)
        ctx.extra["synth"] = cfg.synth.to_dict()
    if len(cohort) == 0:
        raise ValidationError("no patient could be incorporated from the input")
    log.info("cohort: %d patients", len(cohort))
    return cohort


def stage_align(ctx: Context, cohort: Cohort):
    ctx.stage = "align"
    al = ctx.cfg.alignment
    aligned, diag = geometry.align_cohort(cohort, mode=al["mode"], tol=float(al["tol"]),
                                          max_iter=int(al["max_iter"]))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("patient_id", "stage", "landmark", "x", "y"))
    names = cohort.schema.names
    for (pid, st), arr in sorted(aligned.items()):
        for name, (x, y) in zip(names, arr):
            w.writerow((pid, st, name, repr(float(x)), repr(float(y))))
    ctx.write("aligned.csv", buf.getvalue())
    scale = geometry.scale_diagnostics(cohort)
    ctx.write_json("align_diagnostics.json", {"alignment": diag, "scale": scale})
    return aligned


def stage_measure(ctx: Context, cohort: Cohort):
    ctx.stage = "measure"
    meas = cephalometrics.measure_cohort(cohort, ctx.cfg.panel())
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("patient_id", "stage", "measurement", "value"))
    for (pid, st), vals in sorted(meas.items()):
        for name, v in vals.items():
            w.writerow((pid, st, name, repr(float(v))))
    ctx.write("measurements.csv", buf.getvalue())
    return meas


def stage_label(ctx: Context, meas, balanced: bool):
    ctx.stage = "label"
    labels, stats_out, deltas_by_target = {}, {}, {}
    for target in cephalometrics.TARGETS:
        dres = analysis.growth_deltas(meas, target)
        lab, st = analysis.label(dres.deltas)
        entry = {"mean": st.mean, "std": st.std, "lower": st.lower, "upper": st.upper,
                 "counts": dict(zip(analysis.CLASS_NAMES, st.counts)), "degenerate": st.degenerate,
                 "std_convention": st.std_convention, "note": st.note, "excluded": dres.excluded}
        if balanced:
            lab = analysis.balanced_relabel(dres.deltas, lab)
            entry["balanced_counts"] = dict(zip(analysis.CLASS_NAMES, analysis.class_counts(lab)))
        labels[target] = lab
        stats_out[target] = entry
        deltas_by_target[target] = {d.patient_id: d.value for d in dres.deltas}
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("patient_id", "target", "class", "delta"))
    for target in cephalometrics.TARGETS:
        for pid in sorted(labels[target]):
            w.writerow((pid, f"{target}(18-9)", analysis.CLASS_NAMES[labels[target][pid]],
                        repr(deltas_by_target[target][pid])))
    ctx.write("labels.csv", buf.getvalue())
    ctx.write_json("label_stats.json", {"balanced": balanced, "targets": stats_out})
    return labels


def stage_correlate(ctx: Context, cohort: Cohort, meas, labels):
    ctx.stage = "correlate"
    summary = {}
    for target in cephalometrics.TARGETS:
        try:
            cm = analysis.period_correlations(meas, target)
        except ValidationError as exc:
            log.warning("correlations for %s skipped: %s", target, exc)
            summary[target] = {"error": str(exc)}
            continue
        heads = [f"{a}-{b}" for a, b in cm.periods]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["period", *heads])
        for i, h in enumerate(heads):
            w.writerow([h, *(repr(float(v)) for v in cm.values[i])])
        ctx.write(f"correlations_{target}.csv", buf.getvalue())
        summary[target] = {"n_patients": cm.n_patients,
                           "zero_variance": [f"{a}-{b}" for a, b in cm.zero_variance]}
    groups = {}
    for cls, name in enumerate(analysis.CLASS_NAMES):
        accept = analysis.unanimous_filter(labels, cls)
        try:
            traj = analysis.mean_trajectories(cohort, accept)
            traj.pop("_arrays")
            groups[name] = traj
        except ValidationError as exc:
            groups[name] = {"n_patients": 0, "error": str(exc)}
    ctx.write_json("trajectories.json", {"frame": "Sella at origin, Nasion on +y", "groups": groups})
    ctx.write_json("correlations.json", {"targets": summary})


def stage_features(ctx: Context, cohort: Cohort, aligned, meas, labels):
    ctx.stage = "features"
    transformed = {(c.patient_id, c.stage): geometry.transform_to_sn_frame(c) for c in cohort.cephalograms()}
    tables = {}
    widths = {}
    for sc in ctx.cfg.scenarios:
        tab = features.assemble(cohort, aligned, meas, labels, sc, transformed=transformed,
                                panel_names=ctx.cfg.panel_names)
        if tab.excluded:
            log.warning("%s: %d patients excluded", sc, len(tab.excluded))
        ctx.write(f"features/{sc.slug}.csv", tab.to_csv())
        tables[sc.key] = tab
        widths[sc.key] = {"width": tab.width, "rows": len(tab.patient_ids), "excluded": list(tab.excluded)}
    ctx.extra["feature_tables"] = widths
    ctx.extra["feature_note"] = features.AGE_NOTE
    return tables


def _cpu_seconds() -> float:
    # this process plus finished worker processes
    own = resource.getrusage(resource.RUSAGE_SELF)
    kids = resource.getrusage(resource.RUSAGE_CHILDREN)
    return own.ru_utime + own.ru_stime + kids.ru_utime + kids.ru_stime


def stage_run(ctx: Context, tables):
    ctx.stage = "evaluate"
    cfg = ctx.cfg
    start = time.perf_counter()
    cpu_start = _cpu_seconds()

    def progress(i, n, rec):
        log.info("[%d/%d] %s %s mean=%.4f", i, n, rec.scenario, rec.model, rec.mean)

    records = evaluation.run_grid(tables, cfg.models, cfg.plan, cfg.training, threads=ctx.threads,
                                  two_sided=cfg.two_sided, progress=progress)
    elapsed = time.perf_counter() - start
    cpu = _cpu_seconds() - cpu_start
    ctx.stage = "report"
    table = evaluation.aggregate(records)
    ctx.write("results.csv", table.to_csv())
    ctx.write("report.txt", table.render() + "\n")
    acc = {f"{r.scenario.key}|{r.model}": list(r.accuracies) for r in records}
    ctx.write_json("accuracies.json", {"folds": cfg.plan.folds, "repeats": cfg.plan.repeats,
                                       "accuracies": acc})
    failed = [{"scenario": r.scenario.key, "model": r.model, "failures": list(r.failures)}
              for r in records if r.failed]
    ctx.extra.update({
        "n_records": len(records), "failed_cells": failed, "grid_seconds": round(elapsed, 3),
        "grid_cpu_seconds": round(cpu, 3),
        "cv_plan": {"folds": cfg.plan.folds, "repeats": cfg.plan.repeats, "stratified": cfg.plan.stratified,
                    "master_seed": cfg.plan.master_seed},
        "seed_derivation": {"folds": "(master, 'folds', repeat)",
                            "model": "(master, scenario key, model name, repeat, fold)"},
        "hyperparameters": pinned_hyperparameters(cfg.training),
        "baselines": {r.scenario.key: r.baseline for r in records},
    })
    return records


# commands -------------------------------------------------------------------------

def cmd_synth(ctx, args):
    if ctx.cfg.synth is None:
        raise ConfigError("synth needs input.source = synth")
    ctx.stage = "synth"
    cohort = synthgen.generate(ctx.cfg.synth, ctx.cfg.schema)
    ctx.extra["synth"] = ctx.cfg.synth.to_dict()
    ctx.write("landmarks.csv", landmarks_to_csv(cohort))
    _write_summary(ctx, cohort)


def _write_summary(ctx, cohort):
    summ = {str(st): {"n": a.count, "mean": a.mean, "std": a.std, "min": a.min, "max": a.max}
            for st, a in cohort_summary(cohort).items()}
    ctx.write_json("cohort_summary.json", {"n_patients": len(cohort), "age_by_stage": summ})


def cmd_ingest(ctx, args):
    cohort = load_cohort(ctx, args.input)
    ctx.write("landmarks.csv", landmarks_to_csv(cohort))
    _write_summary(ctx, cohort)


def cmd_align(ctx, args):
    stage_align(ctx, load_cohort(ctx, args.input))


def cmd_measure(ctx, args):
    stage_measure(ctx, load_cohort(ctx, args.input))


def cmd_label(ctx, args):
    cohort = load_cohort(ctx, args.input)
    stage_label(ctx, stage_measure(ctx, cohort), args.balanced or ctx.cfg.balanced)


def cmd_correlate(ctx, args):
    cohort = load_cohort(ctx, args.input)
    meas = stage_measure(ctx, cohort)
    labels = stage_label(ctx, meas, ctx.cfg.balanced)
    stage_correlate(ctx, cohort, meas, labels)


def cmd_run(ctx, args):
    cohort = load_cohort(ctx, args.input)
    if not (args.input or ctx.cfg.path):
        ctx.write("landmarks.csv", landmarks_to_csv(cohort))
    aligned = stage_align(ctx, cohort)
    meas = stage_measure(ctx, cohort)
    labels = stage_label(ctx, meas, args.balanced or ctx.cfg.balanced)
    stage_correlate(ctx, cohort, meas, labels)
    tables = stage_features(ctx, cohort, aligned, meas, labels)
    records = stage_run(ctx, tables)
    sig = sum(r.significant for r in records)
    print(f"{len(records)} records, {sig} significant; results in {ctx.out / 'results.csv'}")


def cmd_report(ctx, args):
    ctx.stage = "report"
    path = Path(args.results) if args.results else ctx.out / "results.csv"
    if not path.exists():
        raise ValidationError(f"results file {path} does not exist")
    try:
        records = evaluation.records_from_rows(evaluation.read_results_csv(path.read_text(encoding="utf-8")))
    except (KeyError, ValueError) as exc:
        raise ValidationError(f"{path}: {exc}") from exc
    text = evaluation.aggregate(records).render()
    ctx.write("report.txt", text + "\n")
    print(text)


COMMANDS = {
    "synth": (cmd_synth, "generate a synthetic cohort and write its landmark CSV"),
    "ingest": (cmd_ingest, "validate a landmark CSV and report rejected rows"),
    "align": (cmd_align, "Procrustes-align all cephalograms; write coordinates and diagnostics"),
    "measure": (cmd_measure, "compute the cephalometric measurement panel"),
    "label": (cmd_label, "growth deltas and three-class growth-direction labels"),
    "correlate": (cmd_correlate, "period correlations and mean group trajectories"),
    "run": (cmd_run, "full pipeline: align, measure, label, features, cross-validated model grid"),
    "report": (cmd_report, "render the best-results report from a results CSV"),
}


class _Parser(argparse.ArgumentParser):
    # usage errors are validation failures, not argparse's default status 2
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def _add_global(p: argparse.ArgumentParser, suppress: bool):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--config", default=d(None), help="YAML run configuration")
    p.add_argument("--seed", type=int, default=d(None), help="master seed (overrides the config)")
    p.add_argument("--threads", type=int, default=d(None),
                   help="worker processes for the model grid (default: all cores); results do not depend on it")
    p.add_argument("--out", default=d("out"), help="output directory (default: ./out)")
    p.add_argument("--smoke", action="store_true", default=d(False),
                   help="small end-to-end run: 60 synthetic patients, 3 scenarios, 4 models, 2 repeats")
    p.add_argument("-v", "--verbose", action="count", default=d(0))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="facegrowth", description="Facial growth direction prediction pipeline.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _add_global(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True
    for name, (_, help_text) in COMMANDS.items():
        sp = sub.add_parser(name, help=help_text, description=help_text)
        _add_global(sp, suppress=True)
        if name not in ("synth", "report"):
            sp.add_argument("--input", help="landmark CSV (default: the configured input source)")
        else:
            sp.set_defaults(input=None)
        if name in ("label", "run"):
            sp.add_argument("--balanced", action="store_true",
                            help="re-tag Mixed cases so the three classes are equally sized")
        else:
            sp.set_defaults(balanced=False)
        if name == "report":
            sp.add_argument("--results", help="results CSV (default: <out>/results.csv)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if args.threads is not None and args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        cfg = load_config(args.config, seed=args.seed, smoke=args.smoke)
    except (ConfigError, ValidationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    threads = args.threads or os.cpu_count() or 1
    ctx = Context(cfg, Path(args.out), args.command, threads)
    func = COMMANDS[args.command][0]
    status, code, err = "ok", EXIT_OK, None
    try:
        func(ctx, args)
    except (ValidationError, ConfigError) as exc:
        status, code, err = "validation_failure", EXIT_VALIDATION, str(exc)
        print(f"validation error during {ctx.stage}: {exc}", file=sys.stderr)
    except Exception as exc:  # noqa: BLE001 - any other failure is a runtime failure
        status, code, err = "runtime_failure", EXIT_RUNTIME, f"{type(exc).__name__}: {exc}"
        print(f"runtime error during {ctx.stage}: {err}", file=sys.stderr)
        log.debug("%s", traceback.format_exc())
    meta = ctx.metadata(status, err)
    name = "run_metadata.json" if args.command == "run" else f"{args.command}_metadata.json"
    (ctx.out / name).write_text(json.dumps(meta, indent=2, default=_json_default) + "\n", encoding="utf-8")
    if err is not None:
        (ctx.out / "failure.json").write_text(json.dumps(
            {"command": args.command, "stage": ctx.stage, "status": status, "error": err,
             "config_digest": cfg.digest, "seed": cfg.seed}, indent=2) + "\n", encoding="utf-8")
    return code


if __name__ == "__main__":
    sys.exit(main())
