"""``uqlab`` command line.

Every command reads its inputs, computes all outputs in memory and only then
writes them, together with a ``manifest.json``, into ``--out``. Failures
print one JSON object on stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import csv
import datetime as dt
import hashlib
import io
import json
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .metrics import DEFAULT_ECE_BINS, METRIC_KINDS, evaluate_all, meets_operating_point, roc_curve
from .predstore import EmptyDatasetError, EvalDataset, dumps_jsonl, load, summarize
from .selective import referral_area, referral_curve
from .shifteval import DEFAULT_HIST_BINS, build_joint_balanced, ood_detection, rebalance_classes, uncertainty_histograms
from .svg import line_plot
from .uncertainty import LN2, UNCERTAINTY_KINDS, decompose

NHS_SENSITIVITY = 0.85
NHS_SPECIFICITY = 0.80
IMAGE_SUFFIXES = (".pgm", ".ppm")


class CliError(Exception):
    pass


# -- formatting --------------------------------------------------------------

def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if v == 0.0:
            return "0"
        return f"{v:.6g}"
    return "" if v is None else str(v)


def to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def parse_kinds(text: str) -> list[str]:
    kinds = [k.strip() for k in text.split(",") if k.strip()]
    bad = [k for k in kinds if k not in UNCERTAINTY_KINDS]
    if not kinds or bad:
        raise CliError(f"--uncertainty must be a comma list of {UNCERTAINTY_KINDS}, got {text!r}")
    return kinds


def thread_cap() -> int:
    raw = os.environ.get("UQLAB_THREADS")
    if raw is None:
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        raise CliError(f"UQLAB_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise CliError(f"UQLAB_THREADS must be a positive integer, got {raw!r}")
    return n


def warn(message: str) -> None:
    print(json.dumps({"warning": message}), file=sys.stderr)


def load_nonempty(path) -> EvalDataset:
    d = load(path)
    if len(d) == 0:
        raise EmptyDatasetError(f"{path}: no records")
    return d


def sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def timestamp() -> str:
    # SOURCE_DATE_EPOCH pins the manifest for reproducible builds
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    t = dt.datetime.fromtimestamp(int(epoch), dt.timezone.utc) if epoch else dt.datetime.now(dt.timezone.utc)
    return t.isoformat(timespec="seconds")


# -- commands ----------------------------------------------------------------
# Each returns {relative filename: text}.

def cmd_decompose(args) -> dict[str, str]:
    d = load_nonempty(args.inputs[0])
    scale = 1.0 / LN2 if args.unit == "bits" else 1.0
    rows = []
    for r in d:
        rows.append((r.id, *decompose(r).scaled(scale)))
    return {"uncertainty.csv": to_csv(("id", "total", "aleatoric", "epistemic"), rows)}


def cmd_metrics(args) -> dict[str, str]:
    d = load_nonempty(args.inputs[0])
    vals = evaluate_all(d, args.bins)
    rows = [(k, v.value, v.defined) for k, v in vals.items()]
    return {"metrics.csv": to_csv(("metric", "value", "defined"), rows)}


def curve_rows(curve):
    return [(p.tau, p.retained_count, p.metric.value, p.metric.defined) for p in curve.points]


def safe_area(curve) -> float:
    return referral_area(curve) if curve.defined.sum() >= 2 else float("nan")


def cmd_refer(args) -> dict[str, str]:
    d = load_nonempty(args.inputs[0])
    out, areas, plotted = {}, [], []
    for kind in parse_kinds(args.uncertainty):
        curve = referral_curve(d, kind, args.metric)
        if not curve.defined.any():
            warn(f"{args.metric} is undefined at every referral rate for uncertainty {kind}")
        out[f"referral_{kind}.csv"] = to_csv(("tau", "retained", "metric", "defined"), curve_rows(curve))
        areas.append((kind, args.metric, safe_area(curve)))
        plotted.append((kind, curve.taus.tolist(), curve.values.tolist()))
    out["referral_area.csv"] = to_csv(("uncertainty", "metric", "area"), areas)
    out["referral.svg"] = line_plot(plotted, "referral rate τ", args.metric, f"{args.metric} vs τ")
    return out


def cmd_ood(args) -> dict[str, str]:
    a = load_nonempty(args.inputs[0])
    b = load_nonempty(args.shifted)
    au, ap = ood_detection(a, b)
    rows = [("auroc", au.value, au.defined), ("auprc", ap.value, ap.defined)]
    return {"ood.csv": to_csv(("metric", "value", "defined"), rows)}


def cmd_balance_joint(args) -> dict[str, str]:
    j = build_joint_balanced(load_nonempty(args.inputs[0]), load_nonempty(args.shifted), args.seed)
    return {"joint.jsonl": dumps_jsonl(j.records)}


def cmd_rebalance(args) -> dict[str, str]:
    shifted = load_nonempty(args.inputs[0])
    ref = summarize(load_nonempty(args.reference))
    n = args.n if args.n is not None else len(shifted)
    return {"rebalanced.jsonl": dumps_jsonl(rebalance_classes(shifted, ref, n, args.seed))}


def cmd_hist(args) -> dict[str, str]:
    d = load_nonempty(args.inputs[0])
    rows = []
    for h in uncertainty_histograms(d, args.bins):
        for i in range(len(h.bin_edges) - 1):
            cd = float("nan") if h.correct_empty else h.correct_density[i]
            idn = float("nan") if h.incorrect_empty else h.incorrect_density[i]
            rows.append((h.clinical_label, h.bin_edges[i], h.bin_edges[i + 1], cd, idn))
    header = ("label", "bin_lo", "bin_hi", "correct_density", "incorrect_density")
    return {"histograms.csv": to_csv(header, rows)}


def report_column(records, bins):
    vals = evaluate_all(records, bins)
    try:
        op = meets_operating_point(roc_curve(records), NHS_SENSITIVITY, NHS_SPECIFICITY)
    except ValueError:
        op = None
    col = {k: (v.value if v.defined else float("nan")) for k, v in vals.items()}
    col["meets_operating_point"] = "undefined" if op is None else op
    return col


def cmd_report(args) -> dict[str, str]:
    a = load_nonempty(args.inputs[0])
    b = load_nonempty(args.shifted)
    # joint is a plain concatenation, not a balanced set
    cols = [report_column(list(a), args.bins), report_column(list(b), args.bins),
            report_column(list(a) + list(b), args.bins)]
    names = ("nll", "accuracy", "auprc", "auroc", "ece", "meets_operating_point")
    rows = [(n, *(c[n] for c in cols)) for n in names]
    return {"report.csv": to_csv(("metric", "in_domain", "shifted", "joint"), rows)}


def cmd_toy(args) -> dict[str, str]:
    from .bnnlab.experiment import run_toy
    from .bnnlab.objectives import parse_kl_schedule
    from .bnnlab.training import TrainConfig

    cfg = TrainConfig()
    overrides = {}
    if args.steps is not None:
        overrides["steps"] = args.steps
    if args.lr is not None:
        overrides["learning_rate"] = args.lr
    if args.kl_schedule is not None:
        overrides["kl_schedule"] = parse_kl_schedule(args.kl_schedule)
    cfg = replace(cfg, **overrides)
    kinds = parse_kinds(args.uncertainty)
    workers = min(thread_cap(), args.seeds)
    _, runs = run_toy(args.method, args.shift, args.seeds, args.samples, args.members,
                      args.seed, config=cfg, max_workers=workers)

    out: dict[str, str] = {}
    curve_csv, area_csv, trace_csv = [], [], []
    mean_curves: dict[tuple[str, str], list] = {}
    for run in runs:
        for split, d in (("in_domain", run.in_domain), ("shifted", run.shifted)):
            out[f"predictions_seed{run.seed_index}_{split}.jsonl"] = dumps_jsonl(d)
            for kind in kinds:
                c = referral_curve(d, kind, args.metric)
                curve_csv += [(run.seed_index, split, kind, *row) for row in curve_rows(c)]
                area_csv.append((run.seed_index, split, kind, args.metric, safe_area(c)))
                mean_curves.setdefault((split, kind), []).append(c)
        for m, model in enumerate(run.members):
            trace_csv += [(run.seed_index, m, t.step, t.loss, t.kl_weight, t.elbo) for t in model.trace]
    out["referral.csv"] = to_csv(("seed", "split", "uncertainty", "tau", "retained", "metric", "defined"), curve_csv)
    out["referral_area.csv"] = to_csv(("seed", "split", "uncertainty", "metric", "area"), area_csv)
    out["trace.csv"] = to_csv(("seed", "member", "step", "loss", "kl_weight", "elbo"), trace_csv)
    plotted = []
    for (split, kind), curves in mean_curves.items():
        vals = np.array([c.values for c in curves])
        ok = ~np.isnan(vals)
        mean = np.where(ok, vals, 0.0).sum(axis=0) / np.maximum(ok.sum(axis=0), 1)
        mean[~ok.any(axis=0)] = np.nan
        plotted.append((f"{split} {kind}", curves[0].taus.tolist(), mean.tolist()))
    title = f"{args.method} {args.shift}: mean {args.metric} over {args.seeds} seeds"
    out["referral.svg"] = line_plot(plotted, "referral rate τ", args.metric, title)
    return out


def cmd_preproc(args) -> dict[str, str]:
    from .preproc import PreprocConfig, estimate_radius, preprocess, quantize, read_image, write_image

    src = Path(args.inputs[0])
    if not src.is_dir():
        raise CliError(f"{src}: not a directory")
    files = sorted(p for p in src.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    if not files:
        raise CliError(f"{src}: no .pgm/.ppm images")
    cfg = PreprocConfig(args.target_radius, args.blur_constant, args.clip)
    out: dict[str, bytes | str] = {}
    rows = []
    for p in files:
        img = read_image(p)
        res = preprocess(img, cfg)
        buf = io.BytesIO()
        write_image(res, buf)
        out[p.name] = buf.getvalue()
        rows.append((p.name, img.width, img.height, estimate_radius(img), res.width, res.height,
                     hashlib.sha256(quantize(res).tobytes()).hexdigest()))
    header = ("file", "width_in", "height_in", "radius_in", "width_out", "height_out", "pixels_sha256")
    out["preproc.csv"] = to_csv(header, rows)
    return out


# -- wiring ------------------------------------------------------------------

COMMANDS = {
    "decompose": cmd_decompose,
    "metrics": cmd_metrics,
    "refer": cmd_refer,
    "ood": cmd_ood,
    "balance-joint": cmd_balance_joint,
    "rebalance": cmd_rebalance,
    "hist": cmd_hist,
    "toy": cmd_toy,
    "preproc": cmd_preproc,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="uqlab", description="Uncertainty evaluation toolkit.")
    p.add_argument("--version", action="version", version=f"uqlab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, help, inputs=True, shifted=False, seed=False):
        sp = sub.add_parser(name, help=help)
        if inputs:
            sp.add_argument("--in", dest="inputs", action="append", required=True, metavar="PATH")
        if shifted:
            sp.add_argument("--shifted", required=True, metavar="PATH")
        sp.add_argument("--out", required=True, metavar="DIR")
        if seed:
            sp.add_argument("--seed", type=int, default=0)
        return sp

    sp = add("decompose", "per-record total/aleatoric/epistemic uncertainty")
    sp.add_argument("--unit", choices=("nats", "bits"), default="nats")

    sp = add("metrics", "NLL, accuracy, AUPRC, AUROC and ECE of one dataset")
    sp.add_argument("--bins", type=int, default=DEFAULT_ECE_BINS)

    sp = add("refer", "referral curves and their areas")
    sp.add_argument("--metric", choices=METRIC_KINDS, default="accuracy")
    sp.add_argument("--uncertainty", default="total", help="comma list of total,aleatoric,epistemic")

    add("ood", "in-domain vs shifted detection by total uncertainty", shifted=True)
    add("balance-joint", "in-domain plus upsampled shifted set", shifted=True, seed=True)

    sp = add("rebalance", "resample a shifted set to a reference class mix", seed=True)
    sp.add_argument("--reference", required=True, metavar="PATH")
    sp.add_argument("--n", type=int, default=None, help="output size (default: size of --in)")

    sp = add("hist", "per-clinical-label uncertainty histograms")
    sp.add_argument("--bins", type=int, default=DEFAULT_HIST_BINS)

    sp = add("toy", "train and evaluate on a synthetic shift task", inputs=False, seed=True)
    sp.add_argument("--method", default="dropout")
    sp.add_argument("--shift", choices=("severity", "country"), default="severity")
    sp.add_argument("--seeds", type=int, default=6)
    sp.add_argument("--samples", "-S", type=int, default=5, help="MC samples per member")
    sp.add_argument("--members", "-K", type=int, default=1, help="ensemble size")
    sp.add_argument("--steps", type=int, default=None)
    sp.add_argument("--lr", type=float, default=None)
    sp.add_argument("--kl-schedule", default=None, help="constant:BETA or cyclical:PERIOD:FRACTION")
    sp.add_argument("--metric", choices=METRIC_KINDS, default="accuracy")
    sp.add_argument("--uncertainty", default="total")

    sp = add("preproc", "preprocess a directory of PGM/PPM retina images")
    sp.add_argument("--blur-constant", type=float, default=30.0)
    sp.add_argument("--target-radius", type=float, default=300.0)
    sp.add_argument("--clip", type=float, default=0.9)

    sp = add("report", "metrics table on in-domain, shifted and joint data", shifted=True)
    sp.add_argument("--bins", type=int, default=DEFAULT_ECE_BINS)
    return p


def input_paths(args) -> list[Path]:
    paths = [Path(p) for p in getattr(args, "inputs", None) or []]
    for extra in ("shifted", "reference"):
        if getattr(args, extra, None):
            paths.append(Path(getattr(args, extra)))
    out = []
    for p in paths:
        if p.is_dir():
            out += sorted(q for q in p.iterdir() if q.is_file() and q.suffix.lower() in IMAGE_SUFFIXES)
        elif p.exists():
            out.append(p)
    return out


def manifest(args) -> dict:
    arguments = {k: v for k, v in vars(args).items() if k != "command"}
    return {
        "command": args.command,
        "arguments": arguments,
        "seeds": [args.seed] if hasattr(args, "seed") else [],
        "input_hashes": {str(p): sha256_file(p) for p in input_paths(args)},
        "version": __version__,
        "timestamp": timestamp(),
    }


def write_outputs(out_dir: Path, files: dict, man: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, content in files.items():
        data = content if isinstance(content, bytes) else content.encode("utf-8")
        (out_dir / name).write_bytes(data)
    (out_dir / "manifest.json").write_text(json.dumps(man, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        files = COMMANDS[args.command](args)
        write_outputs(Path(args.out), files, manifest(args))
    except Exception as exc:  # noqa: BLE001 - every failure becomes one JSON line
        print(json.dumps({"error": type(exc).__name__, "message": str(exc), "command": args.command}),
              file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
