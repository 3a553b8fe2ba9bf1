"""Command-line entry points: fit a curve sample, run studies, report metrics.

Exit codes: 0 success, 1 runtime or data error, 2 usage error.  Every output
file gets a ``<name>.meta.json`` sidecar recording the flags, seed and
package version.  ``LFPCA_THREADS`` caps worker parallelism in studies.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .blockdetect import DetectionConfig
from .errors import DataFormatError
from .ingest import load_curves
from .localized import system_to_json_dict
from .pipeline import fit_localized
from .sim import (
    CSV_COLUMNS,
    SimDesign,
    StudyConfig,
    run_study,
    summarize_metrics,
    write_metrics_csv,
)


def _pve_value(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0 < v <= 1:
        raise argparse.ArgumentTypeError(f"pve must lie in (0, 1], got {v}")
    return v


def _sidecar(path: Path, command: str, flags: dict) -> None:
    meta = {"file": path.name, "command": command, "flags": flags, "version": __version__}
    with open(path.with_name(path.name + ".meta.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------


def cmd_fit(args, flags) -> int:
    curves = load_curves(args.input, layout=args.layout)
    detection = DetectionConfig(
        method=args.detect,
        threshold=args.threshold,
        quantile=args.quantile,
    )
    fit = fit_localized(curves, pve=args.pve, detection=detection, m=args.m)
    system = fit.system
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    metadata = {
        "input": str(args.input),
        "n_curves": curves.n,
        "smoothing": f"truncated-kl(pve={args.pve}, components={fit.truncation_level})",
        "detection": json.loads(detection.to_json()),
        "resolved_threshold": fit.threshold if detection.report_threshold else None,
        "version": __version__,
    }
    path = out / "eigensystem.json"
    _write_json(path, system_to_json_dict(system, metadata))
    _sidecar(path, "fit", flags)

    pts = system.grid.points
    path = out / "components.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["component", "grid_value", "value", "block"])
        for i, comp in enumerate(system.components):
            for p in range(pts.size):
                writer.writerow([i + 1, repr(pts[p]), repr(comp.values[p]), comp.block_id + 1])
    _sidecar(path, "fit", flags)

    path = out / "fpca_components.csv"
    n_dense = min(system.m if system.m else 1, fit.dense_eigenfunctions.shape[1])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["component", "grid_value", "value"])
        for i in range(n_dense):
            for p in range(pts.size):
                writer.writerow([i + 1, repr(pts[p]), repr(fit.dense_eigenfunctions[p, i])])
    _sidecar(path, "fit", flags)

    path = out / "report.txt"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"localized functional principal components ({__version__})\n")
        fh.write(f"input: {args.input} (N={curves.n}, P={curves.p})\n")
        fh.write(f"smoothing: {metadata['smoothing']}\n")
        fh.write(
            f"detection: {args.detect}, threshold {fit.threshold:.6g}"
            f" ({'explicit' if args.threshold is not None else 'calibrated'})\n"
        )
        fh.write(f"blocks detected: {system.partition.k}\n")
        fh.write(f"components retained: {system.m}\n\n")
        fh.write("variance share per block (all block components):\n")
        for k, (lo, hi) in enumerate(system.partition.blocks):
            fh.write(
                f"  block {k + 1}: [{pts[lo]:.6g}, {pts[hi]:.6g}]"
                f"  pve {100 * system.pve_per_block[k]:.2f}%\n"
            )
    _sidecar(path, "fit", flags)
    if system.m_clamped:
        print("warning: fewer components available than requested; clamped", file=sys.stderr)
    print(f"wrote eigensystem.json, components.csv, fpca_components.csv, report.txt to {out}")
    return 0


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def cmd_simulate(args, flags) -> int:
    design = SimDesign(name=args.design, noise_sd=args.noise_sd, seed=args.seed)
    cfg = StudyConfig(
        pve=args.pve,
        m=args.m,
        detection=DetectionConfig(method=args.detect),
        tau=args.tau,
        grid_points=args.grid_points,
    )
    records = run_study(design, args.n, args.reps, args.method, cfg)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    path = out / "metrics.csv"
    write_metrics_csv(records, path)
    _sidecar(path, "simulate", flags)

    path = out / "summary.json"
    _write_json(path, summarize_metrics(records, design_name=args.design, n=args.n))
    _sidecar(path, "simulate", flags)

    failures = sum(1 for r in records if r.error is not None)
    if failures:
        print(f"warning: {failures} replication(s) failed; see summary.json", file=sys.stderr)
    print(f"wrote metrics.csv and summary.json to {out}")
    return 0


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------


def _load_metrics(path: Path):
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in CSV_COLUMNS if c not in header]
        if missing:
            raise DataFormatError(f"{path}: missing column {missing[0]!r}")
        for i, row in enumerate(reader, start=2):
            try:
                rows.append(
                    {
                        "method": row["method"],
                        "block": int(row["block"]),
                        "specificity": float(row["specificity"]),
                        "precision": float(row["precision"]),
                        "pve_ratio": float(row["pve_ratio"]),
                    }
                )
            except (TypeError, ValueError):
                raise DataFormatError(f"{path}: malformed value", row=i) from None
    return rows


def _file_labels(path: Path):
    meta = path.with_name(path.name + ".meta.json")
    if meta.exists():
        try:
            flags = json.loads(meta.read_text()).get("flags", {})
            return str(flags.get("design", "?")), str(flags.get("n", "?"))
        except (json.JSONDecodeError, OSError):
            pass
    return "?", "?"


def _iqr_cell(values):
    arr = np.asarray([v for v in values if np.isfinite(v)], float)
    if arr.size == 0:
        return "      -      "
    return f"{np.median(arr):6.4f} [{np.quantile(arr, 0.25):6.4f},{np.quantile(arr, 0.75):6.4f}]"


def cmd_report(args, flags) -> int:
    groups: dict = {}
    for name in args.metrics:
        path = Path(name)
        design, n = _file_labels(path)
        for row in _load_metrics(path):
            key = (design, n, row["method"], row["block"])
            groups.setdefault(key, []).append(row)
    if not groups:
        raise DataFormatError("no metric rows found")

    header = f"{'design':>6} {'n':>6} {'method':>10} {'block':>5} | {'specificity':^24} {'precision':^24} {'pve_ratio':^24}"
    lines = [header, "-" * len(header)]
    for key in sorted(groups, key=lambda k: (k[0], k[1], k[2], k[3])):
        rows = groups[key]
        design, n, method, block = key
        lines.append(
            f"{design:>6} {n:>6} {method:>10} {block:>5} | "
            f"{_iqr_cell([r['specificity'] for r in rows]):^24} "
            f"{_iqr_cell([r['precision'] for r in rows]):^24} "
            f"{_iqr_cell([r['pve_ratio'] for r in rows]):^24}"
        )
    print("\n".join(lines))

    if args.gnuplot:
        path = Path(args.gnuplot)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("# design n method block spec_median prec_median ratio_median\n")
            for key in sorted(groups, key=lambda k: (k[0], k[1], k[2], k[3])):
                rows = groups[key]
                med = lambda field: np.median([r[field] for r in rows])  # noqa: E731
                fh.write(
                    f"{key[0]} {key[1]} {key[2]} {key[3]} "
                    f"{med('specificity'):.6g} {med('precision'):.6g} {med('pve_ratio'):.6g}\n"
                )
        _sidecar(path, "report", flags)
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lfpca",
        description="Localized functional principal component analysis",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="fit localized components to a curve CSV")
    fit.add_argument("--input", required=True, help="CSV with grid header row")
    fit.add_argument("--layout", default="rows-are-curves",
                     choices=["rows-are-curves", "columns-are-curves"])
    fit.add_argument("--pve", type=_pve_value, default=0.99,
                     help="denoising variance level; also picks M when --m is absent")
    fit.add_argument("--m", type=int, default=None,
                     help="retained components (default: cumulative pve rule)")
    fit.add_argument("--detect", default="contiguous-cut",
                     choices=["contiguous-cut", "components"])
    fit.add_argument("--threshold", type=float, default=None,
                     help="explicit correlation threshold")
    fit.add_argument("--quantile", type=float, default=None,
                     help="null quantile for threshold calibration")
    fit.add_argument("--out-dir", required=True)

    simp = sub.add_parser("simulate", help="run the synthetic recovery study")
    simp.add_argument("--design", required=True, choices=["A", "B"])
    simp.add_argument("--n", type=int, default=250)
    simp.add_argument("--reps", type=int, default=20)
    simp.add_argument("--seed", type=int, default=0)
    simp.add_argument("--method", default="lfpca", choices=["lfpca", "fpca-tau"])
    simp.add_argument("--tau", type=float, default=None,
                      help="support threshold for fpca-tau")
    simp.add_argument("--noise-sd", type=float, default=0.1)
    simp.add_argument("--pve", type=_pve_value, default=0.99)
    simp.add_argument("--m", type=int, default=10)
    simp.add_argument("--detect", default="contiguous-cut",
                      choices=["contiguous-cut", "components"])
    simp.add_argument("--grid-points", type=int, default=1001)
    simp.add_argument("--out-dir", required=True)

    rep = sub.add_parser("report", help="median/IQR tables from metrics CSVs")
    rep.add_argument("metrics", nargs="+", help="one or more metrics.csv files")
    rep.add_argument("--gnuplot", default=None, help="also write gnuplot-ready data here")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "simulate":
        if args.method == "fpca-tau" and args.tau is None:
            parser.error("--method fpca-tau requires --tau")
        if args.method != "fpca-tau" and args.tau is not None:
            parser.error("--tau only applies to --method fpca-tau")
    if args.command == "fit" and args.threshold is not None and args.quantile is not None:
        parser.error("give either --threshold or --quantile, not both")

    flags = {k: v for k, v in vars(args).items() if k != "command"}
    try:
        if args.command == "fit":
            return cmd_fit(args, flags)
        if args.command == "simulate":
            return cmd_simulate(args, flags)
        return cmd_report(args, flags)
    except (DataFormatError, OSError, ValueError, RuntimeError) as exc:
        print(f"lfpca {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
