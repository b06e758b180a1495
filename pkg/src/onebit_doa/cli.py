"""Command-line entry points: ``onebit-doa`` (bench / solve / simulate /
trace / report) and ``gen-dataset``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from .arrays import (
    ArrayGeometry,
    Scene,
    named_geometry,
    one_bit_quantize,
    simulate_snapshot,
)
from .dataset import generate_dataset, write_dataset


def _load_geometry(spec: str) -> ArrayGeometry:
    if Path(spec).exists():
        return ArrayGeometry.from_file(spec)
    try:
        return named_geometry(spec)
    except ValueError:
        pass
    return ArrayGeometry(tuple(float(v) for v in spec.split(",")))


def _cmd_bench(args) -> int:
    cfg = bench_mod.BenchConfig.from_file(args.config)
    out = bench_mod.run_bench(cfg, args.out, threads=args.threads)
    bench_mod.emit_report(out)
    print(f"wrote {out / 'trials.csv'}, {out / 'summary.csv'}, report files")
    return 0


def _cmd_report(args) -> int:
    for path in bench_mod.emit_report(args.out):
        print(f"wrote {path}")
    return 0


def _cmd_trace(args) -> int:
    cfg = bench_mod.BenchConfig.from_file(args.config)
    for path in bench_mod.run_traces(
        cfg, tuple(float(b) for b in args.b.split(",")), args.out, trials=args.trials
    ):
        print(f"wrote {path}")
    return 0


def _cmd_simulate(args) -> int:
    geom = _load_geometry(args.geometry)
    doas = [float(t) for t in args.doas.split(",")]
    if args.amplitudes:
        amps = [complex(*map(float, pair.split(":"))) for pair in args.amplitudes.split(",")]
    else:
        amps = [1.0 + 0.0j] * len(doas)
    snap = simulate_snapshot(geom, Scene(tuple(doas), tuple(amps)), args.snr, args.seed)
    quantized = one_bit_quantize(snap)
    payload = {
        "positions": list(geom.positions),
        "doas_deg": doas,
        "snr_db": args.snr,
        "sigma": snap.sigma,
        "y_real": snap.y.real.tolist(),
        "y_imag": snap.y.imag.tolist(),
        "signs_real": quantized.signs.real.tolist(),
        "signs_imag": quantized.signs.imag.tolist(),
    }
    text = json.dumps(payload, indent=2)
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {args.out}")
    else:
        print(text)
    return 0


def _cmd_solve(args) -> int:
    inp = Path(args.input)
    if inp.is_file():  # records.bin given directly; the manifest sits beside it
        args.input = str(inp.parent)
    if args.from_predictions:
        if args.index is not None:
            report = bench_mod.score_predictions(
                args.input, args.from_predictions, args.threshold,
                indices=np.asarray([args.index]),
            )
        else:
            report = bench_mod.score_predictions(
                args.input, args.from_predictions, args.threshold
            )
        print(json.dumps(report, indent=2))
        return 0
    index = args.index if args.index is not None else 0
    result, est, truth, score = bench_mod.solve_record(
        args.input, index, solver=args.method, mode=args.mode, max_iters=args.max_iters
    )
    payload = {
        "index": index,
        "method": args.method,
        "estimated_doas_deg": est.angles_deg.tolist(),
        "truth_doas_deg": truth.tolist(),
        "hit": score.hit,
        "errors_deg": score.errors_deg.tolist(),
        "iterations": result.iterations,
        "converged": result.converged,
    }
    print(json.dumps(payload, indent=2))
    if args.dump_state:
        state = {
            "spectrum_real": result.spectrum.real.tolist(),
            "spectrum_imag": result.spectrum.imag.tolist(),
            "gaps_rad": result.gaps_rad.tolist(),
            "iterations": result.iterations,
            "converged": result.converged,
        }
        Path(args.dump_state).write_text(json.dumps(state))
        print(f"wrote {args.dump_state}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="onebit-doa",
        description="One-bit single-snapshot DOA estimation toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bench", help="run a Monte Carlo sweep from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--threads", type=int, default=None,
                   help=f"worker count (default: ${bench_mod.THREADS_ENV} or 1)")
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("report", help="regenerate series files from summary.csv")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("trace", help="dump solver convergence traces")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--b", default="0.1,0.5", help="comma-separated sigmoid slopes")
    p.add_argument("--trials", type=int, default=1)
    p.set_defaults(func=_cmd_trace)

    p = sub.add_parser("simulate", help="simulate and quantize one snapshot")
    p.add_argument("--geometry", default="sla18",
                   help="named geometry, JSON file, or comma-separated offsets")
    p.add_argument("--doas", required=True, help="comma-separated angles in degrees")
    p.add_argument("--amplitudes", default=None,
                   help="comma-separated re:im pairs (default: unit)")
    p.add_argument("--snr", type=float, default=None, help="SNR in dB (default: noiseless)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("solve", help="solve stored records or score predictions")
    p.add_argument("--input", required=True, help="dataset directory")
    p.add_argument("--index", type=int, default=None)
    p.add_argument("--method", default="sbri", choices=["sbri", "sbri_x", "sbri_slim"])
    p.add_argument("--mode", default=None, choices=["on_grid", "off_grid"])
    p.add_argument("--max-iters", type=int, default=None)
    p.add_argument("--threshold", type=float, default=2.0)
    p.add_argument("--from-predictions", default=None,
                   help="score a predictions.bin file instead of solving")
    p.add_argument("--dump-state", default=None,
                   help="write the final solver state as JSON")
    p.set_defaults(func=_cmd_solve)

    args = parser.parse_args(argv)
    return args.func(args)


def gen_dataset_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="gen-dataset",
        description="Generate a labeled one-bit DOA training corpus",
    )
    parser.add_argument("--mode", required=True, choices=["on", "off"])
    parser.add_argument("--count", type=int, required=True)
    parser.add_argument("--seed", type=int, required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument("--geometry", default="sla18")
    parser.add_argument("--abs-gaps", action="store_true",
                        help="store |gap| labels instead of signed gaps")
    args = parser.parse_args(argv)
    geom = _load_geometry(args.geometry)
    mode = "on_grid" if args.mode == "on" else "off_grid"
    records, manifest = generate_dataset(
        args.count, mode, geom, args.seed, signed_gap_labels=not args.abs_gaps
    )
    out = write_dataset(records, manifest, args.out)
    print(f"wrote {out / 'manifest'} and {out / 'records.bin'} ({args.count} records)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
