"""Monte Carlo benchmark harness: SNR sweeps over methods and scenarios,
deterministic CSV results, plot-ready series files and prediction scoring.

Noise is shared across methods at the same (SNR, trial) so method deltas are
paired; every trial derives its generator from (seed, snr_index, trial), so
serial and parallel runs produce identical rows.
"""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .arrays import (
    ArrayGeometry,
    Scene,
    build_dictionary,
    named_geometry,
    one_bit_quantize,
    simulate_snapshot,
)
from .dataset import read_dataset, read_predictions
from .sbri import (
    NumericalError,
    SbriConfig,
    SolverResult,
    map_peak_selection,
    sbri_solve,
)
from .sbrix import SbriXConfig, sbrix_solve
from .spectrum import aggregate_rmse, extract_doas, find_peaks, score_trial

__all__ = [
    "BenchConfig",
    "run_bench",
    "emit_report",
    "run_traces",
    "solve_record",
    "score_predictions",
    "resolve_threads",
]

SOLVERS = ("sbri", "sbri_x", "sbri_slim")
MODES = ("on_grid", "off_grid")

THREADS_ENV = "ONEBIT_DOA_THREADS"


@dataclass(frozen=True)
class BenchConfig:
    """Full description of a benchmark run."""

    geometry: ArrayGeometry
    fov_deg: tuple[float, float]
    spacing_deg: float
    scenario_doas_deg: tuple[float, ...]
    scenario_amplitudes: tuple[complex, ...] | str
    methods: tuple[tuple[str, str], ...]
    snr_list_db: tuple[float, ...]
    trials: int
    threshold_deg: float = 2.0
    seed: int = 0
    sbri: SbriConfig = SbriConfig()
    sbrix: SbriXConfig = SbriXConfig()

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("need at least one trial")
        if not self.snr_list_db:
            raise ValueError("SNR list must be non-empty")
        for solver, mode in self.methods:
            if solver not in SOLVERS or mode not in MODES:
                raise ValueError(f"unknown method {(solver, mode)!r}")

    @property
    def k(self) -> int:
        return len(self.scenario_doas_deg)

    @classmethod
    def from_dict(cls, data: dict) -> "BenchConfig":
        geo = data["geometry"]
        if isinstance(geo, str):
            geometry = named_geometry(geo)
        elif isinstance(geo, dict):
            geometry = ArrayGeometry(tuple(geo["positions"]))
        else:
            geometry = ArrayGeometry(tuple(geo))
        scen = data["scenario"]
        amps = scen.get("amplitudes", "random_phase")
        if not isinstance(amps, str):
            amps = tuple(complex(a[0], a[1]) for a in amps)
        elif amps not in ("random", "random_phase"):
            raise ValueError(f"unknown amplitude model {amps!r}")
        methods = []
        for m in data["methods"]:
            if isinstance(m, dict):
                solver, mode = m["solver"], m["mode"]
            else:
                solver, mode = m
            if solver == "sbri_slim_prior":
                solver = "sbri_slim"
            methods.append((solver, mode))
        sbri_cfg = SbriConfig(**data.get("sbri", {}))
        sbrix_over = dict(data.get("sbrix", {}))
        base_over = sbrix_over.pop("base", None)
        sbrix_cfg = SbriXConfig(
            base=SbriConfig(**base_over) if base_over is not None else sbri_cfg,
            **sbrix_over,
        )
        return cls(
            geometry=geometry,
            fov_deg=tuple(data.get("fov_deg", (-60.0, 60.0))),
            spacing_deg=float(data["spacing_deg"]),
            scenario_doas_deg=tuple(float(t) for t in scen["doas_deg"]),
            scenario_amplitudes=amps,
            methods=tuple(methods),
            snr_list_db=tuple(float(s) for s in data["snr_list_db"]),
            trials=int(data["trials"]),
            threshold_deg=float(data.get("threshold_deg", 2.0)),
            seed=int(data.get("seed", 0)),
            sbri=sbri_cfg,
            sbrix=sbrix_cfg,
        )

    @classmethod
    def from_file(cls, path) -> "BenchConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


def resolve_threads(threads: int | None) -> int:
    """CLI value wins, then the ONEBIT_DOA_THREADS env var, then 1."""
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get(THREADS_ENV)
    return max(1, int(env)) if env else 1


def method_id(solver: str, mode: str) -> str:
    return f"{solver}_{mode}"


def _dispatch(solver: str, mode: str, signs, dictionary, cfg: BenchConfig) -> SolverResult:
    if solver == "sbri":
        return sbri_solve(signs, dictionary, cfg.sbri, mode)
    if solver == "sbri_slim":
        return sbri_solve(signs, dictionary, replace(cfg.sbri, prior="slim"), mode)
    return sbrix_solve(signs, dictionary, cfg.sbrix, mode)


def _trial_scene(cfg: BenchConfig, rng: np.random.Generator) -> Scene:
    """Scene for one trial. ``random`` draws the corpus amplitude recipe
    (first-quadrant components); ``random_phase`` draws unit-modulus sources
    with uniform phases, which avoids the sign-capture degeneracies fixed
    first-quadrant pairs suffer on symmetric scenes."""
    if cfg.scenario_amplitudes == "random":
        k = cfg.k
        amps = tuple(rng.uniform(0.5, 1.0, k) + 1j * rng.uniform(0.5, 1.0, k))
    elif cfg.scenario_amplitudes == "random_phase":
        amps = tuple(np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, cfg.k)))
    else:
        amps = cfg.scenario_amplitudes
    return Scene(cfg.scenario_doas_deg, amps)


def _bench_block(cfg: BenchConfig, snr_index: int, lo: int, hi: int) -> list[dict]:
    """Rows for trials [lo, hi) at one SNR; safe to run in any process.

    BLAS threading is pinned to one thread: the solver's matrices are far too
    small to gain from it, and thread spin-waits dominate otherwise.
    """
    with threadpool_limits(limits=1, user_api="blas"):
        return _bench_block_inner(cfg, snr_index, lo, hi)


def _bench_block_inner(cfg: BenchConfig, snr_index: int, lo: int, hi: int) -> list[dict]:
    dictionary = build_dictionary(cfg.geometry, cfg.fov_deg, cfg.spacing_deg)
    snr = cfg.snr_list_db[snr_index]
    truth = np.asarray(cfg.scenario_doas_deg)
    rows = []
    for trial in range(lo, hi):
        rng = np.random.default_rng([cfg.seed, snr_index, trial])
        scene = _trial_scene(cfg, rng)
        quantized = one_bit_quantize(simulate_snapshot(cfg.geometry, scene, snr, rng))
        for m_index, (solver, mode) in enumerate(cfg.methods):
            start = time.perf_counter()
            try:
                result = _dispatch(solver, mode, quantized, dictionary, cfg)
                mags = np.abs(result.spectrum)
                peaks = map_peak_selection(quantized, dictionary, result.spectrum, cfg.k, cfg.sbri)
                est = extract_doas(dictionary, result.gaps_rad, peaks, mags)
                score = score_trial(est, truth, cfg.threshold_deg)
                hit, errors, iters = score.hit, score.errors_deg, result.iterations
            except NumericalError:
                hit, errors, iters = False, np.full(cfg.k, np.nan), 0
            rows.append(
                {
                    "m_index": m_index,
                    "method": method_id(solver, mode),
                    "snr_index": snr_index,
                    "snr_db": snr,
                    "trial": trial,
                    "hit": int(hit),
                    "errors": [float(e) for e in errors],
                    "iterations": int(iters),
                    "wall_ms": (time.perf_counter() - start) * 1e3,
                }
            )
    return rows


def _fmt(x: float) -> str:
    return format(x, ".9g")


def _trial_blocks(cfg: BenchConfig, threads: int) -> list[tuple[int, int, int]]:
    block = max(1, min(50, math.ceil(cfg.trials / max(threads, 1))))
    tasks = []
    for si in range(len(cfg.snr_list_db)):
        for lo in range(0, cfg.trials, block):
            tasks.append((si, lo, min(lo + block, cfg.trials)))
    return tasks


def run_bench(cfg: BenchConfig, out_dir, threads: int | None = None) -> Path:
    """Run the sweep and write ``trials.csv``, ``summary.csv`` and the
    ``timings.csv`` sidecar into ``out_dir``.

    Row order and content are independent of the thread count; wall times
    live in the sidecar so the result files stay bit-reproducible.
    """
    threads = resolve_threads(threads)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tasks = _trial_blocks(cfg, threads)
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(_bench_block, *zip(*[(cfg,) + t for t in tasks])))
    else:
        chunks = [_bench_block(cfg, *t) for t in tasks]
    rows = [row for chunk in chunks for row in chunk]
    rows.sort(key=lambda r: (r["m_index"], r["snr_index"], r["trial"]))

    err_cols = [f"err_deg_{i + 1}" for i in range(cfg.k)]
    lines = ["method,snr_db,trial,hit," + ",".join(err_cols) + ",iterations"]
    timing_lines = ["method,snr_db,trial,wall_time_ms"]
    for r in rows:
        errs = ",".join(_fmt(e) for e in r["errors"])
        lines.append(
            f"{r['method']},{_fmt(r['snr_db'])},{r['trial']},{r['hit']},{errs},"
            f"{r['iterations']}"
        )
        timing_lines.append(
            f"{r['method']},{_fmt(r['snr_db'])},{r['trial']},{_fmt(r['wall_ms'])}"
        )
    (out / "trials.csv").write_text("\n".join(lines) + "\n")
    (out / "timings.csv").write_text("\n".join(timing_lines) + "\n")
    summarize_trials(out / "trials.csv", out / "summary.csv")
    return out


def _parse_trials(path) -> tuple[list[str], list[dict]]:
    lines = Path(path).read_text().strip().split("\n")
    header = lines[0].split(",")
    rows = []
    for line in lines[1:]:
        parts = line.split(",")
        rows.append(dict(zip(header, parts)))
    return header, rows


def summarize_trials(trials_path, summary_path) -> list[dict]:
    """Aggregate the trial file into per-(method, SNR) RMSE over hits, hit
    rate and mean iteration count. Works purely from the CSV text, so the
    summary is recomputable by anyone holding the trial file."""
    header, rows = _parse_trials(trials_path)
    err_cols = [c for c in header if c.startswith("err_deg_")]
    k = len(err_cols)
    groups: dict[tuple[str, str], list[dict]] = {}
    order = []
    for r in rows:
        key = (r["method"], r["snr_db"])
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(r)
    out_rows = []
    for method, snr in order:
        grp = groups[(method, snr)]
        hits = [r for r in grp if r["hit"] == "1"]
        sq = sum(float(r[c]) ** 2 for r in hits for c in err_cols)
        rmse = math.sqrt(sq / (len(hits) * k)) if hits else float("nan")
        mean_iters = sum(int(r["iterations"]) for r in grp) / len(grp)
        out_rows.append(
            {
                "method": method,
                "snr_db": snr,
                "trials": len(grp),
                "hits": len(hits),
                "hit_rate": len(hits) / len(grp),
                "rmse_deg": rmse,
                "mean_iterations": mean_iters,
            }
        )
    lines = ["method,snr_db,trials,hits,hit_rate,rmse_deg,mean_iterations"]
    for r in out_rows:
        lines.append(
            f"{r['method']},{r['snr_db']},{r['trials']},{r['hits']},"
            f"{_fmt(r['hit_rate'])},{_fmt(r['rmse_deg'])},{_fmt(r['mean_iterations'])}"
        )
    Path(summary_path).write_text("\n".join(lines) + "\n")
    return out_rows


def emit_report(out_dir) -> list[Path]:
    """Turn ``summary.csv`` into one whitespace-delimited series file per
    (metric, method) plus a markdown overview table."""
    out = Path(out_dir)
    header, rows = _parse_trials(out / "summary.csv")
    methods = []
    for r in rows:
        if r["method"] not in methods:
            methods.append(r["method"])
    written = []
    for metric in ("rmse_deg", "hit_rate"):
        for method in methods:
            series = [(r["snr_db"], r[metric]) for r in rows if r["method"] == method]
            path = out / f"{metric}_{method}.dat"
            path.write_text("\n".join(f"{s} {v}" for s, v in series) + "\n")
            written.append(path)
    md = ["# Benchmark summary", ""]
    for metric, title in (("rmse_deg", "RMSE (deg)"), ("hit_rate", "Hit rate")):
        snrs = []
        for r in rows:
            if r["snr_db"] not in snrs:
                snrs.append(r["snr_db"])
        md.append(f"## {title}")
        md.append("")
        md.append("| SNR (dB) | " + " | ".join(methods) + " |")
        md.append("|" + "---|" * (len(methods) + 1))
        table = {(r["method"], r["snr_db"]): r[metric] for r in rows}
        for snr in snrs:
            cells = [table.get((m, snr), "") for m in methods]
            md.append(f"| {snr} | " + " | ".join(cells) + " |")
        md.append("")
    report = out / "report.md"
    report.write_text("\n".join(md))
    written.append(report)
    return written


def run_traces(
    cfg: BenchConfig, b_values: tuple[float, ...], out_dir, trials: int = 1
) -> list[Path]:
    """Dump per-iteration objective traces of the augmented solver for a set
    of sigmoid slopes (one series file per slope), plus an iteration-count
    summary across ``trials`` runs."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dictionary = build_dictionary(cfg.geometry, cfg.fov_deg, cfg.spacing_deg)
    snr = cfg.snr_list_db[0]
    written = []
    stats_lines = ["b,trials,converged,median_iterations,p90_iterations"]
    for b in b_values:
        xcfg = replace(cfg.sbrix, b=float(b))
        iters = []
        converged = 0
        trace0 = None
        with threadpool_limits(limits=1, user_api="blas"):
            for trial in range(trials):
                rng = np.random.default_rng([cfg.seed, 0, trial])
                scene = _trial_scene(cfg, rng)
                quantized = one_bit_quantize(simulate_snapshot(cfg.geometry, scene, snr, rng))
                res = sbrix_solve(quantized, dictionary, xcfg, mode="on_grid")
                iters.append(res.iterations)
                converged += int(res.converged)
                if trace0 is None:
                    trace0 = res.objective_trace
        path = out / f"trace_sbri_x_b{_fmt(float(b))}.dat"
        path.write_text(
            "\n".join(f"{i} {_fmt(v)}" for i, v in enumerate(trace0)) + "\n"
        )
        written.append(path)
        stats_lines.append(
            f"{_fmt(float(b))},{trials},{converged},"
            f"{_fmt(float(np.median(iters)))},{_fmt(float(np.percentile(iters, 90)))}"
        )
    stats = out / "trace_convergence.csv"
    stats.write_text("\n".join(stats_lines) + "\n")
    written.append(stats)
    return written


def _dataset_dictionary(manifest):
    geom = ArrayGeometry(manifest.positions)
    return build_dictionary(geom, manifest.fov_deg, manifest.spacing_deg)


def solve_record(
    dataset_dir,
    index: int,
    solver: str = "sbri",
    mode: str | None = None,
    sbri_cfg: SbriConfig | None = None,
    sbrix_cfg: SbriXConfig | None = None,
    max_iters: int | None = None,
):
    """Solve one stored record and score it against its label.

    Returns (result, estimate, truth_deg, score).
    """
    manifest, view = read_dataset(dataset_dir)
    dictionary = _dataset_dictionary(manifest)
    mode = mode or manifest.mode
    signs = view.signs_complex(index)
    sbri_cfg = sbri_cfg or SbriConfig()
    sbrix_cfg = sbrix_cfg or SbriXConfig()
    if max_iters is not None:
        sbri_cfg = replace(sbri_cfg, max_iters=max_iters)
        sbrix_cfg = replace(sbrix_cfg, base=replace(sbrix_cfg.base, max_iters=max_iters))
    if solver == "sbri":
        result = sbri_solve(signs, dictionary, sbri_cfg, mode)
    elif solver == "sbri_slim":
        result = sbri_solve(signs, dictionary, replace(sbri_cfg, prior="slim"), mode)
    elif solver == "sbri_x":
        result = sbrix_solve(signs, dictionary, sbrix_cfg, mode)
    else:
        raise ValueError(f"unknown solver {solver!r}")
    mags = np.abs(result.spectrum)
    truth = view.truth_doas_deg[index]
    peaks = map_peak_selection(signs, dictionary, result.spectrum, truth.size, sbri_cfg)
    est = extract_doas(dictionary, result.gaps_rad, peaks, mags)
    return result, est, truth, score_trial(est, truth)


def score_predictions(
    dataset_dir, predictions_path, threshold_deg: float = 2.0,
    indices: np.ndarray | None = None,
) -> dict:
    """Score a predictions file against its dataset's labels.

    Peaks are searched on the predicted spectrum; angles combine the grid
    with the predicted gaps (degrees). Returns hit rate and RMSE over hits.
    """
    manifest, view = read_dataset(dataset_dir)
    dictionary = _dataset_dictionary(manifest)
    spectra, gaps_deg = read_predictions(predictions_path, manifest.n)
    if spectra.shape[0] != len(view):
        raise ValueError(
            f"{spectra.shape[0]} predictions for {len(view)} records"
        )
    if indices is None:
        indices = np.arange(len(view))
    scores = []
    for i in indices:
        peaks = find_peaks(spectra[i], manifest.k)
        angles = dictionary.grid_deg[peaks] + gaps_deg[i][peaks]
        scores.append(score_trial(np.sort(angles), view.truth_doas_deg[i], threshold_deg))
    rmse, hit_rate = aggregate_rmse(scores, manifest.k)
    return {
        "records": int(len(indices)),
        "hit_rate": hit_rate,
        "rmse_deg": rmse,
    }
