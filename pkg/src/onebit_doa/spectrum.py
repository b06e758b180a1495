"""Peak extraction, DOA readout with off-grid correction, and trial scoring
(hit rate, RMSE accumulation)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .arrays import SteeringDictionary

__all__ = [
    "DoaEstimate",
    "TrialScore",
    "find_peaks",
    "extract_doas",
    "score_trial",
    "aggregate_rmse",
]


@dataclass(frozen=True)
class DoaEstimate:
    """Estimated source angles (degrees, ascending) with their spectrum peak
    magnitudes."""

    angles_deg: np.ndarray
    peak_magnitudes: np.ndarray


def find_peaks(magnitude: np.ndarray, k: int) -> np.ndarray:
    """Indices of the ``k`` largest local maxima of a spectrum.

    A local maximum is strictly greater than both neighbors; boundary bins
    are compared one-sided. If fewer than ``k`` local maxima exist, the
    largest remaining bins fill the list. Ties break toward the lower index.
    Returned in decreasing-magnitude order.
    """
    v = np.asarray(magnitude, dtype=float)
    if k <= 0:
        raise ValueError("k must be positive")
    if k > v.size:
        raise ValueError(f"asked for {k} peaks from {v.size} bins")
    is_peak = np.ones(v.size, dtype=bool)
    is_peak[1:] &= v[1:] > v[:-1]
    is_peak[:-1] &= v[:-1] > v[1:]
    order = sorted(range(v.size), key=lambda i: (-v[i], i))
    chosen = [i for i in order if is_peak[i]][:k]
    if len(chosen) < k:
        fill = [i for i in order if i not in set(chosen)]
        chosen.extend(fill[: k - len(chosen)])
    return np.asarray(chosen, dtype=int)


def extract_doas(
    dictionary: SteeringDictionary,
    gaps_rad: np.ndarray,
    peak_indices: np.ndarray,
    magnitude: np.ndarray,
) -> DoaEstimate:
    """Angles at the selected bins, corrected by their off-grid gaps and
    sorted ascending."""
    idx = np.asarray(peak_indices, dtype=int)
    gaps_rad = np.asarray(gaps_rad, dtype=float)
    angles = dictionary.grid_deg[idx] + np.rad2deg(gaps_rad[idx])
    mags = np.asarray(magnitude, dtype=float)[idx]
    order = np.argsort(angles, kind="stable")
    return DoaEstimate(angles[order], mags[order])


@dataclass(frozen=True)
class TrialScore:
    """Outcome of one trial: hit flag, the squared-error sum it contributes
    to the RMSE (zero on a miss), and the signed per-target errors."""

    hit: bool
    sq_err_sum: float
    errors_deg: np.ndarray


def score_trial(
    estimate: DoaEstimate | np.ndarray, truth_deg: np.ndarray, threshold_deg: float = 2.0
) -> TrialScore:
    """Pair estimates with the truth by ascending order and apply the hit
    threshold.

    A trial is a hit only if every estimate lies within ``threshold_deg`` of
    its partner; only hits contribute squared error to the RMSE.
    """
    est = estimate.angles_deg if isinstance(estimate, DoaEstimate) else np.asarray(estimate)
    est = np.sort(np.asarray(est, dtype=float))
    truth = np.sort(np.asarray(truth_deg, dtype=float))
    if est.shape != truth.shape:
        raise ValueError("estimate and truth must have equal length")
    errors = est - truth
    hit = bool(np.all(np.abs(errors) <= threshold_deg))
    return TrialScore(hit, float(np.sum(errors**2)) if hit else 0.0, errors)


def aggregate_rmse(scores: list[TrialScore], k: int) -> tuple[float, float]:
    """RMSE over successful trials and the hit rate over all trials.

    RMSE is ``sqrt(sum(sq_err) / (hits * k))``; NaN when nothing hit.
    """
    hits = sum(1 for s in scores if s.hit)
    total_sq = sum(s.sq_err_sum for s in scores)
    rmse = float(np.sqrt(total_sq / (hits * k))) if hits else float("nan")
    return rmse, hits / len(scores) if scores else float("nan")
