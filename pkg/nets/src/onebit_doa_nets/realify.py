"""Real-valued reformulation of the one-bit measurement model.

The solver library works in complex arithmetic; network weights are real, so
the complex model ``ybar = csgn(A x + n)`` is restacked as
``ybar_r = sign(A_r x_r + n_r)`` with the block matrix
``A_r = [[Re A, -Im A], [Im A, Re A]]`` and ``x_r = [Re x; Im x]``.

This module rebuilds the steering matrices from a dataset manifest (element
positions in half-wavelength units, a uniform angle grid) so the package
never links against the solver library; the dataset files are the contract.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = ["DatasetFiles", "RealifiedSystem", "load_dataset", "realify", "steering_blocks"]


@dataclass(frozen=True)
class DatasetFiles:
    """Decoded dataset directory: manifest fields and the record matrix."""

    mode: str
    m: int
    n: int
    k: int
    fov_deg: tuple[float, float]
    spacing_deg: float
    positions: np.ndarray
    grid_deg: np.ndarray
    seed: int
    signs_real: np.ndarray          # (count, 2M), entries +-1
    spectrum_labels: np.ndarray     # (count, N)
    gap_labels_deg: np.ndarray      # (count, N)
    snr_db: np.ndarray              # (count,)
    truth_doas_deg: np.ndarray      # (count, K)


def load_dataset(path) -> DatasetFiles:
    """Read ``manifest`` + ``records.bin`` (little-endian float32, fixed
    stride: [signs 2M | spectrum N | gaps N | snr 1 | truth K])."""
    root = Path(path)
    man = json.loads((root / "manifest").read_text())
    m, n, k = man["m"], man["n"], man["k"]
    stride = 2 * m + 2 * n + 1 + k
    raw = np.fromfile(root / "records.bin", dtype="<f4")
    if raw.size != man["record_count"] * stride:
        raise ValueError("records.bin does not match the manifest stride")
    raw = raw.reshape(man["record_count"], stride).astype(np.float64)
    lo, hi = man["fov_deg"]
    grid = lo + man["spacing_deg"] * np.arange(n)
    return DatasetFiles(
        mode=man["mode"],
        m=m,
        n=n,
        k=k,
        fov_deg=(lo, hi),
        spacing_deg=man["spacing_deg"],
        positions=np.asarray(man["positions"], dtype=float),
        grid_deg=grid,
        seed=man["seed"],
        signs_real=raw[:, : 2 * m],
        spectrum_labels=raw[:, 2 * m : 2 * m + n],
        gap_labels_deg=raw[:, 2 * m + n : 2 * m + 2 * n],
        snr_db=raw[:, 2 * m + 2 * n],
        truth_doas_deg=raw[:, 2 * m + 2 * n + 1 :],
    )


def steering_blocks(positions: np.ndarray, grid_deg: np.ndarray):
    """Complex steering matrix and its per-radian angle derivative for a
    linear array with half-wavelength-unit element offsets."""
    theta = np.deg2rad(np.asarray(grid_deg, dtype=float))
    d = np.asarray(positions, dtype=float)[:, None]
    a = np.exp(1j * np.pi * d * np.sin(theta)[None, :])
    b = 1j * np.pi * d * np.cos(theta)[None, :] * a
    return a, b


def _block_realify(z: np.ndarray) -> np.ndarray:
    """[[Re, -Im], [Im, Re]] block matrix of a complex matrix."""
    return np.block([[z.real, -z.imag], [z.imag, z.real]])


@dataclass(frozen=True)
class RealifiedSystem:
    """Stacked real measurement model shared by all network variants."""

    a_r: np.ndarray          # (2M, 2N)
    b_r: np.ndarray          # (2M, 2N)
    grid_deg: np.ndarray
    spacing_deg: float
    k: int

    @property
    def m(self) -> int:
        return self.a_r.shape[0] // 2

    @property
    def n(self) -> int:
        return self.a_r.shape[1] // 2


def realify(data: DatasetFiles) -> RealifiedSystem:
    """Realified steering blocks for a dataset's array and grid."""
    a, b = steering_blocks(data.positions, data.grid_deg)
    return RealifiedSystem(
        a_r=_block_realify(a),
        b_r=_block_realify(b),
        grid_deg=data.grid_deg,
        spacing_deg=data.spacing_deg,
        k=data.k,
    )
