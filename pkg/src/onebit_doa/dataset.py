"""Labeled training-corpus generation and its portable binary formats.

A dataset is a directory holding a JSON ``manifest`` and a flat
``records.bin`` of fixed-stride little-endian float32 records, in field
order: stacked quantized signs (2M), spectrum labels (N), gap labels in
degrees (N), SNR in dB (1), true DOAs in degrees (K). Network predictions
travel in the same conventions: per record, N spectrum magnitudes followed
by N gap estimates in degrees.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .arrays import ArrayGeometry, Scene, one_bit_quantize, simulate_snapshot

__all__ = [
    "SNR_LEVELS_DB",
    "FORMAT_VERSION",
    "DatasetRecord",
    "DatasetManifest",
    "DatasetView",
    "sample_scene",
    "make_record",
    "generate_dataset",
    "write_dataset",
    "read_dataset",
    "train_val_split",
    "write_predictions",
    "read_predictions",
]

SNR_LEVELS_DB = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
FORMAT_VERSION = 1
TRAIN_FRACTION = 0.9

#: grid spacing per sampling mode, degrees
MODE_SPACING_DEG = {"on_grid": 1.0, "off_grid": 2.0}


@dataclass(frozen=True)
class DatasetRecord:
    """One labeled example: quantized measurement, sparse label spectrum,
    per-bin gap labels (degrees), SNR tag and the true angles."""

    signs_real: np.ndarray
    spectrum_label: np.ndarray
    gap_label_deg: np.ndarray
    snr_db: float
    truth_doas_deg: np.ndarray

    def encode(self) -> bytes:
        parts = np.concatenate(
            [
                self.signs_real,
                self.spectrum_label,
                self.gap_label_deg,
                [self.snr_db],
                self.truth_doas_deg,
            ]
        )
        return parts.astype("<f4").tobytes()


@dataclass(frozen=True)
class DatasetManifest:
    """Sidecar description of a record file; everything needed to rebuild
    the dictionary and decode the binary stride."""

    mode: str
    m: int
    n: int
    k: int
    fov_deg: tuple[float, float]
    spacing_deg: float
    positions: tuple[float, ...]
    record_count: int
    seed: int
    train_fraction: float = TRAIN_FRACTION
    signed_gap_labels: bool = True
    format_version: int = FORMAT_VERSION

    @property
    def record_floats(self) -> int:
        return 2 * self.m + 2 * self.n + 1 + self.k

    @property
    def record_bytes(self) -> int:
        return 4 * self.record_floats

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "DatasetManifest":
        data = json.loads(text)
        data["fov_deg"] = tuple(data["fov_deg"])
        data["positions"] = tuple(data["positions"])
        return cls(**data)


class DatasetView:
    """Field-sliced view over the decoded record matrix."""

    def __init__(self, raw: np.ndarray, manifest: DatasetManifest):
        self.manifest = manifest
        m, n, k = manifest.m, manifest.n, manifest.k
        self.signs_real = raw[:, : 2 * m]
        self.spectrum_labels = raw[:, 2 * m : 2 * m + n]
        self.gap_labels_deg = raw[:, 2 * m + n : 2 * m + 2 * n]
        self.snr_db = raw[:, 2 * m + 2 * n]
        self.truth_doas_deg = raw[:, 2 * m + 2 * n + 1 :]

    def __len__(self) -> int:
        return self.signs_real.shape[0]

    def signs_complex(self, index: int) -> np.ndarray:
        m = self.manifest.m
        row = self.signs_real[index]
        return row[:m] + 1j * row[m:]


def _grid(fov_deg, spacing_deg) -> np.ndarray:
    lo, hi = fov_deg
    n = int(round((hi - lo) / spacing_deg)) + 1
    return lo + spacing_deg * np.arange(n)


def sample_scene(
    rng: np.random.Generator,
    mode: str,
    fov_deg: tuple[float, float] = (-60.0, 60.0),
    grid_deg: np.ndarray | None = None,
) -> tuple[Scene, np.ndarray, np.ndarray]:
    """Draw a two-source scene for the corpus.

    Sources occupy distinct grid cells; off-grid mode adds gaps uniform in
    half a cell each way, and amplitudes have real and imaginary parts
    uniform in (0.5, 1). Returns the scene, the grid indices of the sources
    and their gaps in degrees.
    """
    if mode not in MODE_SPACING_DEG:
        raise ValueError(f"unknown mode {mode!r}")
    spacing = MODE_SPACING_DEG[mode]
    grid = _grid(fov_deg, spacing) if grid_deg is None else np.asarray(grid_deg)
    idx = np.sort(rng.choice(grid.size, size=2, replace=False))
    if mode == "off_grid":
        gaps = rng.uniform(-spacing / 2.0, spacing / 2.0, size=2)
    else:
        gaps = np.zeros(2)
    amps = rng.uniform(0.5, 1.0, size=2) + 1j * rng.uniform(0.5, 1.0, size=2)
    scene = Scene(tuple(grid[idx] + gaps), tuple(amps))
    return scene, idx, gaps


def make_record(
    scene: Scene,
    snr_db: float,
    geom: ArrayGeometry,
    grid_deg: np.ndarray,
    rng: np.random.Generator,
    signed_gap_labels: bool = True,
) -> DatasetRecord:
    """Simulate, quantize and label one scene.

    The label spectrum carries each source's amplitude modulus at its
    nearest grid bin; gap labels carry the residual offset there (signed by
    default, magnitudes when ``signed_gap_labels`` is off).
    """
    grid_deg = np.asarray(grid_deg, dtype=float)
    spacing = float(grid_deg[1] - grid_deg[0])
    quantized = one_bit_quantize(simulate_snapshot(geom, scene, snr_db, rng))
    spectrum_label = np.zeros(grid_deg.size)
    gap_label = np.zeros(grid_deg.size)
    for theta, amp in zip(scene.doas_deg, scene.amplitudes):
        idx = int(round((theta - grid_deg[0]) / spacing))
        gap = theta - grid_deg[idx]
        spectrum_label[idx] = abs(amp)
        gap_label[idx] = gap if signed_gap_labels else abs(gap)
    return DatasetRecord(
        signs_real=quantized.real_stack(),
        spectrum_label=spectrum_label,
        gap_label_deg=gap_label,
        snr_db=float(snr_db),
        truth_doas_deg=np.asarray(scene.doas_deg, dtype=float),
    )


def generate_dataset(
    count: int,
    mode: str,
    geom: ArrayGeometry,
    seed: int,
    fov_deg: tuple[float, float] = (-60.0, 60.0),
    snr_levels_db: tuple[float, ...] = SNR_LEVELS_DB,
    signed_gap_labels: bool = True,
):
    """Yield ``count`` records plus their manifest.

    Each record draws from its own generator seeded by ``(seed, index)``, so
    regeneration is byte-exact and order-independent.
    """
    if count < 1:
        raise ValueError("need at least one record")
    spacing = MODE_SPACING_DEG[mode]
    grid = _grid(fov_deg, spacing)
    manifest = DatasetManifest(
        mode=mode,
        m=geom.m,
        n=grid.size,
        k=2,
        fov_deg=tuple(fov_deg),
        spacing_deg=spacing,
        positions=geom.positions,
        record_count=count,
        seed=seed,
        signed_gap_labels=signed_gap_labels,
    )

    def records():
        for i in range(count):
            rng = np.random.default_rng([seed, i])
            scene, _, _ = sample_scene(rng, mode, fov_deg, grid)
            snr = snr_levels_db[rng.integers(len(snr_levels_db))]
            yield make_record(scene, snr, geom, grid, rng, signed_gap_labels)

    return records(), manifest


def write_dataset(records, manifest: DatasetManifest, out_dir) -> Path:
    """Write ``manifest`` and ``records.bin`` into a directory."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest").write_text(manifest.to_json())
    written = 0
    with open(out / "records.bin", "wb") as fh:
        for rec in records:
            fh.write(rec.encode())
            written += 1
    if written != manifest.record_count:
        raise ValueError(
            f"manifest promises {manifest.record_count} records, wrote {written}"
        )
    return out


def read_dataset(path) -> tuple[DatasetManifest, DatasetView]:
    """Load a dataset directory back into memory, verifying the stride."""
    root = Path(path)
    manifest = DatasetManifest.from_json((root / "manifest").read_text())
    if manifest.format_version != FORMAT_VERSION:
        raise ValueError(
            f"format version {manifest.format_version} unsupported "
            f"(expected {FORMAT_VERSION})"
        )
    blob = (root / "records.bin").read_bytes()
    if len(blob) != manifest.record_count * manifest.record_bytes:
        raise ValueError(
            f"records.bin holds {len(blob)} bytes, expected "
            f"{manifest.record_count * manifest.record_bytes}"
        )
    raw = np.frombuffer(blob, dtype="<f4").reshape(
        manifest.record_count, manifest.record_floats
    )
    return manifest, DatasetView(np.asarray(raw, dtype=np.float64), manifest)


_SPLIT_TAG = 0x53504C49  # disambiguates the split stream from record streams


def train_val_split(record_count: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic 90/10 split: seeded shuffle, first block trains."""
    perm = np.random.default_rng([seed, _SPLIT_TAG]).permutation(record_count)
    cut = int(round(TRAIN_FRACTION * record_count))
    return perm[:cut], perm[cut:]


def write_predictions(path, spectra: np.ndarray, gaps_deg: np.ndarray) -> None:
    """Store per-record predicted spectra and gaps (degrees), float32 LE."""
    spectra = np.atleast_2d(np.asarray(spectra, dtype=float))
    gaps_deg = np.atleast_2d(np.asarray(gaps_deg, dtype=float))
    if spectra.shape != gaps_deg.shape:
        raise ValueError("spectra and gaps must have matching shapes")
    np.hstack([spectra, gaps_deg]).astype("<f4").tofile(path)


def read_predictions(path, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Load a predictions file for grid size ``n``; returns (spectra,
    gaps_deg)."""
    raw = np.fromfile(path, dtype="<f4")
    if raw.size % (2 * n) != 0:
        raise ValueError(f"prediction file length {raw.size} not a multiple of 2N")
    raw = raw.reshape(-1, 2 * n).astype(np.float64)
    return raw[:, :n], raw[:, n:]
