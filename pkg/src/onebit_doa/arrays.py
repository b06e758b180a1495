"""Sparse linear array model: geometry, steering dictionaries, snapshot
simulation and one-bit (complex-sign) quantization.

Conventions used throughout the package:

* element positions are expressed in half-wavelength units, so the phase of
  element ``m`` at angle ``theta`` is ``pi * positions[m] * sin(theta)``;
* angles at the API surface are degrees, derivatives and off-grid gaps are
  per-radian / radians (conversion happens at this module's boundary);
* ``sign(0) = +1``, applied independently to real and imaginary parts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ArrayGeometry",
    "SteeringDictionary",
    "Scene",
    "Snapshot",
    "OneBitSnapshot",
    "SLA18",
    "SLA10",
    "named_geometry",
    "steering_vector",
    "steering_derivative",
    "build_dictionary",
    "offgrid_manifold",
    "noise_sigma",
    "simulate_snapshot",
    "one_bit_quantize",
]


@dataclass(frozen=True)
class ArrayGeometry:
    """Linear array described by element offsets in half-wavelength units.

    Offsets must start at zero and be strictly increasing; at least two
    elements are required.
    """

    positions: tuple[float, ...]

    def __post_init__(self):
        pos = tuple(float(p) for p in self.positions)
        if len(pos) < 2:
            raise ValueError("array needs at least 2 elements")
        if pos[0] != 0.0:
            raise ValueError("first element offset must be 0")
        if any(b <= a for a, b in zip(pos, pos[1:])):
            raise ValueError("element offsets must be strictly increasing")
        object.__setattr__(self, "positions", pos)

    @property
    def m(self) -> int:
        return len(self.positions)

    def position_array(self) -> np.ndarray:
        return np.asarray(self.positions, dtype=float)

    @classmethod
    def from_file(cls, path) -> "ArrayGeometry":
        """Load element offsets from a JSON file.

        Accepts either a bare list of offsets or an object with a
        ``positions`` key.
        """
        with open(path) as fh:
            data = json.load(fh)
        if isinstance(data, dict):
            data = data["positions"]
        return cls(tuple(data))


#: 18-element sparse array spanning a 19 half-wavelength aperture.
SLA18 = ArrayGeometry((0, 1, 2, 3, 4, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19))

#: 10-element sparse array spanning the same aperture.
SLA10 = ArrayGeometry((0, 3, 4, 5, 6, 7, 11, 16, 18, 19))

_NAMED = {"sla18": SLA18, "sla10": SLA10}


def named_geometry(name: str) -> ArrayGeometry:
    try:
        return _NAMED[name.lower()]
    except KeyError:
        raise ValueError(f"unknown geometry {name!r}; known: {sorted(_NAMED)}") from None


def _check_angle(theta_deg: float) -> float:
    theta_deg = float(theta_deg)
    if not abs(theta_deg) < 90.0:
        raise ValueError(f"angle must satisfy |theta| < 90 deg, got {theta_deg}")
    return theta_deg


def steering_vector(geom: ArrayGeometry, theta_deg: float) -> np.ndarray:
    """Array response to a unit plane wave from ``theta_deg`` degrees.

    Element ``m`` equals ``exp(1j * pi * positions[m] * sin(theta))``; the
    reference element (offset 0) is always 1.
    """
    theta = np.deg2rad(_check_angle(theta_deg))
    return np.exp(1j * np.pi * geom.position_array() * np.sin(theta))


def steering_derivative(geom: ArrayGeometry, theta_deg: float) -> np.ndarray:
    """Derivative of :func:`steering_vector` with respect to the angle in
    radians, evaluated at ``theta_deg``."""
    theta = np.deg2rad(_check_angle(theta_deg))
    d = geom.position_array()
    phase = np.pi * d * np.sin(theta)
    return 1j * np.pi * d * np.cos(theta) * np.exp(1j * phase)


@dataclass(frozen=True)
class SteeringDictionary:
    """Uniform angular grid with its steering matrix and angle derivative.

    ``manifold`` holds one steering vector per grid angle (M x N) and
    ``derivative`` the per-radian angle derivative of each column.
    """

    grid_deg: np.ndarray
    manifold: np.ndarray
    derivative: np.ndarray
    spacing_deg: float

    @property
    def m(self) -> int:
        return self.manifold.shape[0]

    @property
    def n(self) -> int:
        return self.manifold.shape[1]

    @property
    def gap_limit_rad(self) -> float:
        """Half a grid cell, in the unit used for off-grid gaps."""
        return np.deg2rad(self.spacing_deg) / 2.0


def build_dictionary(
    geom: ArrayGeometry, fov_deg: tuple[float, float], spacing_deg: float
) -> SteeringDictionary:
    """Build the steering dictionary for a uniformly divided field of view.

    The grid runs from ``fov_deg[0]`` to ``fov_deg[1]`` inclusive in steps of
    ``spacing_deg``; the span must be an integer multiple of the spacing.
    """
    lo, hi = (float(v) for v in fov_deg)
    r = float(spacing_deg)
    if not lo < hi:
        raise ValueError("field of view must satisfy lo < hi")
    if r <= 0:
        raise ValueError("grid spacing must be positive")
    steps = (hi - lo) / r
    if abs(steps - round(steps)) > 1e-9:
        raise ValueError(f"(hi - lo) / spacing = {steps} is not an integer")
    n = int(round(steps)) + 1
    grid = lo + r * np.arange(n)
    if not n > geom.m:
        raise ValueError(f"grid size {n} must exceed element count {geom.m}")
    theta = np.deg2rad(grid)
    d = geom.position_array()[:, None]
    manifold = np.exp(1j * np.pi * d * np.sin(theta)[None, :])
    derivative = 1j * np.pi * d * np.cos(theta)[None, :] * manifold
    return SteeringDictionary(grid, manifold, derivative, r)


def offgrid_manifold(dictionary: SteeringDictionary, gaps_rad: np.ndarray) -> np.ndarray:
    """First-order off-grid steering matrix: manifold plus gap-scaled
    derivative columns. Gaps are radians; callers keep them within half a
    grid cell."""
    gaps_rad = np.asarray(gaps_rad, dtype=float)
    return dictionary.manifold + dictionary.derivative * gaps_rad[None, :]


@dataclass(frozen=True)
class Scene:
    """A set of far-field sources: angles in degrees and complex amplitudes."""

    doas_deg: tuple[float, ...]
    amplitudes: tuple[complex, ...]

    def __post_init__(self):
        doas = tuple(float(t) for t in self.doas_deg)
        amps = tuple(complex(a) for a in self.amplitudes)
        if len(doas) == 0 or len(doas) != len(amps):
            raise ValueError("need equal, nonzero numbers of angles and amplitudes")
        if len(set(doas)) != len(doas):
            raise ValueError("source angles must be pairwise distinct")
        for t in doas:
            _check_angle(t)
        object.__setattr__(self, "doas_deg", doas)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def k(self) -> int:
        return len(self.doas_deg)


@dataclass(frozen=True)
class Snapshot:
    """One unquantized array output vector and the noise level it was drawn
    with."""

    y: np.ndarray
    sigma: float

    def __post_init__(self):
        if not np.all(np.isfinite(self.y)):
            raise ValueError("snapshot contains non-finite entries")


@dataclass(frozen=True)
class OneBitSnapshot:
    """Complex-sign quantized snapshot; entries are ``+-1 +- 1j``."""

    signs: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.signs)
        if not (np.all(np.abs(s.real) == 1.0) and np.all(np.abs(s.imag) == 1.0)):
            raise ValueError("quantized entries must have +-1 real and imaginary parts")

    @property
    def m(self) -> int:
        return self.signs.shape[0]

    def real_stack(self) -> np.ndarray:
        """Stacked [real; imag] sign vector of length 2M."""
        return np.concatenate([self.signs.real, self.signs.imag])


def noise_sigma(amplitudes, snr_db: float | None) -> float:
    """Noise standard deviation matching an SNR in dB.

    SNR is defined per element as ``10*log10(mean_k |s_k|^2 / sigma^2)``;
    ``None`` or ``inf`` requests the noiseless limit.
    """
    if snr_db is None or np.isinf(snr_db):
        return 0.0
    power = float(np.mean(np.abs(np.asarray(amplitudes, dtype=complex)) ** 2))
    return float(np.sqrt(power * 10.0 ** (-float(snr_db) / 10.0)))


def simulate_snapshot(
    geom: ArrayGeometry,
    scene: Scene,
    snr_db: float | None,
    rng: int | np.random.Generator | None = None,
) -> Snapshot:
    """Superpose the scene's sources on the array and add circular complex
    Gaussian noise with per-component variance ``sigma^2 / 2``.

    Deterministic for a given integer seed or generator state.
    """
    if not scene.k < geom.m:
        raise ValueError("need fewer sources than array elements")
    y = np.zeros(geom.m, dtype=complex)
    for theta, amp in zip(scene.doas_deg, scene.amplitudes):
        y += amp * steering_vector(geom, theta)
    sigma = noise_sigma(scene.amplitudes, snr_db)
    if sigma > 0.0:
        gen = np.random.default_rng(rng)
        noise = gen.standard_normal(geom.m) + 1j * gen.standard_normal(geom.m)
        y = y + (sigma / np.sqrt(2.0)) * noise
    return Snapshot(y, sigma)


def one_bit_quantize(y: Snapshot | np.ndarray) -> OneBitSnapshot:
    """Keep only the signs of real and imaginary parts (``sign(0) = +1``)."""
    arr = y.y if isinstance(y, Snapshot) else np.asarray(y, dtype=complex)
    re = np.where(arr.real >= 0.0, 1.0, -1.0)
    im = np.where(arr.imag >= 0.0, 1.0, -1.0)
    return OneBitSnapshot(re + 1j * im)
