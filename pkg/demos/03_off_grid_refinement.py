"""Off-grid estimation: a coarse 2-degree grid plus per-bin gap refinement.

The demo solves the same snapshot with the on-grid and off-grid variants and
shows how the gap estimate moves each peak off its grid cell center.

Run:  python3 demos/03_off_grid_refinement.py
"""

import numpy as np

from onebit_doa import (
    SLA18,
    Scene,
    build_dictionary,
    extract_doas,
    find_peaks,
    one_bit_quantize,
    sbri_solve,
    simulate_snapshot,
)

rng = np.random.default_rng(3)
truth = (-10.28, 20.56)
dictionary = build_dictionary(SLA18, (-60, 60), spacing_deg=2.0)

print("truth:", truth)
print(f"{'trial':>5} {'on-grid estimate':>22} {'off-grid estimate':>24}")
for t in range(8):
    scene = Scene(truth, tuple(np.exp(1j * rng.uniform(0, 2 * np.pi, 2))))
    quantized = one_bit_quantize(simulate_snapshot(SLA18, scene, 20.0, 100 + t))
    row = []
    for mode in ("on_grid", "off_grid"):
        res = sbri_solve(quantized, dictionary, mode=mode)
        mags = np.abs(res.spectrum)
        est = extract_doas(dictionary, res.gaps_rad, find_peaks(mags, 2), mags)
        row.append(np.round(est.angles_deg, 2))
    print(f"{t:>5} {str(row[0]):>22} {str(row[1]):>24}")

print("\nOn a 2-degree grid the on-grid readout cannot do better than the")
print("nearest bins (-10, 20); the gap step recovers part of the residual.")
