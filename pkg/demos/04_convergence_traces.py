"""Convergence behavior of the sigmoid-likelihood solver for different link
slopes: smaller b contracts faster and stops earlier.

Run:  python3 demos/04_convergence_traces.py
"""

import numpy as np

from onebit_doa import SLA18, Scene, build_dictionary, one_bit_quantize, simulate_snapshot
from onebit_doa.sbri import SbriConfig
from onebit_doa.sbrix import SbriXConfig, sbrix_solve

rng = np.random.default_rng(5)
scene = Scene((-30.0, 30.0), tuple(np.exp(1j * rng.uniform(0, 2 * np.pi, 2))))
quantized = one_bit_quantize(simulate_snapshot(SLA18, scene, 20.0, rng=11))
dictionary = build_dictionary(SLA18, (-60, 60), 1.0)

traces = {}
for b in (0.1, 0.5, 1.0, 2.0):
    cfg = SbriXConfig(base=SbriConfig(max_iters=40), b=b)
    res = sbrix_solve(quantized, dictionary, cfg)
    traces[b] = res.objective_trace
    print(f"b={b}: stopped after {res.iterations} iterations "
          f"(converged={res.converged}), objective "
          f"{res.objective_trace[0]:.1f} -> {res.objective_trace[-1]:.1f}")

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    for b, tr in traces.items():
        ax.semilogy(np.arange(len(tr)), np.asarray(tr) - min(min(t) for t in traces.values()) + 1e-3,
                    label=f"b = {b}")
    ax.set_xlabel("iteration")
    ax.set_ylabel("objective (shifted)")
    ax.legend()
    fig.tight_layout()
    fig.savefig("demos/04_convergence_traces.png", dpi=120)
    print("wrote demos/04_convergence_traces.png")
except ImportError:
    print("matplotlib not installed; skipping the plot")
