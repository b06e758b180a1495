"""One-bit single-snapshot DOA estimation on sparse linear arrays.

Iterative MAP estimators (SBRI and its sigmoid-likelihood variant SBRI-X) in
on-grid and off-grid form, with a simulator, dataset generator and Monte
Carlo benchmark harness.
"""

from .arrays import (
    SLA10,
    SLA18,
    ArrayGeometry,
    OneBitSnapshot,
    Scene,
    Snapshot,
    SteeringDictionary,
    build_dictionary,
    named_geometry,
    noise_sigma,
    offgrid_manifold,
    one_bit_quantize,
    simulate_snapshot,
    steering_derivative,
    steering_vector,
)
from .bench import BenchConfig, emit_report, run_bench, score_predictions
from .dataset import (
    DatasetManifest,
    DatasetRecord,
    generate_dataset,
    read_dataset,
    read_predictions,
    train_val_split,
    write_dataset,
    write_predictions,
)
from .sbri import NumericalError, SbriConfig, SolverResult, sbri_solve
from .sbrix import SbriXConfig, sbrix_solve
from .spectrum import DoaEstimate, extract_doas, find_peaks, score_trial

__version__ = "0.1.0"
