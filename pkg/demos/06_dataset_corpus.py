"""Generate a small labeled corpus in the portable binary format and read it
back: quantized sign vectors, sparse spectrum labels and gap labels.

Run:  python3 demos/06_dataset_corpus.py
"""

import numpy as np

from onebit_doa import SLA18, generate_dataset, read_dataset, train_val_split, write_dataset

records, manifest = generate_dataset(count=500, mode="off_grid", geom=SLA18, seed=9)
out = write_dataset(records, manifest, "demos/corpus")
manifest, view = read_dataset(out)

print(f"{manifest.record_count} records, stride {manifest.record_bytes} bytes, "
      f"grid size {manifest.n}, elements {manifest.m}")
print("SNR tags:", sorted(set(view.snr_db)))
gaps = view.gap_labels_deg[view.spectrum_labels > 0]
print(f"gap labels: min {gaps.min():+.3f} max {gaps.max():+.3f} "
      f"mean {gaps.mean():+.4f} (uniform on [-1, 1])")

train, val = train_val_split(manifest.record_count, manifest.seed)
print(f"split: {train.size} train / {val.size} val (deterministic in the seed)")
print("first training record truth:", view.truth_doas_deg[train[0]])
