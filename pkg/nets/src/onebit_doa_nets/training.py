"""Training, evaluation and prediction export.

The off-grid variants train in two stages: the gap heads stay frozen while
the spectrum path learns, then everything is unfrozen and trained jointly.
Checkpoints carry the architecture settings so evaluation can rebuild the
network from the file alone.
"""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

import numpy as np
import torch

from .losses import bce_spectrum, combined_loss
from .models import NetConfig, build_net
from .realify import DatasetFiles, load_dataset, realify

__all__ = ["train", "load_checkpoint", "evaluate_export", "write_predictions"]


def _tensors(data: DatasetFiles, dtype=torch.float32):
    signs = torch.as_tensor(data.signs_real, dtype=dtype)
    spectra = torch.as_tensor(data.spectrum_labels, dtype=dtype)
    gaps = torch.as_tensor(data.gap_labels_deg, dtype=dtype)
    return signs, spectra, gaps


def _split(count: int, seed: int, train_fraction: float = 0.9):
    perm = np.random.default_rng([seed, 0x53504C49]).permutation(count)
    cut = int(round(train_fraction * count))
    return perm[:cut], perm[cut:]


def train(
    dataset_dir,
    cfg: NetConfig | None = None,
    kind: str = "sbri",
    out_dir=None,
    quiet: bool = False,
) -> tuple[Path, dict]:
    """Train a network on a dataset directory; returns the checkpoint path
    and the metrics log (per-epoch train/validation losses)."""
    cfg = cfg or NetConfig()
    data = load_dataset(dataset_dir)
    off_grid = data.mode == "off_grid"
    torch.manual_seed(cfg.seed)
    net = build_net(kind, realify(data), cfg, off_grid)
    signs, spectra, gap_labels = _tensors(data)
    train_idx, val_idx = _split(len(signs), data.seed)

    opt = torch.optim.Adam(net.parameters(), lr=cfg.learning_rate)
    stage1_epochs = int(round(cfg.stage1_fraction * cfg.epochs)) if off_grid else 0
    log: dict = {"kind": kind, "mode": data.mode, "epochs": [], "stage1_epochs": stage1_epochs}
    rng = np.random.default_rng(cfg.seed)

    def set_gap_frozen(frozen: bool):
        if off_grid:
            for p in net.gap.parameters():
                p.requires_grad_(not frozen)

    for epoch in range(cfg.epochs):
        stage1 = off_grid and epoch < stage1_epochs
        set_gap_frozen(stage1)
        net.train()
        order = rng.permutation(train_idx)
        total = 0.0
        for lo in range(0, len(order), cfg.batch_size):
            idx = order[lo : lo + cfg.batch_size]
            opt.zero_grad()
            x, gaps = net(signs[idx])
            probs = net.probabilities(x)
            if stage1 or not off_grid:
                loss = bce_spectrum(probs, spectra[idx])
            else:
                loss = combined_loss(probs, spectra[idx], gaps, gap_labels[idx])
            loss.backward()
            opt.step()
            total += float(loss.detach()) * len(idx)
        net.eval()
        with torch.no_grad():
            x, gaps = net(signs[val_idx])
            probs = net.probabilities(x)
            val_bce = float(bce_spectrum(probs, spectra[val_idx]))
            val_total = val_bce
            if off_grid and gaps is not None:
                val_total = float(
                    combined_loss(probs, spectra[val_idx], gaps, gap_labels[val_idx])
                )
        entry = {
            "epoch": epoch + 1,
            "stage": 1 if stage1 else 2,
            "train_loss": total / len(order),
            "val_bce": val_bce,
            "val_loss": val_total,
        }
        log["epochs"].append(entry)
        if not quiet:
            print(f"epoch {entry['epoch']:3d} stage {entry['stage']} "
                  f"train {entry['train_loss']:.4f} val_bce {entry['val_bce']:.4f}")
        if not np.isfinite(entry["train_loss"]):
            raise RuntimeError(f"training diverged at epoch {epoch + 1} (non-finite loss)")

    out = Path(out_dir) if out_dir else Path(dataset_dir) / f"{kind}_net"
    out.mkdir(parents=True, exist_ok=True)
    ckpt_path = out / "checkpoint.pt"
    torch.save(
        {
            "kind": kind,
            "config": asdict(cfg),
            "mode": data.mode,
            "state": net.state_dict(),
        },
        ckpt_path,
    )
    (out / "metrics.json").write_text(json.dumps(log, indent=2))
    return ckpt_path, log


def load_checkpoint(ckpt_path, dataset_dir):
    """Rebuild a network from a checkpoint plus the dataset it was built
    for (the dataset fixes the array and grid)."""
    payload = torch.load(ckpt_path, weights_only=True)
    cfg = NetConfig(**payload["config"])
    data = load_dataset(dataset_dir)
    net = build_net(payload["kind"], realify(data), cfg, payload["mode"] == "off_grid")
    net.load_state_dict(payload["state"])
    net.eval()
    return net, data


def write_predictions(path, spectra: np.ndarray, gaps_deg: np.ndarray) -> None:
    """Predictions file shared with the solver package: per record, N
    spectrum values then N gap estimates (degrees), little-endian float32."""
    np.hstack([spectra, gaps_deg]).astype("<f4").tofile(path)


def evaluate_export(ckpt_path, dataset_dir, predictions_path, batch_size: int = 256) -> dict:
    """Run a checkpoint over every record of a dataset and export the
    predictions in the shared binary format; returns a small metrics dict."""
    net, data = load_checkpoint(ckpt_path, dataset_dir)
    signs = torch.as_tensor(data.signs_real, dtype=torch.float32)
    probs_out = np.zeros((len(signs), data.n), dtype=np.float64)
    gaps_out = np.zeros((len(signs), data.n), dtype=np.float64)
    with torch.no_grad():
        for lo in range(0, len(signs), batch_size):
            x, gaps = net(signs[lo : lo + batch_size])
            probs_out[lo : lo + batch_size] = net.probabilities(x).numpy()
            if gaps is not None:
                gaps_out[lo : lo + batch_size] = gaps.numpy()
    write_predictions(predictions_path, probs_out, gaps_out)
    spectra = torch.as_tensor(data.spectrum_labels, dtype=torch.float32)
    with torch.no_grad():
        bce = float(bce_spectrum(torch.as_tensor(probs_out, dtype=torch.float32), spectra))
    metrics = {"records": int(len(signs)), "bce": bce,
               "predictions": str(predictions_path)}
    return metrics
