"""Training losses: binary cross-entropy over the angle bins, plus a mean
squared gap error for the off-grid stage."""

from __future__ import annotations

import torch

__all__ = ["bce_spectrum", "combined_loss", "LABEL_SCALE"]

#: labels are amplitude moduli in (sqrt(0.5), sqrt(2)); dividing by sqrt(2)
#: maps them into (0, 1] for the cross-entropy
LABEL_SCALE = 2.0**0.5


def bce_spectrum(probs: torch.Tensor, spectrum_labels: torch.Tensor) -> torch.Tensor:
    """Mean binary cross-entropy between the per-bin probability map and the
    normalized label spectrum."""
    target = (spectrum_labels / LABEL_SCALE).clamp(0.0, 1.0)
    return torch.nn.functional.binary_cross_entropy(
        probs.clamp(1e-7, 1 - 1e-7), target
    )


def combined_loss(
    probs: torch.Tensor,
    spectrum_labels: torch.Tensor,
    gaps_deg: torch.Tensor | None,
    gap_labels_deg: torch.Tensor | None,
) -> torch.Tensor:
    """BCE plus the mean squared gap error (degrees); the gap term drops out
    when the network has no gap head."""
    loss = bce_spectrum(probs, spectrum_labels)
    if gaps_deg is not None and gap_labels_deg is not None:
        loss = loss + torch.mean((gaps_deg - gap_labels_deg) ** 2)
    return loss
