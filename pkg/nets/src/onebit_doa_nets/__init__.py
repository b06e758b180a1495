"""Toy-scale deep-unrolled counterparts of the one-bit DOA solvers.

Consumes datasets produced by the ``onebit-doa`` package through its
documented binary formats and exports predictions the solver package can
score; the two packages share no code.
"""

from .losses import bce_spectrum, combined_loss
from .models import ConvBlock, GapBlock, NetConfig, SbriNet, SbrixNet, build_net
from .realify import DatasetFiles, RealifiedSystem, load_dataset, realify, steering_blocks
from .training import evaluate_export, load_checkpoint, train, write_predictions

__version__ = "0.1.0"
