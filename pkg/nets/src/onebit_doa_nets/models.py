"""Deep-unrolled inference networks.

Each layer mirrors one iteration of the corresponding solver: the
model-based quantities (sign folding, CDF score, link drive, latent-noise
step) are computed exactly, while the matrix-inversion step is replaced by a
learned convolutional block and the off-grid gap step by a learned
fully-connected block. With ``exact_solve=True`` the convolutional blocks
are bypassed by the exact regularized solve, which reproduces the iterative
solver layer for layer (the cross-package equivalence test).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch
from torch import nn

from .realify import RealifiedSystem

__all__ = ["NetConfig", "ConvBlock", "GapBlock", "SbriNet", "SbrixNet", "build_net"]

LOG_SQRT_2PI = 0.5 * float(np.log(2.0 * np.pi))

#: smoothing constant of the reweighting, matching the solver default
ETA = 1e-6


@dataclass(frozen=True)
class NetConfig:
    """Architecture and training settings (all sizes are toy-scale
    declarations; the papers this follows leave them unspecified)."""

    depth: int = 6
    conv_layers: int = 3
    conv_channels: int = 16
    conv_kernel: int = 3
    fc_hidden: int = 128
    a_init: float = 1.0
    b_init: float = 0.5
    epochs: int = 10
    batch_size: int = 64
    learning_rate: float = 1e-3
    stage1_fraction: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.depth < 1 or self.batch_size < 1:
            raise ValueError("depth and batch_size must be at least 1")


def mills_ratio(t: torch.Tensor) -> torch.Tensor:
    """pdf/CDF ratio of the standard normal (log-domain evaluation)."""
    return torch.exp(-0.5 * t * t - LOG_SQRT_2PI - torch.special.log_ndtr(t))


class ConvBlock(nn.Module):
    """Residual 1-D convolutional stack over the angle bins.

    Input and output are stacked real/imaginary spectra of length 2N,
    treated as a 2-channel signal of length N. The last convolution is
    zero-initialized, so an untrained block is the identity map.
    """

    def __init__(self, cfg: NetConfig):
        super().__init__()
        ch, k = cfg.conv_channels, cfg.conv_kernel
        pad = k // 2
        layers: list[nn.Module] = [nn.Conv1d(2, ch, k, padding=pad), nn.ReLU()]
        for _ in range(cfg.conv_layers - 2):
            layers += [nn.Conv1d(ch, ch, k, padding=pad), nn.ReLU()]
        last = nn.Conv1d(ch, 2, k, padding=pad)
        nn.init.zeros_(last.weight)
        nn.init.zeros_(last.bias)
        layers.append(last)
        self.body = nn.Sequential(*layers)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        batch = x.shape[0]
        chans = x.view(batch, 2, -1)
        return x + self.body(chans).reshape(batch, -1)


class GapBlock(nn.Module):
    """Fully connected gap head: stacked spectrum (2N) to per-bin gaps (N),
    bounded to half a grid cell by a scaled tanh. Zero-initialized, so the
    initial gaps are exactly zero."""

    def __init__(self, n: int, cfg: NetConfig, half_cell_deg: float):
        super().__init__()
        self.half_cell_deg = half_cell_deg
        self.hidden = nn.Linear(2 * n, cfg.fc_hidden)
        self.out = nn.Linear(cfg.fc_hidden, n)
        nn.init.zeros_(self.out.weight)
        nn.init.zeros_(self.out.bias)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.half_cell_deg * torch.tanh(self.out(torch.relu(self.hidden(x))))


def _fold(signs: torch.Tensor, values: torch.Tensor) -> torch.Tensor:
    return signs * values


class _UnrolledBase(nn.Module):
    """Shared plumbing: realified matrices as buffers, network heads, the
    probability readout and the exact solve used in equivalence mode."""

    def __init__(self, system: RealifiedSystem, cfg: NetConfig, off_grid: bool,
                 exact_solve: bool = False, dtype=torch.float32):
        super().__init__()
        self.cfg = cfg
        self.off_grid = off_grid
        self.exact_solve = exact_solve
        self.n = system.n
        self.register_buffer("a_r", torch.as_tensor(system.a_r, dtype=dtype))
        self.register_buffer("b_r", torch.as_tensor(system.b_r, dtype=dtype))
        self.half_cell_deg = system.spacing_deg / 2.0
        self.conv = nn.ModuleList(ConvBlock(cfg) for _ in range(cfg.depth))
        if off_grid:
            self.gap = nn.ModuleList(
                GapBlock(self.n, cfg, self.half_cell_deg) for _ in range(cfg.depth)
            )
        # probability readout: calibrated sigmoid of the per-bin modulus
        self.out_scale = nn.Parameter(torch.tensor(4.0))
        self.out_bias = nn.Parameter(torch.tensor(-2.0))
        if dtype == torch.float64:
            self.double()

    def manifold(self, gaps_deg: torch.Tensor | None) -> torch.Tensor:
        """Realified gap-corrected steering matrix for a batch:
        (batch, 2M, 2N)."""
        if gaps_deg is None:
            return self.a_r.unsqueeze(0)
        gaps_rad = torch.deg2rad(gaps_deg)
        stacked = torch.cat([gaps_rad, gaps_rad], dim=-1)
        return self.a_r.unsqueeze(0) + self.b_r.unsqueeze(0) * stacked.unsqueeze(1)

    def modulus(self, x: torch.Tensor) -> torch.Tensor:
        re, im = x[:, : self.n], x[:, self.n :]
        return torch.sqrt(re * re + im * im + 1e-12)

    def probabilities(self, x: torch.Tensor) -> torch.Tensor:
        return torch.sigmoid(self.out_scale * self.modulus(x) + self.out_bias)

    def init_spectrum(self, signs: torch.Tensor) -> torch.Tensor:
        x0 = torch.einsum("mn,bm->bn", self.a_r, signs)
        return x0 / torch.linalg.norm(x0, dim=1, keepdim=True).clamp_min(1e-30)

    @staticmethod
    def _unit_norm(z: torch.Tensor) -> torch.Tensor:
        """Per-sample scale normalization ahead of the learned blocks: the
        sign data carry no amplitude scale, and the regularized solve that a
        block replaces would otherwise control the iterate's size."""
        return z / torch.linalg.norm(z, dim=1, keepdim=True).clamp_min(1e-30)

    def _reweighting(self, x: torch.Tensor) -> torch.Tensor:
        mag2 = x[:, : self.n] ** 2 + x[:, self.n :] ** 2
        w = (mag2 + ETA) ** (-0.5)
        return torch.cat([w, w], dim=-1)

    def _exact_step(self, c_r: torch.Tensor, target: torch.Tensor,
                    x_prev: torch.Tensor, gamma: torch.Tensor,
                    reg_scale: float = 1.0) -> torch.Tensor:
        """Exact regularized solve replacing the learned block:
        (C^T C + reg * diag(w)) x = C^T target."""
        gram = torch.matmul(c_r.transpose(-1, -2), c_r)
        reg = reg_scale * gamma.view(-1, 1) * self._reweighting(x_prev)
        gram = gram + torch.diag_embed(reg)
        rhs = torch.einsum("bmn,bm->bn", c_r, target)
        return torch.linalg.solve(gram, rhs)


class SbriNet(_UnrolledBase):
    """Unrolled CDF-likelihood network: exact surrogate-target computation,
    learned spectrum step, learned gap step (off-grid)."""

    def forward(self, signs: torch.Tensor):
        x = self.init_spectrum(signs)
        gaps = (
            torch.zeros(signs.shape[0], self.n, dtype=signs.dtype, device=signs.device)
            if self.off_grid
            else None
        )
        gamma = torch.ones(signs.shape[0], dtype=signs.dtype, device=signs.device)
        for layer in range(self.cfg.depth):
            c_r = self.manifold(gaps)
            model = torch.einsum("bmn,bn->bm", c_r, x)
            d = _fold(signs, model)
            target = _fold(signs, d + mills_ratio(d))
            if self.exact_solve:
                x = self._exact_step(c_r, target, x, gamma)
                gamma = torch.linalg.norm(x, dim=1)
            else:
                z = torch.einsum("bmn,bm->bn", c_r, target)
                x = self.conv[layer](self._unit_norm(z))
            if self.off_grid:
                gaps = self.gap[layer](x)
        return (x, gaps) if self.off_grid else (x, None)


class SbrixNet(_UnrolledBase):
    """Unrolled sigmoid-likelihood network with layer-local learnable link
    parameters and the exact latent-noise update."""

    def __init__(self, system: RealifiedSystem, cfg: NetConfig, off_grid: bool,
                 exact_solve: bool = False, dtype=torch.float32):
        super().__init__(system, cfg, off_grid, exact_solve, dtype)
        # positive reparameterization: a_k = softplus(raw_a), b_k = softplus(raw_b)
        def inv_softplus(v: float) -> float:
            return float(np.log(np.expm1(v)))

        self.raw_a = nn.Parameter(
            torch.full((cfg.depth,), inv_softplus(cfg.a_init), dtype=self.a_r.dtype)
        )
        self.raw_b = nn.Parameter(
            torch.full((cfg.depth,), inv_softplus(cfg.b_init), dtype=self.a_r.dtype)
        )

    def link(self, layer: int):
        return nn.functional.softplus(self.raw_a[layer]), nn.functional.softplus(
            self.raw_b[layer]
        )

    def drive(self, layer: int, signs: torch.Tensor, model: torch.Tensor) -> torch.Tensor:
        a, b = self.link(layer)
        arg = torch.clamp(b * _fold(signs, model), max=60.0)
        return (a + 1.0) ** 2 * signs / (b * torch.exp(arg) + a * b)

    def forward(self, signs: torch.Tensor):
        x = self.init_spectrum(signs)
        noise = torch.zeros_like(signs)
        gaps = (
            torch.zeros(signs.shape[0], self.n, dtype=signs.dtype, device=signs.device)
            if self.off_grid
            else None
        )
        gamma = torch.ones(signs.shape[0], dtype=signs.dtype, device=signs.device)
        for layer in range(self.cfg.depth):
            c_r = self.manifold(gaps)
            model = torch.einsum("bmn,bn->bm", c_r, x) + noise
            g_r = self.drive(layer, signs, model)
            target = torch.einsum("bmn,bn->bm", c_r, x) + g_r
            if self.exact_solve:
                a, b = self.link(layer)
                scale = float((a + 1.0) ** 2 / (a * b**2))
                x_new = self._exact_step(c_r, target, x, gamma, reg_scale=scale)
                gamma = torch.linalg.norm(x_new, dim=1)
            else:
                z = torch.einsum("bmn,bm->bn", c_r, target)
                x_new = self.conv[layer](self._unit_norm(z))
            noise = noise - torch.einsum("bmn,bn->bm", c_r, x_new - x) + g_r
            if self.off_grid:
                gaps = self.gap[layer](x)
            x = x_new
        return (x, gaps) if self.off_grid else (x, None)


def build_net(kind: str, system: RealifiedSystem, cfg: NetConfig, off_grid: bool,
              exact_solve: bool = False, dtype=torch.float32):
    if kind == "sbri":
        return SbriNet(system, cfg, off_grid, exact_solve, dtype)
    if kind == "sbri_x":
        return SbrixNet(system, cfg, off_grid, exact_solve, dtype)
    raise ValueError(f"unknown network kind {kind!r}")
