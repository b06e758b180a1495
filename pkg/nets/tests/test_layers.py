"""Layer-level tests: identity initialization, link drive arithmetic,
latent-noise step, gradients and losses."""

import numpy as np
import numpy.testing as npt
import pytest
import torch

from onebit_doa_nets.losses import bce_spectrum, combined_loss
from onebit_doa_nets.models import ConvBlock, NetConfig, SbriNet, SbrixNet, mills_ratio
from onebit_doa_nets.realify import load_dataset, realify


def test_conv_block_identity_at_init():
    block = ConvBlock(NetConfig())
    x = torch.randn(3, 2 * 61)
    npt.assert_allclose(block(x).detach().numpy(), x.numpy(), atol=1e-7)


def test_mills_ratio_matches_scipy():
    from scipy.special import log_ndtr

    t = torch.linspace(-8, 8, 41, dtype=torch.float64)
    want = np.exp(-0.5 * t.numpy() ** 2 - 0.5 * np.log(2 * np.pi) - log_ndtr(t.numpy()))
    npt.assert_allclose(mills_ratio(t).numpy(), want, rtol=1e-12)


def test_drive_at_origin_is_twice_the_signs(small_offgrid_dataset):
    # a = b = 1, zero spectrum and noise: each channel gets (1+1)^2/(e^0+1) = 2
    data = load_dataset(small_offgrid_dataset)
    net = SbrixNet(realify(data), NetConfig(depth=1, a_init=1.0, b_init=1.0),
                   off_grid=False, dtype=torch.float64)
    signs = torch.as_tensor(data.signs_real[:4], dtype=torch.float64)
    model = torch.zeros_like(signs)
    g = net.drive(0, signs, model)
    npt.assert_allclose(g.detach().numpy(), 2.0 * signs.numpy(), rtol=1e-9)


def test_drive_saturates_for_large_margins(small_offgrid_dataset):
    data = load_dataset(small_offgrid_dataset)
    net = SbrixNet(realify(data), NetConfig(depth=1), off_grid=False,
                   dtype=torch.float64)
    signs = torch.ones(1, 2 * data.m, dtype=torch.float64)
    g = net.drive(0, signs, 1e4 * torch.ones_like(signs))
    assert float(g.detach().abs().max()) == pytest.approx(0.0, abs=1e-20)


def test_noise_step_accumulates_drive_when_spectrum_fixed(small_offgrid_dataset):
    # the latent-noise update is eps - C(x_new - x_old) + g; a no-op spectrum
    # step leaves exactly the drive increment
    data = load_dataset(small_offgrid_dataset)
    sys = realify(data)
    net = SbrixNet(sys, NetConfig(depth=1), off_grid=False, dtype=torch.float64)
    signs = torch.as_tensor(data.signs_real[:3], dtype=torch.float64)
    x = net.init_spectrum(signs)
    noise = torch.randn(3, 2 * data.m, dtype=torch.float64)
    c_r = net.manifold(None)
    model = torch.einsum("bmn,bn->bm", c_r, x) + noise
    g = net.drive(0, signs, model)
    noise_new = noise - torch.einsum("bmn,bn->bm", c_r, x - x) + g
    npt.assert_allclose(
        (noise_new - noise).detach().numpy(), g.detach().numpy(), rtol=1e-12
    )


def test_link_gradient_matches_finite_differences(small_offgrid_dataset):
    data = load_dataset(small_offgrid_dataset)
    sys = realify(data)
    cfg = NetConfig(depth=2)
    torch.manual_seed(0)
    net = SbrixNet(sys, cfg, off_grid=False, dtype=torch.float64)
    signs = torch.as_tensor(data.signs_real[:8], dtype=torch.float64)
    labels = torch.as_tensor(data.spectrum_labels[:8], dtype=torch.float64)

    def loss_value():
        x, _ = net(signs)
        return bce_spectrum(net.probabilities(x), labels)

    loss = loss_value()
    loss.backward()
    grad = float(net.raw_b.grad[0])
    h = 1e-6
    with torch.no_grad():
        net.raw_b[0] += h
        up = float(loss_value())
        net.raw_b[0] -= 2 * h
        down = float(loss_value())
        net.raw_b[0] += h
    fd = (up - down) / (2 * h)
    assert abs(grad - fd) <= 1e-4 * max(abs(fd), 1e-8)


def test_gap_block_bounded_and_zero_at_init(small_offgrid_dataset):
    data = load_dataset(small_offgrid_dataset)
    net = SbriNet(realify(data), NetConfig(depth=2), off_grid=True)
    signs = torch.as_tensor(data.signs_real[:5], dtype=torch.float32)
    with torch.no_grad():
        _, gaps = net(signs)
    npt.assert_array_equal(gaps.numpy(), 0.0)  # zero-initialized heads
    for blk in net.gap:
        with torch.no_grad():
            blk.out.weight.normal_()
            blk.out.bias.normal_()
    with torch.no_grad():
        _, gaps = net(signs)
    assert float(np.abs(gaps.numpy()).max()) <= data.spacing_deg / 2 + 1e-6


def test_output_shapes(small_offgrid_dataset):
    data = load_dataset(small_offgrid_dataset)
    sys = realify(data)
    signs = torch.as_tensor(data.signs_real[:7], dtype=torch.float32)
    for off_grid in (False, True):
        net = SbriNet(sys, NetConfig(depth=2), off_grid=off_grid)
        with torch.no_grad():
            x, gaps = net(signs)
        assert x.shape == (7, 2 * data.n)
        assert (gaps is None) == (not off_grid)
        if off_grid:
            assert gaps.shape == (7, data.n)


def test_parameter_count_formula(small_offgrid_dataset):
    data = load_dataset(small_offgrid_dataset)
    cfg = NetConfig(depth=3)
    n, ch, k, h = data.n, cfg.conv_channels, cfg.conv_kernel, cfg.fc_hidden
    conv_params = (2 * ch * k + ch) + (ch * ch * k + ch) + (ch * 2 * k + 2)
    fc_params = (2 * n * h + h) + (h * n + n)
    head = 2  # probability readout scale and bias
    net = SbriNet(realify(data), cfg, off_grid=True)
    want = cfg.depth * (conv_params + fc_params) + head
    assert sum(p.numel() for p in net.parameters()) == want
    net_x = SbrixNet(realify(data), cfg, off_grid=True)
    assert sum(p.numel() for p in net_x.parameters()) == want + 2 * cfg.depth


class TestLosses:
    def test_exact_binary_labels_give_zero(self):
        labels = torch.zeros(2, 10)
        labels[0, 3] = 2**0.5
        labels[1, 7] = 2**0.5
        probs = (labels / 2**0.5).clamp(0, 1)
        assert float(bce_spectrum(probs, labels)) == pytest.approx(0.0, abs=1e-5)

    def test_matched_gaps_reduce_to_bce(self):
        probs = torch.rand(3, 8) * 0.8 + 0.1
        labels = torch.rand(3, 8)
        gaps = torch.randn(3, 8)
        l1 = bce_spectrum(probs, labels)
        l2 = combined_loss(probs, labels, gaps, gaps.clone())
        assert float(l2) == pytest.approx(float(l1), rel=1e-6)

    def test_uniform_half_gives_log_two(self):
        probs = torch.full((2, 16), 0.5)
        labels = torch.zeros(2, 16)
        labels[:, 2] = 2**0.5
        assert float(bce_spectrum(probs, labels)) == pytest.approx(float(np.log(2)), rel=1e-5)
