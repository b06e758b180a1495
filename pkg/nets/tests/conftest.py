"""Shared fixtures: datasets are produced through the solver package's CLI
(the only coupling between the two packages is file formats and commands)."""

import subprocess

import pytest
import torch

torch.set_num_threads(2)


def run_cli(*args):
    return subprocess.run(list(args), check=True, capture_output=True, text=True)


@pytest.fixture(scope="session")
def small_offgrid_dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("data") / "offgrid60"
    run_cli("gen-dataset", "--mode", "off", "--count", "60", "--seed", "5",
            "--out", str(out))
    return out


@pytest.fixture(scope="session")
def small_ongrid_dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("data") / "ongrid60"
    run_cli("gen-dataset", "--mode", "on", "--count", "60", "--seed", "6",
            "--out", str(out))
    return out
