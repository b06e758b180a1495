"""Shared test setup: pin BLAS to one thread. The solver matrices are tiny
(tens to low hundreds of rows) and OpenBLAS spin-waits dominate otherwise."""

import pytest
from threadpoolctl import threadpool_limits


@pytest.fixture(autouse=True, scope="session")
def single_threaded_blas():
    with threadpool_limits(limits=1, user_api="blas"):
        yield
