"""Shared fixtures; the expensive benchmark eigensolves are session-scoped."""
import numpy as np
import pytest

from capres.model import double_barrier_model, make_grid, single_well_model
from capres.operators import CapProfile, assemble_p_dirichlet, assemble_q_cap
from capres.oracle import find_resonances
from capres.spectra import SpectralBox, eig_dense

BENCH_CAP = dict(R1=3.0, R2=4.0, delta0=0.1, power=2, strength=1.0, imag_scale=0.0)


@pytest.fixture(scope="session")
def bench_model():
    return double_barrier_model(0.1)


@pytest.fixture(scope="session")
def bench_grid():
    return make_grid(6.0, 599)


@pytest.fixture(scope="session")
def bench_cap():
    return CapProfile(**BENCH_CAP)


@pytest.fixture(scope="session")
def bench_window():
    return SpectralBox(0.5, 1.5, 0.1)


@pytest.fixture(scope="session")
def bench_q_op(bench_model, bench_grid, bench_cap):
    return assemble_q_cap(bench_model, bench_grid, bench_cap)


@pytest.fixture(scope="session")
def bench_q_spectrum(bench_q_op):
    return eig_dense(bench_q_op, want_vectors=True)


@pytest.fixture(scope="session")
def bench_p_op(bench_model, bench_grid):
    return assemble_p_dirichlet(bench_model, bench_grid)


@pytest.fixture(scope="session")
def bench_oracle(bench_model, bench_window):
    return find_resonances(bench_model, bench_window)


@pytest.fixture(scope="session")
def well_model():
    return single_well_model(1.0)
