import cmath
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from anisoprop.classical import Endpoints
from anisoprop.errors import CausticError
from anisoprop.evolve import Grid2D, gaussian, observables
from anisoprop.model import OscillatorConfig
from anisoprop.oracle import (
    build_hamiltonian,
    calibrate_spectrum,
    central_stencils,
    composed_short_time_kernel,
    default_eigen_grid,
    eigensolve,
    evolve_reference,
    mehler_kernel,
)
from anisoprop.propagator import Gauge, kernel
from anisoprop.spectrum import levels_sorted

from conftest import FLAGSHIP

ISOTROPIC = OscillatorConfig(omega1=1.0, omega2=1.0, omega0=0.0)


@pytest.mark.parametrize("order", [2, 4, 8])
def test_stencils_are_exact_on_polynomials(order):
    offsets, d1, d2 = central_stencils(order)
    for p in range(order + 1):
        f = offsets.astype(float) ** p
        assert d1 @ f == pytest.approx(1.0 if p == 1 else 0.0, abs=1e-10)
        assert d2 @ f == pytest.approx(2.0 if p == 2 else 0.0, abs=1e-10)


def test_stencil_order_must_be_even():
    with pytest.raises(ValueError):
        central_stencils(3)


@pytest.mark.parametrize("gauge", list(Gauge))
def test_hamiltonian_is_exactly_hermitian(gauge):
    ham = build_hamiltonian(FLAGSHIP, Grid2D.square(24, 3.0), gauge)
    assert ham.hermiticity_defect() == 0.0


def test_mehler_free_limit():
    t, x1, x2 = 0.8, 0.3, -0.4
    free = mehler_kernel(0.0, 1.0, 1.0, x1, x2, t)
    near = mehler_kernel(1e-7, 1.0, 1.0, x1, x2, t)
    assert abs(near - free) < 1e-9


def test_mehler_quarter_period_at_origin():
    omega = 2.0
    value = mehler_kernel(omega, 1.0, 1.0, 0.0, 0.0, math.pi / (2 * omega))
    expected = math.sqrt(omega / (2 * math.pi)) * cmath.exp(-1j * math.pi / 4)
    assert abs(value - expected) < 1e-14


def test_mehler_caustic():
    with pytest.raises(CausticError):
        mehler_kernel(1.0, 1.0, 1.0, 0.0, 0.0, math.pi)


@given(
    t=st.floats(0.05, 2.5),
    x1=st.floats(-2, 2), y1=st.floats(-2, 2), x2=st.floats(-2, 2), y2=st.floats(-2, 2),
)
def test_decoupled_kernel_is_a_mehler_product(t, x1, y1, x2, y2):
    config = OscillatorConfig(omega1=1.2, omega2=0.7, omega0=0.0)
    ours = kernel(Endpoints(x1, y1, x2, y2, t), config).value
    ref = mehler_kernel(1.2, 1.0, 1.0, x1, x2, t) * mehler_kernel(0.7, 1.0, 1.0, y1, y2, t)
    assert abs(ours - ref) < 1e-10 * max(1.0, abs(ref))


def test_isotropic_ground_state():
    vals = eigensolve(ISOTROPIC, k=6)
    assert vals[0] == pytest.approx(1.0, abs=1e-3)
    # levels 1-2 and 3-5 are degenerate
    assert vals[1] == pytest.approx(vals[2], abs=1e-6)
    assert vals[3] == pytest.approx(vals[5], abs=1e-6)


def test_eigenvalues_converge_under_refinement():
    coarse = eigensolve(FLAGSHIP, default_eigen_grid(FLAGSHIP, 128), k=4)
    fine = eigensolve(FLAGSHIP, default_eigen_grid(FLAGSHIP, 160), k=4)
    assert np.max(np.abs(coarse - fine) / fine) < 1e-3


def test_spectrum_is_gauge_invariant():
    config = OscillatorConfig(omega1=3.0, omega2=1.0, omega0=2.0)
    sym = eigensolve(config, k=5, gauge=Gauge.SYMMETRIC)
    wtd = eigensolve(config, k=5, gauge=Gauge.WEIGHTED)
    assert np.max(np.abs(sym - wtd)) < 1e-6


def test_calibration_report():
    report = calibrate_spectrum([OscillatorConfig(omega1=3.0, omega2=1.0, omega0=2.0)], levels=4, grid_points=96)
    assert report["kappa"] == 0.5
    assert report["max_relative_error"]["0.5"] < 1e-3
    entry = report["configs"][0]
    analytic = [e for _, e in levels_sorted(OscillatorConfig(omega1=3.0, omega2=1.0, omega0=2.0), 4)]
    assert entry["candidates"]["0.5"]["levels"] == pytest.approx(analytic)
    assert max(entry["printed_relative_error"]) > 0.1


def test_crank_nicolson_conserves_norm():
    psi0 = gaussian(Grid2D.square(32, 4.0), 0.5, 0.0, 1.0, 0.0, 0.5, 0.5)
    psi = evolve_reference(psi0, FLAGSHIP, 1.0, dt=1e-3)
    assert abs(psi.norm2 - psi0.norm2) < 1e-8


def test_crank_nicolson_free_spreading():
    nearly_free = OscillatorConfig(omega1=1e-6, omega2=1e-6, omega0=0.0)
    sigma, t = 0.5, 1.0
    psi0 = gaussian(Grid2D.square(128, 8.0), sigma_x=sigma, sigma_y=sigma)
    obs = observables(evolve_reference(psi0, nearly_free, t, dt=2e-3))
    expected = sigma**2 + (t / (2 * sigma)) ** 2
    assert obs["mean_x2"] == pytest.approx(expected, rel=1e-4)
    assert obs["mean_y2"] == pytest.approx(expected, rel=1e-4)


def test_crank_nicolson_coherent_state_centroid():
    psi0 = gaussian(Grid2D.square(96, 6.0), 1.0, 0.0, 0.0, 0.0, math.sqrt(0.5), math.sqrt(0.5))
    t = math.pi / 2
    obs = observables(evolve_reference(psi0, ISOTROPIC, t, dt=5e-3))
    assert obs["mean_x"] == pytest.approx(math.cos(t), abs=1e-4)
    assert obs["mean_px"] == pytest.approx(-math.sin(t), abs=1e-4)


def test_composed_kernel_two_slices():
    ep = Endpoints(0.3, -0.2, 0.5, 0.4, 0.6)
    exact = kernel(ep, FLAGSHIP).value
    composed = composed_short_time_kernel(ep, FLAGSHIP, 2, n_grid=128)
    assert abs(composed - exact) / abs(exact) < 1e-3


def test_composed_kernel_single_slice_is_exact():
    ep = Endpoints(0.3, -0.2, 0.5, 0.4, 0.6)
    assert composed_short_time_kernel(ep, FLAGSHIP, 1) == pytest.approx(kernel(ep, FLAGSHIP).value, rel=1e-14)


def test_composed_kernel_crosses_a_conjugate_point():
    config = OscillatorConfig(omega1=1.2, omega2=0.7, omega0=0.0)
    ep = Endpoints(0.3, -0.2, 0.5, 0.4, 3.0)
    ref = mehler_kernel(1.2, 1.0, 1.0, 0.3, 0.5, 3.0) * mehler_kernel(0.7, 1.0, 1.0, -0.2, 0.4, 3.0)
    composed = composed_short_time_kernel(ep, config, 2, n_grid=128)
    assert abs(composed - ref) / abs(ref) < 2e-3


def test_composed_kernel_rejects_long_slices():
    with pytest.raises(CausticError):
        composed_short_time_kernel(Endpoints(0, 0, 1, 1, 3.0), FLAGSHIP, 2)
    with pytest.raises(ValueError):
        composed_short_time_kernel(Endpoints(0, 0, 1, 1, 0.5), FLAGSHIP, 0)
