import numpy as np
import pytest

from mixedaderdg.pde import (
    AcousticSystem,
    ElasticParams,
    ElasticSystem,
    EulerSystem,
    InadmissibleState,
    ShallowWaterSystem,
    SweParams,
    UnknownSystemError,
    flux,
    make_system,
    max_abs_eigenvalue,
    ncp,
)
from mixedaderdg.precision import FP16, ConfigurationError, KernelArithmetic


def test_acoustic_flux():
    sys = AcousticSystem()
    assert np.array_equal(flux(sys, np.array([1.0, 0.0, 0.0]), "x"), [0.0, 1.0, 0.0])
    assert np.array_equal(flux(sys, np.array([1.0, 0.0, 0.0]), "y"), [0.0, 0.0, 1.0])
    assert np.array_equal(flux(sys, np.array([0.0, 1.0, 0.0]), "x"), [4.0, 0.0, 0.0])


def test_euler_flux_at_rest():
    sys = EulerSystem()
    Q = np.array([1.0, 0.0, 0.0, 2.5])
    assert np.allclose(flux(sys, Q, "x"), [0.0, 1.0, 0.0, 0.0], atol=1e-15)
    assert np.allclose(flux(sys, Q, "y"), [0.0, 0.0, 1.0, 0.0], atol=1e-15)


def test_euler_energy_flux_uses_enthalpy():
    sys = EulerSystem()
    rho, vx, vy, p = 2.0, 0.5, -1.5, 3.0
    E = p / 0.4 + 0.5 * rho * (vx**2 + vy**2)
    Q = np.array([rho, rho * vx, rho * vy, E])
    assert flux(sys, Q, "x")[3] == pytest.approx(vx * (E + p))
    assert flux(sys, Q, "y")[3] == pytest.approx(vy * (E + p))
    assert flux(sys, Q, "y")[2] == pytest.approx(rho * vy * vy + p)


@pytest.mark.parametrize("b", [0.0, -0.7, 0.4])
def test_swe_flux_at_rest(b):
    sys = ShallowWaterSystem()
    Q = np.array([2.0, 0.0, 0.0, b])
    assert np.array_equal(flux(sys, Q, "x"), np.zeros(4))


@pytest.mark.parametrize("mass_flux, expected", [("discharge", 1.0), ("velocity", 0.5)])
def test_swe_mass_flux_variants(mass_flux, expected):
    sys = ShallowWaterSystem(SweParams(mass_flux=mass_flux))
    Q = np.array([2.0, 1.0, 0.0, 0.0])
    assert flux(sys, Q, "x")[0] == expected


def test_swe_ncp():
    sys = ShallowWaterSystem()
    Q = np.array([2.0, 0.0, 0.0, 0.3])
    zero = np.zeros(4)
    # Gradients of h and b cancel
    grad_x = np.array([0.5, 0.0, 0.0, -0.5])
    assert np.array_equal(ncp(sys, Q, grad_x, zero), zero)
    grad_x = np.array([0.5, 0.0, 0.0, 0.0])
    assert np.allclose(ncp(sys, Q, grad_x, zero), [0.0, 9.81 * 2.0 * 0.5, 0.0, 0.0])


def test_conservative_systems_have_zero_ncp():
    sys = AcousticSystem()
    Q = np.array([1.0, 2.0, 3.0])
    assert np.array_equal(ncp(sys, Q, Q, Q), np.zeros(3))


@pytest.mark.parametrize(
    "sys, Q, expected",
    [
        (AcousticSystem(), np.array([1.0, 0.0, 0.0]), 2.0),
        (ElasticSystem(), np.zeros(5), 2.0),
        (EulerSystem(), np.array([1.0, 0.0, 0.0, 2.5]), np.sqrt(1.4)),
        (ShallowWaterSystem(), np.array([1.0, 0.5, 0.0, 0.0]), 0.5 + np.sqrt(9.81)),
    ],
)
def test_max_abs_eigenvalue(sys, Q, expected):
    assert float(max_abs_eigenvalue(sys, Q, "x")) == pytest.approx(expected, rel=1e-15)


def test_elastic_shear_speed():
    assert ElasticSystem().shear_speed() == 1.0


@pytest.mark.parametrize("sys", [AcousticSystem(), ElasticSystem()])
def test_linear_flux_is_linear(sys):
    rng = np.random.default_rng(2)
    Q1 = rng.standard_normal((sys.nvars, 5))
    Q2 = rng.standard_normal((sys.nvars, 5))
    for direction in ("x", "y"):
        combined = flux(sys, 2.0 * Q1 - 3.0 * Q2, direction)
        separate = 2.0 * flux(sys, Q1, direction) - 3.0 * flux(sys, Q2, direction)
        assert np.allclose(combined, separate, atol=1e-13)


@pytest.mark.parametrize("sys", [AcousticSystem(), ElasticSystem()])
def test_linear_flux_matches_matrices(sys):
    rng = np.random.default_rng(4)
    Q = rng.standard_normal((sys.nvars, 7))
    A, B = sys.matrices()
    assert np.allclose(flux(sys, Q, "x"), A @ Q, atol=1e-14)
    assert np.allclose(flux(sys, Q, "y"), B @ Q, atol=1e-14)


def test_elastic_matrices_wave_speeds():
    A, _ = ElasticSystem(ElasticParams()).matrices()
    speeds = np.sort(np.abs(np.linalg.eigvals(A).real))
    assert np.allclose(speeds, [0.0, 1.0, 1.0, 2.0, 2.0], atol=1e-12)


@pytest.mark.parametrize(
    "sys, Q",
    [
        (EulerSystem(), np.array([-1.0, 0.0, 0.0, 2.5])),
        (EulerSystem(), np.array([1.0, 0.0, 0.0, -1.0])),
        (ShallowWaterSystem(), np.array([0.0, 0.0, 0.0, 0.0])),
        (EulerSystem(), np.array([np.nan, 0.0, 0.0, 2.5])),
    ],
)
def test_inadmissible_states(sys, Q):
    with pytest.raises(InadmissibleState):
        flux(sys, Q, "x")


def test_fluxes_in_reduced_precision_are_rounded():
    ar = KernelArithmetic(FP16)
    sys = EulerSystem()
    Q = ar.cast(np.array([[1.1, 0.9], [0.3, 0.2], [0.1, -0.2], [2.7, 2.6]]))
    result = sys.flux(ar, Q, 0)
    assert np.array_equal(result, ar.cast(result))


def test_make_system():
    assert isinstance(make_system("euler", gamma=1.3), EulerSystem)
    assert make_system("acoustic", K=9.0).wave_speed() == 3.0
    with pytest.raises(UnknownSystemError):
        make_system("mhd")
    with pytest.raises(ConfigurationError):
        make_system("acoustic", rho=0.0)
    with pytest.raises(ConfigurationError):
        make_system("swe", mass_flux="momentum")
