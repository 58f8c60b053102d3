import numpy as np
import pytest

from qmor import linalg
from qmor.eom import VariableSet, build_generator, closure, partition_and_factor
from qmor.exceptions import InvalidStateError, StepSizeError
from qmor.mor import reduce_interconnected
from qmor.pauli import LindbladModel, PauliPolynomial, PauliString
from qmor.sim import (
    DensityMatrix,
    density_from_amplitudes,
    density_from_bloch_product,
    expectations_from_state,
    integrate_linear,
    oracle_master_equation,
    poly_to_matrix,
    simulate_interconnected,
    string_to_matrix,
)

from conftest import independent_flip_model, random_model, two_spin_model

P = PauliString.from_letters


def test_integrate_constant():
    times = np.linspace(0.0, 2.0, 9)
    traj = integrate_linear(np.zeros((2, 2)), [0.3, -0.7], times)
    assert np.allclose(traj.values, np.tile([0.3, -0.7], (9, 1)))


def test_integrate_scalar_decay():
    times = np.linspace(0.0, 3.0, 61)
    traj = integrate_linear(np.array([[-1.0]]), [1.0], times)
    assert np.max(np.abs(traj.values[:, 0] - np.exp(-times))) < 1e-8


def test_integrate_two_spin_vs_expm():
    m = two_spin_model(10.0, 2.0, 0.1, 0.1)
    vars = closure(["XI", "YI", "ZI"], m)
    a = build_generator(vars, m).a
    rng = np.random.default_rng(5)
    x0 = rng.uniform(-0.3, 0.3, size=10)
    times = np.linspace(0.0, 1.0, 101)
    traj = integrate_linear(a, x0, times, vars.labels)
    ref = linalg.expm(a) @ x0
    assert np.max(np.abs(traj.values[-1] - ref)) < 1e-8


def test_integrate_step_guard():
    with pytest.raises(StepSizeError):
        integrate_linear(np.array([[-1e9]]), [1.0], [0.0, 1e3])


def test_trajectory_column_and_bounds():
    times = np.linspace(0.0, 1.0, 5)
    traj = integrate_linear(np.zeros((1, 1)), [1.0], times, labels=("Z",))
    assert np.allclose(traj.column("Z"), 1.0)
    traj.check_expectation_bounds()


def test_simulate_interconnected_equals_monolithic(generic_two_spin):
    vars = closure(["ZI"], generic_two_spin)
    gen = build_generator(vars, generic_two_spin)
    ic = partition_and_factor(gen, ["ZI"])
    x0 = np.array([1.0, 0.0, 0.2, -0.1, 0.0, 0.3])
    times = np.linspace(0.0, 2.0, 81)
    full = integrate_linear(gen.a, x0, times, vars.labels)
    part = simulate_interconnected(ic, x0[:1], x0[1:], times)
    assert part.labels == ("ZI",)
    assert np.max(np.abs(part.column("ZI") - full.column("ZI"))) < 1e-12


def test_simulate_interconnected_entangled_state_map(regime_model):
    # reduced model consumes an entangled initial condition through the
    # balanced-coordinate map without special casing
    vars = closure(["ZI"], regime_model)
    gen = build_generator(vars, regime_model)
    ic = partition_and_factor(gen, ["ZI"])
    red = reduce_interconnected(ic, 1)
    bell = np.array([1.0, 0.0, 0.0, 1.0j]) / np.sqrt(2.0)
    x0 = expectations_from_state(bell, vars)
    times = np.linspace(0.0, 5.0, 101)
    traj = simulate_interconnected(red, x0[:1], x0[1:], times)
    assert traj.values.shape == (101, 1)
    assert np.all(np.isfinite(traj.values))


def test_oracle_maximally_mixed_is_fixed_point(rng):
    for n in (1, 2, 3):
        m = random_model(rng, n, hermitian_collapse=True)
        rho0 = DensityMatrix(n, np.eye(1 << n, dtype=complex) / (1 << n))
        vars = VariableSet([P("Z" + "I" * (n - 1)), P("X" * n)])
        traj = oracle_master_equation(m, rho0, np.linspace(0.0, 1.0, 11), vars)
        assert np.max(np.abs(traj.values)) < 1e-10


def test_oracle_matches_expectation_ode(regime_model):
    vars = closure(["XI", "YI", "ZI"], regime_model)
    gen = build_generator(vars, regime_model)
    rng = np.random.default_rng(11)
    psi = rng.normal(size=4) + 1j * rng.normal(size=4)
    psi /= np.linalg.norm(psi)
    times = np.linspace(0.0, 5.0, 201)
    x0 = expectations_from_state(psi, vars)
    ode = integrate_linear(gen.a, x0, times, vars.labels)
    orc = oracle_master_equation(
        regime_model, density_from_amplitudes(psi), times, vars
    )
    assert np.max(np.abs(ode.values - orc.values)) < 1e-6


def test_oracle_three_qubit_flip_decay():
    g = 0.8
    m = independent_flip_model(3, g)
    rho0 = density_from_bloch_product([(0, 0, 1)] * 3)
    times = np.linspace(0.0, 2.0, 21)
    traj = oracle_master_equation(m, rho0, times, VariableSet(["ZZZ"]))
    assert np.max(np.abs(traj.column("ZZZ") - np.exp(-6 * g * times))) < 1e-8


def test_oracle_nine_qubit_z_sector_matches_ode():
    # matrix-free path: the 130 odd-weight Z strings close under the flip
    # model; agreement with the expectation ODE at the coarser 1e-5 level
    g = 1.0
    m = independent_flip_model(9, g)
    strings = ["ZIIIIIIII", "IIIIZIIII", "ZZZIIIIII", "ZIIZIIZII",
               "ZZIZZIIII", "ZZZZZIIII", "ZZZZZZZII", "ZZZZZZZZZ"]
    vars = closure(strings, m)
    gen = build_generator(vars, m)
    psi = np.zeros(512, dtype=complex)
    psi[0], psi[511] = 0.8, 0.6
    x0 = expectations_from_state(psi, vars)
    times = np.linspace(0.0, 0.4, 5)
    ode = integrate_linear(gen.a, x0, times, vars.labels)
    orc = oracle_master_equation(m, density_from_amplitudes(psi), times, vars)
    assert np.max(np.abs(ode.values - orc.values)) < 1e-5


def test_expectations_from_state_examples():
    assert expectations_from_state(np.array([1.0, 0.0]), VariableSet(["Z"]))[0] == 1.0
    ghz = np.zeros(8)
    ghz[0] = ghz[7] = 2**-0.5
    assert expectations_from_state(ghz, VariableSet(["XXX"]))[0] == pytest.approx(1.0)
    a, b = 0.6, 0.8
    psi = np.array([a, b], dtype=complex)
    assert expectations_from_state(psi, VariableSet(["Z"]))[0] == pytest.approx(
        a * a - b * b
    )


def test_expectations_from_state_normalization():
    with pytest.raises(InvalidStateError):
        expectations_from_state(np.array([1.0, 1.0]), VariableSet(["Z"]))


def test_density_matrix_validation():
    with pytest.raises(InvalidStateError):
        DensityMatrix(1, np.array([[1.0, 0.5], [0.2, 0.0]]))
    with pytest.raises(InvalidStateError):
        DensityMatrix(1, np.array([[0.7, 0.0], [0.0, 0.7]]))
    with pytest.raises(InvalidStateError):
        DensityMatrix(1, np.array([[1.5, 0.0], [0.0, -0.5]]))


def test_oracle_preserves_trace_and_bounds(rng):
    m = random_model(rng, 2, hermitian_collapse=True)
    psi = rng.normal(size=4) + 1j * rng.normal(size=4)
    psi /= np.linalg.norm(psi)
    basis = [
        PauliString(2, x, z) for x in range(4) for z in range(4) if x or z
    ]
    traj = oracle_master_equation(
        m, density_from_amplitudes(psi), np.linspace(0.0, 2.0, 21),
        VariableSet(basis),
    )
    traj.check_expectation_bounds()


def test_string_and_poly_matrices():
    y = string_to_matrix(P("Y"))
    assert np.allclose(y, [[0, -1j], [1j, 0]])
    zz = string_to_matrix(P("ZZ"))
    assert np.allclose(zz, np.diag([1, -1, -1, 1]))
    poly = PauliPolynomial(1, {P("X"): 0.5, P("Z"): -0.25})
    assert np.allclose(
        poly_to_matrix(poly), 0.5 * string_to_matrix(P("X")) - 0.25 * string_to_matrix(P("Z"))
    )
