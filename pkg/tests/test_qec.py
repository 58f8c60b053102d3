import itertools

import numpy as np
import pytest

from qmor import linalg
from qmor.eom import VariableSet, build_generator, closure
from qmor.exceptions import AlgebraError
from qmor.pauli import PauliPolynomial, PauliString, adjoint_generator
from qmor.qec import (
    PERFECT_CHANNEL,
    RecoveryChannel,
    RecoveryLayer,
    bitflip3,
    concatenate,
    code_projector,
    decode_functional,
    encode_expectations,
    encode_polynomial,
    logical_dynamics,
    oracle_apply_recovery,
    recovery_adjoint,
    recovery_superoperator,
    run_cycles,
)
from qmor.sim import (
    DensityMatrix,
    _superop_matrix,
    density_from_amplitudes,
    expectations_from_state,
    oracle_master_equation,
    poly_to_matrix,
    string_to_matrix,
)

from conftest import collective_flip_model, independent_flip_model

P = PauliString.from_letters


def code_state(a, b, n=3):
    psi = np.zeros(1 << n, dtype=complex)
    psi[0] = a
    psi[-1] = b
    return psi / np.linalg.norm(psi)


def random_bloch(rng, full=False):
    v = rng.normal(size=3)
    v /= np.linalg.norm(v)
    return v * (1.0 if full else rng.uniform(0.0, 1.0))


# ---------------------------------------------------------------- bitflip3


def test_syndromes_commute_and_recoveries_validate():
    code = bitflip3()
    s12, s13 = code.syndrome_observables
    assert s12.commutes_with(s13)
    assert code.recovery_ops[(1, 1)].is_identity
    assert code.recovery_ops[(-1, -1)] == P("XII")


def test_layer_validation_rejects_wrong_recovery():
    syn = (P("ZZI"), P("ZIZ"))
    bad = {
        (1, 1): P("III"),
        (-1, -1): P("IXI"),  # flips only the first syndrome
        (-1, 1): P("XII"),
        (1, -1): P("IIX"),
    }
    with pytest.raises(AlgebraError):
        RecoveryLayer(syn, bad)


def test_logical_observables_derived_forms():
    code = bitflip3()
    z = code.logical_observables["z"]
    assert z.coefficient("ZII") == 0.5
    assert z.coefficient("IZI") == 0.5
    assert z.coefficient("IIZ") == 0.5
    assert z.coefficient("ZZZ") == -0.5
    assert code.logical_observables["x"].coefficient("XXX") == 1.0
    y = code.logical_observables["y"]
    for s in ("XXY", "XYX", "YXX", "YYY"):
        assert y.coefficient(s) == 0.5


def test_ybar_sign_against_matrix_oracle():
    # the sign convention of the triple-Y term comes out of the recovery
    # adjoint; pin it against a dense matrix computation
    code = bitflip3()
    y = poly_to_matrix(code.logical_observables["y"])
    yrep = 1j * string_to_matrix(P("XXX")) @ string_to_matrix(P("ZII"))
    pats = list(itertools.product((1, -1), repeat=2))
    eye = np.eye(8)
    recs = {(1, 1): "III", (-1, -1): "XII", (-1, 1): "IXI", (1, -1): "IIX"}
    acc = np.zeros((8, 8), dtype=complex)
    for s1, s2 in pats:
        proj = (eye + s1 * string_to_matrix(P("ZZI"))) @ (
            eye + s2 * string_to_matrix(P("ZIZ"))
        ) / 4.0
        r = string_to_matrix(P(recs[(s1, s2)]))
        acc += proj @ r @ yrep @ r @ proj
    assert np.allclose(y, acc, atol=1e-12)


def test_recovery_restores_single_flip():
    code = bitflip3()
    a, b = 0.8, 0.6
    psi = code_state(a, b)
    rho = np.outer(psi, psi.conj())
    x2 = string_to_matrix(P("IXI"))
    corrupted = x2 @ rho @ x2
    recovered = oracle_apply_recovery(code, PERFECT_CHANNEL, corrupted)
    # the bare representative misreads the corrupted state; recovery fixes it
    zrep = string_to_matrix(code.logical_reps["z"])
    assert np.trace(zrep @ corrupted).real == pytest.approx(-(a * a - b * b))
    assert np.trace(zrep @ recovered).real == pytest.approx(a * a - b * b)
    # the recovered state is back on the code space
    pi = poly_to_matrix(code_projector(code))
    assert np.trace(pi @ recovered).real == pytest.approx(1.0)


def test_code_state_decodes_to_single_qubit_bloch(rng):
    code = bitflip3()
    vars = VariableSet(
        [s for obs in code.logical_observables.values() for s in obs.support()]
    )
    for _ in range(10):
        a = rng.normal() + 1j * rng.normal()
        b = rng.normal() + 1j * rng.normal()
        norm = np.sqrt(abs(a) ** 2 + abs(b) ** 2)
        a, b = a / norm, b / norm
        psi3 = code_state(a, b)
        vec = expectations_from_state(psi3, vars)
        psi1 = np.array([a, b])
        single = expectations_from_state(psi1, VariableSet(["X", "Y", "Z"]))
        for name, want in zip(("x", "y", "z"), single):
            got = vars.coefficient_vector(code.logical_observables[name]) @ vec
            assert got == pytest.approx(want, abs=1e-12)


# ------------------------------------------------------- noisy channels


def test_decode_functional_perfect_channel_is_idempotent():
    code = bitflip3()
    dec = decode_functional(code, PERFECT_CHANNEL)
    for name, obs in code.logical_observables.items():
        assert not (dec.poly(name) - obs)


def test_decode_support_stable_for_partial_efficiency():
    code = bitflip3()
    base = set(code.logical_observables["z"].support())
    for eta in (1e-6, 0.3, 0.7, 1.0):
        dec = decode_functional(code, RecoveryChannel(eta, 1.0))
        assert set(dec.poly("z").support()) == base


def test_decode_zero_efficiency_against_oracle(rng):
    # completely random syndrome outcomes: <Z> after = (Z_T + ZZZ)/4 before
    code = bitflip3()
    dec = decode_functional(code, RecoveryChannel(0.0, 1.0))
    z = dec.poly("z")
    for s in ("ZII", "IZI", "IIZ", "ZZZ"):
        assert z.coefficient(s) == pytest.approx(0.25, abs=1e-12)


@pytest.mark.parametrize("eta_meas", [0.0, 0.3, 0.7, 1.0])
@pytest.mark.parametrize("eta_rec", [0.0, 0.3, 0.7, 1.0])
def test_noisy_decode_matches_kraus_oracle(rng, eta_meas, eta_rec):
    code = bitflip3()
    ch = RecoveryChannel(eta_meas, eta_rec)
    dec = decode_functional(code, ch)
    for _ in range(4):
        psi = rng.normal(size=8) + 1j * rng.normal(size=8)
        psi /= np.linalg.norm(psi)
        rho = np.outer(psi, psi.conj())
        rho_rec = oracle_apply_recovery(code, ch, rho)
        assert abs(np.trace(rho_rec).real - 1.0) < 1e-12
        for name in ("x", "y", "z"):
            oracle_val = np.trace(
                poly_to_matrix(code.logical_observables[name]) @ rho_rec
            ).real
            support = VariableSet(dec.poly(name).support())
            sym = support.coefficient_vector(dec.poly(name)) @ expectations_from_state(
                psi, support
            )
            assert sym == pytest.approx(oracle_val, abs=1e-8)


def test_recovery_superoperator_fixes_decode():
    code = bitflip3()
    vars = VariableSet(code.logical_observables["z"].support())
    rmap = recovery_superoperator(code, PERFECT_CHANNEL, vars)
    w = rmap.variables.coefficient_vector(code.logical_observables["z"])
    assert np.allclose(rmap.matrix.T @ w, w, atol=1e-12)


def test_recovery_superoperator_dead_channel_is_identity():
    code = bitflip3()
    vars = VariableSet(["ZII", "IZI", "IIZ", "ZZZ", "XXX", "YYY"])
    rmap = recovery_superoperator(code, RecoveryChannel(0.0, 0.0), vars)
    assert np.allclose(rmap.matrix, np.eye(len(rmap.variables)), atol=1e-12)


def test_recovery_superoperator_rejects_syndrome_bias_strings():
    # weak measurement biases <Z1Z2> by a constant; that affine update has
    # no place in a homogeneous linear map and must fail loudly
    from qmor.exceptions import UnsupportedAffineError

    code = bitflip3()
    with pytest.raises(UnsupportedAffineError):
        recovery_superoperator(code, RecoveryChannel(0.6, 1.0), VariableSet(["ZZI"]))


def test_recovery_superoperator_matches_oracle_on_states(rng):
    code = bitflip3()
    ch = RecoveryChannel(0.6, 0.8)
    biased = {P("ZZI"), P("ZIZ"), P("IZZ")}
    basis = [
        PauliString(3, x, z)
        for x in range(8)
        for z in range(8)
        if (x or z) and PauliString(3, x, z) not in biased
    ]
    vars = VariableSet(basis)
    rmap = recovery_superoperator(code, ch, vars)
    assert rmap.variables == vars
    for _ in range(30):
        psi = rng.normal(size=8) + 1j * rng.normal(size=8)
        psi /= np.linalg.norm(psi)
        v = expectations_from_state(psi, vars)
        after = rmap.matrix @ v
        rho_rec = oracle_apply_recovery(code, ch, np.outer(psi, psi.conj()))
        want = expectations_from_state(
            DensityMatrix(3, rho_rec), vars
        )
        assert np.max(np.abs(after - want)) < 1e-10
        assert np.max(np.abs(after)) <= 1.0 + 1e-6


# ------------------------------------------------------ logical dynamics


def test_independent_flips_single_auxiliary_variable():
    g = 1.3
    code = bitflip3()
    ld = logical_dynamics(code, PERFECT_CHANNEL, independent_flip_model(3, g))
    z = ld.sectors["z"]
    assert z.dimension == 2 and z.aux_count == 1
    assert np.allclose(np.sort(z.rates()), [-6 * g, -2 * g])
    y = ld.sectors["y"]
    assert y.aux_count == 1
    assert np.allclose(np.sort(y.rates()), [-6 * g, -2 * g])
    x = ld.sectors["x"]
    assert x.dimension == 1 and np.allclose(x.rates(), [0.0])


def test_independent_flips_closed_form(rng):
    code = bitflip3()
    for g, z0 in [(0.1, 1.0), (1.0, 0.4)]:
        ld = logical_dynamics(code, PERFECT_CHANNEL, independent_flip_model(3, g))
        z = ld.sectors["z"]
        x0 = encode_expectations(code, (0.0, 0.0, z0), z.variables)
        ts = np.linspace(0.0, 3.0, 31)
        got = z.observable_trajectory(x0, ts)
        want = 0.5 * z0 * (3 * np.exp(-2 * g * ts) - np.exp(-6 * g * ts))
        assert np.max(np.abs(got - want)) < 1e-10


def test_correlated_two_auxiliary_variables_and_flat_start():
    gc = 0.7
    code = bitflip3()
    ld = logical_dynamics(code, PERFECT_CHANNEL, collective_flip_model(3, gc))
    z = ld.sectors["z"]
    assert z.dimension == 3 and z.aux_count == 2
    x0 = encode_expectations(code, (0.0, 0.0, 1.0), z.variables)
    u0 = z.basis @ x0
    dz0 = float(z.output @ (z.generator @ u0))
    # decoded value is flat at t = 0: syndrome projection removes the
    # first-order cross coherences even for collective noise
    assert abs(dz0) < 1e-12 * gc


def test_correlated_trajectory_against_oracle():
    gc = 0.9
    code = bitflip3()
    model = collective_flip_model(3, gc)
    ld = logical_dynamics(code, PERFECT_CHANNEL, model)
    z = ld.sectors["z"]
    z0 = 0.6
    x0 = encode_expectations(code, (0.0, 0.0, z0), z.variables)
    ts = np.linspace(0.0, 1.5, 16)
    got = z.observable_trajectory(x0, ts)
    # independent closed-form route
    want = z0 * (9.0 * np.exp(-2 * gc * ts) - np.exp(-18 * gc * ts)) / 8.0
    assert np.max(np.abs(got - want)) < 1e-10
    # density-matrix oracle route
    rho0 = poly_to_matrix(encode_polynomial(code, (0, 0, z0)))
    orc = oracle_master_equation(
        model, DensityMatrix(3, rho0), ts, z.variables
    )
    w = z.variables.coefficient_vector(ld.decode.poly("z"))
    assert np.max(np.abs(orc.values @ w - got)) < 1e-7


def test_second_order_protection_and_xbar_immunity():
    g = 1.0
    code = bitflip3()
    model = independent_flip_model(3, g)
    ld = logical_dynamics(code, PERFECT_CHANNEL, model)
    for name in ("z", "y"):
        sec = ld.sectors[name]
        bloch = {"z": (0, 0, 1), "y": (0, 1, 0)}[name]
        u0 = sec.basis @ encode_expectations(code, bloch, sec.variables)
        first = float(sec.output @ (sec.generator @ u0))
        assert abs(first) <= 1e-8 * g
        second = float(sec.output @ (sec.generator @ (sec.generator @ u0)))
        assert second == pytest.approx(-12 * g * g, rel=1e-10)
    assert not adjoint_generator(P("XXX"), model)


def test_zero_noise_freezes_logical_state():
    code = bitflip3()
    idle = independent_flip_model(3, 0.0)
    ld = logical_dynamics(code, PERFECT_CHANNEL, idle)
    assert np.all(ld.generators["z"] == 0.0)
    traj = run_cycles(code, PERFECT_CHANNEL, idle, 0.5, 6, (0.2, -0.4, 0.7))
    assert np.allclose(traj.values, traj.values[0], atol=1e-12)


def test_decode_encode_roundtrip(rng):
    code = bitflip3()
    vars = VariableSet(
        [s for obs in code.logical_observables.values() for s in obs.support()]
    )
    dec = decode_functional(code, PERFECT_CHANNEL)
    for _ in range(100):
        bloch = random_bloch(rng)
        v = encode_expectations(code, bloch, vars)
        out = [dec.evaluate(n, vars, v) for n in ("x", "y", "z")]
        assert np.max(np.abs(np.array(out) - bloch)) < 1e-10


def test_code_projector_trace():
    code = bitflip3()
    pi = code_projector(code)
    assert (pi.identity_coefficient() * 8).real == pytest.approx(2.0)


# ------------------------------------------------------------- run_cycles


def test_run_cycles_single_cycle_closed_form():
    g, dt = 1.0, 0.3
    code = bitflip3()
    traj = run_cycles(
        code, PERFECT_CHANNEL, independent_flip_model(3, g), dt, 1, (0, 0, 1)
    )
    want = 0.5 * (3 * np.exp(-2 * g * dt) - np.exp(-6 * g * dt))
    assert traj.column("zbar")[1] == pytest.approx(want, abs=1e-10)
    assert traj.column("zbar")[0] == pytest.approx(1.0)


def test_run_cycles_product_law_and_oracle(rng):
    g, dt, n = 0.8, 0.25, 6
    code = bitflip3()
    model = independent_flip_model(3, g)
    bloch = (0.0, 0.0, 0.9)
    traj = run_cycles(code, PERFECT_CHANNEL, model, dt, n, bloch)
    m1 = 0.5 * (3 * np.exp(-2 * g * dt) - np.exp(-6 * g * dt))
    want = 0.9 * m1 ** np.arange(n + 1)
    assert np.max(np.abs(traj.column("zbar") - want)) < 1e-10

    # explicit dense-matrix cycle oracle: evolve, Kraus-recover, decode
    lsup = _superop_matrix(model)
    step = linalg.expm(lsup * dt)
    rho = poly_to_matrix(encode_polynomial(code, bloch))
    zbar = poly_to_matrix(code.logical_observables["z"])
    for k in range(1, n + 1):
        rho = (step @ rho.ravel()).reshape(8, 8)
        rho = oracle_apply_recovery(code, PERFECT_CHANNEL, rho)
        got = np.trace(zbar @ rho).real
        assert got == pytest.approx(traj.column("zbar")[k], abs=1e-10)


def test_run_cycles_noisy_channel_against_oracle():
    g, dt, n = 0.5, 0.2, 4
    ch = RecoveryChannel(0.7, 0.6)
    code = bitflip3()
    model = independent_flip_model(3, g)
    bloch = (0.3, -0.2, 0.8)
    traj = run_cycles(code, ch, model, dt, n, bloch)
    lsup = _superop_matrix(model)
    step = linalg.expm(lsup * dt)
    rho = poly_to_matrix(encode_polynomial(code, bloch))
    for k in range(1, n + 1):
        rho = (step @ rho.ravel()).reshape(8, 8)
        rho = oracle_apply_recovery(code, ch, rho)
        for j, name in enumerate(("x", "y", "z")):
            got = np.trace(poly_to_matrix(code.logical_observables[name]) @ rho).real
            assert got == pytest.approx(traj.values[k, j], abs=1e-9)


def test_run_cycles_accepts_physical_state():
    code = bitflip3()
    model = independent_flip_model(3, 0.4)
    psi = code_state(0.8, 0.6)
    traj = run_cycles(code, PERFECT_CHANNEL, model, 0.2, 2, psi)
    assert traj.column("zbar")[0] == pytest.approx(0.28)


# ---------------------------------------------------------- concatenation


def test_concatenate_level_one_is_base():
    code = bitflip3()
    c1, dec = concatenate(code, 1)
    assert c1.n == 3
    assert not (dec.poly("z") - code.logical_observables["z"])


def test_concatenate_rejects_bad_levels():
    code = bitflip3()
    with pytest.raises(ValueError):
        concatenate(code, 0)
    with pytest.raises(ValueError):
        concatenate(code, 4)


def test_level2_decode_weight_structure():
    _, dec = concatenate(bitflip3(), 2)
    z = dec.poly("z")
    by_weight = {}
    for s, c in z.items():
        by_weight.setdefault(s.weight, []).append((s, c.real))
    assert sorted(by_weight) == [1, 3, 5, 7, 9]
    signs = {w: {np.sign(c) for _, c in terms} for w, terms in by_weight.items()}
    assert signs == {1: {1}, 3: {-1}, 5: {1}, 7: {-1}, 9: {1}}
    assert len(by_weight[1]) == 9
    assert all(abs(c - 0.25) < 1e-12 for _, c in by_weight[1])
    # triple correlators inside one block carry 1/4, across blocks 1/16
    blocks = ("ZZZIIIIII", "IIIZZZIII", "IIIIIIZZZ")
    in_block = [c for s, c in by_weight[3] if s.letters in blocks]
    cross = [c for s, c in by_weight[3] if s.letters not in blocks]
    assert len(in_block) == 3 and len(cross) == 27
    assert all(abs(c + 0.25) < 1e-12 for c in in_block)
    assert all(abs(c + 0.0625) < 1e-12 for c in cross)
    assert {len(by_weight[5]), len(by_weight[7])} == {27, 9}
    assert all(abs(abs(c) - 0.0625) < 1e-12 for w in (5, 7) for _, c in by_weight[w])
    assert len(by_weight[9]) == 1
    assert abs(by_weight[9][0][1] - 1.0 / 16.0) < 1e-12


def test_level2_decode_matches_dense_kraus_oracle(rng):
    code2, dec = concatenate(bitflip3(), 2)
    zrep = string_to_matrix(code2.logical_reps["z"])
    z = dec.poly("z")
    vars = VariableSet(z.support())
    w = vars.coefficient_vector(z)
    for _ in range(3):
        a = rng.normal() + 1j * rng.normal()
        b = rng.normal() + 1j * rng.normal()
        psi = code_state(a, b, n=9)
        sym = w @ expectations_from_state(psi, vars)
        rho_rec = oracle_apply_recovery(
            code2, PERFECT_CHANNEL, np.outer(psi, psi.conj())
        )
        oracle_val = np.trace(zrep @ rho_rec).real
        assert sym == pytest.approx(oracle_val, abs=1e-10)


def test_level2_sector_sizes_and_rates():
    g = 1.0
    code2, _ = concatenate(bitflip3(), 2)
    ld = logical_dynamics(code2, PERFECT_CHANNEL, independent_flip_model(9, g))
    z = ld.sectors["z"]
    assert z.dimension == 5
    assert np.allclose(np.sort(z.rates()), [-18 * g, -14 * g, -10 * g, -6 * g, -2 * g])
    # scaling bookkeeping across levels: {2, 5}
    base = logical_dynamics(
        bitflip3(), PERFECT_CHANNEL, independent_flip_model(3, g)
    )
    assert (base.sectors["z"].dimension, z.dimension) == (2, 5)


def test_level2_trajectory_is_five_exponentials():
    g = 1.0
    code2, _ = concatenate(bitflip3(), 2)
    ld = logical_dynamics(code2, PERFECT_CHANNEL, independent_flip_model(9, g))
    z = ld.sectors["z"]
    x0 = encode_expectations(code2, (0, 0, 1), z.variables)
    ts = np.linspace(0.0, 1.2, 25)
    traj = z.observable_trajectory(x0, ts)
    basis = np.column_stack([np.exp(-2 * g * k * ts) for k in (1, 3, 5, 7, 9)])
    coeffs, *_ = np.linalg.lstsq(basis, traj, rcond=None)
    assert np.max(np.abs(basis @ coeffs - traj)) < 1e-8
    assert np.count_nonzero(np.abs(coeffs) > 1e-9) == 5
