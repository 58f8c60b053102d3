"""Input-output formulation of quantum error correction.

A code is a stack of recovery layers (syndrome observables plus the
conditional Pauli corrections); the expected effect of one noisy
measure-and-correct pass is a linear map on Pauli expectations, obtained
symbolically as the channel adjoint.  Concatenation lifts the base layer
to logical operators level by level.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import linalg
from .eom import VariableSet, build_generator, closure
from .exceptions import (
    AlgebraError,
    ClosureOverflowError,
    DimensionMismatchError,
    UnsupportedAffineError,
)
from .pauli import LindbladModel, PauliPolynomial, PauliString, multiply
from .sim import Trajectory, expectations_from_state, string_to_matrix

__all__ = [
    "RecoveryLayer",
    "StabilizerCode",
    "RecoveryChannel",
    "PERFECT_CHANNEL",
    "DecodingFunctional",
    "RecoveryMap",
    "SectorDynamics",
    "LogicalDynamics",
    "bitflip3",
    "decode_functional",
    "recovery_adjoint",
    "recovery_superoperator",
    "logical_dynamics",
    "concatenate",
    "code_projector",
    "encode_polynomial",
    "encode_expectations",
    "run_cycles",
]

MAX_LEVELS = 3
SECTOR_RANK_TOL = 1e-10


@dataclass(frozen=True)
class RecoveryChannel:
    """Measurement efficiency and recovery fidelity, each in [0, 1]."""

    eta_meas: float = 1.0
    eta_rec: float = 1.0

    def __post_init__(self):
        for name in ("eta_meas", "eta_rec"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} = {v} outside [0, 1]")


PERFECT_CHANNEL = RecoveryChannel(1.0, 1.0)


@dataclass(frozen=True)
class RecoveryLayer:
    """One syndrome-measurement pass: commuting observables and the Pauli
    correction applied for each outcome pattern (entries of +-1)."""

    syndromes: tuple[PauliString, ...]
    recoveries: Mapping[tuple[int, ...], PauliString]

    def __post_init__(self):
        syn = self.syndromes
        for a, b in itertools.combinations(syn, 2):
            if not a.commutes_with(b):
                raise AlgebraError(
                    f"syndrome observables {a.letters} and {b.letters} do "
                    "not commute"
                )
        patterns = set(itertools.product((1, -1), repeat=len(syn)))
        if set(self.recoveries) != patterns:
            raise AlgebraError("recovery map must cover every outcome pattern")
        for pattern, r in self.recoveries.items():
            for s_j, obs in zip(pattern, syn):
                anti = not r.commutes_with(obs)
                if anti != (s_j == -1):
                    raise AlgebraError(
                        f"recovery {r.letters} does not return the "
                        f"{pattern} outcome subspace to the code space"
                    )
        object.__setattr__(self, "recoveries", dict(self.recoveries))


@dataclass(frozen=True)
class StabilizerCode:
    """Physical register size, recovery layers (applied in listed order),
    logical observables, and the single-string logical representatives
    used to lift the code under concatenation."""

    n: int
    layers: tuple[RecoveryLayer, ...]
    logical_observables: Mapping[str, PauliPolynomial]
    logical_reps: Mapping[str, PauliString]

    def __post_init__(self):
        object.__setattr__(self, "logical_observables", dict(self.logical_observables))
        object.__setattr__(self, "logical_reps", dict(self.logical_reps))

    @property
    def syndrome_observables(self) -> tuple[PauliString, ...]:
        return tuple(s for layer in self.layers for s in layer.syndromes)

    @property
    def recovery_ops(self) -> Mapping[tuple[int, ...], PauliString]:
        """Outcome-to-correction map (single-layer codes only)."""
        if len(self.layers) != 1:
            raise AlgebraError(
                "flat recovery map is only defined for single-layer codes"
            )
        return dict(self.layers[0].recoveries)


class DecodingFunctional:
    """Logical observable name -> real polynomial over physical strings."""

    def __init__(self, polys: Mapping[str, PauliPolynomial]):
        self._polys = {name: p.real_coefficients() for name, p in polys.items()}

    def names(self) -> tuple[str, ...]:
        return tuple(self._polys)

    def poly(self, name: str) -> PauliPolynomial:
        return self._polys[name]

    def coefficient_vector(self, name: str, vars: VariableSet) -> np.ndarray:
        return vars.coefficient_vector(self._polys[name])

    def evaluate(self, name: str, vars: VariableSet, expectations) -> float:
        v = np.asarray(expectations, dtype=float)
        return float(self.coefficient_vector(name, vars) @ v)

    def items(self):
        return self._polys.items()


def _conjugate(r: PauliString, poly: PauliPolynomial) -> PauliPolynomial:
    """R poly R for a single self-inverse string: each term picks up the
    commutation sign."""
    out = {}
    for s, c in poly.items():
        out[s] = c if r.commutes_with(s) else -c
    return PauliPolynomial(poly.n_sites, out)


def _layer_projector(layer: RecoveryLayer, pattern, eta: float) -> PauliPolynomial:
    n = layer.syndromes[0].n_sites
    p = PauliPolynomial.identity(n)
    for s_j, obs in zip(pattern, layer.syndromes):
        factor = PauliPolynomial(
            n, {PauliString.identity(n): 0.5, obs: 0.5 * s_j * eta}
        )
        p = p * factor
    return p


def _layer_adjoint(
    layer: RecoveryLayer, ch: RecoveryChannel, poly: PauliPolynomial
) -> PauliPolynomial:
    """Adjoint of one measure-and-correct pass, normalized so the pass is
    trace preserving (the raw deformed-projector map scales the trace by
    a state-independent constant)."""
    n = poly.n_sites
    out = PauliPolynomial.zero(n)
    norm = PauliPolynomial.zero(n)
    for pattern, r in layer.recoveries.items():
        pt = _layer_projector(layer, pattern, ch.eta_meas)
        sandwich = pt * _conjugate(r, poly) * pt
        if ch.eta_rec < 1.0:
            sandwich = ch.eta_rec * sandwich + (1.0 - ch.eta_rec) * (pt * poly * pt)
        out = out + sandwich
        norm = norm + pt * pt
    c = norm.identity_coefficient().real
    residual = norm - PauliPolynomial.identity(n, c)
    if residual and residual.max_abs() > 1e-12 * max(abs(c), 1.0):
        raise AlgebraError("layer normalization is not a multiple of identity")
    return (1.0 / c) * out


def recovery_adjoint(
    code: StabilizerCode, ch: RecoveryChannel, poly: PauliPolynomial
) -> PauliPolynomial:
    """Adjoint of the full recovery pass: layers act on the state in
    listed order, so their adjoints compose in reverse."""
    out = poly
    for layer in reversed(code.layers):
        out = _layer_adjoint(layer, ch, out)
    return out.real_coefficients()


def bitflip3() -> StabilizerCode:
    """Three-qubit code correcting single bit flips.

    Syndromes Z1Z2 and Z1Z3; outcome (-1, -1) flags qubit 1, (-1, +1)
    qubit 2, (+1, -1) qubit 3.  The logical observables are derived from
    single representatives through the perfect-recovery adjoint, which
    fixes every sign convention.
    """
    syn = (PauliString.from_letters("ZZI"), PauliString.from_letters("ZIZ"))
    rec = {
        (1, 1): PauliString.from_letters("III"),
        (-1, -1): PauliString.from_letters("XII"),
        (-1, 1): PauliString.from_letters("IXI"),
        (1, -1): PauliString.from_letters("IIX"),
    }
    layer = RecoveryLayer(syn, rec)
    x_rep = PauliString.from_letters("XXX")
    z_rep = PauliString.from_letters("ZZZ")
    return _finish_code(3, (layer,), x_rep, z_rep)


def _y_rep_poly(x_rep: PauliString, z_rep: PauliString) -> PauliPolynomial:
    prod = multiply(x_rep, z_rep)
    coeff = 1j * prod.phase
    if abs(coeff.imag) > 1e-12:
        raise AlgebraError("logical Y representative is not hermitian")
    return PauliPolynomial.from_pauli(prod.string, coeff.real)


def _finish_code(
    n: int,
    layers: tuple[RecoveryLayer, ...],
    x_rep: PauliString,
    z_rep: PauliString,
) -> StabilizerCode:
    stub = StabilizerCode(n, layers, {}, {"x": x_rep, "z": z_rep})
    obs = {
        "x": recovery_adjoint(stub, PERFECT_CHANNEL, PauliPolynomial.from_pauli(x_rep)),
        "y": recovery_adjoint(stub, PERFECT_CHANNEL, _y_rep_poly(x_rep, z_rep)),
        "z": recovery_adjoint(stub, PERFECT_CHANNEL, PauliPolynomial.from_pauli(z_rep)),
    }
    return StabilizerCode(n, layers, obs, {"x": x_rep, "z": z_rep})


def decode_functional(code: StabilizerCode, ch: RecoveryChannel) -> DecodingFunctional:
    """Post-recovery logical expectations as functionals of pre-recovery
    physical expectations."""
    return DecodingFunctional(
        {
            name: recovery_adjoint(code, ch, obs)
            for name, obs in code.logical_observables.items()
        }
    )


@dataclass(frozen=True)
class RecoveryMap:
    """<vars>_after = matrix @ <vars>_before for one recovery pass."""

    variables: VariableSet
    matrix: np.ndarray


def recovery_superoperator(
    code: StabilizerCode,
    ch: RecoveryChannel,
    vars: VariableSet,
    max_dim: int = 4096,
) -> RecoveryMap:
    """Matrix of the recovery adjoint on a variable set, auto-extending
    the set until it is closed under the map."""
    work: list[PauliString] = list(vars)
    seen = set(work)
    adjoints: dict[PauliString, PauliPolynomial] = {}
    i = 0
    while i < len(work):
        s = work[i]
        adj = recovery_adjoint(code, ch, PauliPolynomial.from_pauli(s))
        scale = max(adj.max_abs(), 1.0)
        idc = adj.identity_coefficient()
        if abs(idc) > 1e-12 * scale:
            raise UnsupportedAffineError(
                f"recovery of <{s.letters}> produces a constant offset "
                f"{idc.real:.3e}; affine recovery maps are unsupported"
            )
        adjoints[s] = adj
        for t, _ in adj.items():
            if not t.is_identity and t not in seen:
                seen.add(t)
                work.append(t)
                if len(work) > max_dim:
                    raise ClosureOverflowError(
                        f"recovery closure exceeded max_dim={max_dim}"
                    )
        i += 1
    ext = VariableSet(work)
    mat = np.zeros((len(ext), len(ext)))
    for i, s in enumerate(ext):
        mat[i, :] = ext.coefficient_vector(adjoints[s])
    return RecoveryMap(ext, mat)


@dataclass(frozen=True)
class SectorDynamics:
    """Minimal invariant description of one decoded observable.

    ``basis`` rows are orthonormal functionals over ``variables``; the
    first rows are the decode functional split by string weight (the
    grouping used throughout: weight sums first, discovered combinations
    after).  u = basis @ x obeys u_dot = generator @ u and the decoded
    value is output @ u.
    """

    variables: VariableSet
    basis: np.ndarray
    generator: np.ndarray
    output: np.ndarray

    @property
    def dimension(self) -> int:
        return self.basis.shape[0]

    @property
    def aux_count(self) -> int:
        return self.dimension - 1

    def rates(self) -> np.ndarray:
        return np.sort(linalg.eigenvalues(self.generator).real)

    def observable_trajectory(self, x0, times) -> np.ndarray:
        """Decoded value at each time for physical initial expectations x0."""
        u0 = self.basis @ np.asarray(x0, dtype=float)
        out = np.empty(len(times))
        for i, t in enumerate(times):
            out[i] = float(self.output @ (linalg.expm(self.generator * t) @ u0))
        return out


@dataclass(frozen=True)
class LogicalDynamics:
    decode: DecodingFunctional
    closures: Mapping[str, VariableSet]
    generators: Mapping[str, np.ndarray]
    sectors: Mapping[str, SectorDynamics]


def _weight_split(w: np.ndarray, vars: VariableSet) -> list[np.ndarray]:
    """Split a functional by Pauli-string weight, largest component first
    in the order weights appear."""
    weights = sorted({s.weight for s in vars})
    parts = []
    scale = np.linalg.norm(w)
    for wt in weights:
        mask = np.array([s.weight == wt for s in vars])
        part = np.where(mask, w, 0.0)
        if np.linalg.norm(part) > SECTOR_RANK_TOL * max(scale, 1.0):
            parts.append(part)
    return parts


def _invariant_subspace(a: np.ndarray, seeds: list[np.ndarray]) -> np.ndarray:
    """Orthonormal basis of the smallest A^T-invariant subspace containing
    the seed functionals."""
    scale = max(np.linalg.norm(a), 1.0)
    basis: list[np.ndarray] = []

    def add(vec: np.ndarray, tol: float) -> None:
        v = vec.copy()
        for b in basis:
            v -= (b @ v) * b
        nrm = np.linalg.norm(v)
        if nrm > tol:
            basis.append(v / nrm)

    for s in seeds:
        add(s, SECTOR_RANK_TOL * max(np.linalg.norm(s), 1.0))
    i = 0
    while i < len(basis):
        add(a.T @ basis[i], SECTOR_RANK_TOL * scale)
        i += 1
    return np.array(basis)


def logical_dynamics(
    code: StabilizerCode,
    ch: RecoveryChannel,
    m: LindbladModel,
    max_dim: int = 4096,
) -> LogicalDynamics:
    """Closure of each decoded observable under the noise generator, plus
    the induced minimal dynamics of the decoded value itself.

    The observable's functional is seeded weight group by weight group
    (the sum of singles separately from the triple correlator, and so on);
    auxiliary variables are the extra combinations the generator drags in.
    """
    if m.n_sites != code.n:
        raise DimensionMismatchError(
            f"model acts on {m.n_sites} qubits, code on {code.n}"
        )
    decode = decode_functional(code, ch)
    closures: dict[str, VariableSet] = {}
    generators: dict[str, np.ndarray] = {}
    sectors: dict[str, SectorDynamics] = {}
    for name, poly in decode.items():
        if abs(poly.identity_coefficient()) > 1e-12 * max(poly.max_abs(), 1.0):
            raise UnsupportedAffineError(
                f"decode functional {name} has a constant component"
            )
        vars = closure(poly.support(), m, max_dim)
        gen = build_generator(vars, m)
        w = vars.coefficient_vector(poly)
        basis = _invariant_subspace(gen.a, _weight_split(w, vars))
        closures[name] = vars
        generators[name] = gen.a
        sectors[name] = SectorDynamics(
            variables=vars,
            basis=basis,
            generator=basis @ gen.a.T @ basis.T,
            output=basis @ w,
        )
    return LogicalDynamics(decode, closures, generators, sectors)


def _lift_string(
    s: PauliString, block_reps: Sequence[Mapping[str, PauliString]], n_new: int
) -> PauliString:
    """Replace each letter of a top-level string by the corresponding
    logical representative on that block."""
    acc = PauliString.identity(n_new)
    phase = 1.0 + 0j
    for site in range(s.n_sites):
        letter = s.letter(site)
        if letter == "I":
            continue
        rep = block_reps[site][letter.lower()]
        prod = multiply(acc, rep)
        acc = prod.string
        phase *= prod.phase
    if abs(phase - 1.0) > 1e-12:
        raise AlgebraError(f"lifting {s.letters} produced a phase {phase}")
    return acc


def concatenate(
    code: StabilizerCode, levels: int
) -> tuple[StabilizerCode, DecodingFunctional]:
    """Recursive triple encoding: each level reuses the base layer with
    physical letters replaced by the previous level's logical operators;
    recovery passes run bottom level first.  The decode functional is the
    perfect-channel composition through all layers."""
    if levels < 1:
        raise ValueError("levels must be at least 1")
    if levels > MAX_LEVELS:
        raise ValueError(f"levels > {MAX_LEVELS} not supported (memory guard)")
    if len(code.layers) != 1:
        raise AlgebraError("concatenation starts from a single-layer code")
    current = code
    for _ in range(levels - 1):
        base_layer = code.layers[0]
        blocks = base_layer.syndromes[0].n_sites
        n_old = current.n
        n_new = blocks * n_old
        new_layers: list[RecoveryLayer] = []
        block_reps: list[dict[str, PauliString]] = []
        for b in range(blocks):
            shift = b * n_old
            for layer in current.layers:
                new_layers.append(
                    RecoveryLayer(
                        tuple(_shift_string(s, shift, n_new) for s in layer.syndromes),
                        {
                            pat: _shift_string(r, shift, n_new)
                            for pat, r in layer.recoveries.items()
                        },
                    )
                )
            block_reps.append(
                {
                    name: _shift_string(rep, shift, n_new)
                    for name, rep in current.logical_reps.items()
                }
            )
        top = RecoveryLayer(
            tuple(_lift_string(s, block_reps, n_new) for s in base_layer.syndromes),
            {
                pat: _lift_string(r, block_reps, n_new)
                for pat, r in base_layer.recoveries.items()
            },
        )
        new_layers.append(top)
        x_rep = _lift_string(
            PauliString.from_letters("X" * blocks), block_reps, n_new
        )
        z_rep = _lift_string(
            PauliString.from_letters("Z" * blocks), block_reps, n_new
        )
        current = _finish_code(n_new, tuple(new_layers), x_rep, z_rep)
    return current, decode_functional(current, PERFECT_CHANNEL)


def _shift_string(s: PauliString, shift: int, n_new: int) -> PauliString:
    return PauliString(n_new, s.x_bits << shift, s.z_bits << shift)


def code_projector(code: StabilizerCode) -> PauliPolynomial:
    """Projector onto the code space: product of (I + S)/2 over all
    syndrome observables."""
    p = PauliPolynomial.identity(code.n)
    for s in code.syndrome_observables:
        p = p * PauliPolynomial(
            code.n, {PauliString.identity(code.n): 0.5, s: 0.5}
        )
    return p


def encode_polynomial(code: StabilizerCode, bloch) -> PauliPolynomial:
    """Density operator (as a Pauli polynomial) of the encoded state with
    the given logical Bloch vector."""
    x, y, z = (float(v) for v in bloch)
    if x * x + y * y + z * z > 1.0 + 1e-9:
        raise ValueError("logical Bloch vector has norm > 1")
    pi = code_projector(code)
    rho = pi
    for name, coeff in (("x", x), ("y", y), ("z", z)):
        if coeff != 0.0:
            rho = rho + coeff * (code.logical_observables[name] * pi)
    trace_pi = (pi.identity_coefficient() * (1 << code.n)).real
    rho = (1.0 / trace_pi) * rho
    if not rho.is_hermitian():
        raise AlgebraError("encoded state polynomial is not hermitian")
    return rho


def encode_expectations(code: StabilizerCode, bloch, vars: VariableSet) -> np.ndarray:
    """<P> on the encoded state for every variable, via Tr(P rho) =
    2^n * identity coefficient of P*rho."""
    rho = encode_polynomial(code, bloch)
    dim = 1 << code.n
    out = np.empty(len(vars))
    for i, s in enumerate(vars):
        val = (PauliPolynomial.from_pauli(s) * rho).identity_coefficient() * dim
        if abs(val.imag) > 1e-10 * max(abs(val), 1.0):
            raise AlgebraError("encoded expectation is not real")
        out[i] = val.real
    return out


def oracle_apply_recovery(
    code: StabilizerCode, ch: RecoveryChannel, rho: np.ndarray
) -> np.ndarray:
    """Brute-force recovery pass on a dense density matrix, layer by
    layer, with the same trace normalization as the symbolic adjoint.
    This is the oracle side of the decode cross-checks and never touches
    the Pauli-algebra route."""
    dim = 1 << code.n
    if rho.shape != (dim, dim):
        raise DimensionMismatchError("density matrix size does not match code")
    out = np.asarray(rho, dtype=complex)
    eye = np.eye(dim, dtype=complex)
    for layer in code.layers:
        acc = np.zeros_like(out)
        for pattern, r in layer.recoveries.items():
            pt = eye
            for s_j, obs in zip(pattern, layer.syndromes):
                pt = pt @ (eye + s_j * ch.eta_meas * string_to_matrix(obs)) / 2.0
            branch = pt @ out @ pt
            rm = string_to_matrix(r)
            acc += ch.eta_rec * (rm @ branch @ rm) + (1.0 - ch.eta_rec) * branch
        scale = ((1.0 + ch.eta_meas**2) / 2.0) ** len(layer.syndromes)
        out = acc / scale
    return out


def run_cycles(
    code: StabilizerCode,
    ch: RecoveryChannel,
    m: LindbladModel,
    dt: float,
    n_cycles: int,
    initial,
    max_dim: int = 4096,
) -> Trajectory:
    """Repeated decohere-then-recover passes on the physical expectation
    vector; decoded Bloch components are recorded after each recovery
    (cycle 0 is the initial encoded state).

    ``initial`` is a logical Bloch 3-vector or a full physical state
    (amplitudes or density matrix).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if n_cycles < 0:
        raise ValueError("n_cycles must be non-negative")
    seeds: list[PauliString] = []
    seen = set()
    for _, obs in code.logical_observables.items():
        for s in obs.support():
            if not s.is_identity and s not in seen:
                seen.add(s)
                seeds.append(s)
    vars = closure(seeds, m, max_dim)
    while True:
        rmap = recovery_superoperator(code, ch, vars, max_dim)
        if len(rmap.variables) == len(vars):
            break
        vars = closure(rmap.variables, m, max_dim)
    gen = build_generator(vars, m)
    step = linalg.expm(gen.a * dt)
    cycle_map = rmap.matrix @ step

    arr = np.asarray(initial)
    if arr.ndim == 1 and arr.size == 3:
        # a logical Bloch vector (state vectors have power-of-two length)
        v = encode_expectations(code, np.real(arr).astype(float), vars)
    else:
        v = expectations_from_state(arr, vars)

    w = {
        name: vars.coefficient_vector(obs)
        for name, obs in code.logical_observables.items()
    }
    order = ("x", "y", "z")
    rows = [[float(w[name] @ v) for name in order]]
    for _ in range(n_cycles):
        v = cycle_map @ v
        rows.append([float(w[name] @ v) for name in order])
    times = np.arange(n_cycles + 1, dtype=float)
    return Trajectory(times, ("xbar", "ybar", "zbar"), np.array(rows))
