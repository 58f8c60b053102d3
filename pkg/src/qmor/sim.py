"""Fixed-step integration of the expectation ODE systems, and the
brute-force density-matrix oracle that anchors every cross-check.

The oracle never materializes Pauli strings as 2^n x 2^n matrices during
integration: strings act on state indices through XOR permutations and
phase vectors.  Up to five qubits the full superoperator is assembled
once (it is tiny) so trajectories reduce to matrix-vector stepping.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import ceil

import numpy as np

from .eom import InterconnectedModel, VariableSet
from .exceptions import (
    DimensionMismatchError,
    IntegrationError,
    InvalidStateError,
    StepSizeError,
)
from .pauli import LindbladModel, PauliPolynomial, PauliString

__all__ = [
    "Trajectory",
    "DensityMatrix",
    "integrate_linear",
    "simulate_interconnected",
    "oracle_master_equation",
    "expectations_from_state",
    "density_from_amplitudes",
    "density_from_bloch_product",
    "poly_to_matrix",
    "string_to_matrix",
    "generator_matrix_oracle",
]

STEP_NORM_CAP = 0.1      # ||A|| * h must stay at or below this
SUBSTEPS_PER_SAMPLE = 20
MAX_SUBSTEPS = 50_000_000

ORACLE_DENSE_MAX_SITES = 5
ORACLE_MAX_SITES = 10


@dataclass(frozen=True)
class Trajectory:
    """Sampled trajectory: values[i, j] is variable j at times[i]."""

    times: np.ndarray
    labels: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if v.shape != (t.size, len(self.labels)):
            raise DimensionMismatchError("trajectory shape mismatch")
        if not np.all(np.isfinite(v)):
            raise IntegrationError("trajectory contains non-finite values")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    def column(self, label: str) -> np.ndarray:
        return self.values[:, self.labels.index(label)]

    def check_expectation_bounds(self, tol: float = 1e-6) -> None:
        """Exact Pauli-expectation trajectories must stay within [-1, 1]."""
        worst = float(np.max(np.abs(self.values))) if self.values.size else 0.0
        if worst > 1.0 + tol:
            raise IntegrationError(
                f"expectation magnitude {worst:.6f} exceeds 1 + {tol:.0e}"
            )


def _check_times(times) -> np.ndarray:
    t = np.asarray(times, dtype=float).ravel()
    if t.size < 1:
        raise ValueError("need at least one sample time")
    if t.size > 1 and np.any(np.diff(t) <= 0):
        raise ValueError("sample times must be strictly ascending")
    return t


def _rk4_step_matrix(a: np.ndarray, h: float) -> np.ndarray:
    """One classic RK4 step of x_dot = a x equals multiplication by the
    degree-4 Taylor polynomial of expm(a h)."""
    n = a.shape[0]
    ah = a * h
    m = np.eye(n, dtype=a.dtype) + ah
    term = ah
    for k in (2, 3, 4):
        term = term @ ah / k
        m += term
    return m


def _operator_norm_bound(a: np.ndarray) -> float:
    """sqrt(||A||_1 ||A||_inf), a cheap upper bound on the spectral norm."""
    if not a.size:
        return 0.0
    absa = np.abs(a)
    return float(np.sqrt(absa.sum(axis=0).max() * absa.sum(axis=1).max()))


def _integrate_fixed(a: np.ndarray, x0: np.ndarray, times: np.ndarray):
    """Yield the state at each sample time using dense RK4 substeps."""
    norm = _operator_norm_bound(a)
    dt_min = float(np.min(np.diff(times))) if times.size > 1 else 0.0
    h_target = np.inf
    if dt_min > 0:
        h_target = dt_min / SUBSTEPS_PER_SAMPLE
    if norm > 0:
        h_target = min(h_target, STEP_NORM_CAP / norm)
    x = np.array(x0, dtype=a.dtype, copy=True)
    yield x
    cache: dict[float, np.ndarray] = {}
    tspan = float(times[-1] - times[0]) if times.size > 1 else 0.0
    for k in range(times.size - 1):
        span = float(times[k + 1] - times[k])
        nsub = max(1, ceil(span / h_target)) if np.isfinite(h_target) else 1
        if nsub > MAX_SUBSTEPS:
            raise StepSizeError(
                f"interval [{times[k]}, {times[k+1]}] needs {nsub} substeps"
            )
        h = span / nsub
        if tspan > 0 and h < 1e-15 * tspan:
            raise StepSizeError(f"step size underflow: h = {h:.3e}")
        m = cache.get(h)
        if m is None:
            m = _rk4_step_matrix(a, h)
            cache[h] = m
        for _ in range(nsub):
            x = m @ x
        yield x


def integrate_linear(a, x0, times, labels=None) -> Trajectory:
    """Classic fixed-step RK4 for x_dot = a x, sampled at ``times``.

    The substep is min(sample spacing)/20, additionally capped so that
    ||a|| h <= 0.1.  x0 is the state at times[0].
    """
    a = np.asarray(a, dtype=float)
    x0 = np.asarray(x0, dtype=float).ravel()
    t = _check_times(times)
    if a.shape != (x0.size, x0.size):
        raise DimensionMismatchError("matrix/state size mismatch")
    if labels is None:
        labels = tuple(f"x{i}" for i in range(x0.size))
    rows = list(_integrate_fixed(a, x0, t))
    return Trajectory(t, tuple(labels), np.array(rows))


def simulate_interconnected(
    m: InterconnectedModel,
    x1_0,
    x2_0,
    times,
    state_map=None,
) -> Trajectory:
    """Integrate the reassembled closed loop from (x1_0, map @ x2_0) and
    return the first block's trajectory.

    ``state_map`` defaults to the model's own x2_map when present; pass an
    explicit matrix (or None for identity) to override.
    """
    x1_0 = np.asarray(x1_0, dtype=float).ravel()
    x2_0 = np.asarray(x2_0, dtype=float).ravel()
    if state_map is None:
        state_map = m.x2_map
    if state_map is not None:
        state_map = np.asarray(state_map, dtype=float)
        if state_map.shape[1] != x2_0.size:
            raise DimensionMismatchError("state map does not accept x2_0")
        x2_init = state_map @ x2_0
    else:
        x2_init = x2_0
    if x1_0.size != m.sys1.order or x2_init.size != m.sys2.order:
        raise DimensionMismatchError("initial condition sizes do not match model")
    full = m.assemble()
    x0 = np.concatenate([x1_0, x2_init])
    traj = integrate_linear(full, x0, times, labels=m.labels)
    n1 = m.sys1.order
    return Trajectory(traj.times, m.sys1.labels, traj.values[:, :n1])


# ---------------------------------------------------------------------------
# Pauli actions on computational-basis arrays
# ---------------------------------------------------------------------------


@lru_cache(maxsize=32)
def _popcount_table(n_sites: int) -> np.ndarray:
    size = 1 << n_sites
    pop = np.zeros(size, dtype=np.int64)
    span = 1
    while span < size:
        pop[span : 2 * span] = pop[:span] + 1
        span *= 2
    return pop


def _index_masks(p: PauliString) -> tuple[int, int]:
    """Bit masks over basis-state indices (site 0 is the most significant
    bit, matching the |b0 b1 ...> reading order)."""
    n = p.n_sites
    xm = zm = 0
    for s in range(n):
        bit = 1 << (n - 1 - s)
        if (p.x_bits >> s) & 1:
            xm |= bit
        if (p.z_bits >> s) & 1:
            zm |= bit
    return xm, zm


@lru_cache(maxsize=4096)
def _string_action(p: PauliString) -> tuple[np.ndarray, np.ndarray]:
    """(perm, phase) with P|b> = phase[b] |b XOR xmask>, i.e.
    perm[i] = i XOR xmask and (P v)[i] = phase[perm[i]] v[perm[i]]."""
    n = p.n_sites
    xm, zm = _index_masks(p)
    idx = np.arange(1 << n)
    perm = idx ^ xm
    n_y = (p.x_bits & p.z_bits).bit_count() % 4
    signs = 1.0 - 2.0 * (_popcount_table(n)[idx & zm] & 1)
    if n_y == 0:
        phase = signs
    elif n_y == 2:
        phase = -signs
    else:
        phase = (1j if n_y == 1 else -1j) * signs
    return perm, phase


def apply_string_left(p: PauliString, arr: np.ndarray) -> np.ndarray:
    """P @ arr for a state vector (1D) or matrix (2D)."""
    perm, phase = _string_action(p)
    if arr.ndim == 1:
        return phase[perm] * arr[perm]
    return phase[perm][:, None] * arr[perm, :]


def apply_string_right(p: PauliString, arr: np.ndarray) -> np.ndarray:
    """arr @ P for a matrix: (arr P)[i, j] = phase[j] arr[i, j XOR x]."""
    perm, phase = _string_action(p)
    return arr[:, perm] * phase[None, :]


def apply_poly_left(poly: PauliPolynomial, arr: np.ndarray) -> np.ndarray:
    out = None
    for s, c in poly.items():
        term = c * apply_string_left(s, arr)
        out = term if out is None else out + term
    if out is None:
        return np.zeros_like(arr)
    return out


def apply_poly_right(poly: PauliPolynomial, arr: np.ndarray) -> np.ndarray:
    out = None
    for s, c in poly.items():
        term = c * apply_string_right(s, arr)
        out = term if out is None else out + term
    if out is None:
        return np.zeros_like(arr)
    return out


def string_trace_product(p: PauliString, rho: np.ndarray) -> complex:
    """Tr(P rho) without forming P."""
    perm, phase = _string_action(p)
    idx = np.arange(rho.shape[0])
    return complex(np.sum(phase * rho[idx, perm]))


def string_to_matrix(p: PauliString) -> np.ndarray:
    perm, phase = _string_action(p)
    dim = perm.size
    m = np.zeros((dim, dim), dtype=complex)
    m[perm, np.arange(dim)] = phase
    return m


def poly_to_matrix(poly: PauliPolynomial) -> np.ndarray:
    dim = 1 << poly.n_sites
    m = np.zeros((dim, dim), dtype=complex)
    for s, c in poly.items():
        perm, phase = _string_action(s)
        m[perm, np.arange(dim)] += c * phase
    return m


# ---------------------------------------------------------------------------
# states
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DensityMatrix:
    """Validated 2^n x 2^n density operator."""

    n_sites: int
    entries: np.ndarray

    def __post_init__(self):
        rho = np.asarray(self.entries, dtype=complex)
        dim = 1 << self.n_sites
        if rho.shape != (dim, dim):
            raise DimensionMismatchError(
                f"density matrix must be {dim} x {dim} for {self.n_sites} qubits"
            )
        if np.linalg.norm(rho - rho.conj().T) > 1e-10 * max(np.linalg.norm(rho), 1e-300):
            raise InvalidStateError("density matrix is not hermitian")
        if abs(np.trace(rho).real - 1.0) > 1e-10 or abs(np.trace(rho).imag) > 1e-10:
            raise InvalidStateError("density matrix trace must be 1")
        if float(np.min(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)))) < -1e-8:
            raise InvalidStateError("density matrix has a significantly negative eigenvalue")
        object.__setattr__(self, "entries", rho)


def density_from_amplitudes(amplitudes) -> DensityMatrix:
    psi = np.asarray(amplitudes, dtype=complex).ravel()
    n = int(np.log2(psi.size))
    if 1 << n != psi.size:
        raise InvalidStateError("amplitude vector length must be a power of two")
    norm = np.linalg.norm(psi)
    if abs(norm - 1.0) > 1e-9:
        raise InvalidStateError(f"state vector norm {norm:.12f} is not 1")
    psi = psi / norm
    return DensityMatrix(n, np.outer(psi, psi.conj()))


def density_from_bloch_product(bloch) -> DensityMatrix:
    rho = np.array([[1.0]], dtype=complex)
    mats = {
        "X": np.array([[0, 1], [1, 0]], dtype=complex),
        "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
        "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    }
    for x, y, z in bloch:
        if x * x + y * y + z * z > 1.0 + 1e-9:
            raise InvalidStateError("Bloch vector has norm > 1")
        site = 0.5 * (
            np.eye(2, dtype=complex) + x * mats["X"] + y * mats["Y"] + z * mats["Z"]
        )
        rho = np.kron(rho, site)
    return DensityMatrix(len(bloch), rho)


def expectations_from_state(state, vars: VariableSet) -> np.ndarray:
    """<P> for each variable, from a normalized state vector or a density
    matrix (array or DensityMatrix)."""
    if isinstance(state, DensityMatrix):
        rho = state.entries
    else:
        arr = np.asarray(state, dtype=complex)
        if arr.ndim == 1:
            rho = density_from_amplitudes(arr).entries
        else:
            rho = DensityMatrix(int(np.log2(arr.shape[0])), arr).entries
    if rho.shape[0] != 1 << vars.n_sites:
        raise DimensionMismatchError("state dimension does not match variables")
    out = np.empty(len(vars))
    for i, s in enumerate(vars):
        val = string_trace_product(s, rho)
        if abs(val.imag) > 1e-10:
            raise InvalidStateError(
                f"<{s.letters}> has imaginary part {val.imag:.3e}"
            )
        out[i] = val.real
    return out


# ---------------------------------------------------------------------------
# master-equation oracle
# ---------------------------------------------------------------------------


def _superop_terms(m: LindbladModel):
    """Lindblad action on row-major vec(rho) as gather operations.

    Returns a list of (perm, phase, coeff) triples; the derivative is
    sum coeff * phase * vec[perm].  Scalar multiples of the identity
    gather are merged into one entry with perm=None.
    """
    n = m.n_sites
    dim = 1 << n
    full = np.arange(dim * dim)
    rows = full // dim
    cols = full % dim

    terms: list = []
    ident_coeff = 0.0 + 0.0j

    def add_left(s: PauliString, coeff: complex):
        nonlocal ident_coeff
        if s.is_identity:
            ident_coeff += coeff
            return
        perm_s, phase_s = _string_action(s)
        perm = perm_s[rows] * dim + cols
        terms.append((perm, phase_s[perm_s[rows]], coeff))

    def add_right(s: PauliString, coeff: complex):
        nonlocal ident_coeff
        if s.is_identity:
            ident_coeff += coeff
            return
        perm_s, phase_s = _string_action(s)
        perm = rows * dim + perm_s[cols]
        terms.append((perm, phase_s[cols], coeff))

    def add_both(sl: PauliString, sr: PauliString, coeff: complex):
        nonlocal ident_coeff
        if sl.is_identity and sr.is_identity:
            ident_coeff += coeff
            return
        if sl.is_identity:
            add_right(sr, coeff)
            return
        if sr.is_identity:
            add_left(sl, coeff)
            return
        perm_l, phase_l = _string_action(sl)
        perm_r, phase_r = _string_action(sr)
        perm = perm_l[rows] * dim + perm_r[cols]
        terms.append((perm, phase_l[perm_l[rows]] * phase_r[cols], coeff))

    # -i [H, rho]
    for s, c in m.hamiltonian.items():
        add_left(s, -1j * c)
        add_right(s, 1j * c)
    # dissipators: c rho c^dag - (c^dag c rho + rho c^dag c)/2
    for rate, c_op, cd, cdc in m._prepared:
        for s1, a1 in c_op.items():
            for s2, a2 in cd.items():
                # rho c^dag needs the matrix of c^dag on the right: rows of
                # cd are (string, conj coeff) pairs acting directly.
                add_both(s1, s2, rate * a1 * a2)
        for s, a in cdc.items():
            add_left(s, -0.5 * rate * a)
            add_right(s, -0.5 * rate * a)

    if ident_coeff != 0:
        terms.append((None, None, ident_coeff))
    return terms


def superoperator_matrix(m: LindbladModel) -> np.ndarray:
    """Dense matrix of the Lindblad generator acting on row-major
    vec(rho); rho_dot = matrix @ vec(rho)."""
    dim2 = 1 << (2 * m.n_sites)
    out = np.zeros((dim2, dim2), dtype=complex)
    eye = np.arange(dim2)
    for perm, phase, coeff in _superop_terms(m):
        if perm is None:
            out[eye, eye] += coeff
        else:
            out[eye, perm] += coeff * phase
    return out


def _superop_apply(terms, vec: np.ndarray) -> np.ndarray:
    out = np.zeros_like(vec)
    for perm, phase, coeff in terms:
        if perm is None:
            out += coeff * vec
        else:
            out += (coeff * phase) * vec[perm]
    return out


def _superop_sparse(terms, dim2: int):
    """Sparse matrix form of the gather terms (one spmv per evaluation is
    much faster than many large gathers at nine qubits)."""
    import scipy.sparse as sp

    rows_idx = np.arange(dim2)
    mats = []
    for perm, phase, coeff in terms:
        if perm is None:
            mats.append(sp.diags(np.full(dim2, coeff)))
        else:
            data = np.broadcast_to(coeff * phase, (dim2,))
            mats.append(sp.csr_matrix((data, (rows_idx, perm)), shape=(dim2, dim2)))
    total = mats[0]
    for m in mats[1:]:
        total = total + m
    return total.tocsr()


def _oracle_sample_check(rho: np.ndarray, t: float) -> np.ndarray:
    tr = np.trace(rho)
    if abs(tr.imag) > 1e-9:
        raise IntegrationError(f"trace developed imaginary part at t={t}")
    if abs(tr.real - 1.0) > 1e-12:
        rho = rho / tr.real
    herm_defect = np.linalg.norm(rho - rho.conj().T)
    if herm_defect > 1e-9:
        raise IntegrationError(
            f"hermiticity defect {herm_defect:.3e} at t={t}"
        )
    rho = 0.5 * (rho + rho.conj().T)
    lam_min = float(np.min(np.linalg.eigvalsh(rho)))
    if lam_min < -1e-6:
        raise IntegrationError(
            f"positivity violation {lam_min:.3e} at t={t}"
        )
    return rho


def oracle_master_equation(
    m: LindbladModel,
    rho0: DensityMatrix,
    times,
    vars: VariableSet,
) -> Trajectory:
    """Integrate the master equation on the full 2^n density matrix and
    return Tr(P rho) for every requested variable.

    Fixed-step RK4 with the same step rule as integrate_linear; the rate
    scale of the model stands in for ||A||.  Trace drift beyond 1e-12 is
    renormalized at sample times, where hermiticity and positivity are
    also enforced.
    """
    if m.n_sites > ORACLE_MAX_SITES:
        raise DimensionMismatchError(
            f"oracle limited to {ORACLE_MAX_SITES} qubits, got {m.n_sites}"
        )
    if rho0.n_sites != m.n_sites or vars.n_sites != m.n_sites:
        raise DimensionMismatchError("model, state and variables disagree on size")
    t = _check_times(times)
    dim = 1 << m.n_sites

    if m.n_sites <= ORACLE_DENSE_MAX_SITES:
        lsup = _superop_matrix(m)
        stepper = _integrate_fixed(lsup, rho0.entries.ravel(), t)
        raw = [vec.reshape(dim, dim) for vec in stepper]
    else:
        lsup = _superop_sparse(_superop_terms(m), dim * dim)
        rate = m.max_rate
        dt_min = float(np.min(np.diff(t))) if t.size > 1 else 0.0
        h_target = np.inf
        if dt_min > 0:
            h_target = dt_min / SUBSTEPS_PER_SAMPLE
        if rate > 0:
            h_target = min(h_target, STEP_NORM_CAP / rate)
        vec = rho0.entries.ravel().astype(complex)
        raw = [vec.reshape(dim, dim).copy()]
        for k in range(t.size - 1):
            span = float(t[k + 1] - t[k])
            nsub = max(1, ceil(span / h_target)) if np.isfinite(h_target) else 1
            if nsub > MAX_SUBSTEPS:
                raise StepSizeError("oracle step count overflow")
            h = span / nsub
            for _ in range(nsub):
                k1 = lsup @ vec
                k2 = lsup @ (vec + 0.5 * h * k1)
                k3 = lsup @ (vec + 0.5 * h * k2)
                k4 = lsup @ (vec + h * k3)
                vec = vec + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            raw.append(vec.reshape(dim, dim).copy())

    values = np.empty((t.size, len(vars)))
    for i, rho in enumerate(raw):
        rho = _oracle_sample_check(rho, float(t[i]))
        for j, s in enumerate(vars):
            values[i, j] = string_trace_product(s, rho).real
    traj = Trajectory(t, vars.labels, values)
    traj.check_expectation_bounds()
    return traj


def generator_matrix_oracle(m: LindbladModel, vars: VariableSet) -> np.ndarray:
    """Generator matrix recovered from the dense superoperator: entry
    [i, j] is Tr(P_i L(P_j)) / 2^n, which must match build_generator."""
    dim = 1 << m.n_sites
    terms = _superop_terms(m)
    out = np.zeros((len(vars), len(vars)))
    for j, s in enumerate(vars):
        lp = _superop_apply(terms, string_to_matrix(s).ravel()).reshape(dim, dim)
        for i, si in enumerate(vars):
            val = string_trace_product(si, lp) / dim
            out[i, j] = val.real
    return out
