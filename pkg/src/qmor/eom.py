"""Closed linear ODE systems over Pauli expectation values, and their
partition into two interconnected input-output subsystems.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import linalg
from .exceptions import (
    ClosureOverflowError,
    DimensionMismatchError,
    InvalidStateError,
    NotClosedError,
    UnsupportedAffineError,
)
from .pauli import LindbladModel, PauliString, adjoint_generator

__all__ = [
    "VariableSet",
    "GeneratorMatrix",
    "Subsystem",
    "InterconnectedModel",
    "closure",
    "build_generator",
    "partition_and_factor",
    "initial_expectations",
    "ProductState",
    "MAX_CLOSURE_DIM",
]

MAX_CLOSURE_DIM = 4096

AFFINE_TOL = 1e-12


class VariableSet:
    """Ordered set of distinct non-identity Pauli strings; the order is the
    index map for every matrix built on top of it."""

    __slots__ = ("_strings", "_index")

    def __init__(self, strings: Iterable[PauliString | str]):
        out: list[PauliString] = []
        index: dict[PauliString, int] = {}
        for s in strings:
            if isinstance(s, str):
                s = PauliString.from_letters(s)
            if s.is_identity:
                raise ValueError("identity is not a dynamical variable")
            if s in index:
                raise ValueError(f"duplicate variable {s.letters}")
            index[s] = len(out)
            out.append(s)
        if not out:
            raise ValueError("variable set may not be empty")
        n = out[0].n_sites
        for s in out:
            if s.n_sites != n:
                raise DimensionMismatchError("variables act on differing registers")
        self._strings = tuple(out)
        self._index = index

    @property
    def n_sites(self) -> int:
        return self._strings[0].n_sites

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(s.letters for s in self._strings)

    def index(self, s: PauliString | str) -> int:
        if isinstance(s, str):
            s = PauliString.from_letters(s)
        try:
            return self._index[s]
        except KeyError:
            raise KeyError(f"{s.letters} not in variable set") from None

    def __contains__(self, s) -> bool:
        if isinstance(s, str):
            s = PauliString.from_letters(s)
        return s in self._index

    def __iter__(self):
        return iter(self._strings)

    def __len__(self) -> int:
        return len(self._strings)

    def __getitem__(self, i: int) -> PauliString:
        return self._strings[i]

    def __eq__(self, other) -> bool:
        return isinstance(other, VariableSet) and self._strings == other._strings

    def __repr__(self) -> str:
        return f"VariableSet({list(self.labels)!r})"

    def coefficient_vector(self, poly) -> np.ndarray:
        """Real coefficient vector of a polynomial over this set (its
        support must lie inside the set; identity excluded)."""
        v = np.zeros(len(self._strings))
        for s, c in poly.items():
            if s.is_identity:
                continue
            v[self.index(s)] = c.real
        return v


def closure(
    seeds: VariableSet | Sequence[PauliString | str],
    m: LindbladModel,
    max_dim: int = MAX_CLOSURE_DIM,
) -> VariableSet:
    """Smallest superset of the seeds closed under the adjoint generator,
    ordered seeds-first then by discovery."""
    if not isinstance(seeds, VariableSet):
        seeds = VariableSet(seeds)
    if max_dim < len(seeds):
        raise ValueError("max_dim smaller than the seed set")
    order: list[PauliString] = list(seeds)
    seen = set(order)
    frontier = list(order)
    while frontier:
        next_frontier: list[PauliString] = []
        for s in frontier:
            for t, _ in adjoint_generator(s, m).items():
                if t.is_identity or t in seen:
                    continue
                seen.add(t)
                order.append(t)
                next_frontier.append(t)
                if len(order) > max_dim:
                    raise ClosureOverflowError(
                        f"closure exceeded max_dim={max_dim}",
                        partial=VariableSet(order[:max_dim]),
                    )
        frontier = next_frontier
    return VariableSet(order)


@dataclass(frozen=True)
class GeneratorMatrix:
    """x_dot = a @ x over the expectations labeled by ``variables``."""

    variables: VariableSet
    a: np.ndarray

    def __post_init__(self):
        n = len(self.variables)
        if self.a.shape != (n, n):
            raise DimensionMismatchError("generator matrix shape mismatch")


def build_generator(vars: VariableSet, m: LindbladModel) -> GeneratorMatrix:
    """Generator matrix A with A[i][j] = coefficient of vars[j] in
    d<vars[i]>/dt.  The set must be closed and the dynamics homogeneous."""
    n = len(vars)
    a = np.zeros((n, n))
    for i, s in enumerate(vars):
        gen = adjoint_generator(s, m)
        scale = max(gen.max_abs(), 1.0)
        for t, c in gen.items():
            if t.is_identity:
                if abs(c) > AFFINE_TOL * scale:
                    raise UnsupportedAffineError(
                        f"d<{s.letters}>/dt has constant term {c.real:.3e}; "
                        "affine generators are unsupported"
                    )
                continue
            if t not in vars:
                raise NotClosedError(
                    f"variable set is not closed: d<{s.letters}>/dt couples "
                    f"to {t.letters}"
                )
            a[i, vars.index(t)] = c.real
    return GeneratorMatrix(vars, a)


@dataclass(frozen=True)
class Subsystem:
    """One block of an interconnection: x_dot = a x + b u, y = c x."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    labels: tuple[str, ...]

    @property
    def order(self) -> int:
        return self.a.shape[0]


@dataclass(frozen=True)
class InterconnectedModel:
    """Two subsystems in feedback: each one's output is the other's input.

    ``x2_map`` (when set) maps original second-block coordinates into the
    current (possibly reduced) second-block state space.
    """

    sys1: Subsystem
    sys2: Subsystem
    x2_map: np.ndarray | None = None

    def assemble(self) -> np.ndarray:
        a12 = self.sys1.b @ self.sys2.c
        a21 = self.sys2.b @ self.sys1.c
        return np.block([[self.sys1.a, a12], [a21, self.sys2.a]])

    @property
    def labels(self) -> tuple[str, ...]:
        return self.sys1.labels + self.sys2.labels


def _rank_factor(block: np.ndarray, rel_tol: float) -> tuple[np.ndarray, np.ndarray]:
    """block = left @ right with singular values split evenly."""
    rows, cols = block.shape
    if rows == 0 or cols == 0 or not np.any(block):
        return np.zeros((rows, 0)), np.zeros((0, cols))
    u, s, vt = linalg.svd(block)
    r = int(np.sum(s > rel_tol * s[0]))
    root = np.sqrt(s[:r])
    return u[:, :r] * root, root[:, None] * vt[:r]


def partition_and_factor(
    g: GeneratorMatrix,
    interest: VariableSet | Sequence[PauliString | str],
) -> InterconnectedModel:
    """Split the generator into the interest block and its complement, and
    factor both coupling blocks at numerical rank."""
    if not isinstance(interest, VariableSet):
        interest = VariableSet(interest)
    idx1 = [g.variables.index(s) for s in interest]
    chosen = set(idx1)
    idx2 = [i for i in range(len(g.variables)) if i not in chosen]
    if not idx2:
        raise ValueError("interest set must be a proper subset of the variables")
    a = g.a
    a11 = a[np.ix_(idx1, idx1)]
    a12 = a[np.ix_(idx1, idx2)]
    a21 = a[np.ix_(idx2, idx1)]
    a22 = a[np.ix_(idx2, idx2)]
    rel = linalg.DEFAULT_TOLS.rank
    b1, c2 = _rank_factor(a12, rel)
    b2, c1 = _rank_factor(a21, rel)
    labels1 = tuple(g.variables[i].letters for i in idx1)
    labels2 = tuple(g.variables[i].letters for i in idx2)
    model = InterconnectedModel(
        Subsystem(a11, b1, c1, labels1), Subsystem(a22, b2, c2, labels2)
    )
    # reassembly must reproduce the permuted generator
    perm = idx1 + idx2
    resid = np.linalg.norm(model.assemble() - a[np.ix_(perm, perm)])
    scale = max(np.linalg.norm(a), 1e-300)
    if resid > 1e-10 * scale:
        raise ArithmeticError(
            f"coupling factorization residual {resid:.3e} out of tolerance"
        )
    return model


@dataclass(frozen=True)
class ProductState:
    """Per-qubit Bloch vectors (x, y, z), one triple per site."""

    bloch: tuple[tuple[float, float, float], ...]

    def __post_init__(self):
        for i, (x, y, z) in enumerate(self.bloch):
            if x * x + y * y + z * z > 1.0 + 1e-9:
                raise InvalidStateError(
                    f"Bloch vector for site {i} has norm > 1"
                )

    @property
    def n_sites(self) -> int:
        return len(self.bloch)


def initial_expectations(state, vars: VariableSet) -> np.ndarray:
    """Expectation of every variable in the given initial state.

    ``state`` is either a ProductState (expectations factor over sites) or
    an amplitude vector over the 2**n computational basis (delegated to
    the state-vector oracle).
    """
    if isinstance(state, ProductState):
        if state.n_sites != vars.n_sites:
            raise DimensionMismatchError(
                f"state has {state.n_sites} sites, variables {vars.n_sites}"
            )
        single = {
            "I": lambda b: 1.0,
            "X": lambda b: b[0],
            "Y": lambda b: b[1],
            "Z": lambda b: b[2],
        }
        out = np.empty(len(vars))
        for i, s in enumerate(vars):
            val = 1.0
            for site in range(vars.n_sites):
                val *= single[s.letter(site)](state.bloch[site])
            out[i] = val
        return out
    amps = np.asarray(state, dtype=complex).ravel()
    if amps.size != 2 ** vars.n_sites:
        raise DimensionMismatchError(
            f"amplitude vector length {amps.size} does not match "
            f"{vars.n_sites} qubits"
        )
    from . import sim  # deferred: sim builds on eom

    return sim.expectations_from_state(amps, vars)
