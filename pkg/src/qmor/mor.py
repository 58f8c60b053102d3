"""Balanced realization, Hankel singular values, balanced truncation, and
numerical H-infinity evaluation of the truncation error bounds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .eom import InterconnectedModel, Subsystem
from .exceptions import DegenerateSplitError
from .linalg import DEFAULT_TOLS, Tolerances

__all__ = [
    "StateSpaceModel",
    "BalancedRealization",
    "ReducedModel",
    "balance",
    "truncate",
    "transfer_eval",
    "hinf_norm",
    "error_system",
    "reduce_interconnected",
]

GAP_TOL = 1e-8  # required relative gap between kept/discarded Hankel values

HINF_GRID = (1e-3, 1e3, 2000)
HINF_REFINE_REL = 1e-6


@dataclass(frozen=True)
class StateSpaceModel:
    """Strictly proper LTI system (A, B, C); D is identically zero."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.a, dtype=float))
        n = a.shape[0]
        b = np.asarray(self.b, dtype=float).reshape(n, -1)
        c = np.asarray(self.c, dtype=float).reshape(-1, n)
        if a.shape != (n, n):
            raise ValueError("A must be square")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @property
    def order(self) -> int:
        return self.a.shape[0]


@dataclass(frozen=True)
class BalancedRealization:
    """Coordinates in which both gramians equal diag(hankel).

    ``t`` maps original coordinates to balanced ones (x_bal = t @ x) and
    ``tinv`` is its right inverse; both are rectangular when numerically
    unreachable/unobservable directions were removed (``removed`` counts
    them).
    """

    t: np.ndarray
    tinv: np.ndarray
    hankel: np.ndarray
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    removed: int = 0

    @property
    def order(self) -> int:
        return self.hankel.size


@dataclass(frozen=True)
class ReducedModel:
    """Leading-k balanced truncation with its H-infinity error bounds."""

    k: int
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    lower_bound: float
    upper_bound: float
    hankel: np.ndarray


def balance(s: StateSpaceModel, tols: Tolerances = DEFAULT_TOLS) -> BalancedRealization:
    """Square-root balancing of a Hurwitz system.

    Gramian factors come from the Lyapunov solutions; the SVD of
    Lo^T Lc yields the Hankel values and the two-sided transformation.
    Directions with sigma below tols.minimality * sigma_1 are removed.
    """
    linalg.assert_hurwitz(s.a, tols, what="state matrix")
    p = linalg.lyapunov_solve(s.a, s.b @ s.b.T, tols)
    q = linalg.lyapunov_solve(s.a.T, s.c.T @ s.c, tols)
    lc = linalg.symmetric_psd_sqrt_factor(p, tols.minimality, tols)
    lo = linalg.symmetric_psd_sqrt_factor(q, tols.minimality, tols)
    if lc.shape[1] == 0 or lo.shape[1] == 0:
        return BalancedRealization(
            t=np.zeros((0, s.order)),
            tinv=np.zeros((s.order, 0)),
            hankel=np.zeros(0),
            a=np.zeros((0, 0)),
            b=np.zeros((0, s.b.shape[1])),
            c=np.zeros((s.c.shape[0], 0)),
            removed=s.order,
        )
    u, sig, vt = linalg.svd(lo.T @ lc)
    keep = sig > tols.minimality * sig[0]
    sig = sig[keep]
    u = u[:, keep]
    v = vt.T[:, keep]
    inv_root = 1.0 / np.sqrt(sig)
    t = (u * inv_root).T @ lo.T
    tinv = lc @ (v * inv_root)
    return BalancedRealization(
        t=t,
        tinv=tinv,
        hankel=sig,
        a=t @ s.a @ tinv,
        b=t @ s.b,
        c=s.c @ tinv,
        removed=s.order - sig.size,
    )


def truncate(b: BalancedRealization, k: int, tols: Tolerances = DEFAULT_TOLS) -> ReducedModel:
    """Keep the k leading balanced states.

    Requires a clear relative gap between sigma_k and sigma_{k+1}; k equal
    to the full order is the trivial truncation with zero bounds.
    """
    order = b.order
    if not 1 <= k <= order:
        raise ValueError(f"truncation order {k} outside 1..{order}")
    if k < order:
        gap = b.hankel[k - 1] / b.hankel[k] if b.hankel[k] > 0 else np.inf
        if not gap >= 1.0 + GAP_TOL:
            raise DegenerateSplitError(
                f"sigma_{k}/sigma_{k+1} = {gap:.12f} sits inside a degenerate "
                "cluster; pick a split with a clear gap"
            )
    a = b.a[:k, :k]
    lower = float(b.hankel[k]) if k < order else 0.0
    upper = float(2.0 * np.sum(b.hankel[k:])) if k < order else 0.0
    if k < order:
        linalg.assert_hurwitz(a, tols, what="reduced state matrix")
    return ReducedModel(
        k=k,
        a=a,
        b=b.b[:k, :],
        c=b.c[:, :k],
        lower_bound=lower,
        upper_bound=upper,
        hankel=b.hankel.copy(),
    )


def transfer_eval(s: StateSpaceModel, omega: float) -> np.ndarray:
    """Transfer function C (i omega I - A)^-1 B at a real frequency."""
    n = s.order
    m = 1j * omega * np.eye(n) - s.a
    x = linalg.lu_solve(m.astype(complex), s.b.astype(complex))
    return s.c @ x


class _TransferEvaluator:
    """Fast repeated transfer-function evaluation via eigendecomposition,
    falling back to per-frequency solves for ill-conditioned eigenbases."""

    def __init__(self, s: StateSpaceModel):
        self.s = s
        self._modal = None
        if s.order:
            w, v = np.linalg.eig(s.a)
            try:
                cond = np.linalg.cond(v)
            except np.linalg.LinAlgError:
                cond = np.inf
            if np.isfinite(cond) and cond < 1e8:
                self._modal = (w, s.c @ v, np.linalg.solve(v, s.b.astype(complex)))

    def gain(self, omega: float) -> float:
        if self.s.order == 0 or self.s.b.size == 0 or self.s.c.size == 0:
            return 0.0
        if self._modal is not None:
            w, cv, vb = self._modal
            g = cv @ (vb / (1j * omega - w)[:, None])
            return float(np.linalg.svd(g, compute_uv=False)[0])
        g = transfer_eval(self.s, omega)
        return float(np.linalg.svd(g, compute_uv=False)[0])


def hinf_norm(s: StateSpaceModel, grid: tuple[float, float, int] = HINF_GRID) -> float:
    """Certified-from-below H-infinity estimate: a log frequency sweep
    (plus DC) followed by golden-section refinement around the maximum."""
    if s.order == 0 or s.b.size == 0 or s.c.size == 0:
        return 0.0
    linalg.assert_hurwitz(s.a, what="state matrix")
    lo, hi, count = grid
    omegas = np.concatenate(([0.0], np.geomspace(lo, hi, count)))
    ev = _TransferEvaluator(s)
    gains = np.array([ev.gain(w) for w in omegas])
    best = int(np.argmax(gains))
    left = omegas[best - 1] if best > 0 else 0.0
    right = omegas[best + 1] if best + 1 < omegas.size else omegas[-1] * 10.0
    peak = _golden_max(ev.gain, left, right)
    return max(float(gains[best]), peak)


def _golden_max(f, a: float, b: float) -> float:
    phi = (np.sqrt(5.0) - 1.0) / 2.0
    x1 = b - phi * (b - a)
    x2 = a + phi * (b - a)
    f1, f2 = f(x1), f(x2)
    scale = max(abs(a), abs(b), 1e-30)
    while (b - a) > HINF_REFINE_REL * scale:
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + phi * (b - a)
            f2 = f(x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - phi * (b - a)
            f1 = f(x1)
        scale = max(abs(a), abs(b), 1e-30)
    return max(f1, f2)


def error_system(full: StateSpaceModel, reduced: StateSpaceModel) -> StateSpaceModel:
    """G - G_r as a single block-diagonal state-space system."""
    if full.b.shape[1] != reduced.b.shape[1] or full.c.shape[0] != reduced.c.shape[0]:
        raise ValueError("systems must share input/output dimensions")
    n, r = full.order, reduced.order
    a = np.block(
        [[full.a, np.zeros((n, r))], [np.zeros((r, n)), reduced.a]]
    )
    b = np.vstack([full.b, reduced.b])
    c = np.hstack([full.c, -reduced.c])
    return StateSpaceModel(a, b, c)


def reduce_interconnected(
    m: InterconnectedModel, k: int, tols: Tolerances = DEFAULT_TOLS
) -> InterconnectedModel:
    """Replace the second block with its order-k balanced truncation.

    The returned model's ``x2_map`` sends original second-block initial
    conditions into the truncated balanced coordinates (first k entries
    of T x2), composing with any map already present.
    """
    sys2 = m.sys2
    bal = balance(StateSpaceModel(sys2.a, sys2.b, sys2.c), tols)
    red = truncate(bal, k, tols)
    x2_map = bal.t[:k, :]
    if m.x2_map is not None:
        x2_map = x2_map @ m.x2_map
    labels = tuple(f"h{i+1}" for i in range(k))
    return InterconnectedModel(
        sys1=m.sys1,
        sys2=Subsystem(red.a, red.b, red.c, labels),
        x2_map=x2_map,
    )
