"""Invariant pre-observers, their error dynamics, linearization and gain design.

Correction convention
---------------------
The correction consumes the output discrepancy expressed at the identity,
``z = rho_{xhat^-1}(y) - h_e(I)`` (``I`` the invariant input of the
estimate; on the right side ``h_e`` is just ``h(e)``). With a gain matrix
``Lbar`` (n x p) the default correction is ``-Lbar @ z``, so that the
linearized invariant error obeys ``d xi/dt = (A + Lbar C) xi``. Because
``z`` vanishes on the true state, every ObserverSpec is a pre-observer by
construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.signal import place_poles

from .lie_core import GroupElement, Velocity, adjoint, compose, exp, inverse
from .systems import InvariantSystem, invariants_I

__all__ = [
    "FD_STEP",
    "LinearizedPair",
    "NotObservable",
    "ObserverSpec",
    "ObservabilityReport",
    "StabilityReport",
    "design_gain_adjoint",
    "design_gain_pole",
    "error",
    "error_rhs",
    "linearize",
    "observability_check",
    "observability_rank",
    "observer_rhs",
    "output_jacobian",
    "stability_check",
]

FD_STEP = 1e-6


class NotObservable(ValueError):
    def __init__(self, rank: int, dim: int):
        super().__init__(f"(A, C) is not observable: observability rank {rank} < {dim}")
        self.rank = rank
        self.dim = dim


@dataclass(frozen=True)
class ObserverSpec:
    """Gain schedule of an invariant pre-observer.

    ``hook(I, z)`` replaces the linear correction ``-gain @ z`` when given.
    It must vanish for ``z = 0``. On the right side ``I`` is ``None``.
    """

    gain: np.ndarray
    side: str = "left"
    hook: Optional[Callable[[Optional[np.ndarray], np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        gain = np.array(self.gain, dtype=float)
        if gain.ndim != 2:
            raise ValueError(f"gain must be an n x p matrix, got shape {gain.shape}")
        gain.setflags(write=False)
        object.__setattr__(self, "gain", gain)
        if self.side not in ("left", "right"):
            raise ValueError(f"side must be 'left' or 'right', got {self.side!r}")

    def correction(self, inv: Optional[np.ndarray], z: np.ndarray) -> np.ndarray:
        if self.hook is not None:
            return np.asarray(self.hook(inv, z), dtype=float)
        return -(self.gain @ z)

    @classmethod
    def zero(cls, sys: InvariantSystem) -> "ObserverSpec":
        return cls(np.zeros((sys.dim, sys.output_dim)), side=sys.side)


@dataclass(frozen=True)
class LinearizedPair:
    A: np.ndarray
    C: np.ndarray
    L: Optional[np.ndarray] = None

    def __post_init__(self):
        n = self.A.shape[0]
        if self.A.shape != (n, n) or self.C.shape[1] != n:
            raise ValueError(f"inconsistent shapes A{self.A.shape} C{self.C.shape}")
        if self.L is not None and self.L.shape != (n, self.C.shape[0]):
            raise ValueError(f"gain shape {self.L.shape} does not match ({n}, {self.C.shape[0]})")

    @property
    def closed_loop(self) -> np.ndarray:
        return self.A if self.L is None else self.A + self.L @ self.C


def _check_side(sys: InvariantSystem, spec: ObserverSpec):
    if sys.side != spec.side:
        raise ValueError(f"observer side {spec.side!r} does not match system side {sys.side!r}")


def observer_rhs(sys: InvariantSystem, spec: ObserverSpec, xhat: GroupElement, u, y) -> Velocity:
    """Velocity of the estimate: prediction plus invariant correction."""
    _check_side(sys, spec)
    u = np.asarray(u, dtype=float)
    y_id = np.asarray(sys.output_action(inverse(xhat), np.asarray(y, dtype=float)), dtype=float)
    if spec.side == "left":
        inv = invariants_I(sys, xhat, u)
        z = y_id - sys.output_at_identity(inv)
        return Velocity(body=sys.body_velocity(inv) + spec.correction(inv, z))
    z = y_id - sys.output_at_identity(u)
    return Velocity(body=np.asarray(sys.body_velocity(u), dtype=float), spatial=spec.correction(None, z))


def error(x: GroupElement, xhat: GroupElement, side: str) -> GroupElement:
    """Invariant error: ``x^-1 xhat`` (left) or ``xhat x^-1`` (right)."""
    if side == "left":
        return compose(inverse(x), xhat)
    if side == "right":
        return compose(xhat, inverse(x))
    raise ValueError(f"side must be 'left' or 'right', got {side!r}")


def error_rhs(sys: InvariantSystem, spec: ObserverSpec, eta: GroupElement, inv_true=None) -> Velocity:
    """Closed-form velocity of the invariant error.

    Left side: ``eta' = DL_eta f_e(I_hat) - DR_eta f_e(I) + DL_eta corr``,
    coupled to the trajectory only through ``I = inv_true``.
    Right side: ``eta' = DR_eta corr(h(eta^-1))``, autonomous; ``inv_true``
    is not used.
    """
    _check_side(sys, spec)
    eta_inv = inverse(eta)
    if spec.side == "right":
        h_e = sys.output_at_identity(None)
        z = np.asarray(sys.output_action(eta_inv, h_e), dtype=float) - h_e
        return Velocity(spatial=spec.correction(None, z))
    inv_true = np.asarray(inv_true, dtype=float)
    inv_hat = np.asarray(sys.input_action(eta_inv, inv_true), dtype=float)
    z = np.asarray(sys.output_action(eta_inv, sys.output_at_identity(inv_true)), dtype=float) - sys.output_at_identity(inv_hat)
    body = (
        sys.body_velocity(inv_hat)
        + spec.correction(inv_hat, z)
        - adjoint(eta) @ sys.body_velocity(inv_true)
    )
    return Velocity(body=body)


def _jacobian(fun: Callable[[np.ndarray], np.ndarray], x0: np.ndarray, step: float = FD_STEP) -> np.ndarray:
    x0 = np.asarray(x0, dtype=float)
    cols = []
    for j in range(x0.size):
        d = np.zeros_like(x0)
        d[j] = step
        cols.append((np.asarray(fun(x0 + d)) - np.asarray(fun(x0 - d))) / (2.0 * step))
    return np.column_stack(cols)


def output_jacobian(sys: InvariantSystem, ubar=None, step: float = FD_STEP) -> np.ndarray:
    """``C = dh/dx(e, ubar)`` in exponential coordinates around the identity."""
    grp = sys.group
    if sys.side == "right":
        h_e = sys.output_at_identity(None)
        return _jacobian(lambda xi: sys.output_action(exp(grp, xi), h_e), np.zeros(grp.dim), step)
    ubar = np.asarray(ubar, dtype=float)
    # u held fixed; h(x, u) = rho_x(h_e(psi_{x^-1}(u)))
    def h(xi):
        x = exp(grp, xi)
        return sys.output_action(x, sys.output_at_identity(invariants_I(sys, x, ubar)))

    return _jacobian(h, np.zeros(grp.dim), step)


def linearize(sys: InvariantSystem, spec: Optional[ObserverSpec] = None, ubar=None, step: float = FD_STEP) -> LinearizedPair:
    """First-order invariant error system around a constant invariant input.

    ``A[i, j] = sum_k C_jk^i fbar^k - [df/du dpsi/dg]_ij`` on the left side,
    ``A = 0`` on the right side. ``L`` is ``-d corr/dz`` at ``z = 0``.
    """
    grp = sys.group
    n = grp.dim
    C = output_jacobian(sys, ubar, step)
    if sys.side == "right":
        A = np.zeros((n, n))
        inv = None
    else:
        ubar = np.asarray(ubar, dtype=float)
        inv = ubar
        fbar = np.asarray(sys.body_velocity(ubar), dtype=float)
        bracket_part = np.einsum("jki,k->ij", grp.structure.tensor, fbar)
        dfdu = _jacobian(sys.body_velocity, ubar, step)
        dpsidg = _jacobian(lambda xi: sys.input_action(exp(grp, xi), ubar), np.zeros(n), step)
        A = bracket_part - dfdu @ dpsidg
    L = None
    if spec is not None:
        _check_side(sys, spec)
        if spec.hook is None:
            L = np.array(spec.gain)
        else:
            L = -_jacobian(lambda z: spec.correction(inv, z), np.zeros(C.shape[0]), step)
    return LinearizedPair(A, C, L)


def observability_rank(A: np.ndarray, C: np.ndarray, tol: Optional[float] = None) -> int:
    n = A.shape[0]
    blocks = [C]
    for _ in range(n - 1):
        blocks.append(blocks[-1] @ A)
    return int(np.linalg.matrix_rank(np.vstack(blocks), tol=tol))


@dataclass(frozen=True)
class ObservabilityReport:
    rank: int
    dim: int

    @property
    def observable(self) -> bool:
        return self.rank == self.dim


def observability_check(sys: InvariantSystem, ubar=None, tol: float = 1e-6) -> ObservabilityReport:
    """Rank of the observability matrix of the linearized error system.

    ``tol`` absorbs finite-difference noise in ``C``.
    """
    pair = linearize(sys, None, ubar)
    return ObservabilityReport(observability_rank(pair.A, pair.C, tol=tol), sys.dim)


def design_gain_pole(A: np.ndarray, C: np.ndarray, poles: Sequence[complex]) -> np.ndarray:
    """Gain ``Lbar`` placing the spectrum of ``A + Lbar C`` at ``poles``.

    Placement is done on the dual pair ``(A^T, C^T)``.
    """
    A = np.asarray(A, dtype=float)
    C = np.atleast_2d(np.asarray(C, dtype=float))
    n = A.shape[0]
    poles = np.asarray(poles)
    if poles.shape != (n,):
        raise ValueError(f"need {n} poles, got {poles.shape}")
    rank = observability_rank(A, C, tol=1e-9)
    if rank < n:
        raise NotObservable(rank, n)
    placed = place_poles(A.T, C.T, poles)
    return -placed.gain_matrix.T


def design_gain_adjoint(sys: InvariantSystem, K, ubar=None) -> ObserverSpec:
    """Gradient-like gains ``corr = K Dh(e)^T z``.

    ``K`` is a scalar or one non-negative weight per output component; the
    linearized flow is then ``-Dh^T diag(K) Dh``, symmetric and negative
    semidefinite, so ``|xi|^2`` is a Lyapunov function.
    """
    C = output_jacobian(sys, ubar)
    p = C.shape[0]
    weights = np.broadcast_to(np.asarray(K, dtype=float), (p,))
    if np.any(weights < 0):
        raise ValueError("adjoint gains must be non-negative")
    return ObserverSpec(-(C.T * weights), side=sys.side)


@dataclass(frozen=True)
class StabilityReport:
    eigenvalues: np.ndarray
    max_real: float
    symmetric_eigenvalues: np.ndarray
    symmetric_verdict: str

    @property
    def stable(self) -> bool:
        return self.max_real < 0.0


def stability_check(pair: LinearizedPair, tol: float = 1e-10) -> StabilityReport:
    M = pair.closed_loop
    eig = np.linalg.eigvals(M)
    sym = np.linalg.eigvalsh(0.5 * (M + M.T))
    if np.all(sym < -tol):
        verdict = "negative definite"
    elif np.all(sym <= tol):
        verdict = "negative semidefinite"
    else:
        verdict = "indefinite"
    return StabilityReport(eig, float(np.max(eig.real)), sym, verdict)
