"""Permanent trajectories: motions along which the invariant input is constant.

Such a trajectory is a left-translated one-parameter subgroup
``x(t) = x0 exp(t wbar)``, and around it the linearized invariant error
system is time invariant.

Not covered: the helicoidal family of the (q, v) inertial-navigation
group, parametrized by constants Omega, Upsilon, Gamma (vectors), lambda
(scalar) and q0 (unit quaternion):

    q(t) = exp(Omega t / 2) * q0
    v(t) = q0^-1 * (lambda Omega t + Upsilon + exp(-Omega t/2) * Gamma * exp(Omega t/2)) * q0

It needs a group not implemented here.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .lie_core import GroupElement, compose, exp
from .systems import InvariantSystem, dynamics_rhs, invariants_I

__all__ = ["PermanentTrajectory", "closure_period", "is_permanent", "permanent_state", "required_input", "PERMANENCE_TOL"]

PERMANENCE_TOL = 1e-8


@dataclass(frozen=True)
class PermanentTrajectory:
    """``ubar`` is the constant invariant input ``I(x(t), u(t))``."""

    sys: InvariantSystem
    x0: GroupElement
    ubar: np.ndarray
    duration: float = 10.0

    def __post_init__(self):
        ubar = np.array(self.ubar, dtype=float)
        ubar.setflags(write=False)
        object.__setattr__(self, "ubar", ubar)

    @property
    def wbar(self) -> np.ndarray:
        """Constant body velocity along the trajectory."""
        return dynamics_rhs(self.sys, self.x0, self.sys.input_action(self.x0, self.ubar))

    def sample(self, n: int = 101) -> tuple[np.ndarray, list[GroupElement], np.ndarray]:
        ts = np.linspace(0.0, self.duration, n)
        states = [permanent_state(self, t) for t in ts]
        inputs = np.array([required_input(self, t) for t in ts])
        return ts, states, inputs


def permanent_state(traj: PermanentTrajectory, t: float) -> GroupElement:
    if t < 0:
        raise ValueError("permanent trajectories are sampled for t >= 0")
    return compose(traj.x0, exp(traj.sys.group, t * traj.wbar))


def required_input(traj: PermanentTrajectory, t: float) -> np.ndarray:
    """Input ``psi_{x(t)}(ubar)`` keeping the invariant input at ``ubar``."""
    return np.asarray(traj.sys.input_action(permanent_state(traj, t), traj.ubar), dtype=float)


def is_permanent(
    sys: InvariantSystem,
    states: Sequence[GroupElement],
    inputs: Sequence,
    tol: float = PERMANENCE_TOL,
) -> tuple[bool, float]:
    """Verdict and max deviation of ``I(x(t), u(t))`` from its initial value."""
    if len(states) != len(inputs) or len(states) == 0:
        raise ValueError("states and inputs must be aligned, non-empty samples")
    inv0 = invariants_I(sys, states[0], inputs[0])
    dev = max(float(np.max(np.abs(invariants_I(sys, x, u) - inv0))) for x, u in zip(states, inputs))
    return dev < tol, dev


def closure_period(traj: PermanentTrajectory) -> Optional[float]:
    """Time after which a rotating permanent motion returns to ``x0``.

    ``None`` when the motion has no rotational part (translations never close).
    """
    name = traj.sys.group.name
    w = traj.wbar
    rate = float(np.linalg.norm(w)) if name == "SO3" else (abs(float(w[0])) if name == "SE2" else 0.0)
    return 2.0 * np.pi / rate if rate > 1e-12 else None
