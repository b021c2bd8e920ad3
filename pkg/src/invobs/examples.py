"""The two wired systems: magnetic-aided attitude on SO(3) and the
non-holonomic car on SE(2), plus an abelian reference system and a
deliberately broken one used as a negative control.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .groups import r2, se2, se2_apply, so3
from .lie_core import GroupElement
from .observer import ObserverSpec, design_gain_adjoint
from .systems import InvariantSystem

__all__ = [
    "AttitudeConfig",
    "CarConfig",
    "CollinearReferenceVectors",
    "build_attitude_system",
    "build_car_system",
    "build_corrupted_system",
    "build_reference_system",
    "default_attitude_observer",
]

GRAVITY = (0.0, 0.0, 9.81)


class CollinearReferenceVectors(UserWarning):
    """Gravity and magnetic field are (nearly) collinear; attitude is not fully observable."""


@dataclass(frozen=True)
class AttitudeConfig:
    G: tuple = GRAVITY
    dip_deg: float = 45.0
    K_G: float = 1.0
    K_B: float = 1.0
    use_accelerometer: bool = True
    noise_std: Optional[tuple] = None  # (accelerometer, magnetometer)
    seed: int = 0

    @property
    def B(self) -> np.ndarray:
        d = math.radians(self.dip_deg)
        return np.array([math.cos(d), 0.0, math.sin(d)])

    @property
    def reference_angle(self) -> float:
        g = np.asarray(self.G, dtype=float)
        c = abs(g @ self.B) / np.linalg.norm(g)
        return math.acos(min(1.0, c))

    def references(self) -> np.ndarray:
        if self.use_accelerometer:
            return np.concatenate([np.asarray(self.G, dtype=float), self.B])
        return self.B.copy()

    def output_weights(self) -> np.ndarray:
        if self.use_accelerometer:
            return np.array([self.K_G] * 3 + [self.K_B] * 3, dtype=float)
        return np.full(3, float(self.K_B))

    def output_noise(self) -> Optional[np.ndarray]:
        if self.noise_std is None:
            return None
        acc, mag = self.noise_std
        return np.array([acc] * 3 + [mag] * 3) if self.use_accelerometer else np.full(3, float(mag))


def _rotate_stack(g: GroupElement, y: np.ndarray) -> np.ndarray:
    # rho_g(y) = g^-1 y componentwise, a right action; scalar quaternion
    # arithmetic because this sits in the integrator's inner loop
    w, a, b, c = g.data.tolist()
    vals = np.asarray(y, dtype=float).tolist()
    out = []
    for i in range(0, len(vals), 3):
        v1, v2, v3 = vals[i : i + 3]
        # t = 2 (r x v) with r = -(a, b, c)
        t1 = 2.0 * (c * v2 - b * v3)
        t2 = 2.0 * (a * v3 - c * v1)
        t3 = 2.0 * (b * v1 - a * v2)
        out += [v1 + w * t1 + c * t2 - b * t3, v2 + w * t2 + a * t3 - c * t1, v3 + w * t3 + b * t1 - a * t2]
    return np.array(out)


def build_attitude_system(cfg: AttitudeConfig = AttitudeConfig()) -> InvariantSystem:
    """``dR/dt = R (omega x .)`` with body-frame vector measurements ``R^-1 G, R^-1 B``.

    The gyro rate ``omega`` is the input; the input action is the adjoint
    action ``psi_g = DL_{g^-1} DR_g`` (i.e. ``omega -> R_g^T omega``).
    """
    if cfg.use_accelerometer and cfg.reference_angle < 1e-3:
        warnings.warn(
            f"G and B are {cfg.reference_angle:.2e} rad apart; attitude about their common axis is unobservable",
            CollinearReferenceVectors,
            stacklevel=2,
        )
    refs = cfg.references()
    refs.setflags(write=False)
    return InvariantSystem(
        group=so3,
        body_velocity=lambda u: np.asarray(u, dtype=float),
        input_action=lambda g, u: g.matrix().T @ u,
        output_action=_rotate_stack,
        output_at_identity=lambda u: refs,
        input_dim=3,
        output_dim=refs.size,
        side="right",
        name="attitude" if cfg.use_accelerometer else "attitude-mag-only",
    )


def default_attitude_observer(cfg: AttitudeConfig = AttitudeConfig()) -> ObserverSpec:
    """Gradient gains ``K Dh(e)^T`` weighted by ``K_G`` / ``K_B`` per sensor."""
    return design_gain_adjoint(build_attitude_system(cfg), cfg.output_weights())


@dataclass(frozen=True)
class CarConfig:
    """Inputs are ``u = (u1, u2)``: forward speed (m/s) and heading rate (rad/s)."""

    speed: Callable[[float], float] = lambda t: 1.0
    steering_rate: Callable[[float], float] = lambda t: 0.0
    gains: Optional[np.ndarray] = None
    noise_std: Optional[float] = None
    seed: int = 0

    def inputs(self) -> Callable[[float], np.ndarray]:
        return lambda t: np.array([self.speed(t), self.steering_rate(t)], dtype=float)


def build_car_system(cfg: Optional[CarConfig] = None) -> InvariantSystem:
    """Unicycle on SE(2) measuring its planar position.

    Body velocity ``(u2, u1, 0)`` in the (rot, trans-x, trans-y) basis; the
    group leaves inputs untouched and acts on positions rigidly.
    """
    return InvariantSystem(
        group=se2,
        body_velocity=lambda u: np.array([u[1], u[0], 0.0]),
        input_action=lambda g, u: np.asarray(u, dtype=float),
        output_action=se2_apply,
        output_at_identity=lambda u: np.zeros(2),
        input_dim=2,
        output_dim=2,
        side="left",
        name="car",
    )


def build_reference_system() -> InvariantSystem:
    """Single integrator on R^2 with position output; the abelian test case."""
    return InvariantSystem(
        group=r2,
        body_velocity=lambda u: np.asarray(u, dtype=float),
        input_action=lambda g, u: np.asarray(u, dtype=float),
        output_action=lambda g, y: np.asarray(y, dtype=float) + g.data,
        output_at_identity=lambda u: np.zeros(2),
        input_dim=2,
        output_dim=2,
        side="left",
        name="reference",
    )


def build_corrupted_system(bias: float = 0.1) -> InvariantSystem:
    """Reference system whose output carries a state-dependent bias (not equivariant)."""
    base = build_reference_system()
    return InvariantSystem(
        group=base.group,
        body_velocity=base.body_velocity,
        input_action=base.input_action,
        output_action=base.output_action,
        output_at_identity=base.output_at_identity,
        input_dim=2,
        output_dim=2,
        side="left",
        name="corrupted",
        output_override=lambda x, u: x.data + bias * np.array([x.data[0] ** 2, 0.0]),
    )
