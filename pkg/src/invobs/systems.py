"""Invariant systems described intrinsically.

A system is given by its body velocity at the identity ``f_e``, the input
action ``psi``, the output action ``rho`` and the output at the identity
``h_e``; the full vector field and output map are reconstructed from these,
so invariance holds by construction.

Two flavours exist:

``side="left"``
    Left-invariant dynamics with equivariant output. ``psi`` and ``rho`` are
    left actions, ``f(x, u) = DL_x f_e(psi_{x^-1}(u))`` and
    ``h(x, u) = rho_x(h_e(psi_{x^-1}(u)))``.

``side="right"``
    Left-invariant dynamics driven by the body velocity ``u`` with a right
    equivariant output ``h(x) = rho_x(h(e))``. The input action is then the
    (right) action ``psi_g = DL_{g^-1} DR_g`` on the algebra and
    ``f(x, u) = DL_x f_e(u)``. ``h_e`` ignores its argument.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .lie_core import GroupElement, LieGroup, compose, inverse

__all__ = [
    "EquivarianceReport",
    "InputSignal",
    "InvariantSystem",
    "check_equivariance",
    "dynamics_rhs",
    "invariants_I",
    "output",
]

EQUIVARIANCE_TOL = 1e-8


@dataclass(frozen=True)
class InvariantSystem:
    group: LieGroup
    body_velocity: Callable[[np.ndarray], np.ndarray]
    input_action: Callable[[GroupElement, np.ndarray], np.ndarray]
    output_action: Callable[[GroupElement, np.ndarray], np.ndarray]
    output_at_identity: Callable[[np.ndarray], np.ndarray]
    input_dim: int
    output_dim: int
    side: str = "left"
    name: str = "custom"
    # Replaces the reconstructed output map when set. Only meant for
    # hand-written chart-level outputs (and negative controls); nothing
    # guarantees equivariance then.
    output_override: Optional[Callable[[GroupElement, np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if self.side not in ("left", "right"):
            raise ValueError(f"side must be 'left' or 'right', got {self.side!r}")

    @property
    def dim(self) -> int:
        return self.group.dim


@dataclass(frozen=True)
class InputSignal:
    """Sampled input with zero-order-hold (default) or linear interpolation."""

    times: np.ndarray
    values: np.ndarray
    interp: str = "zoh"

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if times.ndim != 1 or len(times) != len(values) or len(times) == 0:
            raise ValueError("times and values must have matching first dimension")
        if np.any(np.diff(times) <= 0):
            raise ValueError("timestamps must be strictly increasing")
        if self.interp not in ("zoh", "linear"):
            raise ValueError(f"unknown interpolation {self.interp!r}")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    def __call__(self, t: float) -> np.ndarray:
        times, values = self.times, self.values
        k = int(np.searchsorted(times, t, side="right")) - 1
        if k < 0:
            return values[0].copy()
        if k >= len(times) - 1 or self.interp == "zoh":
            return values[min(k, len(times) - 1)].copy()
        a = (t - times[k]) / (times[k + 1] - times[k])
        return (1.0 - a) * values[k] + a * values[k + 1]


def invariants_I(sys: InvariantSystem, x: GroupElement, u) -> np.ndarray:
    """Complete set of invariants ``psi_{x^-1}(u)`` of the pair ``(x, u)``."""
    return np.asarray(sys.input_action(inverse(x), np.asarray(u, dtype=float)), dtype=float)


def dynamics_rhs(sys: InvariantSystem, x: GroupElement, u) -> np.ndarray:
    """Body-frame velocity ``DL_x^-1 f(x, u)``."""
    u = np.asarray(u, dtype=float)
    if sys.side == "right":
        return np.asarray(sys.body_velocity(u), dtype=float)
    return np.asarray(sys.body_velocity(invariants_I(sys, x, u)), dtype=float)


def output(sys: InvariantSystem, x: GroupElement, u=None) -> np.ndarray:
    if sys.output_override is not None:
        return np.asarray(sys.output_override(x, u), dtype=float)
    if sys.side == "right":
        return np.asarray(sys.output_action(x, sys.output_at_identity(u)), dtype=float)
    return np.asarray(sys.output_action(x, sys.output_at_identity(invariants_I(sys, x, u))), dtype=float)


@dataclass
class EquivarianceReport:
    system: str
    deviations: dict[str, float] = field(default_factory=dict)
    tol: float = EQUIVARIANCE_TOL

    @property
    def passed(self) -> bool:
        return all(v < self.tol for v in self.deviations.values())

    @property
    def failures(self) -> list[str]:
        return [k for k, v in self.deviations.items() if not v < self.tol]

    def lines(self) -> list[str]:
        return [
            f"{'PASS' if v < self.tol else 'FAIL'}  {self.system}:{k}  max_dev={v:.3e}"
            for k, v in self.deviations.items()
        ]


def _tangent(sys: InvariantSystem, x: GroupElement, u) -> np.ndarray:
    # full tangent vector at x in the ambient matrix representation
    return x.matrix() @ sys.group.hat(dynamics_rhs(sys, x, u))


def check_equivariance(
    sys: InvariantSystem,
    samples: int = 50,
    seed: int = 0,
    tol: float = EQUIVARIANCE_TOL,
) -> EquivarianceReport:
    """Randomized check of the action laws and of invariance/equivariance.

    Every identity is evaluated on ``samples`` random draws and the largest
    deviation is reported; the report passes iff all are below ``tol``.
    """
    rng = np.random.default_rng(seed)
    grp = sys.group
    right = sys.side == "right"
    dev: dict[str, list[float]] = {
        "psi_identity": [],
        "psi_composition": [],
        "rho_identity": [],
        "rho_composition": [],
        "invariants": [],
        "dynamics": [],
        "output": [],
    }
    if right:
        dev["rhs_state_independence"] = []

    def gap(a, b) -> float:
        return float(np.max(np.abs(np.asarray(a) - np.asarray(b)), initial=0.0))

    e = grp.identity()
    for _ in range(samples):
        g1, g2, x = grp.random(rng), grp.random(rng), grp.random(rng)
        u = rng.normal(size=sys.input_dim)
        y = rng.normal(size=sys.output_dim)
        # right actions compose as psi_{g2} o psi_{g1} = psi_{g1 g2}
        g21 = compose(g1, g2) if right else compose(g2, g1)
        dev["psi_identity"].append(gap(sys.input_action(e, u), u))
        dev["psi_composition"].append(
            gap(sys.input_action(g2, sys.input_action(g1, u)), sys.input_action(g21, u))
        )
        dev["rho_identity"].append(gap(sys.output_action(e, y), y))
        dev["rho_composition"].append(
            gap(sys.output_action(g2, sys.output_action(g1, y)), sys.output_action(g21, y))
        )

        ug = sys.input_action(g1, u)
        xg = compose(x, g1) if right else compose(g1, x)
        dev["invariants"].append(gap(invariants_I(sys, xg, ug), invariants_I(sys, x, u)))
        if right:
            expected = _tangent(sys, x, u) @ g1.matrix()
        else:
            expected = g1.matrix() @ _tangent(sys, x, u)
        dev["dynamics"].append(gap(_tangent(sys, xg, ug), expected))
        dev["output"].append(gap(output(sys, xg, ug), sys.output_action(g1, output(sys, x, u))))
        if right:
            dev["rhs_state_independence"].append(gap(dynamics_rhs(sys, x, u), dynamics_rhs(sys, g2, u)))

    return EquivarianceReport(sys.name, {k: max(v) for k, v in dev.items()}, tol)


def sample_inputs(inputs, times: Sequence[float]) -> np.ndarray:
    """Evaluate an input (callable of time or constant array) at ``times``."""
    if callable(inputs):
        return np.array([np.asarray(inputs(t), dtype=float) for t in times])
    u = np.asarray(inputs, dtype=float)
    return np.tile(u, (len(times), 1))
