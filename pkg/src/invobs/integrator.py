"""Group-preserving integration of state, observer and error flows.

Two schemes are available. ``lie-euler`` applies the body and spatial
pieces of a :class:`~invobs.lie_core.Velocity` on their own sides,
``x <- exp(dt s) x exp(dt b)``. ``rkmk4`` is the classical four-stage
Runge-Kutta-Munthe-Kaas method on the left-trivialized flow
``x = x0 exp(theta)``, with ``dexp^-1`` truncated after the double bracket.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .lie_core import GroupElement, LieGroup, Velocity, log
from .observer import ObserverSpec, error, error_rhs, observer_rhs
from .systems import InvariantSystem, dynamics_rhs, output

__all__ = [
    "IntegratorConfig",
    "StepRejected",
    "Trajectory",
    "integrate",
    "integrate_error",
    "step_group",
]

METHODS = ("lie-euler", "rkmk4")


class StepRejected(FloatingPointError):
    """The right-hand side produced a non-finite value."""


@dataclass(frozen=True)
class IntegratorConfig:
    method: str = "rkmk4"
    dt: float = 1e-3
    renormalize: bool = True

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")


def _finite(v: np.ndarray) -> np.ndarray:
    # any inf/nan poisons the dot product
    if not math.isfinite(float(v.dot(v))):
        raise StepRejected(f"non-finite right-hand side {v}")
    return v


# A product-state rhs maps (t, [x_1..x_m]) to one Velocity per component.
ProductRhs = Callable[[float, Sequence[np.ndarray]], Sequence[Velocity]]


def _step_product(groups: Sequence[LieGroup], xs: Sequence[np.ndarray], rhs: ProductRhs, t: float, cfg: IntegratorConfig):
    h = cfg.dt
    m = len(groups)
    if cfg.method == "lie-euler":
        vels = rhs(t, xs)
        out = []
        for g, x, v in zip(groups, xs, vels):
            if v.body is not None:
                x = g._compose(x, g._exp(h * _finite(np.asarray(v.body, dtype=float))))
            if v.spatial is not None:
                x = g._compose(g._exp(h * _finite(np.asarray(v.spatial, dtype=float))), x)
            out.append(g._normalize(x) if cfg.renormalize else x)
        return out

    def body(tau, states):
        return [_finite(v.to_body(g, s)) for g, s, v in zip(groups, states, rhs(tau, states))]

    def advance(theta):
        return [g._compose(x, g._exp(th)) for g, x, th in zip(groups, xs, theta)]

    k1 = [h * w for w in body(t, xs)]
    half = [0.5 * k for k in k1]
    k2 = [h * g._dexpinv(th, w) for g, th, w in zip(groups, half, body(t + 0.5 * h, advance(half)))]
    half = [0.5 * k for k in k2]
    k3 = [h * g._dexpinv(th, w) for g, th, w in zip(groups, half, body(t + 0.5 * h, advance(half)))]
    k4 = [h * g._dexpinv(th, w) for g, th, w in zip(groups, k3, body(t + h, advance(k3)))]
    theta = [(k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0 for i in range(m)]
    new = advance(theta)
    if cfg.renormalize:
        new = [g._normalize(x) for g, x in zip(groups, new)]
    return new


def step_group(
    x: GroupElement,
    rhs: Callable[[float, GroupElement], Velocity],
    t: float,
    cfg: IntegratorConfig = IntegratorConfig(),
) -> GroupElement:
    """Advance ``x`` by one step of ``cfg.dt`` under ``dx/dt = rhs(t, x)``."""
    grp = x.group

    def product_rhs(tau, states):
        return [rhs(tau, GroupElement(grp, states[0]))]

    return GroupElement(grp, _step_product([grp], [x.data], product_rhs, t, cfg)[0])


def _as_input(inputs) -> Callable[[float], np.ndarray]:
    if callable(inputs):
        return lambda t: np.asarray(inputs(t), dtype=float)
    const = np.asarray(inputs, dtype=float)
    return lambda t: const


def _n_steps(duration: float, dt: float) -> int:
    n = int(round(duration / dt))
    if n < 1:
        raise ValueError(f"duration {duration} shorter than one step of {dt}")
    return n


@dataclass
class Trajectory:
    """Time series from :func:`integrate`; rows are parameter vectors."""

    group: LieGroup
    side: str
    t: np.ndarray
    x: np.ndarray
    u: np.ndarray
    y: np.ndarray
    xhat: Optional[np.ndarray] = None
    eta: Optional[np.ndarray] = None
    yhat: Optional[np.ndarray] = None

    def states(self) -> list[GroupElement]:
        return [GroupElement(self.group, r) for r in self.x]

    def estimates(self) -> list[GroupElement]:
        return [GroupElement(self.group, r) for r in self.xhat]

    def errors(self) -> list[GroupElement]:
        return [GroupElement(self.group, r) for r in self.eta]

    def xi(self) -> np.ndarray:
        """Exponential coordinates of the invariant error at every sample."""
        return np.array([log(GroupElement(self.group, r)) for r in self.eta])


def integrate(
    sys: InvariantSystem,
    spec: Optional[ObserverSpec],
    x0: GroupElement,
    xhat0: Optional[GroupElement],
    inputs,
    duration: float,
    cfg: IntegratorConfig = IntegratorConfig(),
    noise_std=None,
    seed: Optional[int] = None,
) -> Trajectory:
    """Integrate the true system and, optionally, an observer fed by its output.

    ``inputs`` is a callable of time (e.g. :class:`~invobs.systems.InputSignal`)
    or a constant vector. ``noise_std`` adds Gaussian noise to the measured
    output, drawn once per step from ``default_rng(seed)``.
    """
    grp = sys.group
    u_of = _as_input(inputs)
    n = _n_steps(duration, cfg.dt)
    with_obs = spec is not None and xhat0 is not None
    rng = np.random.default_rng(seed)
    noise_std = None if noise_std is None else np.broadcast_to(np.asarray(noise_std, dtype=float), (sys.output_dim,))
    noise = np.zeros(sys.output_dim)

    def rhs(tau, states):
        u = u_of(tau)
        x = GroupElement(grp, states[0])
        vels = [Velocity(body=dynamics_rhs(sys, x, u))]
        if with_obs:
            y = output(sys, x, u) + noise
            vels.append(observer_rhs(sys, spec, GroupElement(grp, states[1]), u, y))
        return vels

    states = [x0.data] + ([xhat0.data] if with_obs else [])
    groups = [grp] * len(states)
    ts = np.arange(n + 1) * cfg.dt
    xs, us, ys = [], [], []
    xhats, etas, yhats = [], [], []
    for k in range(n + 1):
        t = float(ts[k])
        u = u_of(t)
        if noise_std is not None:
            noise = rng.normal(scale=noise_std)
        x = GroupElement(grp, states[0])
        xs.append(states[0])
        us.append(u)
        ys.append(output(sys, x, u) + noise)
        if with_obs:
            xh = GroupElement(grp, states[1])
            xhats.append(states[1])
            etas.append(error(x, xh, sys.side).data)
            yhats.append(output(sys, xh, u))
        if k < n:
            states = _step_product(groups, states, rhs, t, cfg)
    traj = Trajectory(grp, sys.side, ts, np.array(xs), np.array(us), np.array(ys))
    if with_obs:
        traj.xhat, traj.eta, traj.yhat = np.array(xhats), np.array(etas), np.array(yhats)
    return traj


def integrate_error(
    sys: InvariantSystem,
    spec: ObserverSpec,
    eta0: GroupElement,
    invariant_input=None,
    duration: float = 10.0,
    cfg: IntegratorConfig = IntegratorConfig(),
) -> tuple[np.ndarray, np.ndarray]:
    """Integrate the closed-form error flow directly.

    ``invariant_input`` supplies ``I(x(t), u(t))`` (callable or constant);
    it is ignored on the right side. Returns ``(t, eta)`` with ``eta`` rows
    as parameter vectors.
    """
    grp = sys.group
    n = _n_steps(duration, cfg.dt)
    inv_of = None if invariant_input is None else _as_input(invariant_input)

    def rhs(tau, states):
        inv = None if inv_of is None else inv_of(tau)
        return [error_rhs(sys, spec, GroupElement(grp, states[0]), inv)]

    ts = np.arange(n + 1) * cfg.dt
    out = [eta0.data]
    state = [eta0.data]
    for k in range(n):
        state = _step_product([grp], state, rhs, float(ts[k]), cfg)
        out.append(state[0])
    return ts, np.array(out)
