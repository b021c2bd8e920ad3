"""Invariant (symmetry-preserving) observers on Lie groups."""

from .examples import (
    AttitudeConfig,
    CarConfig,
    build_attitude_system,
    build_car_system,
    build_corrupted_system,
    build_reference_system,
    default_attitude_observer,
)
from .groups import r2, rot_x, rot_y, rot_z, se2, so3
from .integrator import IntegratorConfig, Trajectory, integrate, integrate_error, step_group
from .lie_core import (
    AtCutLocus,
    GroupElement,
    GroupMismatch,
    SingularBasis,
    Velocity,
    ad_matrix,
    adjoint,
    bracket,
    compose,
    exp,
    inverse,
    log,
    structure_constants,
)
from .observer import (
    LinearizedPair,
    NotObservable,
    ObserverSpec,
    design_gain_adjoint,
    design_gain_pole,
    error,
    error_rhs,
    linearize,
    observability_check,
    observer_rhs,
    stability_check,
)
from .sim import NumericError, ParseError, SimRecord, ValidationError, read_csv, run_scenario
from .systems import InputSignal, InvariantSystem, check_equivariance, dynamics_rhs, output
from .trajectories import PermanentTrajectory, is_permanent, permanent_state, required_input

__version__ = "0.1.0"

__all__ = [
    "AtCutLocus",
    "AttitudeConfig",
    "CarConfig",
    "GroupElement",
    "GroupMismatch",
    "InputSignal",
    "IntegratorConfig",
    "InvariantSystem",
    "LinearizedPair",
    "NotObservable",
    "NumericError",
    "ObserverSpec",
    "ParseError",
    "PermanentTrajectory",
    "SimRecord",
    "SingularBasis",
    "Trajectory",
    "ValidationError",
    "Velocity",
    "ad_matrix",
    "adjoint",
    "bracket",
    "build_attitude_system",
    "build_car_system",
    "build_corrupted_system",
    "build_reference_system",
    "check_equivariance",
    "compose",
    "default_attitude_observer",
    "design_gain_adjoint",
    "design_gain_pole",
    "dynamics_rhs",
    "error",
    "error_rhs",
    "exp",
    "integrate",
    "integrate_error",
    "inverse",
    "is_permanent",
    "linearize",
    "log",
    "observability_check",
    "observer_rhs",
    "output",
    "permanent_state",
    "r2",
    "read_csv",
    "required_input",
    "rot_x",
    "rot_y",
    "rot_z",
    "run_scenario",
    "se2",
    "so3",
    "stability_check",
    "step_group",
    "structure_constants",
]
