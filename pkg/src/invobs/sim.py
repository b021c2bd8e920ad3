"""Scenario files, experiment execution, CSV records and the property suite.

Scenarios are TOML documents; ``docs/scenario_format.md`` gives the grammar.
All numbers written to CSV use 17 significant digits so files round-trip
exactly, and every source of randomness is derived from the scenario seed.
"""

from __future__ import annotations

import io
import json
import math
import os
import sys as _sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional

import numpy as np

if _sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10 only
    import tomli as tomllib

from .examples import (
    AttitudeConfig,
    build_attitude_system,
    build_car_system,
    build_corrupted_system,
    build_reference_system,
)
from .integrator import IntegratorConfig, StepRejected, Trajectory, integrate
from .lie_core import AtCutLocus, GroupElement, compose, exp, log
from .observer import (
    NotObservable,
    ObserverSpec,
    design_gain_adjoint,
    design_gain_pole,
    linearize,
    observer_rhs,
)
from .systems import InputSignal, InvariantSystem, check_equivariance, dynamics_rhs, output
from .trajectories import is_permanent

__all__ = [
    "EXIT_NUMERIC",
    "EXIT_OK",
    "EXIT_PARSE",
    "EXIT_PROPERTY",
    "EXIT_VALIDATION",
    "NumericError",
    "ParseError",
    "PropertyResult",
    "Scenario",
    "ScenarioError",
    "SimRecord",
    "ValidationError",
    "load_scenario",
    "make_system",
    "property_suite",
    "read_csv",
    "run_scenario",
    "simulate",
    "summary_text",
]

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_NUMERIC = 4
EXIT_PROPERTY = 5

SYSTEMS = ("attitude", "attitude-mag", "car", "custom-reference", "corrupted")


class ScenarioError(Exception):
    exit_code = 1


class ParseError(ScenarioError):
    exit_code = EXIT_PARSE


class ValidationError(ScenarioError):
    exit_code = EXIT_VALIDATION


class NumericError(ScenarioError):
    exit_code = EXIT_NUMERIC


# --------------------------------------------------------------------------
# systems by name


def make_system(name: str, attitude: Optional[dict] = None) -> InvariantSystem:
    attitude = dict(attitude or {})
    if name in ("attitude", "attitude-mag"):
        cfg = AttitudeConfig(
            G=tuple(attitude.get("gravity", (0.0, 0.0, 9.81))),
            dip_deg=float(attitude.get("dip_deg", AttitudeConfig.dip_deg)),
            use_accelerometer=not (name == "attitude-mag" or attitude.get("magnetometer_only", False)),
        )
        return build_attitude_system(cfg)
    if name == "car":
        return build_car_system()
    if name in ("custom-reference", "reference"):
        return build_reference_system()
    if name == "corrupted":
        return build_corrupted_system()
    raise ValidationError(f"unknown system {name!r}; expected one of {SYSTEMS}")


def default_ubar(sys: InvariantSystem) -> np.ndarray:
    if sys.name == "car":
        return np.array([1.0, 0.0])
    return np.zeros(sys.input_dim)


def gain_weights(sys: InvariantSystem, K) -> np.ndarray:
    """Expand ``K`` to one weight per output component.

    For the attitude system a pair ``(K_G, K_B)`` weights the two sensors.
    """
    K = np.atleast_1d(np.asarray(K, dtype=float))
    if sys.name == "attitude" and K.size == 2:
        return np.repeat(K, 3)
    if K.size == 1:
        return np.full(sys.output_dim, K[0])
    if K.size != sys.output_dim:
        raise ValidationError(f"K needs 1 or {sys.output_dim} entries for {sys.name}, got {K.size}")
    return K


# --------------------------------------------------------------------------
# scenario parsing

_TOP_KEYS = {"system", "duration", "dt", "seed", "stride", "method", "initial", "input", "observer", "noise", "attitude"}
_SECTION_KEYS = {
    "initial": {"state", "estimate", "error", "error_angle_deg", "error_axis"},
    "input": {"preset", "value", "amplitude", "omega", "phase", "times", "values", "interp"},
    "observer": {"gain", "K", "matrix", "poles", "ubar"},
    "noise": {"std"},
    "attitude": {"dip_deg", "gravity", "magnetometer_only"},
}


@dataclass
class Scenario:
    system: str
    duration: float
    dt: float
    seed: int = 0
    stride: int = 1
    method: str = "rkmk4"
    initial: dict = field(default_factory=dict)
    input: dict = field(default_factory=dict)
    observer: dict = field(default_factory=dict)
    noise: dict = field(default_factory=dict)
    attitude: dict = field(default_factory=dict)
    source: str = "<scenario>"

    @classmethod
    def from_dict(cls, doc: dict, source: str = "<scenario>") -> "Scenario":
        unknown = set(doc) - _TOP_KEYS
        if unknown:
            raise ValidationError(f"{source}: unknown keys {sorted(unknown)}")
        for section, keys in _SECTION_KEYS.items():
            sec = doc.get(section, {})
            if not isinstance(sec, dict):
                raise ValidationError(f"{source}: [{section}] must be a table")
            bad = set(sec) - keys
            if bad:
                raise ValidationError(f"{source}: unknown keys in [{section}]: {sorted(bad)}")
        for key in ("system", "duration", "dt"):
            if key not in doc:
                raise ValidationError(f"{source}: missing required key {key!r}")
        sc = cls(
            system=doc["system"],
            duration=doc["duration"],
            dt=doc["dt"],
            seed=doc.get("seed", 0),
            stride=doc.get("stride", 1),
            method=doc.get("method", "rkmk4"),
            initial=doc.get("initial", {}),
            input=doc.get("input", {}),
            observer=doc.get("observer", {}),
            noise=doc.get("noise", {}),
            attitude=doc.get("attitude", {}),
            source=source,
        )
        sc.validate()
        return sc

    def _fail(self, msg: str):
        raise ValidationError(f"{self.source}: {msg}")

    def validate(self):
        if self.system not in SYSTEMS:
            self._fail(f"system must be one of {SYSTEMS}, got {self.system!r}")
        for key in ("duration", "dt"):
            v = getattr(self, key)
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not v > 0 or not math.isfinite(v):
                self._fail(f"{key} must be a positive number, got {v!r}")
        if isinstance(self.stride, bool) or not isinstance(self.stride, int) or self.stride < 1:
            self._fail(f"stride must be an integer >= 1, got {self.stride!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or self.seed < 0:
            self._fail(f"seed must be a non-negative integer, got {self.seed!r}")
        if self.method not in ("rkmk4", "lie-euler"):
            self._fail(f"method must be 'rkmk4' or 'lie-euler', got {self.method!r}")
        if self.duration < self.dt:
            self._fail("duration shorter than one step")
        sys = self.build_system()
        n, m, p = sys.dim, sys.input_dim, sys.output_dim
        self._vector(self.initial.get("state", [0.0] * n), n, "initial.state")
        given = [k for k in ("estimate", "error", "error_angle_deg") if k in self.initial]
        if len(given) > 1:
            self._fail(f"initial: give only one of estimate / error / error_angle_deg, got {given}")
        if "estimate" in self.initial:
            self._vector(self.initial["estimate"], n, "initial.estimate")
        if "error" in self.initial:
            self._vector(self.initial["error"], n, "initial.error")
        if "error_axis" in self.initial and self.initial["error_axis"] != "random":
            self._vector(self.initial["error_axis"], n, "initial.error_axis")
        self._validate_input(m)
        self._validate_observer(sys, n, p)
        if "std" in self.noise:
            std = np.atleast_1d(np.asarray(self.noise["std"], dtype=float))
            if np.any(std < 0) or not np.all(np.isfinite(std)):
                self._fail("noise.std must be non-negative")

    def _vector(self, value, size: int, name: str) -> np.ndarray:
        try:
            arr = np.asarray(value, dtype=float)
        except (TypeError, ValueError):
            self._fail(f"{name} must be a numeric array")
        if arr.shape != (size,):
            self._fail(f"{name} must have {size} entries, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            self._fail(f"{name} must be finite")
        return arr

    def _validate_input(self, m: int):
        preset = self.input.get("preset", "constant")
        if preset == "constant":
            self._vector(self.input.get("value", [0.0] * m), m, "input.value")
        elif preset == "sinusoid":
            for key in ("value", "amplitude", "omega", "phase"):
                self._vector(self.input.get(key, [0.0] * m), m, f"input.{key}")
        elif preset == "table":
            try:
                InputSignal(self.input.get("times", []), self.input.get("values", []), self.input.get("interp", "zoh"))
            except (ValueError, TypeError) as exc:
                self._fail(f"input table: {exc}")
            if np.asarray(self.input["values"], dtype=float).reshape(len(self.input["times"]), -1).shape[1] != m:
                self._fail(f"input table values need {m} columns")
        else:
            self._fail(f"input.preset must be constant, sinusoid or table, got {preset!r}")

    def _validate_observer(self, sys: InvariantSystem, n: int, p: int):
        gain = self.observer.get("gain", "none")
        if gain == "none":
            return
        if gain == "adjoint":
            K = np.atleast_1d(np.asarray(self.observer.get("K", 1.0), dtype=float))
            if np.any(K < 0) or not np.all(np.isfinite(K)):
                self._fail("observer.K must be non-negative")
            try:
                gain_weights(sys, K)
            except ValidationError as exc:
                self._fail(f"observer.{exc}")
        elif gain == "matrix":
            mat = np.asarray(self.observer.get("matrix", []), dtype=float)
            if mat.shape != (n, p):
                self._fail(f"observer.matrix must be {n}x{p}, got {mat.shape}")
        elif gain == "poles":
            poles = self.observer.get("poles", [])
            if len(poles) != n or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in poles):
                self._fail(f"observer.poles needs {n} real numbers")
            if "ubar" in self.observer:
                self._vector(self.observer["ubar"], sys.input_dim, "observer.ubar")
        else:
            self._fail(f"observer.gain must be none, adjoint, matrix or poles, got {gain!r}")

    # -- construction -------------------------------------------------------
    def build_system(self) -> InvariantSystem:
        return make_system(self.system, self.attitude)

    def build_inputs(self) -> Callable[[float], np.ndarray]:
        preset = self.input.get("preset", "constant")
        m = self.build_system().input_dim
        if preset == "constant":
            value = np.asarray(self.input.get("value", [0.0] * m), dtype=float)
            return lambda t: value
        if preset == "sinusoid":
            off, amp, om, ph = (np.asarray(self.input.get(k, [0.0] * m), dtype=float) for k in ("value", "amplitude", "omega", "phase"))
            return lambda t: off + amp * np.sin(om * t + ph)
        return InputSignal(self.input["times"], self.input["values"], self.input.get("interp", "zoh"))

    def initial_states(self, sys: InvariantSystem) -> tuple[GroupElement, Optional[GroupElement]]:
        grp = sys.group
        x0 = exp(grp, np.asarray(self.initial.get("state", [0.0] * grp.dim), dtype=float))
        if "estimate" in self.initial:
            return x0, exp(grp, np.asarray(self.initial["estimate"], dtype=float))
        if "error" in self.initial:
            xi = np.asarray(self.initial["error"], dtype=float)
        elif "error_angle_deg" in self.initial:
            axis = self.initial.get("error_axis", "random")
            if axis == "random":
                rng = np.random.default_rng(np.random.SeedSequence(self.seed).spawn(2)[1])
                axis = rng.normal(size=grp.dim)
            axis = np.asarray(axis, dtype=float)
            xi = math.radians(float(self.initial["error_angle_deg"])) * axis / np.linalg.norm(axis)
        else:
            return x0, x0
        eta = exp(grp, xi)
        # eta = x^-1 xhat (left) or xhat x^-1 (right)
        return x0, (compose(x0, eta) if sys.side == "left" else compose(eta, x0))

    def build_observer(self, sys: InvariantSystem, inputs) -> Optional[ObserverSpec]:
        gain = self.observer.get("gain", "none")
        if gain == "none":
            return None
        ubar = np.asarray(self.observer.get("ubar", inputs(0.0)), dtype=float)
        if gain == "adjoint":
            return design_gain_adjoint(sys, gain_weights(sys, self.observer.get("K", 1.0)), ubar)
        if gain == "matrix":
            return ObserverSpec(np.asarray(self.observer["matrix"], dtype=float), side=sys.side)
        pair = linearize(sys, None, ubar)
        return ObserverSpec(design_gain_pole(pair.A, pair.C, self.observer["poles"]), side=sys.side)

    def noise_std(self, sys: InvariantSystem) -> Optional[np.ndarray]:
        if "std" not in self.noise:
            return None
        std = np.atleast_1d(np.asarray(self.noise["std"], dtype=float))
        if sys.name == "attitude" and std.size == 2:
            return np.repeat(std, 3)
        return np.broadcast_to(std, (sys.output_dim,)) if std.size == 1 else std


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"{path}: cannot read scenario: {exc}") from exc
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        # the decoder message carries "(at line L, column C)"
        raise ParseError(f"{path}: {exc}") from exc
    return Scenario.from_dict(doc, source=str(path))


# --------------------------------------------------------------------------
# records


def _fmt(v: float) -> str:
    return "%.17g" % v


@dataclass
class SimRecord:
    columns: list[str]
    rows: np.ndarray

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=float).reshape(-1, len(self.columns))

    def __eq__(self, other):
        return (
            isinstance(other, SimRecord)
            and self.columns == other.columns
            and self.rows.shape == other.rows.shape
            and bool(np.array_equal(self.rows, other.rows, equal_nan=True))
        )

    def column(self, name: str) -> np.ndarray:
        return self.rows[:, self.columns.index(name)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(self.columns) + "\n")
        for row in self.rows:
            buf.write(",".join(_fmt(v) for v in row) + "\n")
        return buf.getvalue()

    def write(self, path):
        write_atomic(path, self.to_csv())


def write_atomic(path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_csv(path_or_text) -> SimRecord:
    text = path_or_text
    if isinstance(path_or_text, Path) or (isinstance(path_or_text, str) and "\n" not in path_or_text):
        text = Path(path_or_text).read_text()
    lines = [ln for ln in text.splitlines() if ln]
    if not lines:
        raise ParseError("empty CSV")
    columns = lines[0].split(",")
    rows = [[float(v) for v in ln.split(",")] for ln in lines[1:]]
    for k, r in enumerate(rows, start=2):
        if len(r) != len(columns):
            raise ParseError(f"CSV line {k}: {len(r)} fields, header has {len(columns)}")
    return SimRecord(columns, np.array(rows, dtype=float).reshape(-1, len(columns)))


def record_from_trajectory(sys: InvariantSystem, traj: Trajectory, stride: int = 1) -> SimRecord:
    grp = sys.group
    idx = list(range(0, len(traj.t), stride))
    if idx[-1] != len(traj.t) - 1:
        idx.append(len(traj.t) - 1)
    idx = np.array(idx)
    p = sys.output_dim
    cols = ["t"] + [f"x_{n}" for n in grp.param_names]
    blocks = [traj.t[idx, None], traj.x[idx]]
    if traj.eta is not None:
        xi = np.array([log(GroupElement(grp, traj.eta[k])) for k in idx])
        cols += [f"xhat_{n}" for n in grp.param_names]
        cols += [f"xi_{i + 1}" for i in range(grp.dim)] + ["xi_norm"]
        blocks += [traj.xhat[idx], xi, np.linalg.norm(xi, axis=1)[:, None]]
    cols += [f"y_{i + 1}" for i in range(p)]
    blocks.append(traj.y[idx])
    if traj.yhat is not None:
        cols += [f"yhat_{i + 1}" for i in range(p)]
        blocks.append(traj.yhat[idx])
    return SimRecord(cols, np.hstack(blocks))


# --------------------------------------------------------------------------
# running


def decay_rate(t: np.ndarray, xi_norm: np.ndarray, floor: float = 1e-10) -> Optional[float]:
    """Exponential decay rate fitted on the second half of the run."""
    mask = (t >= t[-1] / 2) & (xi_norm > floor)
    if mask.sum() < 3:
        return None
    slope = np.polyfit(t[mask], np.log(xi_norm[mask]), 1)[0]
    return float(-slope)


def simulate(sc: Scenario) -> tuple[SimRecord, dict]:
    sys = sc.build_system()
    inputs = sc.build_inputs()
    try:
        spec = sc.build_observer(sys, inputs)
        x0, xhat0 = sc.initial_states(sys)
        traj = integrate(
            sys,
            spec,
            x0,
            xhat0 if spec is not None else None,
            inputs,
            sc.duration,
            IntegratorConfig(method=sc.method, dt=sc.dt),
            noise_std=sc.noise_std(sys),
            seed=np.random.SeedSequence(sc.seed).spawn(2)[0],
        )
        record = record_from_trajectory(sys, traj, sc.stride)
    except (AtCutLocus, StepRejected, NotObservable, FloatingPointError) as exc:
        raise NumericError(f"{sc.source}: {type(exc).__name__}: {exc}") from exc
    permanent, dev = is_permanent(sys, traj.states(), traj.u)
    summary: dict[str, Any] = {
        "scenario": sc.source,
        "system": sys.name,
        "steps": int(len(traj.t) - 1),
        "rows": int(record.rows.shape[0]),
        "permanent": bool(permanent),
        "permanence_deviation": dev,
    }
    if spec is not None:
        xi_norm = record.column("xi_norm")
        summary["final_xi_norm"] = float(xi_norm[-1])
        summary["max_xi_norm"] = float(np.max(xi_norm))
        summary["decay_rate"] = decay_rate(record.column("t"), xi_norm)
    return record, summary


def run_scenario(path) -> tuple[SimRecord, dict]:
    return simulate(load_scenario(path))


# --------------------------------------------------------------------------
# property suite


@dataclass
class PropertyResult:
    name: str
    deviation: float
    tol: float
    expect_below: bool = True

    @property
    def passed(self) -> bool:
        return self.deviation < self.tol if self.expect_below else self.deviation > self.tol

    def line(self) -> str:
        rel = "<" if self.expect_below else ">"
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}  dev={self.deviation:.3e} ({rel} {self.tol:.0e})"


def _trace_gap(a: np.ndarray, b: np.ndarray, sys: InvariantSystem) -> float:
    return max(float(np.max(np.abs(sys.group._matrix(p) - sys.group._matrix(q)))) for p, q in zip(a, b))


def property_suite(name: str, samples: int = 50, seed: int = 0, duration: float = 2.0) -> list[PropertyResult]:
    """Randomized identity checks plus the trajectory-(in)dependence runs."""
    sys = make_system(name)
    rng = np.random.default_rng(seed)
    report = check_equivariance(sys, samples=samples, seed=seed)
    results = [PropertyResult(f"{sys.name}:{k}", v, report.tol) for k, v in report.deviations.items()]
    if not report.passed:
        return results

    grp = sys.group
    ubar = default_ubar(sys)
    if sys.side == "right":
        spec = design_gain_adjoint(sys, 1.0)
    else:
        spec = ObserverSpec(-linearize(sys, None, ubar).C.T, side="left")

    worst = 0.0
    for _ in range(samples):
        xh, u = grp.random(rng), rng.normal(size=sys.input_dim)
        y = output(sys, xh, u)
        v = observer_rhs(sys, spec, xh, u, y).to_body(grp, xh.data)
        worst = max(worst, float(np.max(np.abs(v - dynamics_rhs(sys, xh, u)))))
    results.append(PropertyResult(f"{sys.name}:pre_observer", worst, 1e-10))

    cfg = IntegratorConfig(dt=1e-3)
    xi0 = 0.3 * rng.normal(size=grp.dim)

    def eta_trace(x0, inputs):
        eta = exp(grp, xi0)
        xhat0 = compose(x0, eta) if sys.side == "left" else compose(eta, x0)
        return integrate(sys, spec, x0, xhat0, inputs, duration, cfg).eta

    x_a, x_b = grp.random(rng), grp.random(rng)
    if sys.side == "right":
        w1 = lambda t: np.array([np.sin(t), 0.5, -0.3 * t])
        w2 = lambda t: np.array([1.0, -np.cos(3 * t), 0.2])
        gap = _trace_gap(eta_trace(x_a, w1), eta_trace(x_b, w2), sys)
        results.append(PropertyResult(f"{sys.name}:autonomous_error", gap, 1e-7))
    else:
        u1 = lambda t: np.array([1.0 + 0.3 * np.sin(t), 0.5 * np.cos(0.7 * t)])
        u2 = lambda t: np.array([0.5, -0.8 + 0.1 * t])
        ref = eta_trace(x_a, u1)
        results.append(PropertyResult(f"{sys.name}:trajectory_independence", _trace_gap(ref, eta_trace(x_b, u1), sys), 1e-7))
        if sys.name == "car":
            results.append(PropertyResult(f"{sys.name}:input_dependence", _trace_gap(ref, eta_trace(x_a, u2), sys), 1e-3, expect_below=False))
    return results


def summary_text(summary: dict) -> str:
    return json.dumps(summary, sort_keys=True, indent=2, default=float)
