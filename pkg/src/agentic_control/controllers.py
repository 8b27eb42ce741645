"""PID baseline, safety fallback and the closed-loop episode runner."""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Protocol, Sequence

from .twin import (
    DisturbanceProfile,
    HeaterCommand,
    NonFiniteState,
    Trajectory,
    TwinParams,
    TwinState,
    check_command,
    simulate_interval,
)


class ControllerFailure(Exception):
    """Raised by a controller that cannot produce a command this interval."""


class OutOfRange(ValueError):
    pass


# -- PID ----------------------------------------------------------------------

@dataclass(frozen=True)
class PidGains:
    kp: float = 0.05
    ki: float = 0.002
    kd: float = 0.0
    u_min: float = 0.0
    u_max: float = 0.6

    def __post_init__(self):
        if min(self.kp, self.ki, self.kd) < 0:
            raise ValueError("PID gains must be non-negative")
        if not self.u_min < self.u_max:
            raise ValueError(f"u_min {self.u_min} must be below u_max {self.u_max}")


@dataclass(frozen=True)
class PidState:
    integral: float = 0.0
    prev_error: float = 0.0
    initialized: bool = False


def pid_update(gains: PidGains, state: PidState, error: float,
               dt: float) -> tuple[float, PidState]:
    """One PID step with output clamping and conditional integration.

    The integral only accepts the new ``error * dt`` when the unclamped
    output stays inside ``[u_min, u_max]``; otherwise it is frozen.
    """
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    deriv = (error - state.prev_error) / dt if state.initialized else 0.0
    integral = state.integral + error * dt
    u = gains.kp * error + gains.ki * integral + gains.kd * deriv
    if not gains.u_min <= u <= gains.u_max:
        integral = state.integral
        u = gains.kp * error + gains.ki * integral + gains.kd * deriv
    u = min(max(u, gains.u_min), gains.u_max)
    return u, PidState(integral, error, True)


def split_command(u_total: float, per_heater_max: float = 0.3) -> HeaterCommand:
    if not 0 <= u_total <= 2 * per_heater_max:
        raise OutOfRange(f"total power {u_total} outside [0, {2 * per_heater_max}] W")
    half = min(max(u_total / 2, 0.0), per_heater_max)
    return HeaterCommand(half, half)


# -- episode configuration ----------------------------------------------------

def _default_initial() -> TwinState:
    return TwinState(306.15, 306.15, 0.0)


@dataclass(frozen=True)
class EpisodeConfig:
    """Closed-loop experiment settings.  Temperatures in K, times in s.

    The default episode starts both heaters at the setpoint, so the task
    is regulation against the fan disturbance.
    """

    setpoint: float = 306.15
    planning_interval: float = 30.0
    control_dt: float = 1.0
    horizon: float = 900.0
    initial_state: TwinState = field(default_factory=_default_initial)
    params: TwinParams = field(default_factory=TwinParams)
    disturbance: DisturbanceProfile | None = field(default_factory=DisturbanceProfile)
    temp_budget: int = 5
    power_budget: int = 5
    q_lo: float = 0.0
    q_hi: float = 0.3

    def __post_init__(self):
        object.__setattr__(self, "initial_state", TwinState(*self.initial_state))
        if not _is_multiple(self.horizon, self.planning_interval):
            raise ValueError("horizon must be a multiple of planning_interval")
        if not _is_multiple(self.planning_interval, self.control_dt):
            raise ValueError("planning_interval must be a multiple of control_dt")
        if self.temp_budget < 0 or self.power_budget < 0:
            raise ValueError("reprompt budgets must be non-negative")
        if not 0 <= self.q_lo < self.q_hi <= self.params.q_max:
            raise ValueError(f"power bounds [{self.q_lo}, {self.q_hi}] not inside "
                             f"[0, {self.params.q_max}]")

    @property
    def n_intervals(self) -> int:
        return round(self.horizon / self.planning_interval)

    def to_json(self) -> dict:
        return {
            "setpoint": self.setpoint,
            "planning_interval": self.planning_interval,
            "control_dt": self.control_dt,
            "horizon": self.horizon,
            "initial_state": self.initial_state._asdict(),
            "params": self.params.to_json(),
            "disturbance": None if self.disturbance is None else self.disturbance.to_json(),
            "temp_budget": self.temp_budget,
            "power_budget": self.power_budget,
            "q_lo": self.q_lo,
            "q_hi": self.q_hi,
        }

    @classmethod
    def from_json(cls, data: dict) -> "EpisodeConfig":
        data = dict(data)
        if "initial_state" in data:
            s = data["initial_state"]
            data["initial_state"] = TwinState(**s) if isinstance(s, dict) else TwinState(*s)
        if "params" in data:
            data["params"] = TwinParams.from_json(data["params"])
        if "disturbance" in data and data["disturbance"] is not None:
            data["disturbance"] = DisturbanceProfile.from_json(data["disturbance"])
        return cls(**data)


def _is_multiple(a: float, b: float) -> bool:
    n = round(a / b)
    return n >= 1 and math.isclose(n * b, a, rel_tol=1e-9)


# -- controllers --------------------------------------------------------------

class Controller(Protocol):
    """Anything the episode runner can drive.

    ``decide`` returns a :class:`HeaterCommand` (or a decision object with
    ``chosen`` and ``used_fallback`` attributes), or raises
    :class:`ControllerFailure`.  When ``inner_dt`` is not None the runner
    calls ``decide`` every ``inner_dt`` seconds instead of once per
    planning interval.
    """

    name: str
    inner_dt: float | None

    def decide(self, state: TwinState, setpoint: float, interval: float,
               history: Sequence[HeaterCommand]) -> Any: ...


class ZeroController:
    name = "zero"
    inner_dt = None

    def decide(self, state, setpoint, interval, history):
        return HeaterCommand(0.0, 0.0)


class ConstantController:
    inner_dt = None

    def __init__(self, q1: float, q2: float):
        self.command = HeaterCommand(q1, q2)
        self.name = f"constant({q1}, {q2})"

    def decide(self, state, setpoint, interval, history):
        return self.command


class PidController:
    """Average-temperature PID with an equal split between the heaters."""

    name = "pid"

    def __init__(self, gains: PidGains = PidGains(), dt: float = 1.0,
                 per_heater_max: float = 0.3):
        self.gains = gains
        self.inner_dt = dt
        self.per_heater_max = per_heater_max
        self.state = PidState()

    def reset(self) -> None:
        self.state = PidState()

    def decide(self, state, setpoint, interval, history):
        u, self.state = pid_update(self.gains, self.state, setpoint - state.t_avg,
                                   self.inner_dt)
        return split_command(min(u, 2 * self.per_heater_max), self.per_heater_max)


class ScriptedController:
    """Replays a fixed list of outputs; entries may be exceptions to raise."""

    inner_dt = None

    def __init__(self, outputs: Sequence[Any], name: str = "scripted"):
        self.outputs = list(outputs)
        self.name = name
        self._k = 0

    def decide(self, state, setpoint, interval, history):
        out = self.outputs[self._k % len(self.outputs)]
        self._k += 1
        if isinstance(out, BaseException):
            raise out
        return out


def safety_fallback(state: TwinState, config: EpisodeConfig,
                    last_valid: HeaterCommand | None = None) -> HeaterCommand:
    """Stop heating above the setpoint; otherwise repeat the last valid command."""
    if state.t_avg > config.setpoint or last_valid is None:
        return HeaterCommand(0.0, 0.0)
    if not last_valid.within(config.q_lo, config.q_hi):
        return HeaterCommand(0.0, 0.0)
    return HeaterCommand(*last_valid)


# -- episode runner -----------------------------------------------------------

@dataclass
class DecisionRecord:
    index: int
    time: float
    command: HeaterCommand
    used_fallback: bool
    latency_s: float
    n_updates: int = 1
    failure: str | None = None
    detail: dict | None = None

    def to_json(self) -> dict:
        d = asdict(self)
        d["command"] = list(self.command)
        return d


@dataclass
class EpisodeLog:
    config: EpisodeConfig
    controller: str
    trajectory: Trajectory
    decisions: list[DecisionRecord]
    metrics: dict = field(default_factory=dict)

    @property
    def latencies(self) -> list[float]:
        return [d.latency_s for d in self.decisions]

    @property
    def commands(self) -> list[HeaterCommand]:
        return [s.command for s in self.trajectory]

    def to_json(self) -> dict:
        return {
            "controller": self.controller,
            "config": self.config.to_json(),
            "decisions": [d.to_json() for d in self.decisions],
            "metrics": self.metrics,
        }

    def save(self, out_dir: str | Path, stem: str = "episode") -> tuple[Path, Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        js = out_dir / f"{stem}.json"
        csv_path = out_dir / f"{stem}_trajectory.csv"
        js.write_text(json.dumps(self.to_json(), indent=2) + "\n")
        self.trajectory.to_csv(csv_path)
        return js, csv_path


def _interpret(out: Any, q_max: float) -> tuple[HeaterCommand | None, dict | None, str | None]:
    """Map a controller output to (command or None, detail, failure reason)."""
    detail = None
    if hasattr(out, "chosen") and hasattr(out, "used_fallback"):
        detail = out.to_json() if hasattr(out, "to_json") else None
        if out.used_fallback or out.chosen is None:
            return None, detail, "controller deferred to fallback"
        out = out.chosen
    try:
        q1, q2 = out
        return check_command(HeaterCommand(q1, q2), q_max), detail, None
    except Exception as exc:
        return None, detail, f"invalid command {out!r}: {exc}"


def run_episode(config: EpisodeConfig, controller: Controller,
                audit=None) -> EpisodeLog:
    """Drive ``controller`` against the twin for ``config.horizon`` seconds.

    Commands are held for one planning interval (or ``controller.inner_dt``).
    The plant is frozen while the controller thinks.  Any controller
    failure or out-of-bounds command is replaced by :func:`safety_fallback`.
    """
    from .metrics import control_metrics

    state = config.initial_state
    traj = Trajectory()
    decisions: list[DecisionRecord] = []
    history: list[HeaterCommand] = []
    last_valid: HeaterCommand | None = None
    sub_dt = controller.inner_dt or config.planning_interval
    if not _is_multiple(config.planning_interval, sub_dt):
        raise ValueError("controller inner_dt must divide the planning interval")
    if not _is_multiple(sub_dt, config.control_dt):
        raise ValueError("control_dt must divide the controller update period")
    n_sub = round(config.planning_interval / sub_dt)

    for k in range(config.n_intervals):
        record = None
        for j in range(n_sub):
            t0 = time.perf_counter()
            failure = None
            try:
                out = controller.decide(state, config.setpoint, sub_dt, tuple(history))
                cmd, detail, failure = _interpret(out, config.q_hi)
            except ControllerFailure as exc:
                cmd, detail, failure = None, None, f"controller failure: {exc}"
            except NonFiniteState:
                raise
            except Exception as exc:
                cmd, detail, failure = None, None, f"{type(exc).__name__}: {exc}"
            latency = time.perf_counter() - t0
            fallback = cmd is None or not cmd.within(config.q_lo, config.q_hi)
            if fallback:
                cmd = safety_fallback(state, config, last_valid)
                if audit is not None:
                    audit.write({"event": "fallback", "interval": k, "time": state.time,
                                 "reason": failure, "command": list(cmd)})
            else:
                last_valid = cmd
            history.append(cmd)
            if record is None:
                record = DecisionRecord(k, state.time, cmd, fallback, latency,
                                        failure=failure, detail=detail)
            else:
                record.n_updates += 1
                record.latency_s += latency
                record.used_fallback = record.used_fallback or fallback
            seg = simulate_interval(state, cmd, sub_dt, config.control_dt,
                                    config.params, config.disturbance)
            traj.extend(seg)
            state = seg.final_state
        decisions.append(record)

    log = EpisodeLog(config, controller.name, traj, decisions)
    log.metrics = control_metrics(log)
    return log
