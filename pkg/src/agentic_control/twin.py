"""Digital twin of two independent heaters.

Each heater follows the lumped energy balance

    m * Cp * dT/dt = q - U*A*(T - Ta) - eps*sigma*A*(T**4 - Ta**4)

with temperatures in kelvin and heater power in watts.  A fan disturbance
scales the convective coefficient of one heater.  The heaters do not
exchange heat.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterator, NamedTuple

import numpy as np


class TwinError(Exception):
    pass


class NonFiniteState(TwinError, FloatingPointError):
    pass


class BracketFailure(TwinError, ValueError):
    pass


class CommandOutOfRange(TwinError, ValueError):
    pass


@dataclass(frozen=True)
class TwinParams:
    mass: float = 0.004
    heat_capacity: float = 500.0
    area: float = 1.2e-3
    htc: float = 10.0
    emissivity: float = 0.9
    stefan_boltzmann: float = 5.67e-8
    ambient: float = 293.15
    q_max: float = 0.3

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be finite and > 0, got {value}")
        if self.emissivity > 1:
            raise ValueError(f"emissivity must be <= 1, got {self.emissivity}")

    @property
    def thermal_mass(self) -> float:
        return self.mass * self.heat_capacity

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, data: dict) -> "TwinParams":
        return cls(**data)


class TwinState(NamedTuple):
    t1: float
    t2: float
    time: float = 0.0

    @property
    def t_avg(self) -> float:
        return 0.5 * (self.t1 + self.t2)


class HeaterCommand(NamedTuple):
    """Heater powers in watts.

    Any pair of numbers can be held here so that validation gates can
    inspect implausible proposals; the plant rejects out-of-range values.
    """

    q1: float
    q2: float

    @property
    def total(self) -> float:
        return self.q1 + self.q2

    def within(self, lo: float, hi: float) -> bool:
        return lo <= self.q1 <= hi and lo <= self.q2 <= hi

    def clamped(self, lo: float, hi: float) -> "HeaterCommand":
        return HeaterCommand(min(max(self.q1, lo), hi), min(max(self.q2, lo), hi))


def check_command(cmd: HeaterCommand, q_max: float) -> HeaterCommand:
    cmd = HeaterCommand(float(cmd[0]), float(cmd[1]))
    if not (math.isfinite(cmd.q1) and math.isfinite(cmd.q2)) or not cmd.within(0.0, q_max):
        raise CommandOutOfRange(f"command {tuple(cmd)} outside [0, {q_max}] W")
    return cmd


@dataclass(frozen=True)
class DisturbanceProfile:
    """Fan cooling on one heater, modelled as a multiplier on its htc.

    ``active_window`` is ``(start, end)`` in seconds; ``end=None`` leaves
    the window open.
    """

    fan_on_heater: int = 1
    u_multiplier: float = 1.5
    active_window: tuple[float, float | None] = (0.0, None)

    def __post_init__(self):
        if self.fan_on_heater not in (1, 2):
            raise ValueError(f"fan_on_heater must be 1 or 2, got {self.fan_on_heater}")
        if not self.u_multiplier >= 1:
            raise ValueError(f"u_multiplier must be >= 1, got {self.u_multiplier}")
        start, end = self.active_window
        if end is not None and end < start:
            raise ValueError(f"active_window {self.active_window} is not ordered")
        object.__setattr__(self, "active_window", (float(start), end))

    def active(self, time: float) -> bool:
        start, end = self.active_window
        return time >= start and (end is None or time <= end)

    def htc_factors(self, time: float) -> tuple[float, float]:
        if not self.active(time):
            return 1.0, 1.0
        if self.fan_on_heater == 1:
            return self.u_multiplier, 1.0
        return 1.0, self.u_multiplier

    def to_json(self) -> dict:
        return {
            "fan_on_heater": self.fan_on_heater,
            "u_multiplier": self.u_multiplier,
            "active_window": list(self.active_window),
        }

    @classmethod
    def from_json(cls, data: dict) -> "DisturbanceProfile":
        data = dict(data)
        if "active_window" in data:
            data["active_window"] = tuple(data["active_window"])
        return cls(**data)


def effective_htc(params: TwinParams, disturbance: DisturbanceProfile | None,
                  time: float) -> tuple[float, float]:
    if disturbance is None:
        return params.htc, params.htc
    f1, f2 = disturbance.htc_factors(time)
    return params.htc * f1, params.htc * f2


def net_heat_rate(T: float, q: float, params: TwinParams = TwinParams(),
                  u_eff: float | None = None) -> float:
    """Heater input minus convective and radiative losses, in watts."""
    U = params.htc if u_eff is None else u_eff
    Ta = params.ambient
    conv = U * params.area * (T - Ta)
    rad = params.emissivity * params.stefan_boltzmann * params.area * (T**4 - Ta**4)
    return q - conv - rad


def _derivs(t1: float, t2: float, q1: float, q2: float, u1: float, u2: float,
            params: TwinParams) -> tuple[float, float]:
    c = params.thermal_mass
    return (net_heat_rate(t1, q1, params, u1) / c,
            net_heat_rate(t2, q2, params, u2) / c)


def step_rk4(state: TwinState, cmd: HeaterCommand, dt: float,
             params: TwinParams = TwinParams(),
             disturbance: DisturbanceProfile | None = None) -> TwinState:
    """Advance both heaters by one classical RK4 step of length ``dt``.

    The disturbance is sampled at the start of the step and held for the
    whole step.
    """
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    q1, q2 = check_command(cmd, params.q_max)
    u1, u2 = effective_htc(params, disturbance, state.time)
    t1, t2 = state.t1, state.t2
    try:
        a1, a2 = _derivs(t1, t2, q1, q2, u1, u2, params)
        b1, b2 = _derivs(t1 + 0.5 * dt * a1, t2 + 0.5 * dt * a2, q1, q2, u1, u2, params)
        c1, c2 = _derivs(t1 + 0.5 * dt * b1, t2 + 0.5 * dt * b2, q1, q2, u1, u2, params)
        d1, d2 = _derivs(t1 + dt * c1, t2 + dt * c2, q1, q2, u1, u2, params)
    except OverflowError as exc:
        raise NonFiniteState(f"overflow stepping from {state}") from exc
    n1 = t1 + dt / 6.0 * (a1 + 2 * b1 + 2 * c1 + d1)
    n2 = t2 + dt / 6.0 * (a2 + 2 * b2 + 2 * c2 + d2)
    for v in (a1, a2, b1, b2, c1, c2, d1, d2, n1, n2):
        if not math.isfinite(v):
            raise NonFiniteState(f"non-finite value stepping from {state}")
    return TwinState(n1, n2, state.time + dt)


class Sample(NamedTuple):
    time: float
    state: TwinState
    command: HeaterCommand


TRAJECTORY_HEADER = ("time_s", "t1_K", "t2_K", "q1_W", "q2_W")


@dataclass
class Trajectory:
    """Append-only record of ``(time, state, command)`` samples.

    ``command`` is the power applied from that sample until the next one.
    """

    samples: list[Sample] = field(default_factory=list)

    def append(self, state: TwinState, command: HeaterCommand) -> None:
        if self.samples and state.time <= self.samples[-1].time:
            raise ValueError("trajectory times must increase strictly")
        self.samples.append(Sample(state.time, state, HeaterCommand(*command)))

    def extend(self, other: "Trajectory") -> None:
        for s in other.samples:
            if self.samples and s.time == self.samples[-1].time:
                # segment boundary: same state, the new command takes over
                self.samples[-1] = s
                continue
            self.append(s.state, s.command)

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self) -> Iterator[Sample]:
        return iter(self.samples)

    def __getitem__(self, k):
        return self.samples[k]

    @property
    def final_state(self) -> TwinState:
        return self.samples[-1].state

    @property
    def times(self) -> np.ndarray:
        return np.array([s.time for s in self.samples])

    @property
    def t1(self) -> np.ndarray:
        return np.array([s.state.t1 for s in self.samples])

    @property
    def t2(self) -> np.ndarray:
        return np.array([s.state.t2 for s in self.samples])

    @property
    def t_avg(self) -> np.ndarray:
        return 0.5 * (self.t1 + self.t2)

    @property
    def q1(self) -> np.ndarray:
        return np.array([s.command.q1 for s in self.samples])

    @property
    def q2(self) -> np.ndarray:
        return np.array([s.command.q2 for s in self.samples])

    def rows(self) -> list[tuple[float, ...]]:
        return [(s.time, s.state.t1, s.state.t2, s.command.q1, s.command.q2)
                for s in self.samples]

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(TRAJECTORY_HEADER)
            for row in self.rows():
                w.writerow([repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path: str | Path) -> "Trajectory":
        traj = cls()
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = tuple(next(reader))
            if header != TRAJECTORY_HEADER:
                raise ValueError(f"unexpected trajectory header {header}")
            for row in reader:
                t, t1, t2, q1, q2 = map(float, row)
                traj.append(TwinState(t1, t2, t), HeaterCommand(q1, q2))
        return traj


def simulate_interval(state: TwinState, cmd: HeaterCommand, duration: float,
                      dt: float = 1.0, params: TwinParams = TwinParams(),
                      disturbance: DisturbanceProfile | None = None) -> Trajectory:
    """Hold ``cmd`` for ``duration`` seconds; returns ``duration/dt + 1`` samples."""
    n = round(duration / dt)
    if n < 0 or not math.isclose(n * dt, duration, rel_tol=1e-9, abs_tol=1e-12):
        raise ValueError(f"duration {duration} is not a multiple of dt {dt}")
    cmd = check_command(cmd, params.q_max)
    t0 = state.time
    traj = Trajectory()
    traj.append(state, cmd)
    for k in range(1, n + 1):
        state = step_rk4(state, cmd, dt, params, disturbance)
        # pin the clock to the grid so long runs do not drift
        state = state._replace(time=t0 + k * dt)
        traj.append(state, cmd)
    return traj


def equilibrium_temperature(q: float, params: TwinParams = TwinParams(),
                            u_eff: float | None = None, tol: float = 1e-9) -> float:
    """Steady temperature for constant power ``q``, by bisection on [Ta, Ta+200]."""
    if q < 0:
        raise ValueError(f"q must be >= 0, got {q}")
    lo, hi = params.ambient, params.ambient + 200.0
    f_lo = net_heat_rate(lo, q, params, u_eff)
    f_hi = net_heat_rate(hi, q, params, u_eff)
    if abs(f_lo) < tol:
        return lo
    if abs(f_hi) < tol:
        return hi
    if f_lo * f_hi > 0:
        raise BracketFailure(
            f"net heat rate has the same sign at {lo} K and {hi} K for q={q}"
        )
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        f_mid = net_heat_rate(mid, q, params, u_eff)
        if abs(f_mid) < tol or mid in (lo, hi):
            return mid
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def naive_single_step(state: TwinState, cmd: HeaterCommand, horizon: float,
                      params: TwinParams = TwinParams(),
                      disturbance: DisturbanceProfile | None = None) -> tuple[float, float]:
    """One forward-Euler step spanning the whole horizon.

    Kept as a deliberately poor predictor to compare against the integrator.
    """
    if not horizon > 0:
        raise ValueError(f"horizon must be > 0, got {horizon}")
    u1, u2 = effective_htc(params, disturbance, state.time)
    d1, d2 = _derivs(state.t1, state.t2, cmd[0], cmd[1], u1, u2, params)
    return state.t1 + horizon * d1, state.t2 + horizon * d2
