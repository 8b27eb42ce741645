"""Planning and control metrics, plus table rendering."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np


class EmptyCell(ValueError):
    pass


class TooFewSamples(ValueError):
    pass


class EmptyInput(ValueError):
    pass


# -- control ------------------------------------------------------------------

def _avg_series(trajectory) -> tuple[np.ndarray, np.ndarray]:
    return np.asarray(trajectory.times, float), np.asarray(trajectory.t_avg, float)


def tw_mae_samples(times: Sequence[float], values: Sequence[float],
                   setpoint: float) -> float:
    """Left-rectangle time-weighted MAE; the last sample only closes the grid."""
    t = np.asarray(times, float)
    y = np.asarray(values, float)
    if t.size < 2:
        raise TooFewSamples("tw_mae needs at least two samples")
    dt = np.diff(t)
    return float(np.sum(np.abs(y[:-1] - setpoint) * dt) / np.sum(dt))


def tw_mae(trajectory, setpoint: float) -> float:
    return tw_mae_samples(*_avg_series(trajectory), setpoint)


def rmse_samples(values: Sequence[float], setpoint: float) -> float:
    y = np.asarray(values, float)
    if y.size < 1:
        raise TooFewSamples("rmse needs at least one sample")
    return float(np.sqrt(np.mean((y - setpoint) ** 2)))


def rmse(trajectory, setpoint: float) -> float:
    return rmse_samples(_avg_series(trajectory)[1], setpoint)


@dataclass(frozen=True)
class LatencyStats:
    count: int
    mean: float
    std: float
    min: float
    max: float

    def to_json(self) -> dict:
        return asdict(self)


def latency_stats(samples: Iterable[float]) -> LatencyStats:
    """Count, mean, sample standard deviation (n-1; 0 for one sample), min, max."""
    x = np.asarray(list(samples), float)
    if x.size == 0:
        raise EmptyInput("latency_stats needs at least one sample")
    std = float(np.std(x, ddof=1)) if x.size > 1 else 0.0
    return LatencyStats(int(x.size), float(np.mean(x)), std, float(x.min()), float(x.max()))


def control_metrics(log) -> dict:
    """TW-MAE, RMSE, reprompt totals and latency stats for one episode log."""
    sp = log.config.setpoint
    temp = power = 0
    for d in log.decisions:
        if d.detail:
            temp += d.detail.get("temp_reprompts", 0)
            power += d.detail.get("power_reprompts", 0)
    return {
        "tw_mae": tw_mae(log.trajectory, sp),
        "rmse": rmse(log.trajectory, sp),
        "temp_reprompts": temp,
        "power_reprompts": power,
        "fallbacks": sum(d.used_fallback for d in log.decisions),
        "latency": latency_stats(log.latencies).to_json(),
    }


# -- FSM planning -------------------------------------------------------------

@dataclass(frozen=True)
class FsmBenchRecord:
    """Summary of one planning instance.  Path lengths count transitions."""

    n_nodes: int
    n_edges: int
    first_attempt_valid: bool
    solved: bool
    reprompts: int
    found_length: int | None
    optimal_length: int | None
    seconds: float
    instance: str = ""

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, data: dict) -> "FsmBenchRecord":
        return cls(**data)


@dataclass(frozen=True)
class FsmRow:
    n_nodes: int
    n_edges: int
    first_pass_accuracy: float
    valid_path_accuracy: float
    optimal_path_length: float
    path_length_deviation: float
    avg_reprompts: float
    avg_seconds: float
    avg_reprompts_solved: float
    n_instances: int


FSM_TABLE_HEADER = (
    "Nodes", "Edges", "First pass accuracy", "Valid Path accuracy",
    "Optimal Path Length", "Deviation in Path Length", "Avg. Reprompts",
    "Avg. Time (s)",
)


def fsm_metrics(records: Sequence[FsmBenchRecord]) -> FsmRow:
    """Aggregate one (nodes, edges) cell.

    Deviation is averaged over solved instances only; reprompts over all
    instances (the solved-only mean is kept in ``avg_reprompts_solved``).
    """
    if not records:
        raise EmptyCell("no records in cell")
    n = len(records)
    solved = [r for r in records if r.solved]
    optimal = [r.optimal_length for r in records if r.optimal_length is not None]
    devs = [r.found_length - r.optimal_length for r in solved
            if r.found_length is not None and r.optimal_length is not None]
    return FsmRow(
        n_nodes=records[0].n_nodes,
        n_edges=records[0].n_edges,
        first_pass_accuracy=sum(r.first_attempt_valid for r in records) / n,
        valid_path_accuracy=len(solved) / n,
        optimal_path_length=float(np.mean(optimal)) if optimal else math.nan,
        path_length_deviation=float(np.mean(devs)) if devs else math.nan,
        avg_reprompts=sum(r.reprompts for r in records) / n,
        avg_seconds=sum(r.seconds for r in records) / n,
        avg_reprompts_solved=(sum(r.reprompts for r in solved) / len(solved)
                              if solved else math.nan),
        n_instances=n,
    )


def group_cells(records: Iterable[FsmBenchRecord]) -> list[FsmRow]:
    cells: dict[tuple[int, int], list[FsmBenchRecord]] = {}
    for r in records:
        cells.setdefault((r.n_nodes, r.n_edges), []).append(r)
    return [fsm_metrics(cells[k]) for k in sorted(cells)]


# -- tables -------------------------------------------------------------------

def _fmt(v, digits: int) -> str:
    if isinstance(v, float):
        return "nan" if math.isnan(v) else f"{v:.{digits}f}"
    return str(v)


def fsm_table(rows: Sequence[FsmRow], digits: int = 2) -> tuple[tuple[str, ...], list[list[str]]]:
    body = [
        [str(r.n_nodes), str(r.n_edges), _fmt(r.first_pass_accuracy, digits),
         _fmt(r.valid_path_accuracy, digits), _fmt(r.optimal_path_length, digits),
         _fmt(r.path_length_deviation, digits), _fmt(r.avg_reprompts, digits),
         _fmt(r.avg_seconds, 3)]
        for r in rows
    ]
    return FSM_TABLE_HEADER, body


def latency_table(columns: dict[str, LatencyStats]) -> tuple[tuple[str, ...], list[list[str]]]:
    names = list(columns)
    header = ("Metric", *names)
    body = [
        ["Sample Count", *[str(columns[n].count) for n in names]],
        ["Mean (s)", *[f"{columns[n].mean:.2f}" for n in names]],
        ["Std. Deviation (s)", *[f"{columns[n].std:.2f}" for n in names]],
        ["Min/Max (s)", *[f"{columns[n].min:.2f} / {columns[n].max:.2f}" for n in names]],
    ]
    return header, body


def performance_table(columns: dict[str, dict]) -> tuple[tuple[str, ...], list[list[str]]]:
    """Rows TW-MAE / RMSE / reprompts, one column per run (values in K)."""
    names = list(columns)
    header = ("Model", *names)

    def reprompts(m):
        if m.get("temp_reprompts", 0) == 0 and m.get("power_reprompts", 0) == 0 \
                and not m.get("llm", False):
            return "-"
        return f"{m.get('temp_reprompts', 0)}/{m.get('power_reprompts', 0)}"

    body = [
        ["TW-MAE (K)", *[f"{columns[n]['tw_mae']:.4f}" for n in names]],
        ["RMSE (K)", *[f"{columns[n]['rmse']:.4f}" for n in names]],
        ["Reprompts (Temp/Power)", *[reprompts(columns[n]) for n in names]],
    ]
    return header, body


def to_csv(header: Sequence[str], body: Sequence[Sequence[str]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(body)
    return buf.getvalue()


def to_markdown(header: Sequence[str], body: Sequence[Sequence[str]]) -> str:
    lines = ["| " + " | ".join(header) + " |",
             "|" + "|".join("---" for _ in header) + "|"]
    lines += ["| " + " | ".join(row) + " |" for row in body]
    return "\n".join(lines) + "\n"
