"""Agent loops: FSM recovery planning and per-interval heater control.

Both loops follow the same shape.  An action agent proposes, a
deterministic host-side check (path walk or twin prediction) validates,
and failures are turned into feedback for a reprompting agent until a
bounded budget runs out.
"""

from __future__ import annotations

import json
import math
import threading
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Sequence

from .controllers import EpisodeConfig
from .fsm import Fsm, TraversalReport, UnknownState, encode_as_dict_text, format_path, traverse
from .parsing import ParseFailure, parse_bool, parse_float_array, parse_path
from .prompts import get_template, render_prompt, render_system
from .provider import CompletionRequest, Provider, ProviderError
from .twin import HeaterCommand, TwinState, simulate_interval


# -- audit log ----------------------------------------------------------------

TIMING_KEYS = frozenset({"latency_s", "latency", "timestamp", "seconds"})


class AuditLog:
    """Append-only JSON-lines record of every provider exchange and verdict.

    Records are kept in memory and, when ``path`` is given, flushed to disk
    line by line.
    """

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path else None
        self.records: list[dict] = []
        self._lock = threading.Lock()
        if self.path:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.path.write_text("")

    def write(self, record: dict) -> None:
        record = {"timestamp": time.time(), **record}
        with self._lock:
            self.records.append(record)
            if self.path:
                with open(self.path, "a") as fh:
                    fh.write(json.dumps(record, default=_jsonable) + "\n")

    def extend(self, records: Sequence[dict]) -> None:
        for r in records:
            r = dict(r)
            r.pop("timestamp", None)
            self.write(r)


def _jsonable(obj):
    if hasattr(obj, "to_json"):
        return obj.to_json()
    if hasattr(obj, "_asdict"):
        return list(obj)
    if isinstance(obj, (set, frozenset, tuple)):
        return list(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def strip_timing(obj):
    """Copy of a record with wall-clock fields removed, for determinism checks."""
    if isinstance(obj, dict):
        return {k: strip_timing(v) for k, v in obj.items() if k not in TIMING_KEYS}
    if isinstance(obj, list):
        return [strip_timing(v) for v in obj]
    return obj


def _ask(provider: Provider, template_name: str, bindings: dict, audit: AuditLog | None,
         **context) -> tuple[str, float]:
    tpl = get_template(template_name)
    req = CompletionRequest(user=render_prompt(tpl, bindings),
                            system=render_system(tpl, bindings))
    t0 = time.perf_counter()
    try:
        resp = provider.complete(req)
    except ProviderError as exc:
        if audit is not None:
            audit.write({"event": "provider_error", "agent": tpl.agent,
                         "template": template_name, "error": f"{type(exc).__name__}: {exc}",
                         **context})
        raise
    latency = time.perf_counter() - t0
    if audit is not None:
        audit.write({"event": "exchange", "agent": tpl.agent, "template": template_name,
                     "system": req.system, "prompt": req.user, "reply": resp.text,
                     "latency_s": latency, **context})
    return resp.text, latency


# -- FSM recovery planning ----------------------------------------------------

@dataclass(frozen=True)
class Attempt:
    """One proposal from the action agent and what the walk made of it."""

    path: tuple[int, ...] | None
    report: TraversalReport | None
    reached_goal: bool
    reachable_claim: bool | None
    raw: str
    latency_s: float
    problem: str | None = None

    @property
    def ok(self) -> bool:
        return self.problem is None

    def to_json(self) -> dict:
        return {
            "path": None if self.path is None else list(self.path),
            "valid": None if self.report is None else self.report.valid,
            "first_invalid_index": None if self.report is None else self.report.first_invalid_index,
            "reached_goal": self.reached_goal,
            "reachable_claim": self.reachable_claim,
            "problem": self.problem,
            "latency_s": self.latency_s,
        }


@dataclass
class PlanOutcome:
    start: int
    goal: int
    success: bool
    path: tuple[int, ...] | None
    attempts: list[Attempt]
    budget: int

    @property
    def reprompts_used(self) -> int:
        return max(len(self.attempts) - 1, 0)

    @property
    def first_attempt_valid(self) -> bool:
        return bool(self.attempts) and self.attempts[0].ok

    @property
    def seconds(self) -> float:
        return sum(a.latency_s for a in self.attempts)

    def to_json(self) -> dict:
        return {
            "start": self.start, "goal": self.goal, "success": self.success,
            "path": None if self.path is None else list(self.path),
            "reprompts_used": self.reprompts_used, "budget": self.budget,
            "attempts": [a.to_json() for a in self.attempts],
        }


class PlanAborted(ProviderError):
    """A provider failure ended planning; ``outcome`` holds the attempts so far."""

    def __init__(self, cause: ProviderError, outcome: PlanOutcome):
        super().__init__(f"{type(cause).__name__}: {cause}")
        self.cause = cause
        self.outcome = outcome


def check_plan(fsm: Fsm, start: int, goal: int, path: Sequence[int]) -> tuple[TraversalReport | None, str | None]:
    """Walk a proposed path; returns the report and a problem description."""
    try:
        report = traverse(fsm, path)
    except UnknownState as exc:
        return None, f"the path uses a state that does not exist ({exc})"
    if path[0] != start:
        return report, f"the path must start at state {start}, not {path[0]}"
    if not report.valid:
        a, b = report.invalid_transition
        return report, (f"the transition {a} -> {b} at position {report.first_invalid_index} "
                        f"is not allowed; state {a} can only move to "
                        f"{format_path(fsm.adjacency[a])}")
    if path[-1] != goal:
        return report, f"the path ends at state {path[-1]} instead of state {goal}"
    return report, None


def build_recommendation(attempts: Sequence[Attempt]) -> str:
    """Feedback text for the next traversal prompt."""
    last = attempts[-1]
    lines = [f"Your previous answer was rejected: {last.problem}."]
    tried = [format_path(a.path) for a in attempts if a.path is not None]
    if tried:
        lines.append("Avoid the previously explored paths, which are invalid: "
                     + "; ".join(tried) + ".")
    lines.append("Use only transitions listed in the adjacency list and return the "
                 "full sequence of states as a list.")
    return " ".join(lines)


def plan_recovery_path(provider: Provider, fsm: Fsm, start: int, goal: int,
                       budget: int = 5, audit: AuditLog | None = None,
                       instance: str | None = None) -> PlanOutcome:
    """Ask for a path from ``start`` to ``goal``, reprompting up to ``budget`` times.

    The last proposal is returned whether or not it succeeded.  A provider
    failure raises :class:`PlanAborted` carrying the attempts made so far.
    """
    for s in (start, goal):
        if not 0 <= s < fsm.n_nodes:
            raise UnknownState(f"state {s} not in 0..{fsm.n_nodes - 1}")
    graph = encode_as_dict_text(fsm)
    attempts: list[Attempt] = []
    recommendation = ""
    ctx = {"instance": instance} if instance is not None else {}
    for k in range(budget + 1):
        bindings = {"graph": graph, "current_state": start, "target_state": goal,
                    "recommendation": recommendation}
        try:
            raw, latency = _ask(provider, "traversal", bindings, audit, attempt=k, **ctx)
        except ProviderError as exc:
            outcome = PlanOutcome(start, goal, False,
                                  attempts[-1].path if attempts else None, attempts, budget)
            raise PlanAborted(exc, outcome) from exc
        try:
            claim = parse_bool(raw)
        except ParseFailure:
            claim = None
        try:
            path = parse_path(raw)
        except ParseFailure:
            path = None
        if path is None:
            report, problem = None, "no list of states was found in the answer"
        else:
            report, problem = check_plan(fsm, start, goal, path)
        attempt = Attempt(None if path is None else tuple(path), report,
                          path is not None and path[-1] == goal, claim, raw, latency, problem)
        attempts.append(attempt)
        if audit is not None:
            audit.write({"event": "path_check", "attempt": k, **ctx, **attempt.to_json()})
        if attempt.ok:
            break
        recommendation = build_recommendation(attempts)
    last = attempts[-1]
    return PlanOutcome(start, goal, last.ok, last.path, attempts, budget)


# -- continuous control -------------------------------------------------------

@dataclass(frozen=True)
class GateVerdict:
    gate: str
    passed: bool
    detail: str = ""
    deviation: float | None = None

    def to_json(self) -> dict:
        return asdict(self)


def predict_deviation(command: HeaterCommand, state: TwinState, config: EpisodeConfig,
                      horizon: float | None = None) -> tuple[float, TwinState]:
    """Twin-predicted ``|T_avg - T_sp|`` after holding ``command`` for one interval.

    The command is clamped into the plant bounds for the prediction only.
    """
    horizon = config.planning_interval if horizon is None else horizon
    cmd = HeaterCommand(*command)
    if not (math.isfinite(cmd.q1) and math.isfinite(cmd.q2)):
        cmd = HeaterCommand(0.0, 0.0)
    cmd = cmd.clamped(0.0, config.params.q_max)
    final = simulate_interval(state, cmd, horizon, config.control_dt,
                              config.params, config.disturbance).final_state
    return abs(final.t_avg - config.setpoint), final


def temperature_gate(prev_deviation: float, proposed: HeaterCommand, state: TwinState,
                     config: EpisodeConfig, improved_so_far: bool = False) -> GateVerdict:
    """Pass when the twin predicts a smaller deviation than ``prev_deviation``.

    A zero-power proposal also passes when no earlier candidate improved.
    """
    new, _ = predict_deviation(proposed, state, config)
    if new < prev_deviation:
        return GateVerdict("temperature", True,
                           f"deviation {new:.6g} K < previous {prev_deviation:.6g} K", new)
    if proposed[0] == 0 and proposed[1] == 0 and not improved_so_far:
        return GateVerdict("temperature", True,
                           f"zero power accepted: no candidate improved on "
                           f"{prev_deviation:.6g} K (new {new:.6g} K)", new)
    return GateVerdict("temperature", False,
                       f"predicted deviation {new:.6g} K does not improve on previous "
                       f"{prev_deviation:.6g} K", new)


def power_gate(proposed: HeaterCommand, lo: float = 0.0, hi: float = 0.3) -> GateVerdict:
    """Inclusive bounds check on both heater powers."""
    bad = []
    for name, q in zip(("q1", "q2"), proposed):
        if not math.isfinite(q):
            bad.append(f"{name}={q} is not finite")
        elif q < lo:
            bad.append(f"{name}={q:.6g} W below lo={lo:.6g} W")
        elif q > hi:
            bad.append(f"{name}={q:.6g} W above hi={hi:.6g} W")
    if bad:
        return GateVerdict("power", False, "; ".join(bad))
    return GateVerdict("power", True, f"within [{lo:.6g}, {hi:.6g}] W")


@dataclass
class Candidate:
    command: HeaterCommand
    source: str
    predicted: tuple[float, float] | None = None
    verdicts: list[GateVerdict] = field(default_factory=list)
    deviation: float | None = None

    def passed(self, gate: str) -> bool:
        return any(v.gate == gate and v.passed for v in self.verdicts)

    def to_json(self) -> dict:
        return {"command": list(self.command), "source": self.source,
                "predicted": None if self.predicted is None else list(self.predicted),
                "deviation": self.deviation,
                "verdicts": [v.to_json() for v in self.verdicts]}


@dataclass
class ControlDecision:
    chosen: HeaterCommand | None
    predicted: tuple[float, float] | None
    candidates: list[Candidate]
    temp_reprompts: int
    power_reprompts: int
    used_fallback: bool
    prev_deviation: float
    errors: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "chosen": None if self.chosen is None else list(self.chosen),
            "predicted": None if self.predicted is None else list(self.predicted),
            "candidates": [c.to_json() for c in self.candidates],
            "temp_reprompts": self.temp_reprompts,
            "power_reprompts": self.power_reprompts,
            "used_fallback": self.used_fallback,
            "prev_deviation": self.prev_deviation,
            "errors": self.errors,
        }


def _llm_validator(provider, template, bindings, audit, verdict: GateVerdict) -> None:
    """Ask the validator agent too; its answer is logged, the host check wins."""
    try:
        raw, _ = _ask(provider, template, bindings, audit, event_role="validator")
        said = parse_bool(raw)
    except (ProviderError, ParseFailure) as exc:
        said = None
        raw = str(exc)
    if audit is not None:
        audit.write({"event": "llm_validator", "gate": verdict.gate, "llm_verdict": said,
                     "host_verdict": verdict.passed,
                     "overridden": said is not None and said != verdict.passed})


def decide_control_action(provider: Provider, state: TwinState, config: EpisodeConfig,
                          current: HeaterCommand = HeaterCommand(0.0, 0.0),
                          temp_budget: int | None = None, power_budget: int | None = None,
                          audit: AuditLog | None = None,
                          llm_validators: bool = False) -> ControlDecision:
    """One planning interval of the operator / validator / reprompter loop.

    ``current`` is the command applied during the previous interval; its
    predicted deviation is the score a new proposal has to beat.  Provider
    and parse failures are logged and charged to the active budget.
    """
    temp_budget = config.temp_budget if temp_budget is None else temp_budget
    power_budget = config.power_budget if power_budget is None else power_budget
    lo, hi = config.q_lo, config.q_hi
    prev_dev, _ = predict_deviation(current, state, config)
    base = {"t_avg": config.setpoint, "curr_t_avg": state.t_avg, "t1": state.t1,
            "t2": state.t2, "lo_q": lo, "hi_q": hi, "avg_score": prev_dev}
    ctx = {"time": state.time}
    candidates: list[Candidate] = []
    errors: list[str] = []
    temp_used = power_used = 0
    improved = False

    def note(exc: Exception, stage: str) -> None:
        errors.append(f"{stage}: {type(exc).__name__}: {exc}")
        if audit is not None:
            audit.write({"event": "reprompt_charged", "stage": stage,
                         "error": f"{type(exc).__name__}: {exc}",
                         "raw": getattr(exc, "raw", None), **ctx})

    def check_temperature(c: Candidate) -> GateVerdict:
        nonlocal improved
        v = temperature_gate(prev_dev, c.command, state, config, improved)
        c.verdicts.append(v)
        c.deviation = v.deviation
        if v.passed and v.deviation < prev_dev:
            improved = True
        if audit is not None:
            audit.write({"event": "gate", "source": c.source, "command": list(c.command),
                         **v.to_json(), **ctx})
        if llm_validators:
            _llm_validator(provider, "temp_validation",
                           {**base, "q1": c.command.q1, "q2": c.command.q2}, audit, v)
        return v

    def check_power(c: Candidate) -> GateVerdict:
        v = power_gate(c.command, lo, hi)
        c.verdicts.append(v)
        if audit is not None:
            audit.write({"event": "gate", "source": c.source, "command": list(c.command),
                         **v.to_json(), **ctx})
        if llm_validators:
            _llm_validator(provider, "power_validation",
                           {**base, "q1": c.command.q1, "q2": c.command.q2}, audit, v)
        return v

    # 1. operator proposal; failures are charged to the temperature budget
    first: Candidate | None = None
    while first is None:
        try:
            raw, _ = _ask(provider, "operator",
                          {**base, "q1": current.q1, "q2": current.q2}, audit, **ctx)
            q1, q2, p1, p2 = parse_float_array(raw, 4)
            first = Candidate(HeaterCommand(q1, q2), "operator", (p1, p2))
        except (ProviderError, ParseFailure) as exc:
            note(exc, "operator")
            if temp_used >= temp_budget:
                break
            temp_used += 1
    if first is None:
        return ControlDecision(None, None, candidates, temp_used, power_used, True,
                               prev_dev, errors)
    candidates.append(first)

    # 2. temperature gate with the three-agent reprompting chain
    active = first
    verdict = check_temperature(active)
    while not verdict.passed and temp_used < temp_budget:
        temp_used += 1
        try:
            b = {**base, "q1": active.command.q1, "q2": active.command.q2}
            raw, _ = _ask(provider, "temp_reprompting_1", b, audit, **ctx)
            pt1, pt2 = parse_float_array(raw, 2)
            b.update(pred_t1=pt1, pred_t2=pt2)
            raw, _ = _ask(provider, "temp_reprompting_2", b, audit, **ctx)
            (new_q1,) = parse_float_array(raw, 1)
            raw, _ = _ask(provider, "temp_reprompting_3", {**b, "new_q1": new_q1}, audit, **ctx)
            _, new_q2, _ = parse_float_array(raw, 3)
        except (ProviderError, ParseFailure) as exc:
            note(exc, "temperature_reprompt")
            continue
        active = Candidate(HeaterCommand(new_q1, new_q2), "temperature_reprompt", (pt1, pt2))
        candidates.append(active)
        verdict = check_temperature(active)

    # 3. power gate on the best temperature candidate
    passed_temp = [c for c in candidates if c.passed("temperature")]
    if passed_temp:
        active = min(passed_temp, key=lambda c: (c.deviation, c.command.total))
        verdict = check_power(active)
        while not verdict.passed and power_used < power_budget:
            power_used += 1
            try:
                b = {**base, "q1": active.command.q1, "q2": active.command.q2,
                     "pred_t1": (active.predicted or (state.t1, state.t2))[0],
                     "pred_t2": (active.predicted or (state.t1, state.t2))[1]}
                raw, _ = _ask(provider, "power_reprompting", b, audit, **ctx)
                q1, q2 = parse_float_array(raw, 2)
            except (ProviderError, ParseFailure) as exc:
                note(exc, "power_reprompt")
                continue
            c = Candidate(HeaterCommand(q1, q2), "power_reprompt")
            candidates.append(c)
            check_temperature(c)
            verdict = check_power(c)
            active = c

    # 4. best candidate that cleared both gates
    eligible = [c for c in candidates if c.passed("temperature") and c.passed("power")]
    if not eligible:
        return ControlDecision(None, None, candidates, temp_used, power_used, True,
                               prev_dev, errors)
    best = min(eligible, key=lambda c: (c.deviation, c.command.total))
    return ControlDecision(best.command, best.predicted, candidates, temp_used, power_used,
                           False, prev_dev, errors)


class LlmController:
    """Episode-runner adapter around :func:`decide_control_action`."""

    inner_dt = None

    def __init__(self, provider: Provider, config: EpisodeConfig, audit: AuditLog | None = None,
                 name: str = "llm", llm_validators: bool = False):
        self.provider = provider
        self.config = config
        self.audit = audit
        self.name = name
        self.llm_validators = llm_validators

    def decide(self, state, setpoint, interval, history):
        current = history[-1] if history else HeaterCommand(0.0, 0.0)
        return decide_control_action(self.provider, state, self.config, current,
                                     audit=self.audit, llm_validators=self.llm_validators)
