"""FSM planning benchmark suites: generation, storage and execution."""

from __future__ import annotations

import json
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .fsm import Fsm, encode_as_dict_text, format_path, generate_fsm, sample_benchmark_task, shortest_path
from .metrics import FsmBenchRecord
from .pipeline import AuditLog, PlanAborted, PlanOutcome, plan_recovery_path
from .prompts import format_value
from .provider import Provider, ScriptedProvider, ScriptRule

# (nodes, edges) cells of the standard planning benchmark
DEFAULT_CELLS: tuple[tuple[int, int], ...] = (
    (4, 4), (4, 6), (5, 10), (6, 15), (6, 20),
    (10, 45), (12, 66), (15, 105), (20, 190), (25, 300),
)

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(root: int, *keys: int) -> int:
    """Independent 63-bit child seed for ``root`` and a key path."""
    s = splitmix64(root & _MASK64)
    for k in keys:
        s = splitmix64(s ^ (k & _MASK64))
    return s >> 1


@dataclass(frozen=True)
class SuiteInstance:
    id: str
    fsm: Fsm
    start: int
    goal: int
    seed: int

    @property
    def n_nodes(self) -> int:
        return self.fsm.n_nodes

    @property
    def n_edges(self) -> int:
        return self.fsm.n_edges

    def manifest_entry(self) -> dict:
        return {"id": self.id, "file": f"{self.id}.json", "n_nodes": self.n_nodes,
                "n_edges": self.n_edges, "seed": self.seed,
                "start": self.start, "goal": self.goal}


@dataclass(frozen=True)
class Suite:
    seed: int
    instances: tuple[SuiteInstance, ...]

    def __len__(self) -> int:
        return len(self.instances)

    def save(self, out_dir: str | Path) -> Path:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        for inst in self.instances:
            inst.fsm.save(out_dir / f"{inst.id}.json")
        manifest = {"seed": self.seed,
                    "instances": [i.manifest_entry() for i in self.instances]}
        path = out_dir / "manifest.json"
        path.write_text(json.dumps(manifest, indent=2) + "\n")
        return path

    @classmethod
    def load(cls, suite_dir: str | Path) -> "Suite":
        suite_dir = Path(suite_dir)
        manifest = json.loads((suite_dir / "manifest.json").read_text())
        instances = []
        for e in manifest["instances"]:
            fsm = Fsm.load(suite_dir / e["file"])
            instances.append(SuiteInstance(e["id"], fsm, int(e["start"]), int(e["goal"]),
                                           int(e["seed"])))
        return cls(int(manifest.get("seed", 0)), tuple(instances))


def generate_suite(seed: int = 0, cells: Sequence[tuple[int, int]] = DEFAULT_CELLS,
                   per_cell: int = 20) -> Suite:
    """``per_cell`` instances for each (nodes, edges) cell with derived seeds."""
    instances = []
    for c, (n, r) in enumerate(cells):
        for k in range(per_cell):
            s = derive_seed(seed, c, k)
            fsm = generate_fsm(n, r, s)
            start, goal = sample_benchmark_task(fsm, derive_seed(s, 1))
            instances.append(SuiteInstance(f"n{n}_r{r}_{k:02d}", fsm, start, goal, s))
    return Suite(seed, tuple(instances))


def traversal_prompt_key(fsm: Fsm, start: int, goal: int) -> str:
    """Regex matching the traversal prompt of one instance."""
    text = (f"Can state {format_value(goal)} be reached from {format_value(start)} "
            f"given the adjacency list {encode_as_dict_text(fsm)}?")
    return re.escape(text)


def oracle_script(suite: Suite) -> ScriptedProvider:
    """Scripted provider that answers every instance with the BFS shortest path."""
    rules = []
    for inst in suite.instances:
        path = shortest_path(inst.fsm, inst.start, inst.goal)
        reply = "False" if path is None else f"True\n{format_path(path)}"
        rules.append(ScriptRule(reply, traversal_prompt_key(inst.fsm, inst.start, inst.goal)))
    return ScriptedProvider(rules)


def outcome_record(inst: SuiteInstance, outcome: PlanOutcome) -> FsmBenchRecord:
    opt = shortest_path(inst.fsm, inst.start, inst.goal)
    found = len(outcome.path) - 1 if outcome.success and outcome.path else None
    return FsmBenchRecord(
        n_nodes=inst.n_nodes, n_edges=inst.n_edges,
        first_attempt_valid=outcome.first_attempt_valid, solved=outcome.success,
        reprompts=outcome.reprompts_used, found_length=found,
        optimal_length=None if opt is None else len(opt) - 1,
        seconds=outcome.seconds, instance=inst.id,
    )


@dataclass
class SuiteResult:
    records: list[FsmBenchRecord]
    outcomes: list[PlanOutcome]
    audits: list[list[dict]]
    provider_failures: int


def run_suite(suite: Suite, provider: Provider, budget: int = 5, parallel: int = 1,
              audit: AuditLog | None = None) -> SuiteResult:
    """Plan every instance; results and audit records come back in suite order
    whatever the degree of parallelism."""

    def one(inst: SuiteInstance):
        local = AuditLog()
        failed = False
        try:
            outcome = plan_recovery_path(provider, inst.fsm, inst.start, inst.goal,
                                         budget, local, instance=inst.id)
        except PlanAborted as exc:
            outcome, failed = exc.outcome, True
        return outcome_record(inst, outcome), outcome, local.records, failed

    if parallel > 1:
        with ThreadPoolExecutor(max_workers=parallel) as pool:
            results = list(pool.map(one, suite.instances))
    else:
        results = [one(i) for i in suite.instances]
    if audit is not None:
        for _, _, recs, _ in results:
            audit.extend(recs)
    return SuiteResult([r[0] for r in results], [r[1] for r in results],
                       [r[2] for r in results], sum(r[3] for r in results))
