"""Finite state machines used as the world model for recovery planning.

An :class:`Fsm` is a directed graph over states ``0..n_nodes-1`` stored as
ordered successor lists.  The module covers random generation with global
connectivity, structural validation, path execution, a BFS shortest-path
oracle and the dictionary text encoding injected into prompts.
"""

from __future__ import annotations

import ast
import json
import math
import random
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence


class FsmError(Exception):
    pass


class InfeasibleGraph(FsmError, ValueError):
    pass


class GenerationStalled(FsmError, RuntimeError):
    pass


class UnknownState(FsmError, ValueError):
    pass


class NoReachablePair(FsmError, ValueError):
    pass


@dataclass(frozen=True)
class Fsm:
    """Directed graph of operating states.

    ``adjacency[i]`` is the ordered tuple of successors of state ``i``.
    Construction does not enforce the structural invariants, so that
    malformed graphs can be fed to :func:`validate_structure`.
    """

    n_nodes: int
    adjacency: tuple[tuple[int, ...], ...]
    seed: int | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.n_nodes < 0:
            raise ValueError("n_nodes must be non-negative")
        if len(self.adjacency) != self.n_nodes:
            raise ValueError(
                f"adjacency has {len(self.adjacency)} rows for {self.n_nodes} nodes"
            )

    @classmethod
    def from_dict(
        cls, adjacency: Mapping[int, Iterable[int]], n_nodes: int | None = None,
        seed: int | None = None,
    ) -> "Fsm":
        keys = [int(k) for k in adjacency]
        if n_nodes is None:
            n_nodes = max(keys) + 1 if keys else 0
        rows: list[tuple[int, ...]] = [() for _ in range(n_nodes)]
        for k, succ in adjacency.items():
            k = int(k)
            if not 0 <= k < n_nodes:
                raise UnknownState(f"adjacency key {k} outside 0..{n_nodes - 1}")
            rows[k] = tuple(int(j) for j in succ)
        return cls(n_nodes, tuple(rows), seed)

    def to_dict(self) -> dict[int, list[int]]:
        return {i: list(s) for i, s in enumerate(self.adjacency)}

    @property
    def n_edges(self) -> int:
        return sum(len(s) for s in self.adjacency)

    def edges(self) -> list[tuple[int, int]]:
        return [(i, j) for i, succ in enumerate(self.adjacency) for j in succ]

    def has_edge(self, i: int, j: int) -> bool:
        return 0 <= i < self.n_nodes and j in self.adjacency[i]

    def to_json(self) -> dict:
        return {
            "n_nodes": self.n_nodes,
            "adjacency": {str(i): list(s) for i, s in enumerate(self.adjacency)},
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "Fsm":
        return cls.from_dict(
            {int(k): v for k, v in data["adjacency"].items()},
            n_nodes=int(data["n_nodes"]),
            seed=data.get("seed"),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "Fsm":
        return cls.from_json(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class TraversalReport:
    """Execution trace of a proposed path.

    ``first_invalid_index`` is ``i`` when ``states[i] -> states[i+1]`` is
    not an edge; ``invalid_transition`` carries that pair.
    """

    valid: bool
    executed_prefix: tuple[int, ...]
    first_invalid_index: int | None = None
    invalid_transition: tuple[int, int] | None = None


@dataclass(frozen=True)
class Violation:
    kind: str
    node: int | None
    edge: tuple[int, int] | None = None

    def __str__(self) -> str:
        if self.kind == "self_loop":
            return f"self-loop at {self.node}"
        if self.kind == "duplicate_edge":
            return f"duplicate edge {self.edge[0]}->{self.edge[1]}"
        if self.kind == "disconnected":
            return f"node {self.node} disconnected"
        if self.kind == "unknown_state":
            return f"edge {self.edge[0]}->{self.edge[1]} targets unknown state"
        return f"{self.kind} at {self.node}"


# -- generation ---------------------------------------------------------------

def _check_generation_args(n_nodes: int, n_edges: int) -> None:
    if n_nodes < 2:
        raise InfeasibleGraph(f"need at least 2 nodes, got {n_nodes}")
    if n_edges > n_nodes * (n_nodes - 1):
        raise InfeasibleGraph(
            f"{n_edges} edges exceed the {n_nodes * (n_nodes - 1)} possible "
            f"non-self edges on {n_nodes} nodes"
        )
    if n_edges < math.ceil(n_nodes / 2):
        raise InfeasibleGraph(
            f"{n_edges} edges cannot touch all {n_nodes} nodes"
        )


def _create_graph(n_nodes: int, n_edges: int, rng: random.Random,
                  budget: int) -> tuple[list[list[int]], int]:
    adj: list[list[int]] = [[] for _ in range(n_nodes)]
    edges = 0
    non_connected = n_nodes - 1
    flag = False
    iterations = 0
    while edges < n_edges:
        iterations += 1
        if iterations > budget:
            raise GenerationStalled(
                f"no progress after {budget} draws ({edges}/{n_edges} edges)"
            )
        j = rng.randrange(n_nodes)
        if non_connected >= 0 and non_connected != j:
            i = non_connected
            flag = True
        else:
            i = rng.randrange(n_nodes)
        if i != j and j not in adj[i]:
            adj[i].append(j)
            edges += 1
            if flag:
                non_connected -= 1
                flag = False
    return adj, iterations


def generate_fsm(n_nodes: int, n_edges: int, seed: int) -> Fsm:
    """Random FSM with exactly ``n_edges`` edges and no isolated node.

    Each node from ``n_nodes - 1`` downwards is forced onto one new edge
    before the remaining edges are drawn uniformly.  The draw loop is
    capped at ``1000 * n_edges`` iterations.
    """
    _check_generation_args(n_nodes, n_edges)
    rng = random.Random(seed)
    budget = 1000 * n_edges
    while True:
        adj, used = _create_graph(n_nodes, n_edges, rng, budget)
        fsm = Fsm(n_nodes, tuple(tuple(s) for s in adj), seed)
        # with fewer edges than nodes the cursor may not reach every node
        if not validate_structure(fsm):
            return fsm
        budget -= used
        if budget <= 0:
            raise GenerationStalled(
                f"could not connect all {n_nodes} nodes with {n_edges} edges"
            )


def validate_structure(fsm: Fsm, n_edges: int | None = None) -> list[Violation]:
    """List every violated structural invariant; empty means the FSM is sound.

    Pass ``n_edges`` to also check the total edge count.
    """
    out: list[Violation] = []
    touched = [False] * fsm.n_nodes
    for i, succ in enumerate(fsm.adjacency):
        seen: set[int] = set()
        for j in succ:
            if j == i:
                out.append(Violation("self_loop", i, (i, i)))
            if j in seen:
                out.append(Violation("duplicate_edge", i, (i, j)))
            seen.add(j)
            if not 0 <= j < fsm.n_nodes:
                out.append(Violation("unknown_state", i, (i, j)))
                continue
            touched[i] = touched[j] = True
    for i, ok in enumerate(touched):
        if not ok:
            out.append(Violation("disconnected", i))
    if n_edges is not None and fsm.n_edges != n_edges:
        out.append(Violation("edge_count", None))
    return out


# -- execution and search -----------------------------------------------------

def _check_state(fsm: Fsm, s: int) -> None:
    if not 0 <= s < fsm.n_nodes:
        raise UnknownState(f"state {s} not in 0..{fsm.n_nodes - 1}")


def traverse(fsm: Fsm, path: Sequence[int]) -> TraversalReport:
    """Walk ``path`` through ``fsm`` and stop at the first missing transition.

    A single-state path is always valid, even if the state id is out of
    range (there is no transition to check).
    """
    path = [int(s) for s in path]
    if not path:
        raise ValueError("path must contain at least one state")
    if len(path) > 1:
        for s in path:
            _check_state(fsm, s)
    for k in range(len(path) - 1):
        if path[k + 1] not in fsm.adjacency[path[k]]:
            return TraversalReport(
                False, tuple(path[: k + 1]), k, (path[k], path[k + 1])
            )
    return TraversalReport(True, tuple(path))


def shortest_path(fsm: Fsm, start: int, goal: int) -> list[int] | None:
    """BFS shortest path by edge count; successors expanded in ascending id."""
    _check_state(fsm, start)
    _check_state(fsm, goal)
    if start == goal:
        return [start]
    parent = {start: start}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for v in sorted(fsm.adjacency[u]):
            if v in parent:
                continue
            parent[v] = u
            if v == goal:
                path = [v]
                while path[-1] != start:
                    path.append(parent[path[-1]])
                return path[::-1]
            queue.append(v)
    return None


def reachable_from(fsm: Fsm, start: int) -> set[int]:
    seen = {start}
    stack = [start]
    while stack:
        u = stack.pop()
        for v in fsm.adjacency[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return seen


def sample_benchmark_task(fsm: Fsm, seed: int) -> tuple[int, int]:
    """Draw a distinct ``(start, goal)`` pair with ``goal`` reachable.

    Rejection sampling for up to ``50 * n**2`` draws, then an exact pick
    from the full reachability closure.  Both routes are uniform over the
    reachable ordered pairs.
    """
    n = fsm.n_nodes
    rng = random.Random(seed)
    cache: dict[int, set[int]] = {}
    if n >= 2:
        for _ in range(50 * n * n):
            s = rng.randrange(n)
            g = rng.randrange(n)
            if s == g:
                continue
            if s not in cache:
                cache[s] = reachable_from(fsm, s)
            if g in cache[s]:
                return s, g
    pairs = [
        (s, g)
        for s in range(n)
        for g in sorted(reachable_from(fsm, s))
        if g != s
    ]
    if not pairs:
        raise NoReachablePair("no ordered pair of distinct states is reachable")
    return rng.choice(pairs)


# -- text encoding ------------------------------------------------------------

def format_path(path: Sequence[int]) -> str:
    return "[" + ", ".join(str(int(s)) for s in path) + "]"


def encode_as_dict_text(fsm: Fsm) -> str:
    """Render as ``{0: [1, 2], 1: [2], 2: [0]}`` with keys ascending."""
    parts = [f"{i}: {format_path(s)}" for i, s in enumerate(fsm.adjacency)]
    return "{" + ", ".join(parts) + "}"


def parse_dict_text(text: str, n_nodes: int | None = None) -> Fsm:
    """Inverse of :func:`encode_as_dict_text`."""
    try:
        data = ast.literal_eval(text.strip())
    except (SyntaxError, ValueError) as exc:
        raise ValueError(f"not a dictionary literal: {text!r}") from exc
    if not isinstance(data, dict):
        raise ValueError(f"not a dictionary literal: {text!r}")
    for k, v in data.items():
        if not isinstance(k, int) or not isinstance(v, list) or not all(
            isinstance(x, int) for x in v
        ):
            raise ValueError(f"bad entry {k!r}: {v!r}")
    return Fsm.from_dict(data, n_nodes=n_nodes)
