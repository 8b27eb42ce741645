"""Independent reference implementations used only by the tests."""

import itertools

import numpy as np


def simple_path_lengths(adj, n, start, goal):
    """Minimal edge count over all simple paths, by exhaustive DFS."""
    if start == goal:
        return 0
    best = None
    stack = [(start, (start,))]
    while stack:
        u, path = stack.pop()
        for v in adj.get(u, []):
            if v in path:
                continue
            if v == goal:
                L = len(path)
                best = L if best is None else min(best, L)
            else:
                stack.append((v, path + (v,)))
    return best


def reachability_closure(adj, n):
    """Boolean transitive closure by repeated matrix products."""
    A = np.zeros((n, n), dtype=bool)
    for i, succ in adj.items():
        for j in succ:
            A[i, j] = True
    R = A | np.eye(n, dtype=bool)
    while True:
        nxt = (R.astype(int) @ R.astype(int)) > 0
        if (nxt == R).all():
            return R
        R = nxt


def euler_heater(T0, q, U, dt, duration, m=0.004, cp=500.0, A=1.2e-3, eps=0.9,
                 sigma=5.67e-8, Ta=293.15):
    """Explicit Euler for one heater, written out longhand."""
    T = T0
    for _ in range(int(round(duration / dt))):
        loss = U * A * (T - Ta) + eps * sigma * A * (T ** 4 - Ta ** 4)
        T = T + dt * (q - loss) / (m * cp)
    return T


def all_ordered_reachable_pairs(adj, n):
    R = reachability_closure(adj, n)
    return {(s, g) for s, g in itertools.product(range(n), repeat=2) if s != g and R[s, g]}
