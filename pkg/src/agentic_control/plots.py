"""Optional matplotlib figures; imported lazily so headless runs need no backend."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def plot_trajectories(trajectories: dict, setpoint: float, path: str | Path) -> Path:
    """Average temperature against the setpoint (top) and heater power (bottom)."""
    fig, (ax_t, ax_q) = plt.subplots(2, 1, sharex=True, figsize=(8, 6))
    for name, traj in trajectories.items():
        ax_t.plot(traj.times, traj.t_avg, label=name)
        ax_q.step(traj.times, traj.q1, where="post", label=f"{name} q1")
        ax_q.step(traj.times, traj.q2, where="post", ls="--", label=f"{name} q2")
    ax_t.axhline(setpoint, color="k", lw=0.8, ls=":", label="setpoint")
    ax_t.set_ylabel("T_avg (K)")
    ax_q.set_ylabel("power (W)")
    ax_q.set_xlabel("time (s)")
    ax_t.legend(loc="best", fontsize="small")
    ax_q.legend(loc="best", fontsize="small")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def plot_episodes(episodes: dict, setpoint: float, path: str | Path) -> Path:
    return plot_trajectories({k: e.trajectory for k, e in episodes.items()}, setpoint, path)
