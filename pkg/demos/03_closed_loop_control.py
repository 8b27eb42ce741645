# %% [markdown]
# Closed-loop temperature control against a fan disturbance.
#
# Three controllers share one episode configuration: doing nothing, a PID
# baseline, and the multi-agent loop driven by a scripted stand-in for the
# language model.  Every LLM proposal passes a temperature gate (the twin
# must predict an improvement) and a power gate (0 to 0.3 W per heater)
# before it reaches the plant; otherwise a safety fallback acts.

# %%
import json

from agentic_control import (
    AuditLog, EpisodeConfig, LlmController, PidController, ScriptedProvider, ZeroController,
    run_episode,
)
from agentic_control.metrics import performance_table, to_markdown

config = EpisodeConfig()
print(json.dumps(config.to_json()["disturbance"]))

# %%
# The scripted model over-asks for power, gets pushed back by the power
# gate once, then settles on a steady proposal.  Rules keyed by the agent
# role let a single script serve the operator and the reprompters.
provider = ScriptedProvider.keyed({
    "Plant Operator": ["[0.5, 0.5, 306.3, 306.3]", "[0.3, 0.25, 306.2, 306.1]"],
    "Fault Diagnosis": "[0.3, 0.2]",
}, fallback="[0.3, 0.22, 306.15, 306.15]")

audit = AuditLog()
runs = {
    "zero": run_episode(config, ZeroController()),
    "pid": run_episode(config, PidController()),
    "llm": run_episode(config, LlmController(provider, config, audit), audit),
}

# %%
# The stand-in repeats one steady answer, which often fails to beat simply
# holding the current command; each such interval spends its temperature
# reprompts and keeps the previous command, hence the large reprompt count.
print(to_markdown(*performance_table({k: v.metrics for k, v in runs.items()})))

# %%
# what the LLM loop did in its first interval
first = runs["llm"].decisions[0]
print("applied:", first.command, "fallback:", first.used_fallback)
for c in first.detail["candidates"]:
    print(" ", c["source"], c["command"], [(v["gate"], v["passed"]) for v in c["verdicts"]])

# %%
# optional figure (needs matplotlib)
try:
    from agentic_control.plots import plot_episodes
except ImportError:
    pass
else:
    print(plot_episodes(runs, config.setpoint, "control_comparison.png"))
