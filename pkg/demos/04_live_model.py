# %% [markdown]
# Pointing the pipeline at a real model.
#
# Any OpenAI-compatible chat endpoint works.  The key is read from an
# environment variable named in the config and is never written to logs.
# Without a key (or a local server) this script only prints what it would
# send.

# %%
import os

from agentic_control import Fsm, ProviderConfig, plan_recovery_path
from agentic_control.pipeline import AuditLog
from agentic_control.provider import CompletionRequest, OpenAICompatibleProvider, request_body

cloud = ProviderConfig(model="gpt-4o")           # OPENAI_API_KEY, temperature 0, top_p 0.1
local = ProviderConfig.local(model="llama3.2")   # e.g. an Ollama server on localhost
print(request_body(cloud, CompletionRequest("Can state 0 be reached from 1?")))

# %%
fsm = Fsm.from_dict({0: [1, 2], 1: [2], 2: [0]})
config = cloud if os.environ.get(cloud.api_key_env) else None
if config is None and os.environ.get("USE_LOCAL_MODEL"):
    config = local
if config is None:
    print("no credentials or local server configured; skipping the live call")
else:
    provider = OpenAICompatibleProvider(config)
    audit = AuditLog("live_audit.jsonl")
    outcome = plan_recovery_path(provider, fsm, 1, 0, budget=5, audit=audit)
    print(outcome.success, outcome.path, "reprompts:", outcome.reprompts_used)
    provider.close()
