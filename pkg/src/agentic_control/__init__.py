"""Agentic control loops over FSM recovery planning and a dual-heater twin."""

__version__ = "0.1.0"

from .bench import Suite, generate_suite, oracle_script, run_suite
from .controllers import (
    ConstantController,
    EpisodeConfig,
    EpisodeLog,
    PidController,
    PidGains,
    PidState,
    ScriptedController,
    ZeroController,
    pid_update,
    run_episode,
    safety_fallback,
    split_command,
)
from .fsm import (
    Fsm,
    TraversalReport,
    encode_as_dict_text,
    generate_fsm,
    parse_dict_text,
    sample_benchmark_task,
    shortest_path,
    traverse,
    validate_structure,
)
from .metrics import fsm_metrics, latency_stats, rmse, tw_mae
from .parsing import ParseFailure, parse_bool, parse_float_array, parse_path
from .pipeline import (
    AuditLog,
    ControlDecision,
    GateVerdict,
    LlmController,
    PlanOutcome,
    decide_control_action,
    plan_recovery_path,
    power_gate,
    temperature_gate,
)
from .prompts import PromptTemplate, get_template, render_prompt
from .provider import (
    CompletionRequest,
    CompletionResponse,
    OpenAICompatibleProvider,
    ProviderConfig,
    ScriptedProvider,
    complete,
)
from .twin import (
    DisturbanceProfile,
    HeaterCommand,
    Trajectory,
    TwinParams,
    TwinState,
    equilibrium_temperature,
    naive_single_step,
    net_heat_rate,
    simulate_interval,
    step_rk4,
)
