"""Command-line entry point: ``agentic-control <command> ...``.

Exit codes: 0 done, 2 configuration or input error, 3 the provider failed
on every instance / interval.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

import yaml

from . import __version__
from .bench import DEFAULT_CELLS, Suite, generate_suite, oracle_script, run_suite
from .controllers import (
    ConstantController,
    EpisodeConfig,
    PidController,
    PidGains,
    ScriptedController,
    ZeroController,
    run_episode,
)
from .metrics import (
    FsmBenchRecord,
    LatencyStats,
    fsm_table,
    group_cells,
    latency_table,
    performance_table,
    to_csv,
    to_markdown,
)
from .pipeline import AuditLog, LlmController
from .provider import OpenAICompatibleProvider, ProviderConfig, ScriptedProvider
from .twin import HeaterCommand, Trajectory

log = logging.getLogger("agentic_control")

EXIT_OK, EXIT_CONFIG, EXIT_PROVIDER = 0, 2, 3


class ConfigError(Exception):
    pass


def _read_config(path: str | None) -> dict:
    if not path:
        return {}
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file {p} not found")
    try:
        data = yaml.safe_load(p.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {p}: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{p} must contain a mapping")
    return data


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _make_provider(args, cfg: dict):
    kind = args.provider
    if kind == "scripted":
        if not args.script:
            raise ConfigError("--provider scripted needs --script")
        script = Path(args.script)
        if not script.exists():
            raise ConfigError(f"script {script} not found")
        try:
            return ScriptedProvider.load(script), {"kind": "scripted", "script": str(script),
                                                   "script_sha256": _sha256(script)}
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"bad script {script}: {exc}") from exc
    pc = dict(cfg.get("provider") or {})
    if args.model:
        pc["model"] = args.model
    try:
        config = ProviderConfig.local(**pc) if kind == "local" else ProviderConfig(**pc)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad provider config: {exc}") from exc
    return OpenAICompatibleProvider(config), {"kind": kind, **config.to_json()}


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2) + "\n")


# -- gen-suite ----------------------------------------------------------------

def cmd_gen_suite(args) -> int:
    cfg = _read_config(args.config)
    suite = generate_suite(args.seed, _cells(cfg), int(cfg.get("per_cell", args.per_cell)))
    out = Path(args.out)
    suite.save(out)
    oracle_script(suite).dump(out / "oracle_script.jsonl")
    print(f"wrote {len(suite)} instances to {out}")
    return EXIT_OK


def _cells(cfg: dict):
    cells = cfg.get("cells")
    if cells is None:
        return DEFAULT_CELLS
    try:
        return tuple((int(n), int(r)) for n, r in cells)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad cells entry: {exc}") from exc


# -- fsm-bench ----------------------------------------------------------------

def cmd_fsm_bench(args) -> int:
    cfg = _read_config(args.config)
    provider, provider_echo = _make_provider(args, cfg)
    if args.suite:
        try:
            suite = Suite.load(args.suite)
        except (OSError, ValueError, KeyError) as exc:
            raise ConfigError(f"cannot load suite {args.suite}: {exc}") from exc
    else:
        suite = generate_suite(args.seed, _cells(cfg), int(cfg.get("per_cell", args.per_cell)))
    budget = int(cfg.get("budget", args.budget))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "run_config.json", {
        "command": "fsm-bench", "version": __version__, "seed": args.seed,
        "suite": args.suite, "suite_seed": suite.seed, "n_instances": len(suite),
        "budget": budget, "parallel": args.parallel, "provider": provider_echo,
    })
    audit = AuditLog(out / "audit.jsonl")
    result = run_suite(suite, provider, budget, args.parallel, audit)
    with open(out / "records.jsonl", "w") as fh:
        for r in result.records:
            fh.write(json.dumps(r.to_json()) + "\n")
    header, body = fsm_table(group_cells(result.records))
    (out / "table.csv").write_text(to_csv(header, body))
    if args.markdown:
        (out / "table.md").write_text(to_markdown(header, body))
    print(to_markdown(header, body), end="")
    if result.provider_failures == len(suite):
        log.error("provider failed on every instance")
        return EXIT_PROVIDER
    return EXIT_OK


# -- control-run --------------------------------------------------------------

def _load_commands(path: Path) -> list:
    outputs = []
    for line in path.read_text().splitlines():
        if line.strip():
            item = json.loads(line)
            outputs.append(ValueError("scripted failure") if item is None else tuple(item))
    if not outputs:
        raise ConfigError(f"{path} holds no commands")
    return outputs


def cmd_control_run(args) -> int:
    cfg = _read_config(args.config)
    try:
        config = EpisodeConfig.from_json(cfg.get("episode") or {})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad episode config: {exc}") from exc
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    audit = None
    echo = {"command": "control-run", "version": __version__, "controller": args.controller,
            "seed": args.seed, "episode": config.to_json()}
    if args.controller == "pid":
        gains = PidGains(**(cfg.get("pid") or {}))
        controller = PidController(gains, dt=config.control_dt, per_heater_max=config.q_hi)
        echo["pid"] = gains.__dict__
    elif args.controller == "zero":
        controller = ZeroController()
    elif args.controller == "constant":
        q = cfg.get("constant") or [0.0, 0.0]
        controller = ConstantController(*q)
    elif args.controller == "scripted":
        if not args.script:
            raise ConfigError("--controller scripted needs --script")
        script = Path(args.script)
        if not script.exists():
            raise ConfigError(f"script {script} not found")
        controller = ScriptedController(_load_commands(script))
        echo["script"] = {"path": str(script), "sha256": _sha256(script)}
    else:
        provider, echo["provider"] = _make_provider(args, cfg)
        audit = AuditLog(out / "audit.jsonl")
        controller = LlmController(provider, config, audit, name=args.model or args.provider,
                                   llm_validators=bool(cfg.get("llm_validators", False)))
    _write_json(out / "run_config.json", echo)
    episode = run_episode(config, controller, audit)
    episode.save(out, "episode")
    _write_json(out / "metrics.json", episode.metrics)
    if args.plot:
        from .plots import plot_episodes
        plot_episodes({controller.name: episode}, config.setpoint, out / "episode.png")
    print(json.dumps({k: v for k, v in episode.metrics.items() if k != "latency"}))
    if args.controller == "llm" and all(d.used_fallback for d in episode.decisions):
        log.error("every interval fell back to the safety policy")
        return EXIT_PROVIDER
    return EXIT_OK


# -- report -------------------------------------------------------------------

def cmd_report(args) -> int:
    paths = [Path(p) for p in args.paths]
    if not paths:
        raise ConfigError("no input logs given")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    episodes, fsm_runs = {}, {}
    for p in paths:
        if not p.exists():
            raise ConfigError(f"{p} does not exist")
        if p.is_dir():
            p = p / "episode.json" if (p / "episode.json").exists() else p / "records.jsonl"
        try:
            if p.suffix == ".jsonl":
                recs = [FsmBenchRecord.from_json(json.loads(l))
                        for l in p.read_text().splitlines() if l.strip()]
                if not recs:
                    raise ValueError("no records")
                fsm_runs[_label(p)] = recs
            else:
                data = json.loads(p.read_text())
                episodes[_label(p, data.get("controller"))] = (p, data)
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise ConfigError(f"malformed log {p}: {exc}") from exc
    written = []
    for name, recs in fsm_runs.items():
        header, body = fsm_table(group_cells(recs))
        written.append(_emit(out / f"fsm_{name}", header, body, args.markdown))
    if episodes:
        header, body = performance_table(
            {n: {**d["metrics"], "llm": bool(d["decisions"] and d["decisions"][0].get("detail"))}
             for n, (_, d) in episodes.items()})
        written.append(_emit(out / "control_performance", header, body, args.markdown))
        header, body = latency_table(
            {n: LatencyStats(**d["metrics"]["latency"]) for n, (_, d) in episodes.items()})
        written.append(_emit(out / "latency", header, body, args.markdown))
        if args.plot:
            from .plots import plot_trajectories
            trajs = {}
            for n, (p, d) in episodes.items():
                csv_path = p.with_name(p.stem + "_trajectory.csv")
                if csv_path.exists():
                    trajs[n] = Trajectory.from_csv(csv_path)
            if trajs:
                sp = next(iter(episodes.values()))[1]["config"]["setpoint"]
                plot_trajectories(trajs, sp, out / "comparison.png")
    for w in written:
        print(w)
    return EXIT_OK


def _label(p: Path, hint: str | None = None) -> str:
    base = p.parent.name if p.stem in ("episode", "records") else p.stem
    return base or hint or "run"


def _emit(stem: Path, header, body, markdown: bool) -> Path:
    path = stem.with_suffix(".csv")
    path.write_text(to_csv(header, body))
    if markdown:
        stem.with_suffix(".md").write_text(to_markdown(header, body))
    return path


# -- argument parsing ---------------------------------------------------------

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON or YAML config file")
    p.add_argument("--provider", choices=("openai-compatible", "local", "scripted"),
                   default="scripted")
    p.add_argument("--script", help="JSON-lines script for scripted providers/controllers")
    p.add_argument("--model", help="model name for HTTP providers")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--parallel", type=int, default=1)
    p.add_argument("--plot", action="store_true", help="also write PNG plots")
    p.add_argument("--markdown", action="store_true", help="also write markdown tables")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="agentic-control", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-suite", help="generate an FSM benchmark suite")
    _common(p)
    p.add_argument("--per-cell", type=int, default=20)
    p.set_defaults(func=cmd_gen_suite)

    p = sub.add_parser("fsm-bench", help="run recovery planning over a suite")
    _common(p)
    p.add_argument("--suite", help="suite directory (generated from --seed if omitted)")
    p.add_argument("--per-cell", type=int, default=20)
    p.add_argument("--budget", type=int, default=5, help="reprompts per instance")
    p.set_defaults(func=cmd_fsm_bench)

    p = sub.add_parser("control-run", help="run one closed-loop control episode")
    _common(p)
    p.add_argument("--controller", choices=("pid", "llm", "scripted", "zero", "constant"),
                   default="pid")
    p.set_defaults(func=cmd_control_run)

    p = sub.add_parser("report", help="merge run outputs into tables and plots")
    _common(p)
    p.add_argument("paths", nargs="*", help="episode.json / records.jsonl files or run dirs")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
