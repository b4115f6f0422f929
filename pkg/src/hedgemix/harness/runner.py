"""Single-seed run state and the batch experiment runner.

A RunState owns one (environment, agent, injector) triple and advances it
step by step; the batch runner loops seeds and writes CSV logs plus a
cross-seed aggregate.  Identical (config, seed) pairs produce
byte-identical logs: every random draw comes from named seed streams and
floats are serialized with full repr precision.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..agent import MixtureAgent, StepRecord
from ..envs import BiasedRpsEnv, EpidemicEnv, TaxiEnv, load_edge_list, synth_graph
from ..envs.epidemic import EpidemicParams
from ..injector import (
    InjectionCommand,
    InjectionSchedule,
    Injector,
    RetireCommand,
    sample_model_spec,
)
from ..predicates import PredicateSpec, default_pools, registry_for_domain
from .config import ExperimentConfig, seed_streams

__all__ = ["RunState", "RunEvent", "run_seed", "run_experiment", "smooth"]


@dataclass
class RunEvent:
    t: int
    kind: str            # inject | retire | reject
    specialist_id: str
    detail: str = ""


def build_env(config: ExperimentConfig, env_seed: int):
    rng = np.random.default_rng(env_seed)
    if config.domain == "rps":
        return BiasedRpsEnv(), rng
    if config.domain == "taxi":
        return TaxiEnv(rng), rng
    e = config.env
    if e.graph_path:
        graph = load_edge_list(e.graph_path)
    else:
        graph = synth_graph(e.synth_nodes, e.synth_degree, seed=env_seed & 0x7FFFFFFF)
    params = EpidemicParams(**e.params) if e.params else EpidemicParams()
    env = EpidemicEnv(graph, params=params, rng=rng,
                      quarantine_cost=e.quarantine_cost,
                      vaccinate_cost=e.vaccinate_cost,
                      initial_exposed_fraction=e.initial_exposed_fraction,
                      reward_levels=e.reward_levels)
    return env, rng


def build_registry(config: ExperimentConfig, env):
    if config.domain == "epidemic":
        return registry_for_domain("epidemic", graph=env.graph, params=env.params)
    return registry_for_domain(config.domain)


class RunState:
    """One seed's live run: environment, agent, scheduled injector, logs."""

    def __init__(self, config: ExperimentConfig, master_seed: int):
        self.config = config
        self.master_seed = master_seed
        streams = seed_streams(master_seed)
        self.env, self.env_rng = build_env(config, streams["env"])
        self.registry = build_registry(config, self.env)
        self.agent = MixtureAgent(config.agent.build(config.domain),
                                  self.env.action_space, self.env.obs_space,
                                  self.env.reward_codec, self.registry,
                                  agent_seed=streams["agent"],
                                  predicate_seed=streams["predicate"])
        self.pools = default_pools(config.domain)
        schedule = InjectionSchedule(depth=config.schedule_depth,
                                     period=config.schedule.period,
                                     p0=config.schedule.p0, dp=config.schedule.dp,
                                     p_max=config.schedule.p_max)
        self.injector = Injector(schedule, self.pools,
                                 np.random.default_rng(streams["injector"]))
        self.events: list[RunEvent] = []
        self.records: list[StepRecord] = []
        self._seed_initial_pool(np.random.default_rng(streams["extra"]))

    # -- pool seeding -----------------------------------------------------
    def _seed_initial_pool(self, rng) -> None:
        a = self.config.agent
        if a.initial_model_specs is not None:
            model_specs = [[PredicateSpec(d["constructor"], d.get("params", {}))
                            for d in model] for model in a.initial_model_specs]
        else:
            p0 = self.config.schedule.p0
            d = self.config.schedule_depth
            count = min(a.initial_models, a.max_specialists)
            model_specs = [sample_model_spec(self.pools, p0, d, rng)
                           for _ in range(count)]
        for specs in model_specs:
            mid = self.agent.inject_model(specs)
            self.events.append(RunEvent(0, "inject", mid, "initial"))

    # -- injection commands ---------------------------------------------------
    def apply_command(self, cmd) -> str:
        """Apply one boundary command; records events, returns the model id."""
        agent = self.agent
        if isinstance(cmd, RetireCommand):
            self.retire(cmd.spec_id, source=cmd.source)
            return cmd.spec_id
        replaced_log_w = None
        if cmd.drop is not None and agent.pool:
            if cmd.drop == "lowest":
                victim, replaced_log_w = agent.drop_lowest()
            else:
                replaced_log_w = agent.hedge.log_weight(cmd.drop)
                agent.retire_model(cmd.drop)
                victim = cmd.drop
            self.events.append(RunEvent(agent.t, "retire", victim, cmd.source))
        window = self.injector.buffer.snapshot() if cmd.pretrain else None
        mid = agent.inject_model(cmd.predicates, pretrain_steps=window,
                                 spec_id=cmd.spec_id,
                                 replaced_log_weight=replaced_log_w)
        self.events.append(RunEvent(agent.t, "inject", mid, cmd.source))
        return mid

    def retire(self, spec_id: str, source: str = "live") -> None:
        self.agent.retire_model(spec_id)
        self.events.append(RunEvent(self.agent.t, "retire", spec_id, source))

    # -- stepping ----------------------------------------------------------------
    def step(self, extra_commands: list[InjectionCommand] | None = None) -> StepRecord:
        """Advance one step: apply boundary commands, act, learn, log."""
        agent = self.agent
        if (self.config.schedule.enabled
                and self.config.injection_mode in ("simulated", "both")):
            cmd = self.injector.tick(agent.t, len(agent.pool),
                                     self.config.agent.max_specialists)
            if cmd is not None:
                self.apply_command(cmd)
        for cmd in extra_commands or ():
            self.apply_command(cmd)
        eps = agent.config.epsilon_at(agent.t)
        action, explored = agent.select_action(eps)
        obs, reward = self.env.step(action, self.env_rng)
        record = agent.update(action, obs, reward, epsilon=eps, explored=explored)
        r_sym = agent.history.reward_index(record.t - 1)
        self.injector.observe_step(action, obs, r_sym)
        self.records.append(record)
        return record

    @property
    def t(self) -> int:
        return self.agent.t


def smooth(values, window: int) -> np.ndarray:
    """Trailing mean over at most ``window`` previous entries."""
    values = np.asarray(values, dtype=np.float64)
    out = np.empty_like(values)
    csum = np.concatenate([[0.0], np.cumsum(values)])
    for i in range(len(values)):
        lo = max(0, i + 1 - window)
        out[i] = (csum[i + 1] - csum[lo]) / (i + 1 - lo)
    return out


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])


def write_logs(run: RunState, out_dir: Path, config: ExperimentConfig) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_csv(out_dir / "steps.csv", ["t", "action", "reward", "loss", "epsilon"],
               ((r.t, r.action, r.reward, r.learner_loss, r.epsilon)
                for r in run.records))
    def weight_rows():
        for r in run.records:
            for sid in sorted(r.weights):
                yield (r.t, sid, r.weights[sid], run.agent.hedge.arrival[sid])
    _write_csv(out_dir / "weights.csv", ["t", "specialist_id", "weight", "arrival"],
               weight_rows())
    _write_csv(out_dir / "events.csv", ["t", "kind", "specialist_id", "detail"],
               ((e.t, e.kind, e.specialist_id, e.detail) for e in run.events))


def run_seed(config: ExperimentConfig, seed: int, out_dir: Path | None = None,
             progress=None) -> RunState:
    run = RunState(config, seed)
    for i in range(config.steps):
        run.step()
        if progress and (i + 1) % progress == 0:
            print(f"seed {seed}: step {i + 1}/{config.steps}", flush=True)
    if out_dir is not None:
        write_logs(run, out_dir, config)
    return run


def replay_run(config: ExperimentConfig, seed: int, command_rows: list[dict],
               out_dir: Path | None = None) -> RunState:
    """Re-run a live session from its recorded command log.

    Commands re-apply at their recorded steps with their recorded model
    ids, so the produced CSVs are byte-identical to the live session's.
    """
    by_t: dict[int, list] = {}
    for row in command_rows:
        if row["kind"] == "inject":
            c = row["command"]
            cmd = InjectionCommand(
                predicates=[PredicateSpec(p["constructor"], p.get("params", {}))
                            for p in c["predicates"]],
                pretrain=c.get("pretrain", True), drop=c.get("drop"),
                source="live", spec_id=row["id"])
        else:
            cmd = RetireCommand(spec_id=row["id"], source="live")
        by_t.setdefault(int(row["t"]), []).append(cmd)
    run = RunState(config, seed)
    for _ in range(config.steps):
        run.step(extra_commands=by_t.get(run.t, []))
    if out_dir is not None:
        write_logs(run, Path(out_dir), config)
    return run


def run_experiment(config: ExperimentConfig, out_root: Path | str | None = None,
                   progress=None) -> dict:
    """All seeds + aggregate; returns {seed: RunState} plus written files."""
    out_root = Path(out_root if out_root is not None else config.out_dir)
    out_root.mkdir(parents=True, exist_ok=True)
    (out_root / "config.json").write_text(config.resolved_json())
    runs = {}
    reward_curves = []
    for seed in config.seeds:
        run = run_seed(config, seed, out_root / f"seed{seed}", progress=progress)
        runs[seed] = run
        reward_curves.append(smooth([r.reward for r in run.records],
                                    config.smoothing_window))
    if reward_curves and config.steps > 0:
        stack = np.vstack(reward_curves)
        rows = ((t + 1, float(stack[:, t].mean()), float(stack[:, t].std()))
                for t in range(config.steps))
        _write_csv(out_root / "aggregate.csv", ["t", "mean_smoothed", "std_smoothed"], rows)
    else:
        _write_csv(out_root / "aggregate.csv", ["t", "mean_smoothed", "std_smoothed"], ())
    return runs
