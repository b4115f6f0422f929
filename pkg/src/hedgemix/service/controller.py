"""Background run loop with queued control commands and an event feed.

One thread owns the run; HTTP handlers only enqueue commands and read
snapshots under the lock.  Inject/retire commands apply at the next step
boundary, in arrival order, after any scheduled injection for that step.
Every applied command is appended to a JSONL log so a live session can be
replayed into byte-identical CSVs.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
from collections import deque
from pathlib import Path

from ..harness.config import ExperimentConfig
from ..harness.runner import RunState, write_logs
from ..injector import InjectionCommand, RetireCommand
from ..predicates.base import PredicateSpec

__all__ = ["RunController"]

EVENT_RING_CAP = 1 << 18


class RunController:
    def __init__(self, config: ExperimentConfig, seed: int, out_dir: Path | None = None,
                 step_delay: float = 0.0):
        self.config = config
        self.seed = seed
        self.out_dir = Path(out_dir) if out_dir is not None else None
        self.step_delay = step_delay
        self.run = RunState(config, seed)
        self.lock = threading.RLock()
        self.wake = threading.Condition(self.lock)
        self.paused = False
        self.finished = False
        self._stop = False
        self._step_credits = 0
        self._pending: deque = deque()
        self._events: list[tuple[int, dict]] = []
        self._next_seq = 0
        self._events_base = 0  # seq of self._events[0]
        self._live_counter = 0
        self.command_log: list[dict] = []
        self._thread = threading.Thread(target=self._loop, daemon=True,
                                        name="hedgemix-run")
        self._emit({"kind": "hello", "t": 0, "domain": config.domain,
                    "steps_total": config.steps})

    # -- lifecycle ----------------------------------------------------------
    def start(self) -> None:
        self._thread.start()

    def stop(self) -> None:
        with self.wake:
            self._stop = True
            self.wake.notify_all()
        self._thread.join(timeout=30)

    def join(self, timeout=None) -> None:
        self._thread.join(timeout=timeout)

    # -- events ------------------------------------------------------------
    def _emit(self, payload: dict) -> int:
        seq = self._next_seq
        self._events.append((seq, payload))
        self._next_seq += 1
        if len(self._events) > EVENT_RING_CAP:
            drop = len(self._events) - EVENT_RING_CAP
            self._events = self._events[drop:]
            self._events_base += drop
        return seq

    def events_since(self, since: int) -> list[tuple[int, dict]]:
        with self.lock:
            if since < self._events_base:
                since = self._events_base
            return list(self._events[since - self._events_base:])

    @property
    def last_event_id(self) -> int:
        with self.lock:
            return self._next_seq - 1

    # -- command intake ------------------------------------------------------
    def _reserve_live_id(self, specs) -> str:
        blob = "|".join(s.id for s in specs)
        digest = hashlib.sha1(blob.encode()).hexdigest()[:6]
        mid = f"live{self._live_counter:03d}-{digest}"
        self._live_counter += 1
        return mid

    def enqueue_inject(self, specs: list[PredicateSpec], pretrain: bool,
                       drop: str | None) -> tuple[str, int]:
        """Queue an injection; returns (reserved id, expected apply step)."""
        with self.lock:
            pool = self.run.agent.pool
            if drop is None and len(pool) >= self.config.agent.max_specialists:
                raise PoolFullError(len(pool))
            if drop not in (None, "lowest") and drop not in pool:
                raise UnknownModelError(drop)
            mid = self._reserve_live_id(specs)
            self._pending.append(InjectionCommand(
                predicates=list(specs), pretrain=pretrain, drop=drop,
                source="live", spec_id=mid))
            return mid, self.run.t + 1

    def enqueue_retire(self, spec_id: str) -> int:
        with self.lock:
            if spec_id not in self.run.agent.pool:
                raise UnknownModelError(spec_id)
            self._pending.append(RetireCommand(spec_id=spec_id))
            return self.run.t + 1

    def pause(self) -> None:
        with self.wake:
            self.paused = True
            self.wake.notify_all()

    def resume(self) -> None:
        with self.wake:
            self.paused = False
            self.wake.notify_all()

    def step_once(self) -> None:
        with self.wake:
            self._step_credits += 1
            self.wake.notify_all()

    # -- status ------------------------------------------------------------
    def status(self) -> dict:
        with self.lock:
            run = self.run
            records = run.records
            last = records[-1].reward if records else None
            window = [r.reward for r in records[-self.config.smoothing_window:]]
            weights = run.agent.hedge.normalized_weights()
            pool = [{"id": i, "arrival": run.agent.pool[i].arrival,
                     "weight": weights[i]} for i in sorted(run.agent.pool)]
            return {
                "t": run.t,
                "steps_total": self.config.steps,
                "paused": self.paused,
                "finished": self.finished,
                "epsilon": run.agent.config.epsilon_at(run.t),
                "domain": self.config.domain,
                "reward": {"last": last,
                           "smoothed": (sum(window) / len(window)) if window else None},
                "pool": pool,
                "last_event_id": self._next_seq - 1,
                "registry": run.registry.manifest(),
            }

    # -- the loop -----------------------------------------------------------
    def _drain_valid_commands(self) -> list:
        """Re-check queued commands against the current pool; reject stale ones.

        The HTTP handlers validated at enqueue time, but a scheduled
        injection may have changed the pool since.
        """
        valid = []
        agent = self.run.agent
        pool_size = len(agent.pool)
        while self._pending:
            cmd = self._pending.popleft()
            if isinstance(cmd, RetireCommand):
                if cmd.spec_id not in agent.pool:
                    self._emit({"kind": "reject", "t": self.run.t,
                                "specialist_id": cmd.spec_id,
                                "detail": "model no longer active"})
                    continue
                pool_size -= 1
            else:
                dropping = cmd.drop is not None and pool_size > 0
                if not dropping and pool_size >= self.config.agent.max_specialists:
                    self._emit({"kind": "reject", "t": self.run.t,
                                "specialist_id": cmd.spec_id or "?",
                                "detail": "pool full at apply time"})
                    continue
                if cmd.drop not in (None, "lowest") and cmd.drop not in agent.pool:
                    self._emit({"kind": "reject", "t": self.run.t,
                                "specialist_id": cmd.spec_id or "?",
                                "detail": f"drop target {cmd.drop!r} no longer active"})
                    continue
                if not dropping:
                    pool_size += 1
            valid.append(cmd)
        return valid

    def _log_commands(self, cmds: list, t_apply: int) -> None:
        for cmd in cmds:
            if isinstance(cmd, RetireCommand):
                self.command_log.append({"t": t_apply, "kind": "retire",
                                         "id": cmd.spec_id, "command": None})
            else:
                self.command_log.append({
                    "t": t_apply, "kind": "inject", "id": cmd.spec_id,
                    "command": {
                        "predicates": [{"constructor": s.constructor,
                                        "params": s.params}
                                       for s in cmd.predicates],
                        "pretrain": cmd.pretrain, "drop": cmd.drop}})

    def _loop(self) -> None:
        cfg = self.config
        while True:
            with self.wake:
                while (self.paused and self._step_credits == 0 and not self._stop):
                    self.wake.wait(timeout=0.1)
                if self._stop or self.run.t >= cfg.steps:
                    break
                if self.paused:
                    self._step_credits -= 1
                cmds = self._drain_valid_commands()
                t_apply = self.run.t
                n_before = len(self.run.events)
                record = self.run.step(extra_commands=cmds)
                self._log_commands(cmds, t_apply)
                for e in self.run.events[n_before:]:
                    self._emit({"kind": e.kind, "t": e.t,
                                "specialist_id": e.specialist_id,
                                "source": e.detail})
                self._emit({
                    "kind": "step", "t": record.t, "action": record.action,
                    "reward": record.reward, "loss": record.learner_loss,
                    "epsilon": record.epsilon, "explored": record.explored,
                    "weights": [
                        {"id": i, "weight": w,
                         "arrival": self.run.agent.hedge.arrival[i]}
                        for i, w in sorted(record.weights.items())]})
            if self.step_delay:
                time.sleep(self.step_delay)
        with self.lock:
            self.finished = True
            if self.out_dir is not None:
                self.out_dir.mkdir(parents=True, exist_ok=True)
                write_logs(self.run, self.out_dir, cfg)
                with open(self.out_dir / "commands.jsonl", "w") as fh:
                    for row in self.command_log:
                        fh.write(json.dumps(row, sort_keys=True) + "\n")
            self._emit({"kind": "done", "t": self.run.t})


class PoolFullError(RuntimeError):
    def __init__(self, size):
        super().__init__(f"pool holds {size} models; include a drop directive")


class UnknownModelError(KeyError):
    def __init__(self, spec_id):
        super().__init__(spec_id)
        self.spec_id = spec_id

    def __str__(self):
        return f"no active model with id {self.spec_id!r}"
