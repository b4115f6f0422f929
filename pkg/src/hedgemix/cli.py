"""Command-line entry points.

``run`` executes batch experiments locally; ``serve`` hosts the control
service around a live run; ``replay`` re-executes a recorded live session;
``ctl`` is a thin HTTP client for a serving instance (status, pause,
resume, step, inject, retire).  Set HEDGEMIX_LOG to adjust verbosity.
"""

from __future__ import annotations

import json
import logging
import os
import sys
from pathlib import Path

import click

from .harness.config import load_config

log = logging.getLogger("hedgemix")


def _setup_logging():
    level = os.environ.get("HEDGEMIX_LOG", "INFO").upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO),
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")


def _load(config_path, seed, steps, env, out):
    cfg = load_config(config_path)
    updates = {}
    if steps is not None:
        updates["steps"] = steps
    if env is not None:
        updates["domain"] = env
    if out is not None:
        updates["out_dir"] = str(out)
    if seed is not None:
        updates["seeds"] = [seed]
    if updates:
        cfg = cfg.model_copy(update=updates)
    return cfg


@click.group()
def main():
    _setup_logging()


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--seed", type=int, default=None, help="run a single overriding seed")
@click.option("--steps", type=int, default=None)
@click.option("--env", type=click.Choice(["rps", "taxi", "epidemic"]), default=None)
@click.option("--out", type=click.Path(), default=None)
@click.option("--progress", type=int, default=0, help="print every N steps")
def run(config_path, seed, steps, env, out, progress):
    """Run the configured experiment over all seeds and write CSV logs."""
    from .harness.runner import run_experiment

    cfg = _load(config_path, seed, steps, env, out)
    log.info("running %s for %d steps x %d seeds", cfg.domain, cfg.steps,
             len(cfg.seeds))
    run_experiment(cfg, progress=progress or None)
    log.info("logs written to %s", cfg.out_dir)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--listen", default="127.0.0.1:8777", help="host:port")
@click.option("--seed", type=int, default=None)
@click.option("--steps", type=int, default=None)
@click.option("--env", type=click.Choice(["rps", "taxi", "epidemic"]), default=None)
@click.option("--out", type=click.Path(), default=None)
@click.option("--step-delay", type=float, default=0.0,
              help="seconds to sleep between steps (watchability)")
def serve(config_path, listen, seed, steps, env, out, step_delay):
    """Run live with the control service (inject/retire/pause/events)."""
    import uvicorn

    from .service import RunController, create_app

    cfg = _load(config_path, seed, steps, env, out)
    if cfg.injection_mode == "simulated":
        cfg = cfg.model_copy(update={"injection_mode": "live"})
    run_seed_value = cfg.seeds[0]
    out_dir = Path(cfg.out_dir) / f"seed{run_seed_value}"
    out_dir.parent.mkdir(parents=True, exist_ok=True)
    (out_dir.parent / "config.json").write_text(cfg.resolved_json())
    controller = RunController(cfg, run_seed_value, out_dir, step_delay=step_delay)
    controller.start()
    host, _, port = listen.rpartition(":")
    log.info("serving %s run on %s (seed %d)", cfg.domain, listen, run_seed_value)
    try:
        uvicorn.run(create_app(controller), host=host or "127.0.0.1",
                    port=int(port), log_level="warning")
    finally:
        controller.stop()


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--commands", "commands_path", required=True, type=click.Path(exists=True))
@click.option("--seed", type=int, default=None)
@click.option("--out", type=click.Path(), required=True)
def replay(config_path, commands_path, seed, out):
    """Re-run a recorded live session into byte-identical logs."""
    from .harness.runner import replay_run

    cfg = _load(config_path, seed, None, None, None)
    if cfg.injection_mode == "simulated":
        cfg = cfg.model_copy(update={"injection_mode": "live"})
    rows = [json.loads(line) for line in Path(commands_path).read_text().splitlines()
            if line.strip()]
    replay_run(cfg, cfg.seeds[0], rows, out_dir=Path(out))
    log.info("replayed %d commands into %s", len(rows), out)


@main.group()
@click.option("--addr", default="http://127.0.0.1:8777", show_default=True)
@click.pass_context
def ctl(ctx, addr):
    """Thin client for a serving run."""
    ctx.obj = addr.rstrip("/")


def _client():
    import httpx

    return httpx.Client(timeout=10.0)


def _show(resp):
    try:
        body = resp.json()
    except ValueError:
        body = resp.text
    click.echo(json.dumps(body, indent=2, sort_keys=True))
    if resp.status_code >= 400:
        sys.exit(1)


@ctl.command()
@click.pass_obj
def status(addr):
    with _client() as c:
        _show(c.get(f"{addr}/status"))


@ctl.command()
@click.pass_obj
def pause(addr):
    with _client() as c:
        _show(c.post(f"{addr}/pause"))


@ctl.command()
@click.pass_obj
def resume(addr):
    with _client() as c:
        _show(c.post(f"{addr}/resume"))


@ctl.command()
@click.pass_obj
def step(addr):
    with _client() as c:
        _show(c.post(f"{addr}/step"))


@ctl.command()
@click.argument("specialist_id")
@click.pass_obj
def retire(addr, specialist_id):
    with _client() as c:
        _show(c.post(f"{addr}/retire", json={"specialist_id": specialist_id}))


@ctl.command()
@click.option("--file", "spec_file", type=click.Path(exists=True),
              help="JSON file holding the predicate spec list")
@click.option("--json", "spec_json", help="inline JSON predicate spec list")
@click.option("--no-pretrain", is_flag=True)
@click.option("--drop", default=None, help="'lowest' or a model id to replace")
@click.pass_obj
def inject(addr, spec_file, spec_json, no_pretrain, drop):
    """Inject a model built from a JSON list of predicate specs."""
    if bool(spec_file) == bool(spec_json):
        raise click.UsageError("give exactly one of --file / --json")
    raw = Path(spec_file).read_text() if spec_file else spec_json
    predicates = json.loads(raw)
    payload = {"predicates": predicates, "pretrain": not no_pretrain}
    if drop:
        payload["drop"] = drop
    with _client() as c:
        _show(c.post(f"{addr}/inject", json=payload))


if __name__ == "__main__":
    main()
