import json
import time
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from hedgemix.harness import ExperimentConfig
from hedgemix.harness.runner import replay_run
from hedgemix.service import RunController, create_app


def _config(**over):
    base = dict(domain="rps", steps=25, seeds=[0],
                agent={"simulations": 4, "horizon": 1, "max_specialists": 3,
                       "initial_models": 2},
                injection_mode="live",
                smoothing_window=5)
    base.update(over)
    return ExperimentConfig(**base)


def _paused_controller(tmp_path, **over):
    ctl = RunController(_config(**over), seed=0, out_dir=tmp_path / "live" / "seed0")
    ctl.pause()
    ctl.start()
    return ctl


def _wait(predicate, timeout=15.0):
    deadline = time.time() + timeout
    while time.time() < deadline:
        if predicate():
            return True
        time.sleep(0.01)
    return False


VALID_SPECS = [{"constructor": "IsRock", "params": {}},
               {"constructor": "IsLose", "params": {}}]


class TestEndpoints:
    def test_status_before_first_step(self, tmp_path):
        ctl = _paused_controller(tmp_path)
        try:
            client = TestClient(create_app(ctl))
            body = client.get("/status").json()
            assert body["t"] == 0
            assert body["paused"] is True
            assert len(body["pool"]) == 2
            assert "IsRock" in body["registry"]
            assert body["reward"]["last"] is None
        finally:
            ctl.stop()

    def test_inject_applies_at_next_boundary(self, tmp_path):
        ctl = _paused_controller(tmp_path)
        try:
            client = TestClient(create_app(ctl))
            resp = client.post("/inject", json={"predicates": VALID_SPECS})
            assert resp.status_code == 200
            ack = resp.json()
            assert ack["applied_at"] == 1
            mid = ack["specialist_id"]
            client.post("/step")
            assert _wait(lambda: ctl.run.t >= 1)
            pool = client.get("/status").json()["pool"]
            assert mid in {p["id"] for p in pool}
            kinds = [p for _, p in ctl.events_since(0) if p["kind"] == "inject"]
            assert any(e["specialist_id"] == mid for e in kinds)
        finally:
            ctl.stop()

    def test_malformed_spec_rejected_without_perturbing_run(self, tmp_path):
        ctl = _paused_controller(tmp_path)
        try:
            client = TestClient(create_app(ctl))
            before = client.get("/status").json()
            resp = client.post("/inject", json={"predicates": [
                {"constructor": "NoSuchThing", "params": {}}]})
            assert resp.status_code == 400
            detail = resp.json()["detail"]
            assert detail[0]["loc"] == ["predicates", 0, "constructor"]
            resp2 = client.post("/inject", json={"predicates": [
                {"constructor": "RandomBit", "params": {"p": 3.0, "bogus": 1}}]})
            assert resp2.status_code == 400
            locs = {tuple(e["loc"]) for e in resp2.json()["detail"]}
            assert ("predicates", 0, "params", "p") in locs
            assert ("predicates", 0, "params", "bogus") in locs
            after = client.get("/status").json()
            assert after == before  # nothing queued, nothing changed
        finally:
            ctl.stop()

    def test_retire_unknown_404(self, tmp_path):
        ctl = _paused_controller(tmp_path)
        try:
            client = TestClient(create_app(ctl))
            resp = client.post("/retire", json={"specialist_id": "ghost"})
            assert resp.status_code == 404
        finally:
            ctl.stop()

    def test_retire_active_model(self, tmp_path):
        ctl = _paused_controller(tmp_path)
        try:
            client = TestClient(create_app(ctl))
            pool = client.get("/status").json()["pool"]
            victim = pool[0]["id"]
            resp = client.post("/retire", json={"specialist_id": victim})
            assert resp.status_code == 200
            client.post("/step")
            assert _wait(lambda: ctl.run.t >= 1)
            remaining = {p["id"] for p in client.get("/status").json()["pool"]}
            assert victim not in remaining
        finally:
            ctl.stop()

    def test_pool_full_conflict(self, tmp_path):
        ctl = _paused_controller(tmp_path, agent={
            "simulations": 4, "horizon": 1, "max_specialists": 2,
            "initial_models": 2})
        try:
            client = TestClient(create_app(ctl))
            resp = client.post("/inject", json={"predicates": VALID_SPECS})
            assert resp.status_code == 409
            resp2 = client.post("/inject", json={"predicates": VALID_SPECS,
                                                 "drop": "lowest"})
            assert resp2.status_code == 200
        finally:
            ctl.stop()

    def test_pause_resume_step(self, tmp_path):
        ctl = _paused_controller(tmp_path)
        try:
            client = TestClient(create_app(ctl))
            t0 = client.get("/status").json()["t"]
            client.post("/step")
            assert _wait(lambda: client.get("/status").json()["t"] == t0 + 1)
            client.post("/resume")
            assert _wait(lambda: ctl.finished)
            assert client.get("/status").json()["t"] == 25
        finally:
            ctl.stop()


class TestEventStream:
    def test_stream_covers_every_step(self, tmp_path):
        ctl = RunController(_config(steps=15), seed=0,
                            out_dir=tmp_path / "s" / "seed0")
        ctl.start()
        try:
            client = TestClient(create_app(ctl))
            seen_steps = []
            seqs = []
            with client.stream("GET", "/events") as resp:
                for line in resp.iter_lines():
                    if line.startswith("id: "):
                        seqs.append(int(line[4:]))
                    if line.startswith("data: "):
                        payload = json.loads(line[6:])
                        if payload["kind"] == "step":
                            seen_steps.append(payload["t"])
                        if payload["kind"] == "done":
                            break
            assert seen_steps == list(range(1, 16))
            assert seqs == sorted(seqs)
            # weights inside each step event sum to 1
        finally:
            ctl.stop()

    def test_resume_from_sequence_number(self, tmp_path):
        ctl = RunController(_config(steps=10), seed=0,
                            out_dir=tmp_path / "s2" / "seed0")
        ctl.start()
        try:
            assert _wait(lambda: ctl.finished)
            client = TestClient(create_app(ctl))
            # gather everything, then re-request from midway
            all_ids = [seq for seq, _ in ctl.events_since(0)]
            mid = all_ids[len(all_ids) // 2]
            with client.stream("GET", f"/events?since={mid}") as resp:
                got = []
                for line in resp.iter_lines():
                    if line.startswith("id: "):
                        got.append(int(line[4:]))
                    if line.startswith("data: ") and '"done"' in line:
                        break
            assert got[0] == mid
            assert got == all_ids[len(all_ids) // 2:]
        finally:
            ctl.stop()


class TestLiveReplay:
    def test_replay_reproduces_live_logs(self, tmp_path):
        cfg = _config(steps=20)
        live_dir = tmp_path / "live" / "seed0"
        ctl = RunController(cfg, seed=0, out_dir=live_dir)
        ctl.pause()
        ctl.start()
        try:
            client = TestClient(create_app(ctl))
            # six quiet steps
            for _ in range(6):
                client.post("/step")
            assert _wait(lambda: ctl.run.t == 6)
            # inject at the next boundary
            client.post("/inject", json={"predicates": VALID_SPECS})
            client.post("/step")
            assert _wait(lambda: ctl.run.t == 7)
            # retire one initial model a few steps later
            victim = client.get("/status").json()["pool"][0]["id"]
            client.post("/retire", json={"specialist_id": victim})
            client.post("/resume")
            assert _wait(lambda: ctl.finished)
        finally:
            ctl.stop()
        rows = [json.loads(l) for l in
                (live_dir / "commands.jsonl").read_text().splitlines()]
        assert len(rows) == 2
        replay_dir = tmp_path / "replayed"
        replay_run(cfg, 0, rows, out_dir=replay_dir)
        for name in ("steps.csv", "weights.csv", "events.csv"):
            assert (replay_dir / name).read_bytes() == (live_dir / name).read_bytes(), name
