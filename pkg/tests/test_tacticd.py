import json
import subprocess
import sys

import numpy as np
import pytest
from fastapi.testclient import TestClient

from playdiff.madit import Denoiser, load_checkpoint
from playdiff.tacticd import core
from playdiff.tacticd.cli import main as cli_main
from playdiff.tacticd.service import create_app


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """Tiny dataset + micro checkpoints shared by the module's tests."""
    root = tmp_path_factory.mktemp("tacticd")
    data = root / "data.jsonl"
    assert cli_main(["simulate", "--out", str(data), "--matches", "2", "--seed", "7", "--half-seconds", "90"]) == 0
    run = root / "model"
    assert (
        cli_main(
            ["train", "--dataset", str(data), "--out", str(run), "--preset", "micro", "--steps", "60", "--batch", "16", "--seed", "1"]
        )
        == 0
    )
    vrun = root / "value"
    assert (
        cli_main(
            ["train", "--dataset", str(data), "--out", str(vrun), "--model", "value", "--preset", "micro", "--steps", "20", "--batch", "16", "--seed", "1"]
        )
        == 0
    )
    return {"root": root, "data": data, "ckpt": run / "model.ckpt", "value": vrun / "value.ckpt"}


class TestCli:
    def test_simulate_byte_identical(self, tmp_path):
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        for out in (a, b):
            assert cli_main(["simulate", "--out", str(out), "--matches", "2", "--seed", "3", "--half-seconds", "60"]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_train_loss_decreases(self, workdir):
        losses = [float(line.split(",")[1]) for line in (workdir["root"] / "model" / "loss.csv").read_text().splitlines()[1:]]
        assert np.mean(losses[-10:]) < np.mean(losses[:5])

    def test_manifest_documents_parameters(self, workdir):
        manifest = json.loads((workdir["root"] / "model" / "manifest.json").read_text())
        assert "parameters" in manifest and manifest["parameters"]["full"] > 0
        assert manifest["run"]["preset"] == "micro"

    def test_sample_deterministic_and_matches_service(self, workdir, tmp_path):
        out1, out2 = tmp_path / "s1.json", tmp_path / "s2.json"
        args = [
            "sample",
            "--checkpoint",
            str(workdir["ckpt"]),
            "--dataset",
            str(workdir["data"]),
            "--scenario",
            "2",
            "--n",
            "3",
            "--seed",
            "11",
            "--objective",
            '{"kind":"rule","id":"zone14"}',
            "--guided-team",
            "attacking",
        ]
        assert cli_main(args + ["--out", str(out1)]) == 0
        assert cli_main(args + ["--out", str(out2)]) == 0
        assert out1.read_bytes() == out2.read_bytes()

    def test_usage_error_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            cli_main(["train", "--bogus-flag"])
        assert exc.value.code == 2

    def test_runtime_error_exits_1(self, tmp_path, capsys):
        rc = cli_main(["train", "--dataset", str(tmp_path / "missing.jsonl"), "--out", str(tmp_path / "x")])
        assert rc == 1
        assert "error:" in capsys.readouterr().err

    def test_evaluate_identity_fixture(self, workdir, tmp_path):
        out = tmp_path / "eval.json"
        rc = cli_main(
            [
                "evaluate",
                "--checkpoint",
                str(workdir["ckpt"]),
                "--dataset",
                str(workdir["data"]),
                "--out",
                str(out),
                "--instances",
                "2",
                "--n",
                "2",
                "--seed",
                "5",
            ]
        )
        assert rc == 0
        payload = json.loads(out.read_text())
        assert set(payload) == {"instances", "aggregate"}

    def test_dsl_check_error_exit(self, capsys):
        assert cli_main(["dsl-check", "relu("]) == 1
        assert "parse error" in capsys.readouterr().err


class TestCheckpointReload:
    def test_reload_reproduces_metrics_bit_exactly(self, workdir, tmp_path):
        weights, cfg, _ = load_checkpoint(workdir["ckpt"])
        den = Denoiser(cfg, weights)
        pairs = core.load_window_pairs(workdir["data"], cfg.ball_mode)
        r1, _ = core.evaluate_cmd(den, pairs, 3, 2, seed=4)
        weights2, cfg2, _ = load_checkpoint(workdir["ckpt"])
        r2, _ = core.evaluate_cmd(Denoiser(cfg2, weights2), pairs, 3, 2, seed=4)
        for a, b in zip(r1, r2):
            assert a == b


class TestService:
    @pytest.fixture(scope="class")
    def client(self, workdir):
        app = create_app(str(workdir["ckpt"]), str(workdir["data"]), str(workdir["value"]))
        return TestClient(app, raise_server_exceptions=False)

    def test_health(self, client):
        body = client.get("/health").json()
        assert body["status"] == "ok" and body["schema_version"] == 1

    def test_scenarios_and_detail(self, client):
        listing = client.get("/scenarios", params={"split": "test"}).json()
        assert listing and all(s["split"] == "test" for s in listing)
        detail = client.get(f"/scenarios/{listing[0]['id']}").json()
        assert len(detail["truth_trajectories"]) == 23
        assert len(detail["context_positions"]) == 10

    def test_unknown_scenario_404(self, client):
        assert client.get("/scenarios/g9-e99999").status_code == 404

    def test_generate_matches_cli(self, client, workdir, tmp_path):
        listing = client.get("/scenarios").json()
        sid = listing[4]["id"]
        req = {
            "scenario_id": sid,
            "n_samples": 3,
            "seed": 11,
            "objective": {"kind": "rule", "id": "zone14"},
            "guided_team": "attacking",
            "opponent_mode": "recorded",
        }
        resp = client.post("/generate", json=req)
        assert resp.status_code == 200
        body = resp.json()

        out = tmp_path / "cli.json"
        rc = cli_main(
            [
                "sample",
                "--checkpoint",
                str(workdir["ckpt"]),
                "--dataset",
                str(workdir["data"]),
                "--scenario",
                sid,
                "--out",
                str(out),
                "--n",
                "3",
                "--seed",
                "11",
                "--objective",
                '{"kind":"rule","id":"zone14"}',
                "--guided-team",
                "attacking",
            ]
        )
        assert rc == 0
        cli_payload = json.loads(out.read_text())
        assert cli_payload["trajectories"] == body["trajectories"]
        assert cli_payload["guidance_scores"] == body["guidance_scores"]

    def test_generate_unguided_seed_deterministic(self, client):
        listing = client.get("/scenarios").json()
        req = {"scenario_id": listing[0]["id"], "n_samples": 2, "seed": 3}
        a = client.post("/generate", json=req).json()
        b = client.post("/generate", json=req).json()
        assert a["trajectories"] == b["trajectories"]

    def test_malformed_objective_400_names_field(self, client):
        listing = client.get("/scenarios").json()
        r = client.post("/generate", json={"scenario_id": listing[0]["id"], "objective": {"kind": "bogus"}})
        assert r.status_code == 400
        assert any("objective" in e["field"] for e in r.json()["errors"])

    def test_dsl_parse_failure_422_with_diagnostics(self, client):
        listing = client.get("/scenarios").json()
        r = client.post(
            "/generate",
            json={
                "scenario_id": listing[0]["id"],
                "objective": {"kind": "dsl", "program": "relu("},
                "guided_team": "attacking",
            },
        )
        assert r.status_code == 422
        detail = r.json()["detail"]
        assert detail["line"] == 1 and detail["col"] == 6

    def test_dsl_check_endpoint(self, client):
        ok = client.post("/dsl/check", json={"program": "mean(x(team_pos), all)"})
        assert ok.status_code == 200 and ok.json()["ok"]
        bad = client.post("/dsl/check", json={"program": "mean("})
        assert bad.status_code == 422

    def test_value_objective(self, client):
        listing = client.get("/scenarios").json()
        r = client.post(
            "/generate",
            json={
                "scenario_id": listing[0]["id"],
                "n_samples": 2,
                "objective": {"kind": "value"},
                "guided_team": "defending",
                "guidance_scale": 2.0,
            },
        )
        assert r.status_code == 200
        assert r.json()["guidance_scores"] is not None

    def test_pitch_control_grids_optional(self, client):
        listing = client.get("/scenarios").json()
        base = {"scenario_id": listing[0]["id"], "n_samples": 2, "seed": 0}
        without = client.post("/generate", json=base).json()
        assert without["pitch_control"] is None
        with_pc = client.post("/generate", json={**base, "include_pitch_control": True}).json()
        assert with_pc["pitch_control"]["grid_x"] == 24
        assert len(with_pc["pitch_control"]["samples"]) == 2

    def test_presets_listing(self, client):
        names = {p["name"] for p in client.get("/objectives/presets").json()}
        assert {"attacking_rules", "defending_rules", "support", "pcv"} <= names

    def test_inline_scenario(self, client):
        rng = np.random.default_rng(0)
        ctx = rng.uniform(20, 80, (10, 23, 2)).tolist()
        traj = rng.uniform(20, 80, (30, 23, 2)).tolist()
        r = client.post(
            "/generate",
            json={
                "inline_scenario": {
                    "context_positions": ctx,
                    "trajectory_positions": traj,
                    "action": "Pass",
                },
                "n_samples": 2,
                "opponent_mode": "reactive",
            },
        )
        assert r.status_code == 200
        assert len(r.json()["trajectories"]) == 2
