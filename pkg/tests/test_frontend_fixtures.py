"""The board's recorded fixtures must stay valid against the live service."""

import json
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from playdiff.tacticd.cli import main as cli_main
from playdiff.tacticd.service import create_app

FIXTURES = Path(__file__).resolve().parent.parent / "frontend" / "fixtures"


@pytest.fixture(scope="module")
def client(tmp_path_factory):
    root = tmp_path_factory.mktemp("fixtures-srv")
    data = root / "data.jsonl"
    assert cli_main(["simulate", "--out", str(data), "--matches", "2", "--seed", "7", "--half-seconds", "90"]) == 0
    run = root / "model"
    assert cli_main(["train", "--dataset", str(data), "--out", str(run), "--preset", "micro", "--steps", "30", "--batch", "16", "--seed", "1"]) == 0
    return TestClient(create_app(str(run / "model.ckpt"), str(data)))


def test_request_fixture_is_schema_valid(client):
    body = (FIXTURES / "generate_request.json").read_text().strip()
    req = json.loads(body)
    resp = client.post("/generate", content=body, headers={"content-type": "application/json"})
    assert resp.status_code == 200, resp.text
    out = resp.json()
    assert len(out["trajectories"]) == req["n_samples"]
    assert out["guidance_scores"] is not None and out["reference_score"] is not None


def test_response_fixture_matches_schema_fields():
    body = json.loads((FIXTURES / "generate_response.json").read_text())
    assert body["schema_version"] == 1
    assert len(body["trajectories"]) == 20
    assert len(body["trajectories"][0]) == 23
    assert len(body["trajectories"][0][0]) == 64
    assert len(body["roles"]) == 23
    assert len(body["guidance_scores"]) == 20
    assert {"ade", "fde", "mr", "jade", "jfde", "jmr"} <= set(body["metrics"])


def test_scenario_fixture_shape():
    body = json.loads((FIXTURES / "scenario.json").read_text())
    assert len(body["truth_trajectories"]) == 23
    assert len(body["context_positions"]) == 10
    assert sorted(set(body["roles"])) == [0, 1, 2]
