"""Record the JSON fixtures the board's offline tests run against.

Spins the real service in-process (tiny dataset + briefly trained desk
model), replays the canonical board request against it and freezes the
verbatim response bodies.  Rerun after intentional schema changes:

    python3 frontend/scripts/record_fixtures.py
"""

import json
import pathlib
import sys
import tempfile

from fastapi.testclient import TestClient

from playdiff.tacticd.cli import main as cli_main
from playdiff.tacticd.service import create_app

FIXTURES = pathlib.Path(__file__).resolve().parent.parent / "fixtures"


def compose_request(scenario_id: str) -> str:
    """Byte-for-byte the board's composeRequest serialization (draft:
    support @ 1 + zone14 @ 0.5, attacking, 20 samples, seed 7)."""
    payload = {
        "schema_version": 1,
        "scenario_id": scenario_id,
        "ball_mode": "predictive",
        "n_samples": 20,
        "seed": 7,
        "objective": {
            "kind": "composite",
            "items": [
                {"kind": "rule", "id": "support", "weight": 1},
                {"kind": "rule", "id": "zone14", "weight": 0.5},
            ],
        },
        "guided_team": "attacking",
        "guidance_scale": None,
        "opponent_mode": "recorded",
        "include_pitch_control": False,
    }
    return json.dumps(payload, separators=(",", ":"))


def main() -> int:
    FIXTURES.mkdir(exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        tmp = pathlib.Path(tmp)
        data = tmp / "data.jsonl"
        run = tmp / "model"
        assert cli_main(["simulate", "--out", str(data), "--matches", "2", "--seed", "7", "--half-seconds", "90"]) == 0
        assert cli_main([
            "train", "--dataset", str(data), "--out", str(run),
            "--preset", "micro", "--steps", "120", "--batch", "32", "--seed", "1",
        ]) == 0

        client = TestClient(create_app(str(run / "model.ckpt"), str(data)))
        scenarios = client.get("/scenarios", params={"split": "test"}).json()
        scenario_id = scenarios[0]["id"]

        detail = client.get(f"/scenarios/{scenario_id}")
        (FIXTURES / "scenario.json").write_bytes(detail.content)

        request_body = compose_request(scenario_id)
        (FIXTURES / "generate_request.json").write_text(request_body + "\n")

        response = client.post("/generate", content=request_body, headers={"content-type": "application/json"})
        assert response.status_code == 200, response.text
        (FIXTURES / "generate_response.json").write_bytes(response.content)

        presets = client.get("/objectives/presets")
        (FIXTURES / "presets.json").write_bytes(presets.content)

    body = json.loads(response.content)
    print(f"recorded fixtures for scenario {scenario_id}: "
          f"{len(body['trajectories'])} samples, scores={body['guidance_scores'] is not None}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
