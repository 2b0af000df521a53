"""HTTP service powering the interactive board.

Stateless: weights are read-only after startup, the scenario store is the
loaded dataset file, and every generation request is independent.  Error
mapping: 400 schema violations (with field path), 404 unknown scenario,
422 objective parse failures (with DSL diagnostics), 500 opaque id.
"""

from __future__ import annotations

import uuid
from typing import Optional

import numpy as np
from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from .. import __version__
from ..madit import Denoiser, load_checkpoint, parameter_count
from ..objectives import DslError, dsl_eval, dsl_parse, objective_presets, pretty_print
from ..objectives.hooks import DEFAULT_SCALES
from ..pitchdata import load_dataset, normalize, split_dataset, window_from_record
from ..pitchdata.records import EventRecord
from . import core
from .schemas import (
    DslCheckRequest,
    DslCheckResponse,
    GenerateRequest,
    GenerateResponse,
    HealthResponse,
    MetricsOut,
    PitchControlOut,
    PresetInfo,
    ScenarioDetail,
    ScenarioSummary,
)

_PRESET_BLURBS = {
    "attacking_rules": "support + spread + passing-angle spread + zone-14 presence",
    "defending_rules": "press/support + compactness + deep defending + pass-lane blocking",
    "attacking_pcv": "maximize the attacking team's pitch control",
    "defending_pcv": "maximize the defending team's pitch control",
}


class ScenarioStore:
    """Immutable id -> record map over a dataset file, with a fixed split."""

    def __init__(self, dataset_path, split_seed: int = 0, test_fraction: float = 0.2):
        records = load_dataset(dataset_path)
        train, test = split_dataset(records, test_fraction, mode="random", seed=split_seed)
        self._split = {}
        self._by_id = {}
        for split_name, bucket in (("train", train), ("test", test)):
            for rec in bucket:
                rid = f"g{rec.event_metadata['game_id']}-e{rec.event_metadata['event_id']}"
                self._by_id[rid] = rec
                self._split[rid] = split_name

    def get(self, scenario_id: str) -> EventRecord:
        if scenario_id not in self._by_id:
            raise KeyError(scenario_id)
        return self._by_id[scenario_id]

    def split_of(self, scenario_id: str) -> str:
        return self._split[scenario_id]

    def list(self, split: Optional[str] = None):
        for rid, rec in sorted(self._by_id.items(), key=lambda kv: (kv[1].event_metadata["game_id"], kv[1].event_metadata["event_id"])):
            if split in (None, "all") or self._split[rid] == split:
                yield rid, rec


def record_from_inline(inline) -> EventRecord:
    ctx = np.asarray(inline.context_positions, dtype=np.float64)
    traj = np.asarray(inline.trajectory_positions, dtype=np.float64)
    feats = np.zeros((23, 4))
    return EventRecord(
        event_metadata={"game_id": -1, "event_id": -1, "episode_id": -1},
        global_feature={
            "goal_difference": inline.goal_difference,
            "outcome": inline.outcome,
            "possession_length": inline.possession_length,
            "controlling_team": inline.controlling_team,
        },
        time_to_event=inline.time_to_event,
        action=inline.action,
        action_destination=tuple(inline.action_destination),
        is_home_action=1,
        is_attacking_action=1,
        home_reward=0.0,
        away_reward=0.0,
        done=False,
        context_positions=ctx,
        context_features=feats,
        trajectory_positions=traj,
        trajectory_features=feats,
    ).validate()


def create_app(checkpoint_path, dataset_path, value_checkpoint_path=None, split_seed: int = 0) -> FastAPI:
    weights, cfg, _ = load_checkpoint(checkpoint_path)
    denoiser = Denoiser(cfg, weights)
    value_model = None
    if value_checkpoint_path:
        vw, vcfg, _ = load_checkpoint(value_checkpoint_path)
        value_model = Denoiser(vcfg, vw)
    store = ScenarioStore(dataset_path, split_seed=split_seed)

    app = FastAPI(title="playdiff", version=__version__)

    @app.exception_handler(RequestValidationError)
    async def validation_to_400(request: Request, exc: RequestValidationError):
        errors = [
            {"field": ".".join(str(p) for p in err["loc"] if p != "body"), "message": err["msg"]}
            for err in exc.errors()
        ]
        return JSONResponse(status_code=400, content={"detail": "schema violation", "errors": errors})

    @app.exception_handler(Exception)
    async def internal_to_500(request: Request, exc: Exception):
        ref = uuid.uuid4().hex[:12]
        return JSONResponse(status_code=500, content={"detail": "internal error", "reference": ref})

    @app.get("/health", response_model=HealthResponse)
    def health():
        return HealthResponse(
            status="ok",
            version=__version__,
            ball_mode=cfg.ball_mode,
            preset_parameters=parameter_count(cfg),
        )

    @app.get("/scenarios", response_model=list[ScenarioSummary])
    def scenarios(split: Optional[str] = None):
        if split not in (None, "all", "train", "test"):
            raise HTTPException(status_code=400, detail=f"split: unknown value {split!r}")
        out = []
        for rid, rec in store.list(split):
            out.append(
                ScenarioSummary(
                    id=rid,
                    action=rec.action,
                    split=store.split_of(rid),
                    game_id=rec.event_metadata["game_id"],
                    event_id=rec.event_metadata["event_id"],
                    valid_frames=min(10 + rec.trajectory_positions.shape[0], 64),
                )
            )
        return out

    @app.get("/scenarios/{scenario_id}", response_model=ScenarioDetail)
    def scenario_detail(scenario_id: str):
        try:
            rec = store.get(scenario_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown scenario {scenario_id!r}") from None
        window = window_from_record(rec, cfg.ball_mode)
        return ScenarioDetail(
            id=scenario_id,
            action=rec.action,
            split=store.split_of(scenario_id),
            event_metadata=rec.event_metadata,
            global_feature=rec.global_feature,
            time_to_event=rec.time_to_event,
            action_destination=list(rec.action_destination),
            context_positions=rec.context_positions.tolist(),
            truth_trajectories=window.positions_meters().tolist(),
            validity=window.validity.tolist(),
            roles=window.roles.tolist(),
        )

    @app.post("/generate", response_model=GenerateResponse)
    def generate(req: GenerateRequest):
        if req.scenario_id is None and req.inline_scenario is None:
            raise HTTPException(status_code=400, detail="scenario_id: provide scenario_id or inline_scenario")
        if req.scenario_id is not None:
            try:
                rec = store.get(req.scenario_id)
            except KeyError:
                raise HTTPException(status_code=404, detail=f"unknown scenario {req.scenario_id!r}") from None
        else:
            try:
                rec = record_from_inline(req.inline_scenario)
            except (ValueError, KeyError) as exc:
                raise HTTPException(status_code=400, detail=f"inline_scenario: {exc}") from None
        if req.objective.kind != "none" and req.guided_team == "none":
            raise HTTPException(status_code=400, detail="guided_team: required when an objective is set")
        try:
            result = core.generate(
                denoiser,
                rec,
                objective_spec=req.objective.as_core_spec(),
                guided_team=req.guided_team,
                guidance_scale=req.guidance_scale,
                opponent_mode=req.opponent_mode,
                ball_mode=req.ball_mode,
                n_samples=req.n_samples,
                seed=req.seed,
                value_model=value_model,
                include_pitch_control=req.include_pitch_control,
            )
        except DslError as exc:
            raise HTTPException(status_code=422, detail={"message": str(exc), "line": exc.line, "col": exc.col}) from None
        except core.ObjectiveSpecError as exc:
            raise HTTPException(status_code=422, detail={"message": str(exc)}) from None
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None
        return GenerateResponse(
            scenario_id=req.scenario_id,
            trajectories=result.trajectories.tolist(),
            roles=result.roles,
            guidance_scores=result.guidance_scores,
            reference_score=result.reference_score,
            metrics=None if result.metrics is None else MetricsOut(**{k: getattr(result.metrics, k) for k in ("ade", "fde", "mr", "jade", "jfde", "jmr")}),
            pitch_control=None if result.pitch_control is None else PitchControlOut(**result.pitch_control),
        )

    @app.post("/dsl/check", response_model=DslCheckResponse)
    def dsl_check(req: DslCheckRequest):
        try:
            prog = dsl_parse(req.program)
        except DslError as exc:
            raise HTTPException(status_code=422, detail={"message": str(exc), "line": exc.line, "col": exc.col}) from None
        rng = np.random.default_rng(0)
        score, _ = dsl_eval(prog, rng.uniform(30, 75, (6, 1, 2)), rng.uniform(25, 80, (6, 11, 2)))
        return DslCheckResponse(ok=True, normalized=pretty_print(prog), fixture_score=score)

    @app.get("/objectives/presets", response_model=list[PresetInfo])
    def presets():
        out = []
        for name, obj in objective_presets().items():
            kind = "rule"
            out.append(
                PresetInfo(
                    name=name,
                    kind=kind,
                    description=_PRESET_BLURBS.get(name, ""),
                    default_scale=DEFAULT_SCALES.get(kind, 1.0),
                )
            )
        from ..objectives.rules import RULE_IDS

        for rid in RULE_IDS:
            out.append(PresetInfo(name=rid, kind="single-rule", description=f"rule objective {rid}", default_scale=1.0))
        return out

    return app
