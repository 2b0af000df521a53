"""Versioned JSON schemas of the HTTP API (see docs/api)."""

from __future__ import annotations

from typing import List, Literal, Optional

from pydantic import BaseModel, Field

SCHEMA_VERSION = 1


class ObjectiveSpec(BaseModel):
    kind: Literal["none", "rule", "composite", "dsl", "value", "preset"] = "none"
    id: Optional[str] = None  # rule id
    name: Optional[str] = None  # preset name
    params: Optional[dict] = None
    program: Optional[str] = None  # DSL source
    path: Optional[str] = None  # DSL program file (CLI-side convenience)
    items: Optional[List["ObjectiveSpec.Item"]] = None

    class Item(BaseModel):
        kind: Literal["rule", "dsl", "value", "preset"]
        id: Optional[str] = None
        name: Optional[str] = None
        params: Optional[dict] = None
        program: Optional[str] = None
        weight: float = 1.0

    def as_core_spec(self) -> Optional[dict]:
        if self.kind == "none":
            return None
        data = self.model_dump(exclude_none=True)
        return data


class InlineScenario(BaseModel):
    context_positions: List[List[List[float]]] = Field(description="10 x 23 x 2 meters")
    trajectory_positions: List[List[List[float]]] = Field(description="L x 23 x 2 meters, 1 <= L <= 64")
    action: str
    time_to_event: float = 1.0
    action_destination: List[float] = Field(default=[52.5, 34.0])
    goal_difference: float = 0.0
    outcome: float = 1.0
    possession_length: float = 5.0
    controlling_team: float = 1.0


class GenerateRequest(BaseModel):
    schema_version: int = SCHEMA_VERSION
    scenario_id: Optional[str] = None
    inline_scenario: Optional[InlineScenario] = None
    ball_mode: Literal["predictive", "conditional"] = "predictive"
    n_samples: int = Field(default=20, ge=1, le=64)
    seed: int = 0
    objective: ObjectiveSpec = Field(default_factory=ObjectiveSpec)
    guided_team: Literal["attacking", "defending", "none"] = "none"
    guidance_scale: Optional[float] = Field(default=None, ge=0)
    opponent_mode: Literal["recorded", "replayed", "reactive"] = "recorded"
    include_pitch_control: bool = False


class MetricsOut(BaseModel):
    ade: float
    fde: float
    mr: float
    jade: float
    jfde: float
    jmr: float


class PitchControlOut(BaseModel):
    grid_x: int
    grid_y: int
    samples: List[List[List[float]]]
    reference: List[List[float]]


class GenerateResponse(BaseModel):
    schema_version: int = SCHEMA_VERSION
    scenario_id: Optional[str]
    trajectories: List[List[List[List[float]]]] = Field(description="N x 23 x 64 x 2 meters")
    roles: List[int]
    context_len: int = 10
    guidance_scores: Optional[List[float]] = None
    reference_score: Optional[float] = None
    metrics: Optional[MetricsOut] = None
    pitch_control: Optional[PitchControlOut] = None


class ScenarioSummary(BaseModel):
    id: str
    action: str
    split: str
    game_id: int
    event_id: int
    valid_frames: int


class ScenarioDetail(BaseModel):
    id: str
    action: str
    split: str
    event_metadata: dict
    global_feature: dict
    time_to_event: float
    action_destination: List[float]
    context_positions: List[List[List[float]]]
    truth_trajectories: List[List[List[float]]] = Field(description="23 x 64 x 2 meters, padded")
    validity: List[List[float]]
    roles: List[int]
    context_len: int = 10


class DslCheckRequest(BaseModel):
    program: str


class DslCheckResponse(BaseModel):
    ok: bool
    normalized: Optional[str] = None
    fixture_score: Optional[float] = None


class PresetInfo(BaseModel):
    name: str
    kind: str
    description: str
    default_scale: float


class HealthResponse(BaseModel):
    status: str
    version: str
    schema_version: int = SCHEMA_VERSION
    ball_mode: str
    preset_parameters: int
