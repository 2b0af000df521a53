"""Shared run logic behind the CLI and the HTTP service.

The CLI and the service both funnel through :func:`generate`, so
identical logical requests with identical seeds produce identical
artifacts.  Training runs write a manifest capturing the full effective
configuration, including parameter counts against the published targets.
"""

from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ..evalkit import MetricReport, aggregate_reports, displacement_metrics, guidance_report
from ..madit import (
    ConditionBundle,
    Denoiser,
    backbone_parameter_count,
    batch_from_windows,
    condition_from_record,
    init_weights,
    load_checkpoint,
    parameter_count,
    preset,
    save_checkpoint,
)
from ..madit.config import PRESET_PARAMS_M, ModelConfig
from ..objectives import (
    CompositeObjective,
    DSLObjective,
    DslError,
    PCVObjective,
    RuleObjective,
    RuleParams,
    dsl_parse,
    make_hook,
    objective_presets,
)
from ..objectives.pitchcontrol import PitchControlConfig, pitch_control_field
from ..pitchdata import (
    SimulatorConfig,
    generate_dataset,
    load_dataset,
    normalize,
    save_dataset,
    split_dataset,
    window_from_record,
    windows_from_records,
)
from ..sampler import OptimConfig, SamplerConfig, Trainer, build_schedule, sample

DIFFUSION_STEPS = 20


@dataclass
class RunConfig:
    """Training-run settings; desk-scale defaults, full-scale selectable."""

    preset: str = "S-desk"
    ball_mode: str = "predictive"
    steps: int = 5000
    batch: int = 64
    lr: float = 3e-4
    weight_decay: float = 1e-4
    ema_decay: float = 0.995
    diffusion_steps: int = DIFFUSION_STEPS
    seed: int = 0
    checkpoint_every: int = 1000
    context_encoder: bool = True
    event_encoder: bool = True

    def model_config(self, head: str = "noise") -> ModelConfig:
        return preset(
            self.preset,
            ball_mode=self.ball_mode,
            context_encoder=self.context_encoder,
            event_encoder=self.event_encoder,
            head=head,
        )


def write_manifest(path, run: RunConfig, cfg: ModelConfig, extra: Optional[dict] = None):
    """Capture the effective configuration of a run beside its artifacts."""
    bb = backbone_parameter_count(cfg)
    full = parameter_count(cfg)
    target = PRESET_PARAMS_M.get(run.preset)
    manifest = {
        "run": dataclasses.asdict(run),
        "model": dataclasses.asdict(cfg),
        "parameters": {
            "backbone_only": bb,
            "full": full,
            "published_target_m": target,
            "backbone_deviation_pct": None if target is None else round((bb / 1e6 - target) / target * 100.0, 2),
        },
        "written_at": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    if extra:
        manifest.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
    return manifest


def simulate_cmd(out_path, matches: int, seed: int, half_duration_s: float = 240.0) -> int:
    cfg = SimulatorConfig(seed=seed, half_duration_s=half_duration_s)
    records = generate_dataset(cfg, n_matches=matches, master_seed=seed)
    return save_dataset(records, out_path)


def load_window_pairs(dataset_path, ball_mode: str = "predictive"):
    records = load_dataset(dataset_path)
    return windows_from_records(records, ball_mode)


def train_denoiser_cmd(dataset_path, run: RunConfig, out_dir, log_every: int = 100):
    """Train the noise model; writes checkpoints, loss log and manifest."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg = run.model_config()
    pairs = load_window_pairs(dataset_path, run.ball_mode)
    if not pairs:
        raise RuntimeError(f"no usable windows in {dataset_path}")
    schedule = build_schedule(run.diffusion_steps)
    model = Denoiser(cfg, init_weights(cfg, run.seed))
    trainer = Trainer(
        model,
        schedule,
        OptimConfig(lr=run.lr, weight_decay=run.weight_decay, ema_decay=run.ema_decay),
        seed=run.seed,
    )
    rng = np.random.default_rng(run.seed)
    losses = []
    batch = min(run.batch, len(pairs))
    from ..madit.model import WindowBank

    bank = WindowBank(pairs, cfg)
    for step in range(run.steps):
        idx = rng.integers(0, len(bank), size=batch)
        pos, mask, cond = bank.take(idx)
        loss = trainer.noise_step(pos, mask, cond)
        losses.append(loss)
        if run.checkpoint_every and (step + 1) % run.checkpoint_every == 0:
            _write_ckpt(out_dir, trainer, cfg, run, step + 1)
    _write_ckpt(out_dir, trainer, cfg, run, run.steps, final=True)
    with open(out_dir / "loss.csv", "w", encoding="utf-8") as fh:
        fh.write("step,loss\n")
        for i, l in enumerate(losses):
            fh.write(f"{i + 1},{l}\n")
    manifest = write_manifest(out_dir / "manifest.json", run, cfg, {"final_loss": losses[-1], "initial_loss": losses[0]})
    return losses, manifest


def _write_ckpt(out_dir: Path, trainer: Trainer, cfg, run: RunConfig, step: int, final: bool = False):
    extra = {"step": step, "seed": run.seed, "weights": "ema"}
    save_checkpoint(out_dir / ("model.ckpt" if final else f"model-{step:06d}.ckpt"), trainer.ema, cfg, extra)
    if final:
        save_checkpoint(out_dir / "model-raw.ckpt", trainer.denoiser.weights, cfg, {**extra, "weights": "raw"})


def train_value_cmd(dataset_path, run: RunConfig, out_dir, gamma: float = 0.95):
    """Train the scalar-return model on attacking-perspective returns."""
    from ..objectives.value import ValueModelSpec, attacking_returns, train_value
    from ..pitchdata.windows import Episode

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = load_dataset(dataset_path)
    episodes = _group_episodes(records)
    returns = attacking_returns(episodes, gamma)
    flat_records = [r for ep in episodes for r in ep.records]
    pairs, targets = [], []
    for rec, ret in zip(flat_records, returns):
        try:
            pairs.append((window_from_record(rec, run.ball_mode), rec))
            targets.append(ret)
        except ValueError:
            continue
    cfg = run.model_config(head="scalar-value")
    spec = ValueModelSpec(config=cfg, gamma=gamma, steps=run.steps, batch=run.batch, lr=run.lr, seed=run.seed)
    schedule = build_schedule(run.diffusion_steps)
    model, history = train_value(pairs, targets, spec, schedule)
    save_checkpoint(out_dir / "value.ckpt", model.weights, cfg, {"gamma": gamma, "steps": run.steps})
    write_manifest(out_dir / "manifest.json", run, cfg, {"head": "scalar-value", "gamma": gamma})
    return model, history


def _group_episodes(records):
    from ..pitchdata.windows import Episode

    groups: dict = {}
    for rec in records:
        key = (rec.event_metadata["game_id"], rec.event_metadata["episode_id"])
        groups.setdefault(key, []).append(rec)
    episodes = []
    for key in sorted(groups):
        recs = sorted(groups[key], key=lambda r: r.event_metadata["event_id"])
        cause = "goal" if any(abs(r.home_reward) == 1.0 and r.done for r in recs) else "half_end"
        try:
            episodes.append(Episode(recs, cause))
        except ValueError:
            continue
    return episodes


# ---------------------------------------------------------------------------
# Objective spec parsing (JSON-facing).
# ---------------------------------------------------------------------------


class ObjectiveSpecError(ValueError):
    pass


def parse_objective_spec(spec: dict, value_model: Optional[Denoiser] = None):
    """JSON objective description -> objective instance (or None).

    Kinds: none | rule | composite | dsl | value | preset.  DSL parse
    failures surface as :class:`DslError` so callers can map them to 422.
    """
    kind = spec.get("kind")
    if kind in (None, "none"):
        return None, "none"
    if kind == "preset":
        name = spec.get("name")
        presets = objective_presets()
        if name not in presets:
            raise ObjectiveSpecError(f"objective.name: unknown preset {name!r}")
        return presets[name], "rule"
    if kind == "rule":
        rule_id = spec.get("id")
        if rule_id is None:
            raise ObjectiveSpecError("objective.id: missing rule id")
        params = RuleParams(**spec.get("params", {})) if spec.get("params") else RuleParams()
        try:
            obj = RuleObjective(rule_id, params) if rule_id != "pcv" else PCVObjective()
        except ValueError as exc:
            raise ObjectiveSpecError(f"objective.id: {exc}") from None
        return obj, "rule"
    if kind == "composite":
        items = spec.get("items")
        if not items:
            raise ObjectiveSpecError("objective.items: composite needs at least one item")
        parsed = []
        for i, item in enumerate(items):
            weight = item.get("weight", 1.0)
            if weight < 0:
                raise ObjectiveSpecError(f"objective.items[{i}].weight: must be >= 0")
            sub, _ = parse_objective_spec({k: v for k, v in item.items() if k != "weight"}, value_model)
            if sub is None:
                raise ObjectiveSpecError(f"objective.items[{i}]: cannot nest 'none'")
            parsed.append((sub, float(weight)))
        return CompositeObjective(tuple(parsed)), "composite"
    if kind == "dsl":
        program = spec.get("program")
        if not program and spec.get("path"):
            with open(spec["path"], encoding="utf-8") as fh:
                program = fh.read()
        if not program:
            raise ObjectiveSpecError("objective.program: missing DSL source (or path)")
        return DSLObjective(dsl_parse(program)), "dsl"
    if kind == "value":
        if value_model is None:
            raise ObjectiveSpecError("objective.kind=value requires a value-model checkpoint")
        return value_model, "value"
    raise ObjectiveSpecError(f"objective.kind: unknown kind {kind!r}")


# ---------------------------------------------------------------------------
# Generation.
# ---------------------------------------------------------------------------


@dataclass
class GenerateResult:
    trajectories: np.ndarray  # (N, 23, 64, 2) meters
    guidance_scores: Optional[list]
    reference_score: Optional[float]
    metrics: Optional[MetricReport]
    pitch_control: Optional[dict]
    roles: list


def generate(
    denoiser: Denoiser,
    record,
    objective_spec: Optional[dict] = None,
    guided_team: str = "none",
    guidance_scale: Optional[float] = None,
    opponent_mode: str = "recorded",
    ball_mode: Optional[str] = None,
    n_samples: int = 20,
    seed: int = 0,
    value_model: Optional[Denoiser] = None,
    include_pitch_control: bool = False,
    frame_range=(10, 64),
) -> GenerateResult:
    """Sample guided trajectories for one event record."""
    cfg = denoiser.cfg
    ball_mode = ball_mode or cfg.ball_mode
    if ball_mode != cfg.ball_mode:
        raise ValueError(f"checkpoint is a {cfg.ball_mode!r}-ball model; request asked for {ball_mode!r}")
    schedule = build_schedule(DIFFUSION_STEPS)
    window = window_from_record(record, ball_mode)
    cond = condition_from_record(window, record, cfg)

    objective, kind = (None, "none")
    if objective_spec:
        objective, kind = parse_objective_spec(objective_spec, value_model)
    hook = None
    if objective is not None:
        if guided_team not in ("attacking", "defending"):
            raise ValueError("guided_team must be 'attacking' or 'defending' when an objective is set")
        hook = make_hook(objective, guided_team, denoiser, schedule, kind=kind)
    scale = guidance_scale if guidance_scale is not None else (hook.default_scale if hook else 0.0)

    sampler_cfg = SamplerConfig(
        n_samples=n_samples,
        seed=seed,
        guidance_scale=scale if hook else 0.0,
        guided_team=guided_team if hook else "none",
        opponent_mode=opponent_mode,
        ball_mode=ball_mode,
    )
    # observed context frames are always pinned: they are data, not output
    clamp_ctx = window.context_len
    reference = window.positions
    if opponent_mode == "replayed" and hook is not None:
        # pin the unguided side to the model's own unguided prediction
        pre_cfg = SamplerConfig(n_samples=1, seed=seed ^ 0x5EED, ball_mode=ball_mode)
        pre_ref = window.positions if ball_mode == "conditional" else None
        pre, _ = sample(cond, denoiser, schedule, pre_cfg, reference=pre_ref)
        replay = normalize(pre[0])
        if ball_mode == "conditional":
            replay[22] = window.positions[22]
        reference = replay

    meters, scores = sample(
        cond, denoiser, schedule, sampler_cfg, reference=reference, hook=hook, clamp_context_frames=clamp_ctx
    )

    truth_m = window.positions_meters()
    reference_score = None
    if hook is not None:
        reference_score = float(hook.score_meters(truth_m, cond))
    metrics = None
    if window.valid_length() > window.context_len:
        metrics = displacement_metrics(
            meters,
            truth_m,
            window.validity,
            frame_range=frame_range,
            include_ball=(ball_mode == "predictive"),
        )
        metrics.guidance_scores = None if scores is None else [float(s) for s in scores]
        metrics.reference_score = reference_score

    pc = None
    if include_pitch_control:
        pc_cfg = PitchControlConfig()
        grids = []
        for i in range(meters.shape[0]):
            frame = meters[i, :, -1]
            grids.append(pitch_control_field(frame[0:11], frame[11:22], pc_cfg).tolist())
        truth_grid = pitch_control_field(truth_m[0:11, -1], truth_m[11:22, -1], pc_cfg).tolist()
        pc = {"grid_x": pc_cfg.grid_x, "grid_y": pc_cfg.grid_y, "samples": grids, "reference": truth_grid}

    return GenerateResult(
        trajectories=meters,
        guidance_scores=None if scores is None else [float(s) for s in scores],
        reference_score=reference_score,
        metrics=metrics,
        pitch_control=pc,
        roles=window.roles.tolist(),
    )


def evaluate_cmd(denoiser: Denoiser, pairs, n_instances: int, n_samples: int, seed: int, json_path=None, csv_path=None):
    """Best-of-N displacement metrics over held-out windows."""
    from ..evalkit import export_reports

    schedule = build_schedule(DIFFUSION_STEPS)
    reports, ids = [], []
    for i, (window, rec) in enumerate(pairs[:n_instances]):
        cond = condition_from_record(window, rec, denoiser.cfg)
        ref = window.positions if denoiser.cfg.ball_mode == "conditional" else None
        scfg = SamplerConfig(n_samples=n_samples, seed=seed + i, ball_mode=denoiser.cfg.ball_mode)
        meters, _ = sample(
            cond, denoiser, schedule, scfg, reference=window.positions, clamp_context_frames=window.context_len
        )
        reports.append(
            displacement_metrics(
                meters,
                window.positions_meters(),
                window.validity,
                include_ball=(denoiser.cfg.ball_mode == "predictive"),
            )
        )
        ids.append(f"g{rec.event_metadata['game_id']}-e{rec.event_metadata['event_id']}")
    payload = export_reports(reports, json_path, csv_path, ids=ids)
    return reports, payload


def static_baseline_report(pairs) -> MetricReport:
    """Hold every agent at its last context position; one pseudo-sample."""
    reports = []
    for window, _ in pairs:
        truth = window.positions_meters()
        pred = np.repeat(truth[:, window.context_len - 1 : window.context_len], truth.shape[1], axis=1)[None]
        reports.append(displacement_metrics(pred, truth, window.validity))
    return aggregate_reports(reports)


def scaling_cmd(
    dataset,
    presets: Sequence[str],
    fractions: Sequence[float],
    steps: int,
    batch: int,
    seed: int,
    eval_instances: int = 32,
    eval_samples: int = 8,
    out_csv=None,
    ball_mode: str = "predictive",
):
    """Train preset x data-fraction grid, report JADE/JFDE per cell.

    ``dataset`` is a JSONL path or an in-memory list of records.  Scaling
    runs use the backbone-only variant (no context encoder); sampling
    pins the context frames instead.
    """
    if isinstance(dataset, (str, bytes)) or hasattr(dataset, "__fspath__"):
        pairs = load_window_pairs(dataset, ball_mode)
    else:
        pairs = windows_from_records(dataset, ball_mode)
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(pairs))
    n_test = max(8, int(0.2 * len(pairs)))
    test = [pairs[i] for i in order[:n_test]]
    train_pool = [pairs[i] for i in order[n_test:]]

    rows = []
    for name in presets:
        for frac in fractions:
            subset = train_pool[: max(batch, int(len(train_pool) * frac))]
            cfg = preset(name, ball_mode=ball_mode, context_encoder=False, head="noise")
            schedule = build_schedule(DIFFUSION_STEPS)
            model = Denoiser(cfg, init_weights(cfg, seed))
            trainer = Trainer(model, schedule, OptimConfig(lr=3e-4), seed=seed)
            from ..madit.model import WindowBank

            bank = WindowBank(subset, cfg)
            srng = np.random.default_rng(seed)
            for _ in range(steps):
                idx = srng.integers(0, len(bank), size=min(batch, len(bank)))
                pos, mask, cond = bank.take(idx)
                trainer.noise_step(pos, mask, cond)
            ema = trainer.ema_denoiser()
            reports, _ = evaluate_cmd(ema, test, eval_instances, eval_samples, seed)
            agg = aggregate_reports(reports)
            rows.append(
                {
                    "preset": name,
                    "parameter_count": parameter_count(cfg),
                    "data_fraction": frac,
                    "steps": steps,
                    "jade": agg.jade,
                    "jfde": agg.jfde,
                }
            )
    if out_csv:
        import csv as _csv

        with open(out_csv, "w", encoding="utf-8", newline="") as fh:
            w = _csv.DictWriter(fh, fieldnames=["preset", "parameter_count", "data_fraction", "steps", "jade", "jfde"])
            w.writeheader()
            w.writerows(rows)
    return rows
