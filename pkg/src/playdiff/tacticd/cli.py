"""Command-line interface: simulate / train / sample / evaluate / scaling /
serve / dsl-check.  Every subcommand honors --seed and is deterministic
given it; usage errors exit 2, runtime failures exit 1."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="playdiff", description="Guided multi-agent trajectory diffusion for football tactics.")
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="write a synthetic JSON-lines dataset")
    sim.add_argument("--out", required=True, help="output .jsonl path")
    sim.add_argument("--matches", type=int, default=4)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--half-seconds", type=float, default=240.0, help="simulated seconds per half")

    tr = sub.add_parser("train", help="train the denoiser (or value model)")
    tr.add_argument("--dataset", required=True)
    tr.add_argument("--out", required=True, help="output run directory")
    tr.add_argument("--model", choices=["denoiser", "value"], default="denoiser")
    tr.add_argument("--preset", default="S-desk")
    tr.add_argument("--ball-mode", choices=["predictive", "conditional"], default="predictive")
    tr.add_argument("--steps", type=int, default=5000)
    tr.add_argument("--batch", type=int, default=64)
    tr.add_argument("--lr", type=float, default=3e-4)
    tr.add_argument("--ema-decay", type=float, default=0.995)
    tr.add_argument("--seed", type=int, default=0)
    tr.add_argument("--checkpoint-every", type=int, default=0, help="0 = final only")
    tr.add_argument("--no-context-encoder", action="store_true")
    tr.add_argument("--no-event-encoder", action="store_true")
    tr.add_argument("--gamma", type=float, default=0.95, help="value-model discount")

    sa = sub.add_parser("sample", help="generate trajectories for a scenario")
    sa.add_argument("--checkpoint", required=True)
    sa.add_argument("--dataset", required=True)
    sa.add_argument("--scenario", required=True, help="scenario id (g<game>-e<event>) or index")
    sa.add_argument("--out", required=True, help="output JSON path")
    sa.add_argument("--n", type=int, default=20)
    sa.add_argument("--seed", type=int, default=0)
    sa.add_argument("--objective", help="objective JSON file or inline JSON")
    sa.add_argument("--guided-team", choices=["attacking", "defending", "none"], default="none")
    sa.add_argument("--guidance-scale", type=float)
    sa.add_argument("--opponent-mode", choices=["recorded", "replayed", "reactive"], default="recorded")
    sa.add_argument("--value-checkpoint")
    sa.add_argument("--pitch-control", action="store_true")

    ev = sub.add_parser("evaluate", help="best-of-N displacement metrics on a dataset")
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--dataset", required=True)
    ev.add_argument("--out", required=True, help="output JSON path")
    ev.add_argument("--csv", help="optional CSV path")
    ev.add_argument("--instances", type=int, default=32)
    ev.add_argument("--n", type=int, default=20)
    ev.add_argument("--seed", type=int, default=0)

    sc = sub.add_parser("scaling", help="train preset x data-fraction grid, emit a JADE/JFDE table")
    sc.add_argument("--dataset", required=True)
    sc.add_argument("--out", required=True, help="output CSV path")
    sc.add_argument("--presets", default="S,B")
    sc.add_argument("--fractions", default="0.25,0.5,1.0")
    sc.add_argument("--steps", type=int, default=400)
    sc.add_argument("--batch", type=int, default=16)
    sc.add_argument("--eval-instances", type=int, default=32)
    sc.add_argument("--eval-samples", type=int, default=8)
    sc.add_argument("--seed", type=int, default=0)

    se = sub.add_parser("serve", help="start the HTTP service")
    se.add_argument("--checkpoint", required=True)
    se.add_argument("--dataset", required=True)
    se.add_argument("--value-checkpoint")
    se.add_argument("--host", default="127.0.0.1")
    se.add_argument("--port", type=int, default=8500)
    se.add_argument("--split-seed", type=int, default=0)

    dc = sub.add_parser("dsl-check", help="parse a guidance program and print its fixture score")
    dc.add_argument("program", help="program file path or inline source")
    dc.add_argument("--seed", type=int, default=0)
    return p


def _load_scenario(dataset_path, scenario: str):
    from ..pitchdata import load_dataset

    records = load_dataset(dataset_path)
    if scenario.isdigit():
        idx = int(scenario)
        if not 0 <= idx < len(records):
            raise RuntimeError(f"scenario index {idx} out of range (0..{len(records) - 1})")
        return records[idx]
    for rec in records:
        rid = f"g{rec.event_metadata['game_id']}-e{rec.event_metadata['event_id']}"
        if rid == scenario:
            return rec
    raise RuntimeError(f"unknown scenario {scenario!r}")


def _load_objective_arg(arg):
    if arg is None:
        return None
    text = arg
    if Path(arg).exists():
        text = Path(arg).read_text(encoding="utf-8")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise RuntimeError(f"objective is not valid JSON: {exc}") from None


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except (RuntimeError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _dispatch(args) -> int:
    from . import core

    if args.command == "simulate":
        n = core.simulate_cmd(args.out, args.matches, args.seed, args.half_seconds)
        print(f"wrote {n} records to {args.out}")
        return 0

    if args.command == "train":
        run = core.RunConfig(
            preset=args.preset,
            ball_mode=args.ball_mode,
            steps=args.steps,
            batch=args.batch,
            lr=args.lr,
            ema_decay=args.ema_decay,
            seed=args.seed,
            checkpoint_every=args.checkpoint_every,
            context_encoder=not args.no_context_encoder,
            event_encoder=not args.no_event_encoder,
        )
        if args.model == "denoiser":
            losses, _ = core.train_denoiser_cmd(args.dataset, run, args.out)
            print(f"trained {args.steps} steps: loss {losses[0]:.4f} -> {losses[-1]:.4f}; artifacts in {args.out}")
        else:
            _, history = core.train_value_cmd(args.dataset, run, args.out, gamma=args.gamma)
            print(f"trained value model {args.steps} steps: loss {history[0]:.4f} -> {history[-1]:.4f}")
        return 0

    if args.command == "sample":
        from ..madit import Denoiser, load_checkpoint

        weights, cfg, _ = load_checkpoint(args.checkpoint)
        den = Denoiser(cfg, weights)
        value_model = None
        if args.value_checkpoint:
            vw, vcfg, _ = load_checkpoint(args.value_checkpoint)
            value_model = Denoiser(vcfg, vw)
        rec = _load_scenario(args.dataset, args.scenario)
        result = core.generate(
            den,
            rec,
            objective_spec=_load_objective_arg(args.objective),
            guided_team=args.guided_team,
            guidance_scale=args.guidance_scale,
            opponent_mode=args.opponent_mode,
            n_samples=args.n,
            seed=args.seed,
            value_model=value_model,
            include_pitch_control=args.pitch_control,
        )
        payload = {
            "schema_version": 1,
            "scenario_id": args.scenario,
            "trajectories": result.trajectories.tolist(),
            "roles": result.roles,
            "guidance_scores": result.guidance_scores,
            "reference_score": result.reference_score,
            "metrics": None if result.metrics is None else result.metrics.as_dict(),
            "pitch_control": result.pitch_control,
        }
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(payload, fh)
        print(f"wrote {result.trajectories.shape[0]} samples to {args.out}")
        return 0

    if args.command == "evaluate":
        from ..madit import Denoiser, load_checkpoint

        weights, cfg, _ = load_checkpoint(args.checkpoint)
        den = Denoiser(cfg, weights)
        pairs = core.load_window_pairs(args.dataset, cfg.ball_mode)
        reports, payload = core.evaluate_cmd(den, pairs, args.instances, args.n, args.seed, args.out, args.csv)
        agg = payload["aggregate"]
        print(f"evaluated {len(reports)} instances: JADE {agg['jade']:.3f} JFDE {agg['jfde']:.3f}")
        return 0

    if args.command == "scaling":
        rows = core.scaling_cmd(
            args.dataset,
            [s.strip() for s in args.presets.split(",") if s.strip()],
            [float(f) for f in args.fractions.split(",") if f.strip()],
            args.steps,
            args.batch,
            args.seed,
            args.eval_instances,
            args.eval_samples,
            out_csv=args.out,
        )
        for row in rows:
            print(
                f"{row['preset']:6s} frac {row['data_fraction']:>5} params {row['parameter_count']:>10} "
                f"JADE {row['jade']:.3f} JFDE {row['jfde']:.3f}"
            )
        return 0

    if args.command == "serve":
        import uvicorn

        from .service import create_app

        app = create_app(args.checkpoint, args.dataset, args.value_checkpoint, split_seed=args.split_seed)
        uvicorn.run(app, host=args.host, port=args.port, log_level="info")
        return 0

    if args.command == "dsl-check":
        from ..objectives import DslError, dsl_parse, dsl_eval, pretty_print
        import numpy as np

        text = args.program
        if Path(args.program).exists():
            text = Path(args.program).read_text(encoding="utf-8")
        try:
            prog = dsl_parse(text)
        except DslError as exc:
            print(f"parse error: {exc}", file=sys.stderr)
            return 1
        rng = np.random.default_rng(args.seed)
        ball = rng.uniform(30, 75, (6, 1, 2))
        team = rng.uniform(25, 80, (6, 11, 2))
        score, grad = dsl_eval(prog, ball, team)
        print(f"program: {pretty_print(prog)}")
        print(f"fixture score (seed {args.seed}): {score:.6f}")
        print(f"gradient norm on team path: {float(np.linalg.norm(grad)):.6f}")
        return 0

    raise RuntimeError(f"unhandled command {args.command}")  # pragma: no cover


if __name__ == "__main__":
    sys.exit(main())
