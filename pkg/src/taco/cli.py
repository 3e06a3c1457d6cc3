"""Command-line entry point: train, evaluate, run baselines, replay logs,
dump parameters, and launch the live service.

Exit codes: 0 success, 2 usage (unknown flags), 3 missing input file,
4 checkpoint/dimension mismatch, 1 anything else.  Errors print one
machine-parsable line: `error code=<n> msg=<text>`.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .params import MavParams

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_MISSING = 3
EXIT_MISMATCH = 4
EXIT_ERROR = 1


class CliError(RuntimeError):
    def __init__(self, code: int, msg: str):
        super().__init__(msg)
        self.code = code


def _load_params(path: str | None) -> MavParams:
    if path is None:
        return MavParams()
    if not os.path.exists(path):
        raise CliError(EXIT_MISSING, f"params file not found: {path}")
    return MavParams.from_file(path)


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    if not os.path.exists(path):
        raise CliError(EXIT_MISSING, f"config file not found: {path}")
    with open(path) as fh:
        return json.load(fh)


def _require_file(path: str, what: str) -> str:
    if not os.path.exists(path):
        raise CliError(EXIT_MISSING, f"{what} not found: {path}")
    return path


def _load_checkpoint(path: str, expect_mode: str | None = None):
    from .policy import CheckpointError, load_policy

    _require_file(path, "checkpoint")
    try:
        return load_policy(path, expect_mode=expect_mode)
    except CheckpointError as exc:
        raise CliError(EXIT_MISMATCH, str(exc)) from exc


def _write_resolved(out_dir: str, payload: dict) -> None:
    os.makedirs(out_dir, exist_ok=True)
    payload = dict(payload)
    payload["tool_version"] = __version__
    with open(os.path.join(out_dir, "resolved_config.json"), "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=str)


# --- subcommands ----------------------------------------------------------------


def cmd_params(args) -> int:
    params = _load_params(args.file)
    text = params.dump(args.out)
    if args.out is None:
        print(text)
    return EXIT_OK


def cmd_train(args) -> int:
    from .env import EpisodeConfig
    from .presets import variant_config
    from .trainer import TrainConfig, Trainer

    file_cfg = _load_config_file(args.config)
    if args.preset:
        cfg = variant_config(args.preset)
    else:
        cfg = TrainConfig.from_dict(file_cfg.get("train", {}))
    cfg.task = args.task or cfg.task
    cfg.obs_mode = args.obs or cfg.obs_mode
    if args.klip is not None:
        cfg.k_lip = None if args.klip.lower() == "none" else float(args.klip)
    for name in ("envs", "updates", "seed", "horizon"):
        val = getattr(args, name)
        if val is not None:
            setattr(cfg, name, val)
    if args.backend:
        cfg.backend = args.backend
    params = _load_params(args.params_file)
    if file_cfg.get("params"):
        params = MavParams.from_dict({**params.to_dict(), **file_cfg["params"]})
    episode = EpisodeConfig(**file_cfg.get("episode", {}))
    trainer = Trainer(cfg, args.out, params=params, episode=episode)
    if args.resume:
        trainer.resume(args.resume)
    _write_resolved(args.out, {"train": json.loads(cfg.to_json()), "params": params.to_dict()})
    final = trainer.train(log_every=args.log_every)
    print(f"final checkpoint: {final}")
    return EXIT_OK


def cmd_eval(args) -> int:
    from . import evals

    params = _load_params(args.params_file)
    out_dir = args.out
    os.makedirs(out_dir, exist_ok=True)
    _write_resolved(out_dir, {"eval": vars(args), "params": params.to_dict()})

    if args.kind == "yaw-sweep":
        if args.checkpoint:
            policy = _load_checkpoint(args.checkpoint)
            label = args.label or os.path.splitext(os.path.basename(args.checkpoint))[0]
            sweep = evals.yaw_sweep_policy(policy, params, n_grid=args.grid, label=label)
        else:
            sweep = evals.yaw_sweep_se3(params, n_grid=args.grid)
        path = sweep.save(out_dir)
        ok = sweep.independence < 0.5 and sweep.symmetry < 0.5
        print(
            f"independence={sweep.independence:.4f} symmetry={sweep.symmetry:.4f} "
            f"endpoint_gap={sweep.endpoint_gap:.4f} slope={sweep.spatial_slope:.4f} "
            f"-> {'PASS' if ok else 'FAIL'} ({path})"
        )
        return EXIT_OK

    if args.kind == "smoothness":
        policy = _load_checkpoint(args.checkpoint)
        noise = {"pos": 0.005, "att": 0.5 * np.pi / 180, "vel": 0.02, "rate": 0.05, "volt": 0.05}
        series = evals.hover_throttle_series(policy, params, steps=args.steps, seed=args.seed, noise=noise)
        value = evals.temporal_smoothness(series)
        np.savetxt(os.path.join(out_dir, "throttle_series.csv"), series, header="throttle")
        print(f"temporal_smoothness={value:.6f}")
        if args.baseline:
            other = _load_checkpoint(args.baseline)
            series_b = evals.hover_throttle_series(other, params, steps=args.steps, seed=args.seed, noise=noise)
            value_b = evals.temporal_smoothness(series_b)
            print(f"baseline_smoothness={value_b:.6f} -> {'PASS' if value < value_b else 'FAIL'}")
        return EXIT_OK

    if args.kind == "circle-mse":
        from .controllers import make_controller

        speeds = [float(s) for s in args.speeds.split(",")]
        rows = []
        for kind in args.controllers.split(","):
            ctl = make_controller(
                kind, params,
                checkpoint=args.checkpoint if kind == "policy" else None,
                **({"noise": {"pos": 0.005, "att": 0.5 * np.pi / 180, "vel": 0.02,
                              "rate": 0.05, "volt": 0.05}, "seed": args.seed}
                   if kind == "policy" else {}),
            )
            for v in speeds:
                res = evals.eval_circle(
                    ctl, v, params=params, seed=args.seed, randomize=args.randomize
                )
                rows.append((kind, v, res["radius_mse"], res["velocity_mse"]))
                print(f"{kind} v*={v:+.1f}: radius_mse={res['radius_mse']:.5f} "
                      f"velocity_mse={res['velocity_mse']:.5f}")
        with open(os.path.join(out_dir, "circle_mse.csv"), "w") as fh:
            fh.write("controller,v_star,radius_mse,velocity_mse\n")
            for r in rows:
                fh.write(f"{r[0]},{r[1]:.3f},{r[2]:.9g},{r[3]:.9g}\n")
        return EXIT_OK

    if args.kind == "flip":
        policy = _load_checkpoint(args.checkpoint)
        rep = evals.eval_flips(
            policy, n_flips=args.flips, params=params, seed=args.seed,
            log_path=os.path.join(out_dir, "flip_log.csv"),
        )
        with open(os.path.join(out_dir, "flip_report.txt"), "w") as fh:
            fh.write(rep.summary())
        print(rep.summary().replace("\n", "  ").strip())
        return EXIT_OK

    if args.kind == "lipschitz":
        policy = _load_checkpoint(args.checkpoint)
        rep = evals.lipschitz_certificate(policy, pairs=args.pairs, seed=args.seed)
        with open(os.path.join(out_dir, "lipschitz_report.txt"), "w") as fh:
            fh.write(rep.summary())
        print(rep.summary().replace("\n", "  ").strip())
        return EXIT_OK if rep.passed else EXIT_ERROR

    raise CliError(EXIT_USAGE, f"unknown eval kind {args.kind}")


def cmd_sim(args) -> int:
    from .controllers import make_controller
    from .evals import hover_env, simulate

    params = _load_params(args.params_file)
    ctl = make_controller(args.controller, params, checkpoint=args.checkpoint)
    env = hover_env(args.task, params=params, seed=args.seed, randomize=args.randomize)
    if args.task == "circle":
        env.speed[:] = args.speed
        env.state.p[0, 0] += env.radius[0]
    out_dir = os.path.dirname(os.path.abspath(args.out)) or "."
    _write_resolved(out_dir, {"sim": vars(args), "params": params.to_dict()})
    simulate(ctl, env, int(args.seconds * 100), log_path=args.out)
    print(f"trajectory written: {args.out}")
    return EXIT_OK


def cmd_replay(args) -> int:
    from .evals import flip_scorecard, tracking_mse
    from .logs import read_trajectory

    _require_file(args.log, "trajectory log")
    try:
        log = read_trajectory(args.log)
    except ValueError as exc:
        raise CliError(EXIT_MISMATCH, str(exc)) from exc
    t = log["t"]
    print(f"rows={len(t)} t=[{t[0]:.2f}, {t[-1]:.2f}] "
          f"reward_mean={log['reward'].mean():.4f} flag={log['flag'][0]:+.0f}")
    flag = log["flag"][0]
    if flag == 1.0 and len(t) and t[-1] >= args.window[1]:
        r_mse, v_mse = tracking_mse(log, args.radius, log["command"][-1], tuple(args.window))
        print(f"radius_mse={r_mse:.5f} velocity_mse={v_mse:.5f}")
    if flag == -1.0:
        rep = flip_scorecard(log)
        print(rep.summary().replace("\n", "  ").strip())
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    params = _load_params(args.params_file)
    app = create_app(params=params, console_dir=args.console)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


# --- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="taco", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    pp = sub.add_parser("params", help="inspect physical parameters")
    pp.add_argument("action", choices=["dump"])
    pp.add_argument("--file", help="JSON parameter file to load first")
    pp.add_argument("--out", help="write instead of printing")
    pp.set_defaults(fn=cmd_params)

    tp = sub.add_parser("train", help="train a policy")
    tp.add_argument("--task", choices=["pos", "circle", "flip", "multi"])
    tp.add_argument("--klip", help="Lipschitz budget per layer, or 'none'")
    tp.add_argument("--obs", choices=["mat", "quat"])
    tp.add_argument("--envs", type=int)
    tp.add_argument("--updates", type=int)
    tp.add_argument("--horizon", type=int)
    tp.add_argument("--seed", type=int)
    tp.add_argument("--out", required=True)
    tp.add_argument("--preset", help="named reproduction variant")
    tp.add_argument("--config", help="layered JSON config (train/episode/params)")
    tp.add_argument("--params-file")
    tp.add_argument("--backend", choices=["compiled", "numpy"])
    tp.add_argument("--resume", metavar="TAG", help="resume from a saved state tag")
    tp.add_argument("--log-every", type=int, default=10)
    tp.set_defaults(fn=cmd_train)

    ep = sub.add_parser("eval", help="measurement harness")
    ep.add_argument("kind", choices=["yaw-sweep", "smoothness", "circle-mse", "flip", "lipschitz"])
    ep.add_argument("--checkpoint")
    ep.add_argument("--baseline", help="second checkpoint for paired comparisons")
    ep.add_argument("--out", default="eval_out")
    ep.add_argument("--label")
    ep.add_argument("--grid", type=int, default=361)
    ep.add_argument("--steps", type=int, default=500)
    ep.add_argument("--pairs", type=int, default=10_000)
    ep.add_argument("--flips", type=int, default=3)
    ep.add_argument("--speeds", default="1,2,3")
    ep.add_argument("--controllers", default="policy,mpc")
    ep.add_argument("--randomize", action="store_true")
    ep.add_argument("--seed", type=int, default=0)
    ep.add_argument("--params-file")
    ep.set_defaults(fn=cmd_eval)

    sp = sub.add_parser("sim", help="run a controller and log the trajectory")
    sp.add_argument("--controller", choices=["policy", "se3", "mpc"], required=True)
    sp.add_argument("--checkpoint")
    sp.add_argument("--task", choices=["pos", "circle", "flip"], default="pos")
    sp.add_argument("--speed", type=float, default=2.0)
    sp.add_argument("--seconds", type=float, default=10.0)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--randomize", action="store_true")
    sp.add_argument("--out", default="trajectory.csv")
    sp.add_argument("--params-file")
    sp.set_defaults(fn=cmd_sim)

    rp = sub.add_parser("replay", help="summarize a trajectory log")
    rp.add_argument("log")
    rp.add_argument("--radius", type=float, default=1.2)
    rp.add_argument("--window", type=float, nargs=2, default=[5.0, 25.0])
    rp.set_defaults(fn=cmd_replay)

    vp = sub.add_parser("serve", help="live human-in-the-loop service")
    vp.add_argument("--port", type=int, default=8700)
    vp.add_argument("--host", default="127.0.0.1")
    vp.add_argument("--console", help="static console bundle to serve at /")
    vp.add_argument("--params-file")
    vp.set_defaults(fn=cmd_serve)

    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.fn(args)
    except CliError as exc:
        print(f"error code={exc.code} msg={exc}", file=sys.stderr)
        return exc.code
    except Exception as exc:  # noqa: BLE001 - the CLI boundary reports, not raises
        print(f"error code={EXIT_ERROR} msg={type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
