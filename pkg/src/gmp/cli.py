"""Command-line entry point: retarget, train, generate, evaluate, serve."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .command import CommandEncoder, CommandError, CommandTrainOpts, VelocityCommand, \
    train_command_encoder
from .cvae import Cvae, CvaeConfig, CvaeError, train_cvae
from .dataset import (ClipError, MotionClip, featurize, load_clip, poses_to_array, save_clip,
                      standing_pose)
from .metrics import MetricError, evaluate
from .model import ModelError, default_model, load_model
from .nn import CheckpointError
from .retarget import RetargetError, RetargetProblem, human_from_clip, retarget
from .rewards import ControlStateSample, RewardError, standing_state, total_reward
from .rollout import (ReferenceFrame, RolloutError, clip_from_rollout, rollout_commanded,
                      rollout_random)
from .service import ServiceConfig, run_service


class _Parser(argparse.ArgumentParser):
    """Argparse with the documented exit codes.

    Unknown subcommand exits 2 (usage error); every other parse failure
    (missing flag, bad value) exits 1 (validation error).
    """

    def error(self, message):
        self.print_usage(sys.stderr)
        code = 2 if "invalid choice" in message else 1
        self.exit(code, f"{self.prog}: error: {message}\n")


def _parse_command(text: str) -> VelocityCommand:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 3:
        raise ValueError(f"command must be 'vx,vy,yaw_rate', got {text!r}")
    return VelocityCommand(*(float(p) for p in parts))


def _load_model(path: str | None):
    return load_model(path) if path else default_model()


def _clips_from_dir(path: str) -> tuple[list[str], list[MotionClip]]:
    files = sorted(str(p) for p in Path(path).glob("*.gmpclip"))
    if not files:
        raise ClipError(f"no .gmpclip files in {path}")
    return files, [load_clip(f) for f in files]


def _print_trace(trace: list[dict]) -> None:
    if not trace:
        return
    keys = [k for k in trace[0] if k != "iter"]
    print(f"{'iter':>6}  " + "  ".join(f"{k:>12}" for k in keys))
    shown = trace if len(trace) <= 12 else trace[:3] + trace[3:-3][:: max(1, (len(trace) - 6) // 6)] + trace[-3:]
    for row in shown:
        print(f"{row['iter']:>6}  " + "  ".join(f"{row[k]:>12.6g}" for k in keys))


def cmd_retarget(args) -> int:
    model = _load_model(args.model)
    source = load_clip(args.input)
    human = human_from_clip(source, model, scale=args.scale)
    problem = RetargetProblem(human, model)
    result = retarget(problem, max_iters=args.iters, lr=args.lr, tol=args.tol)
    save_clip(args.out, result.clip)
    _print_trace(result.trace)
    first = result.trace[0]["total"]
    print(f"loss {first:.6g} -> {result.final_loss:.6g} "
          f"({(1 - result.final_loss / first) * 100:.1f}% reduction), "
          f"converged={result.converged}")
    print(f"wrote {args.out}")
    return 0


def cmd_train_gmp(args) -> int:
    model = _load_model(args.model)
    files, clips = _clips_from_dir(args.data)
    print(f"training on {len(clips)} clips: {', '.join(Path(f).name for f in files)}")
    seqs = [poses_to_array(featurize(c, model)) for c in clips]
    config = CvaeConfig(epochs=args.epochs, window=args.window, batch_windows=args.batch)
    net, curves = train_cvae(seqs, config, seed=args.seed)
    net.save(args.out, meta={"epochs": args.epochs, "seed": args.seed})
    for row in curves[:: max(1, len(curves) // 10)] + [curves[-1]]:
        print(f"epoch {row['epoch']:>4}  lr {row['lr']:.3e}  "
              f"train_rec {row['train_rec']:.6f}  val_rec {row['val_rec']:.6f}  "
              f"val_kl {row['val_kl']:.4f}")
    print(f"wrote {args.out}")
    return 0


def cmd_train_cmd(args) -> int:
    model = _load_model(args.model)
    decoder = Cvae.load(args.gmp)
    _, clips = _clips_from_dir(args.data)
    pool = np.concatenate([poses_to_array(featurize(c, model)) for c in clips])

    def pose_sampler(rng, n):
        return pool[rng.integers(0, pool.shape[0], n)]

    opts = CommandTrainOpts(horizon=args.horizon, epochs=args.epochs, lr=args.lr)
    encoder, curves = train_command_encoder(decoder, pose_sampler, opts=opts, seed=args.seed)
    encoder.save(args.out, meta={"epochs": args.epochs, "seed": args.seed})
    for row in curves[:: max(1, len(curves) // 10)] + [curves[-1]]:
        print(f"epoch {row['epoch']:>4}  loss {row['loss']:.6f}  track_err {row['track_err']:.4f}")
    print(f"wrote {args.out}")
    return 0


def cmd_generate(args) -> int:
    model = _load_model(args.model)
    decoder = Cvae.load(args.gmp)
    if args.start:
        clip = load_clip(args.start)
        start = featurize(clip, model)[args.start_frame]
    else:
        start = standing_pose(model)
    if args.command:
        if not args.cmd:
            raise ValueError("--command requires --cmd checkpoint")
        encoder = CommandEncoder.load(args.cmd)
        command = _parse_command(args.command)
        result = rollout_commanded(decoder, encoder, start, [command], n_frames=args.n, model=model)
    else:
        result = rollout_random(decoder, start, args.n, seed=args.seed, model=model)
    save_clip(args.out, clip_from_rollout(result, fps=args.fps, model=model))
    print(f"wrote {args.n} frames to {args.out}")
    return 0


def cmd_eval(args) -> int:
    model = _load_model(args.model)
    _, robot = _clips_from_dir(args.robot)
    _, ref = _clips_from_dir(args.ref)
    episodes = None
    if args.episodes:
        episodes = json.loads(Path(args.episodes).read_text())
    report = evaluate(robot, ref, episodes=episodes, model=model)
    text = report.as_table()
    if args.out:
        Path(args.out).write_text(text + "\n")
        print(f"wrote {args.out}")
    print(text)
    return 0


def cmd_eval_reward(args) -> int:
    model = _load_model(args.model)
    base = standing_state(model)
    raw = json.loads(Path(args.state).read_text())
    fields = {f: raw.get(f, getattr(base, f)) for f in base.__dataclass_fields__}
    state = ControlStateSample(**fields)
    ref_raw = json.loads(Path(args.ref).read_text())
    reference = ReferenceFrame(
        q_ref=np.asarray(ref_raw["q_ref"], dtype=float),
        p_ref=np.asarray(ref_raw["p_ref"], dtype=float),
    )
    command = _parse_command(args.command)
    print(total_reward(state, reference, command, model=model).as_table())
    return 0


def cmd_serve(args) -> int:
    config = ServiceConfig.from_env(gmp_checkpoint=args.gmp, cmd_checkpoint=args.cmd,
                                    rate=args.rate)
    host, _, port = (args.addr or "").partition(":")
    kwargs = {}
    if host:
        kwargs["host"] = host
    if port:
        kwargs["port"] = int(port)
    run_service(config, **kwargs)
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="gmp", description="generative motion prior toolkit")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser,
                                metavar="{retarget,train-gmp,train-cmd,generate,eval,eval-reward,serve}")

    p = sub.add_parser("retarget", help="optimize robot motion to match a source clip")
    p.add_argument("--input", required=True, help="source motion (.gmpclip)")
    p.add_argument("--out", required=True, help="output robot clip")
    p.add_argument("--model", default=None, help="robot model yaml (default: built-in)")
    p.add_argument("--scale", type=float, default=None, help="source skeleton scale")
    p.add_argument("--iters", type=int, default=2000)
    p.add_argument("--lr", type=float, default=1e-2)
    p.add_argument("--tol", type=float, default=1e-6)
    p.set_defaults(fn=cmd_retarget)

    p = sub.add_parser("train-gmp", help="train the motion prior on a clip directory")
    p.add_argument("--data", required=True, help="directory of .gmpclip files")
    p.add_argument("--out", required=True, help="output checkpoint")
    p.add_argument("--model", default=None)
    p.add_argument("--epochs", type=int, default=240)
    p.add_argument("--window", type=int, default=8)
    p.add_argument("--batch", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_train_gmp)

    p = sub.add_parser("train-cmd", help="train the command encoder against a frozen prior")
    p.add_argument("--gmp", required=True, help="motion prior checkpoint")
    p.add_argument("--data", required=True, help="directory of .gmpclip files (start poses)")
    p.add_argument("--out", required=True)
    p.add_argument("--model", default=None)
    p.add_argument("--horizon", type=int, default=25)
    p.add_argument("--epochs", type=int, default=40)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_train_cmd)

    p = sub.add_parser("generate", help="roll out generated motion to a clip")
    p.add_argument("--gmp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=12, help="number of frames")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cmd", default=None, help="command encoder checkpoint")
    p.add_argument("--command", default=None, help="'vx,vy,yaw_rate' steering target")
    p.add_argument("--start", default=None, help="clip supplying the initial pose")
    p.add_argument("--start-frame", type=int, default=0)
    p.add_argument("--fps", type=float, default=50.0)
    p.add_argument("--model", default=None)
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("eval", help="motion similarity metrics between clip sets")
    p.add_argument("--robot", required=True, help="directory of generated clips")
    p.add_argument("--ref", required=True, help="directory of reference clips")
    p.add_argument("--episodes", default=None, help="JSON episodes for MELV")
    p.add_argument("--out", default=None, help="write the report here")
    p.add_argument("--model", default=None)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("eval-reward", help="reward breakdown for one state sample")
    p.add_argument("--state", required=True, help="JSON state sample")
    p.add_argument("--ref", required=True, help="JSON reference {q_ref, p_ref}")
    p.add_argument("--command", required=True, help="'vx,vy,yaw_rate'")
    p.add_argument("--model", default=None)
    p.set_defaults(fn=cmd_eval_reward)

    p = sub.add_parser("serve", help="run the interactive steering service")
    p.add_argument("--gmp", default=None)
    p.add_argument("--cmd", default=None)
    p.add_argument("--addr", default=None, help="host:port (default 127.0.0.1:8731)")
    p.add_argument("--rate", type=float, default=None, help="frames per second")
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ClipError, RetargetError, CheckpointError, RewardError, MetricError,
            RolloutError, ModelError, CvaeError, CommandError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
