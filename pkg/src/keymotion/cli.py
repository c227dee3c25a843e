"""Command-line surface.

Subcommands: validate, retarget, chunk-encode, chunk-decode, simulate, fk,
ik. Exit codes: 0 success, 1 domain failure, 2 usage error. All randomized
paths accept --seed and are reproducible; all units are radians and meters.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import action_codec, formats
from .controller import ControllerConfig, PlantState, run_episode
from .geometry import Pose
from .kinematics import KEYPOINT_NAMES, ModelError, forward_kinematics, load_builtin, load_model
from .motion_ref import command_labels, proprio_labels
from .skr import RobotMotionFrame, SkrConfig, retarget, retarget_stream, scale_keypoints
from .sources import parse_source_spec

BUILTIN_MODELS = ("planar3", "biped29")


def _resolve_model(spec: str):
    if spec in BUILTIN_MODELS:
        return load_builtin(spec)
    return load_model(spec)


def _parse_q(text: str, dof: int) -> np.ndarray:
    values = [float(v) for v in text.replace(",", " ").split()]
    if len(values) != dof:
        raise ValueError(f"expected {dof} joint values, got {len(values)}")
    return np.array(values)


def _height_scale(args, model, header) -> float:
    if args.height_scale is not None:
        return args.height_scale
    if model.default_root_height is None:
        raise ValueError(
            "model carries no default_root_height; pass --height-scale explicitly")
    return model.default_root_height / header.calibration_height_m


def _pose_dict(p: Pose) -> dict:
    return {"translation": p.translation.tolist(), "quaternion_wxyz": p.rotation.tolist()}


def cmd_validate(args) -> int:
    findings = formats.validate_demonstration(args.demo)
    for finding in findings:
        print(finding)
    print(f"{args.demo}: {len(findings)} finding(s)")
    return 1 if findings else 0


def cmd_retarget(args) -> int:
    model = _resolve_model(args.model)
    header, frames = formats.read_demonstration(args.demo)
    cfg = SkrConfig.load(args.skr_config) if args.skr_config else SkrConfig()
    cfg.height_scale = _height_scale(args, model, header)

    scaled = [scale_keypoints(kf, cfg.height_scale) for kf in frames]
    initial = RobotMotionFrame(model.default_root_pose().translation,
                               model.default_root_pose().rotation, model.zero_config())
    motion, reports = retarget_stream(model, scaled, initial, cfg)

    formats.write_trajectory(args.out, motion, model.name, header.rate_hz)
    conv_path = args.convergence_csv or (str(args.out) + ".convergence.csv")
    with open(conv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(reports[0].CSV_HEADER)
        for i, rep in enumerate(reports):
            writer.writerow(rep.csv_row(i))

    fail_rate = 1.0 - float(np.mean([r.converged for r in reports]))
    print(f"retargeted {len(motion)} frames (height_scale={cfg.height_scale:.6g}, "
          f"non-convergence rate {fail_rate:.1%}) -> {args.out}")
    if fail_rate > args.max_fail_rate:
        print(f"error: non-convergence rate {fail_rate:.1%} exceeds "
              f"{args.max_fail_rate:.1%}", file=sys.stderr)
        return 1
    return 0


def cmd_chunk_encode(args) -> int:
    _, frames = formats.read_demonstration(args.demo)
    horizon = args.horizon
    if args.stats:
        stats = formats.read_stats(args.stats)
    else:
        stats = action_codec.compute_stats([frames], horizon)
        if args.write_stats:
            formats.write_stats(args.write_stats, stats)
            print(f"wrote stats -> {args.write_stats}")
    if len(frames) < horizon + 1:
        print(f"warning: trajectory shorter than horizon+1 ({len(frames)} frames); "
              "nothing to encode", file=sys.stderr)
        formats.write_chunks(args.out, [], horizon, args.stats or args.write_stats)
        return 0
    chunks = []
    clamped = 0
    for t in range(len(frames) - horizon):
        rel = action_codec.relative_chunk(frames, t, horizon)
        chunk = action_codec.encode(rel, stats)
        assert chunk.values.shape[1] == action_codec.ACTION_DIM
        clamped += chunk.clamp_count
        chunks.append((t, chunk))
    formats.write_chunks(args.out, chunks, horizon, args.stats or args.write_stats)
    print(f"encoded {len(chunks)} chunks (horizon {horizon}, {clamped} clamped values) "
          f"-> {args.out}")
    return 0


def cmd_chunk_decode(args) -> int:
    stats = formats.read_stats(args.stats)
    _, frames = formats.read_demonstration(args.demo)
    header, chunks = formats.read_chunks(args.chunks)
    horizon = int(header["horizon"])
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"format_version": "1", "horizon": horizon}) + "\n")
        for t, chunk in chunks:
            rel = action_codec.decode(chunk, stats)
            rel.timestamps = np.array(
                [frames[t + 1 + j].timestamp for j in range(horizon)])
            absolute = action_codec.absolute_from_chunk(rel, frames[t])
            fh.write(json.dumps({
                "t": t,
                "frames": [
                    {"t": f.timestamp,
                     **{kp: _pose_dict(f.poses[kp]) for kp in KEYPOINT_NAMES},
                     "gripper": list(f.gripper)}
                    for f in absolute
                ],
            }) + "\n")
    print(f"decoded {len(chunks)} chunks -> {args.out}")
    return 0


def cmd_simulate(args) -> int:
    model = _resolve_model(args.model)
    demo_frames = None
    demo_rate = None
    height_scale = args.height_scale if args.height_scale is not None else 1.0
    if args.demo:
        header, demo_frames = formats.read_demonstration(args.demo)
        demo_rate = header.rate_hz
        if args.height_scale is None:
            height_scale = _height_scale(args, model, header)
    source = parse_source_spec(args.source, model, demo_frames, demo_rate,
                               args.horizon, args.rate_hl)

    skr_cfg = SkrConfig.load(args.skr_config) if args.skr_config else SkrConfig()
    skr_cfg.height_scale = height_scale
    ctrl = ControllerConfig.defaults_for(model)
    if args.kp is not None:
        ctrl.kp[:] = args.kp
    if args.kd is not None:
        ctrl.kd[:] = args.kd
    plant = PlantState.at_rest(model.zero_config())

    log = run_episode(source, model, skr_cfg, ctrl, plant, args.duration,
                      rate_hl=args.rate_hl, seed=args.seed,
                      collect_observations=args.obs_csv)

    prefix = args.out_prefix
    episode_path = f"{prefix}episode.csv"
    summary_path = f"{prefix}summary.json"
    log.to_csv(episode_path)
    summary = log.summary()
    summary["seed"] = args.seed
    summary["duration"] = args.duration
    with open(summary_path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=1, sort_keys=True)
        fh.write("\n")
    if args.obs_csv:
        obs_path = f"{prefix}observations.csv"
        log.observations_to_csv(obs_path, {
            "command": command_labels(dof=model.dof),
            "proprio": proprio_labels(dof=model.dof),
        })
        print(f"observations -> {obs_path}")
    print(f"simulated {log.ticks} ticks, max tracking error "
          f"{summary['max_tracking_error']:.3e} rad -> {episode_path}, {summary_path}")
    return 0


def cmd_fk(args) -> int:
    model = _resolve_model(args.model)
    q = _parse_q(args.q, model.dof) if args.q else model.zero_config()
    root = model.default_root_pose() if args.default_root else Pose.identity()
    fk = forward_kinematics(model, q, root)
    names = [args.keypoint] if args.keypoint else list(KEYPOINT_NAMES)
    if args.json:
        print(json.dumps({kp: _pose_dict(fk.keypoints[kp]) for kp in names}, indent=1))
    else:
        for kp in names:
            p = fk.keypoints[kp]
            t = ", ".join(f"{v: .6f}" for v in p.translation)
            qq = ", ".join(f"{v: .6f}" for v in p.rotation)
            print(f"{kp:10s} t=({t})  q_wxyz=({qq})")
    return 0


def cmd_ik(args) -> int:
    model = _resolve_model(args.model)
    q_star = _parse_q(args.target_from_q, model.dof)
    root = model.default_root_pose()
    fk = forward_kinematics(model, q_star, root)
    from .action_codec import KeypointFrame
    targets = KeypointFrame({kp: fk.keypoints[kp] for kp in KEYPOINT_NAMES}, (0.0, 0.0), 0.0)
    seed = RobotMotionFrame(root.translation, root.rotation, model.zero_config())
    frame, report = retarget(model, targets, seed, SkrConfig())
    result = {
        "converged": report.converged,
        "iterations": report.iterations,
        "residual": report.residual,
        "max_position_error": report.max_position_error,
        "max_orientation_error": report.max_orientation_error,
        "joints": frame.joints.tolist(),
    }
    if args.json:
        print(json.dumps(result, indent=1))
    else:
        print(f"converged={report.converged} iterations={report.iterations} "
              f"max_pos_err={report.max_position_error:.3e} m "
              f"max_ori_err={report.max_orientation_error:.3e} rad")
    return 0 if report.converged else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="keymotion",
        description="Five-keypoint humanoid motion pipeline tools.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a demonstration file")
    p.add_argument("demo")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("retarget", help="demonstration -> robot trajectory")
    p.add_argument("demo")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--skr-config")
    p.add_argument("--height-scale", type=float,
                   help="override the calibration-derived vertical scale")
    p.add_argument("--convergence-csv")
    p.add_argument("--max-fail-rate", type=float, default=0.1)
    p.set_defaults(func=cmd_retarget)

    p = sub.add_parser("chunk-encode", help="demonstration -> normalized action chunks")
    p.add_argument("demo")
    p.add_argument("--out", required=True)
    p.add_argument("--horizon", type=int, default=action_codec.DEFAULT_HORIZON)
    p.add_argument("--stats", help="read normalization stats from this file")
    p.add_argument("--write-stats", help="compute stats from the demo and save here")
    p.set_defaults(func=cmd_chunk_encode)

    p = sub.add_parser("chunk-decode", help="action chunks -> absolute keypoint targets")
    p.add_argument("chunks")
    p.add_argument("--demo", required=True, help="source demo providing chunk anchors")
    p.add_argument("--stats", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_chunk_decode)

    p = sub.add_parser("simulate", help="closed-loop episode against the desk plant")
    p.add_argument("--model", required=True)
    p.add_argument("--source", default="synthetic:static",
                   help="replay | synthetic:static | synthetic:sine:<joint>:<amp>:<freq>")
    p.add_argument("--demo", help="demonstration file for the replay source")
    p.add_argument("--duration", type=float, default=5.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rate-hl", type=float, default=10.0,
                   help="high-level chunk rate in Hz")
    p.add_argument("--horizon", type=int, default=action_codec.DEFAULT_HORIZON)
    p.add_argument("--skr-config")
    p.add_argument("--height-scale", type=float)
    p.add_argument("--kp", type=float)
    p.add_argument("--kd", type=float)
    p.add_argument("--out-prefix", default="episode_")
    p.add_argument("--obs-csv", action="store_true",
                   help="also export per-tick observation vectors")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fk", help="print keypoint poses for a configuration")
    p.add_argument("--model", required=True)
    p.add_argument("--q", help="joint values, comma or space separated (default zeros)")
    p.add_argument("--keypoint", choices=KEYPOINT_NAMES)
    p.add_argument("--default-root", action="store_true",
                   help="place the root at the model's default height")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_fk)

    p = sub.add_parser("ik", help="solve IK for targets generated from a configuration")
    p.add_argument("--model", required=True)
    p.add_argument("--target-from-q", required=True,
                   help="joint values whose FK keypoints become the IK targets")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_ik)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, ModelError, formats.FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
