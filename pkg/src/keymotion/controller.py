"""Residual action decoding, joint-space PD tracking, and the episode loop.

The learned tracking policy is out of scope here; the executed action is the
residual that reproduces the retargeted joint reference (the inverse of the
residual decode, saturated at the clip bound). That exercises the full data
path -- chunk pull, re-anchoring, vertical scaling, warm-started IK,
resampling, buffering, residual decode, PD torque -- against a per-joint
second-order plant, on a receding-horizon schedule.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .action_codec import KeypointFrame, absolute_from_chunk
from .kinematics import KEYPOINT_NAMES, KinematicModel, forward_kinematics
from .motion_ref import (
    DEFAULT_OFFSETS,
    MotionChunk,
    OffsetSet,
    ProprioHistory,
    ReferenceBuffer,
    RobotState,
    assemble_command,
    assemble_proprio,
    resample,
)
from .skr import RobotMotionFrame, SkrConfig, StreamRetargeter, scale_keypoints

PLANT_MIN_RATE = 500.0


@dataclass
class ControllerConfig:
    """Residual-decode and PD parameters. Gains are desk fixtures, not
    published values."""

    q0: np.ndarray
    action_scale: np.ndarray
    a_max: float
    kp: np.ndarray
    kd: np.ndarray
    control_rate: float = 50.0

    def __post_init__(self):
        self.q0 = np.asarray(self.q0, dtype=float).reshape(-1)
        dof = self.q0.shape[0]
        self.action_scale = np.broadcast_to(np.asarray(self.action_scale, dtype=float), (dof,)).copy()
        self.kp = np.broadcast_to(np.asarray(self.kp, dtype=float), (dof,)).copy()
        self.kd = np.broadcast_to(np.asarray(self.kd, dtype=float), (dof,)).copy()
        if np.any(self.action_scale <= 0.0):
            raise ValueError("action scale must be positive")
        if not self.a_max > 0.0:
            raise ValueError("a_max must be positive")
        if np.any(self.kp < 0.0) or np.any(self.kd < 0.0):
            raise ValueError("gains must be non-negative")

    @property
    def dof(self) -> int:
        return self.q0.shape[0]

    @staticmethod
    def defaults_for(model: KinematicModel) -> "ControllerConfig":
        return ControllerConfig(
            q0=np.zeros(model.dof),
            action_scale=1.0,
            a_max=math.pi,
            kp=100.0,
            kd=10.0,
        )


@dataclass(eq=False)
class PlantState:
    """Decoupled per-joint second-order plant (diagonal inertia + viscous
    damping); stands in for the real actuated robot."""

    q: np.ndarray
    qd: np.ndarray
    inertia: np.ndarray
    damping: np.ndarray

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float).reshape(-1)
        dof = self.q.shape[0]
        self.qd = np.asarray(self.qd, dtype=float).reshape(dof)
        self.inertia = np.broadcast_to(np.asarray(self.inertia, dtype=float), (dof,)).copy()
        self.damping = np.broadcast_to(np.asarray(self.damping, dtype=float), (dof,)).copy()
        if np.any(self.inertia <= 0.0):
            raise ValueError("inertia must be positive")
        if not np.all(np.isfinite(self.q)) or not np.all(np.isfinite(self.qd)):
            raise ValueError("plant state must be finite")

    @staticmethod
    def at_rest(q, inertia=1.0, damping=0.5) -> "PlantState":
        q = np.asarray(q, dtype=float)
        return PlantState(q=q.copy(), qd=np.zeros_like(q), inertia=inertia, damping=damping)

    def kinetic_energy(self) -> float:
        return float(0.5 * np.sum(self.inertia * self.qd ** 2))


def decode_action(a: np.ndarray, cfg: ControllerConfig) -> np.ndarray:
    """q_des = q0 + scale * clip(a, -a_max, a_max), elementwise."""
    a = np.asarray(a, dtype=float).reshape(-1)
    if a.shape[0] != cfg.dof:
        raise ValueError(f"action has {a.shape[0]} entries, expected {cfg.dof}")
    return cfg.q0 + cfg.action_scale * np.clip(a, -cfg.a_max, cfg.a_max)


def encode_reference(q_ref: np.ndarray, cfg: ControllerConfig) -> np.ndarray:
    """Residual that reproduces q_ref through decode_action, saturating."""
    q_ref = np.asarray(q_ref, dtype=float).reshape(-1)
    if q_ref.shape[0] != cfg.dof:
        raise ValueError(f"reference has {q_ref.shape[0]} entries, expected {cfg.dof}")
    return np.clip((q_ref - cfg.q0) / cfg.action_scale, -cfg.a_max, cfg.a_max)


def pd_torque(q_des, q, qd, cfg: ControllerConfig) -> np.ndarray:
    """Diagonal joint-space PD: Kp (q_des - q) - Kd qd."""
    q_des = np.asarray(q_des, dtype=float).reshape(-1)
    q = np.asarray(q, dtype=float).reshape(-1)
    qd = np.asarray(qd, dtype=float).reshape(-1)
    if not (q_des.shape[0] == q.shape[0] == qd.shape[0] == cfg.dof):
        raise ValueError("pd_torque length mismatch")
    return cfg.kp * (q_des - q) - cfg.kd * qd


def plant_step(state: PlantState, tau, dt: float, min_rate: float = PLANT_MIN_RATE) -> PlantState:
    """Semi-implicit Euler over internal substeps of at least ``min_rate`` Hz."""
    tau = np.asarray(tau, dtype=float).reshape(-1)
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    if not np.all(np.isfinite(tau)):
        raise ValueError("non-finite torque")
    substeps = max(1, math.ceil(dt * min_rate))
    h = dt / substeps
    q = state.q.copy()
    qd = state.qd.copy()
    for _ in range(substeps):
        qd += h * (tau - state.damping * qd) / state.inertia
        q += h * qd
    return PlantState(q=q, qd=qd, inertia=state.inertia, damping=state.damping)


def track_joint_reference(reference_fn, plant: PlantState, cfg: ControllerConfig,
                          duration: float):
    """Drive the PD loop against a joint-space reference q_ref(t).

    Returns (times, q_des, q) arrays; used for gain sweeps and step tests.
    """
    dt = 1.0 / cfg.control_rate
    ticks = round(duration * cfg.control_rate)
    times = np.empty(ticks)
    q_des_log = np.empty((ticks, cfg.dof))
    q_log = np.empty((ticks, cfg.dof))
    for i in range(ticks):
        t = i * dt
        q_des = decode_action(encode_reference(reference_fn(t), cfg), cfg)
        tau = pd_torque(q_des, plant.q, plant.qd, cfg)
        times[i] = t
        q_des_log[i] = q_des
        q_log[i] = plant.q
        plant = plant_step(plant, tau, dt)
    return times, q_des_log, q_log


@dataclass(eq=False)
class EpisodeLog:
    """Per-tick records of one closed-loop episode plus summary helpers."""

    time: np.ndarray
    q_ref: np.ndarray
    q_des: np.ndarray
    q: np.ndarray
    qd: np.ndarray
    tau: np.ndarray
    handover_ticks: list[int]
    ik_iterations: list[int]
    ik_converged: list[bool]
    observations: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def ticks(self) -> int:
        return self.time.shape[0]

    def tracking_error(self) -> np.ndarray:
        return np.max(np.abs(self.q_des - self.q), axis=1)

    def seam_deltas(self) -> tuple[float, float]:
        """(max |dq_des| at chunk seams, max |dq_des| inside chunks)."""
        if self.ticks < 2:
            return 0.0, 0.0
        deltas = np.max(np.abs(np.diff(self.q_des, axis=0)), axis=1)
        seams = np.zeros(self.ticks - 1, dtype=bool)
        for t in self.handover_ticks:
            if t >= 1:
                seams[t - 1] = True
        seam_max = float(deltas[seams].max()) if np.any(seams) else 0.0
        intra_max = float(deltas[~seams].max()) if np.any(~seams) else 0.0
        return seam_max, intra_max

    def summary(self) -> dict:
        err = self.tracking_error()
        seam_max, intra_max = self.seam_deltas()
        n_reports = len(self.ik_converged)
        return {
            "ticks": self.ticks,
            "dof": int(self.q.shape[1]),
            "max_tracking_error": float(err.max()),
            "mean_tracking_error": float(err.mean()),
            "seam_max_delta": seam_max,
            "intra_max_delta": intra_max,
            "seam_within_intra": bool(seam_max <= intra_max + 1e-12),
            "handovers": len(self.handover_ticks),
            "ik_solves": n_reports,
            "ik_convergence_rate": float(np.mean(self.ik_converged)) if n_reports else 1.0,
            "ik_max_iterations": max(self.ik_iterations) if self.ik_iterations else 0,
        }

    def to_csv(self, path) -> None:
        dof = self.q.shape[1]
        header = ["tick", "time", "tracking_error"]
        for prefix in ("q_ref", "q_des", "q", "qd", "tau"):
            header += [f"{prefix}_{i:02d}" for i in range(dof)]
        err = self.tracking_error()
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for i in range(self.ticks):
                row = [i, repr(float(self.time[i])), repr(float(err[i]))]
                for arr in (self.q_ref, self.q_des, self.q, self.qd, self.tau):
                    row += [repr(float(v)) for v in arr[i]]
                writer.writerow(row)

    def observations_to_csv(self, path, labels: dict[str, list[str]]) -> None:
        names = ["tick"] + labels["command"] + labels["proprio"]
        cmd = self.observations["command"]
        prop = self.observations["proprio"]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(names)
            for i in range(self.ticks):
                row = [i] + [repr(float(v)) for v in cmd[i]] + [repr(float(v)) for v in prop[i]]
                writer.writerow(row)


def keypoint_frame_from_motion(model: KinematicModel, frame: RobotMotionFrame,
                               gripper=(0.0, 0.0), timestamp: float = 0.0,
                               backend=None) -> KeypointFrame:
    """FK the five keypoints of a robot motion frame into a KeypointFrame."""
    from .geometry import Pose
    fk = forward_kinematics(model, frame.joints,
                            Pose(frame.root_position, frame.root_orientation), backend)
    return KeypointFrame({kp: fk.keypoints[kp] for kp in KEYPOINT_NAMES},
                         (float(gripper[0]), float(gripper[1])), timestamp)


def run_episode(source, model: KinematicModel, skr_cfg: SkrConfig,
                controller_cfg: ControllerConfig, plant: PlantState,
                duration: float, rate_hl: float = 10.0, seed: int = 0,
                offsets: OffsetSet = DEFAULT_OFFSETS,
                history_depth: int = 4,
                collect_observations: bool = False,
                backend=None) -> EpisodeLog:
    """Receding-horizon episode: track chunked keypoint targets on the plant.

    Every high-level period the source is asked for a fresh relative chunk,
    which is re-anchored at the current reference keypoints, scaled, IK'd
    with warm starts, resampled to the control rate, and appended to the
    reference buffer; only the front of each chunk is executed before the
    next prediction replaces the rest. Every control tick the buffered joint
    reference is converted to a saturated residual, decoded to a desired
    posture, and tracked by the PD law on the plant. Fully deterministic for
    a given seed.
    """
    del seed  # all bundled sources are deterministic; kept for the CLI contract
    cr = controller_cfg.control_rate
    dt = 1.0 / cr
    if cr % rate_hl != 0.0:
        raise ValueError(f"control rate {cr} must be an integer multiple of rate_hl {rate_hl}")
    ratio = int(round(cr / rate_hl))
    if source.rate_hz % rate_hl != 0.0:
        raise ValueError("source rate must be an integer multiple of rate_hl")
    n_exec = int(round(source.rate_hz / rate_hl))
    if n_exec > source.horizon:
        raise ValueError("source horizon shorter than one high-level period")

    ticks = round(duration * cr)
    dof = model.dof
    initial = RobotMotionFrame(model.default_root_pose().translation,
                               model.default_root_pose().rotation, plant.q.copy())
    buffer = ReferenceBuffer(initial)
    stream = StreamRetargeter(model, skr_cfg, initial, backend)
    last_ref = initial
    last_widths = (0.0, 0.0)

    history = ProprioHistory(history_depth)
    prev_action = np.zeros(dof)

    log = EpisodeLog(
        time=np.empty(ticks), q_ref=np.empty((ticks, dof)), q_des=np.empty((ticks, dof)),
        q=np.empty((ticks, dof)), qd=np.empty((ticks, dof)), tau=np.empty((ticks, dof)),
        handover_ticks=[], ik_iterations=[], ik_converged=[],
    )
    if collect_observations:
        cmd_dim = len(offsets) * (11 + dof)
        prop_dim = 4 + history_depth * (3 + 3 * dof)
        log.observations["command"] = np.empty((ticks, cmd_dim))
        log.observations["proprio"] = np.empty((ticks, prop_dim))

    for i in range(ticks):
        t = i * dt
        if i % ratio == 0:
            try:
                anchor = keypoint_frame_from_motion(model, last_ref, last_widths, t, backend)
                rel = source.chunk(t, anchor)
                targets = absolute_from_chunk(rel, anchor)
                scaled = [scale_keypoints(kf, skr_cfg.height_scale) for kf in targets[:n_exec]]
                motion = []
                for kf in scaled:
                    frame, report = stream.step(kf)
                    motion.append(frame)
                    log.ik_iterations.append(report.iterations)
                    log.ik_converged.append(report.converged)
                buffer.append(resample(MotionChunk([last_ref] + motion, source.rate_hz), cr)[1:])
                last_ref = motion[-1]
                last_widths = scaled[-1].gripper
                log.handover_ticks.append(i)
            except ValueError as exc:
                raise ValueError(f"episode handover failed at tick {i}: {exc}") from exc

        ref = buffer.frame_at_offset(0)
        action = encode_reference(ref.joints, controller_cfg)
        q_des = decode_action(action, controller_cfg)
        tau = pd_torque(q_des, plant.q, plant.qd, controller_cfg)

        log.time[i] = t
        log.q_ref[i] = ref.joints
        log.q_des[i] = q_des
        log.q[i] = plant.q
        log.qd[i] = plant.qd
        log.tau[i] = tau

        if collect_observations:
            state = RobotState(
                root_position=ref.root_position, root_orientation=ref.root_orientation,
                angular_velocity=np.zeros(3), joints=plant.q, joint_velocities=plant.qd,
                previous_action=prev_action, timestamp=t,
            )
            history.push(state)
            log.observations["command"][i] = assemble_command(buffer, state, offsets)
            log.observations["proprio"][i] = assemble_proprio(history)

        plant = plant_step(plant, tau, dt)
        buffer.advance()
        prev_action = action

    return log
