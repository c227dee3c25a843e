"""Spatial keypoint retargeting.

Maps five target keypoint poses onto a robot model as a 36-D motion frame
(root position, root orientation, joint vector). Height mismatch between
demonstrator and robot is bridged by scaling only the vertical pelvis-to-foot
distance of each foot keypoint; every other coordinate is left untouched so
the metric structure of the demonstration survives.

The solver is damped least squares over a stacked, weighted task residual of
5 keypoints x (3 position + 3 orientation-log) rows. Decision variables are
the root pose (6, updated multiplicatively by a world-frame twist to match
the world-frame geometric Jacobian) and all joints, clamped to their limits
after every step. Backtracking halves a step up to five times whenever the
weighted residual would increase, so accepted iterations never regress.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .action_codec import KeypointFrame
from .geometry import quat_from_rotvec, quat_mul, quat_to_matrix, rotation_log
from .kinematics import KEYPOINT_NAMES, KinematicModel, fk_arrays, keypoint_pose_arrays


@dataclass(eq=False)
class RobotMotionFrame:
    """Robot-native motion sample: root position + wxyz orientation + joints."""

    root_position: np.ndarray
    root_orientation: np.ndarray
    joints: np.ndarray

    def __post_init__(self):
        self.root_position = np.asarray(self.root_position, dtype=float).reshape(3)
        self.root_orientation = np.asarray(self.root_orientation, dtype=float).reshape(4)
        self.joints = np.asarray(self.joints, dtype=float).reshape(-1)

    @property
    def dof(self) -> int:
        return self.joints.shape[0]

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.root_position, self.root_orientation, self.joints])

    @staticmethod
    def from_array(values: np.ndarray) -> "RobotMotionFrame":
        values = np.asarray(values, dtype=float).reshape(-1)
        return RobotMotionFrame(values[0:3], values[3:7], values[7:])

    def copy(self) -> "RobotMotionFrame":
        return RobotMotionFrame(self.root_position.copy(), self.root_orientation.copy(),
                                self.joints.copy())


@dataclass
class IkSettings:
    max_iterations: int = 200
    damping: float = 1e-4
    step_tolerance: float = 1e-9
    residual_tolerance: float = 1e-6
    max_step_norm: float = 1.0


@dataclass
class TaskWeight:
    position: float = 1.0
    orientation: float = 0.5


@dataclass
class SkrConfig:
    height_scale: float = 1.0
    task_weights: dict[str, TaskWeight] = field(
        default_factory=lambda: {kp: TaskWeight() for kp in KEYPOINT_NAMES})
    ik: IkSettings = field(default_factory=IkSettings)

    def __post_init__(self):
        if not self.height_scale > 0.0:
            raise ValueError("height_scale must be positive")
        weights = []
        for kp in KEYPOINT_NAMES:
            w = self.task_weights.setdefault(kp, TaskWeight())
            if w.position < 0.0 or w.orientation < 0.0:
                raise ValueError(f"negative task weight for {kp}")
            weights += [w.position, w.orientation]
        if not any(w > 0.0 for w in weights):
            raise ValueError("at least one task weight must be positive")
        if not self.ik.damping > 0.0:
            raise ValueError("ik damping must be positive")

    def to_json_dict(self) -> dict:
        return {
            "height_scale": self.height_scale,
            "task_weights": {kp: {"position_weight": w.position, "orientation_weight": w.orientation}
                             for kp, w in self.task_weights.items()},
            "ik": {
                "max_iterations": self.ik.max_iterations,
                "damping": self.ik.damping,
                "step_tolerance": self.ik.step_tolerance,
                "residual_tolerance": self.ik.residual_tolerance,
                "max_step_norm": self.ik.max_step_norm,
            },
        }

    @staticmethod
    def from_json_dict(doc: dict) -> "SkrConfig":
        weights = {kp: TaskWeight(w.get("position_weight", 1.0), w.get("orientation_weight", 0.5))
                   for kp, w in doc.get("task_weights", {}).items()}
        ik = IkSettings(**doc.get("ik", {}))
        return SkrConfig(height_scale=doc.get("height_scale", 1.0),
                         task_weights=weights, ik=ik)

    @staticmethod
    def load(path) -> "SkrConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return SkrConfig.from_json_dict(json.load(fh))


@dataclass
class IkReport:
    iterations: int
    position_errors: dict[str, float]
    orientation_errors: dict[str, float]
    residual: float
    converged: bool

    @property
    def max_position_error(self) -> float:
        return max(self.position_errors.values())

    @property
    def max_orientation_error(self) -> float:
        return max(self.orientation_errors.values())

    CSV_HEADER = ("frame", "iterations", "converged", "residual",
                  *(f"pos_err_{kp}" for kp in KEYPOINT_NAMES),
                  *(f"ori_err_{kp}" for kp in KEYPOINT_NAMES))

    def csv_row(self, frame_index: int) -> list:
        return [frame_index, self.iterations, int(self.converged), repr(self.residual),
                *(repr(self.position_errors[kp]) for kp in KEYPOINT_NAMES),
                *(repr(self.orientation_errors[kp]) for kp in KEYPOINT_NAMES)]


def scale_keypoints(kf: KeypointFrame, height_scale: float) -> KeypointFrame:
    """Scale only the vertical pelvis-to-foot distance of each foot keypoint.

    Foot z becomes pelvis_z + height_scale * (foot_z - pelvis_z); every other
    scalar in the frame (x/y, orientations, pelvis, TCPs, widths, timestamp)
    is copied through bit-for-bit.
    """
    if not height_scale > 0.0:
        raise ValueError("height_scale must be positive")
    out = kf.copy()
    pelvis_z = kf.poses["pelvis"].translation[2]
    for foot in ("left_foot", "right_foot"):
        z = kf.poses[foot].translation[2]
        out.poses[foot].translation[2] = pelvis_z + height_scale * (z - pelvis_z)
    return out


class _IkState:
    """Mutable solver state plus the evaluation cache for one configuration."""

    __slots__ = ("root_t", "root_q", "q", "link_t", "link_q", "kp_t", "kp_r",
                 "residual", "weighted_norm")

    def __init__(self, root_t, root_q, q):
        self.root_t = root_t
        self.root_q = root_q
        self.q = q


def _evaluate(model, state, targets_t, targets_r, weights, backend):
    state.link_t, state.link_q = fk_arrays(model, state.q, state.root_t, state.root_q, backend)
    kp_t = np.empty((5, 3))
    kp_r = np.empty((5, 3, 3))
    residual = np.empty(30)
    for k, kp in enumerate(KEYPOINT_NAMES):
        t, qq = keypoint_pose_arrays(model, kp, state.link_t, state.link_q)
        kp_t[k] = t
        kp_r[k] = quat_to_matrix(qq)
        residual[6 * k:6 * k + 3] = targets_t[k] - t
        residual[6 * k + 3:6 * k + 6] = rotation_log(kp_r[k], targets_r[k])
    if not np.all(np.isfinite(residual)):
        raise ValueError("non-finite IK residual; check targets and model")
    state.kp_t = kp_t
    state.kp_r = kp_r
    state.residual = residual
    state.weighted_norm = float(np.sqrt(np.sum(weights * residual * residual)))
    return state


def _report_from(state, targets_t, targets_r, iterations, converged) -> IkReport:
    pos = {}
    ori = {}
    for k, kp in enumerate(KEYPOINT_NAMES):
        pos[kp] = float(np.linalg.norm(targets_t[k] - state.kp_t[k]))
        ori[kp] = float(np.linalg.norm(rotation_log(state.kp_r[k], targets_r[k])))
    return IkReport(iterations=iterations, position_errors=pos, orientation_errors=ori,
                    residual=state.weighted_norm, converged=converged)


def retarget(model: KinematicModel, targets: KeypointFrame, seed: RobotMotionFrame,
             cfg: SkrConfig, backend=None) -> tuple[RobotMotionFrame, IkReport]:
    """Solve whole-body IK for one keypoint target frame.

    Returns the final motion frame and a report; non-convergence is reported,
    not raised. The seed must respect the joint limits.
    """
    low, high = model.limits_low, model.limits_high
    seed_q = model.check_joint_vector(seed.joints)
    if np.any(seed_q < low - 1e-9) or np.any(seed_q > high + 1e-9):
        raise ValueError("seed joints violate model limits")

    targets_t = np.array([targets.poses[kp].translation for kp in KEYPOINT_NAMES])
    targets_r = np.array([quat_to_matrix(targets.poses[kp].rotation) for kp in KEYPOINT_NAMES])
    if not np.all(np.isfinite(targets_t)):
        raise ValueError("non-finite target translations")

    weights = np.empty(30)
    for k, kp in enumerate(KEYPOINT_NAMES):
        w = cfg.task_weights[kp]
        weights[6 * k:6 * k + 3] = w.position
        weights[6 * k + 3:6 * k + 6] = w.orientation

    ik = cfg.ik
    dof = model.dof
    n_var = 6 + dof
    state = _IkState(seed.root_position.copy(), seed.root_orientation.copy(),
                     np.clip(seed_q, low, high))
    _evaluate(model, state, targets_t, targets_r, weights, backend)

    iterations = 0
    for _ in range(ik.max_iterations):
        if state.weighted_norm <= ik.residual_tolerance:
            break
        jac = _stack_jacobian(model, state, backend)
        wj = weights[:, None] * jac
        lhs = jac.T @ wj + ik.damping * np.eye(n_var)
        rhs = wj.T @ state.residual
        step = np.linalg.solve(lhs, rhs)
        if not np.all(np.isfinite(step)):
            raise ValueError("non-finite IK step")
        norm = float(np.linalg.norm(step))
        if norm > ik.max_step_norm:
            step *= ik.max_step_norm / norm
            norm = ik.max_step_norm
        if norm < ik.step_tolerance:
            break

        accepted = None
        scale = 1.0
        for _ in range(6):  # full step plus up to 5 halvings
            cand = _IkState(
                state.root_t + scale * step[0:3],
                quat_mul(quat_from_rotvec(scale * step[3:6]), state.root_q),
                np.clip(state.q + scale * step[6:], low, high),
            )
            _evaluate(model, cand, targets_t, targets_r, weights, backend)
            if cand.weighted_norm < state.weighted_norm:
                accepted = cand
                break
            scale *= 0.5
        if accepted is None:
            break  # no improving step left at this damping
        state = accepted
        iterations += 1
        if scale * norm < ik.step_tolerance:
            break

    converged = state.weighted_norm <= ik.residual_tolerance
    frame = RobotMotionFrame(state.root_t, state.root_q, state.q)
    return frame, _report_from(state, targets_t, targets_r, iterations, converged)


def _stack_jacobian(model, state, backend) -> np.ndarray:
    """30 x (6 + dof) task Jacobian: root twist columns, then joint columns."""
    from . import _backend as backend_mod
    kern = backend if backend is not None and not isinstance(backend, str) \
        else backend_mod.get_kernels(backend)
    arr = model._arrays
    dof = model.dof
    jac = np.zeros((30, 6 + dof))
    for k, kp in enumerate(KEYPOINT_NAMES):
        rows = slice(6 * k, 6 * k + 6)
        block = np.zeros((6, dof))
        kern.keypoint_jacobian_cols(state.link_t, state.link_q, arr["paths"][kp],
                                    arr["jtype"], arr["axis"], arr["qidx"],
                                    arr["child_link"], state.kp_t[k], block)
        jac[rows, 6:] = block
        # root translation: identity on linear rows
        jac[6 * k:6 * k + 3, 0:3] = np.eye(3)
        # root rotation (world twist about the root origin)
        d = state.kp_t[k] - state.root_t
        jac[6 * k:6 * k + 3, 3:6] = -_skew(d)
        jac[6 * k + 3:6 * k + 6, 3:6] = np.eye(3)
    return jac


def _skew(v: np.ndarray) -> np.ndarray:
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


class StreamRetargeter:
    """Closed-loop retargeting: each solve is warm-started from the last."""

    def __init__(self, model: KinematicModel, cfg: SkrConfig,
                 initial: RobotMotionFrame, backend=None):
        self.model = model
        self.cfg = cfg
        self.current = initial.copy()
        self.backend = backend
        self.reports: list[IkReport] = []

    def step(self, targets: KeypointFrame) -> tuple[RobotMotionFrame, IkReport]:
        frame, report = retarget(self.model, targets, self.current, self.cfg, self.backend)
        self.current = frame
        self.reports.append(report)
        return frame, report


def retarget_stream(model: KinematicModel, target_frames, initial: RobotMotionFrame,
                    cfg: SkrConfig, backend=None) -> tuple[list[RobotMotionFrame], list[IkReport]]:
    """Retarget a target sequence with warm starts; deterministic."""
    stream = StreamRetargeter(model, cfg, initial, backend)
    frames = []
    for i, kf in enumerate(target_frames):
        try:
            frame, _ = stream.step(kf)
        except ValueError as exc:
            raise ValueError(f"retargeting failed at frame {i}: {exc}") from exc
        frames.append(frame)
    return frames, stream.reports
