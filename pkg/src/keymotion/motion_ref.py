"""Reference-motion buffering and observation assembly.

Motion chunks produced at the high-level rate are resampled to the 50 Hz
control rate (linear interpolation for root position and joints, spherical
interpolation for root orientation) and appended to a reference buffer. The
buffer feeds two observation vectors: a proprioceptive block built from a
short robot-state history, and a motion-command block that concatenates
reference frames at a fixed set of future/past offsets relative to the
cursor. All layouts are versioned; see docs/formats.md.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass

import numpy as np

from .geometry import projected_gravity, quat_conjugate, quat_mul, quat_yaw, slerp
from .skr import RobotMotionFrame

log = logging.getLogger(__name__)

OBSERVATION_LAYOUT_VERSION = "obs-v1"
CONTROL_RATE = 50.0
DEFAULT_HISTORY_DEPTH = 4


@dataclass(eq=False)
class MotionChunk:
    frames: list[RobotMotionFrame]
    source_rate: float

    def __post_init__(self):
        if not self.frames:
            raise ValueError("motion chunk must contain at least one frame")
        if not self.source_rate > 0.0:
            raise ValueError("source_rate must be positive")
        dof = self.frames[0].dof
        if any(f.dof != dof for f in self.frames):
            raise ValueError("motion chunk frames disagree on dof")


def _lerp_frame(a: RobotMotionFrame, b: RobotMotionFrame, u: float) -> RobotMotionFrame:
    return RobotMotionFrame(
        (1.0 - u) * a.root_position + u * b.root_position,
        slerp(a.root_orientation, b.root_orientation, u),
        (1.0 - u) * a.joints + u * b.joints,
    )


def resample(chunk: MotionChunk, target_rate: float = CONTROL_RATE) -> list[RobotMotionFrame]:
    """Resample a motion chunk to a uniform grid at the control rate.

    The grid spans [0, (n-1)/source_rate] with round(span * target_rate)
    intervals (minimum 1), so the first and last output frames reproduce the
    input endpoints exactly even when the rates do not divide evenly.
    """
    frames = chunk.frames
    n = len(frames)
    if n == 1:
        log.warning("resampling a single-frame chunk is a no-op")
        return [frames[0].copy()]
    if not target_rate > 0.0:
        raise ValueError("target_rate must be positive")
    span = (n - 1) / chunk.source_rate
    steps = max(1, round(span * target_rate))
    out = [frames[0].copy()]
    for j in range(1, steps):
        t = span * j / steps
        x = t * chunk.source_rate
        i = min(int(x), n - 2)
        out.append(_lerp_frame(frames[i], frames[i + 1], x - i))
    out.append(frames[-1].copy())
    return out


@dataclass(eq=False)
class RobotState:
    """Instantaneous robot state as seen by the command/proprio assembly.

    The full root position is carried so relative root commands can be
    formed; only its z component enters the proprioceptive vector.
    """

    root_position: np.ndarray
    root_orientation: np.ndarray
    angular_velocity: np.ndarray
    joints: np.ndarray
    joint_velocities: np.ndarray
    previous_action: np.ndarray
    timestamp: float = 0.0

    def __post_init__(self):
        self.root_position = np.asarray(self.root_position, dtype=float).reshape(3)
        self.root_orientation = np.asarray(self.root_orientation, dtype=float).reshape(4)
        self.angular_velocity = np.asarray(self.angular_velocity, dtype=float).reshape(3)
        self.joints = np.asarray(self.joints, dtype=float).reshape(-1)
        dof = self.joints.shape[0]
        self.joint_velocities = np.asarray(self.joint_velocities, dtype=float).reshape(dof)
        self.previous_action = np.asarray(self.previous_action, dtype=float).reshape(dof)

    @property
    def root_height(self) -> float:
        return float(self.root_position[2])

    @property
    def dof(self) -> int:
        return self.joints.shape[0]


class ProprioHistory:
    """Ring of the last N robot states, padded by repeating the first."""

    def __init__(self, depth: int = DEFAULT_HISTORY_DEPTH):
        if depth < 1:
            raise ValueError("history depth must be >= 1")
        self.depth = depth
        self._states: list[RobotState] = []

    def push(self, state: RobotState) -> None:
        self._states.append(state)
        if len(self._states) > self.depth:
            self._states.pop(0)

    @property
    def primed(self) -> bool:
        return bool(self._states)

    def states(self) -> list[RobotState]:
        """Oldest-first window of length ``depth`` (front-padded)."""
        if not self._states:
            raise ValueError("proprio history is empty")
        pad = [self._states[0]] * (self.depth - len(self._states))
        return pad + list(self._states)


@dataclass(frozen=True)
class OffsetSet:
    """Ordered reference-frame offsets; the order fixes the command layout."""

    offsets: tuple[int, ...]

    def __post_init__(self):
        if 0 not in self.offsets:
            raise ValueError("offset set must contain 0")

    def __iter__(self):
        return iter(self.offsets)

    def __len__(self):
        return len(self.offsets)


DEFAULT_OFFSETS = OffsetSet((0, 1, 2, 3, 4, -1, -2, -4, -8, -12, -16))


class ReferenceBuffer:
    """Reference frames at control rate with a cursor and a producer watermark.

    One writer appends frames (advancing the watermark); one reader fetches
    frames at cursor+k, clamped to [0, watermark], and advances the cursor.
    A single lock makes interleaved two-party use safe; stepped single-thread
    use goes through exactly the same code path.
    """

    def __init__(self, initial: RobotMotionFrame | list[RobotMotionFrame]):
        frames = [initial] if isinstance(initial, RobotMotionFrame) else list(initial)
        if not frames:
            raise ValueError("reference buffer needs at least one frame")
        self._frames: list[RobotMotionFrame] = frames
        self._cursor = 0
        self._lock = threading.Lock()

    @property
    def watermark(self) -> int:
        with self._lock:
            return len(self._frames) - 1

    @property
    def cursor(self) -> int:
        with self._lock:
            return self._cursor

    def append(self, frames) -> None:
        with self._lock:
            self._frames.extend(frames)

    def frame_at(self, index: int) -> RobotMotionFrame:
        with self._lock:
            return self._frames[min(max(index, 0), len(self._frames) - 1)]

    def frame_at_offset(self, k: int) -> RobotMotionFrame:
        with self._lock:
            index = min(max(self._cursor + k, 0), len(self._frames) - 1)
            return self._frames[index]

    def advance(self, ticks: int = 1) -> None:
        with self._lock:
            self._cursor += ticks


@dataclass(eq=False)
class CommandFrame:
    """One reference command: relative root pose, height, gravity, joints."""

    delta_position: np.ndarray   # reference minus current root, heading frame
    delta_orientation: np.ndarray  # wxyz of current^-1 * reference
    reference_height: float
    reference_gravity: np.ndarray
    joints: np.ndarray

    def as_vector(self) -> np.ndarray:
        return np.concatenate([
            self.delta_position,
            self.delta_orientation,
            [self.reference_height],
            self.reference_gravity,
            self.joints,
        ])


def _heading_matrix_t(q) -> np.ndarray:
    yaw = quat_yaw(q)
    c, s = np.cos(yaw), np.sin(yaw)
    # transpose of the z-rotation: world -> heading frame
    return np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])


def command_frame(buffer: ReferenceBuffer, state: RobotState, k: int) -> CommandFrame:
    """Command block for offset k; out-of-range offsets clamp to the buffer."""
    ref = buffer.frame_at_offset(k)
    dp = _heading_matrix_t(state.root_orientation) @ (ref.root_position - state.root_position)
    dq = quat_mul(quat_conjugate(state.root_orientation), ref.root_orientation)
    return CommandFrame(
        delta_position=dp,
        delta_orientation=dq,
        reference_height=float(ref.root_position[2]),
        reference_gravity=projected_gravity(ref.root_orientation),
        joints=ref.joints.copy(),
    )


def assemble_command(buffer: ReferenceBuffer, state: RobotState,
                     offsets: OffsetSet = DEFAULT_OFFSETS) -> np.ndarray:
    """Concatenated command blocks in offset order: |offsets| x (11 + dof)."""
    return np.concatenate([command_frame(buffer, state, k).as_vector() for k in offsets])


def assemble_proprio(history: ProprioHistory) -> np.ndarray:
    """Proprioceptive vector: height, gravity, then per-quantity histories.

    Layout: h (1), g (3), N x angular velocity, N x joints, N x joint
    velocities, N x previous action; each history block is oldest-first
    (newest last). Length = 4 + N * (3 + 3 * dof).
    """
    states = history.states()
    newest = states[-1]
    parts = [np.array([newest.root_height]), projected_gravity(newest.root_orientation)]
    parts += [s.angular_velocity for s in states]
    parts += [s.joints for s in states]
    parts += [s.joint_velocities for s in states]
    parts += [s.previous_action for s in states]
    return np.concatenate(parts)


def high_level_proprio(joint_history: np.ndarray) -> np.ndarray:
    """Flatten 3 historical frames of the 15-D lower-body joint vector.

    Input shape (3, 15), oldest first; output length 45.
    """
    arr = np.asarray(joint_history, dtype=float)
    if arr.shape != (3, 15):
        raise ValueError(f"expected (3, 15) lower-body history, got {arr.shape}")
    return arr.reshape(45).copy()


_LOWER_BODY_TOKENS = ("hip", "knee", "ankle", "waist")


def lower_body_indices(model) -> list[int]:
    """Joint-vector indices of the 12 leg + 3 waist joints, by name."""
    idx = [i for i, name in enumerate(model.joint_names)
           if any(tok in name for tok in _LOWER_BODY_TOKENS)]
    if len(idx) != 15:
        raise ValueError(f"model {model.name!r} has {len(idx)} lower-body joints, expected 15")
    return idx


def command_labels(offsets: OffsetSet = DEFAULT_OFFSETS, dof: int = 29) -> list[str]:
    """Column names for the command vector, e.g. cmd.k+2.dq.w."""
    labels = []
    for k in offsets:
        p = f"cmd.k{k:+d}"
        labels += [f"{p}.dp.{a}" for a in "xyz"]
        labels += [f"{p}.dq.{a}" for a in "wxyz"]
        labels.append(f"{p}.h")
        labels += [f"{p}.g.{a}" for a in "xyz"]
        labels += [f"{p}.j{i:02d}" for i in range(dof)]
    return labels


def proprio_labels(depth: int = DEFAULT_HISTORY_DEPTH, dof: int = 29) -> list[str]:
    """Column names for the proprio vector; age 0 is the newest sample."""
    ages = list(range(depth - 1, -1, -1))
    labels = ["prop.h"] + [f"prop.g.{a}" for a in "xyz"]
    labels += [f"prop.omega.t-{age}.{a}" for age in ages for a in "xyz"]
    labels += [f"prop.q.t-{age}.j{i:02d}" for age in ages for i in range(dof)]
    labels += [f"prop.qd.t-{age}.j{i:02d}" for age in ages for i in range(dof)]
    labels += [f"prop.a.t-{age}.j{i:02d}" for age in ages for i in range(dof)]
    return labels
