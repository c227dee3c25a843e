"""Keypoint action encoding and decoding.

A trajectory of five-keypoint frames is converted, per keypoint, into poses
relative to that keypoint's own frame at the query time (future steps only,
so the chunk at index t supervises where to go at t+1 ... t+H). Relative
chunks pack into 47-wide rows: five blocks of 3 translation + 6 rotation
values (first two rotation-matrix columns), then the two gripper widths.
Translations and widths are min-max normalized to [-1, 1] from dataset
statistics; rotation entries are never rescaled, since that would break the
orthogonality needed to recover a rotation matrix.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .geometry import Pose, matrix_to_quat, quat_to_matrix, rot6d_decode, rot6d_encode
from .kinematics import KEYPOINT_NAMES

log = logging.getLogger(__name__)

ACTION_DIM = 47
DEFAULT_HORIZON = 48
ACTION_LAYOUT_VERSION = "kp5-rel47-v1"

# row layout: per keypoint [tx ty tz r6d0..r6d5], grippers last
TRANSLATION_COLS = np.array([k * 9 + a for k in range(5) for a in range(3)])
GRIPPER_COLS = np.array([45, 46])
SCALAR_DIM_NAMES = tuple(
    [f"{kp}.t{axis}" for kp in KEYPOINT_NAMES for axis in "xyz"]
    + ["gripper.left", "gripper.right"]
)


@dataclass(eq=False)
class KeypointFrame:
    """One demonstration/action frame: five keypoint poses plus gripper widths."""

    poses: dict[str, Pose]
    gripper: tuple[float, float]
    timestamp: float

    def __post_init__(self):
        missing = [kp for kp in KEYPOINT_NAMES if kp not in self.poses]
        if missing:
            raise ValueError(f"keypoint frame missing poses for {missing}")
        if self.gripper[0] < 0.0 or self.gripper[1] < 0.0:
            raise ValueError("gripper widths must be non-negative")

    def copy(self) -> "KeypointFrame":
        return KeypointFrame({k: p.copy() for k, p in self.poses.items()},
                             tuple(self.gripper), self.timestamp)


@dataclass(eq=False)
class RelativeChunk:
    """Per-keypoint relative poses for H future steps, widths kept absolute."""

    poses: dict[str, list[Pose]]
    widths: np.ndarray  # (H, 2)
    timestamps: np.ndarray | None = None  # (H,) source-time stamps when known

    @property
    def horizon(self) -> int:
        return len(self.poses[KEYPOINT_NAMES[0]])


@dataclass(eq=False)
class ActionChunk:
    """Normalized H x 47 action array plus encode-time clamp diagnostics."""

    values: np.ndarray
    normalized: bool = True
    clamp_count: int = 0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or self.values.shape[1] != ACTION_DIM:
            raise ValueError(f"action chunk rows must be {ACTION_DIM}-wide, got {self.values.shape}")

    @property
    def horizon(self) -> int:
        return self.values.shape[0]


@dataclass(eq=False)
class NormalizationStats:
    """Per-dimension min/max for the 15 translation and 2 gripper scalars."""

    mins: np.ndarray
    maxs: np.ndarray
    horizon: int = DEFAULT_HORIZON

    def __post_init__(self):
        self.mins = np.asarray(self.mins, dtype=float).reshape(17)
        self.maxs = np.asarray(self.maxs, dtype=float).reshape(17)
        if np.any(self.mins > self.maxs):
            raise ValueError("stats require min <= max on every dimension")

    def to_json_dict(self) -> dict:
        return {
            "format_version": "1",
            "layout": ACTION_LAYOUT_VERSION,
            "horizon": self.horizon,
            "dims": list(SCALAR_DIM_NAMES),
            "min": self.mins.tolist(),
            "max": self.maxs.tolist(),
        }

    @staticmethod
    def from_json_dict(doc: dict) -> "NormalizationStats":
        if doc.get("layout") != ACTION_LAYOUT_VERSION:
            raise ValueError(f"stats layout {doc.get('layout')!r} != {ACTION_LAYOUT_VERSION!r}")
        return NormalizationStats(np.array(doc["min"]), np.array(doc["max"]),
                                  int(doc.get("horizon", DEFAULT_HORIZON)))


def relative_chunk(traj: list[KeypointFrame], t: int, horizon: int = DEFAULT_HORIZON) -> RelativeChunk:
    """Relative poses of frames t+1 ... t+H against each keypoint's frame at t."""
    available = len(traj) - 1 - t
    if available < horizon:
        raise ValueError(
            f"chunk at t={t} needs {horizon} future frames, only {available} available")
    anchor = traj[t]
    poses: dict[str, list[Pose]] = {kp: [] for kp in KEYPOINT_NAMES}
    for kp in KEYPOINT_NAMES:
        inv = anchor.poses[kp].inverse()
        poses[kp] = [inv.compose(traj[t + 1 + j].poses[kp]) for j in range(horizon)]
    widths = np.array([traj[t + 1 + j].gripper for j in range(horizon)])
    stamps = np.array([traj[t + 1 + j].timestamp for j in range(horizon)])
    return RelativeChunk(poses=poses, widths=widths, timestamps=stamps)


def absolute_from_chunk(chunk: RelativeChunk, anchor: KeypointFrame) -> list[KeypointFrame]:
    """Re-anchor a relative chunk: abs[k, j] = anchor[k] composed with rel[k, j]."""
    if chunk.timestamps is None:
        raise ValueError("relative chunk carries no timestamps; set them before re-anchoring")
    frames = []
    for j in range(chunk.horizon):
        poses = {kp: anchor.poses[kp].compose(chunk.poses[kp][j]) for kp in KEYPOINT_NAMES}
        frames.append(KeypointFrame(poses, (float(chunk.widths[j, 0]), float(chunk.widths[j, 1])),
                                    float(chunk.timestamps[j])))
    return frames


def _affine_encode(x, lo, hi):
    span = hi - lo
    out = np.zeros_like(x)
    ok = span > 0.0
    out[..., ok] = 2.0 * (x[..., ok] - lo[ok]) / span[ok] - 1.0
    return out


def encode(chunk: RelativeChunk, stats: NormalizationStats) -> ActionChunk:
    """Pack a relative chunk into normalized rows; out-of-range scalars clamp."""
    h = chunk.horizon
    values = np.empty((h, ACTION_DIM))
    scalars = np.empty((h, 17))
    for k, kp in enumerate(KEYPOINT_NAMES):
        scalars[:, 3 * k:3 * k + 3] = [p.translation for p in chunk.poses[kp]]
        quats = np.array([p.rotation for p in chunk.poses[kp]])
        values[:, k * 9 + 3:k * 9 + 9] = rot6d_encode(quat_to_matrix(quats))
    scalars[:, 15:17] = chunk.widths

    norm = _affine_encode(scalars, stats.mins, stats.maxs)
    clamp_count = int(np.sum(norm > 1.0) + np.sum(norm < -1.0))
    if clamp_count:
        log.warning("encode clamped %d scalar values outside the stats range", clamp_count)
        norm = np.clip(norm, -1.0, 1.0)
    for k in range(5):
        values[:, k * 9:k * 9 + 3] = norm[:, 3 * k:3 * k + 3]
    values[:, 45:47] = norm[:, 15:17]
    return ActionChunk(values=values, normalized=True, clamp_count=clamp_count)


def decode(chunk: ActionChunk, stats: NormalizationStats) -> RelativeChunk:
    """Invert ``encode``: de-normalize scalars, re-orthonormalize rotations."""
    if not chunk.normalized:
        raise ValueError("decode expects a normalized action chunk")
    vals = chunk.values
    h = chunk.horizon
    span = stats.maxs - stats.mins
    poses: dict[str, list[Pose]] = {}
    for k, kp in enumerate(KEYPOINT_NAMES):
        trans = stats.mins[3 * k:3 * k + 3] + (vals[:, k * 9:k * 9 + 3] + 1.0) * span[3 * k:3 * k + 3] / 2.0
        try:
            mats = rot6d_decode(vals[:, k * 9 + 3:k * 9 + 9])
        except ValueError:
            for j in range(h):  # pinpoint the offending step for the error message
                try:
                    rot6d_decode(vals[j, k * 9 + 3:k * 9 + 9])
                except ValueError as exc:
                    raise ValueError(f"keypoint {kp!r} step {j}: {exc}") from None
            raise
        quats = matrix_to_quat(mats)
        poses[kp] = [Pose(trans[j], quats[j]) for j in range(h)]
    widths = stats.mins[15:17] + (vals[:, 45:47] + 1.0) * span[15:17] / 2.0
    return RelativeChunk(poses=poses, widths=widths, timestamps=None)


def compute_stats(dataset: list[list[KeypointFrame]], horizon: int = DEFAULT_HORIZON) -> NormalizationStats:
    """Elementwise min/max of relative actions over every valid chunk start."""
    if not dataset:
        raise ValueError("cannot compute stats from an empty dataset")
    mins = np.full(17, np.inf)
    maxs = np.full(17, -np.inf)
    usable = 0
    for traj in dataset:
        n = len(traj)
        if n < horizon + 1:
            continue
        usable += 1
        widths = np.array([f.gripper for f in traj])
        for k, kp in enumerate(KEYPOINT_NAMES):
            pos = np.array([f.poses[kp].translation for f in traj])
            quats = np.array([f.poses[kp].rotation for f in traj])
            rot = quat_to_matrix(quats)
            for t in range(n - horizon):
                rel = (pos[t + 1:t + 1 + horizon] - pos[t]) @ rot[t]
                mins[3 * k:3 * k + 3] = np.minimum(mins[3 * k:3 * k + 3], rel.min(axis=0))
                maxs[3 * k:3 * k + 3] = np.maximum(maxs[3 * k:3 * k + 3], rel.max(axis=0))
        w = widths[1:]  # the union of all chunk windows covers frames 1..n-1
        mins[15:17] = np.minimum(mins[15:17], w.min(axis=0))
        maxs[15:17] = np.maximum(maxs[15:17], w.max(axis=0))
    if not usable:
        raise ValueError(f"no trajectory is long enough for horizon {horizon}")
    return NormalizationStats(mins, maxs, horizon)
