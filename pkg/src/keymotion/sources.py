"""Chunk sources for the episode loop: replay and synthetic generators.

A source produces relative keypoint chunks at its own rate, playing the role
of the (out-of-scope) high-level policy. Each source exposes ``rate_hz``,
``horizon`` and ``chunk(t, anchor) -> RelativeChunk``; the returned chunk is
relative to the source's own frame at time t and gets re-anchored at the
robot's current keypoints by the caller.
"""

from __future__ import annotations

import numpy as np

from .action_codec import DEFAULT_HORIZON, KeypointFrame, RelativeChunk, relative_chunk
from .geometry import Pose
from .kinematics import KEYPOINT_NAMES, KinematicModel
from .skr import RobotMotionFrame


class StaticChunkSource:
    """Hold the anchor pose: every relative pose is the identity."""

    def __init__(self, rate_hz: float = 10.0, horizon: int = DEFAULT_HORIZON):
        self.rate_hz = rate_hz
        self.horizon = horizon

    def chunk(self, t: float, anchor: KeypointFrame) -> RelativeChunk:
        poses = {kp: [Pose.identity() for _ in range(self.horizon)] for kp in KEYPOINT_NAMES}
        widths = np.tile(np.asarray(anchor.gripper, dtype=float), (self.horizon, 1))
        stamps = t + (np.arange(self.horizon) + 1) / self.rate_hz
        return RelativeChunk(poses=poses, widths=widths, timestamps=stamps)


class SineJointSource:
    """FK-consistent chunks from a single joint following a sinusoid.

    The generating motion is q[j](t) = amplitude * sin(2 pi f t) around a base
    configuration, so every emitted keypoint target is exactly reachable.
    """

    def __init__(self, model: KinematicModel, joint: str, amplitude: float,
                 frequency: float, rate_hz: float = 10.0,
                 horizon: int = DEFAULT_HORIZON, base_q=None, backend=None):
        from .controller import keypoint_frame_from_motion

        self.model = model
        self.rate_hz = rate_hz
        self.horizon = horizon
        self.amplitude = amplitude
        self.frequency = frequency
        names = model.joint_names
        if joint not in names:
            raise ValueError(f"model {model.name!r} has no joint {joint!r}")
        self.joint_index = names.index(joint)
        self.base_q = np.zeros(model.dof) if base_q is None else np.asarray(base_q, float).copy()
        self._root = model.default_root_pose()
        self._kf = keypoint_frame_from_motion
        self._backend = backend

    def _frame_at(self, t: float) -> KeypointFrame:
        q = self.base_q.copy()
        q[self.joint_index] = self.amplitude * np.sin(2.0 * np.pi * self.frequency * t)
        motion = RobotMotionFrame(self._root.translation, self._root.rotation, q)
        return self._kf(self.model, motion, (0.0, 0.0), t, self._backend)

    def chunk(self, t: float, anchor: KeypointFrame) -> RelativeChunk:
        dt = 1.0 / self.rate_hz
        window = [self._frame_at(t + j * dt) for j in range(self.horizon + 1)]
        return relative_chunk(window, 0, self.horizon)


class ReplayChunkSource:
    """Replay a recorded keypoint trajectory as relative chunks.

    Past the end of the recording the final frame is held, so episodes may
    run longer than the demonstration.
    """

    def __init__(self, frames: list[KeypointFrame], rate_hz: float,
                 horizon: int = DEFAULT_HORIZON):
        if not frames:
            raise ValueError("replay source needs at least one frame")
        self.frames = frames
        self.rate_hz = rate_hz
        self.horizon = horizon

    def chunk(self, t: float, anchor: KeypointFrame) -> RelativeChunk:
        start = int(round(t * self.rate_hz))
        window = []
        for j in range(self.horizon + 1):
            idx = min(start + j, len(self.frames) - 1)
            window.append(self.frames[idx])
        rel = relative_chunk(window, 0, self.horizon)
        # restamp onto the episode clock; demo timestamps need not match it
        rel.timestamps = t + (np.arange(self.horizon) + 1) / self.rate_hz
        return rel


def parse_source_spec(spec: str, model: KinematicModel, demo_frames=None,
                      demo_rate: float | None = None, horizon: int = DEFAULT_HORIZON,
                      rate_hz: float = 10.0):
    """Build a source from a CLI spec string.

    Forms: ``replay`` (uses the demo file), ``synthetic:static``, or
    ``synthetic:sine:<joint>:<amplitude>:<frequency>``.
    """
    if spec == "replay":
        if not demo_frames:
            raise ValueError("replay source requires a demonstration file")
        return ReplayChunkSource(demo_frames, demo_rate or rate_hz, horizon)
    if spec == "synthetic:static":
        return StaticChunkSource(rate_hz, horizon)
    if spec.startswith("synthetic:sine:"):
        parts = spec.split(":")
        if len(parts) != 5:
            raise ValueError("sine source spec is synthetic:sine:<joint>:<amplitude>:<frequency>")
        return SineJointSource(model, parts[2], float(parts[3]), float(parts[4]),
                               rate_hz, horizon)
    raise ValueError(f"unknown source spec {spec!r}")
