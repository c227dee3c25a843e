"""On-disk formats: demonstrations, trajectories, chunk files, stats files.

Everything is JSON Lines with a header object on the first line; schemas are
documented in docs/formats.md and versioned via ``format_version``. Angles
are radians, lengths meters, quaternions wxyz.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np

from .action_codec import ActionChunk, KeypointFrame, NormalizationStats
from .geometry import Pose
from .kinematics import KEYPOINT_NAMES
from .skr import RobotMotionFrame

log = logging.getLogger(__name__)

DEMO_FORMAT_VERSION = "1"
TRAJECTORY_FORMAT_VERSION = "1"
CHUNK_FORMAT_VERSION = "1"

# parse-time quaternion policy: hard failure beyond this ...
QUAT_NORM_ERROR_TOL = 1e-6
# ... silent renormalization below this, warning in between
QUAT_NORM_WARN_TOL = 1e-9


class FormatError(ValueError):
    pass


@dataclass
class DemoHeader:
    rate_hz: float
    calibration_height_m: float
    gripper_range_m: tuple[float, float]
    format_version: str = DEMO_FORMAT_VERSION

    def to_json_dict(self) -> dict:
        return {
            "format_version": self.format_version,
            "rate_hz": self.rate_hz,
            "calibration_height_m": self.calibration_height_m,
            "gripper_range_m": list(self.gripper_range_m),
        }


def write_demonstration(path, header: DemoHeader, frames: list[KeypointFrame]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header.to_json_dict()) + "\n")
        for f in frames:
            rec = {"t": f.timestamp}
            for kp in KEYPOINT_NAMES:
                p = f.poses[kp]
                rec[kp] = {"translation": p.translation.tolist(),
                           "quaternion_wxyz": p.rotation.tolist()}
            rec["gripper"] = [f.gripper[0], f.gripper[1]]
            fh.write(json.dumps(rec) + "\n")


def _parse_demo_header(line: str, findings: list[str]) -> DemoHeader | None:
    try:
        doc = json.loads(line)
    except json.JSONDecodeError as exc:
        findings.append(f"line 1: header is not valid JSON ({exc})")
        return None
    problems = []
    if doc.get("format_version") != DEMO_FORMAT_VERSION:
        problems.append(f"format_version {doc.get('format_version')!r} != {DEMO_FORMAT_VERSION!r}")
    rate = doc.get("rate_hz")
    if not isinstance(rate, (int, float)) or rate <= 0:
        problems.append(f"rate_hz must be a positive number, got {rate!r}")
    calib = doc.get("calibration_height_m")
    if not isinstance(calib, (int, float)) or calib <= 0:
        problems.append(f"calibration_height_m must be a positive number, got {calib!r}")
    grange = doc.get("gripper_range_m")
    if (not isinstance(grange, list) or len(grange) != 2
            or not all(isinstance(v, (int, float)) for v in grange)
            or not 0 <= grange[0] < grange[1]):
        problems.append(f"gripper_range_m must be [lo, hi] with 0 <= lo < hi, got {grange!r}")
    for p in problems:
        findings.append(f"line 1: {p}")
    if problems:
        return None
    return DemoHeader(float(rate), float(calib), (float(grange[0]), float(grange[1])))


def _parse_demo_record(doc: dict, lineno: int, findings: list[str],
                       gripper_range) -> KeypointFrame | None:
    if not isinstance(doc.get("t"), (int, float)):
        findings.append(f"line {lineno}: missing or non-numeric timestamp 't'")
        return None
    poses = {}
    for kp in KEYPOINT_NAMES:
        entry = doc.get(kp)
        if not isinstance(entry, dict):
            findings.append(f"line {lineno}: missing keypoint {kp!r}")
            return None
        t = entry.get("translation")
        q = entry.get("quaternion_wxyz")
        if (not isinstance(t, list) or len(t) != 3
                or not isinstance(q, list) or len(q) != 4):
            findings.append(f"line {lineno}: keypoint {kp!r} needs translation[3] and quaternion_wxyz[4]")
            return None
        qa = np.asarray(q, dtype=float)
        norm_err = abs(float(np.linalg.norm(qa)) - 1.0)
        if norm_err > QUAT_NORM_ERROR_TOL:
            findings.append(
                f"line {lineno}: keypoint {kp!r} quaternion norm off unit by {norm_err:.3e}")
            return None
        if norm_err > QUAT_NORM_WARN_TOL:
            log.warning("line %d: renormalizing %s quaternion (off unit by %.3e)",
                        lineno, kp, norm_err)
        poses[kp] = Pose(np.asarray(t, dtype=float), qa / np.linalg.norm(qa))
    g = doc.get("gripper")
    if not isinstance(g, list) or len(g) != 2:
        findings.append(f"line {lineno}: gripper must be [left, right]")
        return None
    for side, width in zip(("left", "right"), g):
        if not isinstance(width, (int, float)) or width < 0:
            findings.append(f"line {lineno}: {side} gripper width must be >= 0, got {width!r}")
            return None
        if gripper_range and not gripper_range[0] <= width <= gripper_range[1]:
            findings.append(
                f"line {lineno}: {side} gripper width {width} outside range {list(gripper_range)}")
    return KeypointFrame(poses, (float(g[0]), float(g[1])), float(doc["t"]))


def read_demonstration(path, collect_findings: list[str] | None = None
                       ) -> tuple[DemoHeader, list[KeypointFrame]]:
    """Parse a demonstration file; raises FormatError on any finding unless
    a findings list is supplied (validate mode)."""
    findings: list[str] = [] if collect_findings is None else collect_findings
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        findings.append("line 1: empty file")
        _raise_or_return(path, findings, collect_findings)
        return DemoHeader(1.0, 1.0, (0.0, 1.0)), []
    header = _parse_demo_header(lines[0], findings)
    frames: list[KeypointFrame] = []
    grange = header.gripper_range_m if header else None
    prev_t = None
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            findings.append(f"line {lineno}: invalid JSON ({exc})")
            continue
        frame = _parse_demo_record(doc, lineno, findings, grange)
        if frame is None:
            continue
        if prev_t is not None and frame.timestamp <= prev_t:
            findings.append(
                f"line {lineno}: timestamp {frame.timestamp} not after previous {prev_t}")
        prev_t = frame.timestamp
        frames.append(frame)
    if not frames:
        findings.append("file contains no frame records")
    _raise_or_return(path, findings, collect_findings)
    if header is None:
        header = DemoHeader(1.0, 1.0, (0.0, 1.0))
    return header, frames


def _raise_or_return(path, findings, collect_findings):
    if findings and collect_findings is None:
        raise FormatError(f"{path}: " + "; ".join(findings[:5])
                          + ("" if len(findings) <= 5 else f" (+{len(findings) - 5} more)"))


def validate_demonstration(path) -> list[str]:
    """All findings for a demonstration file; empty means clean."""
    findings: list[str] = []
    read_demonstration(path, collect_findings=findings)
    return findings


def write_trajectory(path, frames: list[RobotMotionFrame], model_name: str,
                     rate_hz: float) -> None:
    if not frames:
        raise ValueError("cannot write an empty trajectory")
    dof = frames[0].dof
    header = {"format_version": TRAJECTORY_FORMAT_VERSION, "model": model_name,
              "rate_hz": rate_hz, "dof": dof}
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header) + "\n")
        for f in frames:
            fh.write(json.dumps(f.as_array().tolist()) + "\n")


def read_trajectory(path) -> tuple[dict, list[RobotMotionFrame]]:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise FormatError(f"{path}: empty file")
    header = json.loads(lines[0])
    if header.get("format_version") != TRAJECTORY_FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported trajectory format_version")
    dof = int(header["dof"])
    width = 3 + 4 + dof
    frames = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        values = json.loads(line)
        if len(values) != width:
            raise FormatError(f"{path}: line {lineno} has {len(values)} values, expected {width}")
        frames.append(RobotMotionFrame.from_array(np.asarray(values, dtype=float)))
    return header, frames


def write_stats(path, stats: NormalizationStats) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(stats.to_json_dict(), fh, indent=1)
        fh.write("\n")


def read_stats(path) -> NormalizationStats:
    with open(path, "r", encoding="utf-8") as fh:
        return NormalizationStats.from_json_dict(json.load(fh))


def write_chunks(path, chunks: list[tuple[int, ActionChunk]], horizon: int,
                 stats_path: str | None = None) -> None:
    header = {"format_version": CHUNK_FORMAT_VERSION, "horizon": horizon,
              "layout": "kp5-rel47-v1", "normalized": True}
    if stats_path:
        header["stats_file"] = str(stats_path)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header) + "\n")
        for t, chunk in chunks:
            fh.write(json.dumps({"t": t, "rows": chunk.values.tolist()}) + "\n")


def read_chunks(path) -> tuple[dict, list[tuple[int, ActionChunk]]]:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise FormatError(f"{path}: empty file")
    header = json.loads(lines[0])
    if header.get("format_version") != CHUNK_FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported chunk format_version")
    chunks = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        doc = json.loads(line)
        rows = np.asarray(doc["rows"], dtype=float)
        if rows.ndim != 2 or rows.shape[1] != 47:
            raise FormatError(f"{path}: line {lineno} rows are not 47-wide")
        chunks.append((int(doc["t"]), ActionChunk(values=rows, normalized=True)))
    return header, chunks
