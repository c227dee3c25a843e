"""Kinematic trees: JSON model loading, forward kinematics, keypoint Jacobians.

The model format is a purpose-built JSON document (see docs/formats.md):
named links, revolute/prismatic/fixed joints in a tree, and bindings that
attach the five task keypoints (pelvis, left_tcp, right_tcp, left_foot,
right_foot) to links with a fixed offset pose. Angles are radians, lengths
meters. The flattened arrays consumed by the kernel backends are built once
at load; models are immutable afterwards, FK and Jacobians are pure.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import _backend
from .geometry import Pose

KEYPOINT_NAMES = ("pelvis", "left_tcp", "right_tcp", "left_foot", "right_foot")

_JOINT_TYPES = {"revolute": 0, "prismatic": 1, "fixed": 2}
_AXIS_TOL = 1e-6


class ModelError(ValueError):
    """Model document failed validation; ``errors`` lists every finding."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid kinematic model:\n  " + "\n  ".join(self.errors))


@dataclass(eq=False)
class Joint:
    name: str
    parent: str
    child: str
    jtype: str
    axis: np.ndarray
    origin: Pose
    limits: tuple[float, float] | None
    qindex: int  # -1 for fixed joints


@dataclass(eq=False)
class KeypointBinding:
    link: str
    offset: Pose


@dataclass(eq=False)
class KinematicModel:
    name: str
    root_link: str
    links: tuple[str, ...]
    joints: tuple[Joint, ...]
    keypoints: dict[str, KeypointBinding]
    dof: int
    default_root_height: float | None = None
    _arrays: dict = field(default_factory=dict, repr=False)

    @property
    def actuated_joints(self) -> list[Joint]:
        return [j for j in self.joints if j.qindex >= 0]

    @property
    def joint_names(self) -> list[str]:
        names = [None] * self.dof
        for j in self.actuated_joints:
            names[j.qindex] = j.name
        return names

    @property
    def limits_low(self) -> np.ndarray:
        return self._arrays["limits_low"]

    @property
    def limits_high(self) -> np.ndarray:
        return self._arrays["limits_high"]

    def zero_config(self) -> np.ndarray:
        return np.zeros(self.dof)

    def default_root_pose(self) -> Pose:
        height = self.default_root_height or 0.0
        return Pose(np.array([0.0, 0.0, height]), np.array([1.0, 0.0, 0.0, 0.0]))

    def check_joint_vector(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float).reshape(-1)
        if q.shape[0] != self.dof:
            raise ValueError(f"joint vector has {q.shape[0]} entries, model dof is {self.dof}")
        if not np.all(np.isfinite(q)):
            raise ValueError("joint vector contains non-finite values")
        return q


@dataclass(eq=False)
class FkResult:
    links: dict[str, Pose]
    keypoints: dict[str, Pose]


def _parse_pose(doc, errors, where) -> Pose:
    if doc is None:
        return Pose.identity()
    try:
        t = doc.get("translation", [0.0, 0.0, 0.0])
        q = doc.get("quaternion_wxyz", [1.0, 0.0, 0.0, 0.0])
        return Pose(np.asarray(t, dtype=float), np.asarray(q, dtype=float))
    except (ValueError, TypeError) as exc:
        errors.append(f"{where}: bad pose ({exc})")
        return Pose.identity()


def load_model(source) -> KinematicModel:
    """Load and validate a kinematic model.

    ``source`` may be a dict, a JSON string, or a path to a JSON file.
    Raises ModelError listing every schema violation found.
    """
    if isinstance(source, dict):
        doc = source
    elif isinstance(source, (str, Path)) and str(source).lstrip().startswith("{"):
        doc = json.loads(str(source))
    else:
        with open(source, "r", encoding="utf-8") as fh:
            doc = json.load(fh)

    errors: list[str] = []
    name = doc.get("name", "unnamed")
    links = list(doc.get("links", []))
    if len(set(links)) != len(links):
        dupes = sorted({l for l in links if links.count(l) > 1})
        errors.append(f"duplicate link names: {dupes}")
    link_set = set(links)
    root_link = doc.get("root_link")
    if root_link not in link_set:
        errors.append(f"root_link {root_link!r} is not a declared link")

    joints: list[Joint] = []
    seen_joint_names = set()
    qindex = 0
    for i, jd in enumerate(doc.get("joints", [])):
        jname = jd.get("name", f"<joint #{i}>")
        if jname in seen_joint_names:
            errors.append(f"duplicate joint name {jname!r}")
        seen_joint_names.add(jname)
        jtype = jd.get("type", "revolute")
        if jtype not in _JOINT_TYPES:
            errors.append(f"joint {jname!r}: unknown type {jtype!r}")
            jtype = "fixed"
        for key in ("parent", "child"):
            if jd.get(key) not in link_set:
                errors.append(f"joint {jname!r}: {key} link {jd.get(key)!r} not declared")
        axis = np.asarray(jd.get("axis", [0.0, 0.0, 1.0]), dtype=float).reshape(-1)
        limits = None
        if jtype != "fixed":
            if axis.shape != (3,) or abs(np.linalg.norm(axis) - 1.0) > _AXIS_TOL:
                errors.append(f"joint {jname!r}: axis must be a unit 3-vector")
                axis = np.array([0.0, 0.0, 1.0])
            axis = axis / np.linalg.norm(axis)
            raw = jd.get("limits")
            if raw is None or len(raw) != 2 or not raw[0] < raw[1]:
                errors.append(f"joint {jname!r}: limits must be [lo, hi] with lo < hi (got {raw})")
                limits = (-np.pi, np.pi)
            else:
                limits = (float(raw[0]), float(raw[1]))
        origin = _parse_pose(jd.get("origin"), errors, f"joint {jname!r} origin")
        idx = -1
        if jtype != "fixed":
            idx = qindex
            qindex += 1
        joints.append(Joint(jname, jd.get("parent"), jd.get("child"), jtype,
                            axis, origin, limits, idx))

    # tree structure: every non-root link has exactly one parent joint
    parent_count: dict[str, int] = {l: 0 for l in links}
    for j in joints:
        if j.child in parent_count:
            parent_count[j.child] += 1
    for link, count in parent_count.items():
        if link == root_link:
            if count != 0:
                errors.append(f"root link {link!r} must not be a joint child")
        elif count == 0:
            errors.append(f"link {link!r} is unreachable (no parent joint)")
        elif count > 1:
            errors.append(f"link {link!r} has {count} parent joints (cycle or diamond)")

    keypoints: dict[str, KeypointBinding] = {}
    kp_doc = doc.get("keypoints", {})
    for kp in KEYPOINT_NAMES:
        entry = kp_doc.get(kp)
        if entry is None:
            errors.append(f"missing keypoint binding {kp!r}")
            continue
        link = entry.get("link")
        if link not in link_set:
            errors.append(f"keypoint {kp!r}: link {link!r} not declared")
            continue
        keypoints[kp] = KeypointBinding(link, _parse_pose(entry.get("offset"), errors, f"keypoint {kp!r}"))
    for kp in kp_doc:
        if kp not in KEYPOINT_NAMES:
            errors.append(f"unknown keypoint name {kp!r}")

    if errors:
        raise ModelError(errors)

    model = KinematicModel(
        name=name,
        root_link=root_link,
        links=tuple(links),
        joints=tuple(joints),
        keypoints=keypoints,
        dof=qindex,
        default_root_height=doc.get("default_root_height"),
    )
    _compile(model)
    return model


def load_builtin(name: str) -> KinematicModel:
    """Load a model bundled with the package ("planar3", "biped29")."""
    path = resources.files("keymotion").joinpath(f"models/{name}.json")
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise FileNotFoundError(f"no bundled model named {name!r}") from None
    return load_model(json.loads(text))


def _compile(model: KinematicModel) -> None:
    """Flatten the tree into kernel arrays (topological joint order)."""
    # reorder links so the root is index 0 for the kernels
    order = [model.root_link] + [l for l in model.links if l != model.root_link]
    link_index = {name: i for i, name in enumerate(order)}

    children: dict[str, list[int]] = {l: [] for l in model.links}
    for ji, j in enumerate(model.joints):
        children[j.parent].append(ji)

    topo: list[int] = []
    stack = [model.root_link]
    while stack:
        link = stack.pop()
        for ji in children[link]:
            topo.append(ji)
            stack.append(model.joints[ji].child)
    if len(topo) != len(model.joints):
        raise ModelError(["joint graph is not a tree rooted at the root link"])

    n = len(topo)
    arrays = {
        "link_order": order,
        "parent_link": np.empty(n, dtype=np.int32),
        "child_link": np.empty(n, dtype=np.int32),
        "jtype": np.empty(n, dtype=np.int32),
        "axis": np.zeros((n, 3)),
        "origin_t": np.zeros((n, 3)),
        "origin_q": np.zeros((n, 4)),
        "qidx": np.empty(n, dtype=np.int32),
    }
    parent_joint_of_link = {}
    for slot, ji in enumerate(topo):
        j = model.joints[ji]
        arrays["parent_link"][slot] = link_index[j.parent]
        arrays["child_link"][slot] = link_index[j.child]
        arrays["jtype"][slot] = _JOINT_TYPES[j.jtype]
        arrays["axis"][slot] = j.axis
        arrays["origin_t"][slot] = j.origin.translation
        arrays["origin_q"][slot] = j.origin.rotation
        arrays["qidx"][slot] = j.qindex
        parent_joint_of_link[j.child] = slot

    # root-to-link joint paths for each keypoint (slots, already topo-sorted)
    paths = {}
    for kp, binding in model.keypoints.items():
        path = []
        link = binding.link
        while link != model.root_link:
            slot = parent_joint_of_link[link]
            path.append(slot)
            link = model.joints[topo[slot]].parent
        paths[kp] = np.array(sorted(path), dtype=np.int32)
    arrays["paths"] = paths
    arrays["kp_link"] = {kp: link_index[b.link] for kp, b in model.keypoints.items()}

    low = np.empty(model.dof)
    high = np.empty(model.dof)
    for j in model.joints:
        if j.qindex >= 0:
            low[j.qindex], high[j.qindex] = j.limits
    arrays["limits_low"] = low
    arrays["limits_high"] = high
    model._arrays.update(arrays)


def fk_arrays(model: KinematicModel, q: np.ndarray, root_t: np.ndarray,
              root_q: np.ndarray, backend=None) -> tuple[np.ndarray, np.ndarray]:
    """Raw FK: world (translation, quaternion) arrays for every link."""
    kern = backend if backend is not None and not isinstance(backend, str) \
        else _backend.get_kernels(backend)
    arr = model._arrays
    n_links = len(model.links)
    link_t = np.empty((n_links, 3))
    link_q = np.empty((n_links, 4))
    kern.fk_chain(arr["parent_link"], arr["child_link"], arr["jtype"], arr["axis"],
                  arr["origin_t"], arr["origin_q"], arr["qidx"], q,
                  np.asarray(root_t, dtype=float), np.asarray(root_q, dtype=float),
                  link_t, link_q)
    return link_t, link_q


def keypoint_pose_arrays(model: KinematicModel, keypoint: str, link_t: np.ndarray,
                         link_q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """World (translation, quaternion) of one keypoint from raw FK output."""
    from .geometry import quat_mul, quat_rotate

    binding = model.keypoints[keypoint]
    li = model._arrays["kp_link"][keypoint]
    t = link_t[li] + quat_rotate(link_q[li], binding.offset.translation)
    qq = quat_mul(link_q[li], binding.offset.rotation)
    return t, qq


def forward_kinematics(model: KinematicModel, q, root: Pose | None = None,
                       backend=None) -> FkResult:
    """World pose of every link and every keypoint binding."""
    q = model.check_joint_vector(q)
    root = root if root is not None else Pose.identity()
    link_t, link_q = fk_arrays(model, q, root.translation, root.rotation, backend)
    order = model._arrays["link_order"]
    links = {name: Pose(link_t[i].copy(), link_q[i].copy()) for i, name in enumerate(order)}
    keypoints = {}
    for kp in model.keypoints:
        t, qq = keypoint_pose_arrays(model, kp, link_t, link_q)
        keypoints[kp] = Pose(t, qq)
    return FkResult(links=links, keypoints=keypoints)


def keypoint_jacobian(model: KinematicModel, q, keypoint: str,
                      root: Pose | None = None, backend=None) -> np.ndarray:
    """Geometric Jacobian (6 x dof) of a keypoint frame, world frame.

    Rows are [linear(3); angular(3)] with respect to joint velocities; the
    root pose is held fixed. Columns of joints off the keypoint's kinematic
    path are zero.
    """
    if keypoint not in model.keypoints:
        raise KeyError(f"unknown keypoint {keypoint!r}; expected one of {KEYPOINT_NAMES}")
    q = model.check_joint_vector(q)
    root = root if root is not None else Pose.identity()
    kern = backend if backend is not None and not isinstance(backend, str) \
        else _backend.get_kernels(backend)
    link_t, link_q = fk_arrays(model, q, root.translation, root.rotation, kern)
    kp_pos, _ = keypoint_pose_arrays(model, keypoint, link_t, link_q)
    arr = model._arrays
    jac = np.zeros((6, model.dof))
    kern.keypoint_jacobian_cols(link_t, link_q, arr["paths"][keypoint], arr["jtype"],
                                arr["axis"], arr["qidx"], arr["child_link"], kp_pos, jac)
    return jac
