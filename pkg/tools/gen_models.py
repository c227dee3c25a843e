"""Regenerate the bundled model fixtures in src/keymotion/models/.

Run from the repo root: python tools/gen_models.py
"""

import json
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "src" / "keymotion" / "models"

IDENTITY_Q = [1.0, 0.0, 0.0, 0.0]
AXIS = {"x": [1.0, 0.0, 0.0], "y": [0.0, 1.0, 0.0], "z": [0.0, 0.0, 1.0]}


def origin(x=0.0, y=0.0, z=0.0):
    return {"translation": [x, y, z], "quaternion_wxyz": IDENTITY_Q}


def joint(name, parent, child, axis, o, limits, jtype="revolute"):
    return {
        "name": name,
        "type": jtype,
        "parent": parent,
        "child": child,
        "axis": AXIS[axis],
        "origin": o,
        "limits": list(limits),
    }


def planar3():
    links = ["base", "l1", "l2", "l3", "end"]
    joints = [
        joint("j1", "base", "l1", "z", origin(), (-3.14159265, 3.14159265)),
        joint("j2", "l1", "l2", "z", origin(1.0), (-3.14159265, 3.14159265)),
        joint("j3", "l2", "l3", "z", origin(1.0), (-3.14159265, 3.14159265)),
        {
            "name": "end_fixed",
            "type": "fixed",
            "parent": "l3",
            "child": "end",
            "origin": origin(1.0),
        },
    ]
    keypoints = {
        "pelvis": {"link": "base", "offset": origin()},
        "left_tcp": {"link": "end", "offset": origin()},
        "right_tcp": {"link": "end", "offset": origin()},
        "left_foot": {"link": "base", "offset": origin()},
        "right_foot": {"link": "base", "offset": origin()},
    }
    return {
        "format_version": "1",
        "name": "planar3",
        "root_link": "base",
        "default_root_height": 0.0,
        "links": links,
        "joints": joints,
        "keypoints": keypoints,
    }


def leg(side, sign):
    p = f"{side}_"
    return [
        joint(p + "hip_pitch", "pelvis", p + "hip_pitch_link", "y",
              origin(0.0, sign * 0.10, -0.063), (-2.5, 2.5)),
        joint(p + "hip_roll", p + "hip_pitch_link", p + "hip_roll_link", "x",
              origin(), (-0.5, 2.9) if sign > 0 else (-2.9, 0.5)),
        joint(p + "hip_yaw", p + "hip_roll_link", p + "hip_yaw_link", "z",
              origin(), (-2.7, 2.7)),
        joint(p + "knee", p + "hip_yaw_link", p + "knee_link", "y",
              origin(0.0, 0.0, -0.35), (-0.1, 2.85)),
        joint(p + "ankle_pitch", p + "knee_link", p + "ankle_pitch_link", "y",
              origin(0.0, 0.0, -0.35), (-0.87, 0.52)),
        joint(p + "ankle_roll", p + "ankle_pitch_link", p + "ankle_roll_link", "x",
              origin(), (-0.26, 0.26)),
    ]


def arm(side, sign):
    p = f"{side}_"
    return [
        joint(p + "shoulder_pitch", "torso", p + "shoulder_pitch_link", "y",
              origin(0.0, sign * 0.17, 0.30), (-3.0, 2.6)),
        joint(p + "shoulder_roll", p + "shoulder_pitch_link", p + "shoulder_roll_link", "x",
              origin(), (-1.5, 2.2) if sign > 0 else (-2.2, 1.5)),
        joint(p + "shoulder_yaw", p + "shoulder_roll_link", p + "shoulder_yaw_link", "z",
              origin(0.0, 0.0, -0.11), (-2.6, 2.6)),
        joint(p + "elbow", p + "shoulder_yaw_link", p + "elbow_link", "y",
              origin(0.0, 0.0, -0.11), (-1.0, 2.2)),
        joint(p + "wrist_roll", p + "elbow_link", p + "wrist_roll_link", "x",
              origin(0.0, 0.0, -0.10), (-1.9, 1.9)),
        joint(p + "wrist_pitch", p + "wrist_roll_link", p + "wrist_pitch_link", "y",
              origin(0.0, 0.0, -0.05), (-1.6, 1.6)),
        joint(p + "wrist_yaw", p + "wrist_pitch_link", p + "wrist_yaw_link", "z",
              origin(0.0, 0.0, -0.05), (-1.6, 1.6)),
    ]


def biped29():
    joints = []
    joints += leg("left", +1)
    joints += leg("right", -1)
    joints += [
        joint("waist_yaw", "pelvis", "waist_yaw_link", "z", origin(0.0, 0.0, 0.05), (-2.6, 2.6)),
        joint("waist_roll", "waist_yaw_link", "waist_roll_link", "x", origin(0.0, 0.0, 0.04), (-0.52, 0.52)),
        joint("waist_pitch", "waist_roll_link", "torso", "y", origin(0.0, 0.0, 0.04), (-0.52, 0.52)),
    ]
    joints += arm("left", +1)
    joints += arm("right", -1)

    links = ["pelvis"] + [j["child"] for j in joints]
    keypoints = {
        "pelvis": {"link": "pelvis", "offset": origin()},
        "left_tcp": {"link": "left_wrist_yaw_link", "offset": origin(0.0, 0.0, -0.08)},
        "right_tcp": {"link": "right_wrist_yaw_link", "offset": origin(0.0, 0.0, -0.08)},
        # sole point: pelvis sits 0.793 m above it at the zero configuration
        "left_foot": {"link": "left_ankle_roll_link", "offset": origin(0.03, 0.0, -0.03)},
        "right_foot": {"link": "right_ankle_roll_link", "offset": origin(0.03, 0.0, -0.03)},
    }
    return {
        "format_version": "1",
        "name": "biped29",
        "root_link": "pelvis",
        "default_root_height": 0.793,
        "links": links,
        "joints": joints,
        "keypoints": keypoints,
    }


if __name__ == "__main__":
    OUT.mkdir(parents=True, exist_ok=True)
    for model in (planar3(), biped29()):
        path = OUT / f"{model['name']}.json"
        path.write_text(json.dumps(model, indent=1) + "\n", encoding="utf-8")
        print(f"wrote {path} ({len(model['joints'])} joints)")
