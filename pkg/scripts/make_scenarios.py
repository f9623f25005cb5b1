"""Regenerate the bundled morphology scenarios (10 manipulation, 10 locomotion).

Scenes are laid out in the robot frame and stored in camera frames: object
poses relative to the head camera, point clouds (columnar xyz) relative to
the pelvis camera, each with the camera→robot extrinsics taken from the robot
model. ``expected`` is the scenario's design intent; the tests check it
against an independent geometric oracle and against the rule selector.

Run from the repository root:  python3 scripts/make_scenarios.py
"""

from __future__ import annotations

import numpy as np
import yaml
from scipy.spatial.transform import Rotation

from locomanip.data import data_path
from locomanip.morphology import write_xyz
from locomanip.robot import fk_matrices, load_robot_model
from locomanip.transforms import FrameTransform

GROUND = -0.5
model = load_robot_model()


def camera(frame):
    return FrameTransform.from_matrix(fk_matrices(model, frame, np.zeros(model.n_joints))[0])


def ext_doc(T: FrameTransform):
    quat = Rotation.from_matrix(T.rotation).as_quat()
    return {"xyz": [round(float(v), 12) for v in T.translation], "quat": [float(v) for v in quat]}


MANIPULATION = [
    # name, task state, robot-frame xyz, rpy, extents, expected
    ("m01_drill", "pick up the drill on the table", (0.55, -0.20, 0.55), (0, 0, 0.3), (0.05, 0.20, 0.25), "single_arm"),
    ("m02_cracker", "pick up the cracker box", (0.50, -0.25, 0.50), (0, 0, 1.2), (0.06, 0.16, 0.21), "single_arm"),
    ("m03_mug", "grab the mug", (0.45, -0.10, 0.45), (0, 0, 0.0), (0.065, 0.065, 0.10), "single_arm"),
    ("m04_bottle_lying", "pick up the bottle lying on the shelf", (0.55, -0.30, 0.60), (np.pi / 2, 0, 0.4), (0.06, 0.06, 0.25), "single_arm"),
    ("m05_cube_far", "fetch the small cube on the far table", (1.20, 0.30, 0.20), (0, 0, 0.7), (0.05, 0.05, 0.05), "single_arm"),
    ("m06_large_box", "pick up the box and put it on the table", (0.55, 0.0, 0.55), (0, 0, 0.0), (0.30, 0.40, 0.25), "dual_arm"),
    ("m07_basket", "lift the basket", (0.60, 0.05, 0.50), (0, 0, 0.8), (0.45, 0.30, 0.20), "dual_arm"),
    ("m08_tray", "carry the tray", (0.50, 0.0, 0.55), (0, 0, 0.1), (0.50, 0.35, 0.03), "dual_arm"),
    ("m09_suitcase", "move the suitcase", (0.70, 0.0, 0.10), (0, 0, -0.3), (0.70, 0.45, 0.20), "dual_arm"),
    ("m10_pot", "pick up the cooking pot", (0.55, -0.05, 0.50), (0, 0, 2.0), (0.28, 0.28, 0.18), "dual_arm"),
]


def ground(rng=None, x=(0.2, 1.4), y=(-0.6, 0.6), step=0.04):
    xs = np.arange(x[0], x[1] + 1e-9, step)
    ys = np.arange(y[0], y[1] + 1e-9, step)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    return np.column_stack([gx.ravel(), gy.ravel(), np.full(gx.size, GROUND)])


def block(x0, x1, y0, y1, h, step=0.04):
    """Top surface and front face of a box standing on the ground."""
    xs = np.arange(x0, x1 + 1e-9, step)
    ys = np.arange(y0, y1 + 1e-9, step)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    top = np.column_stack([gx.ravel(), gy.ravel(), np.full(gx.size, GROUND + h)])
    zs = np.arange(GROUND, GROUND + h + 1e-9, step)
    fy, fz = np.meshgrid(ys, zs, indexing="ij")
    front = np.column_stack([np.full(fy.size, x0), fy.ravel(), fz.ravel()])
    return np.vstack([top, front])


def without(points, x0, x1, y0, y1):
    keep = ~((points[:, 0] >= x0) & (points[:, 0] <= x1) & (points[:, 1] >= y0) & (points[:, 1] <= y1))
    return points[keep]


def locomotion_scenes():
    rng = np.random.default_rng(11)
    g = ground()
    scenes = []
    scenes.append(("l01_flat", "rough terrain ahead", g, "wheel"))
    bumps = g.copy()
    bumps[:, 2] += 0.02 * (np.sin(bumps[:, 0] * 20) > 0.7)
    scenes.append(("l02_low_bumps", "go to the kitchen", bumps, "wheel"))
    scenes.append(("l03_step", "go to the table beyond the step", np.vstack([without(g, 0.6, 1.4, -0.6, 0.6), block(0.6, 1.4, -0.6, 0.6, 0.15)]), "leg"))
    stairs = np.vstack([without(g, 0.5, 1.4, -0.6, 0.6), block(0.5, 0.8, -0.6, 0.6, 0.12), block(0.8, 1.4, -0.6, 0.6, 0.24)])
    scenes.append(("l04_stairs", "climb the stairs", stairs, "leg"))
    scenes.append(("l05_curb", "cross the curb", np.vstack([without(g, 0.7, 1.4, -0.6, 0.6), block(0.7, 1.4, -0.6, 0.6, 0.08)]), "leg"))
    scenes.append(("l06_box_obstacle", "reach the door", np.vstack([g, block(0.5, 0.8, -0.05, 0.25, 0.30)]), "leg"))
    scenes.append(("l07_obstacle_aside", "drive to the shelf", np.vstack([g, block(0.5, 0.8, 0.50, 0.70, 0.60)]), "wheel"))
    ramp = g.copy()
    ramp[:, 2] += np.clip((ramp[:, 0] - 0.4) * 0.03, 0.0, 0.03)
    scenes.append(("l08_gentle_ramp", "go up the gentle ramp", ramp, "wheel"))
    rough = g.copy()
    rough[:, 2] += rng.uniform(-0.015, 0.015, size=len(rough))
    scenes.append(("l09_gravel", "cross the gravel patch", rough, "wheel"))
    scenes.append(("l10_far_step", "approach the step", np.vstack([without(g, 1.2, 1.4, -0.6, 0.6), block(1.2, 1.4, -0.6, 0.6, 0.20)]), "wheel"))
    return scenes


def main():
    out = data_path("scenarios")
    out.mkdir(exist_ok=True)
    for old in out.glob("*"):
        old.unlink()
    head = camera("head_camera")
    for name, state, xyz, rpy, extents, expected in MANIPULATION:
        obj = FrameTransform.from_xyz_rpy(xyz, rpy)
        in_cam = head.inverse().compose(obj)
        doc = {
            "name": name,
            "kind": "manipulation",
            "task_state": state,
            "extrinsics": ext_doc(head),
            "object": {**ext_doc(in_cam), "extents": list(extents)},
            "expected": expected,
        }
        (out / f"{name}.yaml").write_text(yaml.safe_dump(doc, sort_keys=False))
    pelvis = camera("pelvis_camera")
    for name, state, pts, expected in locomotion_scenes():
        write_xyz(out / f"{name}.xyz", pelvis.inverse().apply_points(pts))
        doc = {"name": name, "kind": "locomotion", "task_state": state, "extrinsics": ext_doc(pelvis), "cloud": f"{name}.xyz", "expected": expected}
        (out / f"{name}.yaml").write_text(yaml.safe_dump(doc, sort_keys=False))
    print("wrote", len(list(out.glob("*.yaml"))), "scenarios")


if __name__ == "__main__":
    main()
