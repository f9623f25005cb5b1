"""Regenerate the bundled skill reference trajectories and the READY pose.

Each skill is scripted as Cartesian end-effector segments with minimum-jerk
timing, then converted to joint space by bounded least-squares IK against the
robot model's forward kinematics. Output (all under src/locomanip/data):

    ready_pose.yaml                      upper-body joint values of the READY pose
    library/trajectories/<skill>.csv     t + 14 upper-body joints (+ base_x for the door)

Run from the repository root:  python3 scripts/make_skill_trajectories.py
"""

from __future__ import annotations

import numpy as np
import yaml
from scipy.optimize import least_squares
from scipy.spatial.transform import Rotation

from locomanip.data import data_path
from locomanip.robot import fk_matrices, load_robot_model
from locomanip.wholebody import Trajectory, write_trajectory

DT = 0.05
ANCHOR_Z = 0.55
READY = {"left_ee": np.array([0.30, 0.22, ANCHOR_Z]), "right_ee": np.array([0.30, -0.22, ANCHOR_Z])}
OPEN, CLOSED_HANDLE, CLOSED_FULL = 0.08, 0.02, 0.0

model = load_robot_model()
UPPER = [model.joint_names[i] for i in model.upper_body()]
ARM = {"left_ee": model.group("left_arm"), "right_ee": model.group("right_arm")}


def min_jerk(tau):
    tau = np.clip(tau, 0.0, 1.0)
    return tau**3 * (10 - 15 * tau + 6 * tau**2)


def ramp(t, t0, t1, a, b):
    """Minimum-jerk blend from a (before t0) to b (after t1)."""
    return a + (b - a) * min_jerk((t - t0) / (t1 - t0))


def solve_ik(frame, q, pos, roll):
    idx = ARM[frame]
    target_r = Rotation.from_euler("x", roll)

    def residual(x):
        qq = q.copy()
        qq[idx] = x
        T = fk_matrices(model, frame, qq)[0]
        rot_err = (target_r.inv() * Rotation.from_matrix(T[:3, :3])).as_rotvec()
        return np.concatenate([T[:3, 3] - pos, 0.3 * rot_err])

    res = least_squares(residual, q[idx], bounds=(model.lower[idx], model.upper[idx]), xtol=1e-14, ftol=1e-14, gtol=1e-14)
    if np.max(np.abs(res.fun)) > 1e-7:
        raise RuntimeError(f"IK failed for {frame} at {pos}: residual {np.max(np.abs(res.fun)):.2e}")
    out = q.copy()
    out[idx] = res.x
    return out


def seed_pose():
    q = np.zeros(model.n_joints)
    for frame, idx in ARM.items():
        # elbow-down seed so IK lands on a consistent branch
        q[idx] = [0.6, 0.0, 0.0, -1.2, 0.0, 0.6]
    return q


def ready_pose():
    q = seed_pose()
    for frame, pos in READY.items():
        q = solve_ik(frame, q, pos, 0.0)
    q[model.index("gripper")] = OPEN
    return q


def build(duration, targets, gripper, base_x=None):
    """targets(t) -> {frame: (pos, roll)}; gripper(t) -> opening."""
    t = np.round(np.arange(0.0, duration + 1e-9, DT), 10)
    q = ready_pose()
    rows, base = [], []
    for tk in t:
        for frame, (pos, roll) in targets(tk).items():
            q = solve_ik(frame, q, pos, roll)
        q[model.index("gripper")] = gripper(tk)
        rows.append(q[model.upper_body()].copy())
        if base_x is not None:
            base.append(base_x(tk))
    names = list(UPPER)
    values = np.array(rows)
    if base_x is not None:
        names.append("base_x")
        values = np.hstack([values, np.array(base)[:, None]])
    return Trajectory(names, t, values)


def reach_x(tk, x_end=0.56):
    return ramp(tk, 0.0, 2.0, READY["right_ee"][0], x_end)


def grip_close(tk, closed=CLOSED_HANDLE):
    return ramp(tk, 1.2, 1.8, OPEN, closed)


def open_drawer():
    def targets(tk):
        x = reach_x(tk) if tk <= 2.0 else ramp(tk, 2.0, 4.0, 0.56, 0.31)
        return {"right_ee": (np.array([x, -0.22, ANCHOR_Z]), 0.0)}

    def gripper(tk):
        return grip_close(tk) if tk <= 2.0 else ramp(tk, 3.3, 3.9, CLOSED_HANDLE, OPEN)

    return build(4.0, targets, gripper)


def open_door():
    def targets(tk):
        roll = ramp(tk, 2.0, 3.0, 0.0, -0.7)
        return {"right_ee": (np.array([reach_x(tk), -0.22, ANCHOR_Z]), roll)}

    return build(6.0, targets, grip_close, base_x=lambda tk: ramp(tk, 3.0, 6.0, 0.0, 0.45))


def pick_single_arm():
    def targets(tk):
        z = ramp(tk, 2.0, 3.5, ANCHOR_Z, ANCHOR_Z + 0.15)
        return {"right_ee": (np.array([reach_x(tk), -0.22, z]), 0.0)}

    return build(3.5, targets, grip_close)


def pick_dual_arm():
    def targets(tk):
        x = ramp(tk, 0.0, 1.5, 0.30, 0.55)
        y = ramp(tk, 1.5, 2.5, 0.22, 0.15)
        z = ramp(tk, 2.5, 4.0, ANCHOR_Z, ANCHOR_Z + 0.15)
        return {"left_ee": (np.array([x, y, z]), 0.0), "right_ee": (np.array([x, -y, z]), 0.0)}

    return build(4.0, targets, lambda tk: ramp(tk, 0.0, 1.5, OPEN, CLOSED_FULL))


def main():
    out = data_path("library", "trajectories")
    out.mkdir(parents=True, exist_ok=True)
    for make in (open_drawer, open_door, pick_single_arm, pick_dual_arm):
        write_trajectory(out / f"{make.__name__}.csv", make())
        print("wrote", make.__name__)
    q = ready_pose()
    doc = {"format_version": 1, "ready_pose": {n: float(v) for n, v in zip(UPPER, q[model.upper_body()])}}
    header = "# Generated by scripts/make_skill_trajectories.py; do not edit by hand.\n"
    data_path("ready_pose.yaml").write_text(header + yaml.safe_dump(doc, sort_keys=False))


if __name__ == "__main__":
    main()
