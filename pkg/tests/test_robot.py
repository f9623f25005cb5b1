import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from locomanip.robot import (
    JointState,
    RobotDescriptionError,
    fk_matrices,
    fk_position,
    forward_kinematics,
    load_robot_model,
    parse_robot_model,
)
from locomanip.transforms import FrameTransform, Pose6D, euler_to_quat, quat_to_euler, transform_pose
from importlib import resources

from oracles import fk_oracle

BUNDLED = resources.files("locomanip.data").joinpath("centaur.yaml").read_text()
EE_FRAMES = ["left_ee", "right_ee", "gripper_top", "gripper_bottom", "head_camera", "fl_foot", "hr_foot"]


def test_bundled_model_has_38_joints(model):
    assert model.n_joints == 38
    assert sorted(len(v) for v in model.groups.values()) == [1, 1, 6, 6, 6, 6, 6, 6]
    ids = [i for g in model.groups.values() for i in g]
    assert sorted(ids) == list(range(38))
    assert np.all(model.lower < model.upper)
    assert np.all(model.velocity_limit > 0) and np.all(model.acceleration_limit > 0)


def test_37_joints_rejected():
    lines = BUNDLED.splitlines()
    drop = next(i for i, l in enumerate(lines) if "name: leg_hr_6" in l)
    with pytest.raises(RobotDescriptionError, match="38 joints"):
        parse_robot_model("\n".join(lines[:drop] + lines[drop + 1:]))


def test_degenerate_limit_rejected():
    text = BUNDLED.replace("name: right_arm_4, type: revolute, lower: -2.5, upper: 2.5",
                           "name: right_arm_4, type: revolute, lower: 2.5, upper: 2.5")
    with pytest.raises(RobotDescriptionError, match="lower limit"):
        parse_robot_model(text)


def test_malformed_document():
    with pytest.raises(RobotDescriptionError):
        parse_robot_model("joints: [unclosed")
    with pytest.raises(RobotDescriptionError, match="format_version"):
        parse_robot_model("format_version: 7\n")


def test_group_size_mismatch():
    text = BUNDLED.replace("gripper: [gripper]", "gripper: []")
    with pytest.raises(RobotDescriptionError, match="group 'gripper'"):
        parse_robot_model(text)


def test_home_pose_matches_hand_computed_chain(model):
    # right arm at q=0: torso (0,0,.35) + shoulder (0,-.22,.45) + 4 x .15 + .1 along x
    assert np.allclose(fk_position(model, np.zeros(38), "right_ee"), [0.7, -0.22, 0.8], atol=1e-12)
    for name, chain in model.chains.items():
        assert np.allclose(fk_position(model, np.zeros(38), name), chain.home, atol=1e-12), name
    pose = forward_kinematics(model, model.zero_state(), "right_ee")
    assert pose.isclose(Pose6D([0.7, -0.22, 0.8], [0, 0, 0, 1]))


def test_torso_half_turn_mirrors_right_arm(model):
    q = np.zeros(38)
    q[model.index("torso_yaw")] = np.pi
    home = fk_position(model, np.zeros(38), "right_ee")
    turned = fk_position(model, q, "right_ee")
    assert np.allclose(turned, [-home[0], -home[1], home[2]], atol=1e-9)


def test_fk_matches_chain_product_oracle(model, rng):
    lo, hi = model.lower, model.upper
    for _ in range(50):
        q = rng.uniform(lo, hi)
        for frame in EE_FRAMES:
            T = fk_matrices(model, frame, q)[0]
            assert np.allclose(T, fk_oracle(q, frame), atol=1e-9, rtol=0)


def test_fk_revolute_period(model, rng):
    revolute = [i for i, j in enumerate(model.joints) if j.revolute]
    for _ in range(20):
        q = rng.uniform(model.lower, model.upper)
        j = rng.choice(revolute)
        q2 = q.copy()
        q2[j] += 2 * np.pi
        for frame in ("right_ee", "left_ee", "fr_foot"):
            assert np.allclose(fk_position(model, q, frame), fk_position(model, q2, frame), atol=1e-9)


def test_unknown_frame_and_bad_dims(model):
    with pytest.raises(KeyError):
        fk_position(model, np.zeros(38), "tail")
    with pytest.raises(ValueError):
        fk_position(model, np.zeros(37), "right_ee")


def test_joint_state_base_flag(model):
    s = JointState(np.zeros(38), np.zeros(38))
    assert not s.has_base
    s = JointState(np.zeros(38), np.zeros(38), base=np.zeros(6))
    assert s.has_base


# transforms -------------------------------------------------------------------

unit = st.floats(-1.0, 1.0, allow_nan=False)
coord = st.floats(-5.0, 5.0, allow_nan=False)


def random_transform(rng):
    from scipy.spatial.transform import Rotation
    return FrameTransform(Rotation.random(random_state=rng.integers(1 << 31)).as_matrix(), rng.uniform(-2, 2, 3))


def random_pose(rng):
    q = rng.normal(size=4)
    return Pose6D(rng.uniform(-2, 2, 3), q / np.linalg.norm(q))


def test_transform_identity_and_translation(rng):
    p = random_pose(rng)
    assert transform_pose(FrameTransform.identity(), p).isclose(p)
    t = FrameTransform(np.eye(3), [1.0, 0.0, 0.0])
    out = transform_pose(t, Pose6D.identity())
    assert np.allclose(out.position, [1, 0, 0]) and np.allclose(out.orientation, [0, 0, 0, 1])


def test_transform_round_trip_and_composition(rng):
    for _ in range(200):
        t1, t2, p = random_transform(rng), random_transform(rng), random_pose(rng)
        back = transform_pose(t1.inverse(), transform_pose(t1, p))
        assert back.isclose(p, atol=1e-9)
        assert transform_pose(t2 @ t1, p).isclose(transform_pose(t2, transform_pose(t1, p)), atol=1e-9)


def test_transform_preserves_distances(rng):
    for _ in range(200):
        t, a, b = random_transform(rng), random_pose(rng), random_pose(rng)
        before = np.linalg.norm(a.position - b.position)
        after = np.linalg.norm(transform_pose(t, a).position - transform_pose(t, b).position)
        assert abs(before - after) <= 1e-9


def test_invalid_inputs_rejected():
    with pytest.raises(ValueError):
        Pose6D([0, 0, 0], [0, 0, 0, 2])
    with pytest.raises(ValueError):
        FrameTransform(np.diag([1.0, 1.0, -1.0]), np.zeros(3))
    with pytest.raises(ValueError):
        FrameTransform(np.ones((3, 3)), np.zeros(3))


@settings(max_examples=100, deadline=None)
@given(st.tuples(st.floats(-3.1, 3.1), st.floats(-1.5, 1.5), st.floats(-3.1, 3.1)))
def test_euler_quaternion_round_trip(rpy):
    back = quat_to_euler(euler_to_quat(rpy))
    assert Pose6D.from_xyz_rpy([0, 0, 0], back).isclose(Pose6D.from_xyz_rpy([0, 0, 0], rpy), atol=1e-9)
