import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from locomanip.rewards import (
    OBSERVATION_SIZES,
    ContractError,
    GripperScene,
    RewardDomainError,
    RewardParams,
    TaskKind,
    TaskProgress,
    ToyReachEnv,
    WorldSnapshot,
    action_layout,
    assemble_observation,
    combine,
    load_presets,
    preset,
    r_around,
    r_finger,
    r_penalty,
    r_reach,
    r_rot,
    task_reward,
    total_reward,
    total_reward_batch,
)
from locomanip.transforms import Pose6D

from oracles import reward_oracle, task_reward_oracle


@pytest.mark.parametrize("d, expected", [(0.0, 1.0), (1.0, 0.25), (3.0, 0.01)])
def test_r_reach(d, expected):
    assert r_reach(d) == pytest.approx(expected, abs=1e-15)


def test_r_reach_domain():
    with pytest.raises(RewardDomainError):
        r_reach(-0.1)


@pytest.mark.parametrize("dx, dz, expected", [(1, 1, 2.0), (-0.5, 0, -0.25), (0.6, -0.8, -0.28)])
def test_r_rot(dx, dz, expected):
    assert r_rot(dx, dz) == pytest.approx(expected, abs=1e-15)


def test_r_rot_domain():
    with pytest.raises(RewardDomainError):
        r_rot(1.2, 0.0)


@pytest.mark.parametrize("dt, db, beta, expected", [(0, 0, 0.04, 0.04), (0.01, 0.01, 0.04, 0.02), (0.1, 0.1, 0.02, -0.18)])
def test_r_finger(dt, db, beta, expected):
    assert r_finger(dt, db, beta) == pytest.approx(expected, abs=1e-15)


def test_r_penalty(rng):
    assert r_penalty(np.zeros(5)) == 0.0
    assert r_penalty([0.2, 0.0]) == pytest.approx(-0.04, abs=1e-15)
    for _ in range(100):
        a = rng.normal(size=rng.integers(1, 20))
        assert abs(r_penalty(a) - (-sum(x * x for x in a))) <= 1e-12


def test_r_around_only_changes_around_term():
    params = preset(TaskKind.DrawerOpen)
    prog = TaskProgress(l_drawer=0.2)
    off = GripperScene(d_l=0.1, d_x=0.5, d_z=0.5, d_t=0.01, d_b=0.01, around=False)
    on = GripperScene(d_l=0.1, d_x=0.5, d_z=0.5, d_t=0.01, d_b=0.01, around=True)
    assert r_around(on) == 0.5 and r_around(off) == 0.0
    diff = total_reward(TaskKind.DrawerOpen, on, prog) - total_reward(TaskKind.DrawerOpen, off, prog)
    a5, a7 = params.alpha[4], params.alpha[6]
    assert diff == pytest.approx(a5 * (a7 * 0.5 + 0.2 * 0.5), abs=1e-12)


def test_task_reward_examples():
    drawer = preset(TaskKind.DrawerOpen)
    door = preset(TaskKind.DoorOpen)
    around = GripperScene(around=True)
    assert task_reward(TaskKind.DrawerOpen, around, TaskProgress(l_drawer=0.2), drawer) == pytest.approx(0.65, abs=1e-15)
    assert task_reward(
        TaskKind.DoorOpen, around, TaskProgress(angle_handle=0.3, angle_door=0.1), door
    ) == pytest.approx(0.6125, abs=1e-15)
    assert task_reward(TaskKind.DualArmPick, GripperScene(), TaskProgress(h=False), preset(TaskKind.DualArmPick)) == 0.0
    assert task_reward(TaskKind.SingleArmPick, around, TaskProgress(h=True), preset(TaskKind.SingleArmPick)) == pytest.approx(1.35)


def test_task_reward_missing_field():
    with pytest.raises(ContractError):
        task_reward(TaskKind.DoorOpen, GripperScene(), TaskProgress(angle_handle=0.1), preset(TaskKind.DoorOpen))
    with pytest.raises(ContractError):
        task_reward(TaskKind.DrawerOpen, GripperScene(), TaskProgress(h=True), preset(TaskKind.DrawerOpen))


def test_total_reward_drawer_example():
    # r_l = 0.25 (d=1), r_rot = 0, r_finger = 0.02, r_task = 0.5 (l = 0.1), r_penalty = -0.04
    scene = GripperScene(d_l=1.0, d_r=5.0, d_x=0.0, d_z=0.0, d_t=0.01, d_b=0.01, around=True, action=[0.2, 0.0])
    value = total_reward(TaskKind.DrawerOpen, scene, TaskProgress(l_drawer=0.1))
    weights = [2.0, 0.0, 0.5, 7.5, 7.5, 0.01]
    oracle = sum(w * c for w, c in zip(weights, [0.25, (1 / 26) ** 2, 0.0, 0.02, 0.5, -0.04]))
    assert value == pytest.approx(4.3996, abs=1e-12)
    assert value == pytest.approx(oracle, abs=1e-12)
    assert combine(preset(TaskKind.DrawerOpen), 0, 0, 0, 0, 0, 0) == 0.0


def test_dual_pick_ignores_rot_and_finger():
    p = preset(TaskKind.DualArmPick)
    assert p.alpha[2] == p.alpha[3] == p.alpha[6] == 0.0 and p.beta == 0.0
    base = dict(d_l=0.3, d_r=0.2, around=True)
    a = total_reward(TaskKind.DualArmPick, GripperScene(**base, d_x=1, d_z=1, d_t=0.0), TaskProgress(h=True))
    b = total_reward(TaskKind.DualArmPick, GripperScene(**base, d_x=-1, d_z=0.3, d_t=0.5, d_b=0.4), TaskProgress(h=True))
    assert a == b


def test_presets_match_tables():
    presets = load_presets()
    assert presets[TaskKind.DrawerOpen].alpha.tolist() == [2.0, 0.0, 0.5, 7.5, 7.5, 0.01, 0.7]
    assert presets[TaskKind.DoorOpen].alpha.tolist() == [2.0, 0.0, 1.5, 7.5, 2.0, 0.01, 0.125]
    assert presets[TaskKind.SingleArmPick].alpha.tolist() == [7.5, 0.0, 5.0, 2.5, 7.5, 0.01, 0.7]
    assert presets[TaskKind.DualArmPick].alpha.tolist() == [2.0, 2.0, 0.0, 0.0, 7.5, 0.01, 0.0]
    assert [presets[k].beta for k in TaskKind] == [0.04, 0.02, 0.1, 0.0]


def test_params_validation():
    with pytest.raises(ValueError):
        RewardParams(np.array([1, 1, 1, 1, 1, -0.1, 1.0]), 0.0)
    with pytest.raises(ValueError):
        RewardParams(np.array([np.nan, 1, 1, 1, 1, 0.1, 1.0]), 0.0)


def test_batch_matches_oracle(rng):
    n = 2000
    for kind in TaskKind:
        p = preset(kind)
        cols = [rng.uniform(0, 3, n), rng.uniform(0, 3, n), rng.uniform(-1, 1, n), rng.uniform(-1, 1, n),
                rng.uniform(0, 0.2, n), rng.uniform(0, 0.2, n), rng.uniform(0, 3, n), rng.uniform(0, 4, n)]
        got = total_reward_batch(p, *cols)
        for i in range(0, n, 7):
            assert abs(got[i] - reward_oracle(p.alpha, p.beta, *(c[i] for c in cols))) <= 1e-12


def test_scalar_path_matches_oracle(rng):
    for _ in range(500):
        kind = list(TaskKind)[rng.integers(4)]
        p = preset(kind)
        scene = GripperScene(*rng.uniform(0, 2, 2), *rng.uniform(-1, 1, 2), *rng.uniform(0, 0.1, 2),
                             around=bool(rng.integers(2)), action=rng.normal(size=14))
        prog = TaskProgress(l_drawer=rng.uniform(0, .3), angle_handle=rng.uniform(0, 1), angle_door=rng.uniform(0, 1),
                            h=bool(rng.integers(2)))
        rt = task_reward_oracle(kind.value, scene.around, p.alpha[6], prog.l_drawer, prog.angle_handle, prog.angle_door, prog.h)
        expected = reward_oracle(p.alpha, p.beta, scene.d_l, scene.d_r, scene.d_x, scene.d_z, scene.d_t, scene.d_b,
                                 rt, float(scene.action @ scene.action))
        assert abs(total_reward(kind, scene, prog) - expected) <= 1e-12


dist = st.floats(0, 10, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(dist, dist, st.floats(-1, 1), st.floats(-1, 1), st.floats(0, 0.3), st.floats(0, 0.3), st.floats(0, 0.3))
def test_monotone_in_left_distance(d1, delta, dx, dz, dt, db, l):
    scene = lambda d: GripperScene(d_l=d, d_x=dx, d_z=dz, d_t=dt, d_b=db)
    prog = TaskProgress(l_drawer=l)
    a = total_reward(TaskKind.DrawerOpen, scene(d1), prog)
    b = total_reward(TaskKind.DrawerOpen, scene(d1 + delta), prog)
    if delta > 1e-6 and d1 < 100:
        assert b < a or np.isclose(a, b, rtol=0, atol=1e-15)  # flat only when both reach terms underflow
    assert total_reward(TaskKind.DrawerOpen, scene(d1), prog) == a


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 0.5), st.floats(0, 0.5), st.booleans())
def test_drawer_task_non_decreasing_in_length(l, dl, around):
    p = preset(TaskKind.DrawerOpen)
    s = GripperScene(around=around)
    assert task_reward(TaskKind.DrawerOpen, s, TaskProgress(l_drawer=l + dl), p) >= task_reward(
        TaskKind.DrawerOpen, s, TaskProgress(l_drawer=l), p)


def test_action_layouts(model):
    a1 = action_layout(TaskKind.DrawerOpen, model)
    a2 = action_layout(TaskKind.DualArmPick, model)
    assert len(a1) == 14 and len(a2) == 19
    assert "gripper" in a1 and "gripper" not in a2
    assert all(n in a2 for n in ("left_arm_1", "base_yaw", "torso_yaw"))


def _snapshot(model):
    pose = Pose6D([0.5, -0.2, 0.8], [0, 0, 0, 1])
    return WorldSnapshot(
        q=np.zeros(38), v=np.zeros(38), base_pose=np.zeros(6), drawer_length=0.0, handle_pose=pose,
        gripper_pose=pose, handle_angle=0.0, door_angle=0.0, object_pose=pose, left_ee_pose=pose,
        right_ee_pose=pose, object_left_side=np.zeros(3), object_right_side=np.ones(3))


def test_drawer_observation(model):
    snap = _snapshot(model)
    obs = assemble_observation(TaskKind.DrawerOpen, model, snap)
    assert obs.shape == (32,)
    assert np.all(obs[14:28] == 0) and np.all(obs[29:32] == 0)
    snap.v = np.ones(38)
    obs = assemble_observation(TaskKind.DrawerOpen, model, snap)
    assert np.allclose(obs[14:28], 0.1)
    # normalized positions: q=0 inside symmetric limits -> 0; gripper range [0, .08] -> -1
    assert obs[13] == -1.0 and np.allclose(obs[:13], 0.0)


def test_dual_pick_observation_has_side_vectors(model):
    snap = _snapshot(model)
    obs = assemble_observation(TaskKind.DualArmPick, model, snap)
    assert obs.shape == (OBSERVATION_SIZES[TaskKind.DualArmPick],)
    assert np.allclose(obs[-6:-3], [0.5, -0.2, 0.8])
    assert np.allclose(obs[-3:], [-0.5, -1.2, -0.2])


def test_observation_missing_field(model):
    snap = _snapshot(model)
    snap.door_angle = None
    with pytest.raises(ContractError):
        assemble_observation(TaskKind.DoorOpen, model, snap)
    for kind in TaskKind:
        if kind is not TaskKind.DoorOpen:
            assert assemble_observation(kind, model, snap).shape == (OBSERVATION_SIZES[kind],)


def test_toy_env_gradient_points_toward_target():
    env = ToyReachEnv(target=(0.6, 0.4))
    q = np.array([0.1, 0.3])
    for _ in range(300):
        g = env.gradient(q)
        q_next = q + 0.01 * g
        assert env.reward(q_next) >= env.reward(q)
        q = q_next
    assert np.linalg.norm(env.tip(q) - env.target) < 0.05
