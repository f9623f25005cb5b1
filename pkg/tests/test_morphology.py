import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.spatial.transform import Rotation

from locomanip.morphology import (
    MorphologyConfig,
    MorphologyDecision,
    MorphologyError,
    ObjectEstimate,
    SceneObservation,
    corridor_rise,
    decide_scenario,
    footprint_width,
    load_morphology_config,
    load_scenario,
    locomotion_rules,
    manipulation_rules,
    object_pose_in_robot_frame,
    read_xyz,
    scenario_paths,
    select_locomotion,
    select_manipulation,
    voxelize,
    write_xyz,
)
from locomanip.planner import PlannerTimeout, ScriptedClient, load_prompts
from locomanip.transforms import FrameTransform, Pose6D

from oracles import corridor_rise_oracle, footprint_width_oracle, homogeneous, voxel_oracle


@pytest.fixture(scope="module")
def cfg():
    return load_morphology_config()


def box(xyz, rpy, extents):
    return ObjectEstimate(Pose6D.from_xyz_rpy(xyz, rpy), extents)


# frames ---------------------------------------------------------------------------------


def test_identity_extrinsics():
    pose = Pose6D.from_xyz_rpy([0.4, -0.1, 0.3], [0.1, 0.2, 0.3])
    out = object_pose_in_robot_frame(pose, FrameTransform.identity())
    assert out.isclose(pose)


def test_camera_raised_above_origin():
    ext = FrameTransform.from_xyz_rpy([0, 0, 0.2], [0, 0, 0])
    out = object_pose_in_robot_frame(Pose6D.identity(), ext)
    assert np.allclose(out.position, [0, 0, 0.2], atol=1e-12)
    obs = SceneObservation("x", [[0, 0, 0]], ext)
    assert np.allclose(obs.points_in_robot_frame(), [[0, 0, 0.2]])


def test_random_extrinsics_match_matrix_product(rng):
    for _ in range(50):
        Re = Rotation.random(random_state=rng.integers(1 << 30)).as_matrix()
        Ro = Rotation.random(random_state=rng.integers(1 << 30)).as_matrix()
        pe, po = rng.normal(size=3), rng.normal(size=3)
        expected = homogeneous(Re, pe) @ homogeneous(Ro, po)
        out = object_pose_in_robot_frame(Pose6D.from_matrix(homogeneous(Ro, po)), FrameTransform.from_matrix(homogeneous(Re, pe)))
        assert np.max(np.abs(out.matrix() - expected)) < 1e-9


def test_missing_image_asset(tmp_path):
    with pytest.raises(MorphologyError, match="not found"):
        SceneObservation("x", head_image=str(tmp_path / "nope.png"))
    img = tmp_path / "head.png"
    img.write_bytes(b"\x89PNG")
    assert SceneObservation("x", head_image=str(img)).head_image == str(img)


# voxels ---------------------------------------------------------------------------------


def test_two_points_one_cell():
    grid = voxelize([[0.01, 0.01, 0.01], [0.02, 0.03, 0.04]], 0.05)
    assert grid.counts == {(0, 0, 0): 2}


def test_empty_cloud():
    assert len(voxelize(np.zeros((0, 3)), 0.05)) == 0


def test_large_cloud_matches_brute_force(rng):
    pts = rng.uniform(-1, 1, size=(10_000, 3))
    origin = np.array([0.1, -0.2, -0.5])
    assert voxelize(pts, 0.07, origin).counts == voxel_oracle(pts, origin, 0.07)


def test_nan_points_reported():
    pts = np.zeros((5, 3))
    pts[3, 1] = np.nan
    with pytest.raises(MorphologyError, match="indices 3"):
        voxelize(pts, 0.05)


def test_bad_cell():
    with pytest.raises(MorphologyError):
        voxelize([[0, 0, 0]], 0.0)


coords = st.floats(-2, 2, allow_nan=False, allow_infinity=False)
clouds = st.lists(st.tuples(coords, coords, coords), min_size=1, max_size=60)


@settings(max_examples=60, deadline=None)
@given(clouds, st.randoms(use_true_random=False))
def test_voxels_permutation_invariant(points, shuffler):
    shuffled = list(points)
    shuffler.shuffle(shuffled)
    assert voxelize(points, 0.1).counts == voxelize(shuffled, 0.1).counts


@settings(max_examples=60, deadline=None)
@given(clouds)
def test_doubling_cell_never_adds_cells(points):
    fine, coarse = voxelize(points, 0.1), voxelize(points, 0.2)
    assert len(coarse) <= len(fine)
    assert sum(coarse.counts.values()) == sum(fine.counts.values()) == len(points)


def test_xyz_round_trip(tmp_path, rng):
    pts = rng.normal(size=(20, 3))
    write_xyz(tmp_path / "c.xyz", pts)
    assert np.allclose(read_xyz(tmp_path / "c.xyz"), pts, atol=1e-6)
    (tmp_path / "bad.xyz").write_text("1 2\n")
    with pytest.raises(MorphologyError, match="bad.xyz:1"):
        read_xyz(tmp_path / "bad.xyz")


# manipulation rules ------------------------------------------------------------------------


def test_wide_box_is_dual(cfg):
    d = manipulation_rules(box([0.55, 0, 0.5], [0, 0, 0], [0.50, 0.60, 0.2]), cfg)
    assert d.choice == "dual_arm" and d.source == "rules"
    assert "0.500" in d.rationale


def test_slim_object_is_single(cfg):
    d = manipulation_rules(box([0.55, -0.2, 0.5], [0, 0, 0.4], [0.05, 0.05, 0.2]), cfg)
    assert d.choice == "single_arm"


def test_missing_pose_is_an_error(cfg):
    with pytest.raises(MorphologyError, match="pose"):
        manipulation_rules(None, cfg)
    with pytest.raises(MorphologyError, match="pose"):
        select_manipulation("pick", None, None, cfg=cfg)


def test_bad_extents():
    with pytest.raises(MorphologyError):
        box([0, 0, 0], [0, 0, 0], [0.1, 0.0, 0.1])


@settings(max_examples=40, deadline=None)
@given(
    st.tuples(*[st.floats(-np.pi, np.pi) for _ in range(3)]),
    st.tuples(*[st.floats(0.01, 0.8) for _ in range(3)]),
)
def test_footprint_width_matches_angle_sweep(rpy, extents):
    est = box([0, 0, 0], rpy, extents)
    assert footprint_width(est) == pytest.approx(footprint_width_oracle(est.pose.rotation, extents, 4000), abs=2e-3)


# locomotion rules --------------------------------------------------------------------------


def test_empty_corridor_is_wheel(cfg):
    d = locomotion_rules(voxelize(np.zeros((0, 3)), cfg.voxel_cell, cfg.grid_origin), cfg)
    assert d.choice == "wheel"


def test_step_is_leg(cfg):
    xs, ys = np.meshgrid(np.linspace(0.2, 1.0, 20), np.linspace(-0.3, 0.3, 10))
    floor = np.column_stack([xs.ravel(), ys.ravel(), np.full(xs.size, cfg.ground_z)])
    step = floor[floor[:, 0] > 0.6] + [0, 0, 0.15]
    grid = voxelize(np.vstack([floor, step]), cfg.voxel_cell, cfg.grid_origin)
    assert locomotion_rules(grid, cfg).choice == "leg"
    assert corridor_rise(grid, cfg) == pytest.approx(0.175)


def test_text_alone_does_not_decide(cfg):
    empty = voxelize(np.zeros((0, 3)), cfg.voxel_cell, cfg.grid_origin)
    assert select_locomotion("rough terrain ahead", None, empty, cfg=cfg).choice == "wheel"


def test_obstacle_outside_corridor_ignored(cfg):
    wall = [[0.5, 0.9, z] for z in np.linspace(-0.5, 0.5, 20)]
    assert locomotion_rules(voxelize(wall, cfg.voxel_cell, cfg.grid_origin), cfg).choice == "wheel"


# vision-language path ------------------------------------------------------------------------


class Unreachable:
    def send(self, prompt, model, timeout):
        raise ConnectionRefusedError("connection refused")


class Slow:
    def send(self, prompt, model, timeout):
        raise PlannerTimeout(f"no reply within {timeout} s")


def test_vlm_reply_is_used(cfg):
    client = ScriptedClient("The box is wide and heavy, so: dual_arm.")
    est = box([0.55, -0.2, 0.5], [0, 0, 0], [0.05, 0.05, 0.2])
    d = select_manipulation("pick up the box", None, est, client, "choose", cfg)
    assert d.choice == "dual_arm" and d.source == "vlm"
    assert "Object size (m): [0.05, 0.05, 0.2]" in client.prompts[0]


@pytest.mark.parametrize("client", [Unreachable(), Slow(), ScriptedClient("I am not sure.")])
def test_vlm_failure_falls_back_to_rules(cfg, client):
    est = box([0.55, 0, 0.5], [0, 0, 0], [0.5, 0.5, 0.2])
    d = select_manipulation("pick", None, est, client, "", cfg)
    assert d.choice == "dual_arm" and d.source == "rules"
    grid = voxelize(np.zeros((0, 3)), cfg.voxel_cell, cfg.grid_origin)
    assert select_locomotion("go", None, grid, client, "", cfg).source == "rules"


def test_decision_domain_enforced():
    with pytest.raises(MorphologyError):
        MorphologyDecision("Locomotion", "dual_arm", "", "rules")
    with pytest.raises(MorphologyError):
        MorphologyDecision("Manipulation", "single_arm", "", "guess")


def test_config_rejects_unknown_setting(tmp_path):
    (tmp_path / "m.yaml").write_text("format_version: 1\nmanipulation: {gripper_span: 0.1, wings: 2}\n")
    with pytest.raises(MorphologyError, match="unknown"):
        load_morphology_config(tmp_path / "m.yaml")
    with pytest.raises(MorphologyError):
        MorphologyConfig(gripper_span=-1)


# bundled scenarios -----------------------------------------------------------------------------


SCENARIOS = [load_scenario(p) for p in scenario_paths()]


def oracle_choice(scn, cfg):
    if scn.kind == "manipulation":
        est = scn.estimate()
        return "dual_arm" if footprint_width_oracle(est.pose.rotation, est.extents) > cfg.gripper_span else "single_arm"
    pts = scn.observation().points_in_robot_frame()
    rise = corridor_rise_oracle(pts, cfg.corridor_length, cfg.corridor_width, cfg.corridor_height, cfg.ground_z)
    return "leg" if rise > cfg.wheel_clearance else "wheel"


def test_scenario_set_shape():
    kinds = [s.kind for s in SCENARIOS]
    assert kinds.count("manipulation") == 10 and kinds.count("locomotion") == 10


@pytest.mark.parametrize("scn", SCENARIOS, ids=lambda s: s.name)
def test_scenario_rules_agree_with_oracle(scn, cfg):
    expected = oracle_choice(scn, cfg)
    assert expected == scn.expected
    assert decide_scenario(scn, cfg).choice == expected


def test_scenarios_through_scripted_vlm(cfg):
    prompts = load_prompts()
    for scn in SCENARIOS:
        client = ScriptedClient(f"Decision: {scn.expected}")
        d = decide_scenario(scn, cfg, client, prompts)
        assert d.source == "vlm" and d.choice == scn.expected
        header = prompts.manipulation if scn.kind == "manipulation" else prompts.locomotion
        assert client.prompts[0].startswith(header)
