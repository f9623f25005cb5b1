"""Kinematic simulator that executes task graphs against articulated fixtures."""

from .episode import EpisodeLog, SimHandlers, bundled_episodes, run_episode
from .skills import (
    BaseMove,
    DetectObject,
    PlaceObject,
    SearchTag,
    SkillRun,
    approach_goal,
    corridor_cloud,
    execute_skill,
    reward_inputs,
    snapshot_reward,
)
from .world import (
    Door,
    Drawer,
    EndEffectorTrace,
    Place,
    SimConfig,
    SimError,
    SimObject,
    SimPreconditionError,
    SimWorld,
    Tag,
    TerrainBlock,
    UnknownTagError,
    around_predicate,
    in_view,
    load_sim_config,
    load_world,
    object_visible,
    observe_fiducial,
    ready_pose,
    world_from_dict,
    world_paths,
)

__all__ = [
    "BaseMove",
    "DetectObject",
    "Door",
    "Drawer",
    "EndEffectorTrace",
    "EpisodeLog",
    "Place",
    "PlaceObject",
    "SearchTag",
    "SimConfig",
    "SimError",
    "SimHandlers",
    "SimObject",
    "SimPreconditionError",
    "SimWorld",
    "SkillRun",
    "Tag",
    "TerrainBlock",
    "UnknownTagError",
    "approach_goal",
    "around_predicate",
    "bundled_episodes",
    "corridor_cloud",
    "execute_skill",
    "in_view",
    "load_sim_config",
    "load_world",
    "object_visible",
    "observe_fiducial",
    "ready_pose",
    "reward_inputs",
    "run_episode",
    "snapshot_reward",
    "world_from_dict",
    "world_paths",
]
