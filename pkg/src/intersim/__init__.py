"""Game-theoretic multi-agent simulator of a mixed-traffic unsignalized intersection."""

from .baselines import batch_controller, fcfs_controller
from .cooperative import (
    CoopConfig,
    cl_objective,
    enumerate_k_allocations,
    level_k_rollout,
    logistic_pass_probability,
    ncl_decide,
    normalized_objective,
)
from .drivers import PRESETS, DriverProfile, HvConfig, hv_decide, interaction_set
from .dynamics import Action, Trajectory, VehicleState, action_set, rollout, step
from .engine import SimConfig, SimLog, run, spawn_schedule
from .games import NormalFormGame, best_response, pure_nash
from .irl import (
    IrlConfig,
    elbow_sse,
    extract_cluster_features,
    feasible_trajectories,
    generate_synthetic_demos,
    kmeans,
    maxent_irl,
    trajectory_features,
)
from .lattice import (
    FrenetState,
    PlanRequest,
    cartesian_to_frenet,
    collision_free,
    fit_polynomial,
    frenet_to_cartesian,
    plan,
    sample_candidates,
)
from .metrics import average_travel_speed, classify_conflicts, pet_events, total_delay
from .rewards import RewardWeights, distance_to_destination, path_offset, reward, time_to_collision
from .scenario import IntersectionLayout, ScenarioConfig, build_intersection, project_to_path

__version__ = "0.1.0"
