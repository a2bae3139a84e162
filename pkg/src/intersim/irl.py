"""Driver clustering and maximum-entropy inverse reinforcement learning.

Expert demonstrations are per-frame choices among the six feasible
constant-maneuver rollouts. IRL fits preference weights by gradient ascent on
the regularized log-likelihood of the expert choices under a softmax over the
candidate trajectory features. Features are z-scored inside IRL (the raw
distance scale dwarfs the inverse-TTC scale); weights are reported in both
the normalized and the raw feature space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import Trajectory, VehicleState, action_set, constant_velocity_trajectory, rollout
from .errors import DegenerateTrajectory, InvalidK, NonFiniteGradient
from .rewards import FOOTPRINT_RADIUS, RewardWeights, feature_series
from .scenario import IntersectionLayout, ReferencePath
from .world import VehicleInfo, WorldState

_FEATURE_DIM = 3


@dataclass(frozen=True)
class ClusterFeatures:
    v_mean: float
    v_max: float
    v_min: float
    v_std: float
    a_mean: float
    a_max: float
    a_min: float
    a_std: float

    def as_array(self) -> np.ndarray:
        return np.array(
            [
                self.v_mean,
                self.v_max,
                self.v_min,
                self.v_std,
                self.a_mean,
                self.a_max,
                self.a_min,
                self.a_std,
            ],
            dtype=float,
        )


@dataclass(frozen=True)
class IrlConfig:
    learning_rate: float = 0.05
    regularization: float = 0.01
    epochs: int = 300
    horizon: int = 10

    def __post_init__(self):
        if self.learning_rate <= 0 or self.regularization <= 0:
            raise ValueError("learning rate and regularization must be positive")
        if self.epochs < 1 or self.horizon < 1:
            raise ValueError("epochs and horizon must be >= 1")


@dataclass(frozen=True)
class DemoContext:
    """Everything needed to regenerate the six feasible trajectories of one frame."""

    ego_state: VehicleState
    opponent_states: tuple[VehicleState, ...]
    path: ReferencePath
    horizon: int
    dt: float
    chosen_index: int


@dataclass
class ExpertDemo:
    trajectory: Trajectory
    features: np.ndarray  # (3,) aggregated trajectory features
    context: DemoContext
    cluster_label: int | None = None


@dataclass
class IrlResult:
    theta: np.ndarray  # weights in normalized feature space
    weights: RewardWeights  # raw-space, clipped at zero
    raw_theta: np.ndarray  # raw-space, unclipped
    trace: list[float] = field(default_factory=list)
    feature_mean: np.ndarray | None = None
    feature_std: np.ndarray | None = None


def extract_cluster_features(trajectory: Trajectory) -> ClusterFeatures:
    """Eight speed/acceleration statistics used for driver-style clustering."""
    if len(trajectory) < 2:
        raise DegenerateTrajectory("need at least two states for accelerations")
    v = trajectory.speeds
    a = np.diff(v) / trajectory.dt
    return ClusterFeatures(
        float(v.mean()),
        float(v.max()),
        float(v.min()),
        float(v.std()),
        float(a.mean()),
        float(a.max()),
        float(a.min()),
        float(a.std()),
    )


def _zscore(data: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    mu = data.mean(axis=0)
    sigma = data.std(axis=0)
    sigma = np.where(sigma < 1e-12, 1.0, sigma)
    return (data - mu) / sigma, mu, sigma


def _kmeans_pp_init(z: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = z.shape[0]
    centers = [z[int(rng.integers(n))]]
    for _ in range(1, k):
        d2 = np.min(
            np.sum((z[:, None, :] - np.asarray(centers)[None, :, :]) ** 2, axis=2), axis=1
        )
        total = d2.sum()
        if total <= 1e-15:
            centers.append(z[int(rng.integers(n))])
            continue
        probs = d2 / total
        centers.append(z[int(rng.choice(n, p=probs))])
    return np.asarray(centers)


def _lloyd(z: np.ndarray, k: int, rng: np.random.Generator, max_iter: int = 300):
    centers = _kmeans_pp_init(z, k, rng)
    labels = np.zeros(z.shape[0], dtype=int)
    for _ in range(max_iter):
        d2 = np.sum((z[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        new_labels = np.argmin(d2, axis=1)
        for c in range(k):
            mask = new_labels == c
            if mask.any():
                centers[c] = z[mask].mean(axis=0)
            else:
                # re-seed an empty cluster on the worst-fit sample
                worst = int(np.argmax(np.min(d2, axis=1)))
                centers[c] = z[worst]
                new_labels[worst] = c
        if np.array_equal(new_labels, labels):
            labels = new_labels
            break
        labels = new_labels
    d2 = np.sum((z[:, None, :] - centers[None, :, :]) ** 2, axis=2)
    sse = float(d2[np.arange(z.shape[0]), labels].sum())
    return labels, centers, sse


def kmeans(samples: list[ClusterFeatures], k: int, seed: int):
    """Lloyd iteration on z-scored features; centers returned in raw units."""
    if k < 1 or k > len(samples):
        raise InvalidK(f"k={k} invalid for {len(samples)} samples")
    data = np.stack([s.as_array() for s in samples])
    z, mu, sigma = _zscore(data)
    labels, centers_z, _ = _lloyd(z, k, np.random.default_rng(seed))
    centers = centers_z * sigma + mu
    return labels, centers


def elbow_sse(samples: list[ClusterFeatures], k_max: int, seed: int) -> list[float]:
    """Converged SSE for k = 1..k_max, best of five seeded restarts each."""
    if k_max < 1 or k_max > len(samples):
        raise InvalidK(f"k_max={k_max} invalid for {len(samples)} samples")
    data = np.stack([s.as_array() for s in samples])
    z, _, _ = _zscore(data)
    children = np.random.SeedSequence(seed).spawn(k_max * 5)
    out = []
    for k in range(1, k_max + 1):
        best = math.inf
        for r in range(5):
            rng = np.random.default_rng(children[(k - 1) * 5 + r])
            _, _, sse = _lloyd(z, k, rng)
            best = min(best, sse)
        out.append(best)
    return out


def feasible_trajectories(
    state: VehicleState,
    opponents: list[VehicleState],
    horizon: int,
    dt: float,
) -> list[Trajectory]:
    """One constant-maneuver rollout per action-set element."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    return [rollout(state, a, horizon, dt) for a in action_set()]


def _opponent_block(opponents, horizon, dt) -> np.ndarray | None:
    if not opponents:
        return None
    return np.stack(
        [constant_velocity_trajectory(o, horizon, dt).states for o in opponents]
    )


def trajectory_features(
    trajectory: Trajectory,
    path: ReferencePath,
    opponent_states: np.ndarray | None = None,
    footprint_radius: float = FOOTPRINT_RADIUS,
) -> np.ndarray:
    """Per-frame features averaged over the whole trajectory (mean, not sum)."""
    return feature_series(trajectory.states, path, opponent_states, footprint_radius).mean(axis=0)


def candidate_features(context: DemoContext) -> np.ndarray:
    """(6, 3) feature matrix of the frame's feasible trajectories."""
    opp = _opponent_block(list(context.opponent_states), context.horizon, context.dt)
    rows = []
    for traj in feasible_trajectories(
        context.ego_state, list(context.opponent_states), context.horizon, context.dt
    ):
        rows.append(trajectory_features(traj, context.path, opp))
    return np.stack(rows)


def nearest_candidate_index(trajectory: Trajectory, context: DemoContext) -> int:
    """Discretize an expert trajectory to the closest feasible rollout."""
    cands = feasible_trajectories(
        context.ego_state, list(context.opponent_states), context.horizon, context.dt
    )
    n = min(len(trajectory), context.horizon + 1)
    errs = [
        float(np.sum((c.positions[:n] - trajectory.positions[:n]) ** 2)) for c in cands
    ]
    return int(np.argmin(errs))


def _objective_and_gradient(theta, expert_f, cand_f, lam):
    """Regularized log-likelihood and gradient over normalized features.

    expert_f: (n, 3); cand_f: (n, 6, 3).
    """
    scores = cand_f @ theta  # (n, 6)
    m = scores.max(axis=1, keepdims=True)
    lse = m[:, 0] + np.log(np.exp(scores - m).sum(axis=1))
    obj = float((expert_f @ theta - lse).sum() - lam * float(theta @ theta))
    probs = np.exp(scores - m)
    probs /= probs.sum(axis=1, keepdims=True)
    expected = np.einsum("nc,ncf->nf", probs, cand_f)
    grad = (expert_f - expected).sum(axis=0) - 2.0 * lam * theta
    return obj, grad


def maxent_irl(demos: list[ExpertDemo], config: IrlConfig, seed: int) -> IrlResult:
    """Gradient ascent on the softmax trajectory likelihood with L2 regularization."""
    if not demos:
        raise ValueError("demos must be non-empty")
    cand = np.stack([candidate_features(d.context) for d in demos])  # (n, 6, 3)
    chosen = np.array([d.context.chosen_index for d in demos])
    if not np.isfinite(cand).all():
        raise NonFiniteGradient("non-finite candidate features")
    flat = cand.reshape(-1, _FEATURE_DIM)
    _, mu, sigma = _zscore(flat)
    cand_n = (cand - mu) / sigma
    expert_n = cand_n[np.arange(len(demos)), chosen]

    rng = np.random.default_rng(seed)
    theta = rng.normal(0.0, 0.05, size=_FEATURE_DIM)
    lam = config.regularization
    obj, grad = _objective_and_gradient(theta, expert_n, cand_n, lam)
    trace = [obj]
    for _ in range(config.epochs):
        if not np.isfinite(grad).all():
            raise NonFiniteGradient("gradient diverged")
        stepsize = config.learning_rate
        improved = False
        for _ in range(25):
            cand_theta = theta + stepsize * grad
            new_obj, new_grad = _objective_and_gradient(cand_theta, expert_n, cand_n, lam)
            if new_obj >= obj:
                theta, obj, grad = cand_theta, new_obj, new_grad
                improved = True
                break
            stepsize *= 0.5
        trace.append(obj)
        if not improved:
            break

    raw = theta / sigma
    clipped = np.clip(raw, 0.0, None)
    return IrlResult(
        theta=theta,
        weights=RewardWeights(*clipped),
        raw_theta=raw,
        trace=trace,
        feature_mean=mu,
        feature_std=sigma,
    )


def irl_objective(theta: np.ndarray, demos: list[ExpertDemo], config: IrlConfig):
    """Objective/gradient at arbitrary theta, for gradient verification."""
    cand = np.stack([candidate_features(d.context) for d in demos])
    chosen = np.array([d.context.chosen_index for d in demos])
    flat = cand.reshape(-1, _FEATURE_DIM)
    _, mu, sigma = _zscore(flat)
    cand_n = (cand - mu) / sigma
    expert_n = cand_n[np.arange(len(demos)), chosen]
    return _objective_and_gradient(np.asarray(theta, float), expert_n, cand_n, config.regularization)


def generate_synthetic_demos(
    profile,
    layout: IntersectionLayout,
    n: int,
    seed: int,
    horizon: int = 10,
    dt: float = 0.1,
) -> list[ExpertDemo]:
    """Expert demonstrations from the driver model itself, for recovery validation.

    Randomized two-vehicle conflict episodes on the first conflicting stream
    pair of the layout; every frame of the ego vehicle becomes one demo.
    """
    from .drivers import PRESETS, HvConfig, hv_decide  # deferred: drivers imports rewards

    if n < 1:
        raise ValueError("n must be >= 1")
    if not layout.conflict_points:
        raise ValueError("layout has no conflict points")
    rng = np.random.default_rng(seed)
    cp = layout.conflict_points[0]
    ego_stream, opp_stream = cp.stream_a, cp.stream_b
    ego_path = layout.stream(ego_stream).path
    opp_path = layout.stream(opp_stream).path
    cfg = HvConfig(horizon=horizon)
    kinds = sorted(PRESETS)
    demos: list[ExpertDemo] = []

    while len(demos) < n:
        ego_s0 = max(0.0, cp.arc_pos_a - rng.uniform(4.0, 30.0))
        opp_s0 = max(0.0, cp.arc_pos_b - rng.uniform(4.0, 30.0))
        opp_profile = PRESETS[kinds[int(rng.integers(len(kinds)))]]
        ego_state = _state_on_path(ego_path, ego_s0, profile.v_init)
        opp_state = _state_on_path(opp_path, opp_s0, opp_profile.v_init)
        world = WorldState(layout=layout, time=0.0)
        world.vehicles[0] = VehicleInfo(0, "hv", ego_stream, profile, ego_state, 0, 0.0, ego_s0)
        world.vehicles[1] = VehicleInfo(1, "hv", opp_stream, opp_profile, opp_state, 1, 0.0, opp_s0)
        for _ in range(60):
            ego = world.vehicles[0]
            opp = world.vehicles[1]
            cache: dict = {}
            ego_action = hv_decide(0, world, layout, dt, cfg, cache)
            opp_action = hv_decide(1, world, layout, dt, cfg, cache)
            idx = action_set().index(ego_action)
            ctx = DemoContext(ego.state, (opp.state,), ego_path, horizon, dt, idx)
            traj = rollout(ego.state, ego_action, horizon, dt)
            feats = trajectory_features(traj, ego_path, _opponent_block([opp.state], horizon, dt))
            demos.append(ExpertDemo(trajectory=traj, features=feats, context=ctx))
            if len(demos) >= n:
                break
            from .dynamics import step

            new_ego = step(ego.state, ego_action, dt)
            new_opp = step(opp.state, opp_action, dt)
            ego.state, opp.state = new_ego, new_opp
            ego.s, _ = _project(ego_path, new_ego)
            opp.s, _ = _project(opp_path, new_opp)
            if ego.s >= ego_path.length - 1.0 or opp.s >= opp_path.length - 1.0:
                break
    return demos[:n]


def _state_on_path(path: ReferencePath, s: float, v: float) -> VehicleState:
    p = path.point_at(s)
    heading = float(path.heading_at(np.asarray(s)))
    return VehicleState(float(p[0]), float(p[1]), v, heading)


def _project(path: ReferencePath, state: VehicleState):
    s, l = path.project_many(state.position.reshape(1, 2))
    return float(s[0]), float(l[0])
