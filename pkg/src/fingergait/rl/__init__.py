"""On-policy reinforcement learning for in-hand rotation."""

from .distributions import (ExplorationReservoir, FixedInit,
                            GraspSamplerStats, PoolResets, ResetDistribution,
                            grasp_pool_reset_set, sample_stable_grasps)
from .env import EnvConfig, EpisodeStats, RotationEnv, rollout_policy
from .nets import (Adam, Params, flatten, init_mlp, mlp_backward, mlp_forward,
                   numeric_gradient, unflatten_like)
from .policy import Critic, GaussianActor, load_policy, save_policy
from .ppo import (METRIC_FIELDS, PPOConfig, TrainResult, collect_rollouts,
                  compute_gae, policy_loss_and_grads, ppo_update,
                  read_metrics, train, value_loss_and_grads, write_metrics)

__all__ = [
    "Adam", "Critic", "EnvConfig", "EpisodeStats", "ExplorationReservoir",
    "FixedInit", "GaussianActor", "GraspSamplerStats", "METRIC_FIELDS",
    "PPOConfig", "Params", "PoolResets", "ResetDistribution", "RotationEnv",
    "TrainResult", "collect_rollouts", "compute_gae", "flatten",
    "grasp_pool_reset_set", "init_mlp", "load_policy", "mlp_backward",
    "mlp_forward", "numeric_gradient", "policy_loss_and_grads", "ppo_update",
    "read_metrics", "rollout_policy", "sample_stable_grasps", "save_policy",
    "train", "unflatten_like", "value_loss_and_grads", "write_metrics",
]
