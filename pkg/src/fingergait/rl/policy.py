"""Gaussian actor and privileged critic over the manual-backprop MLPs.

The actor maps proprioceptive observations to a diagonal Gaussian over
servo setpoint deltas; the log standard deviations are free parameters
clipped to [-5, 1]. The critic sees extra simulator-state features the
robot would not sense directly, which is fine because it is only used
during training.
"""

from typing import Dict, List, Optional, Tuple

import numpy as np

from .nets import Adam, Params, init_mlp, mlp_backward, mlp_forward

LOG_STD_MIN = -5.0
LOG_STD_MAX = 1.0
LOG2PI = float(np.log(2.0 * np.pi))


class GaussianActor:
    """Diagonal-Gaussian policy with a state-independent log-std vector."""

    def __init__(self, obs_dim: int, act_dim: int, hidden: int = 64,
                 seed: int = 0, init_log_std: float = -1.0):
        rng = np.random.default_rng(seed)
        self.params: Params = init_mlp(
            [obs_dim, hidden, hidden, act_dim], rng, final_scale=0.01)
        self.log_std = np.full(act_dim, float(init_log_std))
        self.obs_dim, self.act_dim = obs_dim, act_dim

    # -- sampling ------------------------------------------------------------

    def mean(self, obs: np.ndarray) -> np.ndarray:
        out, _ = mlp_forward(self.params, obs)
        return out

    def sample(self, obs: np.ndarray, rng: np.random.Generator
               ) -> Tuple[np.ndarray, np.ndarray]:
        """Actions and log-probs for a batch of observations."""
        mean = self.mean(obs)
        std = np.exp(np.clip(self.log_std, LOG_STD_MIN, LOG_STD_MAX))
        actions = mean + std * rng.standard_normal(mean.shape)
        return actions, self.log_prob(mean, actions)

    def log_prob(self, mean: np.ndarray, actions: np.ndarray) -> np.ndarray:
        log_std = np.clip(self.log_std, LOG_STD_MIN, LOG_STD_MAX)
        std = np.exp(log_std)
        z = (actions - mean) / std
        return -0.5 * (z * z).sum(axis=-1) - log_std.sum() \
            - 0.5 * self.act_dim * LOG2PI

    def entropy(self) -> float:
        log_std = np.clip(self.log_std, LOG_STD_MIN, LOG_STD_MAX)
        return float(log_std.sum() + 0.5 * self.act_dim * (LOG2PI + 1.0))

    # -- training ------------------------------------------------------------

    def forward_cached(self, obs: np.ndarray):
        return mlp_forward(self.params, obs)

    def backward(self, cache, grad_mean: np.ndarray) -> Params:
        grads, _ = mlp_backward(self.params, cache, grad_mean)
        return grads

    def trainable(self) -> List[np.ndarray]:
        return self.params + [self.log_std]

    def clip_log_std(self) -> None:
        np.clip(self.log_std, LOG_STD_MIN, LOG_STD_MAX, out=self.log_std)


class Critic:
    """Scalar state-value network."""

    def __init__(self, obs_dim: int, hidden: int = 64, seed: int = 1):
        rng = np.random.default_rng(seed)
        self.params: Params = init_mlp([obs_dim, hidden, hidden, 1], rng)
        self.obs_dim = obs_dim

    def value(self, obs: np.ndarray) -> np.ndarray:
        out, _ = mlp_forward(self.params, obs)
        return out[..., 0]

    def forward_cached(self, obs: np.ndarray):
        return mlp_forward(self.params, obs)

    def backward(self, cache, grad_value: np.ndarray) -> Params:
        grads, _ = mlp_backward(self.params, cache, grad_value[..., None])
        return grads


def save_policy(path: str, actor: GaussianActor, critic: Critic,
                actor_opt: Optional[Adam] = None,
                critic_opt: Optional[Adam] = None,
                extra: Optional[Dict[str, np.ndarray]] = None) -> None:
    """Checkpoint both networks (and optionally optimizer state) as npz."""
    data: Dict[str, np.ndarray] = {
        "meta": np.array([actor.obs_dim, actor.act_dim, critic.obs_dim]),
        "log_std": actor.log_std,
    }
    for i, p in enumerate(actor.params):
        data[f"actor_{i}"] = p
    for i, p in enumerate(critic.params):
        data[f"critic_{i}"] = p
    if actor_opt is not None:
        for k, v in actor_opt.state_dict().items():
            data[f"aopt_{k}"] = v
    if critic_opt is not None:
        for k, v in critic_opt.state_dict().items():
            data[f"copt_{k}"] = v
    for k, v in (extra or {}).items():
        data[f"extra_{k}"] = v
    np.savez(path, **data)


def load_policy(path: str) -> Tuple[GaussianActor, Critic, Dict[str, np.ndarray]]:
    with np.load(path) as data:
        obs_dim, act_dim, critic_dim = (int(v) for v in data["meta"])
        actor = GaussianActor(obs_dim, act_dim)
        critic = Critic(critic_dim)
        actor.params = [data[f"actor_{i}"].copy()
                        for i in range(len(actor.params))]
        actor.log_std = data["log_std"].copy()
        critic.params = [data[f"critic_{i}"].copy()
                         for i in range(len(critic.params))]
        extra = {k[len("extra_"):]: data[k].copy()
                 for k in data.files if k.startswith("extra_")}
    return actor, critic, extra
