"""Clipped-surrogate on-policy trainer for the rotation environment.

All gradients are computed by hand against the tiny MLPs in
:mod:`fingergait.rl.nets`; the loss/gradient helpers are module-level pure
functions so they can be verified against finite differences in the tests.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..geometry import ObjectShape
from ..hand import HandModel
from ..sim import SimConfig, SimState
from .distributions import ResetDistribution
from .env import EnvConfig, EpisodeStats, RotationEnv, rollout_policy
from .nets import Adam
from .policy import LOG2PI, Critic, GaussianActor, save_policy


@dataclass
class PPOConfig:
    updates: int = 150
    rollout_steps: int = 32        # control steps collected per lane per update
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip_ratio: float = 0.2
    epochs: int = 4
    minibatches: int = 4
    learning_rate: float = 3e-4
    value_coef: float = 0.5
    entropy_coef: float = 0.01
    max_grad_norm: float = 0.5
    normalize_advantages: bool = True
    hidden: int = 64
    seed: int = 0
    eval_every: int = 10           # deterministic eval cadence (0 = never)
    eval_horizon: int = 200

    def __post_init__(self):
        if self.updates < 0 or self.rollout_steps < 1:
            raise ValueError("updates must be >= 0, rollout_steps positive")
        if not 0.0 < self.clip_ratio < 1.0:
            raise ValueError("clip_ratio must be in (0, 1)")


def compute_gae(rewards: np.ndarray, values: np.ndarray, bootstrap: np.ndarray,
                done: np.ndarray, gamma: float, lam: float
                ) -> Tuple[np.ndarray, np.ndarray]:
    """Generalized advantage estimates over a (T, B) rollout.

    ``done`` marks steps after which the lane restarted; no value flows
    across those boundaries (timeout bootstrapping is handled upstream by
    folding the terminal value into the reward).  Returns (advantages,
    value targets), both (T, B).
    """
    steps = rewards.shape[0]
    adv = np.zeros_like(rewards)
    running = np.zeros_like(bootstrap)
    for t in reversed(range(steps)):
        next_values = bootstrap if t == steps - 1 else values[t + 1]
        nonterminal = 1.0 - done[t]
        delta = rewards[t] + gamma * next_values * nonterminal - values[t]
        running = delta + gamma * lam * nonterminal * running
        adv[t] = running
    return adv, adv + values


def policy_loss_and_grads(actor: GaussianActor, obs: np.ndarray,
                          actions: np.ndarray, logp_old: np.ndarray,
                          advantages: np.ndarray, clip_ratio: float,
                          entropy_coef: float
                          ) -> Tuple[float, List[np.ndarray], Dict[str, float]]:
    """Clipped surrogate loss minus entropy bonus, with analytic gradients.

    Returns (loss, gradients aligned with ``actor.trainable()``, stats).
    """
    n = obs.shape[0]
    mean, cache = actor.forward_cached(obs)
    log_std = actor.log_std
    std = np.exp(log_std)
    z = (actions - mean) / std
    logp = (-0.5 * (z * z).sum(axis=1) - log_std.sum()
            - 0.5 * actor.act_dim * LOG2PI)
    ratio = np.exp(logp - logp_old)
    surr = ratio * advantages
    clipped = np.clip(ratio, 1.0 - clip_ratio, 1.0 + clip_ratio) * advantages
    entropy = actor.entropy()
    loss = float(-np.minimum(surr, clipped).mean() - entropy_coef * entropy)

    # gradient flows through the unclipped branch wherever it is the minimum
    active = surr <= clipped
    dlogp = np.where(active, -advantages * ratio, 0.0) / n
    grad_mean = dlogp[:, None] * (z / std)
    grad_log_std = (dlogp[:, None] * (z * z - 1.0)).sum(axis=0)
    grad_log_std -= entropy_coef            # d(-coef * entropy)/d log_std
    grads = actor.backward(cache, grad_mean) + [grad_log_std]

    stats = {
        "approx_kl": float(np.mean(logp_old - logp)),
        "clip_frac": float(np.mean(np.abs(ratio - 1.0) > clip_ratio)),
        "entropy": entropy,
    }
    return loss, grads, stats


def value_loss_and_grads(critic: Critic, obs: np.ndarray, targets: np.ndarray,
                         value_coef: float
                         ) -> Tuple[float, List[np.ndarray]]:
    """Half squared error against value targets, with analytic gradients."""
    n = obs.shape[0]
    out, cache = critic.forward_cached(obs)
    err = out[:, 0] - targets
    loss = float(0.5 * value_coef * (err * err).mean())
    grads = critic.backward(cache, value_coef * err / n)
    return loss, grads


def ppo_update(actor: GaussianActor, critic: Critic, actor_opt: Adam,
               critic_opt: Adam, obs_a: np.ndarray, obs_c: np.ndarray,
               actions: np.ndarray, logp_old: np.ndarray,
               advantages: np.ndarray, returns: np.ndarray,
               config: PPOConfig, rng: np.random.Generator) -> Dict[str, float]:
    """Run the clipped-surrogate epochs over one flattened rollout batch."""
    if config.normalize_advantages:
        advantages = ((advantages - advantages.mean())
                      / (advantages.std() + 1e-8))
    idx = np.arange(obs_a.shape[0])
    agg: Dict[str, List[float]] = {k: [] for k in (
        "policy_loss", "value_loss", "entropy", "approx_kl", "clip_frac",
        "actor_grad_norm", "critic_grad_norm")}
    for _ in range(config.epochs):
        rng.shuffle(idx)
        for mb in np.array_split(idx, config.minibatches):
            ploss, pgrads, stats = policy_loss_and_grads(
                actor, obs_a[mb], actions[mb], logp_old[mb], advantages[mb],
                config.clip_ratio, config.entropy_coef)
            agg["actor_grad_norm"].append(
                actor_opt.step(actor.trainable(), pgrads))
            actor.clip_log_std()

            vloss, vgrads = value_loss_and_grads(
                critic, obs_c[mb], returns[mb], config.value_coef)
            agg["critic_grad_norm"].append(
                critic_opt.step(critic.params, vgrads))

            agg["policy_loss"].append(ploss)
            agg["value_loss"].append(vloss)
            agg["entropy"].append(stats["entropy"])
            agg["approx_kl"].append(stats["approx_kl"])
            agg["clip_frac"].append(stats["clip_frac"])
    return {k: float(np.mean(v)) for k, v in agg.items()}


@dataclass
class TrainResult:
    actor: GaussianActor
    critic: Critic
    metrics: List[Dict[str, float]] = field(default_factory=list)
    eval_history: List[Tuple[int, float]] = field(default_factory=list)
    env_steps: int = 0
    episodes: int = 0

    def final_eval(self) -> float:
        return self.eval_history[-1][1] if self.eval_history else float("nan")


# wall_s stays out of the CSV so identical seeds write identical files
METRIC_FIELDS = [
    "update", "env_steps", "episodes", "mean_rotation", "mean_length",
    "mean_return", "policy_loss", "value_loss", "entropy", "approx_kl",
    "clip_frac", "actor_grad_norm", "critic_grad_norm", "eval_rotation",
]


def write_metrics(path: str, rows: Sequence[Dict[str, float]],
                  comment: str = "") -> None:
    """CSV dump; an optional '#' comment line carries provenance."""
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        writer = csv.DictWriter(fh, fieldnames=METRIC_FIELDS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row.get(k, "") for k in METRIC_FIELDS})


def read_metrics(path: str) -> List[Dict[str, float]]:
    rows: List[Dict[str, float]] = []
    with open(path, newline="") as fh:
        data = [line for line in fh if not line.startswith("#")]
    for raw in csv.DictReader(data):
        rows.append({k: float(v) if v not in ("", None) else float("nan")
                     for k, v in raw.items()})
    return rows


def collect_rollouts(env: RotationEnv, actor: GaussianActor, critic: Critic,
                     steps: int, gamma: float, rng: np.random.Generator
                     ) -> Dict[str, object]:
    """Gather one on-policy batch of ``steps`` control steps per lane.

    Horizon cutoffs are not real terminations, so the value of each cut
    state is folded into its reward, letting the advantage recursion treat
    every done flag as terminal.  Returns arrays shaped (T, B, ...) plus the
    bootstrap values of the live lanes and the episodes finished on the way.
    """
    lanes = env.lanes
    batch = {
        "obs_a": np.zeros((steps, lanes, env.actor_obs_dim)),
        "obs_c": np.zeros((steps, lanes, env.critic_obs_dim)),
        "actions": np.zeros((steps, lanes, env.action_dim)),
        "logp": np.zeros((steps, lanes)),
        "rewards": np.zeros((steps, lanes)),
        "dones": np.zeros((steps, lanes)),
        "values": np.zeros((steps, lanes)),
    }
    episodes: List[EpisodeStats] = []
    cur_a, cur_c = env.observations()
    for t in range(steps):
        batch["obs_a"][t], batch["obs_c"][t] = cur_a, cur_c
        batch["values"][t] = critic.value(cur_c)
        batch["actions"][t], batch["logp"][t] = actor.sample(cur_a, rng)
        cur_a, cur_c, rewards, done, info = env.step(batch["actions"][t])
        batch["rewards"][t] = rewards
        batch["dones"][t] = done.astype(float)
        episodes.extend(info["episodes"])
        if len(info["timeout_lanes"]):
            batch["rewards"][t, info["timeout_lanes"]] += (
                gamma * critic.value(info["timeout_obs"]))
    batch["bootstrap"] = critic.value(cur_c)
    batch["episodes"] = episodes
    return batch


def train(model: HandModel, shape: ObjectShape, sim_config: SimConfig,
          resets: ResetDistribution, env_config: Optional[EnvConfig] = None,
          config: Optional[PPOConfig] = None,
          eval_start: Optional[SimState] = None,
          metrics_path: Optional[str] = None,
          checkpoint_path: Optional[str] = None,
          config_hash: str = "",
          log_fn: Optional[Callable[[str], None]] = None) -> TrainResult:
    """Train a rotation policy against the given reset distribution.

    ``eval_start`` enables periodic deterministic single-episode evaluation
    from that state (the standard yardstick is the canonical grasp, shared
    across reset conditions so their scores are comparable).  A nonempty
    ``config_hash`` is stamped into the metrics CSV and the checkpoint.
    """
    env_config = env_config or EnvConfig()
    config = config or PPOConfig()
    env = RotationEnv(model, shape, sim_config, resets, env_config,
                      seed=config.seed + 1)
    actor = GaussianActor(env.actor_obs_dim, env.action_dim,
                          hidden=config.hidden, seed=config.seed)
    critic = Critic(env.critic_obs_dim, hidden=config.hidden,
                    seed=config.seed + 1)
    actor_opt = Adam(actor.trainable(), lr=config.learning_rate,
                     max_grad_norm=config.max_grad_norm)
    critic_opt = Adam(critic.params, lr=config.learning_rate,
                      max_grad_norm=config.max_grad_norm)
    rng = np.random.default_rng(np.random.Philox(config.seed))

    result = TrainResult(actor=actor, critic=critic)
    lanes, steps = env_config.lanes, config.rollout_steps

    start_time = time.perf_counter()
    for update in range(1, config.updates + 1):
        batch = collect_rollouts(env, actor, critic, steps, config.gamma, rng)
        window: List[EpisodeStats] = batch["episodes"]
        adv, rets = compute_gae(batch["rewards"], batch["values"],
                                batch["bootstrap"], batch["dones"],
                                config.gamma, config.gae_lambda)
        stats = ppo_update(
            actor, critic, actor_opt, critic_opt,
            batch["obs_a"].reshape(-1, env.actor_obs_dim),
            batch["obs_c"].reshape(-1, env.critic_obs_dim),
            batch["actions"].reshape(-1, env.action_dim),
            batch["logp"].ravel(), adv.ravel(), rets.ravel(), config, rng)

        result.env_steps += steps * lanes
        result.episodes += len(window)
        eval_rotation = float("nan")
        if config.eval_every and eval_start is not None and (
                update % config.eval_every == 0 or update == config.updates):
            roll = rollout_policy(model, shape, sim_config, actor, eval_start,
                                  horizon=config.eval_horizon,
                                  action_limit=env_config.action_limit)
            eval_rotation = roll["rotation"]
            result.eval_history.append((update, eval_rotation))

        row = {
            "update": update,
            "env_steps": result.env_steps,
            "episodes": result.episodes,
            "mean_rotation": (float(np.mean([e.rotation for e in window]))
                              if window else float("nan")),
            "mean_length": (float(np.mean([e.length for e in window]))
                            if window else float("nan")),
            "mean_return": (float(np.mean([e.return_ for e in window]))
                            if window else float("nan")),
            "eval_rotation": eval_rotation,
            "wall_s": time.perf_counter() - start_time,
            **stats,
        }
        result.metrics.append(row)
        if log_fn is not None and (
                update % max(1, config.eval_every) == 0 or update == 1
                or update == config.updates):
            log_fn(f"update {update:4d}  rotation {row['mean_rotation']:+.3f}"
                   f"  return {row['mean_return']:+.2f}"
                   f"  eval {eval_rotation:+.3f}"
                   f"  entropy {row['entropy']:.2f}")

    if metrics_path is not None:
        write_metrics(metrics_path, result.metrics,
                      comment=f"config {config_hash or 'none'} "
                              f"seed {config.seed}")
    if checkpoint_path is not None:
        save_policy(checkpoint_path, actor, critic, actor_opt, critic_opt,
                    extra={"env_steps": np.array(result.env_steps),
                           "updates": np.array(config.updates),
                           "seed": np.array(config.seed),
                           "config_hash": np.array(config_hash)})
    return result
