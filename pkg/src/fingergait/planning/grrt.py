"""Dynamic action-sampling planner.

Each outer iteration draws a batch of random configuration samples, finds
their nearest tree nodes, and tries several random servo actions from each;
every candidate is simulated for one control interval, and per sample the
surviving candidate closest to that sample joins the tree. Survival is
checked with the hold rollout, so accepted nodes are dynamically holdable
states -- contacts may break and re-form along the way, which is exactly
how finger-gaiting arises.

Randomness is drawn from counter-based streams keyed by (seed, iteration):
the draw for iteration i never depends on how many iterations ran before
it, which keeps runs reproducible and prefix-stable.
"""

import time
from dataclasses import dataclass

import numpy as np

from ..geometry import ObjectShape
from ..hand import HandModel
from ..sim import BatchSimulator, SimConfig, SimState, rollout_stability_check
from .tree import (ExplorationTree, PlanResult, checkpoint, embed,
                   metric_weights, sample_configurations)


@dataclass
class GRRTConfig:
    seed: int = 0
    max_nodes: int = 10_000
    max_iterations: int = 3000       # outer batches; safety cap
    batch_width: int = 32            # samples ("workers") per outer batch
    actions_per_extend: int = 8      # candidate actions per sample
    action_scale: float = 0.15       # rad; uniform setpoint delta half-width
    position_window: float = 0.03
    rotation_base: float = 2.0 * np.pi
    coverage_every: int = 25         # checkpoint cadence, in iterations


def _iteration_rng(seed: int, iteration: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[seed, iteration]))


def draw_extension_batch(model: HandModel, root_pose: np.ndarray,
                         config: GRRTConfig, iteration: int, tree_size: int
                         ) -> tuple:
    """Deterministic (samples, deltas) for one outer iteration.

    Configuration samples are drawn first, then actions in (K, W) order, so
    for a fixed seed the action set at a smaller ``actions_per_extend`` is a
    strict prefix of the set at a larger one -- nested action draws let
    ablation sweeps over K isolate the effect of trying more actions.
    """
    rng = _iteration_rng(config.seed, iteration)
    scale = 1.0 + tree_size / config.max_nodes
    samples = sample_configurations(
        rng, model, root_pose, config.batch_width, scale,
        config.position_window, config.rotation_base)
    deltas = rng.uniform(
        -config.action_scale, config.action_scale,
        (config.actions_per_extend, config.batch_width, model.dof))
    return samples, np.swapaxes(deltas, 0, 1)


def grrt_extend(model: HandModel, shape: ObjectShape, sim_config: SimConfig,
                tree: ExplorationTree, samples: np.ndarray,
                deltas: np.ndarray) -> int:
    """One batched extension round; returns the number of nodes added.

    ``samples`` is (W, d+3) raw configurations, ``deltas`` (W, K, d) servo
    perturbations. For every sample the candidates are simulated in one
    batch for a control interval; candidates are then probed with the hold
    rollout in closest-first order until each sample resolves.
    """
    w_count, k_count, dof = deltas.shape
    near_ids = tree.nearest_batch(samples)
    starts = [tree.nodes[i].state for i in near_ids]

    q0 = np.repeat(np.stack([s.q for s in starts]), k_count, axis=0)
    sp0 = np.repeat(np.stack([s.setpoints for s in starts]), k_count, axis=0)
    pose0 = np.repeat(np.stack([s.pose for s in starts]), k_count, axis=0)
    vel0 = np.repeat(np.stack([s.velocity for s in starts]), k_count, axis=0)
    targets = np.clip(sp0 + deltas.reshape(-1, dof),
                      model.joint_lower, model.joint_upper)

    sim = BatchSimulator(model, shape, sim_config)
    sim.load_arrays(q0, sp0, pose0, vel0)
    dropped = np.zeros(w_count * k_count, dtype=bool)
    for step in range(sim_config.control_interval):
        info = sim.step(targets if step == 0 else None)
        dropped |= info["dropped"]
    candidates = sim.states()

    weights = metric_weights(dof)
    cand_raw = np.concatenate([sim.q, sim.pose], axis=1)
    dist = np.linalg.norm(
        (cand_raw - np.repeat(samples, k_count, axis=0)) * weights,
        axis=1).reshape(w_count, k_count)
    alive = ~dropped.reshape(w_count, k_count)
    order = np.argsort(dist, axis=1, kind="stable")

    ptr = np.zeros(w_count, dtype=int)
    resolved = np.full(w_count, -1, dtype=int)   # candidate index, -2 = failed
    while True:
        lanes, picks = [], []
        for w in range(w_count):
            if resolved[w] != -1:
                continue
            while ptr[w] < k_count and not alive[w, order[w, ptr[w]]]:
                ptr[w] += 1
            if ptr[w] >= k_count:
                resolved[w] = -2
                continue
            lanes.append(w)
            picks.append(int(order[w, ptr[w]]))
        if not lanes:
            break
        probe = [candidates[w * k_count + k] for w, k in zip(lanes, picks)]
        ok = rollout_stability_check(model, shape, sim_config, probe)
        for j, (w, k) in enumerate(zip(lanes, picks)):
            if ok[j]:
                resolved[w] = k
            else:
                alive[w, k] = False

    added = 0
    for w in range(w_count):
        k = resolved[w]
        if k < 0:
            continue
        cand = candidates[w * k_count + k]
        tree.add(cand.q, cand.pose, parent=int(near_ids[w]), state=cand,
                 action=targets[w * k_count + k])
        added += 1
    return added


def grow_grrt(model: HandModel, shape: ObjectShape, root: SimState,
              sim_config: SimConfig, config: GRRTConfig) -> PlanResult:
    """Grow the dynamic tree from a rooted holdable state."""
    tree = ExplorationTree(model.dof)
    tree.add(root.q, root.pose, parent=-1, state=root)
    coverage = []
    t0 = time.perf_counter()
    iteration = 0
    for iteration in range(1, config.max_iterations + 1):
        if len(tree) >= config.max_nodes:
            break
        samples, deltas = draw_extension_batch(
            model, tree.nodes[0].pose, config, iteration, len(tree))
        grrt_extend(model, shape, sim_config, tree, samples, deltas)
        if iteration % config.coverage_every == 0:
            checkpoint(coverage, iteration, tree)
        if len(tree) >= config.max_nodes:
            break
    if not coverage or coverage[-1][0] != iteration:
        checkpoint(coverage, iteration, tree)
    return PlanResult(tree=tree, coverage=coverage, iterations=iteration,
                      elapsed_s=time.perf_counter() - t0)
