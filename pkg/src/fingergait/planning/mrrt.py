"""Kinematic contact-maintaining planner.

Classic RRT skeleton: sample a random configuration, find the nearest tree
node, take one short projected step toward the sample. Every accepted node
is a statically stable grasp with all previous contacts intact, so the tree
explores the sliding/rolling reachable set of the root grasp; it cannot
break or remake contacts.
"""

import time
from dataclasses import dataclass

import numpy as np

from ..geometry import ObjectShape
from ..hand import HandModel, State
from ..sim import SimConfig
from ..stability import StabilityConfig
from .projection import project_extension
from .tree import (ExplorationTree, PlanResult, checkpoint,
                   sample_configurations)


@dataclass
class MRRTConfig:
    seed: int = 0
    iterations: int = 2000         # outer sampling iterations
    max_nodes: int = 2000          # stop early once the tree is this large
    step_alpha: float = 0.05       # weighted-metric step length
    position_window: float = 0.03  # object position sampling half-width (m)
    rotation_base: float = 2.0 * np.pi   # base object-angle half-window
    coverage_every: int = 100      # checkpoint cadence, in iterations


def grow_mrrt(model: HandModel, shape: ObjectShape, root: State,
              sim_config: SimConfig, stability: StabilityConfig,
              config: MRRTConfig) -> PlanResult:
    """Grow the contact-maintaining tree from a rooted stable grasp."""
    rng = np.random.Generator(np.random.Philox(config.seed))
    tree = ExplorationTree(model.dof)
    tree.add(root.q, root.pose, parent=-1)
    coverage = []
    t0 = time.perf_counter()
    iteration = 0
    for iteration in range(1, config.iterations + 1):
        if len(tree) >= config.max_nodes:
            break
        scale = 1.0 + len(tree) / config.max_nodes
        target = sample_configurations(
            rng, model, tree.nodes[0].pose, 1, scale,
            config.position_window, config.rotation_base)[0]
        near_id = int(tree.nearest_batch(target[None, :])[0])
        near = tree.nodes[near_id]
        new = project_extension(model, shape, State(near.q, near.pose),
                                target, config.step_alpha, stability,
                                sim_config.contact_tol)
        if new is not None:
            tree.add(new.q, new.pose, parent=near_id)
        if iteration % config.coverage_every == 0:
            checkpoint(coverage, iteration, tree)
        if len(tree) >= config.max_nodes:
            break
    if not coverage or coverage[-1][0] != iteration:
        checkpoint(coverage, iteration, tree)
    return PlanResult(tree=tree, coverage=coverage, iterations=iteration,
                      elapsed_s=time.perf_counter() - t0)
