"""Sampling-based exploration planners over the hand-object system."""

from .grrt import (GRRTConfig, draw_extension_batch, grow_grrt,
                   grrt_extend)
from .mrrt import MRRTConfig, grow_mrrt
from .projection import (nullspace_projector, project_extension,
                         resnap_contacts)
from .tree import (ExplorationTree, PlanResult, TreeNode, embed,
                   metric_weights, sample_configurations)

__all__ = [
    "ExplorationTree", "PlanResult", "TreeNode", "embed", "metric_weights",
    "sample_configurations", "nullspace_projector", "project_extension",
    "resnap_contacts", "MRRTConfig", "grow_mrrt", "GRRTConfig", "grow_grrt",
    "grrt_extend", "draw_extension_batch",
]
