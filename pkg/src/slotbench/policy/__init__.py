from .bc import (
    bc_train_explicit,
    bc_train_implicit,
    consolidate_transitions,
    dfo_minimize,
    load_policy,
    take_episodes,
)
from .nets import ConvTrunk, EnergyNet, PolicyNet
from .observations import (
    VARIANTS,
    append_target_onehot,
    build_observation,
    gt_mask_channels,
    observation_channels,
)
from .rollout import (
    ExpertPolicy,
    PolicyEvalReport,
    TorchPolicy,
    aggregate_eval,
    eval_episodes,
    evaluate_policy,
)

__all__ = [
    "ConvTrunk",
    "EnergyNet",
    "ExpertPolicy",
    "PolicyEvalReport",
    "PolicyNet",
    "TorchPolicy",
    "VARIANTS",
    "aggregate_eval",
    "append_target_onehot",
    "bc_train_explicit",
    "bc_train_implicit",
    "build_observation",
    "consolidate_transitions",
    "dfo_minimize",
    "eval_episodes",
    "evaluate_policy",
    "gt_mask_channels",
    "load_policy",
    "observation_channels",
    "take_episodes",
]
