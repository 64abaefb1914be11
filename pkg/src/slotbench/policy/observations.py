"""Observation assembly for behavior cloning.

Every variant is a channel stack at image resolution: the RGB frame and/or
dense features from a frozen perception model (slot masks or autoencoder
activations) or the ground-truth segmentation. The goal pole is visible in
the RGB frame itself; the target block is conveyed by a separate one-hot
channel set (roster order) appended by the policy wrapper.
"""
import numpy as np
import torch

VARIANTS = (
    "rgb",
    "rgb_plus_gt_segmentation",
    "slot_masks",
    "rgb_plus_slot",
    "autoencoder_features",
    "rgb_plus_autoencoder",
)


def observation_channels(variant, n_blocks, slot_k=None, ae_channels=None):
    """Perception channel count per variant (before target conditioning)."""
    base = {
        "rgb": 3,
        "rgb_plus_gt_segmentation": 3 + n_blocks + 3,
        "slot_masks": slot_k,
        "rgb_plus_slot": 3 + (slot_k or 0),
        "autoencoder_features": ae_channels,
        "rgb_plus_autoencoder": 3 + (ae_channels or 0),
    }
    if variant not in base:
        raise ValueError(f"unknown perception variant {variant!r}")
    ch = base[variant]
    if ch is None:
        raise ValueError(f"variant {variant!r} needs its representation config")
    return ch


def gt_mask_channels(states, resolution):
    """(B, n+3, H, W) float ground-truth masks for a batch of states."""
    from ..scenegen import ground_truth_masks, mask_stack

    stacks = [mask_stack(ground_truth_masks(s, resolution)) for s in states]
    return torch.from_numpy(np.stack(stacks).astype(np.float32))


def build_observation(images, variant, *, states=None, slot_model=None, ae_model=None):
    """images (B, 3, H, W) float in [0,1] -> (B, C, H, W) perception stack.

    states are required for the ground-truth variant only; frozen models for
    the slot/autoencoder variants.
    """
    from ..slotcore import penultimate_features

    if variant not in VARIANTS:
        raise ValueError(f"unknown perception variant {variant!r}")
    if variant == "rgb":
        return images
    b, _, h, w = images.shape
    parts = [images] if variant.startswith("rgb") else []
    if variant == "rgb_plus_gt_segmentation":
        if states is None:
            raise ValueError("ground-truth variant needs scene states")
        parts.append(gt_mask_channels(states, (h, w)).to(images.dtype))
    elif variant in ("slot_masks", "rgb_plus_slot"):
        if slot_model is None:
            raise ValueError(f"variant {variant!r} needs a slot checkpoint")
        with torch.no_grad():
            masks = slot_model(images)["masks"]
        parts.append(masks)
    else:
        if ae_model is None:
            raise ValueError(f"variant {variant!r} needs an autoencoder checkpoint")
        parts.append(penultimate_features(ae_model, images))
    return torch.cat(parts, dim=1)


def append_target_onehot(obs, target, n_blocks):
    """Concatenate n_blocks constant one-hot planes selecting the target."""
    b, _, h, w = obs.shape
    onehot = torch.zeros(b, n_blocks, h, w, dtype=obs.dtype)
    t = torch.as_tensor(np.asarray(target), dtype=torch.long)
    onehot[torch.arange(b), t] = 1.0
    return torch.cat([obs, onehot], dim=1)
