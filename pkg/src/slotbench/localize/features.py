"""Feature extraction feeding the localization MLP.

Variants: slot-mask centroids (K x 2), a pooled autoencoder embedding, or the
contrastive query embedding. Centroids live in pixel-normalized [0,1]^2 with
(x, y) measured at pixel centers; a slot that owns no mass sits at the image
center by convention.
"""
import numpy as np
import torch

VARIANTS = ("slot_centroids", "autoencoder_pooled", "moco_embedding")

_EMPTY_EPS = 1e-12


def mask_centroids(masks):
    """(..., K, H, W) mask weights -> (..., K, 2) normalized (x, y) centroids."""
    m = np.asarray(masks, dtype=np.float64)
    h, w = m.shape[-2:]
    xs = (np.arange(w) + 0.5) / w
    ys = (np.arange(h) + 0.5) / h
    total = m.sum(axis=(-2, -1))
    cx = (m.sum(axis=-2) @ xs)
    cy = (m.sum(axis=-1) @ ys)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.stack([cx / total, cy / total], axis=-1)
    out[total <= _EMPTY_EPS] = 0.5
    return out


def state_coordinates(state):
    """Regression targets: block centers then the effector, flat (2n+2,)."""
    return np.concatenate([state.block_poses[:, :2].ravel(), state.effector_pos])


def coordinate_labels(n_blocks, blocks=None):
    if blocks is not None:
        names = [f"{b.color}-{b.shape}" for b in blocks]
    else:
        names = [f"block{i}" for i in range(n_blocks)]
    return names + ["effector"]


def extract_features(variant, model, images_u8, batch=64):
    """(N, H, W, 3) uint8 frames -> (N, F) float32 features, model frozen."""
    from ..baselines import moco_embedding, pooled_embedding
    from ..slotcore import extract_masks, images_to_tensor

    if variant not in VARIANTS:
        raise ValueError(f"unknown feature variant {variant!r}")
    chunks = []
    for i in range(0, len(images_u8), batch):
        x = images_to_tensor(images_u8[i : i + batch])
        if variant == "slot_centroids":
            masks = extract_masks(model, x).masks.numpy()
            chunks.append(mask_centroids(masks).reshape(masks.shape[0], -1))
        elif variant == "autoencoder_pooled":
            chunks.append(pooled_embedding(model, x).numpy())
        else:
            chunks.append(moco_embedding(model, x).numpy())
    return np.concatenate(chunks).astype(np.float32)
