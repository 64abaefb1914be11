"""Segmentation metrics: adjusted Rand index over foreground pixels."""
import numpy as np


def adjusted_rand_index(labels_a, labels_b):
    """ARI between two flat integer labelings of the same points."""
    a = np.asarray(labels_a).ravel()
    b = np.asarray(labels_b).ravel()
    if a.shape != b.shape:
        raise ValueError("labelings must cover the same points")
    if a.size == 0:
        raise ValueError("empty labeling")

    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    n_a = ai.max() + 1
    n_b = bi.max() + 1
    contingency = np.zeros((n_a, n_b), dtype=np.int64)
    np.add.at(contingency, (ai, bi), 1)

    def comb2(x):
        return x * (x - 1) / 2.0

    sum_cells = comb2(contingency).sum()
    sum_rows = comb2(contingency.sum(axis=1)).sum()
    sum_cols = comb2(contingency.sum(axis=0)).sum()
    total = comb2(a.size)

    expected = sum_rows * sum_cols / total if total > 0 else 0.0
    max_index = 0.5 * (sum_rows + sum_cols)
    if max_index == expected:
        # both partitions trivial (e.g. single cluster each): perfect agreement
        return 1.0
    return float((sum_cells - expected) / (max_index - expected))


def foreground_ari(pred_masks, gt_stack):
    """ARI between predicted soft masks and ground-truth ids, background excluded.

    pred_masks: (K, H, W) float, a per-pixel distribution over K slots.
    gt_stack:   (M, H, W) binary stack whose LAST channel is background.
    """
    pred_masks = np.asarray(pred_masks)
    gt_stack = np.asarray(gt_stack)
    if pred_masks.shape[1:] != gt_stack.shape[1:]:
        raise ValueError("mask resolutions differ")
    fg = gt_stack[-1] == 0
    if not fg.any():
        raise ValueError("scene has no foreground pixels")
    pred = pred_masks.argmax(axis=0)[fg]
    gt = gt_stack[:-1].argmax(axis=0)[fg]
    return adjusted_rand_index(pred, gt)
