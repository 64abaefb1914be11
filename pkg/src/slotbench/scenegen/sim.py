"""Kinematic stepping: a disk effector pushes convex-hull blocks.

No friction, no rotation under pushing (theta stays fixed per episode);
overlaps are resolved by minimal translation vectors, iterated pairwise for
block-block contacts. Everything is clamped to the table and to a 2x-step
displacement cap per block, so the step function never fails.
"""
import numpy as np

from . import geometry
from .scene import EFFECTOR_RADIUS, MAX_STEP

_RESOLVE_ITERS = 8


def clamp_action(action, max_step=MAX_STEP):
    a = np.asarray(action, dtype=np.float64)
    n = np.hypot(a[0], a[1])
    if n > max_step:
        a = a * (max_step / n)
    return a


def step(state, action, max_step=MAX_STEP, effector_radius=EFFECTOR_RADIUS):
    """Advance one tick: move effector by `action`, push any overlapped blocks."""
    new = state.copy()
    a = clamp_action(action, max_step)
    new.effector_pos = np.clip(new.effector_pos + a, 0.0, 1.0)

    n = len(new.blocks)
    if n == 0:
        return new
    start = new.block_poses[:, :2].copy()
    radii = np.array([b.circumradius for b in new.blocks])
    hulls = new.block_hulls()

    for _ in range(_RESOLVE_ITERS):
        moved = False
        for i in range(n):
            mtv = geometry.disk_polygon_mtv(new.effector_pos, effector_radius, hulls[i])
            if mtv is not None:
                new.block_poses[i, :2] += mtv
                hulls[i] = hulls[i] + mtv
                moved = True
        for i in range(n):
            for j in range(i + 1, n):
                mtv = geometry.polygons_mtv(hulls[i], hulls[j])
                if mtv is not None:
                    new.block_poses[i, :2] -= 0.5 * mtv
                    new.block_poses[j, :2] += 0.5 * mtv
                    hulls[i] = hulls[i] - 0.5 * mtv
                    hulls[j] = hulls[j] + 0.5 * mtv
                    moved = True
        if not moved:
            break

    # table containment (block centers stay a circumradius away from the edge)
    lo = radii[:, None]
    hi = 1.0 - radii[:, None]
    clamped = np.clip(new.block_poses[:, :2], lo, hi)

    # non-teleportation: cap per-step displacement at twice the action bound
    disp = clamped - start
    norm = np.hypot(disp[:, 0], disp[:, 1])
    cap = 2.0 * max_step
    scale = np.where(norm > cap, cap / np.maximum(norm, 1e-12), 1.0)
    new.block_poses[:, :2] = start + disp * scale[:, None]
    return new
