"""Scripted expert: a stateless two-phase waypoint pusher.

Each call recomputes the push point (behind the target block on the
block-to-pole line) from the current state. Far from it, the effector
navigates there, circling the target instead of cutting through it; once
roughly behind the block it pushes along the block-to-pole direction,
steering out lateral drift so contact never breaks. Returns the zero action
once the block sits within the success radius.

The effector is kinematic and blocks always yield, so other blocks are
simply plowed through; only the target needs to be circled. Near walls the
ideal stance can fall off the table — then the standable axis is pushed
first, and the orbit direction flips instead of pinning against the edge.
"""
import numpy as np

from . import geometry
from .scene import EFFECTOR_RADIUS, MAX_STEP, SUCCESS_RADIUS

_PUSH_GAP = 0.004  # standoff between effector rim and block hull at the push point
_ORBIT_PAD = 0.006  # extra clearance kept while circling the target


def _hull_radius(state, i):
    hull = state.block_hull(i)
    center = state.block_poses[i, :2]
    return float(np.max(np.hypot(hull[:, 0] - center[0], hull[:, 1] - center[1])))


def _support(state, i, direction):
    """Extent of block i's hull from its origin along `direction`."""
    hull = state.block_hull(i) - state.block_poses[i, :2]
    return float(np.max(hull @ direction))


def scripted_expert(state, target_block, max_step=MAX_STEP,
                    success_radius=SUCCESS_RADIUS):
    """Action (dx, dy) with |action| <= max_step pushing `target_block` to the pole."""
    if not 0 <= target_block < len(state.blocks):
        raise IndexError(f"target block {target_block} not in scene")
    block = state.block_poses[target_block, :2]
    pole = state.pole_pos
    eff = state.effector_pos

    gap = pole - block
    dist_to_pole = float(np.hypot(gap[0], gap[1]))
    if dist_to_pole <= success_radius:
        return np.zeros(2)
    push_dir = gap / dist_to_pole

    brim = _hull_radius(state, target_block) + EFFECTOR_RADIUS
    # stance distance uses the hull's support along the push axis (the moon
    # hull is lopsided around its origin, so this is tighter than the radius)
    contact = _support(state, target_block, -push_dir) + EFFECTOR_RADIUS
    # if the stance behind the block falls off the table (block near a wall),
    # push the standable axis first instead of grinding diagonally into the wall
    stance = block - push_dir * (contact + _PUSH_GAP)
    x_bad = not 0.0 <= stance[0] <= 1.0
    y_bad = not 0.0 <= stance[1] <= 1.0
    if x_bad and not y_bad and abs(gap[1]) > success_radius:
        push_dir = np.array([0.0, np.sign(gap[1])])
        contact = _support(state, target_block, -push_dir) + EFFECTOR_RADIUS
    elif y_bad and not x_bad and abs(gap[0]) > success_radius:
        push_dir = np.array([np.sign(gap[0]), 0.0])
        contact = _support(state, target_block, -push_dir) + EFFECTOR_RADIUS
    perp = np.array([-push_dir[1], push_dir[0]])

    rel = eff - block
    along = float(rel @ push_dir)  # signed: negative = behind the block
    lateral = float(rel @ perp)

    # push phase: behind the block, roughly on line, within reach of contact.
    # Pure pursuit of a point just past the center keeps vertex contacts
    # (diamond, moon) self-centering instead of sliding off.
    if (along <= -0.25 * contact and abs(lateral) <= 0.8 * brim
            and -along <= contact + _PUSH_GAP + 3.0 * max_step):
        aim = block + push_dir * 0.5 * contact
        steer = aim - eff
        norm = float(np.hypot(steer[0], steer[1]))
        return steer / max(norm, 1e-12) * max_step

    # navigate phase: head for the push point (clipped to where the effector
    # can actually stand), orbiting the target if the line would cut through it
    push_point = np.clip(block - push_dir * (contact + _PUSH_GAP), 0.0, 1.0)
    to_pp = push_point - eff
    dist_pp = float(np.hypot(to_pp[0], to_pp[1]))
    if dist_pp < 1e-12:
        return push_dir * max_step
    guard = brim + _ORBIT_PAD
    if (geometry.point_segment_distance(block, eff, push_point) >= guard
            or dist_pp <= max_step):
        return to_pp / dist_pp * min(max_step, dist_pp)

    # circle the shorter angular way, walking waypoints on the guard ring;
    # clipping each waypoint to the table turns walls into slides and lets
    # the path cut inside the ring near an edge (a harmless pre-shove)
    ring = guard + _ORBIT_PAD
    theta_e = float(np.arctan2(eff[1] - block[1], eff[0] - block[0]))
    theta_t = float(np.arctan2(to_pp[1] + rel[1], to_pp[0] + rel[0]))  # pp - block
    sweep = (theta_t - theta_e + np.pi) % (2.0 * np.pi) - np.pi
    spin = 1.0 if sweep >= 0.0 else -1.0
    dtheta = spin * max_step / ring
    for k in range(1, int(2.0 * np.pi / abs(dtheta)) + 1):
        theta = theta_e + k * dtheta
        waypoint = np.clip(block + ring * np.array([np.cos(theta), np.sin(theta)]),
                           0.0, 1.0)
        leg = waypoint - eff
        dist = float(np.hypot(leg[0], leg[1]))
        if dist >= 0.25 * max_step:
            return leg / dist * min(max_step, dist)
    return to_pp / dist_pp * max_step  # ring fully degenerate: plow straight


def is_success(state, target_block, success_radius=SUCCESS_RADIUS):
    gap = state.pole_pos - state.block_poses[target_block, :2]
    return float(np.hypot(gap[0], gap[1])) <= success_radius
