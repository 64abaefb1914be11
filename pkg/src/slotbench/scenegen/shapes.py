"""Block shape polygons and the roster of (shape, color) blocks per scene size.

All shapes are defined as simple polygons with circumradius 1 centered on the
pose origin; ``block_polygon`` scales/rotates/translates them. Moon and star
are intentionally concave — rasterization uses the true outline, collisions
use the convex hull (see geometry.convex_hull).
"""
from dataclasses import dataclass

import numpy as np

SHAPES = ("moon", "cube", "star", "pentagon")
COLORS = ("red", "blue", "green", "yellow")

# RGB palette (uint8). Blocks by color; fixed entity colors for the rest.
PALETTE = {
    "red": (214, 45, 32),
    "blue": (0, 87, 231),
    "green": (0, 135, 68),
    "yellow": (255, 196, 12),
    "background": (24, 24, 28),
    "table": (196, 196, 200),
    "pole": (128, 0, 160),
    "effector": (90, 94, 98),
}


@dataclass(frozen=True)
class BlockSpec:
    """One block: shape name, color name, circumradius in table units."""

    shape: str
    color: str
    circumradius: float = 0.06

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"unknown shape {self.shape!r}")
        if self.color not in COLORS:
            raise ValueError(f"unknown color {self.color!r}")
        if not 0.0 < self.circumradius <= 0.1:
            raise ValueError("circumradius must be in (0, 0.1]")


# Rosters match the per-object table headers of the evaluation protocol:
# the single-block scene uses the blue cube; 4 blocks are one per color;
# 8 blocks duplicate each color with a second shape. The 3-block roster is
# the 4-block prefix and exists for cheap object-discovery sanity runs.
_ROSTERS = {
    1: [("cube", "blue")],
    3: [("moon", "red"), ("cube", "blue"), ("star", "green")],
    4: [("moon", "red"), ("cube", "blue"), ("star", "green"), ("pentagon", "yellow")],
    8: [
        ("moon", "red"),
        ("cube", "blue"),
        ("star", "green"),
        ("pentagon", "yellow"),
        ("pentagon", "red"),
        ("moon", "blue"),
        ("cube", "green"),
        ("star", "yellow"),
    ],
}


def roster(n_blocks, circumradius=0.06):
    """Return the list of BlockSpecs for a supported scene size (1, 3, 4 or 8)."""
    if n_blocks not in _ROSTERS:
        raise ValueError(f"n_blocks must be one of {sorted(_ROSTERS)}, got {n_blocks}")
    return [BlockSpec(s, c, circumradius) for s, c in _ROSTERS[n_blocks]]


def _unit_cube():
    ang = np.deg2rad([45.0, 135.0, 225.0, 315.0])
    return np.stack([np.cos(ang), np.sin(ang)], axis=1)


def _unit_pentagon():
    ang = np.deg2rad(90.0 + 72.0 * np.arange(5))
    return np.stack([np.cos(ang), np.sin(ang)], axis=1)


def _unit_star(inner=0.45):
    ang = np.deg2rad(90.0 + 36.0 * np.arange(10))
    rad = np.where(np.arange(10) % 2 == 0, 1.0, inner)
    return np.stack([rad * np.cos(ang), rad * np.sin(ang)], axis=1)


def _unit_moon(cutter_center=0.55, cutter_radius=0.75, n_outer=17, n_inner=9):
    # Crescent: big arc of the unit circle joined to the concave arc of a
    # cutter circle through their two intersection points.
    d, rc = cutter_center, cutter_radius
    x = (1.0 + d * d - rc * rc) / (2.0 * d)
    y = np.sqrt(1.0 - x * x)
    a = np.arctan2(y, x)  # intersection at angle +a (and -a)
    outer_t = np.linspace(a, 2.0 * np.pi - a, n_outer)
    outer = np.stack([np.cos(outer_t), np.sin(outer_t)], axis=1)
    b = np.arctan2(-y, x - d)  # same points relative to the cutter center
    inner_t = np.linspace(b, -b, n_inner)[1:-1]
    inner = np.stack([d + rc * np.cos(inner_t), rc * np.sin(inner_t)], axis=1)
    return np.concatenate([outer, inner], axis=0)


_UNIT = {
    "cube": _unit_cube(),
    "pentagon": _unit_pentagon(),
    "star": _unit_star(),
    "moon": _unit_moon(),
}


def unit_polygon(shape):
    """Unit-circumradius outline for a shape name, shape (V, 2)."""
    return _UNIT[shape].copy()


def block_polygon(spec, pose):
    """World-space outline of a block at pose (x, y, theta)."""
    x, y, theta = pose
    c, s = np.cos(theta), np.sin(theta)
    rot = np.array([[c, -s], [s, c]])
    return _UNIT[spec.shape] @ (spec.circumradius * rot.T) + np.array([x, y])
