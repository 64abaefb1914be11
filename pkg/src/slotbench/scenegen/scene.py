"""Scene state and seeded rejection sampling of non-overlapping layouts."""
from dataclasses import dataclass, field

import numpy as np

from . import geometry
from .shapes import BlockSpec, block_polygon, roster

EFFECTOR_RADIUS = 0.03
POLE_RADIUS = 0.035
MAX_STEP = 0.02
SUCCESS_RADIUS = 0.05
TABLE_EXTENT = (1.0, 1.0)

# clearance kept between entities at sample time
_SAMPLE_GAP = 0.01
_MAX_ATTEMPTS = 10_000


class ScenePlacementError(RuntimeError):
    """Raised when rejection sampling cannot place all entities (over-dense)."""


@dataclass
class SceneState:
    """Poses of all entities on the unit table.

    block_poses rows are (x, y, theta); positions live in [0, 1]^2.
    """

    blocks: list  # list[BlockSpec], fixed per episode
    block_poses: np.ndarray  # (n, 3) float64
    effector_pos: np.ndarray  # (2,) float64
    pole_pos: np.ndarray  # (2,) float64
    table_extent: tuple = TABLE_EXTENT

    def copy(self):
        return SceneState(
            blocks=list(self.blocks),
            block_poses=self.block_poses.copy(),
            effector_pos=self.effector_pos.copy(),
            pole_pos=self.pole_pos.copy(),
            table_extent=self.table_extent,
        )

    def block_hull(self, i):
        return geometry.convex_hull(block_polygon(self.blocks[i], self.block_poses[i]))

    def block_hulls(self):
        return [self.block_hull(i) for i in range(len(self.blocks))]

    def to_json_dict(self):
        return {
            "blocks": [
                {"shape": b.shape, "color": b.color, "circumradius": b.circumradius}
                for b in self.blocks
            ],
            "block_poses": self.block_poses.tolist(),
            "effector_pos": self.effector_pos.tolist(),
            "pole_pos": self.pole_pos.tolist(),
        }

    @classmethod
    def from_json_dict(cls, d):
        return cls(
            blocks=[BlockSpec(b["shape"], b["color"], b["circumradius"]) for b in d["blocks"]],
            block_poses=np.array(d["block_poses"], dtype=np.float64).reshape(-1, 3),
            effector_pos=np.array(d["effector_pos"], dtype=np.float64),
            pole_pos=np.array(d["pole_pos"], dtype=np.float64),
        )


def sample_scene(rng_seed, n_blocks, circumradius=0.06):
    """Rejection-sample a non-overlapping scene; identical seed, identical scene."""
    rng = np.random.default_rng(rng_seed)
    specs = roster(n_blocks, circumradius)

    poses = []
    hulls = []
    margin = circumradius + _SAMPLE_GAP
    for spec in specs:
        for attempt in range(_MAX_ATTEMPTS):
            x = rng.uniform(margin, 1.0 - margin)
            y = rng.uniform(margin, 1.0 - margin)
            theta = rng.uniform(0.0, 2.0 * np.pi)
            hull = geometry.convex_hull(block_polygon(spec, (x, y, theta)))
            grown = _grow(hull, _SAMPLE_GAP)
            if all(not geometry.polygons_overlap(grown, h) for h in hulls):
                poses.append((x, y, theta))
                hulls.append(hull)
                break
        else:
            raise ScenePlacementError(
                f"could not place block {spec.shape}/{spec.color} after {_MAX_ATTEMPTS} attempts"
            )

    e_margin = EFFECTOR_RADIUS + _SAMPLE_GAP
    for attempt in range(_MAX_ATTEMPTS):
        ex = rng.uniform(e_margin, 1.0 - e_margin)
        ey = rng.uniform(e_margin, 1.0 - e_margin)
        if all(
            not geometry.disk_polygon_overlap((ex, ey), EFFECTOR_RADIUS + _SAMPLE_GAP, h)
            for h in hulls
        ):
            break
    else:
        raise ScenePlacementError("could not place effector")

    px = rng.uniform(0.1, 0.9)
    py = rng.uniform(0.1, 0.9)

    return SceneState(
        blocks=specs,
        block_poses=np.array(poses, dtype=np.float64).reshape(-1, 3),
        effector_pos=np.array([ex, ey]),
        pole_pos=np.array([px, py]),
    )


def _grow(hull, pad):
    centroid = geometry.polygon_centroid(hull)
    offs = hull - centroid
    norms = np.hypot(offs[:, 0], offs[:, 1])
    scale = (norms + pad) / np.maximum(norms, 1e-12)
    return centroid + offs * scale[:, None]
