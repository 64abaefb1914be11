"""Flat-shaded rasterization and ground-truth segmentation.

Both views derive from one entity-ID buffer, so renders and masks agree
pixel-for-pixel by construction. Draw order (back to front): background,
table, pole, blocks in roster order, effector.
"""
import numpy as np

from .. import _kernels
from .scene import EFFECTOR_RADIUS, POLE_RADIUS
from .shapes import PALETTE, block_polygon

# the camera sees a border of background around the unit table
VIEW_MIN = -0.08
VIEW_MAX = 1.08

ID_BACKGROUND = 0
ID_TABLE = 1
ID_POLE = 2
ID_BLOCK0 = 3  # blocks occupy ID_BLOCK0 .. ID_BLOCK0 + n - 1; effector is next


def effector_id(n_blocks):
    return ID_BLOCK0 + n_blocks


def entity_ids(state, resolution):
    """Rasterize the scene into an int32 entity-ID map of shape `resolution`."""
    h, w = int(resolution[0]), int(resolution[1])
    if h <= 0 or w <= 0:
        raise ValueError("resolution must be positive")
    n = len(state.blocks)

    kinds = []
    ids = []
    disks = []
    polys = []
    offsets = [0]

    def add_poly(verts, pid):
        kinds.append(0)
        ids.append(pid)
        disks.append((0.0, 0.0, 0.0))
        polys.append(np.asarray(verts, dtype=np.float64))
        offsets.append(offsets[-1] + len(verts))

    def add_disk(cx, cy, r, pid):
        kinds.append(1)
        ids.append(pid)
        disks.append((float(cx), float(cy), float(r)))
        offsets.append(offsets[-1])

    add_poly([(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)], ID_TABLE)
    add_disk(state.pole_pos[0], state.pole_pos[1], POLE_RADIUS, ID_POLE)
    for i in range(n):
        add_poly(block_polygon(state.blocks[i], state.block_poses[i]), ID_BLOCK0 + i)
    add_disk(state.effector_pos[0], state.effector_pos[1], EFFECTOR_RADIUS, effector_id(n))

    poly_verts = (
        np.concatenate(polys, axis=0) if polys else np.zeros((0, 2), dtype=np.float64)
    )
    sx = (VIEW_MAX - VIEW_MIN) / w
    sy = (VIEW_MAX - VIEW_MIN) / h
    return _kernels.entity_id_buffer(
        h,
        w,
        VIEW_MIN,
        VIEW_MIN,
        sx,
        sy,
        np.asarray(kinds, dtype=np.int8),
        np.asarray(ids, dtype=np.int32),
        np.ascontiguousarray(disks, dtype=np.float64),
        np.ascontiguousarray(poly_verts),
        np.asarray(offsets, dtype=np.int64),
    )


def palette_for(state):
    """uint8 color table indexed by entity ID."""
    n = len(state.blocks)
    table = np.zeros((effector_id(n) + 1, 3), dtype=np.uint8)
    table[ID_BACKGROUND] = PALETTE["background"]
    table[ID_TABLE] = PALETTE["table"]
    table[ID_POLE] = PALETTE["pole"]
    for i, b in enumerate(state.blocks):
        table[ID_BLOCK0 + i] = PALETTE[b.color]
    table[effector_id(n)] = PALETTE["effector"]
    return table


def render_u8(state, resolution):
    """8-bit RGB raster, shape (H, W, 3)."""
    ids = entity_ids(state, resolution)
    return palette_for(state)[ids]


def render(state, resolution):
    """Float RGB raster in [0, 1], shape (H, W, 3)."""
    return render_u8(state, resolution).astype(np.float32) / 255.0


def masks_from_ids(ids, n_blocks):
    """Expand an entity-ID map into the ground-truth mask dict."""
    blocks = np.stack([(ids == ID_BLOCK0 + i) for i in range(n_blocks)]) if n_blocks else \
        np.zeros((0,) + ids.shape, dtype=bool)
    return {
        "blocks": blocks.astype(np.uint8),
        "effector": (ids == effector_id(n_blocks)).astype(np.uint8),
        "pole": (ids == ID_POLE).astype(np.uint8),
        "background": ((ids == ID_BACKGROUND) | (ids == ID_TABLE)).astype(np.uint8),
    }


def ground_truth_masks(state, resolution):
    """Binary masks partitioning the image.

    Returns a dict with 'blocks' (n, H, W), 'effector', 'pole' and
    'background' (table pixels count as background). Every pixel belongs to
    exactly one entry.
    """
    return masks_from_ids(entity_ids(state, resolution), len(state.blocks))


def mask_stack(masks):
    """Stack the mask dict into (n + 3, H, W): blocks..., effector, pole, background."""
    return np.concatenate(
        [
            masks["blocks"],
            masks["effector"][None],
            masks["pole"][None],
            masks["background"][None],
        ],
        axis=0,
    )
