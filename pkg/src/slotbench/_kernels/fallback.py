"""Pure NumPy twin of the compiled rasterizer.

Every float expression mirrors ``_rasterize.pyx`` term by term; both run in
IEEE double, so the two backends produce byte-identical ID buffers. Keep
them in lockstep when touching either one (tests/test_kernels.py enforces
equality on random scenes).
"""
import numpy as np


def entity_id_buffer(height, width, x0, y0, sx, sy, kinds, ids, disk_params,
                     poly_verts, poly_offsets):
    """Rasterize primitives (0=polygon, 1=disk) in draw order into an ID map."""
    out = np.zeros((height, width), dtype=np.int32)
    for p in range(len(kinds)):
        pid = ids[p]
        if kinds[p] == 1:
            cx, cy, r = disk_params[p]
            bx0, bx1 = cx - r, cx + r
            by0, by1 = cy - r, cy + r
        else:
            verts = poly_verts[poly_offsets[p]:poly_offsets[p + 1]]
            bx0, by0 = verts.min(axis=0)
            bx1, by1 = verts.max(axis=0)

        j_lo = max(0, int((bx0 - x0) / sx - 0.5) - 1)
        j_hi = min(width - 1, int((bx1 - x0) / sx - 0.5) + 2)
        i_lo = max(0, int((by0 - y0) / sy - 0.5) - 1)
        i_hi = min(height - 1, int((by1 - y0) / sy - 0.5) + 2)
        if j_lo > j_hi or i_lo > i_hi:
            continue

        jj = np.arange(j_lo, j_hi + 1)
        ii = np.arange(i_lo, i_hi + 1)
        px = x0 + (jj + 0.5) * sx
        py = y0 + (ii + 0.5) * sy
        pxg, pyg = np.meshgrid(px, py)

        if kinds[p] == 1:
            d2 = (pxg - cx) * (pxg - cx) + (pyg - cy) * (pyg - cy)
            hit = d2 <= r * r
        else:
            hit = np.zeros(pxg.shape, dtype=bool)
            xb, yb = verts[-1]
            for xa, ya in verts:
                crosses = (ya > pyg) != (yb > pyg)
                with np.errstate(divide="ignore", invalid="ignore"):
                    xcut = (xb - xa) * (pyg - ya) / (yb - ya) + xa
                hit ^= crosses & (pxg < xcut)
                xb, yb = xa, ya

        region = out[i_lo:i_hi + 1, j_lo:j_hi + 1]
        region[hit] = pid
    return out
