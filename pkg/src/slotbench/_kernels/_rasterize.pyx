# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled entity-ID rasterizer.

Paints primitives back-to-front into an int32 ID buffer. Must stay
arithmetically identical to ``slotbench._kernels.fallback`` — the pure
NumPy twin — because dataset bytes are part of the determinism contract.
"""
import numpy as np

cimport numpy as cnp

cnp.import_array()


def entity_id_buffer(
    int height,
    int width,
    double x0,
    double y0,
    double sx,
    double sy,
    cnp.int8_t[::1] kinds,
    cnp.int32_t[::1] ids,
    cnp.float64_t[:, ::1] disk_params,
    cnp.float64_t[:, ::1] poly_verts,
    cnp.int64_t[::1] poly_offsets,
):
    """Rasterize primitives (0=polygon, 1=disk) in draw order into an ID map.

    Pixel (i, j) samples the world point (x0 + (j+0.5)*sx, y0 + (i+0.5)*sy).
    Polygons use the even-odd rule on vertex slices poly_verts[o_k:o_{k+1}].
    Background is ID 0.
    """
    out_arr = np.zeros((height, width), dtype=np.int32)
    cdef cnp.int32_t[:, ::1] out = out_arr
    cdef Py_ssize_t n_prims = kinds.shape[0]
    cdef Py_ssize_t p, i, j, v, v0, v1
    cdef int i_lo, i_hi, j_lo, j_hi
    cdef double bx0, bx1, by0, by1, cx, cy, r, px, py, d2
    cdef double xa, ya, xb, yb
    cdef bint inside
    cdef cnp.int32_t pid

    for p in range(n_prims):
        pid = ids[p]
        if kinds[p] == 1:
            cx = disk_params[p, 0]
            cy = disk_params[p, 1]
            r = disk_params[p, 2]
            bx0 = cx - r
            bx1 = cx + r
            by0 = cy - r
            by1 = cy + r
        else:
            v0 = poly_offsets[p]
            v1 = poly_offsets[p + 1]
            bx0 = bx1 = poly_verts[v0, 0]
            by0 = by1 = poly_verts[v0, 1]
            for v in range(v0 + 1, v1):
                if poly_verts[v, 0] < bx0:
                    bx0 = poly_verts[v, 0]
                if poly_verts[v, 0] > bx1:
                    bx1 = poly_verts[v, 0]
                if poly_verts[v, 1] < by0:
                    by0 = poly_verts[v, 1]
                if poly_verts[v, 1] > by1:
                    by1 = poly_verts[v, 1]

        # conservative pixel bounds (one pixel of slack on each side)
        j_lo = <int>((bx0 - x0) / sx - 0.5) - 1
        j_hi = <int>((bx1 - x0) / sx - 0.5) + 2
        i_lo = <int>((by0 - y0) / sy - 0.5) - 1
        i_hi = <int>((by1 - y0) / sy - 0.5) + 2
        if j_lo < 0:
            j_lo = 0
        if i_lo < 0:
            i_lo = 0
        if j_hi > width - 1:
            j_hi = width - 1
        if i_hi > height - 1:
            i_hi = height - 1

        if kinds[p] == 1:
            for i in range(i_lo, i_hi + 1):
                py = y0 + (i + 0.5) * sy
                for j in range(j_lo, j_hi + 1):
                    px = x0 + (j + 0.5) * sx
                    d2 = (px - cx) * (px - cx) + (py - cy) * (py - cy)
                    if d2 <= r * r:
                        out[i, j] = pid
        else:
            v0 = poly_offsets[p]
            v1 = poly_offsets[p + 1]
            for i in range(i_lo, i_hi + 1):
                py = y0 + (i + 0.5) * sy
                for j in range(j_lo, j_hi + 1):
                    px = x0 + (j + 0.5) * sx
                    inside = False
                    xb = poly_verts[v1 - 1, 0]
                    yb = poly_verts[v1 - 1, 1]
                    for v in range(v0, v1):
                        xa = poly_verts[v, 0]
                        ya = poly_verts[v, 1]
                        if (ya > py) != (yb > py):
                            if px < (xb - xa) * (py - ya) / (yb - ya) + xa:
                                inside = not inside
                        xb = xa
                        yb = ya
                    if inside:
                        out[i, j] = pid
    return out_arr
