"""Convex collision geometry: hulls, overlap tests, minimal translation vectors.

All collision queries run on convex hulls in float64. Vector results follow
the convention "translate the *polygon* (or polygon B) by the returned vector
to resolve the overlap".
"""
import numpy as np


def cross2(u, v):
    """z-component of the 2D cross product."""
    return u[0] * v[1] - u[1] * v[0]


def convex_hull(points):
    """Andrew monotone chain; returns hull vertices in CCW order, shape (H, 2)."""
    pts = np.unique(np.asarray(points, dtype=np.float64), axis=0)
    if len(pts) <= 2:
        return pts
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]

    def half(seq):
        out = []
        for p in seq:
            while len(out) >= 2 and cross2(out[-1] - out[-2], p - out[-2]) <= 0:
                out.pop()
            out.append(p)
        return out

    lower = half(pts)
    upper = half(pts[::-1])
    return np.array(lower[:-1] + upper[:-1])


def polygon_centroid(verts):
    return np.asarray(verts, dtype=np.float64).mean(axis=0)


def _edges(verts):
    return np.roll(verts, -1, axis=0) - verts


def _project(verts, axis):
    d = verts @ axis
    return d.min(), d.max()


def polygons_mtv(hull_a, hull_b):
    """Minimal translation moving hull_b out of hull_a (SAT), or None if apart.

    Both inputs must be convex and CCW. Touching (zero overlap) counts as
    separated. Each axis offers two signed resolutions (push b up or down the
    axis); the global minimum over all candidates is returned.
    """
    best_depth = np.inf
    best_axis = None
    for verts in (hull_a, hull_b):
        for e in _edges(verts):
            n = np.array([-e[1], e[0]])
            norm = np.hypot(n[0], n[1])
            if norm == 0.0:
                continue
            n /= norm
            a_lo, a_hi = _project(hull_a, n)
            b_lo, b_hi = _project(hull_b, n)
            push_up = a_hi - b_lo
            push_down = b_hi - a_lo
            if push_up <= 0.0 or push_down <= 0.0:
                return None
            if push_up <= push_down:
                depth, axis = push_up, n
            else:
                depth, axis = push_down, -n
            if depth < best_depth:
                best_depth = depth
                best_axis = axis
    return best_depth * best_axis


def polygons_overlap(hull_a, hull_b):
    return polygons_mtv(hull_a, hull_b) is not None


def closest_point_on_hull(point, hull):
    """Closest boundary point to `point`, plus whether `point` is inside."""
    p = np.asarray(point, dtype=np.float64)
    best_d2 = np.inf
    best_q = None
    inside = True
    n = len(hull)
    for i in range(n):
        a = hull[i]
        b = hull[(i + 1) % n]
        e = b - a
        if cross2(e, p - a) < 0.0:
            inside = False
        t = np.clip((p - a) @ e / max(e @ e, 1e-300), 0.0, 1.0)
        q = a + t * e
        d2 = (p - q) @ (p - q)
        if d2 < best_d2:
            best_d2 = d2
            best_q = q
    return best_q, inside


def disk_polygon_mtv(center, radius, hull):
    """Minimal translation moving the *polygon* out of the disk, or None.

    A disk center inside the hull pushes the hull outward past the nearest
    edge; outside, the push is along the center-to-closest-point direction
    with depth radius - distance.
    """
    c = np.asarray(center, dtype=np.float64)
    q, inside = closest_point_on_hull(c, hull)
    delta = q - c
    dist = np.hypot(delta[0], delta[1])
    if inside:
        if dist == 0.0:
            # dead center on the boundary-degenerate case: push along +x
            return np.array([radius, 0.0])
        return (radius + dist) * (-delta / dist)
    if dist >= radius:
        return None
    if dist == 0.0:
        return np.array([radius, 0.0])
    return (radius - dist) * (delta / dist)


def disk_polygon_overlap(center, radius, hull):
    return disk_polygon_mtv(center, radius, hull) is not None


def point_segment_distance(point, seg_a, seg_b):
    p = np.asarray(point, dtype=np.float64)
    a = np.asarray(seg_a, dtype=np.float64)
    b = np.asarray(seg_b, dtype=np.float64)
    e = b - a
    t = np.clip((p - a) @ e / max(e @ e, 1e-300), 0.0, 1.0)
    q = a + t * e
    return float(np.hypot(*(p - q)))
