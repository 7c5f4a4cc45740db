"""Shared test utilities: random convex polygons and crafted meshes."""

import numpy as np

from polyds.geometry import GeometryError, Polygon
from polyds.mesh import build_topology


def random_convex_polygon(n, rng, min_sigma=0.15, max_tries=5000):
    """Strictly convex N-gon with shape regularity at least ``min_sigma``.

    Vertices sit at jittered equispaced angles with random radii, which
    keeps rejection rates low for every N.  Note the attainable sigma
    shrinks with N (a regular octagon has sigma ~ 0.28).
    """
    # Jitter shrinks with n: distortion costs much more regularity on
    # many-edged polygons (a regular octagon only has sigma ~ 0.28).
    spread, rlo = {3: (0.3, 0.4), 4: (0.3, 0.5), 5: (0.3, 0.55),
                   6: (0.2, 0.7)}.get(n, (0.15, 0.8))
    for _ in range(max_tries):
        ang = 2.0 * np.pi * (np.arange(n) + rng.uniform(0.5 - spread, 0.5 + spread, n)) / n
        rad = rng.uniform(rlo, 1.0, n)
        pts = np.column_stack([rad * np.cos(ang), rad * np.sin(ang)])
        try:
            poly = Polygon(pts)
        except GeometryError:
            continue
        if poly.shape_regularity().sigma >= min_sigma:
            return poly
    raise RuntimeError(f"no {n}-gon with sigma >= {min_sigma} in {max_tries} tries")


def near_regular_polygon(n, rng, jitter=0.05):
    """Mild random distortion of the regular N-gon."""
    while True:
        ang = 2.0 * np.pi * (np.arange(n) + rng.uniform(-jitter, jitter, n)) / n
        rad = rng.uniform(1 - jitter, 1 + jitter, n)
        try:
            return Polygon(np.column_stack([rad * np.cos(ang), rad * np.sin(ang)]))
        except GeometryError:
            continue


def interior_points(poly, rng, count):
    """Random points strictly inside the polygon (rejection sampling)."""
    lo = poly.vertices.min(axis=0)
    hi = poly.vertices.max(axis=0)
    out = []
    while len(out) < count:
        cand = rng.uniform(lo, hi, size=(4 * count, 2))
        cand = cand[poly.contains(cand, tol=-1e-9 * poly.diameter)]
        out.extend(cand.tolist())
    return np.asarray(out[:count])


def shared_edge_pair(rng):
    """Two convex polygons sharing the edge from (1,0) to (1,1)."""
    left = Polygon([(0, 0), (1, 0), (1, 1), (0, 1)])
    x = rng.uniform(1.6, 2.2)
    right = Polygon([(1, 0), (x, rng.uniform(-0.2, 0.2)),
                     (x + 0.2, rng.uniform(0.9, 1.3)), (1, 1)])
    return left, right


def sliver_mesh(eps_rel=1e-3):
    """2x2 quad mesh with the center vertex split into a short diagonal edge.

    The short edge has length ``eps_rel`` times the largest cell diameter;
    two cells become pentagons containing the sliver.
    """
    h = 0.5 * 2**0.5
    eps = eps_rel * h
    d = eps / (2.0 * 2**0.5)
    v1 = (0.5 - d, 0.5 - d)
    v2 = (0.5 + d, 0.5 + d)
    verts = [(0, 0), (0.5, 0), (1, 0), (1, 0.5), (1, 1),
             (0.5, 1), (0, 1), (0, 0.5), v1, v2]
    cells = [[0, 1, 8, 7], [1, 2, 3, 9, 8], [7, 8, 9, 5, 6], [9, 3, 4, 5]]
    return build_topology(verts, cells)


def truncated_hexagon(eps=1e-6):
    """Single-cell mesh: a pentagon with one corner cut into a tiny edge."""
    base = np.array([(0, 0), (1, 0), (1.5, 0.9), (0.9, 1.7), (0.0, 1.6)])
    d2 = base[2] - base[3]
    d4 = base[4] - base[3]
    d2 /= np.linalg.norm(d2)
    d4 /= np.linalg.norm(d4)
    verts = np.vstack([base[:3], base[3] + eps * d2, base[3] + eps * d4, base[4:]])
    return build_topology(verts, [[0, 1, 2, 3, 4, 5]])
