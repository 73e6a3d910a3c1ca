"""Batch ray-triangle intersection for mesh scanning.

Rays are tested against every triangle of every mesh with a vectorized
Moller-Trumbore intersection, after a bounding-box slab test discards
rays that cannot hit a mesh at all.  The nearest hit per ray wins; ties
go to the lower mesh id, then the lower triangle id.  Barycentric
coordinates of each hit are kept so the same surface point can be
evaluated on a deformed copy of the mesh.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Intersections closer than this along the ray are ignored (self-hits).
MIN_HIT_DISTANCE = 1e-9
# Determinant magnitudes below this mark a ray parallel to the triangle.
PARALLEL_EPS = 1e-12
# Rays processed per chunk to bound the rays x triangles workspace.
_CHUNK = 512


@dataclass(frozen=True)
class RayHits:
    """Per-ray intersection results.

    Misses have ``mesh_ids`` and ``triangle_ids`` of -1 and infinite
    ``distances``.  ``barycentric`` holds (u, v) with the hit point equal
    to (1-u-v)*v0 + u*v1 + v*v2 of the hit triangle.
    """

    distances: np.ndarray
    mesh_ids: np.ndarray
    triangle_ids: np.ndarray
    barycentric: np.ndarray

    @property
    def hit_mask(self) -> np.ndarray:
        return self.mesh_ids >= 0

    def points(self, origin: np.ndarray, directions: np.ndarray) -> np.ndarray:
        """World positions of the hits (rows for misses are undefined)."""
        return origin + self.distances[:, None] * directions


def _aabb_hits(
    origin: np.ndarray,
    directions: np.ndarray,
    lower: np.ndarray,
    upper: np.ndarray,
    max_range: float,
) -> np.ndarray:
    """Mask of rays whose segment [0, max_range] crosses the box."""
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / directions
        t_low = (lower - origin) * inv
        t_high = (upper - origin) * inv
    near = np.minimum(t_low, t_high)
    far = np.maximum(t_low, t_high)
    # A zero direction component outside the slab yields NaN in both
    # bounds; treating NaN as "no constraint" would be wrong, so replace
    # entry/exit with +-inf where origin is outside and direction is zero.
    zero = directions == 0.0
    outside = (origin < lower) | (origin > upper)
    reject = (zero & outside).any(axis=1)
    near = np.where(np.isnan(near), -np.inf, near)
    far = np.where(np.isnan(far), np.inf, far)
    t_enter = near.max(axis=1)
    t_exit = far.min(axis=1)
    return ~reject & (t_exit >= np.maximum(t_enter, 0.0)) & (t_enter <= max_range)


def _intersect_mesh(
    origin: np.ndarray,
    directions: np.ndarray,
    vertices: np.ndarray,
    faces: np.ndarray,
    max_range: float,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Nearest triangle hit per ray for one mesh.

    Returns (distances, triangle ids, barycentric (u, v)); misses carry
    inf distance and triangle id -1.
    """
    n = len(directions)
    best_t = np.full(n, np.inf)
    best_tri = np.full(n, -1, dtype=np.int64)
    best_bary = np.zeros((n, 2))

    v0 = vertices[faces[:, 0]]
    edge1 = vertices[faces[:, 1]] - v0
    edge2 = vertices[faces[:, 2]] - v0
    # The origin is shared by every ray, so these are per-triangle only.
    svec = origin - v0
    qvec = np.cross(svec, edge1)
    t_num = np.einsum("tj,tj->t", edge2, qvec)

    candidates = np.flatnonzero(
        _aabb_hits(
            origin, directions, vertices.min(axis=0), vertices.max(axis=0),
            max_range,
        )
    )
    for start in range(0, len(candidates), _CHUNK):
        rows = candidates[start : start + _CHUNK]
        d = directions[rows]
        pvec = np.cross(d[:, None, :], edge2[None, :, :])
        det = np.einsum("tj,rtj->rt", edge1, pvec)
        with np.errstate(divide="ignore", invalid="ignore"):
            inv_det = 1.0 / det
            u = np.einsum("tj,rtj->rt", svec, pvec) * inv_det
            v = (d @ qvec.T) * inv_det
            t = t_num[None, :] * inv_det
        valid = (
            (np.abs(det) > PARALLEL_EPS)
            & (u >= 0.0)
            & (v >= 0.0)
            & (u + v <= 1.0)
            & (t >= MIN_HIT_DISTANCE)
            & (t <= max_range)
        )
        t = np.where(valid, t, np.inf)
        tri = t.argmin(axis=1)
        t_min = t[np.arange(len(rows)), tri]
        hit = np.isfinite(t_min)
        hit_rows = rows[hit]
        best_t[hit_rows] = t_min[hit]
        best_tri[hit_rows] = tri[hit]
        picked = np.flatnonzero(hit)
        best_bary[hit_rows, 0] = u[picked, tri[hit]]
        best_bary[hit_rows, 1] = v[picked, tri[hit]]
    return best_t, best_tri, best_bary


def raycast(
    origin: np.ndarray,
    directions: np.ndarray,
    meshes: list[tuple[np.ndarray, np.ndarray]],
    max_range: float,
) -> RayHits:
    """Nearest intersection of each ray with a collection of meshes.

    Parameters
    ----------
    origin : array (3,)
        Common ray origin (world frame).
    directions : array (N, 3)
        Unit ray directions.
    meshes : list of (vertices, faces)
        Each mesh as float vertices (V, 3) and integer faces (T, 3).
    max_range : float
        Hits beyond this distance are discarded.

    Returns
    -------
    RayHits
        Nearest hit per ray; occluded surfaces never win.
    """
    origin = np.asarray(origin, dtype=float).reshape(3)
    directions = np.asarray(directions, dtype=float)
    if directions.ndim != 2 or directions.shape[1] != 3:
        raise ValueError(
            f"directions must have shape (N, 3), got {directions.shape}"
        )
    if max_range <= 0.0:
        raise ValueError("max_range must be positive")
    n = len(directions)
    distances = np.full(n, np.inf)
    mesh_ids = np.full(n, -1, dtype=np.int64)
    triangle_ids = np.full(n, -1, dtype=np.int64)
    barycentric = np.zeros((n, 2))
    for mesh_id, (vertices, faces) in enumerate(meshes):
        t, tri, bary = _intersect_mesh(
            origin, directions, np.asarray(vertices, dtype=float),
            np.asarray(faces), max_range,
        )
        closer = t < distances
        distances[closer] = t[closer]
        mesh_ids[closer] = mesh_id
        triangle_ids[closer] = tri[closer]
        barycentric[closer] = bary[closer]
    return RayHits(distances, mesh_ids, triangle_ids, barycentric)


def barycentric_points(
    vertices: np.ndarray,
    faces: np.ndarray,
    triangle_ids: np.ndarray,
    barycentric: np.ndarray,
) -> np.ndarray:
    """Evaluate stored barycentric coordinates on a (deformed) mesh."""
    corners = vertices[faces[triangle_ids]]
    u = barycentric[:, 0:1]
    v = barycentric[:, 1:2]
    return (1.0 - u - v) * corners[:, 0] + u * corners[:, 1] + v * corners[:, 2]
