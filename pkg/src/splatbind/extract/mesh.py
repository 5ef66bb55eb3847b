"""Isosurface extraction and vertex coloring for surfel clouds."""

import logging

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree
from skimage.measure import marching_cubes

from ..core.types import ColoredMesh, SurfelCloud2D, sigmoid
from .decimate import decimate
from .grid import ISO_LEVEL, IndicatorGrid, build_indicator_grid
from .points import check_point_set, surfels_to_points

logger = logging.getLogger(__name__)

COLOR_NEIGHBORS = 8
TARGET_FACES = 20000


def signed_volume(vertices: np.ndarray, faces: np.ndarray) -> float:
    """Signed volume of a triangle soup via the divergence theorem.

    Positive when faces wind counterclockwise seen from outside a closed
    shape, negative for inside-out orientation.
    """
    v = np.asarray(vertices, dtype=np.float64)[np.asarray(faces)]
    return float(np.einsum("ij,ij->", v[:, 0],
                           np.cross(v[:, 1], v[:, 2])) / 6.0)


def largest_component(vertices: np.ndarray,
                      faces: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Keep only the connected component with the most faces.

    Marching cubes on a noisy indicator field can emit small floater
    shells next to the main surface; everything but the biggest piece
    is dropped and vertices are reindexed densely.
    """
    faces = np.asarray(faces, dtype=np.int64)
    if len(faces) == 0:
        return np.asarray(vertices, dtype=np.float64), faces
    n = len(vertices)
    ii = np.concatenate([faces[:, 0], faces[:, 1], faces[:, 2]])
    jj = np.concatenate([faces[:, 1], faces[:, 2], faces[:, 0]])
    adj = coo_matrix((np.ones(len(ii)), (ii, jj)), shape=(n, n))
    _, labels = connected_components(adj, directed=False)
    # all three corners share a label, so the first corner speaks for the face
    face_labels = labels[faces[:, 0]]
    counts = np.bincount(face_labels)
    keep = faces[face_labels == np.argmax(counts)]
    used = np.unique(keep)
    remap = np.full(n, -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    return np.asarray(vertices, dtype=np.float64)[used], remap[keep]


def color_vertices(vertices: np.ndarray, surfels: SurfelCloud2D,
                   k: int = COLOR_NEIGHBORS) -> np.ndarray:
    """Opacity-weighted Gaussian average of nearby surfel colors.

    Bandwidth adapts per vertex to the median nearest-neighbor spacing
    of its k nearest surfels, i.e. the local sampling density of the
    cloud, so a surfel sitting on the vertex dominates ones a few
    spacings out.  A vertex whose every neighbor weight vanishes falls
    back to its single nearest surfel.
    """
    vertices = np.asarray(vertices, dtype=np.float64)
    if len(surfels) == 0:
        raise ValueError("cannot color vertices from an empty surfel cloud")
    k = min(k, len(surfels))
    tree = cKDTree(surfels.positions)
    if len(surfels) > 1:
        self_dist, _ = tree.query(surfels.positions, k=2)
        spacing = self_dist[:, 1]
    else:
        spacing = np.ones(1)
    dist, idx = tree.query(vertices, k=k)
    if k == 1:
        dist = dist[:, None]
        idx = idx[:, None]
    bandwidth = np.median(spacing[idx], axis=1, keepdims=True)
    bandwidth = np.maximum(bandwidth, 1e-12)
    opacity = sigmoid(surfels.opacities)[idx]
    w = opacity * np.exp(-0.5 * (dist / bandwidth) ** 2)
    total = w.sum(axis=1)
    colors = np.einsum("vk,vkc->vc", w, surfels.colors[idx])
    ok = total > 1e-300
    colors[ok] /= total[ok, None]
    colors[~ok] = surfels.colors[idx[~ok, 0]]
    return np.clip(colors, 0.0, 1.0)


def grid_to_mesh(grid: IndicatorGrid) -> tuple[np.ndarray, np.ndarray]:
    """Run marching cubes on an indicator grid, in world coordinates.

    Faces are reordered so that a field that is high inside yields
    outward-facing winding (positive signed volume).
    """
    verts, faces, _, _ = marching_cubes(
        grid.field, level=grid.iso, spacing=(grid.spacing,) * 3)
    return verts + grid.origin, faces[:, ::-1].astype(np.int64)


def extract_mesh(surfels: SurfelCloud2D, resolution: int = 128,
                 opacity_threshold: float = 0.05,
                 target_faces: int = TARGET_FACES,
                 screen_weight: float = None) -> ColoredMesh:
    """Export a surfel cloud as a colored triangle mesh.

    Retained surfel centers and their normals drive a screened indicator
    solve on a regular grid; the iso-0.5 surface is extracted, reduced
    to its largest connected piece, decimated to the face budget, and
    colored from the surrounding surfels.
    """
    points = surfels_to_points(surfels, opacity_threshold=opacity_threshold)
    check_point_set(points.points)
    kwargs = {} if screen_weight is None else {"screen_weight": screen_weight}
    grid = build_indicator_grid(points, resolution=resolution, **kwargs)
    vertices, faces = grid_to_mesh(grid)
    if len(faces) == 0:
        raise ValueError(
            f"indicator field never crosses iso level {grid.iso}")
    vertices, faces = largest_component(vertices, faces)
    if len(faces) > target_faces:
        vertices, faces = decimate(vertices, faces, target_faces)
    volume = signed_volume(vertices, faces)
    if volume < 0:
        # deliberately not auto-flipped: a negative volume is the caller's
        # signal that the input normals pointed inward
        logger.warning("extracted mesh has negative signed volume %.4g, "
                       "input normals likely point inward", volume)
    colors = color_vertices(vertices, surfels)
    return ColoredMesh(vertices, faces, colors)
