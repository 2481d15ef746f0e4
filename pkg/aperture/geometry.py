#!/usr/bin/env python3
"""
geometry.py - Aperture shapes, triangulations and degree-of-freedom tables

The aperture lies in the plane r3 = 0. Meshes are conforming triangulations
with counter-clockwise cells; edges carry a global orientation from the lower
to the higher vertex index. Local edge a of a cell is the edge opposite its
vertex a, and its relative sign is +1 when the counter-clockwise traversal of
the cell runs along the global orientation.
"""

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
import shapely
from scipy.spatial import Delaunay
from shapely.geometry import LineString, Polygon

from .errors import MeshError

SHAPES = ("disc", "rectangle", "polygon")


@dataclass(frozen=True)
class ApertureSpec:
    """Aperture shape in the screen plane. Use the disc/rectangle/polygon constructors."""
    shape: str
    radius: Optional[float] = None
    half_widths: Optional[Tuple[float, float]] = None
    vertices: Optional[Tuple[Tuple[float, float], ...]] = None

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise MeshError(f"Unknown aperture shape '{self.shape}'. Available: {list(SHAPES)}")
        if self.shape == "disc":
            if self.radius is None or not self.radius > 0:
                raise MeshError(f"Disc radius must be positive, got {self.radius}")
        elif self.shape == "rectangle":
            if self.half_widths is None or len(self.half_widths) != 2 or min(self.half_widths) <= 0:
                raise MeshError(f"Rectangle half-widths must be two positive lengths, got {self.half_widths}")
        else:
            self._validate_polygon()

    def _validate_polygon(self):
        verts = np.asarray(self.vertices if self.vertices is not None else [], dtype=float)
        if verts.ndim != 2 or verts.shape[0] < 3 or verts.shape[1] != 2:
            raise MeshError("Polygon needs at least 3 vertices given as (x, y) pairs")
        scale = max(float(np.ptp(verts[:, 0])), float(np.ptp(verts[:, 1])), 1e-300)
        diffs = np.linalg.norm(verts[:, None, :] - verts[None, :, :], axis=-1)
        np.fill_diagonal(diffs, np.inf)
        if np.any(diffs <= 1e-12 * scale):
            raise MeshError("Polygon has a repeated vertex")
        poly = Polygon(verts)
        if not poly.is_valid or not poly.exterior.is_simple:
            raise MeshError("Polygon is not simple (self-intersecting boundary)")
        if poly.area <= 1e-14 * scale ** 2:
            raise MeshError("Polygon has zero area")

    @classmethod
    def disc(cls, radius: float) -> 'ApertureSpec':
        return cls(shape="disc", radius=float(radius))

    @classmethod
    def rectangle(cls, half_width_x: float, half_width_y: float) -> 'ApertureSpec':
        return cls(shape="rectangle", half_widths=(float(half_width_x), float(half_width_y)))

    @classmethod
    def polygon(cls, vertices: Sequence[Sequence[float]]) -> 'ApertureSpec':
        return cls(shape="polygon", vertices=tuple((float(x), float(y)) for x, y in vertices))

    def area(self) -> float:
        """Analytic area of the aperture."""
        if self.shape == "disc":
            return math.pi * self.radius ** 2
        if self.shape == "rectangle":
            return 4.0 * self.half_widths[0] * self.half_widths[1]
        return float(Polygon(self.vertices).area)

    def diameter(self) -> float:
        if self.shape == "disc":
            return 2.0 * self.radius
        if self.shape == "rectangle":
            return 2.0 * math.hypot(*self.half_widths)
        verts = np.asarray(self.vertices)
        return float(np.max(np.linalg.norm(verts[:, None] - verts[None, :], axis=-1)))

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Mask of in-plane points lying strictly inside the aperture."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        x, y = points[:, 0], points[:, 1]
        if self.shape == "disc":
            return x ** 2 + y ** 2 < self.radius ** 2
        if self.shape == "rectangle":
            a, b = self.half_widths
            return (np.abs(x) < a) & (np.abs(y) < b)
        return shapely.contains_xy(Polygon(self.vertices), x, y)

    def to_dict(self) -> Dict:
        data = {"shape": self.shape}
        if self.shape == "disc":
            data["radius"] = self.radius
        elif self.shape == "rectangle":
            data["half_widths"] = list(self.half_widths)
        else:
            data["vertices"] = [list(v) for v in self.vertices]
        return data


@dataclass(eq=False)
class ApertureMesh:
    """
    Conforming triangulation of an aperture.

    Only vertices, cells and the requested mesh parameter are stored by the
    caller; every derived table is computed once in __post_init__.
    """
    vertices: np.ndarray
    cells: np.ndarray
    h: float
    spec: Optional[ApertureSpec] = None
    min_angle_deg: float = 0.0

    areas: np.ndarray = field(init=False, repr=False)
    edges: np.ndarray = field(init=False, repr=False)
    cell_edges: np.ndarray = field(init=False, repr=False)
    cell_edge_signs: np.ndarray = field(init=False, repr=False)
    edge_cells: np.ndarray = field(init=False, repr=False)
    edge_lengths: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=float)
        self.cells = np.ascontiguousarray(self.cells, dtype=np.int64)
        if self.cells.ndim != 2 or self.cells.shape[1] != 3 or len(self.cells) == 0:
            raise MeshError("Mesh needs at least one triangle given as vertex triples")
        if self.cells.min() < 0 or self.cells.max() >= len(self.vertices):
            raise MeshError("Cell references a vertex index out of range")

        self.areas = _signed_areas(self.vertices, self.cells)
        if np.any(self.areas <= 0.0):
            bad = int(np.sum(self.areas <= 0.0))
            raise MeshError(f"{bad} cells have non-positive area (cells must be counter-clockwise)")

        self._build_edges()
        angle = self.min_angle()
        if angle < self.min_angle_deg:
            raise MeshError(f"Minimum angle {angle:.2f} deg is below the threshold {self.min_angle_deg:.2f} deg")

    def _build_edges(self):
        c = self.cells
        # local edge a joins vertices a+1 -> a+2 in counter-clockwise order
        starts = c[:, [1, 2, 0]]
        ends = c[:, [2, 0, 1]]
        low = np.minimum(starts, ends)
        high = np.maximum(starts, ends)
        keys = np.stack([low.ravel(), high.ravel()], axis=1)
        edges, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
        inverse = np.asarray(inverse).ravel()
        if np.any(counts > 2):
            raise MeshError("Non-manifold mesh: an edge is shared by more than two cells")

        self.edges = edges
        self.cell_edges = inverse.reshape(-1, 3)
        self.cell_edge_signs = np.where(starts < ends, 1, -1).astype(np.int64)

        edge_cells = -np.ones((len(edges), 2), dtype=np.int64)
        flat_cells = np.repeat(np.arange(len(c)), 3)
        order = np.argsort(inverse, kind="stable")
        sorted_edges = inverse[order]
        first = np.ones(len(order), dtype=bool)
        first[1:] = sorted_edges[1:] != sorted_edges[:-1]
        edge_cells[sorted_edges[first], 0] = flat_cells[order[first]]
        edge_cells[sorted_edges[~first], 1] = flat_cells[order[~first]]
        self.edge_cells = edge_cells

        interior = edge_cells[:, 1] >= 0
        signs = self.cell_edge_signs.ravel()
        sign_sum = np.zeros(len(edges), dtype=np.int64)
        np.add.at(sign_sum, inverse, signs)
        if np.any(sign_sum[interior] != 0):
            raise MeshError("Inconsistent orientation: an interior edge is not traversed in opposite directions")

        self.edge_lengths = np.linalg.norm(self.vertices[edges[:, 1]] - self.vertices[edges[:, 0]], axis=1)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def boundary_edge_mask(self) -> np.ndarray:
        return self.edge_cells[:, 1] < 0

    @property
    def boundary_vertex_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_vertices, dtype=bool)
        mask[self.edges[self.boundary_edge_mask].ravel()] = True
        return mask

    @property
    def triangles(self) -> np.ndarray:
        """Vertex coordinates per cell, shape (n_cells, 3, 2)."""
        return self.vertices[self.cells]

    @property
    def centroids(self) -> np.ndarray:
        return self.triangles.mean(axis=1)

    @property
    def diameters(self) -> np.ndarray:
        """Longest edge of each cell."""
        return self.edge_lengths[self.cell_edges].max(axis=1)

    @property
    def h_max(self) -> float:
        return float(self.edge_lengths.max())

    @property
    def h_min(self) -> float:
        return float(self.edge_lengths.min())

    def total_area(self) -> float:
        return float(np.sum(self.areas))

    def extent(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def diameter(self) -> float:
        lo, hi = self.extent()
        return float(np.linalg.norm(hi - lo))

    def min_angle(self) -> float:
        """Smallest interior angle over all cells, in degrees."""
        tri = self.triangles
        angles = []
        for a in range(3):
            u = tri[:, (a + 1) % 3] - tri[:, a]
            v = tri[:, (a + 2) % 3] - tri[:, a]
            cos = np.sum(u * v, axis=1) / (np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1))
            angles.append(np.degrees(np.arccos(np.clip(cos, -1.0, 1.0))))
        return float(np.min(angles))

    def cell_edge_incidence(self) -> sp.csr_matrix:
        """Integer matrix D (cells x edges) holding the relative signs."""
        rows = np.repeat(np.arange(self.n_cells), 3)
        return sp.csr_matrix((self.cell_edge_signs.ravel(), (rows, self.cell_edges.ravel())),
                             shape=(self.n_cells, self.n_edges), dtype=np.int64)

    def edge_vertex_incidence(self) -> sp.csr_matrix:
        """Integer matrix G (edges x vertices): -1 at the low end, +1 at the high end."""
        rows = np.repeat(np.arange(self.n_edges), 2)
        vals = np.tile([-1, 1], self.n_edges)
        return sp.csr_matrix((vals, (rows, self.edges.ravel())),
                             shape=(self.n_edges, self.n_vertices), dtype=np.int64)

    def cell_vertex_incidence(self) -> sp.csr_matrix:
        rows = np.repeat(np.arange(self.n_cells), 3)
        vals = np.ones(3 * self.n_cells, dtype=np.int64)
        return sp.csr_matrix((vals, (rows, self.cells.ravel())),
                             shape=(self.n_cells, self.n_vertices), dtype=np.int64)

    def touching_pairs(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Cell pairs (i <= j) sharing at least one vertex.

        Returns:
            rows, cols, and the number of shared vertices (3 self, 2 edge, 1 vertex)
        """
        inc = self.cell_vertex_incidence()
        shared = sp.triu(inc @ inc.T).tocoo()
        return shared.row.astype(np.int64), shared.col.astype(np.int64), shared.data.astype(np.int64)

    def rwg_coefficients(self) -> np.ndarray:
        """Per cell and local edge: sign * length / (2 * area), shape (n_cells, 3)."""
        lengths = self.edge_lengths[self.cell_edges]
        return self.cell_edge_signs * lengths / (2.0 * self.areas[:, None])

    def rwg_divergence(self) -> np.ndarray:
        """Per cell and local edge: divergence sign * length / area."""
        lengths = self.edge_lengths[self.cell_edges]
        return self.cell_edge_signs * lengths / self.areas[:, None]

    def content_hash(self) -> str:
        digest = hashlib.sha256()
        digest.update(np.ascontiguousarray(self.vertices, dtype="<f8").tobytes())
        digest.update(np.ascontiguousarray(self.cells, dtype="<i8").tobytes())
        return digest.hexdigest()

    def to_dict(self) -> Dict:
        return {"vertices": self.vertices.tolist(), "cells": self.cells.tolist(), "h": self.h}

    @classmethod
    def from_dict(cls, data: Dict) -> 'ApertureMesh':
        """Rebuild a mesh from its JSON document; clockwise cells are reoriented."""
        for key in ("vertices", "cells"):
            if key not in data:
                raise MeshError(f"Missing required mesh key: {key}")
        vertices = np.asarray(data["vertices"], dtype=float)
        cells = np.asarray(data["cells"], dtype=np.int64)
        if cells.ndim != 2 or cells.shape[1] != 3:
            raise MeshError("Mesh cells must be vertex triples")
        flip = _signed_areas(vertices, cells) < 0
        if np.any(flip):
            logging.debug(f"Reorienting {int(np.sum(flip))} clockwise cells")
            cells[flip] = cells[flip][:, [0, 2, 1]]
        mesh = cls(vertices=vertices, cells=cells, h=0.0)
        mesh.h = float(data.get("h") or mesh.h_max)
        return mesh

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2)

    @classmethod
    def load(cls, path: str) -> 'ApertureMesh':
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_dict(json.load(f))


@dataclass(eq=False)
class DofTable:
    """Unknown numbering for the three discrete spaces on a mesh."""
    mesh: ApertureMesh
    interior_edges: np.ndarray
    edge_to_dof: np.ndarray
    boundary_edge_mask: np.ndarray
    interior_vertices: np.ndarray
    vertex_to_dof: np.ndarray

    @property
    def n_vector(self) -> int:
        return len(self.interior_edges)

    @property
    def n_scalar(self) -> int:
        return self.mesh.n_cells

    @property
    def n_multiplier(self) -> int:
        return len(self.interior_vertices)

    def edge_orientation_table(self) -> List[List[int]]:
        """[dof, edge, low vertex, high vertex] for every vector unknown."""
        edges = self.mesh.edges[self.interior_edges]
        return [[i, int(e), int(a), int(b)] for i, (e, (a, b)) in enumerate(zip(self.interior_edges, edges))]

    def cell_dofs(self) -> np.ndarray:
        """Vector dof of each local edge of each cell (-1 on boundary edges)."""
        return self.edge_to_dof[self.mesh.cell_edges]

    def divergence_matrix(self) -> sp.csr_matrix:
        """Maps edge coefficients to the constant divergence on each cell."""
        mesh = self.mesh
        dofs = self.cell_dofs()
        keep = dofs >= 0
        rows = np.repeat(np.arange(mesh.n_cells), 3).reshape(-1, 3)[keep]
        vals = mesh.rwg_divergence()[keep]
        return sp.csr_matrix((vals, (rows, dofs[keep])), shape=(mesh.n_cells, self.n_vector))

    def incidence_divergence(self) -> sp.csr_matrix:
        """Integer part of the divergence: D restricted to interior edges."""
        return self.mesh.cell_edge_incidence()[:, self.interior_edges]

    def curl_matrix(self) -> sp.csr_matrix:
        """
        Maps multiplier (hat function) coefficients to edge coefficients of the
        vector curl: entry +1/l at the high end of an edge, -1/l at the low end.
        """
        mesh = self.mesh
        g = mesh.edge_vertex_incidence()[self.interior_edges][:, self.interior_vertices]
        scale = sp.diags(1.0 / mesh.edge_lengths[self.interior_edges])
        return (scale @ g.astype(float)).tocsr()


def build_dofs(mesh: ApertureMesh) -> DofTable:
    """
    Number the unknowns of a mesh.

    Vector unknowns live on interior edges only, so every discrete field has
    zero normal trace on the aperture boundary.
    """
    boundary = mesh.boundary_edge_mask
    interior_edges = np.flatnonzero(~boundary)
    edge_to_dof = -np.ones(mesh.n_edges, dtype=np.int64)
    edge_to_dof[interior_edges] = np.arange(len(interior_edges))

    interior_vertices = np.flatnonzero(~mesh.boundary_vertex_mask)
    vertex_to_dof = -np.ones(mesh.n_vertices, dtype=np.int64)
    vertex_to_dof[interior_vertices] = np.arange(len(interior_vertices))

    logging.debug(f"DOFs: {len(interior_edges)} vector, {mesh.n_cells} scalar, "
                  f"{len(interior_vertices)} multiplier")
    return DofTable(mesh=mesh, interior_edges=interior_edges, edge_to_dof=edge_to_dof,
                    boundary_edge_mask=boundary, interior_vertices=interior_vertices,
                    vertex_to_dof=vertex_to_dof)


def build_mesh(spec: ApertureSpec, h: float, grading_ratio: float = 0.7,
               grading_levels: int = 0, min_angle_deg: float = 12.0) -> ApertureMesh:
    """
    Triangulate an aperture.

    Args:
        spec: aperture shape
        h: target mesh parameter (largest spacing away from the boundary)
        grading_ratio: spacing ratio between successive layers near the boundary
        grading_levels: number of geometric refinements toward the boundary
        min_angle_deg: smallest admissible interior angle

    Returns:
        ApertureMesh

    Raises:
        MeshError: for non-positive h, h not below the aperture diameter, or a
            triangulation that violates the mesh invariants
    """
    if not h > 0:
        raise MeshError(f"Mesh parameter h must be positive, got {h}")
    if h >= spec.diameter():
        raise MeshError(f"Mesh parameter h={h} is not smaller than the aperture diameter {spec.diameter():.4g}")
    if not 0.0 < grading_ratio < 1.0:
        raise MeshError(f"grading_ratio must lie in (0, 1), got {grading_ratio}")
    if grading_levels < 0:
        raise MeshError(f"grading_levels must be >= 0, got {grading_levels}")

    if spec.shape == "disc":
        points = _disc_points(spec.radius, h, grading_ratio, grading_levels)
        cells = _delaunay_cells(points)
    elif spec.shape == "rectangle":
        points, cells = _rectangle_grid(spec.half_widths, h, grading_ratio, grading_levels)
    else:
        points, cells = _polygon_mesh(spec, h, grading_ratio, grading_levels)

    mesh = ApertureMesh(vertices=points, cells=cells, h=float(h), spec=spec, min_angle_deg=min_angle_deg)
    if spec.shape != "disc":
        rel = abs(mesh.total_area() - spec.area()) / spec.area()
        if rel > 1e-9:
            raise MeshError(f"Triangulation does not cover the polygon (area mismatch {rel:.2e})")
    logging.debug(f"Built {spec.shape} mesh: {mesh.n_vertices} vertices, {mesh.n_cells} cells, "
                  f"h_max={mesh.h_max:.4f}, min angle {mesh.min_angle():.1f} deg")
    return mesh


def _signed_areas(vertices: np.ndarray, cells: np.ndarray) -> np.ndarray:
    tri = vertices[cells]
    e1 = tri[:, 1] - tri[:, 0]
    e2 = tri[:, 2] - tri[:, 0]
    return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])


def _layer_spacings(h: float, ratio: float, levels: int):
    """Spacings growing geometrically away from the boundary, capped at h."""
    s = h * ratio ** levels
    while True:
        yield s
        s = min(s / ratio, h)


def _disc_points(radius: float, h: float, ratio: float, levels: int) -> np.ndarray:
    rings = []
    r = radius
    spacings = _layer_spacings(h, ratio, levels)
    s = next(spacings)
    rings.append((r, s))
    while True:
        s_next = next(spacings)
        if r - s <= 0.5 * s_next:
            break
        r -= s
        s = s_next
        rings.append((r, s))

    points = [np.zeros((1, 2))]
    for index, (rho, spacing) in enumerate(rings):
        n = max(6, int(math.ceil(2.0 * math.pi * rho / spacing)))
        offset = (index % 2) * math.pi / n
        theta = offset + 2.0 * math.pi * np.arange(n) / n
        points.append(rho * np.column_stack([np.cos(theta), np.sin(theta)]))
    return np.concatenate(points)


def _delaunay_cells(points: np.ndarray) -> np.ndarray:
    tri = Delaunay(points)
    cells = np.asarray(tri.simplices, dtype=np.int64)
    areas = _signed_areas(points, cells)
    cells[areas < 0] = cells[areas < 0][:, [0, 2, 1]]
    scale = np.ptp(points, axis=0).max() ** 2
    keep = np.abs(areas) > 1e-12 * scale
    return cells[keep]


def _graded_axis(half_width: float, h: float, ratio: float, levels: int) -> np.ndarray:
    if levels == 0:
        n = int(math.ceil(2.0 * half_width / h))
        return np.linspace(-half_width, half_width, n + 1)
    spacings = _layer_spacings(h, ratio, levels)
    dist = [0.0]
    s = next(spacings)
    while dist[-1] + s < half_width:
        dist.append(dist[-1] + s)
        s = next(spacings)
    if len(dist) > 1 and half_width - dist[-1] < 0.3 * s:
        dist.pop()
    dist = np.asarray(dist)
    left = -half_width + dist
    right = half_width - dist
    return np.unique(np.concatenate([left, [0.0], right]))


def _rectangle_grid(half_widths: Tuple[float, float], h: float, ratio: float, levels: int):
    xs = _graded_axis(half_widths[0], h, ratio, levels)
    ys = _graded_axis(half_widths[1], h, ratio, levels)
    nx, ny = len(xs), len(ys)
    xx, yy = np.meshgrid(xs, ys, indexing="ij")
    points = np.column_stack([xx.ravel(), yy.ravel()])

    def vid(i, j):
        return i * ny + j

    cells = []
    for i in range(nx - 1):
        for j in range(ny - 1):
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            if (i + j) % 2 == 0:
                cells.extend([(a, b, c), (a, c, d)])
            else:
                cells.extend([(a, b, d), (b, c, d)])
    return points, np.asarray(cells, dtype=np.int64)


def _sample_ring(ring, spacing: float) -> np.ndarray:
    """Points along a closed ring at arc spacing <= spacing, keeping its corners."""
    coords = np.asarray(ring.coords)[:-1]
    out = []
    for start, end in zip(coords, np.roll(coords, -1, axis=0)):
        length = float(np.linalg.norm(end - start))
        n = max(1, int(math.ceil(length / spacing)))
        t = np.arange(n) / n
        out.append(start[None, :] + t[:, None] * (end - start)[None, :])
    return np.concatenate(out)


def _polygon_mesh(spec: ApertureSpec, h: float, ratio: float, levels: int):
    poly = Polygon(spec.vertices)
    if not poly.exterior.is_ccw:
        poly = Polygon(list(poly.exterior.coords)[::-1])

    spacings = _layer_spacings(h, ratio, levels)
    s = next(spacings)
    layers = [_sample_ring(poly.exterior, s)]
    depth = 0.0
    for _ in range(levels):
        depth += s
        s = next(spacings)
        inner = poly.buffer(-depth, join_style=2)
        if inner.is_empty or inner.geom_type != "Polygon":
            break
        layers.append(_sample_ring(inner.exterior, s))
    depth += 0.5 * s

    core = poly.buffer(-depth, join_style=2)
    lattice = []
    if not core.is_empty:
        minx, miny, maxx, maxy = core.bounds
        dy = h * math.sqrt(3.0) / 2.0
        for row, y in enumerate(np.arange(miny, maxy + dy, dy)):
            xs = np.arange(minx + 0.5 * h * (row % 2), maxx + h, h)
            ys = np.full_like(xs, y)
            inside = shapely.contains_xy(core, xs, ys)
            lattice.append(np.column_stack([xs[inside], ys[inside]]))
    points = np.concatenate(layers + lattice)
    points = np.unique(np.round(points, 14), axis=0)

    cells = _delaunay_cells(points)
    centroids = points[cells].mean(axis=1)
    inside = shapely.contains_xy(poly, centroids[:, 0], centroids[:, 1])
    cells = cells[inside]

    used = np.unique(cells)
    remap = -np.ones(len(points), dtype=np.int64)
    remap[used] = np.arange(len(used))
    return points[used], remap[cells]


def screen_ring(spec: ApertureSpec, n: int, margin: float) -> np.ndarray:
    """
    In-plane points on the screen, outside the aperture at distance ~margin
    from its boundary (used for boundary-condition residuals).
    """
    if spec.shape == "disc":
        theta = 2.0 * math.pi * (np.arange(n) + 0.5) / n
        rho = spec.radius + margin
        return rho * np.column_stack([np.cos(theta), np.sin(theta)])
    if spec.shape == "rectangle":
        a, b = spec.half_widths
        outline = Polygon([(-a, -b), (a, -b), (a, b), (-a, b)])
    else:
        outline = Polygon(spec.vertices)
    ring = LineString(outline.buffer(margin, join_style=2).exterior.coords)
    return np.array([ring.interpolate(t, normalized=True).coords[0]
                     for t in (np.arange(n) + 0.5) / n])
