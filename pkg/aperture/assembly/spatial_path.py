#!/usr/bin/env python3
"""
spatial_path.py - Cell-pair integration of the Helmholtz kernel

Inner integrals over the source cell use the semi-analytic potentials for
touching and close pairs and plain Gauss rules for far pairs. Outer rules are
chosen by panel relation: a subdivided rule on touching pairs, a high-order
rule on close pairs and a low-order rule on far pairs. Only pairs with
test <= source are integrated; the other half is mirrored.
"""

import logging
import time
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..geometry import ApertureMesh, DofTable
from ..parallel import run_chunks
from ..potentials import plane_kernel, plane_kernel_quadrature
from ..quadrature import cell_quadrature, map_rule, subdivided_rule
from .base import AssemblyPath, PanelRelation, QuadratureSettings


class SpatialAssembly(AssemblyPath):
    """Spatial (cell-pair) assembly"""

    name = "spatial"

    def __init__(self, mesh: ApertureMesh, dofs: Optional[DofTable] = None,
                 quadrature: Optional[QuadratureSettings] = None, threads: Optional[int] = None):
        super().__init__(mesh, dofs)
        self.quadrature = quadrature or QuadratureSettings()
        self.quadrature.validate()
        self.threads = threads
        self._cache: Dict[float, Tuple[np.ndarray, np.ndarray]] = {}

        q = self.quadrature
        self.near_rule = subdivided_rule(cell_quadrature(q.near_order), q.near_levels)
        self.close_rule = cell_quadrature(q.close_order)
        self.far_rule = cell_quadrature(q.far_order)
        tri = mesh.triangles
        self.inner_points, self.inner_weights = map_rule(cell_quadrature(q.inner_order), tri)
        self.far_points, self.far_weights = map_rule(self.far_rule, tri)
        self._relations = self._classify()

    def _classify(self) -> np.ndarray:
        """Relation code for every (test, source) pair with test <= source."""
        mesh = self.mesh
        centroids = mesh.centroids
        diam = mesh.diameters
        dist = np.linalg.norm(centroids[:, None, :] - centroids[None, :, :], axis=-1)
        scale = np.maximum(diam[:, None], diam[None, :])
        codes = np.where(dist < self.quadrature.close_factor * scale,
                         PanelRelation.CLOSE.value, PanelRelation.FAR.value).astype(np.int64)
        rows, cols, shared = mesh.touching_pairs()
        codes[rows, cols] = shared
        codes[cols, rows] = shared
        upper = codes[np.triu_indices(mesh.n_cells)]
        counts = {rel.name: int(np.sum(upper == rel.value)) for rel in PanelRelation}
        logging.debug(f"Panel relations (test <= source): {counts}")
        return codes

    def relation(self, test: int, source: int) -> PanelRelation:
        return PanelRelation(int(self._relations[test, source]))

    def _source_blocks(self, source: int, k: float, with_vector: bool):
        """Integrate every pair (test <= source) for one source cell."""
        mesh = self.mesh
        tri = mesh.triangles
        tests = np.arange(source + 1)
        codes = self._relations[tests, source]
        groups = [
            (tests[codes >= PanelRelation.VERTEX.value], self.near_rule, True),
            (tests[codes == PanelRelation.CLOSE.value], self.close_rule, True),
            (tests[codes == PanelRelation.FAR.value], self.far_rule, False),
        ]
        out_tests, out_t, out_v = [], [], []
        for cells, rule, analytic in groups:
            if not len(cells):
                continue
            points, weights = map_rule(rule, tri[cells])
            g, n = weights.shape
            flat = points.reshape(-1, 2)
            if analytic:
                k0, k1 = plane_kernel(tri[source], mesh.areas[source], mesh.centroids[source], flat, k,
                                      self.inner_points[source], self.inner_weights[source])
            else:
                k0, k1 = plane_kernel_quadrature(flat, k, self.far_points[source], self.far_weights[source])
            k0 = k0.reshape(g, n)
            k1 = k1.reshape(g, n, 2)
            out_tests.append(cells)
            out_t.append(np.sum(weights * k0, axis=1))
            if with_vector:
                xa = points[:, :, None, :] - tri[cells][:, None, :, :]
                xb = points[:, :, None, :] - tri[source][None, None, :, :]
                first = np.einsum("gn,gnad,gnd->ga", weights, xa, k1)
                second = np.einsum("gn,gnad,gnbd,gn->gab", weights, xa, xb, k0)
                out_v.append(first[:, :, None] + second)
        tests_all = np.concatenate(out_tests)
        t_vals = np.concatenate(out_t)
        v_vals = np.concatenate(out_v) if with_vector else None
        return tests_all, t_vals, v_vals

    def _assemble(self, k: float, with_vector: bool) -> Tuple[np.ndarray, Optional[np.ndarray]]:
        key = float(k)
        if key in self._cache and (self._cache[key][1] is not None or not with_vector):
            return self._cache[key]

        start_time = time.time()
        mesh = self.mesh
        n_cells = mesh.n_cells
        results: List = [None] * n_cells

        def work(start, stop):
            for source in range(start, stop):
                results[source] = self._source_blocks(source, k, with_vector)

        run_chunks(work, n_cells, self.quadrature.chunk_size, self.threads)

        t_mat = np.zeros((n_cells, n_cells), dtype=complex)
        mass = np.zeros((self.dofs.n_vector, self.dofs.n_vector), dtype=complex) if with_vector else None
        coef = mesh.rwg_coefficients()
        cell_dofs = self.dofs.cell_dofs()
        for source in range(n_cells):
            tests, t_vals, v_vals = results[source]
            t_mat[tests, source] = t_vals
            t_mat[source, tests] = t_vals
            if with_vector:
                self._scatter_mass(mass, source, tests, v_vals, coef, cell_dofs)

        if with_vector:
            mass = 0.5 * (mass + mass.T)
        logging.info(f"Spatial assembly (k={k:g}, {n_cells} cells) done in {time.time() - start_time:.2f} seconds")
        self._cache[key] = (t_mat, mass)
        return t_mat, mass

    @staticmethod
    def _scatter_mass(mass, source, tests, blocks, coef, cell_dofs):
        scaled = blocks * coef[tests][:, :, None] * coef[source][None, None, :]
        rows = np.broadcast_to(cell_dofs[tests][:, :, None], scaled.shape)
        cols = np.broadcast_to(cell_dofs[source][None, None, :], scaled.shape)
        keep = (rows >= 0) & (cols >= 0)
        np.add.at(mass, (rows[keep], cols[keep]), scaled[keep])
        off = keep & (tests != source)[:, None, None]
        np.add.at(mass, (cols[off], rows[off]), scaled[off])

    def scalar_matrix(self, k: float) -> np.ndarray:
        return self._assemble(k, with_vector=False)[0]

    def vector_parts(self, k: float) -> Tuple[np.ndarray, np.ndarray]:
        t_mat, mass = self._assemble(k, with_vector=True)
        div = self.dofs.divergence_matrix()
        div_gram = np.asarray(div.T @ (div.T @ t_mat.T).T)
        div_gram = 0.5 * (div_gram + div_gram.T)
        return mass, div_gram
