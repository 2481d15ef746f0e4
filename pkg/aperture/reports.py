#!/usr/bin/env python3
"""
reports.py - Solve reports and the dense direct solve shared by both equations
"""

import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import scipy.linalg

from .errors import SolverError

MAX_CONDITION = 1e12


@dataclass
class SolveReport:
    """Diagnostics of one linear solve (plus whatever the caller adds to extra)."""
    residual: float
    condition: float
    sigma_min: float
    n_unknowns: int
    path: str = ""
    warnings: List[str] = field(default_factory=list)
    extra: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def merge_warnings(self, warnings: List[str]) -> None:
        for message in warnings:
            if message not in self.warnings:
                self.warnings.append(message)


def singular_values(matrix: np.ndarray) -> np.ndarray:
    return scipy.linalg.svdvals(matrix)


def dense_solve(matrix: np.ndarray, rhs: np.ndarray, path: str = "",
                max_condition: float = MAX_CONDITION) -> Tuple[np.ndarray, SolveReport]:
    """
    LU solve with a condition check done beforehand.

    Raises:
        SolverError: if the matrix is singular or its condition number exceeds max_condition
    """
    start_time = time.time()
    n = matrix.shape[0]
    if n == 0:
        return np.zeros(0, dtype=complex), SolveReport(0.0, 1.0, 0.0, 0, path)

    sv = singular_values(matrix)
    sigma_min = float(sv[-1])
    condition = float(sv[0] / sigma_min) if sigma_min > 0 else float("inf")
    diagnostics = {"condition": condition, "sigma_min": sigma_min, "n_unknowns": n, "path": path}
    if not condition < max_condition:
        raise SolverError(f"System is singular or ill-conditioned (condition {condition:.3e})", diagnostics)

    try:
        solution = scipy.linalg.solve(matrix, rhs)
    except (scipy.linalg.LinAlgError, ValueError) as e:
        raise SolverError(f"Dense solve failed: {e}", diagnostics)

    norm_rhs = np.linalg.norm(rhs)
    residual = float(np.linalg.norm(matrix @ solution - rhs) / norm_rhs) if norm_rhs > 0 else 0.0
    logging.info(f"Solved {n} unknowns (cond {condition:.3e}, residual {residual:.2e}) "
                 f"in {time.time() - start_time:.2f} seconds")
    return solution, SolveReport(residual=residual, condition=condition, sigma_min=sigma_min,
                                 n_unknowns=n, path=path)


def energy_scaled_sigma_min(matrix: np.ndarray, static_gram: np.ndarray) -> Optional[float]:
    """
    Smallest singular value of L^-1 A L^-T where L L^T is the (real, SPD) static Gram.

    Returns None when the Gram is not positive definite on this mesh.
    """
    if matrix.shape[0] == 0:
        return None
    gram = np.real(0.5 * (static_gram + static_gram.T))
    try:
        lower = scipy.linalg.cholesky(gram, lower=True)
    except scipy.linalg.LinAlgError:
        logging.warning("Static Gram is not positive definite; energy scaling skipped")
        return None
    left = scipy.linalg.solve_triangular(lower, matrix, lower=True)
    scaled = scipy.linalg.solve_triangular(lower, left.T, lower=True).T
    return float(singular_values(scaled)[-1])
