#!/usr/bin/env python3
"""
greens.py - Free-space and half-space Green's functions

All functions take points with a trailing dimension of 3 and broadcast over
leading dimensions. Derivatives are taken in the first argument r. The
diameter argument is the aperture diameter; separations below 1e-8 of it
raise SingularityError.
"""

import math

import numpy as np

from .errors import SingularityError

# closer than RELATIVE_SEPARATION * diameter counts as coincident
RELATIVE_SEPARATION = 1e-8
REFLECT = np.diag([1.0, 1.0, -1.0])


def _separation(r, r_prime, diameter: float):
    if not diameter > 0:
        raise SingularityError(f"Length scale must be positive, got {diameter}")
    floor = RELATIVE_SEPARATION * diameter
    d = np.asarray(r, dtype=float) - np.asarray(r_prime, dtype=float)
    big_r = np.linalg.norm(d, axis=-1)
    if np.any(big_r <= floor):
        raise SingularityError(f"Green's function evaluated at separation <= {floor:.1e} (diameter {diameter:g})")
    return d, big_r


def reflect(r) -> np.ndarray:
    """Mirror image through the screen plane."""
    return np.asarray(r, dtype=float) * np.array([1.0, 1.0, -1.0])


def g_free(r, r_prime, k: float, diameter: float = 1.0):
    """exp(ikR)/(4 pi R)."""
    _, big_r = _separation(r, r_prime, diameter)
    return np.exp(1j * k * big_r) / (4.0 * math.pi * big_r)


def grad_g(r, r_prime, k: float, diameter: float = 1.0):
    """Gradient in r: g (ik - 1/R) (r - r')/R."""
    d, big_r = _separation(r, r_prime, diameter)
    g = np.exp(1j * k * big_r) / (4.0 * math.pi * big_r)
    return (g * (1j * k - 1.0 / big_r) / big_r)[..., None] * d


def hessian_g(r, r_prime, k: float, diameter: float = 1.0):
    """g [(3/R^2 - 3ik/R - k^2) R^R^T + (ik/R - 1/R^2) I]."""
    d, big_r = _separation(r, r_prime, diameter)
    g = np.exp(1j * k * big_r) / (4.0 * math.pi * big_r)
    unit = d / big_r[..., None]
    radial = g * (3.0 / big_r ** 2 - 3j * k / big_r - k ** 2)
    iso = g * (1j * k / big_r - 1.0 / big_r ** 2)
    outer = unit[..., :, None] * unit[..., None, :]
    return radial[..., None, None] * outer + iso[..., None, None] * np.eye(3)


def dyadic_G(r, r_prime, k: float, diameter: float = 1.0):
    """Free-space dyadic (I + grad grad / k^2) g."""
    if not k > 0:
        raise SingularityError("Dyadic Green's function needs k > 0 (1/k^2 factor)")
    g = g_free(r, r_prime, k, diameter)
    return g[..., None, None] * np.eye(3) + hessian_g(r, r_prime, k, diameter) / k ** 2


def dyadic_G2_plus(r, r_prime, k: float, diameter: float = 1.0):
    """Half-space dyadic G(r, r') + diag(1,1,-1) G(r_bar, r')."""
    return dyadic_G(r, r_prime, k, diameter) + REFLECT @ dyadic_G(reflect(r), r_prime, k, diameter)


def dyadic_G2_minus(r, r_prime, k: float, diameter: float = 1.0):
    """Lower half-space dyadic G2_plus(r_bar, r')."""
    return dyadic_G2_plus(reflect(r), r_prime, k, diameter)


def curl_columns(func, r, step: float = 1e-5) -> np.ndarray:
    """
    Central-difference curl (in r) of each column of a dyadic-valued function.

    Returns:
        3x3 matrix whose column j is curl of func(r)[:, j]
    """
    r = np.asarray(r, dtype=float)
    jac = np.zeros((3, 3, 3), dtype=complex)  # jac[l] = d func / d r_l
    for axis in range(3):
        shift = np.zeros(3)
        shift[axis] = step
        jac[axis] = (func(r + shift) - func(r - shift)) / (2.0 * step)
    curl = np.zeros((3, 3), dtype=complex)
    curl[0] = jac[1, 2, :] - jac[2, 1, :]
    curl[1] = jac[2, 0, :] - jac[0, 2, :]
    curl[2] = jac[0, 1, :] - jac[1, 0, :]
    return curl
