"""Free-space kernels on the imaginary-frequency (rotated) axis.

With k0 = i*kappa the scalar Helmholtz kernel becomes the real, smooth,
exponentially decaying g(R) = exp(-kappa R) / (4 pi R).  Everything built on
it (derivative tensors up to third order, the dyadic kernel, reduced dipole
fields) stays real.  A complex real-frequency kernel is provided separately
for the scattering verification path.

Conventions: hbar = c0 = eps0 = mu0 = 1, time dependence exp(-i w t).  The
"reduced" dipole fields below drop the i*w*mu0 prefactor of the physical
field; on the rotated axis E_physical = -kappa * E_reduced.  Derivatives of
derivative-type sources are taken with respect to the source position.
"""
from __future__ import annotations

import numpy as np

__all__ = [
    "g_scalar",
    "g_derivs",
    "dyadic_G_apply",
    "kernel_radial",
    "dipole_E_reduced",
    "dipole_H_reduced",
    "g_complex",
]

_EYE = np.eye(3)


def _checked_R(r, rp):
    dx = np.asarray(r, dtype=float) - np.asarray(rp, dtype=float)
    R = np.linalg.norm(dx, axis=-1)
    if np.any(R == 0.0):
        raise ValueError("kernel evaluated at coincident points (R = 0); "
                         "use singular quadrature instead")
    return dx, R


def kernel_radial(kappa: float, R: np.ndarray, orders: int = 1):
    """Radial factors of g and its derivative tensors.

    Returns (g, gp, phi, chi) up to the requested order, with

        grad g   = gp * Rhat
        hess g   = phi * Rhat Rhat + (gp / R) * I
        third g  = chi * Rhat^3 + (phi / R) * sym(I Rhat)

    Unused higher factors are returned as None.
    """
    R = np.asarray(R, dtype=float)
    g = np.exp(-kappa * R) / (4 * np.pi * R)
    gp = phi = chi = None
    if orders >= 1:
        gp = -(kappa + 1.0 / R) * g
    if orders >= 2:
        phi = g * (kappa ** 2 + 3 * kappa / R + 3 / R ** 2)
    if orders >= 3:
        chi = -g * (kappa ** 3 + 6 * kappa ** 2 / R
                    + 15 * kappa / R ** 2 + 15 / R ** 3)
    return g, gp, phi, chi


def g_scalar(kappa: float, r, rp) -> float | np.ndarray:
    """exp(-kappa R) / (4 pi R) with R = |r - rp|."""
    if kappa < 0:
        raise ValueError("kappa must be >= 0")
    _, R = _checked_R(r, rp)
    return np.exp(-kappa * R) / (4 * np.pi * R)


def g_derivs(kappa: float, r, rp, order: int):
    """Derivative tensor of g with respect to r: order 1, 2 or 3.

    Returns shape (..., 3), (..., 3, 3) or (..., 3, 3, 3); all tensors are
    symmetric under index permutation.
    """
    if order not in (1, 2, 3):
        raise ValueError("order must be 1, 2 or 3")
    dx, R = _checked_R(r, rp)
    rhat = dx / R[..., None]
    g, gp, phi, chi = kernel_radial(kappa, R, orders=order)
    if order == 1:
        return gp[..., None] * rhat
    if order == 2:
        return (phi[..., None, None] * rhat[..., :, None] * rhat[..., None, :]
                + (gp / R)[..., None, None] * _EYE)
    outer3 = (rhat[..., :, None, None] * rhat[..., None, :, None]
              * rhat[..., None, None, :])
    sym = (np.einsum("ij,...k->...ijk", _EYE, rhat)
           + np.einsum("ik,...j->...ijk", _EYE, rhat)
           + np.einsum("jk,...i->...ijk", _EYE, rhat))
    return chi[..., None, None, None] * outer3 + (phi / R)[..., None, None, None] * sym


def dyadic_G_apply(kappa: float, r, rp, p) -> np.ndarray:
    """Apply the free-space dyadic kernel [I + grad grad / k0^2] g to p.

    On the rotated axis k0^2 = -kappa^2 so this is g*p - (hess g).p/kappa^2,
    real valued.  kappa = 0 is rejected (the 1/k0^2 term is undefined).
    """
    if kappa <= 0:
        raise ValueError("dyadic kernel requires kappa > 0")
    dx, R = _checked_R(r, rp)
    p = np.asarray(p, dtype=float)
    rhat = dx / R[..., None]
    g, gp, phi, _ = kernel_radial(kappa, R, orders=2)
    hess_p = (phi[..., None] * rhat * np.sum(rhat * p, axis=-1)[..., None]
              + (gp / R)[..., None] * p)
    return g[..., None] * p - hess_p / kappa ** 2


def dipole_E_reduced(kappa: float, location, e_hat, d_hat, points) -> np.ndarray:
    """Reduced electric field of a (derivative-of-)point current source.

    Plain source (d_hat None):  Gbar(x, loc) . e_hat
    Derivative source:          d/d(loc . d_hat) [Gbar(x, loc) . e_hat]

    points: (n, 3).  Physical field = -kappa * (this value).
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    dx = pts - np.asarray(location, dtype=float)
    R = np.linalg.norm(dx, axis=1)
    rhat = dx / R[:, None]
    e = np.asarray(e_hat, dtype=float)
    if d_hat is None:
        g, gp, phi, _ = kernel_radial(kappa, R, orders=2)
        hess_e = (phi[:, None] * rhat * (rhat @ e)[:, None]
                  + (gp / R)[:, None] * e)
        return g[:, None] * e - hess_e / kappa ** 2
    d = np.asarray(d_hat, dtype=float)
    g, gp, phi, chi = kernel_radial(kappa, R, orders=3)
    re = rhat @ e
    rd = rhat @ d
    ed = float(e @ d)
    # third-derivative tensor contracted with e (j) and d (k)
    third_ed = (chi[:, None] * rhat * (re * rd)[:, None]
                + (phi / R)[:, None] * (ed * rhat
                                        + re[:, None] * d
                                        + rd[:, None] * e))
    grad_d = gp * rd
    # derivative w.r.t. source position = -(d . grad_x)
    return -(grad_d[:, None] * e - third_ed / kappa ** 2)


def dipole_H_reduced(kappa: float, location, e_hat, d_hat, points) -> np.ndarray:
    """Reduced magnetic field of a (derivative-of-)point current source.

    Plain source:       grad g(x, loc) x e_hat
    Derivative source:  d/d(loc . d_hat) of the same.

    The reduced H carries no kappa prefactor (H_physical = H_reduced).
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    dx = pts - np.asarray(location, dtype=float)
    R = np.linalg.norm(dx, axis=1)
    rhat = dx / R[:, None]
    e = np.asarray(e_hat, dtype=float)
    if d_hat is None:
        _, gp, _, _ = kernel_radial(kappa, R, orders=1)
        return np.cross(gp[:, None] * rhat, e)
    d = np.asarray(d_hat, dtype=float)
    _, gp, phi, _ = kernel_radial(kappa, R, orders=2)
    hess_d = (phi[:, None] * rhat * (rhat @ d)[:, None] + (gp / R)[:, None] * d)
    return -np.cross(hess_d, e)


def g_complex(k: float, R: np.ndarray) -> np.ndarray:
    """Real-frequency kernel exp(i k R)/(4 pi R), outgoing for exp(-i w t)."""
    R = np.asarray(R, dtype=float)
    return np.exp(1j * k * R) / (4 * np.pi * R)
