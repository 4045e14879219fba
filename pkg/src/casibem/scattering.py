"""Real-frequency plane-wave scattering path (verification only).

This is the single place where the complex, oscillatory kernel
exp(ikR)/(4 pi R) is assembled.  It exists to validate the classical EFIE
core against the Mie series, independently of the rotated-axis machinery
used by the Casimir pipeline.  Time convention exp(-i w t).
"""
from __future__ import annotations

import numpy as np

from .bem import QuadConfig, assemble_Z, factorize, solve, _tables
from .geometry import BasisSet, build_rwg, generate_sphere
from .oracles import mie_rcs

__all__ = [
    "plane_wave_rhs",
    "solve_plane_wave",
    "far_field",
    "bistatic_rcs",
    "sphere_rcs_comparison",
]


def plane_wave_rhs(basis: BasisSet, k: float, k_hat, pol,
                   quad: QuadConfig = QuadConfig()) -> np.ndarray:
    """Tested incident field g_m = int J_m . pol exp(i k k_hat . r) dA."""
    tab = _tables(basis, quad)
    k_hat = np.asarray(k_hat, dtype=float)
    pol = np.asarray(pol, dtype=complex)
    if abs(k_hat @ pol) > 1e-12:
        raise ValueError("polarization must be transverse to k_hat")
    pts = tab.near_pts                       # (nt, q, 3)
    wts = tab.near_w
    phase = np.exp(1j * k * (pts @ k_hat))   # (nt, q)
    out = np.zeros(basis.count, dtype=complex)
    # J_m dot pol over each slot
    rel = pts[:, None, :, :] - tab.slot_free[:, :, None, :]   # (nt,3s,q,3)
    jdotp = np.einsum("tsqx,x->tsq", rel, pol)
    vals = np.einsum("tq,ts,tsq->ts", wts * phase, tab.slot_c, jdotp)
    for s in range(3):
        np.add.at(out, tab.slot_idx[:, s], vals[:, s])
    return out


def solve_plane_wave(basis: BasisSet, k: float, k_hat, pol,
                     quad: QuadConfig = QuadConfig()) -> np.ndarray:
    """Surface-current coefficients for a unit plane wave, PEC boundary.

    With Z the reduced complex impedance (see bem), the tested scattered
    field is -ik Z a, so the PEC condition gives a = solve(Z, g)/(ik).
    """
    Z = assemble_Z(basis, k, quad, axis="real")
    ws = factorize(Z)
    g = plane_wave_rhs(basis, k, k_hat, pol, quad)
    # bem.solve returns lu_solve(lu, -rhs); we need +solve(Z, g)/(ik)
    return -solve(ws, g) / (1j * k)


def far_field(basis: BasisSet, coeffs: np.ndarray, k: float, r_hat,
              quad: QuadConfig = QuadConfig()) -> np.ndarray:
    """Transverse radiation vector V_t(r_hat) = (I - rr) int J e^{-ik r.y}.

    The far scattered field is E = -ik (e^{ikr}/4 pi r) V_t.
    """
    tab = _tables(basis, quad)
    r_hat = np.asarray(r_hat, dtype=float)
    pts = tab.near_pts
    wts = tab.near_w
    phase = np.exp(-1j * k * (pts @ r_hat))
    rel = pts[:, None, :, :] - tab.slot_free[:, :, None, :]
    # sum over points of w * phase * c_slot * (r - v_free), per slot
    vec = np.einsum("tq,ts,tsqx->tsx", wts * phase, tab.slot_c, rel)
    V = np.zeros(3, dtype=complex)
    for s in range(3):
        V += coeffs[tab.slot_idx[:, s]] @ vec[:, s, :]
    return V - (V @ r_hat) * r_hat


def bistatic_rcs(basis: BasisSet, coeffs: np.ndarray, k: float,
                 r_hat, quad: QuadConfig = QuadConfig()) -> float:
    """Bistatic RCS sigma = (k^2/4pi) |V_t|^2 for a unit incident wave."""
    V = far_field(basis, coeffs, k, r_hat, quad)
    return float(k ** 2 / (4 * np.pi) * np.vdot(V, V).real)


def sphere_rcs_comparison(ka: float, refinement: int,
                          thetas_deg=None, plane: str = "E",
                          quad: QuadConfig = QuadConfig()):
    """BEM vs Mie bistatic RCS for a unit PEC sphere (a = 1, k = ka).

    Incident wave travels +z, E along x.  plane "E" observes in the x-z
    plane, "H" in the y-z plane.  Returns an array of rows
    (theta_deg, rcs_bem, rcs_mie, rel_err), RCS normalized by pi a^2.
    """
    if thetas_deg is None:
        thetas_deg = np.arange(0.0, 181.0, 10.0)
    mesh = generate_sphere(1.0, refinement)
    basis = build_rwg(mesh)
    k = float(ka)
    coeffs = solve_plane_wave(basis, k, [0, 0, 1], [1, 0, 0], quad)
    rows = []
    for th_deg in thetas_deg:
        th = np.deg2rad(th_deg)
        if plane == "E":
            r_hat = np.array([np.sin(th), 0.0, np.cos(th)])
        elif plane == "H":
            r_hat = np.array([0.0, np.sin(th), np.cos(th)])
        else:
            raise ValueError("plane must be 'E' or 'H'")
        sigma_bem = bistatic_rcs(basis, coeffs, k, r_hat, quad) / np.pi
        sigma_mie = mie_rcs(ka, th, polarization=plane)
        rel = abs(sigma_bem - sigma_mie) / max(abs(sigma_mie), 1e-300)
        rows.append((th_deg, sigma_bem, sigma_mie, rel))
    return np.array(rows)
