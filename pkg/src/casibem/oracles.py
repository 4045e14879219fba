"""Independent analytic references: PEC-sphere Mie series for scattering
validation, and the proximity-force / ideal-plate Casimir limits.

Units: hbar = c = 1 throughout the Casimir formulas.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.special import spherical_jn, spherical_yn

__all__ = [
    "MieSeries",
    "mie_series",
    "mie_rcs",
    "pfa_sphere_sphere",
    "ideal_plate_pressure",
    "read_reference_csv",
]


@dataclass(frozen=True)
class MieSeries:
    """PEC-sphere Mie coefficients a_l (electric), b_l (magnetic), l>=1."""

    ka: float
    L_max: int
    a: np.ndarray
    b: np.ndarray


def mie_series(ka: float, L_max: int | None = None) -> MieSeries:
    """Coefficients a_l = psi_l'(x)/xi_l'(x), b_l = psi_l(x)/xi_l(x)
    for a perfectly conducting sphere of size parameter x = ka."""
    if ka <= 0:
        raise ValueError("ka must be positive")
    if L_max is None:
        L_max = int(np.ceil(ka + 10 + 4 * ka ** (1 / 3)))
    l = np.arange(1, L_max + 1)
    jl = spherical_jn(l, ka)
    jlp = spherical_jn(l, ka, derivative=True)
    yl = spherical_yn(l, ka)
    ylp = spherical_yn(l, ka, derivative=True)
    hl = jl + 1j * yl
    hlp = jlp + 1j * ylp
    psi = ka * jl
    psip = jl + ka * jlp
    xi = ka * hl
    xip = hl + ka * hlp
    return MieSeries(ka=ka, L_max=L_max, a=psip / xip, b=psi / xi)


def _pi_tau(L_max: int, mu: float):
    """Angular functions pi_l(mu), tau_l(mu) for l = 1..L_max."""
    pi = np.zeros(L_max + 1)
    tau = np.zeros(L_max + 1)
    pi[1] = 1.0
    tau[1] = mu
    for l in range(2, L_max + 1):
        pi[l] = ((2 * l - 1) * mu * pi[l - 1] - l * pi[l - 2]) / (l - 1)
        tau[l] = l * mu * pi[l] - (l + 1) * pi[l - 1]
    return pi[1:], tau[1:]


def mie_rcs(ka: float, theta: float, polarization: str = "E",
            L_max: int | None = None) -> float:
    """Normalized bistatic RCS sigma/(pi a^2) of a PEC sphere.

    theta in radians from the forward direction; polarization "E" for the
    plane containing the incident E field (amplitude S2) or "H" for the
    orthogonal plane (S1).
    """
    s = mie_series(ka, L_max)
    l = np.arange(1, s.L_max + 1)
    pi_l, tau_l = _pi_tau(s.L_max, np.cos(theta))
    cl = (2 * l + 1) / (l * (l + 1))
    if polarization == "E":
        S = np.sum(cl * (s.a * tau_l + s.b * pi_l))
    elif polarization == "H":
        S = np.sum(cl * (s.a * pi_l + s.b * tau_l))
    else:
        raise ValueError("polarization must be 'E' or 'H'")
    return float(4.0 * np.abs(S) ** 2 / ka ** 2)


def pfa_sphere_sphere(R: float, Z: float) -> float:
    """Proximity-force sphere-sphere Casimir force, equal radii R, gap Z.

    F = 2 pi R_eff E_plate(Z) with R_eff = R/2 and the ideal-plate energy
    per area E_plate(d) = -pi^2/(720 d^3), giving F = -pi^3 R / (720 Z^3).
    Negative = attractive.  Valid asymptotically for Z << R.
    """
    if R <= 0 or Z <= 0:
        raise ValueError("R and Z must be positive")
    return -np.pi ** 3 * R / (720.0 * Z ** 3)


def ideal_plate_pressure(d: float) -> float:
    """Casimir pressure between ideal parallel plates: -pi^2/(240 d^4)."""
    if d <= 0:
        raise ValueError("gap must be positive")
    return -np.pi ** 2 / (240.0 * d ** 4)


def read_reference_csv(path):
    """Read (z_over_r, f_r2) reference data; header row required."""
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or \
                {"z_over_r", "f_r2"} - set(reader.fieldnames):
            raise ValueError("reference CSV needs columns z_over_r, f_r2")
        rows = [(float(r["z_over_r"]), float(r["f_r2"])) for r in reader]
    if not rows:
        raise ValueError("reference CSV is empty")
    return np.array(rows)
