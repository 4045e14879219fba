"""Shared fixtures and brute-force integration helpers for the test suite."""
import numpy as np
import pytest

from casibem.geometry import build_rwg, generate_sphere
from casibem.triquad import physical_points, subdivided_rule


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def sphere_s1():
    """Unit icosphere at one subdivision with its RWG basis (120 unknowns)."""
    mesh = generate_sphere(1.0, 1)
    return mesh, build_rwg(mesh)


def random_triangle(rng, center=None, scale=1.0, min_area=0.05):
    """A non-degenerate random triangle of characteristic size `scale`."""
    while True:
        tri = rng.uniform(-1.0, 1.0, (3, 3)) * scale
        if center is not None:
            tri += np.asarray(center, dtype=float)
        area = 0.5 * np.linalg.norm(np.cross(tri[1] - tri[0], tri[2] - tri[0]))
        if area > min_area * scale ** 2:
            return tri


def brute_pair_integral(tri_p, tri_q, kern, levels, degree=4,
                        inner_degree=2):
    """Uniformly subdivided product-Gauss value of
    int_P int_Q kern(|x-y|) dA_y dA_x (slowly convergent for touching
    pairs; see `richardson_pair` for the extrapolated reference).

    Different outer/inner base rules keep quadrature points from
    coinciding on self pairs, where the kernel is singular."""
    bary_o, bw_o = subdivided_rule(levels, degree)
    bary_i, bw_i = subdivided_rule(levels, inner_degree)
    area_p = 0.5 * np.linalg.norm(np.cross(tri_p[1] - tri_p[0],
                                           tri_p[2] - tri_p[0]))
    area_q = 0.5 * np.linalg.norm(np.cross(tri_q[1] - tri_q[0],
                                           tri_q[2] - tri_q[0]))
    xp = physical_points(tri_p, bary_o)
    yq = physical_points(tri_q, bary_i)
    R = np.linalg.norm(xp[:, None, :] - yq[None, :, :], axis=-1)
    vals = kern(R)
    return float((bw_o * area_p) @ vals @ (bw_i * area_q))


def richardson_pair(tri_p, tri_q, kern, levels=(2, 3, 4), degree=4):
    """Adaptive-subdivision reference for a touching-pair double integral.

    Three uniformly refined estimates I_l are extrapolated with Aitken's
    scheme, which fits I_l = I + C q^l without assuming the rate q.  For
    the 1/R-type kernels here this removes the leading error and is good
    to ~1e-7 relative at the default levels.
    """
    I = [brute_pair_integral(tri_p, tri_q, kern, l, degree) for l in levels]
    d1, d2 = I[1] - I[0], I[2] - I[1]
    if d2 == 0.0 or abs(d1 - d2) < 1e-300:
        return I[2]
    q = d2 / d1
    return I[2] + d2 * q / (1.0 - q)
