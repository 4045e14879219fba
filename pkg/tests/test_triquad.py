"""Triangle quadrature: base rules, closed-form potentials, graded cells,
and the regularizing transforms for touching triangle pairs."""
from math import factorial

import numpy as np
import pytest

from casibem.triquad import (cells_rule, edge_graded_cells, graded_points,
                             linear_R_integrals, pair_transform_points,
                             physical_points, static_potential_integrals,
                             subdivided_rule, triangle_rule,
                             vertex_graded_cells)
from conftest import random_triangle
from singular_ref import reference_moments


def bary_monomial_exact(a, b, c):
    """int over the unit-area reference of l1^a l2^b l3^c (2A = 1)."""
    return (factorial(a) * factorial(b) * factorial(c)
            / factorial(a + b + c + 2))


def test_triangle_rules_exactness():
    for degree in range(1, 7):
        bary, w = triangle_rule(degree)
        assert w.sum() == pytest.approx(1.0, rel=1e-14)
        assert np.all(bary >= -1e-14)  # degree 3 has a negative weight
        for a in range(degree + 1):
            for b in range(degree + 1 - a):
                c = degree - a - b
                got = w @ (bary[:, 0] ** a * bary[:, 1] ** b * bary[:, 2] ** c)
                # rule weights sum to 1, so compare to 2A * exact
                assert got == pytest.approx(2 * bary_monomial_exact(a, b, c),
                                            rel=1e-12)
    with pytest.raises(ValueError):
        triangle_rule(9)


def test_subdivided_rule_consistency():
    bary, w = subdivided_rule(2, 2)
    assert len(w) == 16 * 3
    assert w.sum() == pytest.approx(1.0, rel=1e-13)
    # degree-2 exactness survives subdivision
    got = w @ (bary[:, 0] * bary[:, 1])
    assert got == pytest.approx(2 * bary_monomial_exact(1, 1, 0), rel=1e-12)


def test_graded_points_weights(rng):
    tri = random_triangle(rng)
    area = 0.5 * np.linalg.norm(np.cross(tri[1] - tri[0], tri[2] - tri[0]))
    target = tri.mean(axis=0) + 0.01 * np.cross(tri[1] - tri[0],
                                                tri[2] - tri[0])
    pts, wts = graded_points(tri, target, degree=2, ratio=0.8)
    assert wts.sum() == pytest.approx(area, rel=1e-12)
    assert pts.shape == (len(wts), 3)


def test_graded_cells_tile_triangle(rng):
    tri = random_triangle(rng)
    area = 0.5 * np.linalg.norm(np.cross(tri[1] - tri[0], tri[2] - tri[0]))
    for cells in (edge_graded_cells(tri, (0, 1), 6),
                  vertex_graded_cells(tri, 2, 6)):
        _, wts = cells_rule(cells, 2)
        assert wts.sum() == pytest.approx(area, rel=1e-12)


def test_static_potentials_vs_quadrature(rng):
    for _ in range(5):
        tri = random_triangle(rng)
        # off-plane observation points: direct fine quadrature suffices
        obs = tri.mean(axis=0)[None, :] + rng.normal(size=(4, 3))
        dist = np.min(np.linalg.norm(
            obs[:, None, :] - tri[None, :, :], axis=-1))
        if dist < 0.3:
            obs = obs + 0.5 * np.sign(rng.normal(size=(4, 3)))
        I0, I1 = static_potential_integrals(tri, obs)
        bary, w = subdivided_rule(4, 4)
        area = 0.5 * np.linalg.norm(np.cross(tri[1] - tri[0],
                                             tri[2] - tri[0]))
        y = physical_points(tri, bary)
        R = np.linalg.norm(obs[:, None, :] - y[None, :, :], axis=-1)
        q0 = (w * area) @ (1.0 / (4 * np.pi * R.T))
        q1 = np.einsum("q,nq,qx->nx", w * area, 1.0 / (4 * np.pi * R), y)
        np.testing.assert_allclose(I0, q0, rtol=1e-6)
        np.testing.assert_allclose(I1, q1, rtol=1e-6)


def test_static_potentials_in_plane_point(rng):
    # observation point inside the source triangle: compare against a rule
    # graded into the 1/R singularity
    tri = random_triangle(rng)
    obs = physical_points(tri, np.array([[0.4, 0.35, 0.25]]))
    I0, I1 = static_potential_integrals(tri, obs)
    pts, wts = graded_points(tri, obs[0], degree=4, ratio=0.25, max_depth=28)
    R = np.linalg.norm(obs[0] - pts, axis=1)
    q0 = wts @ (1.0 / (4 * np.pi * R))
    q1 = (wts / (4 * np.pi * R)) @ pts
    assert I0[0] == pytest.approx(q0, rel=1e-6)
    np.testing.assert_allclose(I1[0], q1, rtol=1e-6)


def test_linear_R_integrals_vs_quadrature(rng):
    for _ in range(5):
        tri = random_triangle(rng)
        obs = np.vstack([tri.mean(axis=0) + [0.0, 0.0, 0.7],
                         tri.mean(axis=0)])   # one off-plane, one interior
        K1, K1v = linear_R_integrals(tri, obs)
        bary, w = subdivided_rule(5, 4)
        area = 0.5 * np.linalg.norm(np.cross(tri[1] - tri[0],
                                             tri[2] - tri[0]))
        y = physical_points(tri, bary)
        R = np.linalg.norm(obs[:, None, :] - y[None, :, :], axis=-1)
        q = R @ (w * area)
        qv = np.einsum("q,nq,qx->nx", w * area, R, y)
        # the interior point sees the C^0 kink of R: level-5 subdivision
        # leaves ~1e-7 there, the off-plane point is much better
        np.testing.assert_allclose(K1, q, rtol=1e-6)
        np.testing.assert_allclose(K1v, qv, rtol=1e-6,
                                   atol=1e-6 * np.abs(qv).max())


# --------------------------------------------------------------------------
# touching-pair transforms
# --------------------------------------------------------------------------

def touching_pair(rng, num_shared):
    """Random pair in the orientation convention of pair_transform_points."""
    tri_p = random_triangle(rng)
    if num_shared == 3:
        return tri_p, tri_p.copy()
    away = tri_p.mean(axis=0) + rng.normal(size=3) \
        + 1.0 * np.sign(rng.normal()) * np.cross(tri_p[1] - tri_p[0],
                                                 tri_p[2] - tri_p[0])
    if num_shared == 2:
        return tri_p, np.array([tri_p[0], tri_p[1], away])
    second = tri_p[0] + rng.normal(size=3)
    return tri_p, np.array([tri_p[0], away, second])


def test_pair_transform_constant_exact(rng):
    for num_shared in (1, 2, 3):
        tri_p, tri_q = touching_pair(rng, num_shared)
        X, Y, W = pair_transform_points(tri_p, tri_q, num_shared, order=4)
        ap = 0.5 * np.linalg.norm(np.cross(tri_p[1] - tri_p[0],
                                           tri_p[2] - tri_p[0]))
        aq = 0.5 * np.linalg.norm(np.cross(tri_q[1] - tri_q[0],
                                           tri_q[2] - tri_q[0]))
        assert W.sum() == pytest.approx(ap * aq, rel=1e-12)


def test_pair_transform_smooth_kernel(rng):
    # separable smooth integrand: compare to product Gauss on each triangle
    for num_shared in (1, 2, 3):
        tri_p, tri_q = touching_pair(rng, num_shared)
        X, Y, W = pair_transform_points(tri_p, tri_q, num_shared, order=10)
        got = float(W @ (np.einsum("nx,nx->n", X, Y) ** 2))
        bary, w = triangle_rule(4)
        ap = 0.5 * np.linalg.norm(np.cross(tri_p[1] - tri_p[0],
                                           tri_p[2] - tri_p[0]))
        aq = 0.5 * np.linalg.norm(np.cross(tri_q[1] - tri_q[0],
                                           tri_q[2] - tri_q[0]))
        xp = physical_points(tri_p, bary)
        yq = physical_points(tri_q, bary)
        dots = (xp @ yq.T) ** 2
        want = float((w * ap) @ dots @ (w * aq))
        assert got == pytest.approx(want, rel=1e-10)


def test_pair_transform_singular_kernel(rng):
    # exp(-kap R)/(4 pi R) against the extrapolated subdivision reference
    kap = 1.0
    for num_shared in (1, 2, 3):
        tri_p, tri_q = touching_pair(rng, num_shared)
        X, Y, W = pair_transform_points(tri_p, tri_q, num_shared, order=8)
        R = np.linalg.norm(X - Y, axis=1)
        got = float(W @ (np.exp(-kap * R) / (4 * np.pi * R)))
        want = float(reference_moments(tri_p, tri_q, kap)[0])
        assert got == pytest.approx(want, rel=2e-6)


def test_pair_transform_moderate_decay(rng):
    # kap * pair size ~ 8: order 8 keeps a few times 1e-5 even on skinny
    # random pairs (well-shaped mesh elements do considerably better)
    for num_shared in (2, 3):
        tri_p, tri_q = touching_pair(rng, num_shared)
        size = max(np.linalg.norm(np.diff(np.vstack([t, t[:1]]), axis=0),
                                  axis=1).max() for t in (tri_p, tri_q))
        kap = 8.0 / size
        refine = int(np.ceil(np.log2(kap * size))) + 1
        X, Y, W = pair_transform_points(tri_p, tri_q, num_shared, order=8,
                                        xi_refine=refine)
        R = np.linalg.norm(X - Y, axis=1)
        got = float(W @ (np.exp(-kap * R) / (4 * np.pi * R)))
        want = float(reference_moments(tri_p, tri_q, kap,
                                       levels=(3, 4, 5))[0])
        assert got == pytest.approx(want, rel=1e-4)


def test_pair_transform_xi_refinement_consistent(rng):
    # octave splitting of the scale variable must not change what the rule
    # integrates: constants stay exact and smooth kernels agree closely
    tri_p, tri_q = touching_pair(rng, 2)
    ap = 0.5 * np.linalg.norm(np.cross(tri_p[1] - tri_p[0],
                                       tri_p[2] - tri_p[0]))
    aq = 0.5 * np.linalg.norm(np.cross(tri_q[1] - tri_q[0],
                                       tri_q[2] - tri_q[0]))
    vals = []
    for refine in (0, 3):
        X, Y, W = pair_transform_points(tri_p, tri_q, 2, order=6,
                                        xi_refine=refine)
        assert W.sum() == pytest.approx(ap * aq, rel=1e-12)
        vals.append(float(W @ np.einsum("nx,nx->n", X, Y)))
    assert vals[0] == pytest.approx(vals[1], rel=1e-10)


def test_pair_transform_requires_shared_vertices():
    tri = np.eye(3)
    with pytest.raises(ValueError):
        pair_transform_points(tri, tri, 0, order=4)
