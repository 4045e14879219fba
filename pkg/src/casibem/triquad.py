"""Quadrature on triangles.

Symmetric Gauss rules, uniformly subdivided and distance-graded point sets
for near-singular integrands, and the closed-form static potential integrals
int 1/(4 pi R) dA' and int r'/(4 pi R) dA' over a flat triangle used for
singularity subtraction.
"""
from __future__ import annotations

import numpy as np

__all__ = [
    "triangle_rule",
    "physical_points",
    "subdivided_rule",
    "graded_points",
    "static_potential_integrals",
    "linear_R_integrals",
    "edge_graded_cells",
    "vertex_graded_cells",
    "cells_rule",
    "pair_transform_points",
]

# symmetric rules in barycentric coordinates; weights sum to 1
_RULES: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _perm3(a: float, b: float, c: float) -> list[tuple[float, float, float]]:
    seen = []
    for p in {(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)}:
        seen.append(p)
    return sorted(seen)


def _build_rules():
    r = {}
    r[1] = ([(1 / 3, 1 / 3, 1 / 3)], [1.0])

    r[2] = (_perm3(2 / 3, 1 / 6, 1 / 6), [1 / 3] * 3)

    pts = [(1 / 3, 1 / 3, 1 / 3)] + _perm3(0.6, 0.2, 0.2)
    r[3] = (pts, [-27 / 48] + [25 / 48] * 3)

    a, wa = 0.445948490915965, 0.223381589678011
    b, wb = 0.091576213509771, 0.109951743655322
    r[4] = (_perm3(1 - 2 * a, a, a) + _perm3(1 - 2 * b, b, b),
            [wa] * 3 + [wb] * 3)

    a, wa = 0.470142064105115, 0.132394152788506
    b, wb = 0.101286507323456, 0.125939180544827
    r[5] = ([(1 / 3, 1 / 3, 1 / 3)] + _perm3(1 - 2 * a, a, a)
            + _perm3(1 - 2 * b, b, b),
            [0.225] + [wa] * 3 + [wb] * 3)

    a, wa = 0.249286745170910, 0.116786275726379
    b, wb = 0.063089014491502, 0.050844906370207
    c1, c2, c3 = 0.636502499121399, 0.310352451033785, 0.053145049844816
    wc = 0.082851075618374
    r[6] = (_perm3(1 - 2 * a, a, a) + _perm3(1 - 2 * b, b, b)
            + _perm3(c1, c2, c3),
            [wa] * 3 + [wb] * 3 + [wc] * 6)

    for deg, (pts, w) in r.items():
        _RULES[deg] = (np.array(pts, dtype=float), np.array(w, dtype=float))


_build_rules()


def triangle_rule(degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Barycentric points and weights (summing to 1) of exactness `degree`."""
    if degree not in _RULES:
        raise ValueError(f"no triangle rule of degree {degree}")
    bary, w = _RULES[degree]
    return bary.copy(), w.copy()


def physical_points(tri: np.ndarray, bary: np.ndarray) -> np.ndarray:
    """Map barycentric points onto a triangle given as (3, 3) vertices."""
    return bary @ tri


def _split4(bary_tri: np.ndarray) -> list[np.ndarray]:
    a, b, c = bary_tri
    ab, bc, ca = (a + b) / 2, (b + c) / 2, (c + a) / 2
    return [np.array(x) for x in
            ((a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca))]


def subdivided_rule(levels: int, degree: int = 2) -> tuple[np.ndarray, np.ndarray]:
    """Rule from uniform 4-way subdivision: 4**levels copies of a base rule."""
    base_b, base_w = triangle_rule(degree)
    tris = [np.eye(3)]
    for _ in range(levels):
        tris = [t for tri in tris for t in _split4(tri)]
    frac = 4.0 ** (-levels)
    bary = np.vstack([base_b @ t for t in tris])
    w = np.tile(base_w * frac, len(tris))
    return bary, w


def graded_points(tri: np.ndarray, target: np.ndarray, degree: int = 2,
                  ratio: float = 1.0, max_depth: int = 7
                  ) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature points on `tri` graded toward `target`.

    A (sub)triangle is split while its diameter exceeds `ratio` times its
    distance from the target point, concentrating points under a nearby
    singularity.  Returns physical points and physical weights (summing to
    the triangle area).
    """
    base_b, base_w = triangle_rule(degree)
    out_p, out_w = [], []
    area = 0.5 * np.linalg.norm(np.cross(tri[1] - tri[0], tri[2] - tri[0]))
    stack = [(np.asarray(tri, dtype=float), area, 0)]
    while stack:
        t, a, depth = stack.pop()
        size = max(np.linalg.norm(t[1] - t[0]), np.linalg.norm(t[2] - t[1]),
                   np.linalg.norm(t[0] - t[2]))
        dist = np.linalg.norm(t.mean(axis=0) - target)
        if depth < max_depth and size > ratio * dist:
            ab, bc, ca = (t[0] + t[1]) / 2, (t[1] + t[2]) / 2, (t[2] + t[0]) / 2
            for child in ((t[0], ab, ca), (ab, t[1], bc),
                          (ca, bc, t[2]), (ab, bc, ca)):
                stack.append((np.array(child), a / 4, depth + 1))
        else:
            out_p.append(base_b @ t)
            out_w.append(base_w * a)
    return np.vstack(out_p), np.concatenate(out_w)


def static_potential_integrals(tri: np.ndarray, obs: np.ndarray
                               ) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form int 1/(4 pi R) dA' and int r'/(4 pi R) dA' over a triangle.

    tri: (3, 3) vertices; obs: (n, 3) observation points.  Returns
    (I0 (n,), I1 (n, 3)).  Valid for observation points anywhere, including
    in the triangle plane and inside the triangle.
    """
    tri = np.asarray(tri, dtype=float)
    obs = np.atleast_2d(np.asarray(obs, dtype=float))
    nrm = np.cross(tri[1] - tri[0], tri[2] - tri[0])
    nrm = nrm / np.linalg.norm(nrm)
    scale = max(np.linalg.norm(tri[1] - tri[0]),
                np.linalg.norm(tri[2] - tri[0]))

    d = (obs - tri[0]) @ nrm                       # signed height
    rho = obs - d[:, None] * nrm[None, :]          # in-plane projection

    I0 = np.zeros(len(obs))
    Irho = np.zeros((len(obs), 3))
    for k in range(3):
        a, b = tri[k], tri[(k + 1) % 3]
        lhat = (b - a) / np.linalg.norm(b - a)
        uhat = np.cross(lhat, nrm)                 # outward in-plane normal
        sm = (a - rho) @ lhat
        sp = (b - rho) @ lhat
        t0 = (a - rho) @ uhat
        R02 = t0 ** 2 + d ** 2
        Rm = np.sqrt(sm ** 2 + R02)
        Rp = np.sqrt(sp ** 2 + R02)

        tiny = 1e-14 * scale
        # stable log: pick the branch whose denominator stays away from 0
        num_pos = Rp + sp
        den_pos = Rm + sm
        num_neg = Rm - sm
        den_neg = Rp - sp
        use_pos = sm + sp >= 0
        f2 = np.where(
            use_pos,
            np.log(np.maximum(num_pos, tiny) / np.maximum(den_pos, tiny)),
            np.log(np.maximum(num_neg, tiny) / np.maximum(den_neg, tiny)),
        )
        # points on the edge line itself contribute nothing from this edge
        on_line = R02 < (1e-12 * scale) ** 2
        f2 = np.where(on_line, 0.0, f2)

        beta = (np.arctan2(t0 * sp, R02 + np.abs(d) * Rp)
                - np.arctan2(t0 * sm, R02 + np.abs(d) * Rm))
        I0 += t0 * f2 - np.abs(d) * beta
        Irho += 0.5 * uhat[None, :] * (R02 * f2 + sp * Rp - sm * Rm)[:, None]

    I1 = Irho + rho * I0[:, None]
    return I0 / (4 * np.pi), I1 / (4 * np.pi)


def linear_R_integrals(tri: np.ndarray, obs: np.ndarray
                       ) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form int R dA' and int R r' dA' over a flat triangle.

    R = |obs - r'|.  Same edge decomposition as the static potentials:
    with per-edge line integrals L_q = int_edge R^q dl,

        K1      = (1/3) [ sum_k t0_k L1_k + d^2 K_{-1} ]
        int (r'-rho) R dA' = (1/3) sum_k u_k L3_k

    where K_{-1} = 4 pi I0 and u_k are the outward in-plane edge normals.
    Returns (K1 (n,), K1v (n, 3)) with K1v = int R r' dA'.
    """
    tri = np.asarray(tri, dtype=float)
    obs = np.atleast_2d(np.asarray(obs, dtype=float))
    nrm = np.cross(tri[1] - tri[0], tri[2] - tri[0])
    nrm = nrm / np.linalg.norm(nrm)
    scale = max(np.linalg.norm(tri[1] - tri[0]),
                np.linalg.norm(tri[2] - tri[0]))

    d = (obs - tri[0]) @ nrm
    rho = obs - d[:, None] * nrm[None, :]

    Km1 = np.zeros(len(obs))                       # int 1/R dA'
    K1 = np.zeros(len(obs))
    Kv = np.zeros((len(obs), 3))
    for k in range(3):
        a, b = tri[k], tri[(k + 1) % 3]
        lhat = (b - a) / np.linalg.norm(b - a)
        uhat = np.cross(lhat, nrm)
        sm = (a - rho) @ lhat
        sp = (b - rho) @ lhat
        t0 = (a - rho) @ uhat
        R02 = t0 ** 2 + d ** 2
        Rm = np.sqrt(sm ** 2 + R02)
        Rp = np.sqrt(sp ** 2 + R02)

        tiny = 1e-14 * scale
        use_pos = sm + sp >= 0
        f2 = np.where(
            use_pos,
            np.log(np.maximum(Rp + sp, tiny) / np.maximum(Rm + sm, tiny)),
            np.log(np.maximum(Rm - sm, tiny) / np.maximum(Rp - sp, tiny)),
        )
        on_line = R02 < (1e-12 * scale) ** 2
        f2 = np.where(on_line, 0.0, f2)

        beta = (np.arctan2(t0 * sp, R02 + np.abs(d) * Rp)
                - np.arctan2(t0 * sm, R02 + np.abs(d) * Rm))
        Km1 += t0 * f2 - np.abs(d) * beta

        L1 = 0.5 * (sp * Rp - sm * Rm) + 0.5 * R02 * f2
        L3 = 0.25 * (sp * Rp ** 3 - sm * Rm ** 3) + 0.75 * R02 * L1
        K1 += t0 * L1
        Kv += uhat[None, :] * L3[:, None]

    K1 = (K1 + d ** 2 * Km1) / 3.0
    K1v = Kv / 3.0 + rho * K1[:, None]
    return K1, K1v


def edge_graded_cells(tri: np.ndarray, edge: tuple[int, int], levels: int,
                      q: float = 0.5) -> list[np.ndarray]:
    """Partition a triangle into strips shrinking geometrically toward one
    of its edges.  Returns (3,3) vertex arrays: one apex triangle, two
    triangles per intermediate strip, and a final sliver pair at the edge.
    Used to integrate functions with weak (log-derivative) singularities
    along that edge."""
    tri = np.asarray(tri, dtype=float)
    i0, i1 = edge
    i2 = 3 - i0 - i1
    A, B, C = tri[i0], tri[i1], tri[i2]

    def line(nu):
        # segment at fraction nu from edge AB toward the apex C
        return A + nu * (C - A), B + nu * (C - B)

    cells = []
    nus = [q ** l for l in range(levels + 1)]      # 1, q, q^2, ..., q^L
    A1, B1 = line(nus[1])
    cells.append(np.array([A1, B1, C]))            # apex triangle
    for nu_far, nu_near in zip(nus[1:-1], nus[2:]):
        Af, Bf = line(nu_far)
        An, Bn = line(nu_near)
        cells.append(np.array([An, Bn, Bf]))
        cells.append(np.array([An, Bf, Af]))
    Af, Bf = line(nus[-1])                          # final sliver at the edge
    cells.append(np.array([A, B, Bf]))
    cells.append(np.array([A, Bf, Af]))
    return cells


def vertex_graded_cells(tri: np.ndarray, vertex: int, levels: int,
                        q: float = 0.5) -> list[np.ndarray]:
    """Partition a triangle into annular pairs shrinking geometrically
    toward one of its vertices (similarity scaling), plus the innermost
    scaled copy."""
    tri = np.asarray(tri, dtype=float)
    V = tri[vertex]
    B, C = tri[(vertex + 1) % 3], tri[(vertex + 2) % 3]
    cells = []
    for l in range(levels):
        mu1, mu2 = q ** l, q ** (l + 1)
        B1, C1 = V + mu1 * (B - V), V + mu1 * (C - V)
        B2, C2 = V + mu2 * (B - V), V + mu2 * (C - V)
        cells.append(np.array([B2, B1, C1]))
        cells.append(np.array([B2, C1, C2]))
    mu = q ** levels
    cells.append(np.array([V, V + mu * (B - V), V + mu * (C - V)]))
    return cells


def cells_rule(cells, degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Physical points and weights of a base rule applied on each cell."""
    base_b, base_w = triangle_rule(degree)
    pts, wts = [], []
    for c in cells:
        area = 0.5 * np.linalg.norm(np.cross(c[1] - c[0], c[2] - c[0]))
        pts.append(base_b @ c)
        wts.append(base_w * area)
    return np.vstack(pts), np.concatenate(wts)


# --------------------------------------------------------------------------
# regularizing coordinate transforms for touching triangle pairs
# --------------------------------------------------------------------------
#
# The 4D integral of a 1/R-type kernel over a pair of triangles that share
# a vertex, an edge, or coincide is mapped onto a small number of [0,1]^4
# boxes on which the transformed integrand is analytic, so a tensor Gauss
# rule converges exponentially in the 1D order.

_GAUSS01: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gauss01(n: int) -> tuple[np.ndarray, np.ndarray]:
    got = _GAUSS01.get(n)
    if got is None:
        x, w = np.polynomial.legendre.leggauss(n)
        got = (0.5 * (x + 1.0), 0.5 * w)
        _GAUSS01[n] = got
    return got


def _simplex_map(tri: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    # domain 0 <= v <= u <= 1; the (v0, v1) edge is the v = 0 line
    return (tri[0][None, :] + np.outer(u, tri[1] - tri[0])
            + np.outer(v, tri[2] - tri[1]))


_REGIONS_SELF = [
    lambda x, e1, e2, e3: (x, x * (1 - e1 + e1 * e2),
                           x * (1 - e1 * e2 * e3), x * (1 - e1)),
    lambda x, e1, e2, e3: (x * (1 - e1 * e2 * e3), x * (1 - e1),
                           x, x * (1 - e1 + e1 * e2)),
    lambda x, e1, e2, e3: (x, x * e1 * (1 - e2 + e2 * e3),
                           x * (1 - e1 * e2), x * e1 * (1 - e2)),
    lambda x, e1, e2, e3: (x * (1 - e1 * e2), x * e1 * (1 - e2),
                           x, x * e1 * (1 - e2 + e2 * e3)),
    lambda x, e1, e2, e3: (x * (1 - e1 * e2 * e3), x * e1 * (1 - e2 * e3),
                           x, x * e1 * (1 - e2)),
    lambda x, e1, e2, e3: (x, x * e1 * (1 - e2),
                           x * (1 - e1 * e2 * e3), x * e1 * (1 - e2 * e3)),
]

_REGIONS_EDGE = [
    (lambda x, e1, e2, e3: (x, x * e1 * e3,
                            x * (1 - e1 * e2), x * e1 * (1 - e2)),
     lambda e1, e2: e1 ** 2),
    (lambda x, e1, e2, e3: (x, x * e1,
                            x * (1 - e1 * e2 * e3), x * e1 * e2 * (1 - e3)),
     lambda e1, e2: e1 ** 2 * e2),
    (lambda x, e1, e2, e3: (x * (1 - e1 * e2), x * e1 * (1 - e2),
                            x, x * e1 * e2 * e3),
     lambda e1, e2: e1 ** 2 * e2),
    (lambda x, e1, e2, e3: (x * (1 - e1 * e2 * e3), x * e1 * e2 * (1 - e3),
                            x, x * e1),
     lambda e1, e2: e1 ** 2 * e2),
    (lambda x, e1, e2, e3: (x * (1 - e1 * e2 * e3), x * e1 * (1 - e2 * e3),
                            x, x * e1 * e2),
     lambda e1, e2: e1 ** 2 * e2),
]

_REGIONS_VERTEX = [
    lambda x, e1, e2, e3: (x, x * e1, x * e2, x * e2 * e3),
    lambda x, e1, e2, e3: (x * e2, x * e2 * e3, x, x * e1),
]


def pair_transform_points(tri_p: np.ndarray, tri_q: np.ndarray,
                          num_shared: int,
                          order: int,
                          xi_refine: int = 0) -> tuple[np.ndarray, np.ndarray,
                                                       np.ndarray]:
    """Quadrature for a touching triangle pair, exact tiling of the 4D
    product domain.

    Triangles must be pre-ordered: coincident pairs in identical vertex
    order, edge-sharing pairs with the shared edge as vertices (0, 1) in
    the same direction, vertex-sharing pairs with the shared vertex first.
    Returns physical (x_points, y_points, weights); weights absorb all
    Jacobians, so sum(w * k(x, y)) approximates the double surface
    integral of k.

    ``xi_refine`` splits the overall-scale variable into that many
    geometric octaves toward zero, resolving the boundary layer a kernel
    factor exp(-lam R) develops when lam times the pair size is large.
    """
    tri_p = np.asarray(tri_p, dtype=float)
    tri_q = np.asarray(tri_q, dtype=float)
    g, gw = _gauss01(order)
    if xi_refine > 0:
        segs = []
        hi = 1.0
        for _ in range(xi_refine):
            lo = 0.5 * hi
            segs.append((lo, hi))
            hi = lo
        segs.append((0.0, hi))
        gx = np.concatenate([lo + (hi - lo) * g for lo, hi in segs])
        gwx = np.concatenate([(hi - lo) * gw for lo, hi in segs])
    else:
        gx, gwx = g, gw
    X4 = np.stack([a.ravel() for a in
                   np.meshgrid(gx, g, g, g, indexing="ij")])
    W4 = np.prod(np.stack([a.ravel() for a in
                           np.meshgrid(gwx, gw, gw, gw, indexing="ij")]),
                 axis=0)
    xi, e1, e2, e3 = X4
    area_p = 0.5 * np.linalg.norm(np.cross(tri_p[1] - tri_p[0],
                                           tri_p[2] - tri_p[0]))
    area_q = 0.5 * np.linalg.norm(np.cross(tri_q[1] - tri_q[0],
                                           tri_q[2] - tri_q[0]))
    scale = 4.0 * area_p * area_q

    xs, ys, ws = [], [], []
    if num_shared >= 3:
        jac = xi ** 3 * e1 ** 2 * e2
        for f in _REGIONS_SELF:
            u1, v1, u2, v2 = f(xi, e1, e2, e3)
            xs.append(_simplex_map(tri_p, u1, v1))
            ys.append(_simplex_map(tri_q, u2, v2))
            ws.append(scale * jac * W4)
    elif num_shared == 2:
        for f, jf in _REGIONS_EDGE:
            u1, v1, u2, v2 = f(xi, e1, e2, e3)
            xs.append(_simplex_map(tri_p, u1, v1))
            ys.append(_simplex_map(tri_q, u2, v2))
            ws.append(scale * xi ** 3 * jf(e1, e2) * W4)
    elif num_shared == 1:
        jac = xi ** 3 * e2
        for f in _REGIONS_VERTEX:
            u1, v1, u2, v2 = f(xi, e1, e2, e3)
            xs.append(_simplex_map(tri_p, u1, v1))
            ys.append(_simplex_map(tri_q, u2, v2))
            ws.append(scale * jac * W4)
    else:
        raise ValueError("pair does not touch")
    return np.vstack(xs), np.vstack(ys), np.concatenate(ws)
