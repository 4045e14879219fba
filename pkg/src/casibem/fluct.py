"""Fluctuation pipeline: five-source stress integrand on the rotated axis,
imaginary-wavenumber quadrature, and surface integration to a net force.

The normal-normal stress at a surface point r with frame (u, v, n) is

    T_nn = int_0^inf t_nn(kappa) dkappa,
    t_nn = -(1/2pi) [ kappa^2 E_n(s1) - H_u(s2) + H_u(s3)
                                      - H_v(s4) + H_v(s5) ]

where E, H are *reduced* scattered fields (see bem/kernels docstrings) under
the five point sources s1..s5 = (n,-), (v,n), (n,v), (n,u), (u,n) placed at
r + eps*n.  The -(1/2pi) weight and the kappa^2 on the electric term are the
rotated forms of the printed real-axis prefactors; they were derived once
symbolically and validated against the ideal parallel-plate pressure by an
independent image-series computation (tests/test_fluct.py).

Only scattered fields enter: the free-space self-field of each source is
position independent at coincident source/evaluation points and cancels in
any closed-surface integral, so it is subtracted (vacuum part).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import bem
from .bem import QuadConfig, SourceSpec, assemble_Z, factorize
from .geometry import BasisSet, Frame, Mesh, build_rwg, quadrature_points
from .kernels import dipole_E_reduced

__all__ = [
    "KappaGrid",
    "SpectralSample",
    "PressureField",
    "ForceResult",
    "table1_sources",
    "stress_integrand",
    "integrate_kappa",
    "surface_force",
    "casimir_force",
]

STRESS_PREFACTOR = -1.0 / (2.0 * np.pi)


@dataclass(frozen=True)
class KappaGrid:
    """Gauss-Legendre nodes mapped to (0, inf) by kappa = k0 t/(1-t)."""

    nodes: np.ndarray
    weights: np.ndarray
    count: int
    scale: float

    @classmethod
    def make(cls, count: int, scale: float) -> "KappaGrid":
        if count < 2 or scale <= 0:
            raise ValueError("need count >= 2 and scale > 0")
        x, w = np.polynomial.legendre.leggauss(count)
        t = 0.5 * (x + 1.0)
        wt = 0.5 * w
        nodes = scale * t / (1.0 - t)
        weights = wt * scale / (1.0 - t) ** 2
        return cls(nodes=nodes, weights=weights, count=count, scale=scale)

    def self_test(self, d: float) -> float:
        """Relative error integrating exp(-2 kappa d) (exact: 1/(2d))."""
        approx = float(self.weights @ np.exp(-2.0 * self.nodes * d))
        return abs(approx - 1.0 / (2.0 * d)) * 2.0 * d


@dataclass
class SpectralSample:
    point_index: int
    kappa: float
    values: np.ndarray            # E_n(s1), H_u(s2), H_u(s3), H_v(s4), H_v(s5)
    t_nn: float


@dataclass
class PressureField:
    """Per-quadrature-point normal-normal stress on the measured surface."""

    points: np.ndarray            # (npts, 3)
    normals: np.ndarray
    weights: np.ndarray           # areas
    T_nn: np.ndarray
    object_index: np.ndarray      # scene object index per point


@dataclass
class ForceResult:
    forces: dict[str, np.ndarray]
    pressure: PressureField
    grid: KappaGrid
    spectral: np.ndarray          # (M, npts) t_nn samples
    diagnostics: dict = field(default_factory=dict)


def table1_sources(point: np.ndarray, frame: Frame, eps: float):
    """The five stress-tensor sources at the offset point r + eps*n.

    Rows: plain n-dipole; then derivative dipoles (orientation, derivative)
    = (v, n), (n, v), (n, u), (u, n).
    """
    if eps <= 0:
        raise ValueError("offset eps must be positive")
    loc = np.asarray(point, dtype=float) + eps * frame.n
    return [
        SourceSpec(loc, frame.n, None, kind=1),
        SourceSpec(loc, frame.v, frame.n, kind=2),
        SourceSpec(loc, frame.n, frame.v, kind=3),
        SourceSpec(loc, frame.n, frame.u, kind=4),
        SourceSpec(loc, frame.u, frame.n, kind=5),
    ]


def stress_integrand(kappa: float, values: np.ndarray,
                     use_printed_s5: bool = False) -> float:
    """t_nn(kappa) from the five scattered-field samples.

    ``values`` = [E_n(s1), H_u(s2), H_u(s3), H_v(s4), H_x(s5)] where the
    last entry is H_v(s5) normally, or H_u(s5) when the alternate printed
    index is being exercised (use_printed_s5=True changes only which field
    the caller must have sampled; the combination weights are unchanged).
    """
    v = np.asarray(values, dtype=float)
    if v.shape[-1] != 5 or not np.all(np.isfinite(v)):
        raise ValueError("need five finite field samples")
    return STRESS_PREFACTOR * (kappa ** 2 * v[..., 0]
                               - v[..., 1] + v[..., 2]
                               - v[..., 3] + v[..., 4])


def integrate_kappa(samples: np.ndarray, grid: KappaGrid):
    """T_nn = sum_j w_j t_nn(kappa_j); returns (T_nn, tail_fraction).

    samples: (M,) or (M, npts) t_nn values at the grid nodes.
    tail_fraction is the last node's weighted share, a grid-length check.
    """
    samples = np.asarray(samples)
    T = np.tensordot(grid.weights, samples, axes=(0, 0))
    tail = np.abs(grid.weights[-1] * samples[-1])
    denom = np.maximum(np.abs(T), 1e-300)
    return T, tail / denom


def surface_force(pressure: PressureField, object_index: int | None = None):
    """F = sum_i w_i T_nn(r_i) n_i over the selected object's points."""
    sel = slice(None) if object_index is None \
        else pressure.object_index == object_index
    w = pressure.weights[sel] * pressure.T_nn[sel]
    return w @ pressure.normals[sel]


# --------------------------------------------------------------------------
# per-point sampling machinery
# --------------------------------------------------------------------------

class _PointWork:
    """Cached quadrature points and kappa-independent data for one sample
    point (the graded near-source rules are reused across the kappa grid)."""

    def __init__(self, tab, point, frame, eps):
        self.frame = frame
        self.loc = np.asarray(point, dtype=float) + eps * frame.n
        self.sources = table1_sources(point, frame, eps)
        pts, wts, tri_idx = bem._source_quad_points(tab, self.loc)
        self.pts = pts
        self.wts = wts
        self.rel = pts[:, None, :] - tab.slot_free[tri_idx]
        self.cw = wts[:, None] * tab.slot_c[tri_idx]
        self.Dw = wts[:, None] * tab.slot_D[tri_idx]
        self.slots = tab.slot_idx[tri_idx]

    def rhs_block(self, kappa: float, N: int) -> np.ndarray:
        """(N, 5) tested incident fields of the five sources."""
        out = np.zeros((N, 5))
        for k, src in enumerate(self.sources):
            E = dipole_E_reduced(kappa, src.location, src.e_hat, src.d_hat,
                                 self.pts)
            vals = self.cw * np.einsum("psx,px->ps", self.rel, E)
            for s in range(3):
                np.add.at(out[:, k], self.slots[:, s], vals[:, s])
        return out

    def rows(self, kappa: float, N: int, use_printed_s5: bool):
        """(3, N) rows giving E_n, H_u, H_{v or u}(last) at the point."""
        f = self.frame
        dx = self.loc[None, :] - self.pts
        R = np.linalg.norm(dx, axis=1)
        gval = np.exp(-kappa * R) / (4 * np.pi * R)
        grad_g = (-(kappa + 1.0 / R) * gval / R)[:, None] * dx

        rows = np.zeros((3, N))
        # E_n row (divergence form)
        e_vals = self.cw * np.einsum("psx,x->ps", self.rel, f.n) \
            * gval[:, None] - (self.Dw / kappa ** 2) * (grad_g @ f.n)[:, None]
        for s in range(3):
            np.add.at(rows[0], self.slots[:, s], e_vals[:, s])
        last_dir = f.u if use_printed_s5 else f.v
        for k, dhat in ((1, f.u), (2, last_dir)):
            gxd = np.cross(grad_g, dhat[None, :])
            h_vals = -self.cw * np.einsum("psx,px->ps", self.rel, gxd)
            for s in range(3):
                np.add.at(rows[k], self.slots[:, s], h_vals[:, s])
        return rows


def _sample_points(mesh: Mesh, rule: str, measure_ids):
    """Evaluation points, frames, weights on the measured triangles."""
    pts, nrm, wts, obj, frames, tri = [], [], [], [], [], []
    all_pts = quadrature_points(mesh, rule)
    per_tri = len(all_pts) // mesh.num_triangles
    for i, (p, w, fr) in enumerate(all_pts):
        t = i // per_tri
        o = int(mesh.object_id[t])
        if measure_ids is not None and o not in measure_ids:
            continue
        pts.append(p)
        nrm.append(fr.n)
        wts.append(w)
        obj.append(o)
        frames.append(fr)
        tri.append(t)
    return (np.array(pts), np.array(nrm), np.array(wts),
            np.array(obj), frames, np.array(tri))


def scene_gap(mesh: Mesh) -> float:
    """Smallest vertex-to-vertex distance between distinct objects, or a
    characteristic size for single-object scenes."""
    ids = np.unique(mesh.object_id)
    if ids.size < 2:
        lo, hi = mesh.bounding_box()
        return float(np.max(hi - lo))
    tri_obj = mesh.object_id
    vert_obj = np.full(mesh.num_vertices, -1, dtype=np.int64)
    for t, tri in enumerate(mesh.triangles):
        vert_obj[tri] = tri_obj[t]
    best = np.inf
    for a in range(ids.size):
        va = mesh.vertices[vert_obj == ids[a]]
        for b in range(a + 1, ids.size):
            vb = mesh.vertices[vert_obj == ids[b]]
            d2 = np.sum((va[:, None, :] - vb[None, :, :]) ** 2, axis=-1)
            best = min(best, float(np.sqrt(d2.min())))
    return best


def casimir_force(scene, progress=None) -> ForceResult:
    """Full pipeline: per kappa node assemble Z once, factorize once, solve
    5 x npts excitations, sample the stress integrand, then integrate over
    kappa and over the measured surface.
    """
    from .scene import SceneConfig  # local import avoids cycle
    if not isinstance(scene, SceneConfig):
        raise TypeError("casimir_force expects a SceneConfig")
    scene.validate()
    mesh, names = scene.build()
    basis = build_rwg(mesh)
    quad = scene.quad_config()
    tab = bem._tables(basis, quad)

    measure_ids = None
    if scene.measured is not None:
        measure_ids = {names.index(scene.measured)}
    pts, nrm, wts, obj, frames, tri = _sample_points(
        mesh, scene.surface_rule, measure_ids)
    npts = len(pts)
    h_local = mesh.edge_lengths()[tri]
    eps = scene.epsilon_factor * h_local

    gap = scene_gap(mesh)
    kappa0 = gap and (1.0 / gap)
    if scene.kappa0 != "auto":
        kappa0 = float(scene.kappa0)
    grid = KappaGrid.make(scene.kappa_M, kappa0)

    work = [_PointWork(tab, pts[i], frames[i], eps[i]) for i in range(npts)]
    eps_half_work = None
    if scene.convergence_check:
        eps_half_work = [_PointWork(tab, pts[i], frames[i], 0.5 * eps[i])
                         for i in range(npts)]

    N = basis.count
    tmat = np.zeros((grid.count, npts))
    tmat_half = np.zeros((grid.count, npts)) if eps_half_work else None
    conds = []
    for j, kappa in enumerate(grid.nodes):
        Z = assemble_Z(basis, kappa, quad)
        ws = factorize(Z)
        conds.append(ws.condition_estimate)
        for batch, target in (((work, tmat),) if tmat_half is None
                              else ((work, tmat), (eps_half_work, tmat_half))):
            rhs = np.empty((N, 5 * npts))
            for i, pw in enumerate(batch):
                rhs[:, 5 * i:5 * i + 5] = pw.rhs_block(kappa, N)
            coeffs = bem.solve(ws, rhs)
            for i, pw in enumerate(batch):
                rows = pw.rows(kappa, N, scene.use_printed_s5)
                a = coeffs[:, 5 * i:5 * i + 5]
                values = np.array([
                    rows[0] @ a[:, 0],    # E_n(s1)
                    rows[1] @ a[:, 1],    # H_u(s2)
                    rows[1] @ a[:, 2],    # H_u(s3)
                    rows[2] @ a[:, 3],    # H_v(s4)
                    rows[2] @ a[:, 4],    # H_v(s5) (or H_u if configured)
                ])
                target[j, i] = stress_integrand(kappa, values)
        if progress is not None:
            progress(j, grid.count, kappa)

    T_nn, tails = integrate_kappa(tmat, grid)
    pressure = PressureField(points=pts, normals=nrm, weights=wts,
                             T_nn=T_nn, object_index=obj)
    forces = {name: surface_force(pressure, k)
              for k, name in enumerate(names)
              if measure_ids is None or k in measure_ids}

    diagnostics = {
        "gap": gap,
        "kappa0": kappa0,
        "condition_max": float(np.max(conds)),
        "tail_fraction_max": float(np.max(tails)),
        "grid_warning": bool(np.max(tails) > 1e-2),
        "num_points": npts,
        "num_unknowns": N,
    }
    # decay beyond the peak of the aggregate |integrand| (diagnostic only)
    agg = np.abs(tmat @ wts)
    peak = int(np.argmax(agg))
    diagnostics["kappa_decay_monotone"] = bool(
        np.all(np.diff(agg[peak:]) <= 1e-12 + 1e-6 * agg[peak]))
    if tmat_half is not None:
        T_half, _ = integrate_kappa(tmat_half, grid)
        p_half = PressureField(points=pts, normals=nrm, weights=wts,
                               T_nn=T_half, object_index=obj)
        f_half = {name: surface_force(p_half, k)
                  for k, name in enumerate(names)
                  if measure_ids is None or k in measure_ids}
        diagnostics["epsilon_half_forces"] = {
            k: v.tolist() for k, v in f_half.items()}
        rel = max(
            np.linalg.norm(f_half[k] - forces[k])
            / max(np.linalg.norm(forces[k]), 1e-300) for k in forces)
        diagnostics["epsilon_half_rel_change"] = float(rel)

    return ForceResult(forces=forces, pressure=pressure, grid=grid,
                       spectral=tmat, diagnostics=diagnostics)
