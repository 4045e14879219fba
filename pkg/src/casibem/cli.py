"""Command-line front end: verify-scattering, force, and sweep runs.

Outputs are UTF-8 CSV/JSON files; every file header embeds the tool
version and a hash of the fully-resolved config so runs are traceable.
Exit codes: 0 ok, 2 config error, 3 numerical failure, 4 I/O failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .fluct import casimir_force
from .oracles import pfa_sphere_sphere, read_reference_csv
from .scene import ConfigError, ObjectSpec, SceneConfig
from .scattering import sphere_rcs_comparison

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


def _header_lines(cfg: SceneConfig) -> str:
    return (f"# casibem {__version__}\n"
            f"# config {cfg.config_hash()}\n")


def _write_text(path, text):
    try:
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(text)
    except OSError as e:
        raise _IOFailure(str(e)) from e


class _IOFailure(RuntimeError):
    pass


def _fmt(x: float) -> str:
    return f"{x:.12e}"


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_verify_scattering(cfg: SceneConfig, outdir: str) -> int:
    """BEM plane-wave RCS vs the Mie series; also checks refinement trend."""
    report = []
    worst = 0.0
    ok = True
    for ka in cfg.ka_values:
        errs = {}
        for ref in (cfg.verify_refinement - 1, cfg.verify_refinement):
            t0 = time.time()
            rows = sphere_rcs_comparison(float(ka), ref, plane="E")
            errs[ref] = float(rows[:, 3].max())
            lines = [_header_lines(cfg)
                     + "theta_deg,rcs_bem,rcs_mie,rel_err\n"]
            lines += [",".join(_fmt(v) for v in r) + "\n" for r in rows]
            _write_text(os.path.join(
                outdir, f"rcs_ka{ka}_s{ref}.csv"), "".join(lines))
            report.append(f"ka={ka} s={ref}: max rel err = {errs[ref]:.4f}"
                          f" ({time.time() - t0:.1f}s)")
        final_err = errs[cfg.verify_refinement]
        worst = max(worst, final_err)
        if final_err > cfg.rcs_tolerance:
            ok = False
            report.append(f"ka={ka}: FAIL (err {final_err:.4f} > "
                          f"{cfg.rcs_tolerance})")
        if errs[cfg.verify_refinement] >= errs[cfg.verify_refinement - 1]:
            ok = False
            report.append(f"ka={ka}: FAIL (no refinement improvement)")
    report.append(f"overall: {'PASS' if ok else 'FAIL'} "
                  f"(worst {worst:.4f}, tol {cfg.rcs_tolerance})")
    text = _header_lines(cfg) + "\n".join(report) + "\n"
    _write_text(os.path.join(outdir, "verify_scattering.txt"), text)
    print(text, end="")
    return EXIT_OK if ok else EXIT_NUMERICAL


def _run_force(cfg: SceneConfig, outdir: str, tag: str = "force"):
    result = casimir_force(cfg)
    hdr = _header_lines(cfg)

    p = result.pressure
    lines = [hdr + "x,y,z,nx,ny,nz,weight,T_nn,object\n"]
    for i in range(len(p.T_nn)):
        lines.append(",".join(
            [_fmt(v) for v in p.points[i]]
            + [_fmt(v) for v in p.normals[i]]
            + [_fmt(p.weights[i]), _fmt(p.T_nn[i]), str(int(p.object_index[i]))]
        ) + "\n")
    _write_text(os.path.join(outdir, f"{tag}_pressure.csv"), "".join(lines))

    agg = result.spectral @ p.weights
    lines = [hdr + "kappa,weight,aggregate_t_nn\n"]
    for j in range(result.grid.count):
        lines.append(f"{_fmt(result.grid.nodes[j])},"
                     f"{_fmt(result.grid.weights[j])},{_fmt(agg[j])}\n")
    _write_text(os.path.join(outdir, f"{tag}_spectral.csv"), "".join(lines))

    summary = {
        "version": __version__,
        "config_hash": cfg.config_hash(),
        "forces": {k: [float(x) for x in v] for k, v in result.forces.items()},
        "diagnostics": result.diagnostics,
    }
    _write_text(os.path.join(outdir, f"{tag}_force.json"),
                json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return result


def cmd_force(cfg: SceneConfig, outdir: str) -> int:
    t0 = time.time()
    result = _run_force(cfg, outdir)
    for name, F in sorted(result.forces.items()):
        print(f"{name}: F = [{F[0]:.6e}, {F[1]:.6e}, {F[2]:.6e}]")
    print(f"condition max {result.diagnostics['condition_max']:.3e}, "
          f"tail fraction {result.diagnostics['tail_fraction_max']:.2e}, "
          f"{time.time() - t0:.1f}s")
    if result.diagnostics.get("grid_warning"):
        print("warning: kappa grid may be too short (tail fraction > 1e-2)")
    return EXIT_OK


def cmd_sweep(cfg: SceneConfig, outdir: str, reference=None) -> int:
    """Force versus separation; objects are displaced along sweep_axis.

    The first object stays put; all others translate so the configured
    baseline gap becomes each requested separation.
    """
    if len(cfg.separations) < 2:
        raise ConfigError("sweep needs at least 2 separations")
    axis = np.asarray(cfg.sweep_axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    ref_data = read_reference_csv(reference) if reference else None

    from .fluct import scene_gap
    base_mesh, _ = cfg.build()
    base_gap = scene_gap(base_mesh)
    # radius scale for the dimensionless output F R^2 vs Z/R
    R = cfg.objects[0].radius * cfg.objects[0].scale

    rows = []
    for Z in cfg.separations:
        shifted = []
        for i, obj in enumerate(cfg.objects):
            o = ObjectSpec(**{**obj.__dict__})
            if i > 0:
                delta = (float(Z) - base_gap) * axis
                o.translate = [t + d for t, d in zip(o.translate, delta)]
            shifted.append(o)
        d = cfg.to_dict()
        d["objects"] = [dict(o.__dict__) for o in shifted]
        d["separations"] = []
        d["mode"] = "force"
        sub = SceneConfig.from_dict(d)
        result = _run_force(sub, outdir, tag=f"sweep_Z{Z}")
        name = cfg.measured or cfg.objects[0].object_id
        F = result.forces[name]
        f_axis = float(F @ axis)
        rows.append((float(Z) / R, f_axis * R * R,
                     result.diagnostics["tail_fraction_max"]))
        print(f"Z={Z}: F_axis*R^2 = {f_axis * R * R:.6e}")

    lines = [_header_lines(cfg)]
    if ref_data is not None:
        lines.append("z_over_r,f_r2,tail_fraction,f_r2_reference\n")
        for zr, fr2, tail in rows:
            interp = float(np.interp(zr, ref_data[:, 0], ref_data[:, 1]))
            lines.append(f"{_fmt(zr)},{_fmt(fr2)},{_fmt(tail)},"
                         f"{_fmt(interp)}\n")
    else:
        lines.append("z_over_r,f_r2,tail_fraction\n")
        for zr, fr2, tail in rows:
            lines.append(f"{_fmt(zr)},{_fmt(fr2)},{_fmt(tail)}\n")
    _write_text(os.path.join(outdir, "sweep.csv"), "".join(lines))
    return EXIT_OK


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------

def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="casibem",
        description="Casimir forces on 3D perfect conductors by boundary "
                    "elements; plus a Mie-validated scattering checker.")
    parser.add_argument("command",
                        choices=["verify-scattering", "force", "sweep"])
    parser.add_argument("--config", required=True, help="scene JSON file")
    parser.add_argument("--output", default=None,
                        help="output directory (default: config output_dir)")
    parser.add_argument("--threads", type=int, default=None,
                        help="cap BLAS worker threads")
    parser.add_argument("--reference", default=None,
                        help="reference CSV (z_over_r,f_r2) for sweep")
    args = parser.parse_args(argv)

    if args.threads is not None:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)

    try:
        cfg = SceneConfig.load(args.config)
        cfg.validate()
    except (ConfigError, OSError, ValueError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    outdir = args.output or cfg.output_dir
    try:
        if args.command == "verify-scattering":
            return cmd_verify_scattering(cfg, outdir)
        if args.command == "force":
            return cmd_force(cfg, outdir)
        return cmd_sweep(cfg, outdir, reference=args.reference)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except _IOFailure as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    except (RuntimeError, FloatingPointError, np.linalg.LinAlgError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
