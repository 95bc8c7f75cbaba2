"""Command line front end.

Subcommands write CSV/JSON (and optionally SVG) into ``--out-dir``:

``sweep-azimuth``
    ``sweep.csv``: phi, mean_dky_classical, rms_dky_classical,
    mean_dkx_classical, rms_dkx_classical, mean_dky_quantum, rms_dky_quantum,
    n_open, n_trajectories, n_failed, frac_dkx_ok, max_rel_dkx,
    max_energy_drift, stderr_rms_dky_classical.  ``scatter.csv``: phi, dky,
    one trajectory per angle with its own random impact point.
``spectrum``
    per azimuth ``i``: ``spectrum_<i>_quantum.csv`` and
    ``spectrum_<i>_classical.csv`` (n, k_y, open, P) with a JSON sidecar,
    and ``spectrum_<i>_curves.csv`` (k, f_quantum, f_classical), the
    Lorentzian-broadened sticks on the transfer axis ``k = Delta k_y``.
``width-scan``
    ``width_scan.csv``: E, W_phi_analytic, W_phi_classical, W_phi_quantum,
    W_ky_analytic, W_ky_classical, W_ky_quantum, n_open, errors; and
    ``width_curves.csv``: E, phi, rms_dky_classical, rms_dky_quantum.
``trajectory``
    ``trajectory.csv`` (t, x, y, z, kx, ky, kz) and ``trajectory.json``.
``potential-table``
    ``potential_table.csv``: y, z, V, V_av.

All wavevectors are in 1/A, energies in meV, angles in rad.  Every output
directory gets ``config.json``, which reloads with ``--config``.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from grazesim import analysis, classical, quantum
from grazesim.config import ConfigError, RunConfig, load_config
from grazesim.potential import averaged_potential, evaluate
from grazesim.spectra import quantum_moments
from grazesim.svg import Plot

log = logging.getLogger("grazesim")


class UsageError(Exception):
    pass


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    if v is None:
        return "nan"
    return repr(float(v))


def write_csv(path: Path, header: list[str], rows) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
    return path


def write_json(path: Path, data) -> Path:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    return path


def _prepare(cfg: RunConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(cfg.echo())
    return out


def resolve_threads(flag: int | None, cfg: RunConfig) -> int:
    if flag is not None:
        return flag
    env = os.environ.get("GRAZESIM_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise UsageError(f"GRAZESIM_THREADS must be an integer, got {env!r}") from None
        if n < 1:
            raise UsageError("GRAZESIM_THREADS must be >= 1")
        return n
    if cfg.threads is not None:
        return cfg.threads
    return os.cpu_count() or 1


# -- subcommands -------------------------------------------------------------------

def cmd_sweep_azimuth(cfg: RunConfig, threads: int = 1) -> list[Path]:
    grid = cfg.sweep.grid()
    if not grid:
        raise UsageError("empty azimuth grid")
    params = cfg.potential.build()
    ctrl = cfg.integrator.build()
    specs = [cfg.incidence.build(p) for p in grid]
    out = _prepare(cfg)
    rows = classical.azimuth_sweep(specs, cfg.sweep.n_trajectories, cfg.seed, params, ctrl, threads)

    q_mean, q_rms, n_open = [], [], []
    for spec in specs:
        if cfg.sweep.quantum:
            sp = _quantum_spectrum(cfg, spec, params)
            m, r = quantum_moments(sp)
            q_mean.append(m)
            q_rms.append(r)
            n_open.append(int(sp.open.sum()))
        else:
            q_mean.append(None)
            q_rms.append(None)
            n_open.append(quantum.auto_basis(spec, params, cfg.quantum.buffer).n_open)

    header = ["phi", "mean_dky_classical", "rms_dky_classical", "mean_dkx_classical",
              "rms_dkx_classical", "mean_dky_quantum", "rms_dky_quantum", "n_open",
              "n_trajectories", "n_failed", "frac_dkx_ok", "max_rel_dkx", "max_energy_drift",
              "stderr_rms_dky_classical"]
    table = [
        (r.phi, r.mean_dky, r.rms_dky, r.mean_dkx, r.rms_dkx, qm, qr, no, r.n_trajectories,
         r.n_failed, r.frac_dkx_ok, r.max_rel_dkx, r.max_energy_drift, r.stderr_rms_dky)
        for r, qm, qr, no in zip(rows, q_mean, q_rms, n_open)
    ]
    files = [write_csv(out / "sweep.csv", header, table)]

    # one trajectory per angle, each with its own impact point
    scatter_states = np.array([
        classical.initial_condition_array(s, params, 1, cfg.seed, start=i)[0]
        for i, s in enumerate(specs)
    ])
    ens = classical.run_ensemble(scatter_states, params, ctrl, specs[0].mass,
                                 specs[0].z_start, threads)
    files.append(write_csv(out / "scatter.csv", ["phi", "dky", "dkx", "status"],
                           [(p, d[1], d[0], classical.STATUS_NAMES[int(st)])
                            for p, d, st in zip(grid, ens.delta_k, ens.status)]))
    if cfg.svg:
        G = params.G
        plot = Plot("Delta k_y versus azimuth", "phi (rad)", "Delta k_y / G")
        plot.add("classical mean", grid, [r.mean_dky / G for r in rows])
        plot.add("classical rms", grid, [r.rms_dky / G for r in rows])
        if cfg.sweep.quantum:
            plot.add("quantum mean", grid, np.array(q_mean) / G, "dots")
            plot.add("quantum rms", grid, np.array(q_rms) / G, "dots")
        plot.add("single trajectories", grid, ens.delta_k[:, 1] / G, "dots")
        files.append(plot.save(out / "sweep.svg"))
    return files


def _quantum_spectrum(cfg: RunConfig, spec, params):
    q = cfg.quantum
    if q.converge:
        return quantum.converged_spectrum(spec, params, q.buffer, q.points_per_wavelength, q.tol)[0]
    return quantum.solve_incidence(spec, params, q.buffer, q.points_per_wavelength)


def _spectrum_rows(sp):
    return [(n, k, o, p) for n, k, o, p in zip(sp.n, sp.ky, sp.open, sp.probabilities)]


def cmd_spectrum(cfg: RunConfig, threads: int = 1) -> list[Path]:
    phis = [float(p) for p in cfg.spectrum.phis]
    if not phis:
        raise UsageError("empty azimuth list for spectrum")
    params = cfg.potential.build()
    ctrl = cfg.integrator.build()
    G = params.G
    gamma = cfg.spectrum.gamma if cfg.spectrum.gamma is not None else 0.2 * G
    axis = np.linspace(-cfg.spectrum.k_span * G, cfg.spectrum.k_span * G, cfg.spectrum.n_points)
    out = _prepare(cfg)
    files = []
    for i, phi in enumerate(phis):
        spec = cfg.incidence.build(phi)
        qs = _quantum_spectrum(cfg, spec, params)
        ens = classical.run_incidence(spec, params, cfg.spectrum.n_trajectories, cfg.seed,
                                      ctrl, threads)
        if not ens.completed.all():
            raise RuntimeError(f"{int((~ens.completed).sum())} trajectories failed at phi={phi}")
        cs = classical.quasiclassical_spectrum(ens, G, qs.meta["ky0"])
        stem = f"spectrum_{i:02d}"
        header = ["n", "k_y", "open", "P"]
        files.append(write_csv(out / f"{stem}_quantum.csv", header, _spectrum_rows(qs)))
        files.append(write_csv(out / f"{stem}_classical.csv", header, _spectrum_rows(cs)))
        fq = analysis.convolve_lorentzian(qs, gamma, axis)
        fc = analysis.convolve_lorentzian(cs, gamma, axis)
        files.append(write_csv(out / f"{stem}_curves.csv", ["k", "f_quantum", "f_classical"],
                               zip(axis, fq, fc)))
        meta = {
            "phi": phi, "G": G, "gamma": gamma, "sum_P_quantum": qs.total,
            "quantum": {k: v for k, v in qs.meta.items() if _jsonable(v)},
            "quantum_settings": {"buffer": cfg.quantum.buffer,
                                 "points_per_wavelength": cfg.quantum.points_per_wavelength,
                                 "converge": cfg.quantum.converge, "tol": cfg.quantum.tol},
            "classical": {"n_trajectories": cfg.spectrum.n_trajectories, "seed": cfg.seed},
            "n_open": int(qs.open.sum()),
        }
        files.append(write_json(out / f"{stem}.json", meta))
        if cfg.svg:
            plot = Plot(f"Diffraction spectrum, phi = {phi:g} rad", "Delta k_y / G", "P")
            plot.add("quantum", axis / G, fq * G)
            plot.add("quasiclassical", axis / G, fc * G)
            plot.add("quantum P_n", qs.n[qs.open], qs.probabilities[qs.open], "sticks")
            files.append(plot.save(out / f"{stem}.svg"))
    return files


def _jsonable(v) -> bool:
    return isinstance(v, (int, float, str, bool)) or v is None


def cmd_width_scan(cfg: RunConfig, threads: int = 1) -> tuple[list[Path], list[analysis.ScanRow]]:
    energies = cfg.scan.grid()
    params = cfg.potential.build()
    ctrl = cfg.integrator.build()
    s = cfg.scan
    settings = analysis.ScanSettings(
        n_phi=s.n_phi, phi_span=s.phi_span, n_trajectories=s.n_trajectories, seed=cfg.seed,
        buffer=s.buffer, points_per_wavelength=s.points_per_wavelength, threads=threads,
        classical=s.classical, quantum=s.quantum,
    )
    out = _prepare(cfg)
    rows = analysis.energy_scan(energies, cfg.incidence.build(), params, ctrl, settings)

    def w(est, attr):
        return getattr(est, attr) if est is not None else None

    table = [
        (r.energy, r.analytic.w_phi, w(r.classical, "w_phi"), w(r.quantum, "w_phi"),
         r.analytic.w_py, w(r.classical, "w_py"), w(r.quantum, "w_py"), r.n_open,
         "; ".join(r.errors))
        for r in rows
    ]
    header = ["E", "W_phi_analytic", "W_phi_classical", "W_phi_quantum", "W_ky_analytic",
              "W_ky_classical", "W_ky_quantum", "n_open", "errors"]
    files = [write_csv(out / "width_scan.csv", header, table)]
    curves = []
    for r in rows:
        qmap = dict(r.quantum_curve)
        cmap = dict(r.classical_curve)
        for phi in sorted(set(qmap) | set(cmap)):
            curves.append((r.energy, phi, cmap.get(phi), qmap.get(phi)))
    files.append(write_csv(out / "width_curves.csv",
                           ["E", "phi", "rms_dky_classical", "rms_dky_quantum"], curves))
    if cfg.svg:
        e_ev = np.array([r.energy for r in rows]) / 1e3
        plot = Plot("Quasiresonance width versus energy", "E (eV)", "W_phi (rad)")
        plot.add("analytic", e_ev, [r.analytic.w_phi for r in rows])
        plot.add("classical FWHM", e_ev, [w(r.classical, "w_phi") or np.nan for r in rows], "dots")
        plot.add("quantum FWHM", e_ev, [w(r.quantum, "w_phi") or np.nan for r in rows], "dots")
        files.append(plot.save(out / "width_scan.svg"))
    return files, rows


def cmd_trajectory(cfg: RunConfig, threads: int = 1) -> list[Path]:
    params = cfg.potential.build()
    ctrl = cfg.integrator.build()
    t = cfg.trajectory
    spec = cfg.incidence.build(t.phi)
    classical.check_asymptotic_start(spec, params)
    state = classical.sample_initial_conditions(spec, params, 1, cfg.seed, start=t.index)[0]
    if t.x0 is not None or t.y0 is not None:
        state = classical.TrajectoryState(
            t.x0 if t.x0 is not None else state.x, t.y0 if t.y0 is not None else state.y,
            state.z, state.kx, state.ky, state.kz)
    out = _prepare(cfg)
    res = classical.integrate_trajectory(state, params, ctrl, spec.mass)
    path = classical.trajectory_path(state, params, ctrl, spec.mass)
    files = [write_csv(out / "trajectory.csv", ["t", "x", "y", "z", "kx", "ky", "kz"], path)]
    summary = {
        "initial": state.as_array().tolist(), "final": res.final.as_array().tolist(),
        "time": res.final.time, "delta_kx": res.delta_kx, "delta_ky": res.delta_ky,
        "delta_kz": res.delta_kz, "energy_drift": res.energy_drift, "status": res.status,
        "steps": res.steps, "delta_ky_over_G": res.delta_ky / params.G,
    }
    files.append(write_json(out / "trajectory.json", summary))
    if cfg.svg:
        plot = Plot("Trajectory", "y (A)", "z (A)")
        plot.add("path", path[:, 2], path[:, 3])
        files.append(plot.save(out / "trajectory.svg"))
    if res.status != "completed":
        raise RuntimeError(f"trajectory did not complete: {res.status}")
    return files


def cmd_potential_table(cfg: RunConfig, threads: int = 1) -> list[Path]:
    params = cfg.potential.build()
    tb = cfg.table
    if tb.n_y < 1 or tb.n_z < 1 or not tb.z_max > tb.z_min:
        raise UsageError("table needs n_y, n_z >= 1 and z_max > z_min")
    y = np.linspace(0.0, params.period, tb.n_y)
    z = np.linspace(tb.z_min, tb.z_max, tb.n_z)
    yy, zz = np.meshgrid(y, z, indexing="ij")
    v = evaluate(np.full_like(yy, tb.x), yy, zz, params)
    vav = averaged_potential(yy, zz, params)
    out = _prepare(cfg)
    files = [write_csv(out / "potential_table.csv", ["y", "z", "V", "V_av"],
                       zip(yy.ravel(), zz.ravel(), v.ravel(), vav.ravel()))]
    if cfg.svg:
        plot = Plot("Averaged potential", "z (A)", "V_av (meV)")
        for j in sorted({0, tb.n_y // 2}):
            mask = vav[j] < 5 * params.well_depth
            plot.add(f"y = {y[j]:.3g} A", z[mask], vav[j][mask])
        files.append(plot.save(out / "potential_table.svg"))
    return files


COMMANDS = {
    "sweep-azimuth": cmd_sweep_azimuth,
    "spectrum": cmd_spectrum,
    "width-scan": cmd_width_scan,
    "trajectory": cmd_trajectory,
    "potential-table": cmd_potential_table,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="grazesim", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="TOML config (or a config.json echo)")
        p.add_argument("--seed", type=int)
        p.add_argument("--threads", type=int)
        p.add_argument("--out-dir")
        p.add_argument("--svg", action="store_true", default=None)
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "spectrum":
            p.add_argument("--phi", type=float, action="append", help="azimuth (repeatable)")
            p.add_argument("--gamma", type=float, help="Lorentzian half width (1/A)")
        if name == "trajectory":
            p.add_argument("--phi", type=float)
            p.add_argument("--x0", type=float)
            p.add_argument("--y0", type=float)
            p.add_argument("--index", type=int)
    return ap


def apply_flags(cfg: RunConfig, args) -> RunConfig:
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out_dir is not None:
        cfg.out_dir = args.out_dir
    if args.svg:
        cfg.svg = True
    if args.command == "spectrum":
        if args.phi:
            cfg.spectrum.phis = list(args.phi)
        if args.gamma is not None:
            if not args.gamma > 0:
                raise ConfigError("--gamma must be positive")
            cfg.spectrum.gamma = args.gamma
    if args.command == "trajectory":
        for key in ("phi", "x0", "y0", "index"):
            if getattr(args, key) is not None:
                setattr(cfg.trajectory, key, getattr(args, key))
    return cfg


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = apply_flags(load_config(args.config), args)
        if args.threads is not None and args.threads < 1:
            raise UsageError("--threads must be >= 1")
        threads = resolve_threads(args.threads, cfg)
        result = COMMANDS[args.command](cfg, threads)
    except (ConfigError, UsageError) as exc:
        print(f"grazesim: error: {exc}", file=sys.stderr)
        return 2
    except (RuntimeError, ValueError, ArithmeticError) as exc:
        print(f"grazesim: failed: {exc}", file=sys.stderr)
        return 1
    if args.command == "width-scan":
        files, rows = result
        failed = [r for r in rows if r.errors]
        for r in failed:
            print(f"grazesim: E={r.energy:g} meV: {'; '.join(r.errors)}", file=sys.stderr)
        if failed:
            return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
