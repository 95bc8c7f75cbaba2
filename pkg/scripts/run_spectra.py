"""Quantum and quasiclassical diffraction spectra at four azimuths.

    python scripts/run_spectra.py [--config CFG] [--out-dir DIR] [--gamma G]
"""

import argparse
import json
from pathlib import Path

import numpy as np

from grazesim import cli
from grazesim.config import load_config

HERE = Path(__file__).resolve().parent


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=str(HERE / "configs" / "reference_beam.toml"))
    ap.add_argument("--out-dir", default="runs/spectra")
    ap.add_argument("--threads", type=int)
    ap.add_argument("--gamma", type=float, help="Lorentzian half width in 1/A (default 0.2 G)")
    args = ap.parse_args()
    cfg = load_config(args.config)
    cfg.out_dir = args.out_dir
    if args.gamma is not None:
        cfg.spectrum.gamma = args.gamma
    cli.cmd_spectrum(cfg, cli.resolve_threads(args.threads, cfg))
    out = Path(args.out_dir)
    for i, phi in enumerate(cfg.spectrum.phis):
        q = np.genfromtxt(out / f"spectrum_{i:02d}_quantum.csv", delimiter=",", names=True)
        c = np.genfromtxt(out / f"spectrum_{i:02d}_classical.csv", delimiter=",", names=True)
        meta = json.loads((out / f"spectrum_{i:02d}.json").read_text())
        top = ", ".join(f"{int(n)}:{p:.3f}" for n, p in zip(q["n"], q["P"]) if p > 0.01)
        p0c = float(c["P"][c["n"] == 0].sum())
        print(f"phi = {phi:5.3f}  open {meta['n_open']:2d}  quantum [{top}]  "
              f"quasiclassical P0 = {p0c:.3f}")


if __name__ == "__main__":
    main()
