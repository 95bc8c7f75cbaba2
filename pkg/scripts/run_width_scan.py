"""Quasiresonance width versus incident energy: analytic, classical and quantum.

    python scripts/run_width_scan.py [--config CFG] [--out-dir DIR] [--threads N]
"""

import argparse
from pathlib import Path

from grazesim import cli
from grazesim.config import load_config

HERE = Path(__file__).resolve().parent


def fmt(v):
    return f"{v:8.4f}" if v == v else "     nan"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=str(HERE / "configs" / "reference_beam.toml"))
    ap.add_argument("--out-dir", default="runs/width_scan")
    ap.add_argument("--threads", type=int)
    args = ap.parse_args()
    cfg = load_config(args.config)
    cfg.out_dir = args.out_dir
    _, rows = cli.cmd_width_scan(cfg, cli.resolve_threads(args.threads, cfg))
    print(f"{'E/eV':>8} {'W_an':>8} {'W_cl':>8} {'W_q':>8} {'Wky_an':>8} {'open':>5}")
    for r in rows:
        cl = r.classical.w_phi if r.classical else float("nan")
        q = r.quantum.w_phi if r.quantum else float("nan")
        print(f"{r.energy / 1e3:8.1f} {fmt(r.analytic.w_phi)} {fmt(cl)} {fmt(q)} "
              f"{r.analytic.w_py:8.3f} {r.n_open:5d}" + (f"  {r.errors}" if r.errors else ""))


if __name__ == "__main__":
    main()
