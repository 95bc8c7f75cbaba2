"""Mean and RMS wavevector transfer versus azimuth, classical and quantum.

    python scripts/run_azimuth_sweep.py [--config CFG] [--out-dir DIR] [--threads N]
"""

import argparse
import csv
from pathlib import Path

from grazesim import cli
from grazesim.config import load_config

HERE = Path(__file__).resolve().parent


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=str(HERE / "configs" / "reference_beam.toml"))
    ap.add_argument("--out-dir", default="runs/azimuth_sweep")
    ap.add_argument("--threads", type=int)
    args = ap.parse_args()
    cfg = load_config(args.config)
    cfg.out_dir = args.out_dir
    cli.cmd_sweep_azimuth(cfg, cli.resolve_threads(args.threads, cfg))
    G = cfg.potential.build().G
    with open(Path(args.out_dir) / "sweep.csv") as fh:
        rows = list(csv.DictReader(fh))
    print(f"{'phi':>8} {'rms_cl/G':>9} {'rms_q/G':>9} {'mean_cl/G':>10} {'open':>5}")
    for r in rows:
        print(f"{float(r['phi']):8.3f} {float(r['rms_dky_classical']) / G:9.3f} "
              f"{float(r['rms_dky_quantum']) / G:9.3f} {float(r['mean_dky_classical']) / G:10.3f} "
              f"{r['n_open']:>5}")


if __name__ == "__main__":
    main()
