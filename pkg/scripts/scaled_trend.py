"""Scaled power sweep of all four formats and the qualitative trend verdicts.

    python scripts/scaled_trend.py --config scripts/configs/scaled_20span.json --out results/scaled_20span
    python scripts/scaled_trend.py --config scripts/configs/scaled_60span.json --from-csv results/scaled_60span/sweep_power_dbm.csv
"""

import argparse
import logging
from pathlib import Path

from setpart8d.cli import cmd_sweep, load_config
from setpart8d.formats import FormatKind
from setpart8d.montecarlo import sweeps_from_csv
from setpart8d.trends import gain, optimum, power_trends

KINDS = ["PDM-BPSK", "PB-5B8D", "PA-7B8D", "PDM-QPSK"]


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--config", required=True)
    ap.add_argument("--out", default="results/scaled")
    ap.add_argument("--from-csv", help="evaluate an existing sweep CSV instead of running")
    ap.add_argument("--tol-db", type=float, default=0.15)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    cfg = load_config(args.config)
    csv_path = Path(args.from_csv) if args.from_csv else Path(args.out) / "sweep_power_dbm.csv"
    if not args.from_csv:
        cmd_sweep(args.config, "power", KINDS, args.out)
    sim = cfg.sim_config(FormatKind.PDM_QPSK)
    sweeps = {s.format: s for s in sweeps_from_csv(csv_path.read_text(), sim)}

    for s in sweeps.values():
        pts = "  ".join(
            f"{p:+.0f}:{r.q2_db:5.2f}({r.bit_errors})" for p, r in s.points
        )
        print(f"{s.format.value:<9} optimum {optimum(s):+.0f} dBm | {pts}")
    for a, b in ((FormatKind.PB_5B8D, FormatKind.PDM_BPSK), (FormatKind.PA_7B8D, FormatKind.PDM_QPSK)):
        x, g = gain(sweeps[a], sweeps[b], min_errors=1)
        print(f"{a.value} - {b.value}: " + ", ".join(f"{p:+.0f}:{v:+.2f}" for p, v in zip(x, g)))
    print()
    for v in power_trends(sweeps, cfg.min_errors, args.tol_db):
        print(v.line())


if __name__ == "__main__":
    main()
