"""Full-scale power and reach sweeps (hours on a desktop) with the headline numbers.

    SETPART8D_THREADS=8 python scripts/full_scale.py --out results/full_scale
"""

import argparse
import json
import logging
import math
from pathlib import Path

from setpart8d.cli import cmd_sweep, load_config
from setpart8d.formats import FormatKind
from setpart8d.montecarlo import FEC_THRESHOLD_DB, reach_at_threshold, sweeps_from_csv
from setpart8d.trends import optimum

KINDS = ["PDM-BPSK", "PB-5B8D", "PA-7B8D", "PDM-QPSK"]
HERE = Path(__file__).resolve().parent


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--config", default=str(HERE / "configs" / "full_scale.json"))
    ap.add_argument("--out", default="results/full_scale")
    ap.add_argument("--skip-run", action="store_true", help="only summarize existing CSVs")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    if not args.skip_run:
        for axis in ("power", "reach"):
            cmd_sweep(args.config, axis, KINDS, args.out)
    cfg = load_config(args.config)
    sim = cfg.sim_config(FormatKind.PDM_QPSK)
    out = Path(args.out)
    power = {s.format: s for s in sweeps_from_csv((out / "sweep_power_dbm.csv").read_text(), sim)}
    reach = {s.format: s for s in sweeps_from_csv((out / "sweep_spans.csv").read_text(), sim)}

    summary = {"optimum_dbm": {k.value: optimum(s) for k, s in power.items()}, "reach_km": {}}
    for k, s in reach.items():
        try:
            summary["reach_km"][k.value] = reach_at_threshold(s.distances_km(), s.q2(), FEC_THRESHOLD_DB)
        except ValueError:
            summary["reach_km"][k.value] = math.nan
    q60 = {k: dict(zip(s.values(), s.q2())).get(60.0, math.nan) for k, s in reach.items()}
    summary["pa7b8d_gain_at_60_spans_db"] = q60[FormatKind.PA_7B8D] - q60[FormatKind.PDM_QPSK]
    r = summary["reach_km"]
    summary["reach_gain_pa7b8d_pct"] = 100 * (r["PA-7B8D"] / r["PDM-QPSK"] - 1)
    summary["reach_gain_pb5b8d_pct"] = 100 * (r["PB-5B8D"] / r["PDM-BPSK"] - 1)
    text = json.dumps(summary, indent=2, sort_keys=True)
    (out / "summary.json").write_text(text + "\n")
    print(text)


if __name__ == "__main__":
    main()
