"""Sweep CustomTanh alpha and print the ASR/ESR ladder.

    python3 scripts/alpha_sweep.py configs/sweep_trend.json --out runs/trend

Writes rows.csv, aggregate.csv and scatter.csv. Worker count comes from
--workers or $AMPALIAS_WORKERS.
"""

import argparse
import json
import logging
import time
from pathlib import Path

from ampalias.activations import parse_spec
from ampalias.harness import SweepPlan, export_csv, export_scatter, run_sweep, worker_count


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("plan", help="sweep plan JSON")
    ap.add_argument("--out", default="runs/alpha_sweep")
    ap.add_argument("--seeds", type=int, help="override the plan's seed count")
    ap.add_argument("--workers", type=int)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    d = json.loads(Path(args.plan).read_text())
    if args.seeds:
        d["seeds"] = args.seeds
    plan = SweepPlan.from_dict(d)
    t = time.perf_counter()
    rows, stats = run_sweep(plan, args.workers or worker_count())
    export_csv(rows, stats, args.out)
    export_scatter(stats, Path(args.out) / "scatter.csv")

    print(f"\n{len(rows)} runs in {time.perf_counter() - t:.0f}s, {sum(r.failed for r in rows)} failed")
    print(f"{'label':<28}{'n':>3}{'asr mean':>12}{'asr std':>12}{'esr mean':>10}{'esr min':>10}")
    for s in sorted(stats, key=lambda s: parse_spec(s.label).alpha):
        print(f"{s.label:<28}{s.n:>3}{s.asr_mean:>12.3e}{s.asr_std:>12.3e}{s.esr_mean:>10.4f}{s.esr_min:>10.4f}")


if __name__ == "__main__":
    main()
