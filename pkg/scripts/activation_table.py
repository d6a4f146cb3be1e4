"""Train every activation in the catalog and rank them by mean ASR.

    python3 scripts/activation_table.py --seeds 3 --out runs/table

Top rows of aggregate.csv give the "best by average ASR" table; the
alpha-bearing kinds are tried at each --alphas value, gated and not.
"""

import argparse
import logging
import time
from pathlib import Path

from ampalias.activations import catalog
from ampalias.harness import DataSource, ModelShape, SweepPlan, export_csv, export_scatter, run_sweep, worker_count
from ampalias.train import TrainHyper


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/activation_table")
    ap.add_argument("--seeds", type=int, default=3)
    ap.add_argument("--alphas", type=float, nargs="+", default=[0.5, 1.0, 2.0, 8.0])
    ap.add_argument("--drive", type=float, default=20.0)
    ap.add_argument("--length", type=int, default=240_000)
    ap.add_argument("--top", type=int, default=10)
    ap.add_argument("--workers", type=int)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    labels = tuple(s.label for s in catalog(tuple(args.alphas)))
    plan = SweepPlan(
        activations=labels,
        alphas=tuple(args.alphas),
        seeds=args.seeds,
        model=ModelShape(channels=8, dilations=(1, 2, 4, 8, 16, 32)),
        data=DataSource(generator="hard_clip", drive=args.drive, length=args.length, segment_length=1024),
        train=TrainHyper(lr=3e-3),
    )
    t = time.perf_counter()
    rows, stats = run_sweep(plan, args.workers or worker_count())
    export_csv(rows, stats, args.out)
    export_scatter(stats, Path(args.out) / "scatter.csv")

    print(f"\n{len(labels)} activations x {args.seeds} seeds in {time.perf_counter() - t:.0f}s")
    print(f"{'rank':<5}{'label':<30}{'asr mean':>12}{'asr std':>12}{'esr mean':>10}{'esr std':>10}")
    for i, s in enumerate(stats[:args.top], 1):
        print(f"{i:<5}{s.label:<30}{s.asr_mean:>12.3e}{s.asr_std:>12.3e}{s.esr_mean:>10.4f}{s.esr_std:>10.4f}")


if __name__ == "__main__":
    main()
