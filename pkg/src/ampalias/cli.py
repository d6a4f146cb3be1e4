"""Command-line entry point: train, sinetest, sweep, report, selfcheck.

Config files are JSON. A train config looks like::

    {"model": {"channels": 8, "dilations": [1, 2, 4, 8], "activation": "False_CustomTanh_1"},
     "data": {"kind": "synthetic", "generator": "tanh_clip", "drive": 4.0, "length": 240000},
     "train": {"lr": 0.003, "max_epochs": 10},
     "seed": 0}

A sweep plan adds "activations", "alphas", "seeds", "seed_base" and "sine"
and takes "model" without the activation (see ``SweepPlan.from_dict``).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from .activations import catalog
from .dsp import chirp_dft, dft_direct
from .harness import (
    DEFAULT_AMPLITUDE,
    DataSource,
    SweepPlan,
    export_csv,
    export_scatter,
    run_sweep,
    sine_test,
    spectrum_report,
    worker_count,
)
from .metrics import SineTestPlan, residue_coverage
from .nn import TcnConfig, gradient_check, init_model, load_checkpoint, save_checkpoint
from .train import TrainHyper, train_model

log = logging.getLogger("ampalias")


def _read_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def load_train_config(path):
    """(TcnConfig, DataSource, TrainHyper, seed) from a train config file."""
    d = _read_json(path)
    unknown = set(d) - {"model", "data", "train", "seed"}
    if unknown:
        raise ValueError(f"unknown train config keys: {sorted(unknown)}")
    model = TcnConfig.from_dict(d.get("model", {}))
    return model, DataSource(**d.get("data", {})), TrainHyper(**d.get("train", {})), int(d.get("seed", 0))


def _plan_from_args(args) -> SineTestPlan:
    return SineTestPlan(args.sample_rate, args.N, args.k0)


def _add_plan_args(p):
    p.add_argument("--sample-rate", type=int, default=48017)
    p.add_argument("--N", type=int, default=48017)
    p.add_argument("--k0", type=int, default=1249)
    p.add_argument("--amplitude", type=float, default=DEFAULT_AMPLITUDE)


def cmd_train(args) -> int:
    config, source, hyper, seed = load_train_config(args.config)
    if args.seed is not None:
        seed = args.seed
    data = source.build()
    model, report = train_model(config, data, hyper, seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(model, out / "model.npz")
    (out / "report.json").write_text(report.to_json(indent=2) + "\n")
    print(f"final esr {report.final_esr:.6g} after {report.steps} steps ({report.stop_reason}); wrote {out}")
    return 0


def cmd_sinetest(args) -> int:
    model = load_checkpoint(args.checkpoint)
    breakdown = sine_test(model, _plan_from_args(args), args.amplitude, remove_dc=not args.keep_dc)
    d = breakdown.to_dict()
    if not args.bins:
        d.pop("harmonic_bins")
    text = json.dumps(d, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return 0


def cmd_sweep(args) -> int:
    d = _read_json(args.plan)
    if args.seed_base is not None:
        d["seed_base"] = args.seed_base
    plan = SweepPlan.from_dict(d)
    workers = args.workers if args.workers is not None else worker_count()
    t = time.perf_counter()
    rows, stats = run_sweep(plan, workers)
    rows_path, agg_path = export_csv(rows, stats, args.out)
    export_scatter(stats, Path(args.out) / "scatter.csv")
    failed = sum(r.failed for r in rows)
    print(f"{len(rows)} runs ({failed} failed) in {time.perf_counter() - t:.1f}s; wrote {rows_path} and {agg_path}")
    return 0


def cmd_report(args) -> int:
    model = load_checkpoint(args.checkpoint)
    d = _read_json(args.config)
    data = DataSource(**d.get("data", {})).build()
    summary = spectrum_report(model, data, _plan_from_args(args), args.out, args.amplitude, args.cutoff)
    print(json.dumps(summary, indent=2))
    return 0


def selfcheck(seeds: int = 3, verbose: bool = True) -> bool:
    """Run the residue, Parseval/DFT and gradient oracles; True if all pass."""
    results = []

    def record(name, ok, detail=""):
        results.append(ok)
        if verbose:
            print(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}".rstrip())

    for N in (7, 17, 101):
        ok = all(residue_coverage(k, N) == (math.gcd(k, N) == 1) for k in range(1, N))
        record(f"residue coverage N={N}", ok)

    rng = np.random.default_rng(0)
    for N in (17, 101, 997):
        x = rng.standard_normal(N)
        X = chirp_dft(x)
        err = np.max(np.abs(X - dft_direct(x))) / np.max(np.abs(X))
        parseval = abs(np.sum(np.abs(X) ** 2) / N - np.sum(x * x)) / np.sum(x * x)
        record(f"dft N={N}", err < 1e-9 and parseval < 1e-12, f"rel err {err:.2e}, parseval {parseval:.2e}")

    worst = 0.0
    for spec in catalog((0.5, 2.0)):
        cfg = TcnConfig(channels=2, kernel_size=2, dilations=(1, 2), activation=spec, head_bias=True)
        for seed in range(seeds):
            r = np.random.default_rng(seed)
            x, y = r.standard_normal((2, 12)), r.standard_normal((2, 12))
            worst = max(worst, gradient_check(init_model(cfg, seed), x, y))
    record("gradients (all activations, gated and not)", worst <= 1.0, f"worst ratio {worst:.3f}")
    return all(results)


def cmd_selfcheck(args) -> int:
    return 0 if selfcheck(args.seeds) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ampalias", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one model from a JSON config")
    p.add_argument("config")
    p.add_argument("--out", required=True, help="directory for model.npz and report.json")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sinetest", help="aliasing-to-signal ratio of a checkpoint")
    p.add_argument("checkpoint")
    _add_plan_args(p)
    p.add_argument("--keep-dc", action="store_true", help="do not remove the DC mean before measuring")
    p.add_argument("--bins", action="store_true", help="include the harmonic bin list in the output")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sinetest)

    p = sub.add_parser("sweep", help="activation x alpha x seed sweep to CSV")
    p.add_argument("plan")
    p.add_argument("--out", required=True)
    p.add_argument("--seed-base", type=int)
    p.add_argument("--workers", type=int, help="defaults to $AMPALIAS_WORKERS or 1")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="waveform, spectrum and sine-test CSVs for a checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("config", help="JSON file with a 'data' section")
    p.add_argument("--out", required=True)
    p.add_argument("--cutoff", type=float, default=6000.0)
    _add_plan_args(p)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("selfcheck", help="run the numerical oracle suite")
    p.add_argument("--seeds", type=int, default=3)
    p.set_defaults(func=cmd_selfcheck)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError) as e:
        print(f"ampalias: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
