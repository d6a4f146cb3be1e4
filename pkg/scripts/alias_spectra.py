"""Train CustomTanh models at two alphas and write their spectrum reports.

    python3 scripts/alias_spectra.py --alphas 0.5 2 --out runs/spectra

Each alpha gets a directory with waveform.csv, spectrum.csv, sinetest.csv and
the checkpoint; the summary prints the strongest alias below 6 kHz.
"""

import argparse
import json
from pathlib import Path

from ampalias.activations import ActivationSpec, Kind
from ampalias.harness import DataSource, ModelShape, spectrum_report
from ampalias.metrics import SineTestPlan
from ampalias.nn import save_checkpoint
from ampalias.train import TrainHyper, train_model


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--alphas", type=float, nargs="+", default=[0.5, 2.0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--drive", type=float, default=20.0)
    ap.add_argument("--out", default="runs/spectra")
    args = ap.parse_args()

    data = DataSource(generator="hard_clip", drive=args.drive, length=480_000, segment_length=1024).build()
    shape = ModelShape(channels=8, dilations=(1, 2, 4, 8, 16, 32))
    for alpha in args.alphas:
        spec = ActivationSpec(Kind.CustomTanh, alpha)
        model, report = train_model(shape.config(spec), data, TrainHyper(lr=3e-3), args.seed)
        out = Path(args.out) / spec.label
        summary = spectrum_report(model, data, SineTestPlan(), out)
        save_checkpoint(model, out / "model.npz")
        (out / "report.json").write_text(report.to_json(indent=2) + "\n")
        print(spec.label, json.dumps(summary))


if __name__ == "__main__":
    main()
