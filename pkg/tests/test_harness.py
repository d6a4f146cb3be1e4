import csv
import math
import statistics

import numpy as np
import pytest

from ampalias.activations import ActivationSpec, Kind, parse_spec
from ampalias.harness import (
    AGGREGATE_HEADER,
    ROWS_HEADER,
    DataSource,
    ModelShape,
    SweepPlan,
    SweepRow,
    aggregate,
    expand_activations,
    export_csv,
    export_scatter,
    log_alpha_grid,
    max_alias_db,
    run_sweep,
    sine_spectrum,
    sine_test,
    spectrum_report,
    worker_count,
)
from ampalias.metrics import SineTestPlan, harmonic_bins
from ampalias.nn import TcnConfig, init_model
from ampalias.train import TrainHyper, make_synthetic_dataset

IDENTITY = ActivationSpec(Kind.Identity)


def tiny_plan(**kw):
    base = dict(
        activations=("False_CustomTanh",),
        alphas=(0.5, 2.0),
        seeds=2,
        model=ModelShape(channels=2, dilations=(1, 2)),
        data=DataSource(generator="tanh_clip", length=12000, segment_length=512),
        train=TrainHyper(lr=3e-3, max_epochs=2),
    )
    base.update(kw)
    return SweepPlan(**base)


def permuted_oracle_asr(shaper, plan, amplitude):
    """ASR of a memoryless shaper from Parseval for the total energy and a
    direct sum at the N0 harmonic bins; no FFT involved."""
    N, k0 = plan.N, plan.k0
    n = np.arange(N, dtype=np.int64)
    y = shaper(amplitude * np.sin(2 * np.pi * ((k0 * n) % N) / N))
    y = y - y.mean()
    # odd N: half spectrum holds DC once plus half of everything else
    e_y = 0.5 * (N * float(np.sum(y * y)) + float(np.sum(y)) ** 2)
    e_h = 0.0
    for m in range(1, (N - 1) // (2 * k0) + 1):
        phase = 2 * np.pi * ((m * k0 * n) % N) / N
        e_h += float(np.sum(y * np.cos(phase))) ** 2 + float(np.sum(y * np.sin(phase))) ** 2
    return (e_y - e_h) / e_h


class TestSineTest:
    def test_identity_model(self):
        for seed in range(3):
            assert sine_test(init_model(TcnConfig(channels=4, activation=IDENTITY), seed)).asr < 1e-10

    def test_untrained_large_alpha_is_cleaner(self):
        lo = init_model(TcnConfig(activation="False_CustomTanh_0.5"), 0)
        hi = init_model(TcnConfig(activation="False_CustomTanh_32"), 0)
        assert sine_test(hi).asr < sine_test(lo).asr

    def test_waveshaper_against_oracle(self):
        plan = SineTestPlan(48017, 48017, 1249)

        def shaper(x):
            return np.tanh(2 * x)

        # tanh is analytic, so folded harmonics sit near rounding level
        got = sine_test(shaper, plan, 1.0).asr
        assert abs(got - permuted_oracle_asr(shaper, plan, 1.0)) < 1e-9

    def test_hard_clip_against_oracle(self):
        plan = SineTestPlan(48017, 48017, 1249)

        def shaper(x):
            return np.clip(2 * x, -1, 1)

        got = sine_test(shaper, plan, 1.0).asr
        assert got > 1e-5
        assert got == pytest.approx(permuted_oracle_asr(shaper, plan, 1.0), rel=1e-9)

    def test_deterministic(self):
        m = init_model(TcnConfig(channels=4, dilations=(1, 2, 4), activation="False_Snake_1"), 1)
        assert sine_test(m).to_dict() == sine_test(m).to_dict()

    def test_dc_switch(self):
        plan = SineTestPlan(101, 101, 3)

        def offset(x):
            return x + 0.3

        assert sine_test(offset, plan).asr < 1e-12
        assert sine_test(offset, plan, remove_dc=False).asr > 0.1

    def test_spectrum_masks(self):
        m = init_model(TcnConfig(channels=4, dilations=(1, 2), activation="False_CustomTanh_0.5"), 0)
        plan = SineTestPlan()
        level_db, harmonic, alias = sine_spectrum(m, plan)
        assert list(np.flatnonzero(harmonic)) == harmonic_bins(plan)
        assert not alias[0] and not harmonic[0]
        assert level_db[plan.k0] == 0.0
        assert max_alias_db(m, plan) < 0.0


class TestPlan:
    def test_expand(self):
        specs = expand_activations(["False_CustomTanh", "True_SELU", "True_Snake_3"], (0.5, 1.0))
        assert [s.label for s in specs] == ["False_CustomTanh_0.5", "False_CustomTanh_1", "True_SELU", "True_Snake_3"]

    def test_from_dict_logspace(self):
        plan = SweepPlan.from_dict({"alphas": {"logspace": [0.01, 100, 5]}, "seeds": 2, "seed_base": 10,
                                    "model": {"channels": 4}})
        assert plan.alphas == pytest.approx((0.01, 0.1, 1.0, 10.0, 100.0))
        assert plan.seed_list == [10, 11]
        assert plan.model.channels == 4
        assert len(log_alpha_grid()) == 100

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            SweepPlan(activations=())
        with pytest.raises(ValueError):
            SweepPlan(seeds=0)

    def test_worker_env(self, monkeypatch):
        monkeypatch.setenv("AMPALIAS_WORKERS", "3")
        assert worker_count() == 3
        monkeypatch.delenv("AMPALIAS_WORKERS")
        assert worker_count() == 1


def _row(label, seed, esr, asr, failed=False):
    return SweepRow(label, seed, esr, asr, 2, failed)


class TestAggregates:
    rows = [
        _row("False_CustomTanh_1", 0, 0.1, 3e-4),
        _row("False_CustomTanh_1", 1, 0.3, 1e-4),
        _row("False_CustomTanh_4", 0, 0.25, 1e-5),
        _row("False_CustomTanh_4", 1, 0.35, 3e-5),
        _row("False_SELU", 0, 0.99, 1e-3, True),
        _row("False_SELU", 1, math.nan, math.nan, True),
    ]

    def test_stats(self):
        stats = aggregate(self.rows)
        assert [s.label for s in stats] == ["False_CustomTanh_4", "False_CustomTanh_1"]
        s = stats[1]
        assert s.n == 2 and s.asr_mean == pytest.approx(2e-4) and s.asr_std == pytest.approx(1e-4)
        assert s.esr_min == 0.1
        for s in stats:
            assert s.asr_min <= s.asr_mean and s.asr_std >= 0

    def test_export(self, tmp_path):
        rows_path, agg_path = export_csv(self.rows, aggregate(self.rows), tmp_path)
        lines = rows_path.read_text().splitlines()
        assert lines[0] == "label,seed,esr,asr,epochs,failed"
        assert len(lines) == 1 + len(self.rows)
        assert "False_SELU" in rows_path.read_text()
        agg = agg_path.read_text().splitlines()
        assert agg[0] == ",".join(AGGREGATE_HEADER)
        assert "False_SELU" not in agg_path.read_text()
        assert agg[1].startswith("False_CustomTanh_4,")

    def test_scatter_filter(self, tmp_path):
        path = export_scatter(aggregate(self.rows), tmp_path / "scatter.csv")
        text = path.read_text()
        assert "False_CustomTanh_1" in text and "False_CustomTanh_4" not in text

    def test_export_requires_rows(self, tmp_path):
        with pytest.raises(ValueError):
            export_csv([], [], tmp_path)


def recompute_aggregates(rows_csv):
    """Aggregates straight from the rows file with the statistics module."""
    groups = {}
    with open(rows_csv, newline="") as fh:
        for rec in csv.DictReader(fh):
            if rec["failed"] == "0":
                groups.setdefault(rec["label"], []).append((float(rec["asr"]), float(rec["esr"])))
    out = {}
    for label, vals in groups.items():
        a = [v[0] for v in vals]
        e = [v[1] for v in vals]
        out[label] = (len(vals), statistics.fmean(a), statistics.pstdev(a), min(a),
                      statistics.fmean(e), statistics.pstdev(e), min(e))
    return out


class TestSweep:
    @pytest.fixture(scope="class")
    @staticmethod
    def swept():
        return run_sweep(tiny_plan(), workers=1)

    def test_row_count_and_order(self, swept):
        rows, _ = swept
        assert len(rows) == 4
        assert [(r.label, r.seed) for r in rows] == [("False_CustomTanh_0.5", 0), ("False_CustomTanh_0.5", 1),
                                                     ("False_CustomTanh_2", 0), ("False_CustomTanh_2", 1)]
        for r in rows:
            assert parse_spec(r.label).label == r.label
            assert r.failed == (not r.esr < 0.98)

    def test_one_config_three_seeds(self):
        rows, stats = run_sweep(tiny_plan(alphas=(1.0,), seeds=3), workers=1)
        assert len(rows) == 3
        assert sum(s.n for s in stats) == sum(not r.failed for r in rows)

    def test_independent_recompute(self, swept, tmp_path):
        rows, stats = swept
        rows_path, agg_path = export_csv(rows, stats, tmp_path)
        expected = recompute_aggregates(rows_path)
        with open(agg_path, newline="") as fh:
            emitted = list(csv.DictReader(fh))
        assert {r["label"] for r in emitted} == set(expected)
        for rec in emitted:
            want = expected[rec["label"]]
            got = [float(rec[k]) for k in AGGREGATE_HEADER[1:]]
            np.testing.assert_allclose(got, want, rtol=0, atol=1e-12)

    def test_divergent_runs_are_flagged(self):
        rows, stats = run_sweep(tiny_plan(alphas=(1.0,), train=TrainHyper(lr=float("nan"))), workers=1)
        assert len(rows) == 2 and all(r.failed for r in rows) and stats == []

    def test_csv_bytes_stable_across_runs_and_workers(self, swept, tmp_path):
        a = export_csv(*swept, tmp_path / "a")
        b = export_csv(*run_sweep(tiny_plan(), workers=2), tmp_path / "b")
        for pa, pb in zip(a, b):
            assert pa.read_bytes() == pb.read_bytes()

    def test_rows_header_constant(self):
        assert ROWS_HEADER == ["label", "seed", "esr", "asr", "epochs", "failed"]


class TestSpectrumReport:
    def test_identity_report(self, tmp_path):
        data = make_synthetic_dataset("tanh_clip", 2.0, 40000, segment_length=1024)
        model = init_model(TcnConfig(channels=4, dilations=(1, 2, 4), activation=IDENTITY), 0)
        plan = SineTestPlan()
        summary = spectrum_report(model, data, plan, tmp_path)
        assert summary["max_alias_db_below_cutoff"] < -200
        with open(tmp_path / "sinetest.csv", newline="") as fh:
            recs = list(csv.DictReader(fh))
        assert len(recs) == (plan.N - 1) // 2 + 1
        assert [int(r["bin"]) for r in recs if r["harmonic"] == "1"] == harmonic_bins(plan)
        assert all(float(r["level_db"]) < -200 for r in recs if r["alias"] == "1")
        wave = (tmp_path / "waveform.csv").read_text().splitlines()
        assert wave[0] == "n,target,prediction" and len(wave) == 2049
        assert (tmp_path / "spectrum.csv").read_text().startswith("frequency_hz,target_db,prediction_db")
