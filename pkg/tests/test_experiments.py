import math

import numpy as np
import pytest

from swest.exceptions import DegenerateSample, InsufficientPoints, NonPositive, OutOfRange
from swest.experiments import (
    CSV_FIELDS,
    CltConfig,
    ConsistencyConfig,
    ExperimentRecord,
    MesweToMsweConfig,
    TimingConfig,
    kde,
    loglog_slope,
    median_by,
    read_records,
    records_to_csv,
    run_clt_gaussian,
    run_consistency_gaussian,
    run_meswe_to_mswe,
    run_timing_comparison,
    task_stream,
)
from swest.optim import AdamConfig
from swest.sampling import RngStream

FAST = AdamConfig(iters=300)


class TestKde:
    def test_degenerate(self):
        with pytest.raises(DegenerateSample):
            kde(np.ones(10))

    def test_normal_peak(self):
        est = kde(RngStream(1).standard_normal(100_000))
        assert abs(est(0.0) * math.sqrt(2 * math.pi) - 1) <= 0.05

    def test_integrates_to_one(self):
        est = kde(RngStream(2).standard_normal(500))
        assert est.integral() == pytest.approx(1.0, abs=0.01)

    def test_silverman_bandwidth(self):
        x = RngStream(3).standard_normal(1000)
        iqr = np.subtract(*np.percentile(x, [75, 25]))
        expected = 0.9 * min(np.std(x, ddof=1), iqr / 1.34) * 1000 ** -0.2
        assert kde(x).bandwidth == pytest.approx(expected, rel=1e-12)


class TestLogLogSlope:
    xs = np.array([10.0, 100.0, 1000.0, 10_000.0])

    def test_inverse(self):
        assert loglog_slope(self.xs, 3.0 / self.xs)[0] == pytest.approx(-1, abs=1e-12)

    def test_inverse_root(self):
        assert loglog_slope(self.xs, 2.0 / np.sqrt(self.xs))[0] == pytest.approx(-0.5, abs=1e-12)

    def test_perturbed(self):
        noise = RngStream(4).standard_normal(4)
        slope = loglog_slope(self.xs, 5.0 / self.xs * (1 + 0.01 * noise))[0]
        assert -1.05 <= slope <= -0.95

    def test_needs_three_points(self):
        with pytest.raises(InsufficientPoints):
            loglog_slope([1, 2], [1, 2])

    def test_positive_values(self):
        with pytest.raises(NonPositive):
            loglog_slope([1, 2, 3], [1, 0, 2])


class TestStreams:
    def test_key_bound(self):
        with pytest.raises(OutOfRange):
            task_stream(0, 0, 0, 2**16)

    def test_distinct_purposes(self):
        a = task_stream(0, 1, 0, 100).standard_normal(3)
        b = task_stream(0, 1, 1, 100).standard_normal(3)
        assert not np.array_equal(a, b)


class TestConsistency:
    @pytest.mark.slow
    def test_larger_sample_smaller_error(self):
        records = run_consistency_gaussian(ns=(10, 10_000), reps=100)
        for method in ("mswe", "meswe"):
            med = median_by(records, "n", method)
            assert med[10_000] < med[10]

    def test_same_seed_same_records(self):
        cfg = ConsistencyConfig(ns=(50,), reps=2, d=3, adam=FAST, seed=7)
        a = run_consistency_gaussian(cfg=cfg)
        b = run_consistency_gaussian(cfg=cfg)
        assert [(r.method, r.rep, r.mse) for r in a] == [(r.method, r.rep, r.mse) for r in b]
        assert len(a) == 4

    def test_cells_independent_of_grid(self):
        cfg = ConsistencyConfig(ns=(30, 60), reps=2, d=2, adam=FAST)
        full = run_consistency_gaussian(cfg=cfg)
        part = run_consistency_gaussian(ns=(60,), cfg=cfg)
        assert [r.mse for r in full if r.n == 60] == [r.mse for r in part]

    def test_worker_count_irrelevant(self):
        cfg = ConsistencyConfig(ns=(40, 80), reps=2, d=2, adam=FAST)
        assert records_to_csv(run_consistency_gaussian(cfg=cfg), False) == \
            records_to_csv(run_consistency_gaussian(cfg=cfg, threads=3), False)


class TestOtherRunners:
    def test_clt_outputs(self):
        cfg = CltConfig(ns=(100, 400), reps=4, d=2, adam=FAST, grid_size=64)
        res = run_clt_gaussian(cfg=cfg)
        assert set(res.sigma2_hat) == {100, 400}
        np.testing.assert_allclose(res.rescaled[400], 20 * (res.sigma2_hat[400] - 1))
        assert res.kdes[100].grid.shape == (64,)
        assert {r.method for r in res.records} == {"mswe-p1"}

    def test_meswe_to_mswe_self_comparison(self):
        cfg = MesweToMsweConfig(model="ecs", n_fixed=50, ms=(20, 200), m_reference=200, reps=2, d=2, adam=FAST)
        recs = run_meswe_to_mswe(cfg=cfg)
        assert all(r.mse == 0 for r in recs if r.m == 200)
        assert any(r.mse > 0 for r in recs if r.m == 20)

    def test_timing_records(self):
        cfg = TimingConfig(ds=(2,), n=20, m=20, reps=1, n_datasets=2, n_projections=3)
        recs = run_timing_comparison(cfg=cfg)
        assert sorted(r.method for r in recs) == ["meswe", "mewe-exact", "mewe-sinkhorn"]
        assert all(np.isfinite(r.mse) and r.wall_time_s > 0 for r in recs)

    def test_timing_cap_gives_nan(self):
        cfg = TimingConfig(ds=(2,), n=20, m=20, reps=1, n_datasets=1, n_projections=2, assignment_cap=10)
        exact = [r for r in run_timing_comparison(cfg=cfg) if r.method == "mewe-exact"]
        assert math.isnan(exact[0].mse)


class TestCsv:
    def test_round_trip(self, tmp_path):
        recs = [
            ExperimentRecord("consistency", 1, 100, 0, 10, "mswe", 0.1234567890123, 1.5, 3),
            ExperimentRecord("consistency", 0, 100, 0, 10, "mswe", 1e-17, 0.25, 3),
        ]
        text = records_to_csv(recs)
        assert text.splitlines()[0] == ",".join(CSV_FIELDS)
        path = tmp_path / "r.csv"
        path.write_text(text)
        back = read_records(path)
        assert [r.rep for r in back] == [0, 1]
        assert back[1].mse == 0.1234567890123

    def test_omitted_timing(self):
        rec = ExperimentRecord("clt", 0, 10, 0, 2, "mswe-p1", 0.5, 9.9, 0)
        assert records_to_csv([rec], include_timing=False).splitlines()[1] == "clt,0,10,0,2,mswe-p1,0.5,,0"
