import numpy as np
import pytest

from conftest import make_weights
from droidseq.bench import (ZeroBaselineError, bench_predict, format_csv,
                            performance_gain)


@pytest.fixture(scope="module")
def weights():
    return make_weights(50, np.random.default_rng(0))


class TestBenchPredict:
    def test_one_record_per_length(self, weights):
        records = bench_predict(weights, [4, 8, 12], trials=3, seed=7)
        assert [r.length for r in records] == [4, 8, 12]
        assert all(r.scenario == "dynamic" for r in records)
        assert all(r.trials == 3 for r in records)

    def test_stats_ordering(self, weights):
        for r in bench_predict(weights, [6, 10], trials=5, seed=8):
            assert r.min_ms <= r.mean_ms <= r.max_ms
            assert r.min_ms > 0

    def test_compare_fixed_adds_static_records(self, weights):
        records = bench_predict(weights, [4, 6], trials=3,
                                compare_fixed=True, fixed_length=32, seed=9)
        scenarios = [(r.scenario, r.length) for r in records]
        assert scenarios == [("dynamic", 4), ("dynamic", 6),
                             ("fixed", 4), ("fixed", 6)]
        by = {(r.scenario, r.length): r for r in records}
        # the static model always runs 32 steps, so it cannot be faster
        # than dynamic on these short inputs in aggregate
        assert by[("fixed", 4)].mean_ms > by[("dynamic", 4)].mean_ms

    def test_argument_validation(self, weights):
        with pytest.raises(ValueError):
            bench_predict(weights, [], trials=3)
        with pytest.raises(ValueError):
            bench_predict(weights, [0], trials=3)
        with pytest.raises(ValueError):
            bench_predict(weights, [4], trials=2)

    def test_csv_format(self, weights):
        records = bench_predict(weights, [4], trials=3, seed=10)
        csv = format_csv(records)
        lines = csv.strip().split("\n")
        assert lines[0] == "scenario,length,trials,mean_ms,min_ms,max_ms"
        fields = lines[1].split(",")
        assert fields[0] == "dynamic"
        assert int(fields[1]) == 4
        assert float(fields[3]) > 0


class TestPerformanceGain:
    def test_reference_values(self):
        assert performance_gain(0.79, 1.0) == pytest.approx(21.0)
        assert performance_gain(1.0, 1.0) == 0.0
        assert performance_gain(2.0, 1.0) == -100.0

    def test_zero_baseline(self):
        with pytest.raises(ZeroBaselineError):
            performance_gain(1.0, 0.0)
        with pytest.raises(ZeroBaselineError):
            performance_gain(1.0, -2.0)
