import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pvroof.benchmark import (
    angular_difference,
    benchmark_report,
    compute_metrics,
    read_values_csv,
    timed,
)
from pvroof.exceptions import ParseError
from pvroof.demo import demo_path
from pvroof.lut import load_lut, lookup_tilt


def test_hand_fixture():
    r = compute_metrics([1, 2, 3], [1, 1, 1], mape=True)
    assert r.me == 1.0 and r.mae == 1.0
    assert r.rmse == pytest.approx(math.sqrt(5 / 3))
    assert r.rmse == pytest.approx(1.2910, abs=1e-4)
    assert r.mape == pytest.approx(100.0)
    assert r.n == 3


def test_perfect_prediction():
    r = compute_metrics([4, 5], [4, 5], mape=True)
    assert (r.me, r.mae, r.rmse, r.mape) == (0.0, 0.0, 0.0, 0.0)


def test_circular_wrap():
    r = compute_metrics([179.0], [-179.0], circular=True)
    assert r.mae == pytest.approx(2.0)
    assert r.me == pytest.approx(-2.0)
    assert compute_metrics([179.0], [-179.0]).mae == 358.0


def test_angular_difference_range():
    d = angular_difference([0, 180, -180, 350], [180, 0, 0, 10])
    assert d.tolist() == [180.0, 180.0, 180.0, -20.0]


def test_errors():
    with pytest.raises(ValueError, match="length mismatch"):
        compute_metrics([1, 2], [1])
    with pytest.raises(ValueError, match="index 1"):
        compute_metrics([1, 2], [1, 0], mape=True)


vectors = st.integers(1, 30).flatmap(lambda n: st.tuples(
    st.lists(st.floats(-1e3, 1e3), min_size=n, max_size=n),
    st.lists(st.floats(-1e3, 1e3), min_size=n, max_size=n)))


@settings(max_examples=200, deadline=None)
@given(vectors, st.randoms(use_true_random=False))
def test_metric_identities(pair, random):
    pred, truth = pair
    r = compute_metrics(pred, truth)
    assert r.mae <= r.rmse * (1 + 1e-12) + 1e-12
    assert abs(r.me) <= r.mae * (1 + 1e-12) + 1e-12
    idx = list(range(len(pred)))
    random.shuffle(idx)
    p = compute_metrics([pred[i] for i in idx], [truth[i] for i in idx])
    assert p.mae == pytest.approx(r.mae) and p.rmse == pytest.approx(r.rmse)


@settings(max_examples=100, deadline=None)
@given(vectors, st.integers(-3, 3))
def test_circular_invariant_under_full_turns(pair, turns):
    pred, truth = pair
    a = compute_metrics(pred, truth, circular=True)
    b = compute_metrics(np.asarray(pred) + 360.0 * turns, truth, circular=True)
    assert b.mae == pytest.approx(a.mae, abs=1e-9)


def test_timed_noop_and_determinism():
    assert timed(lambda: None, repetitions=3) < 1e-3
    counter = iter(range(10))
    with pytest.raises(AssertionError, match="non-deterministic"):
        timed(lambda: next(counter), repetitions=2)
    with pytest.raises(ValueError):
        timed(lambda: None, repetitions=0)


def test_lut_lookup_is_fast():
    lut = load_lut(demo_path("demo_lut.json"))
    rng = np.random.default_rng(0)
    lon, lat, s = rng.uniform(-4, 8, 1000), rng.uniform(42, 51, 1000), rng.uniform(5, 60, 1000)
    per_item = timed(lambda: lut.lookup(lon, lat, s)[0], n_items=1000, repetitions=3)
    assert per_item < 1e-4
    assert lookup_tilt(lut, 2.0, 46.0, 20.0).tilt == float(lut.lookup([2.0], [46.0], [20.0])[0][0])


def test_report_routing_and_formats():
    truth = [179.0, 10.0]
    pred = [-179.0, 10.0]
    az = benchmark_report([("bbox", pred, truth, 1e-5), ("hough", truth, truth)], "azimuth")
    assert [name for name, _ in az.rows] == ["bbox", "hough"]
    assert az.rows[0][1].mae == pytest.approx(1.0)
    assert az.rows[0][1].mape is None
    text = az.to_text()
    assert "wrapped" in text.splitlines()[0]
    assert az.to_csv().splitlines()[0] == "method,n,me,mae,rmse,mape,runtime"
    tilt = benchmark_report([("lut", pred, truth)], "tilt")
    assert tilt.rows[0][1].mae == pytest.approx(179.0)
    assert benchmark_report([("s", [11.0], [10.0])], "surface").rows[0][1].mape == pytest.approx(10.0)


def test_empty_report_is_header_only():
    r = benchmark_report([], "tilt")
    assert r.to_csv() == "method,n,me,mae,rmse,mape,runtime\n"


def test_read_values_csv(tmp_path):
    path = tmp_path / "v.csv"
    path.write_text("id,value\na,1.5\nb,\n")
    vals = read_values_csv(str(path))
    assert vals["a"] == 1.5 and math.isnan(vals["b"])
    with pytest.raises(ParseError, match="duplicate"):
        read_values_csv(io.StringIO("id,value\na,1\na,2\n"))
    with pytest.raises(ParseError, match="header"):
        read_values_csv(io.StringIO("x,y\n"))
