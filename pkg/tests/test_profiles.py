import json
from fractions import Fraction
from importlib import resources

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edgesched.profiles import (
    CalibrationError,
    ColdStartTable,
    LoadFactorCurve,
    WarmProfileTable,
    builtin_profile,
    cold_start_penalty,
    interpolate,
    load_profile,
    predict_process_time,
    predict_total_time,
)
from edgesched.sim_core import NetworkLink

from oracles import EDGE_WARM, LOADS, EDGE_LOAD_TIMES, RPI_WARM, SIZE_RUNTIMES, SIZES_KB, interp

EDGE = builtin_profile("edge_server")
RPI = builtin_profile("raspberry_pi")


def test_edge_idle_reference_image():
    assert predict_process_time(EDGE, 0, 0.0, 29) == 223


def test_end_device_idle_reference_image():
    assert predict_process_time(RPI, 0, 0.0, 29) == 597


def test_edge_fully_loaded():
    assert predict_process_time(EDGE, 0, 1.0, 29) == 374


def test_edge_three_running():
    assert predict_process_time(EDGE, 3, 0.0, 29) == 464


def test_load_between_knots_matches_independent_interpolation():
    expected = interp(0.375, LOADS, EDGE_LOAD_TIMES)
    assert expected == 298
    assert predict_process_time(EDGE, 0, 0.375, 29) == pytest.approx(expected, abs=1e-9)


@pytest.mark.parametrize("running,expected", list(enumerate(EDGE_WARM)))
def test_edge_warm_knots_exact(running, expected):
    assert predict_process_time(EDGE, running, 0.0, 29) == expected


@pytest.mark.parametrize("running,expected", list(enumerate(RPI_WARM)))
def test_rpi_warm_knots_exact(running, expected):
    assert predict_process_time(RPI, running, 0.0, 29) == expected


@pytest.mark.parametrize("size,expected", list(zip(SIZES_KB, SIZE_RUNTIMES)))
def test_size_knots_exact(size, expected):
    assert predict_process_time(EDGE, 0, 0.0, size) == expected


def test_clamps_beyond_last_knot():
    assert predict_process_time(EDGE, 50, 0.0, 29) == 947
    assert predict_process_time(EDGE, 0, 0.0, 1000) == 1163
    assert predict_process_time(EDGE, 0, 0.0, 5) == 223


@pytest.mark.parametrize("args", [(-1, 0.0, 29), (0, -0.1, 29), (0, 1.5, 29), (0, 0.0, 0.0), (0, 0.0, -3)])
def test_rejects_bad_arguments(args):
    with pytest.raises(ValueError):
        predict_process_time(EDGE, *args)


def test_local_total_reduces_to_processing():
    assert predict_total_time(RPI, None, 0, 0.0, 29, 0) == 597


def test_remote_total_decomposes():
    link = NetworkLink(1.0, 5.0)
    process = interp(100, SIZES_KB, SIZE_RUNTIMES)  # edge base 223 at the 29 KB reference
    total = predict_total_time(EDGE, link, 0, 0.0, 100, 0)
    assert total == pytest.approx(105 + process + 6, abs=1e-9)


def test_remote_total_rejects_empty_image():
    with pytest.raises(ValueError):
        predict_total_time(EDGE, NetworkLink(1.0, 5.0), 0, 0.0, 0.0, 0)


def test_queue_term_uses_free_slots():
    # pool of 4 with 1 running: 3 free slots share the 2 queued images
    process = predict_process_time(EDGE, 1, 0.0, 29)
    assert predict_total_time(EDGE, None, 1, 0.0, 29, 2) == pytest.approx(process + 2 * process / 3)
    # pool full: at least one slot is assumed
    process = predict_process_time(EDGE, 4, 0.0, 29)
    assert predict_total_time(EDGE, None, 4, 0.0, 29, 3) == pytest.approx(4 * process)


@pytest.mark.parametrize(
    "profile,existing,expected",
    [(EDGE, 1, 52554), (RPI, 1, 168279), (EDGE, 20, 437846), (EDGE, 0, 52554), (EDGE, 4, (71788 + 106596) / 2)],
)
def test_cold_start_penalty(profile, existing, expected):
    assert cold_start_penalty(profile, existing) == expected


def test_cold_start_dwarfs_warm_processing():
    assert cold_start_penalty(EDGE, 1) > 100 * predict_process_time(EDGE, 0, 0.0, 29)


def test_interpolate_empty_table():
    with pytest.raises(CalibrationError):
        interpolate([], 1)


@pytest.mark.parametrize(
    "factory,rows",
    [
        (WarmProfileTable.from_rows, []),
        (WarmProfileTable.from_rows, [[2, 100, 1], [1, 200, 1]]),
        (WarmProfileTable.from_rows, [[1, 300, 1], [2, 200, 1]]),
        (ColdStartTable.from_rows, [[1, 0, 5]]),
        (LoadFactorCurve.from_rows, [[0.5, 1]]),
        (LoadFactorCurve.from_rows, [[0, 1], [0.5, "1/2"]]),
    ],
)
def test_table_invariants_enforced(factory, rows):
    with pytest.raises(CalibrationError):
        factory(rows)


def test_load_profile_round_trip(tmp_path):
    path = tmp_path / "edge.json"
    path.write_text(resources.files("edgesched.data").joinpath("edge_server.json").read_text())
    assert load_profile(path) == EDGE


def test_load_profile_errors(tmp_path):
    with pytest.raises(CalibrationError, match="not found"):
        load_profile(tmp_path / "nope.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    with pytest.raises(CalibrationError, match="not valid JSON"):
        load_profile(bad)
    bad.write_text(json.dumps({"device_id": "x"}))
    with pytest.raises(CalibrationError, match="missing field"):
        load_profile(bad)


def test_pool_size_must_stay_in_calibrated_range():
    with pytest.raises(CalibrationError):
        EDGE.with_overrides(warm_pool_size=9)


def test_load_multipliers_are_exact_ratios():
    assert EDGE.load_curve.multiplier(0.25) == Fraction(284, 223)


sizes = st.floats(min_value=1, max_value=400, allow_nan=False)
loads = st.floats(min_value=0, max_value=1, allow_nan=False)
running = st.integers(min_value=0, max_value=10)


@settings(max_examples=200)
@given(running, running, loads, loads, sizes, sizes)
def test_process_time_monotone(r1, r2, l1, l2, s1, s2):
    lo = predict_process_time(EDGE, min(r1, r2), min(l1, l2), min(s1, s2))
    hi = predict_process_time(EDGE, max(r1, r2), max(l1, l2), max(s1, s2))
    assert lo <= hi


@given(running, loads, sizes, st.integers(min_value=0, max_value=20))
def test_local_total_is_process_plus_queue(r, load, size, depth):
    process = predict_process_time(RPI, r, load, size)
    queue = depth * process / max(1, RPI.warm_pool_size - r)
    assert predict_total_time(RPI, None, r, load, size, depth) == pytest.approx(process + queue, rel=1e-12)


@given(st.floats(min_value=0.1, max_value=50), st.floats(min_value=0.01, max_value=10), sizes)
def test_bandwidth_scaling_only_moves_transfer_terms(k, bandwidth, size):
    slow = NetworkLink(bandwidth, 0.0)
    fast = NetworkLink(bandwidth * k, 0.0)
    local = predict_total_time(EDGE, None, 0, 0.0, size, 0)
    transfer_slow = predict_total_time(EDGE, slow, 0, 0.0, size, 0) - local
    transfer_fast = predict_total_time(EDGE, fast, 0, 0.0, size, 0) - local
    assert transfer_fast == pytest.approx(transfer_slow / k, rel=1e-9)
