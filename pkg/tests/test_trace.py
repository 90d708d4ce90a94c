import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from emfprint.errors import (
    EmptyTrace,
    EmptyWindow,
    MalformedRecord,
    OutOfBandFrequency,
    TraceTooShort,
)
from emfprint.trace import (
    FSW8,
    HACKRF_ONE,
    InstrumentFormat,
    detect_boot_onset,
    parse_trace,
    read_trace,
    serialize_trace,
    timeslot_power,
    window_trace,
    write_trace,
)

from conftest import grid_trace, make_trace


def test_parse_sorts_by_time_then_frequency():
    trace = parse_trace("0,2000,-55\n1,1000,-49\n0,1000,-50\n", HACKRF_ONE)
    assert [(s.timestamp, s.frequency) for s in trace.samples] == [(0, 1000), (0, 2000), (1, 1000)]
    assert trace.samples[0].power == -50.0
    assert len(trace) == 3


def test_two_field_record_reports_line():
    with pytest.raises(MalformedRecord) as info:
        parse_trace("0,1000\n", HACKRF_ONE)
    assert info.value.line_number == 1


def test_line_numbers_count_comments_and_blanks():
    text = "# instrument=x\n\n0,1,-50\n0,abc,-50\n"
    with pytest.raises(MalformedRecord) as info:
        parse_trace(text, HACKRF_ONE)
    assert info.value.line_number == 4


@pytest.mark.parametrize("line", ["0,1,nan", "0,inf,-3", "-1,5,-3", "0,1,-50,7", ",,"])
def test_bad_records_rejected(line):
    with pytest.raises(MalformedRecord):
        parse_trace(line + "\n", HACKRF_ONE)


def test_frequency_outside_sdr_band():
    with pytest.raises(OutOfBandFrequency) as info:
        parse_trace("0,1000,-50\n0,250000000,-60\n", HACKRF_ONE)
    assert info.value.line_number == 2
    assert info.value.frequency == 250e6


def test_band_edges_are_inside():
    trace = parse_trace("0,0,-50\n0,10000000,-60\n", HACKRF_ONE)
    assert len(trace) == 2


def test_empty_input():
    with pytest.raises(EmptyTrace):
        parse_trace("# only a header\n", HACKRF_ONE)


def test_format_from_header():
    text = "# instrument=fsw8\n# start_hz=0\n# stop_hz=200000000\n# rbw_hz=3000000\n0,150000000,-70\n"
    trace = parse_trace(text)
    assert trace.format.band == (0.0, 200e6)
    assert trace.format.name == "fsw8"


def test_missing_band_header_without_format():
    with pytest.raises(MalformedRecord):
        parse_trace("0,1,-1\n")


def test_invalid_formats():
    with pytest.raises(ValueError):
        InstrumentFormat("bad", 10.0, 10.0, 1.0)
    with pytest.raises(ValueError):
        InstrumentFormat("bad", 0.0, 10.0, 0.0)


def test_instrument_presets():
    assert HACKRF_ONE.resolution_bandwidth == 976.6
    assert HACKRF_ONE.band == (0.0, 10e6)
    assert (FSW8.sweep_points, FSW8.sweep_time) == (4001, 4.01)


def test_round_trip_is_exact(tmp_path):
    rng = np.random.default_rng(3)
    trace = grid_trace(rng, label="dev-7", source_id="run 3")
    buf = io.StringIO()
    serialize_trace(trace, buf)
    assert parse_trace(buf.getvalue()).identical(trace)
    path = tmp_path / "t.csv"
    write_trace(path, trace)
    assert read_trace(path).identical(trace)


def test_read_trace_names_unlabelled_source(tmp_path):
    path = tmp_path / "bare.csv"
    path.write_text("# start_hz=0\n# stop_hz=10\n# rbw_hz=1\n0,1,-3\n")
    assert read_trace(path).source_id == "bare.csv"


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 1e6, allow_nan=False),
                          st.floats(0, 10e6, allow_nan=False),
                          st.floats(-200, 50, allow_nan=False)), min_size=1, max_size=40))
def test_round_trip_property(records):
    trace = make_trace(*zip(*records))
    buf = io.StringIO()
    serialize_trace(trace, buf)
    back = parse_trace(buf.getvalue())
    assert back.identical(trace)
    order = np.lexsort((back.frequencies, back.timestamps))
    assert np.array_equal(order, np.arange(len(back)))


def test_arrays_are_read_only():
    trace = make_trace([0, 1], [1, 2], [3, 4])
    with pytest.raises(ValueError):
        trace.powers[0] = 1.0


# ---- onset detection

def step_trace(step_ms, sweep_ms=8.0, n_sweeps=200, points=10, low=-90.0, high=-60.0, noise=0.0,
               seed=0):
    rng = np.random.default_rng(seed)
    t = np.repeat(np.arange(n_sweeps) * sweep_ms, points)
    f = np.tile(np.linspace(0, 10e6, points), n_sweeps)
    p = np.where(t >= step_ms, high, low) + noise * rng.normal(size=t.size)
    return make_trace(t, f, p)


def test_constant_trace_onset_zero():
    assert detect_boot_onset(step_trace(1e9)) == 0.0


def test_step_at_500ms():
    onset = detect_boot_onset(step_trace(500.0, noise=1.0), 200.0, 5.0)
    assert 500.0 <= onset <= 500.0 + 8.0


def test_step_onset_matches_hand_threshold():
    trace = step_trace(500.0, noise=2.0, seed=4)
    slots, totals = timeslot_power(trace)
    base = totals[slots < 200.0]
    limit = base.mean() + 5.0 * base.std()
    expected = slots[np.argmax(totals > limit)]
    assert detect_boot_onset(trace) == expected


def test_zero_variance_baseline_any_change_counts():
    trace = step_trace(400.0, low=-90.0, high=-89.999)
    assert detect_boot_onset(trace) == 400.0


def test_excursion_inside_baseline_returns_zero():
    assert detect_boot_onset(step_trace(100.0)) == 0.0


def test_short_trace():
    with pytest.raises(TraceTooShort):
        detect_boot_onset(step_trace(0.0, n_sweeps=10), 200.0)


def test_k_sigma_must_be_positive():
    with pytest.raises(ValueError):
        detect_boot_onset(step_trace(500.0), k_sigma=0.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(-200, 200), st.integers(26, 180), st.integers(0, 10_000))
def test_onset_invariant_to_power_offset(offset, step_sweep, seed):
    # Integer-valued powers keep every sum exact, so the comparison is too.
    rng = np.random.default_rng(seed)
    base = step_trace(step_sweep * 8.0)
    p = np.round(base.powers + rng.integers(-3, 4, base.powers.size))
    trace = base.with_powers(p)
    assert detect_boot_onset(trace.with_powers(p + offset)) == detect_boot_onset(trace)


# ---- windowing

def test_window_full_range_is_identity():
    trace = step_trace(500.0)
    out = window_trace(trace, 0.0, math.inf)
    assert out.identical(trace)


def test_window_boundaries_and_rebase():
    trace = make_trace([0, 1000, 2000, 3000], [5] * 4, [1, 2, 3, 4])
    out = window_trace(trace, 1000.0, 1080.0)
    assert out.timestamps.tolist() == [0.0, 1000.0]
    assert out.powers.tolist() == [2.0, 3.0]
    # the end is open
    assert window_trace(trace, 1000.0, 1000.0).timestamps.tolist() == [0.0]


def test_window_after_end():
    with pytest.raises(EmptyWindow):
        window_trace(step_trace(500.0), 1e7, 10.0)


def test_window_duration_positive():
    with pytest.raises(ValueError):
        window_trace(step_trace(500.0), 0.0, 0.0)


@settings(max_examples=30, deadline=None)
@given(st.floats(1.0, 2000.0))
def test_window_idempotent(duration):
    trace = step_trace(500.0)
    once = window_trace(trace, 0.0, duration)
    assert window_trace(once, 0.0, duration).identical(once)
