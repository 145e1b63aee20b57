import datetime as dt
import logging

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_stream
from temporal_har.events import (
    OTHER,
    LabelMap,
    ParseError,
    SensorRegistry,
    State,
    concat,
    iter_casas_lines,
    load_dataset,
    parse_casas_line,
    parse_lines,
    temporal_split,
    write_casas,
)


def test_parse_line_with_annotation():
    reg = SensorRegistry()
    p = parse_casas_line("2010-11-04 00:03:50.209589 M003 ON Sleeping begin", reg)
    assert p.timestamp == dt.datetime(2010, 11, 4, 0, 3, 50, 209589)
    assert reg.names[p.sensor] == "M003"
    assert p.state is State.ON
    assert [(a.activity, a.marker) for a in p.annotations] == [("Sleeping", "begin")]


def test_parse_line_without_annotation():
    reg = SensorRegistry(["M001"])
    p = parse_casas_line("2010-11-04 05:40:51.303739 M004 OFF", reg)
    assert reg.names == ("M001", "M004")
    assert p.sensor == 1
    assert p.state is State.OFF
    assert p.annotations == ()


@pytest.mark.parametrize("line", ["2010-11-04 garbage", "2010-13-04 00:00:00 M001 ON", "2010-11-04 00:00:00 M001 MAYBE"])
def test_parse_line_errors(line):
    with pytest.raises(ParseError):
        parse_casas_line(line, SensorRegistry(), lineno=7)


def test_parse_error_carries_line_number():
    with pytest.raises(ParseError) as err:
        parse_casas_line("2010-11-04 garbage", SensorRegistry(), lineno=12)
    assert err.value.lineno == 12


@pytest.mark.parametrize("value,state", [("OPEN", State.ON), ("CLOSE", State.OFF), ("21.5", State.ON), ("ON", State.ON)])
def test_value_decoding(value, state):
    p = parse_casas_line(f"2010-11-04 00:00:00 X1 {value}", SensorRegistry())
    assert p.state is state


def test_tab_delimited_and_short_fraction():
    p = parse_casas_line("2010-11-04\t00:00:01.5\tM001\tON", SensorRegistry())
    assert p.timestamp.microsecond == 500000


def test_interval_labelling_inclusive(tmp_path):
    log = tmp_path / "log.txt"
    log.write_text(
        "2010-11-04 00:00:01.000000 M001 ON Sleeping begin\n"
        "2010-11-04 00:00:02.000000 M001 OFF\n"
        "2010-11-04 00:00:03.000000 M002 ON\n"
        "2010-11-04 00:00:04.000000 M002 OFF Sleeping end\n"
        "2010-11-04 00:00:05.000000 M003 ON\n"
    )
    s = load_dataset(log)
    assert list(s.labels) == ["Sleep"] * 4 + [OTHER]
    assert s.parse_errors == ()


def test_empty_file(tmp_path):
    (tmp_path / "e.txt").write_text("")
    s = load_dataset(tmp_path / "e.txt")
    assert len(s) == 0 and s.parse_errors == ()


def test_cook_variants_aggregate():
    lm = LabelMap.parse("Cook_* Cook\n")
    lines = [
        "2010-11-04 07:00:00 M1 ON Cook_Breakfast begin",
        "2010-11-04 07:00:05 M1 OFF Cook_Breakfast end",
        "2010-11-04 18:00:00 M1 ON Cook_Dinner begin",
        "2010-11-04 18:00:05 M1 OFF Cook_Dinner end",
    ]
    assert list(parse_lines(lines, lm).labels) == ["Cook"] * 4


def test_default_label_map_covers_aruba_and_tm_names():
    lm = LabelMap.default()
    assert lm("Meal_Preparation") == "Cook"
    assert lm("Cook_Lunch") == "Cook"
    assert lm("Sleeping") == "Sleep"
    assert lm("Bed_to_Toilet") == "Bed_to_Toilet"
    assert lm("Housekeeping") == OTHER
    assert lm("Never_Seen_Before") == OTHER
    assert lm("Wash_Dishes") == "Wash_Dishes"


def test_label_map_comments_and_bad_lines():
    lm = LabelMap.parse("# header\nA  Eat  # trailing\n\n")
    assert lm("A") == "Eat"
    with pytest.raises(ValueError):
        LabelMap.parse("one two three\n")


def test_innermost_begin_wins():
    lines = [
        "2010-11-04 07:00:00 M1 ON Relax begin",
        "2010-11-04 07:00:01 M1 OFF",
        "2010-11-04 07:00:02 M2 ON Eating begin",
        "2010-11-04 07:00:03 M2 OFF Eating end",
        "2010-11-04 07:00:04 M1 ON",
        "2010-11-04 07:00:05 M1 OFF Relax end",
    ]
    assert list(parse_lines(lines).labels) == ["Relax", "Relax", "Eat", "Eat", "Relax", "Relax"]


def test_unmatched_markers_warn(caplog):
    lines = [
        "2010-11-04 07:00:00 M1 ON Relax end",
        "2010-11-04 07:00:01 M1 OFF Eating begin",
        "2010-11-04 07:00:02 M1 ON",
    ]
    with caplog.at_level(logging.WARNING):
        s = parse_lines(lines)
    assert list(s.labels) == [OTHER, "Eat", "Eat"]
    assert "without matching begin" in caplog.text
    assert "never ended" in caplog.text


def test_out_of_order_lines_sorted_with_warning(caplog):
    lines = [
        "2010-11-04 07:00:02 M2 ON",
        "2010-11-04 07:00:01 M1 ON",
        "2010-11-04 07:00:03 M3 ON",
    ]
    with caplog.at_level(logging.WARNING):
        s = parse_lines(lines)
    assert [s.sensor_registry[i] for i in s.sensors] == ["M1", "M2", "M3"]
    assert "out of chronological order" in caplog.text


def test_parse_errors_collected_not_fatal():
    s = parse_lines(["2010-11-04 garbage", "2010-11-04 07:00:01 M1 ON", "x y z"])
    assert len(s) == 1
    assert [e.lineno for e in s.parse_errors] == [1, 3]


def test_roundtrip_through_text(tmp_path):
    lines = [
        "2010-11-04 07:00:00.100000 M1 ON Sleeping begin",
        "2010-11-04 07:00:01 M2 OFF Sleeping end",
        "2010-11-04 07:00:02.250000 T1 21.5",
        "2010-11-04 07:00:03 D1 OPEN Eating begin Eating end",
        "2010-11-04 07:00:04 D1 CLOSE Meal_Preparation begin",
        "2010-11-04 07:00:05 M2 ON Meal_Preparation end",
    ]
    s = parse_lines(lines)
    write_casas(s, tmp_path / "out.txt")
    again = load_dataset(tmp_path / "out.txt")
    assert again.same_events(s)


_sensor_names = st.sampled_from(["M001", "M002", "D001", "T001"])
_labels = st.sampled_from(["Sleep", "Cook", "Eat", OTHER, "Bed_to_Toilet"])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(_sensor_names, _labels, st.sampled_from([1, -1]), st.integers(0, 10_000_000)), max_size=40))
def test_roundtrip_property(rows):
    t0 = np.datetime64("2011-01-01T00:00:00", "us")
    offsets = np.cumsum([r[3] for r in rows]) if rows else []
    s = make_stream(
        [r[0] for r in rows],
        labels=[r[1] for r in rows],
        states=[r[2] for r in rows],
        times=[t0 + np.timedelta64(int(o), "us") for o in offsets],
    )
    again = parse_lines(list(iter_casas_lines(s)), LabelMap.default())
    # registry order follows first appearance in both
    assert again.same_events(s)


@pytest.mark.parametrize(
    "n,ratios,sizes",
    [
        (10, (0.7, 0.15, 0.15), (7, 2, 1)),
        (100, (0.7, 0.15, 0.15), (70, 15, 15)),
        (3, (1 / 3, 1 / 3, 1 / 3), (1, 1, 1)),
    ],
)
def test_temporal_split_sizes(n, ratios, sizes):
    s = make_stream(["A"] * n)
    parts = temporal_split(s, ratios)
    assert tuple(len(p) for p in parts) == sizes
    assert concat(parts).same_events(s)


def test_temporal_split_errors():
    with pytest.raises(ValueError):
        temporal_split(make_stream(["A", "B"]))
    with pytest.raises(ValueError):
        temporal_split(make_stream(["A"] * 10), (0.5, 0.5, 0.1))
    with pytest.raises(ValueError):
        temporal_split(make_stream(["A"] * 10), (0.5, 0.5, 0.0))


@settings(max_examples=100, deadline=None)
@given(st.integers(3, 500), st.floats(0.05, 0.9), st.floats(0.05, 0.9))
def test_split_concatenation_property(n, a, b):
    if a + b >= 0.99:
        return
    s = make_stream(list(range(n)), registry=[str(i) for i in range(n)])
    parts = temporal_split(s, (a, b, 1 - a - b))
    assert all(len(p) > 0 for p in parts)
    assert concat(parts).same_events(s)


def test_stream_invariants_enforced():
    with pytest.raises(ValueError):
        make_stream(["A", "B"], times=[dt.datetime(2020, 1, 2), dt.datetime(2020, 1, 1)])
    with pytest.raises(ValueError):
        make_stream([0, 3], registry=["A", "B"])
    with pytest.raises(ValueError):
        make_stream([0, 1], registry=["A", "A"])


def test_label_totality_and_other_fraction():
    s = parse_lines([
        "2010-11-04 07:00:00 M1 ON Relax begin",
        "2010-11-04 07:00:01 M1 OFF Relax end",
        "2010-11-04 07:00:02 M1 ON",
        "2010-11-04 07:00:03 M1 OFF",
    ])
    assert all(isinstance(l, str) and l for l in s.labels)
    assert s.other_fraction() == 0.5
