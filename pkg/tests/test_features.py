import datetime as dt
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_stream
from temporal_har.features import (
    ConfigError,
    FeatureConfig,
    Models,
    assemble,
    bss_vector,
    count_vector,
    cyclic_features,
    feature_matrix,
    fit_models,
    location_change,
    swls_vector,
    swmi_temp_vector,
    swmi_vector,
    swtw_vector,
)
from temporal_har.mutual_info import MIMatrix, TemporalMI, mi_global
from temporal_har.partition import DayPartition
from temporal_har.windowing import event_windows

REG = ["M1", "M2", "M3"]


def last_window(sensors, **kw):
    s = make_stream(sensors, registry=kw.pop("registry", REG), **kw)
    return event_windows(s, len(s))[-1]


def mi_of(rows):
    return MIMatrix(np.array(rows, dtype=float), 4)


def test_count_vector_examples():
    assert count_vector(last_window(["M1", "M2", "M1"])).tolist() == [2, 1, 0]
    assert count_vector(last_window(["M3"])).tolist() == [0, 0, 1]
    assert count_vector(last_window(["M1"] * 6)).tolist() == [6, 0, 0]


def test_swmi_vector_examples():
    mi = mi_global(np.array([0, 1, 0, 0]), 2)
    w = last_window(["A", "B"], registry=["A", "B"])
    assert swmi_vector(w, mi).tolist() == [0.25, 0.0]
    assert not swmi_vector(w, mi_of(np.zeros((2, 2)))).any()
    w1 = last_window(["A"], registry=["A", "B"])
    assert swmi_vector(w1, mi).tolist() == [0.25, 0.0]


def test_bss_and_swls_examples():
    for fn in (bss_vector, swls_vector):
        assert fn(last_window(["M1", "M2", "M1"], states=[1, -1, -1])).tolist() == [-1, -1, 0]
        assert fn(last_window(["M3"], states=[1])).tolist() == [0, 0, 1]
        assert fn(last_window(["M1", "M1", "M1"], states=[1, -1, 1])).tolist() == [1, 0, 0]


def _tmi(morning, afternoon, night, p=DayPartition(6, 12, 20)):
    return TemporalMI(mi_of(morning), mi_of(afternoon), mi_of(night), p)


def test_swmi_temp_selects_by_trigger_hour():
    a, b, c = np.full((2, 2), 0.1), np.full((2, 2), 0.2), np.full((2, 2), 0.3)
    tmi = _tmi(a, b, c)
    t = [dt.datetime(2024, 1, 1, 11, 59), dt.datetime(2024, 1, 1, 12, 1)]
    w_noon = last_window(["A", "B"], registry=["A", "B"], times=t)
    assert swmi_temp_vector(w_noon, tmi).tolist() == [0.2, 0.2]
    w_morning = last_window(["A", "B"], registry=["A", "B"], times=[t[0] - dt.timedelta(hours=3), t[0]])
    assert swmi_temp_vector(w_morning, tmi).tolist() == [0.1, 0.1]


def test_swmi_temp_equals_swmi_when_matrices_identical():
    rng = np.random.default_rng(1)
    v = rng.random((3, 3))
    s = make_stream(rng.integers(0, 3, 50), registry=REG,
                    times=[dt.datetime(2024, 1, 1) + dt.timedelta(minutes=37 * i) for i in range(50)])
    tmi = _tmi(v, v, v)
    for w in event_windows(s, 6):
        assert np.array_equal(swmi_temp_vector(w, tmi), swmi_vector(w, mi_of(v)))


def test_swtw_decay():
    mi = mi_of([[0.5, 0.5], [0.5, 0.25]])
    t0 = dt.datetime(2024, 1, 1, 9)
    w = last_window(["A", "B"], registry=["A", "B"], times=[t0, t0 + dt.timedelta(seconds=60)])
    got = swtw_vector(w, mi, math.log(2) / 60)
    assert got[0] == pytest.approx(0.5 * 0.5, abs=1e-15)
    assert got[1] == 0.25
    assert np.array_equal(swtw_vector(w, mi, 0.0), swmi_vector(w, mi))
    far = last_window(["A", "B"], registry=["A", "B"], times=[t0, t0 + dt.timedelta(hours=1)])
    big = swtw_vector(far, mi, 10.0)
    assert big[0] < 1e-300 and big[1] == 0.25


def test_cyclic_examples():
    monday = dt.datetime(2024, 1, 1)
    assert monday.weekday() == 0
    np.testing.assert_allclose(cyclic_features(monday), [0, 1, 0, 1], atol=1e-15)
    np.testing.assert_allclose(cyclic_features(monday.replace(hour=6))[:2], [1, 0], atol=1e-15)
    np.testing.assert_allclose(cyclic_features(monday.replace(hour=12))[:2], [0, -1], atol=1e-15)


@settings(max_examples=200, deadline=None)
@given(st.datetimes(min_value=dt.datetime(1971, 1, 1), max_value=dt.datetime(2100, 1, 1)))
def test_cyclic_matches_stdlib_and_unit_circle(ts):
    v = cyclic_features(ts)
    h = ts.hour + ts.minute / 60 + ts.second / 3600 + ts.microsecond / 3.6e9
    d = ts.weekday()
    np.testing.assert_allclose(
        v, [math.sin(2 * math.pi * h / 24), math.cos(2 * math.pi * h / 24),
            math.sin(2 * math.pi * d / 7), math.cos(2 * math.pi * d / 7)], atol=1e-9)
    assert abs(v[0] ** 2 + v[1] ** 2 - 1) < 1e-12
    assert abs(v[2] ** 2 + v[3] ** 2 - 1) < 1e-12


def test_cyclic_adjacency():
    day = dt.datetime(2024, 1, 1)
    late = cyclic_features(day + dt.timedelta(hours=23.99))[:2]
    early = cyclic_features(day + dt.timedelta(hours=0.01))[:2]
    six = cyclic_features(day + dt.timedelta(hours=6))[:2]
    assert np.linalg.norm(late - early) < np.linalg.norm(early - six)


def test_location_change():
    assert location_change(last_window(["M2", "M1", "M1"])) == 0
    assert location_change(last_window(["M2", "M1", "M2"])) == 1
    assert location_change(last_window(["M1"])) == 0


def test_assemble_layouts():
    w = last_window(["M1", "M2", "M1"])
    assert assemble(w, FeatureConfig("SW")).values.tolist() == [2, 1, 0]
    cfg = FeatureConfig.parse("SWMI+cyclic+location")
    mi = mi_of(np.ones((3, 3)))
    fv = assemble(w, cfg, Models(mi=mi))
    assert len(fv) == 3 + 5
    assert fv.layout == (("SWMI", 3), ("cyclic", 4), ("location_change", 1))
    assert fv.values[:3].tolist() == [2, 1, 0]
    assert fv.values[-1] == 1
    np.testing.assert_array_equal(fv.values[3:7], cyclic_features(w.trigger_timestamp))
    again = assemble(w, cfg, Models(mi=mi))
    assert fv.values.tobytes() == again.values.tobytes()


def test_assemble_missing_model_errors():
    w = last_window(["M1"])
    for base in ("SWMI", "SWMI-Temp", "SWTW", "SWMIex", "SWMI-Act"):
        with pytest.raises(ConfigError):
            assemble(w, FeatureConfig(base))


def test_dw_needs_model_for_stream_extraction():
    s = make_stream(["M1", "M2"], registry=REG)
    with pytest.raises(ConfigError):
        feature_matrix(s, FeatureConfig("DW"), Models(), 5)


def test_config_parse():
    assert FeatureConfig.parse("Combined") == FeatureConfig("SWMI-Temp", cyclic=True, location_change=True)
    assert FeatureConfig.parse("swmi_temp+cyclic").name == "SWMI-Temp+cyclic"
    with pytest.raises(ConfigError):
        FeatureConfig.parse("SWMI+bogus")
    with pytest.raises(ConfigError):
        FeatureConfig("nope")


def test_minmax_scaling_fitted_on_training():
    train = make_stream(["M2"] + ["M1"] * 4, registry=REG)
    cfg = FeatureConfig("SW", scaling="minmax")
    models = fit_models(train, cfg, n=4)
    assert models.scaler.lo[0] == 0 and models.scaler.hi[0] == 4
    test = make_stream(["M1", "M1", "M3", "M3"], registry=REG)
    row = feature_matrix(test, cfg, models, 4)[-1]
    assert row[0] == 0.5


# --- whole-matrix oracle --------------------------------------------------

def reference_rows(stream, base, mi, n, lam):
    """Per-window loops, written without numpy tricks."""
    out = []
    for w in event_windows(stream, n):
        sensors = [int(x) for x in w.sensors]
        states = [int(x) for x in w.states]
        times = w.timestamps
        last = sensors[-1]
        row = [0.0] * stream.m
        for pos, (s, st_) in enumerate(zip(sensors, states)):
            if base in ("BSS", "SWLS"):
                row[s] = float(st_)
            elif base == "SW":
                row[s] += 1
            elif base == "SWMI":
                row[s] += mi[s][last]
            else:
                age = (times[-1] - times[pos]) / np.timedelta64(1, "s")
                row[s] += math.exp(-lam * age) * mi[s][last]
        out.append(row)
    return np.array(out)


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.tuples(st.integers(0, 3), st.sampled_from([1, -1]), st.integers(0, 400)), min_size=1, max_size=40),
    st.integers(1, 9),
    st.sampled_from(["SW", "SWMI", "BSS", "SWLS", "SWTW"]),
)
def test_feature_matrix_matches_reference(rows, n, base):
    t0 = dt.datetime(2024, 3, 5, 7)
    times, acc = [], 0
    for r in rows:
        acc += r[2]
        times.append(t0 + dt.timedelta(seconds=acc))
    s = make_stream([r[0] for r in rows], states=[r[1] for r in rows], times=times, registry=list("abcd"))
    mi = mi_global(s, 4)
    lam = math.log(2) / 60
    got = feature_matrix(s, FeatureConfig(base, swtw_lambda=lam), Models(mi=mi), n)
    want = reference_rows(s, base, mi.values.tolist(), n, lam)
    np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-15)
    if base == "SW":
        assert got.sum(axis=1).tolist() == [min(i + 1, n) for i in range(len(s))]
    if base == "SWMI":
        counts = feature_matrix(s, FeatureConfig("SW"), Models(), n)
        np.testing.assert_array_equal(got, counts * mi.values[:, s.sensors].T)
    if base in ("BSS", "SWLS"):
        assert set(np.unique(got)) <= {-1.0, 0.0, 1.0}
