import datetime as dt
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from tsadv.data import (DataFormatError, SeriesFrame, apply_rul, correlation_matrix, denormalize,
                        impute_column_mean, label_rul, load_electricity, load_hdd, make_windows,
                        minmax_normalize, resample_daily_mean, select_features, synth_series,
                        train_val_test_split, walk_forward_splits, write_electricity, write_hdd)

HEADER = "Date;Time;Global_active_power;Global_reactive_power;Voltage;Global_intensity;Sub_metering_1;Sub_metering_2;Sub_metering_3\n"
ROW = "16/12/2006;17:24:00;4.216;0.418;234.840;18.400;0.000;1.000;17.000\n"


def frame_of(values, start="2020-01-01", cols=None, target=None):
    values = np.asarray(values, dtype=np.float64)
    if values.ndim == 1:
        values = values[:, None]
    cols = cols or [f"c{j}" for j in range(values.shape[1])]
    ts = np.datetime64(start) + np.arange(len(values)).astype("timedelta64[D]")
    return SeriesFrame(timestamps=ts, values=values, columns=cols, target=target or cols[0])


# -- loaders ---------------------------------------------------------------

def test_electricity_row_parses(tmp_path):
    p = tmp_path / "power.txt"
    p.write_text(HEADER + ROW)
    f = load_electricity(p)
    assert f.timestamps[0] == np.datetime64("2006-12-16T17:24:00")
    np.testing.assert_array_equal(f.values[0], [4.216, 0.418, 234.84, 18.4, 0.0, 1.0, 17.0])
    assert f.target == "global_active_power"


def test_electricity_question_marks_become_missing(tmp_path):
    p = tmp_path / "power.txt"
    p.write_text(HEADER + ROW + "16/12/2006;17:25:00;?;?;?;?;?;?;?\n")
    f = load_electricity(p)
    assert np.isnan(f.values[1]).all() and f.missing_count() == 7


def test_electricity_without_header(tmp_path):
    p = tmp_path / "power.txt"
    p.write_text(ROW)
    assert len(load_electricity(p)) == 1


@pytest.mark.parametrize("body,line", [
    (ROW + "16/12/2006;17:25:00;1.0;2.0\n", 3),
    (ROW + "31/02/2006;17:25:00;1;1;1;1;1;1;1\n", 3),
    (ROW + "16/12/2006;17:25:00;1;abc;1;1;1;1;1\n", 3),
])
def test_electricity_errors_carry_line_numbers(tmp_path, body, line):
    p = tmp_path / "power.txt"
    p.write_text(HEADER + body)
    with pytest.raises(DataFormatError) as err:
        load_electricity(p)
    assert err.value.line == line


def test_electricity_empty_file(tmp_path):
    p = tmp_path / "power.txt"
    p.write_text("")
    with pytest.raises(DataFormatError):
        load_electricity(p)


def test_electricity_write_read_round_trip(tmp_path):
    f = impute_column_mean(load_electricity_fixture(tmp_path))
    p = tmp_path / "out.txt"
    write_electricity(f, p)
    g = load_electricity(p)
    np.testing.assert_array_equal(f.values, g.values)
    np.testing.assert_array_equal(f.timestamps, g.timestamps)


def load_electricity_fixture(tmp_path):
    p = tmp_path / "in.txt"
    p.write_text(HEADER + ROW + "16/12/2006;17:25:00;?;0.5;233.0;18.0;0.0;2.0;16.0\n")
    return load_electricity(p)


def test_hdd_round_trip_and_model_filter(tmp_path):
    f = synth_series("degradation", {"n_serials": 5}, seed=2)
    write_hdd(f, tmp_path / "day.csv")
    g = load_hdd(tmp_path, model="SYNTH4000")
    np.testing.assert_allclose(g.input_matrix(), f.input_matrix(), rtol=1e-15)
    assert g.input_columns == f.input_columns
    with pytest.raises(DataFormatError):
        load_hdd(tmp_path, model="ST4000DM000")


def test_hdd_drops_rare_columns_and_incomplete_rows(tmp_path):
    (tmp_path / "a.csv").write_text(
        "date,serial_number,model,capacity_bytes,failure,smart_1_raw,smart_2_raw\n"
        "2015-01-01,S1,M,1,0,1.0,\n"
        "2015-01-02,S1,M,1,0,2.0,5\n"
        "2015-01-01,S2,M,1,0,,\n"
        "2015-01-02,S2,M,1,0,4.0,\n"
        "2015-01-01,S3,X,1,0,9.0,9\n")
    # smart_1 is present in 3 of 4 model-M rows, smart_2 in 1 of 4
    f = load_hdd(tmp_path / "a.csv", model="M", coverage=0.7)
    assert f.input_columns == ["smart_1_raw"] and len(f) == 3


# -- preprocessing ---------------------------------------------------------

def test_impute_uses_column_mean():
    f = impute_column_mean(frame_of([[1.0, np.nan], [3.0, 4.0], [np.nan, 8.0]]))
    np.testing.assert_array_equal(f.values, [[1, 6], [3, 4], [2, 8]])
    with pytest.raises(ValueError):
        impute_column_mean(frame_of([[np.nan], [np.nan]]))


def test_daily_mean_resampling():
    ts = np.array(["2020-01-01T00:00", "2020-01-01T12:00", "2020-01-02T06:00"], dtype="datetime64[s]")
    f = SeriesFrame(timestamps=ts, values=np.array([[1.0], [3.0], [10.0]]), columns=["a"], target="a")
    r = resample_daily_mean(f)
    np.testing.assert_array_equal(r.values[:, 0], [2.0, 10.0])
    assert r.timestamps[1] == np.datetime64("2020-01-02")


def test_normalize_examples():
    f = minmax_normalize(frame_of([[2.0, 5.0], [4.0, 5.0], [3.0, 5.0]]))
    np.testing.assert_array_equal(f.values, [[0, 0], [1, 0], [0.5, 0]])
    g = minmax_normalize(frame_of([0.0, 10.0]), 0, 255)
    np.testing.assert_array_equal(g.values[:, 0], [0, 255])


@settings(max_examples=80, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(2, 30), st.integers(1, 4)),
              elements=st.floats(-1e6, 1e6, allow_nan=False)),
       st.sampled_from([(0.0, 1.0), (0.0, 255.0), (-1.0, 1.0)]))
def test_normalization_round_trip(values, rng_):
    f = frame_of(values)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        n = minmax_normalize(f, *rng_)
    assert np.all(n.values >= rng_[0]) and np.all(n.values <= rng_[1])
    back = denormalize(n).values
    varying = values.max(axis=0) > values.min(axis=0)
    scale = np.maximum(np.abs(values).max(axis=0), 1.0)
    assert np.all((np.abs(back - values) / scale)[:, varying] <= 1e-12)


def test_correlation_and_selection():
    x = np.linspace(0, 1, 50)
    f = frame_of(np.column_stack([x, 2 * x + 1, -x, np.sin(40 * x), np.ones(50)]),
                 cols=["t", "pos", "neg", "noise", "flat"])
    with pytest.warns(RuntimeWarning):
        c = correlation_matrix(f)
    np.testing.assert_allclose(np.diag(c), 1.0)
    assert c[0, 1] == pytest.approx(1.0) and c[0, 2] == pytest.approx(-1.0) and c[0, 4] == 0.0
    with pytest.warns(RuntimeWarning):
        s = select_features(f, top=3)
    assert s.columns == ["t", "pos", "neg"]


# -- RUL ---------------------------------------------------------------------

def test_rul_worked_example():
    dates = np.datetime64("2020-01-01") + np.arange(10).astype("timedelta64[D]")
    f = SeriesFrame(timestamps=dates, values=np.zeros((10, 2)), columns=["smart_5_raw", "rul"],
                    target="rul", inputs=["smart_5_raw"],
                    aux={"serial_number": np.full(10, "S"), "failure": np.r_[np.zeros(9), 1].astype(int)})
    labels = label_rul(f, 5)
    assert [l.rul for l in labels] == [5, 4, 3, 2, 1]
    assert labels[0].date == dates[4] and labels[-1].date == dates[8]


def brute_force_rul(frame, horizon):
    """Walk each failed serial back from its failure day, one calendar day at a time."""
    serial = frame.aux["serial_number"]
    days = [dt.date.fromisoformat(str(t)[:10]) for t in frame.timestamps]
    fail_day = {s: d for s, d, f in zip(serial, days, frame.aux["failure"]) if f}
    logged = set(zip(serial, days))
    out = set()
    for s, T in fail_day.items():
        for r in range(1, horizon + 1):
            d = T - dt.timedelta(days=r)
            if (s, d) in logged:
                out.add((s, d.isoformat(), r))
    return out


def test_rul_matches_brute_force_on_100_serials():
    f = synth_series("degradation", {"n_serials": 80, "healthy_serials": 20, "min_life": 3,
                                     "max_life": 60}, seed=4)
    # knock out random days so gaps are exercised
    keep = np.random.default_rng(0).random(len(f)) > 0.2
    keep |= f.aux["failure"].astype(bool)
    f = f.take(np.flatnonzero(keep))
    for h in (5, 15, 25, 35, 45):
        got = {(l.serial_number, str(l.date)[:10], l.rul) for l in label_rul(f, h)}
        assert got == brute_force_rul(f, h)


def test_apply_rul_fills_target_and_orders_by_failure():
    f = apply_rul(synth_series("degradation", {"n_serials": 6}, seed=0), 5)
    assert not np.isnan(f.col("rul")).any() and set(f.col("rul")) == {1, 2, 3, 4, 5}
    assert len(f) == 30


# -- windows and splits -------------------------------------------------------

def test_window_counts_and_alignment():
    f = frame_of(np.arange(10.0))
    ds = make_windows(f, 3)
    assert len(ds) == 7
    np.testing.assert_array_equal(ds.inputs[0, :, 0], [0, 1, 2])
    assert ds.targets[0, 0] == 3
    seq = make_windows(f, 3, "sequence")
    assert len(seq) == 8 and seq.targets.shape == (8, 3)
    with pytest.raises(ValueError):
        make_windows(frame_of(np.arange(3.0)), 3)
    with pytest.raises(ValueError):
        make_windows(frame_of([0.0, np.nan, 1.0, 2.0]), 1)


def test_windows_never_cross_serials():
    f = apply_rul(synth_series("degradation", {"n_serials": 7}, seed=1), 5)
    ds = make_windows(f, 5, "sequence")
    assert len(ds) == 7
    assert all(len(set(ds.groups[i:i + 1])) == 1 for i in range(len(ds)))


def test_walk_forward_example():
    plan = walk_forward_splits(12, 3)
    assert [(list(t), list(v)) for t, v in plan] == [
        (list(range(0, 3)), list(range(3, 6))),
        (list(range(0, 6)), list(range(6, 9))),
        (list(range(0, 9)), list(range(9, 12))),
    ]
    with pytest.raises(ValueError):
        walk_forward_splits(3, 3)
    with pytest.raises(ValueError):
        walk_forward_splits(10, 1)


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 12).flatmap(lambda k: st.tuples(st.integers(k + 1, 500), st.just(k))))
def test_walk_forward_invariants(nk):
    n, k = nk
    plan = walk_forward_splits(n, k)
    assert len(plan) == k
    prev_end = 0
    for tr, va in plan:
        assert tr.start == 0 and len(va) > 0
        assert max(tr) < min(va) and tr.stop == va.start
        assert tr.stop > prev_end
        prev_end = tr.stop
    assert plan.folds[-1][1].stop == n


def test_train_val_test_split():
    tr, va, te = train_val_test_split(100)
    assert (len(tr), len(va), len(te)) == (80, 10, 10)
    assert tr.stop == va.start and va.stop == te.start
    with pytest.raises(ValueError):
        train_val_test_split(3)


# -- synthetic ----------------------------------------------------------------

def test_synthetic_is_seeded_and_periodic_without_noise():
    a = synth_series("seasonal", {"n": 100}, seed=1)
    b = synth_series("seasonal", {"n": 100}, seed=1)
    assert a.content_hash() == b.content_hash()
    clean = synth_series("seasonal", {"n": 60, "periods": [7], "amplitudes": [1.0], "noise": 0.0}, seed=3)
    gap = clean.col("global_active_power")
    np.testing.assert_allclose(gap[7:], gap[:-7], atol=1e-12)
    with pytest.raises(ValueError):
        synth_series("seasonal", {"bogus": 1})
