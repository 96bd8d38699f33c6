"""Desk-scale synthetic surrogates for both datasets.

``seasonal`` imitates the daily household-power series: seven columns driven
by a shared periodic signal plus AR(1) noise. ``degradation`` imitates a
Backblaze drive log: per-serial daily rows whose SMART-like counters ramp up
before a recorded failure.
"""

from __future__ import annotations

import numpy as np

from ..rng import stream
from .io import ELECTRICITY_COLUMNS, ELECTRICITY_TARGET
from .types import SeriesFrame

SEASONAL_DEFAULTS = dict(n=1400, periods=(365, 7), amplitudes=(1.0, 0.35), noise=0.15,
                         ar=0.7, start="2006-12-16")
DEGRADATION_DEFAULTS = dict(n_serials=120, healthy_serials=0, min_life=70, max_life=160,
                            onset=60, noise=0.05, start="2015-01-01", model="SYNTH4000",
                            start_spread=120)
SMART_COLUMNS = ["smart_1_raw", "smart_5_raw", "smart_9_raw", "smart_187_raw",
                 "smart_194_raw", "smart_197_raw"]


def _merge(defaults: dict, params: dict | None) -> dict:
    params = dict(params or {})
    unknown = set(params) - set(defaults)
    if unknown:
        raise ValueError(f"unknown synthetic parameters {sorted(unknown)}")
    return {**defaults, **params}


def _seasonal(p: dict, seed: int) -> SeriesFrame:
    n, periods, amps = int(p["n"]), tuple(p["periods"]), tuple(p["amplitudes"])
    noise, ar = float(p["noise"]), float(p["ar"])
    if n < 2 or not periods or len(periods) != len(amps):
        raise ValueError("seasonal needs n >= 2 and one amplitude per period")
    if any(int(q) != q or q < 2 for q in periods):
        raise ValueError("periods must be integers >= 2")
    if noise < 0 or not 0 <= ar < 1:
        raise ValueError("need noise >= 0 and 0 <= ar < 1")
    rng = stream(seed, "synth", "seasonal")
    t = np.arange(n)
    phases = rng.uniform(0, 2 * np.pi, size=len(periods))
    # phase from t mod period keeps noiseless series exactly periodic
    waves = [a * np.sin(2 * np.pi * ((t % int(q)) / q) + ph) for q, a, ph in zip(periods, amps, phases)]
    slow = waves[0]
    season = np.sum(waves, axis=0)
    eps = rng.standard_normal((8, n))
    u = np.zeros(n)
    for i in range(1, n):
        u[i] = ar * u[i - 1] + noise * eps[0, i]

    gap = np.maximum(1.1 + 0.45 * season + 0.5 * u, 0.05)
    cols = {
        "global_active_power": gap,
        "global_reactive_power": 0.12 + 0.03 * slow + 0.02 * noise * eps[1],
        "voltage": 241.0 - 1.5 * gap + 0.8 * noise * eps[2],
        "global_intensity": 4.2 * gap + 0.05 + 0.2 * noise * eps[3],
        "sub_metering_1": np.maximum(1.1 + 0.6 * (season - slow) + 0.8 * u + noise * eps[4], 0.0),
        "sub_metering_2": np.maximum(1.3 + 0.3 * slow + noise * eps[5], 0.0),
        "sub_metering_3": 6.5 + 2.6 * gap + 0.6 * noise * eps[6],
    }
    values = np.column_stack([cols[c] for c in ELECTRICITY_COLUMNS])
    ts = np.datetime64(p["start"], "D") + t.astype("timedelta64[D]")
    return SeriesFrame(timestamps=ts, values=values, columns=list(ELECTRICITY_COLUMNS),
                       target=ELECTRICITY_TARGET, name=f"synthetic-seasonal-{seed}")


def _degradation(p: dict, seed: int) -> SeriesFrame:
    n_fail, n_ok = int(p["n_serials"]), int(p["healthy_serials"])
    lo, hi, onset = int(p["min_life"]), int(p["max_life"]), int(p["onset"])
    noise = float(p["noise"])
    if n_fail < 0 or n_ok < 0 or n_fail + n_ok == 0:
        raise ValueError("need at least one serial")
    if not 2 <= lo <= hi or onset < 1 or noise < 0:
        raise ValueError("need 2 <= min_life <= max_life, onset >= 1, noise >= 0")
    rng = stream(seed, "synth", "degradation")
    start = np.datetime64(p["start"], "D")
    slopes = rng.uniform(0.5, 1.5, size=3)
    rows_t, rows_v, serials, fails = [], [], [], []
    for s in range(n_fail + n_ok):
        failing = s < n_fail
        life = int(rng.integers(lo, hi + 1))
        offset = int(rng.integers(0, int(p["start_spread"]) + 1))
        hours0 = rng.uniform(1e3, 3e4)
        temp0 = rng.uniform(24, 34)
        t = np.arange(life + 1)
        ramp = np.clip((t - (life - onset)) / onset, 0.0, 1.0) if failing else np.zeros(life + 1)
        e = rng.standard_normal((6, life + 1))
        v = np.column_stack([
            1e8 * (1.0 + 6.0 * noise * e[0] + 0.5 * ramp),      # smart_1 read error rate
            np.maximum(200.0 * slopes[0] * ramp ** 1.5 + 40 * noise * np.abs(e[1]), 0.0),
            hours0 + 24.0 * t,                                              # smart_9 power-on hours
            np.maximum(60.0 * slopes[1] * ramp ** 2 + 10 * noise * np.abs(e[3]), 0.0),
            temp0 + 3.0 * ramp + 20 * noise * e[4],
            np.maximum(120.0 * slopes[2] * ramp + 30 * noise * np.abs(e[5]), 0.0),
        ])
        rows_v.append(v)
        rows_t.append(start + (offset + t).astype("timedelta64[D]"))
        serials.append(np.full(life + 1, f"SYN{seed:04d}{s:05d}", dtype=object))
        f = np.zeros(life + 1, dtype=np.int64)
        if failing:
            f[-1] = 1
        fails.append(f)
    values = np.concatenate(rows_v)
    values = np.column_stack([values, np.full(len(values), np.nan)])
    n = len(values)
    aux = {"serial_number": np.concatenate(serials).astype(str),
           "model": np.full(n, p["model"]).astype(str),
           "capacity_bytes": np.full(n, 4.000787e12),
           "failure": np.concatenate(fails)}
    return SeriesFrame(timestamps=np.concatenate(rows_t), values=values,
                       columns=SMART_COLUMNS + ["rul"], target="rul", inputs=list(SMART_COLUMNS),
                       aux=aux, name=f"synthetic-degradation-{seed}")


def synth_series(kind: str, params: dict | None = None, seed: int = 0) -> SeriesFrame:
    if kind == "seasonal":
        return _seasonal(_merge(SEASONAL_DEFAULTS, params), seed)
    if kind == "degradation":
        return _degradation(_merge(DEGRADATION_DEFAULTS, params), seed)
    raise ValueError(f"unknown synthetic kind {kind!r}")
