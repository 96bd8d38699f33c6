"""Remaining-useful-life labels for drive logs.

A drive failing on date T gets, on each earlier logged date t with
``T - t <= horizon`` days, the label ``T - t``; the last day before failure is
1. Earlier days and drives that never fail carry no label.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .types import SeriesFrame

HORIZONS = (5, 15, 25, 35, 45)
_DAY = np.timedelta64(1, "D")


@dataclass(frozen=True)
class RulLabel:
    serial_number: str
    date: np.datetime64
    rul: int
    horizon: int


def _failure_dates(frame: SeriesFrame) -> dict[str, np.datetime64]:
    serial = frame.aux["serial_number"]
    failed = frame.aux["failure"].astype(bool)
    out: dict[str, np.datetime64] = {}
    for s, t in zip(serial[failed], frame.timestamps[failed]):
        if s in out:
            raise ValueError(f"serial {s!r} has more than one failure day")
        out[s] = t
    return out


def _label_rows(frame: SeriesFrame, horizon: int) -> tuple[np.ndarray, np.ndarray]:
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    fail = _failure_dates(frame)
    serial = frame.aux["serial_number"]
    nat = np.datetime64("NaT")
    T = np.array([fail.get(s, nat) for s in serial], dtype="datetime64[s]")
    with np.errstate(invalid="ignore"):
        days = (T - frame.timestamps) / _DAY
    ok = ~np.isnan(days)
    rul = np.where(ok, days, 0.0)
    rows = np.flatnonzero(ok & (rul >= 1) & (rul <= horizon))
    return rows, rul[rows].astype(np.int64)


def label_rul(frame: SeriesFrame, horizon: int) -> list[RulLabel]:
    """RUL labels for every logged day within ``horizon`` days before a failure."""
    rows, rul = _label_rows(frame, horizon)
    serial = frame.aux["serial_number"]
    return [RulLabel(str(serial[i]), frame.timestamps[i], int(r), horizon) for i, r in zip(rows, rul)]


def apply_rul(frame: SeriesFrame, horizon: int) -> SeriesFrame:
    """Restrict ``frame`` to labeled rows and fill its ``rul`` column.

    Drives are ordered by failure date so contiguous splits stay temporal.
    """
    rows, rul = _label_rows(frame, horizon)
    if rows.size == 0:
        raise ValueError("no labeled rows: no drive fails inside the log")
    sub = frame.take(rows)
    values = sub.values.copy()
    values[:, sub.columns.index("rul")] = rul
    fail = _failure_dates(frame)
    serial = sub.aux["serial_number"]
    fdate = np.array([fail[s] for s in serial], dtype="datetime64[s]")
    order = np.lexsort((sub.timestamps, serial, fdate))
    out = sub.with_values(values).take(order)
    out.name = f"{frame.name}:rul{horizon}"
    return out
