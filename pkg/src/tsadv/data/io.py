"""Readers and writers for the two CSV dialects.

Electricity (UCI household power): ``;``-delimited, ``?`` for missing,
``Date`` as dd/mm/yyyy and ``Time`` as hh:mm:ss, then seven numeric columns.

Backblaze drive stats: ``,``-delimited, one row per drive per day with
``date, serial_number, model, capacity_bytes, failure`` and SMART columns.
"""

from __future__ import annotations

import csv
import io
import logging
from pathlib import Path

import numpy as np
import pandas as pd

from .types import DataFormatError, SeriesFrame

log = logging.getLogger(__name__)

ELECTRICITY_COLUMNS = [
    "global_active_power", "global_reactive_power", "voltage", "global_intensity",
    "sub_metering_1", "sub_metering_2", "sub_metering_3",
]
ELECTRICITY_TARGET = "global_active_power"
_ELECTRICITY_HEADER = ["Date", "Time", "Global_active_power", "Global_reactive_power", "Voltage",
                       "Global_intensity", "Sub_metering_1", "Sub_metering_2", "Sub_metering_3"]

HDD_META = ["date", "serial_number", "model", "capacity_bytes", "failure"]


def load_electricity(path) -> SeriesFrame:
    """Parse the household power file; ``?`` cells come back as NaN."""
    path = Path(path)
    text = path.read_text()
    if not text.strip():
        raise DataFormatError(f"{path}: file is empty")
    first = text.split("\n", 1)[0].strip().split(";")
    has_header = bool(first) and first[0].strip().lower() == "date"
    try:
        raw = pd.read_csv(io.StringIO(text), sep=";", header=None, dtype=str,
                          keep_default_na=False, skiprows=1 if has_header else 0,
                          skip_blank_lines=True, engine="c")
    except pd.errors.ParserError as exc:
        raise DataFormatError(f"{path}: {exc}") from None
    except pd.errors.EmptyDataError:
        raise DataFormatError(f"{path}: no data rows") from None
    offset = 2 if has_header else 1  # 1-based file line of raw row 0
    lines = [ln for ln in text.splitlines()[offset - 1:] if ln.strip()]
    for i, ln in enumerate(lines):
        if ln.count(";") != 8:
            raise DataFormatError(f"expected 9 fields, found {ln.count(';') + 1}", line=i + offset)
    if raw.shape[1] != 9:
        raise DataFormatError(f"{path}: expected 9 columns, found {raw.shape[1]}")

    stamp = pd.to_datetime(raw[0].str.strip() + " " + raw[1].str.strip(),
                           format="%d/%m/%Y %H:%M:%S", errors="coerce")
    bad = stamp.isna().to_numpy()
    if bad.any():
        i = int(np.argmax(bad))
        raise DataFormatError(f"bad Date/Time {raw.iloc[i, 0]!r} {raw.iloc[i, 1]!r}", line=i + offset)

    cells = raw.iloc[:, 2:].apply(lambda s: s.str.strip())
    missing = (cells == "?") | (cells == "")
    values = cells.apply(pd.to_numeric, errors="coerce")
    bad = (values.isna() & ~missing).any(axis=1).to_numpy()
    if bad.any():
        i = int(np.argmax(bad))
        raise DataFormatError(f"non-numeric value in row {raw.iloc[i].tolist()}", line=i + offset)

    return SeriesFrame(timestamps=stamp.to_numpy(dtype="datetime64[s]"),
                       values=values.to_numpy(dtype=np.float64),
                       columns=list(ELECTRICITY_COLUMNS), target=ELECTRICITY_TARGET,
                       name=path.name)


def write_electricity(frame: SeriesFrame, path) -> None:
    """Write ``frame`` in the household power dialect (NaN becomes ``?``)."""
    ts = pd.to_datetime(frame.timestamps)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, delimiter=";", lineterminator="\n")
        w.writerow(_ELECTRICITY_HEADER)
        for t, row in zip(ts, frame.values):
            w.writerow([t.strftime("%d/%m/%Y"), t.strftime("%H:%M:%S")]
                       + ["?" if np.isnan(v) else repr(float(v)) for v in row])


def _read_hdd_tables(path: Path) -> pd.DataFrame:
    files = sorted(path.glob("*.csv")) if path.is_dir() else [path]
    if not files:
        raise DataFormatError(f"{path}: no CSV files found")
    tables = []
    for f in files:
        df = pd.read_csv(f, float_precision="round_trip")
        missing = [c for c in HDD_META if c not in df.columns]
        if missing:
            raise DataFormatError(f"{f}: missing columns {missing}")
        tables.append(df)
    return pd.concat(tables, ignore_index=True)


def load_hdd(path, model: str | None = "ST4000DM000", coverage: float = 0.99,
             smart_columns: list[str] | None = None) -> SeriesFrame:
    """Read Backblaze daily CSVs (a file or a directory of them).

    Rows are filtered to ``model``; SMART columns observed in at least
    ``coverage`` of those rows are kept and remaining incomplete rows dropped.
    The frame is sorted by serial then date; ``failure`` and the identifying
    columns live in ``aux``. The target column ``rul`` is all-NaN until
    :func:`tsadv.data.rul.apply_rul` fills it.
    """
    df = _read_hdd_tables(Path(path))
    if model is not None:
        df = df[df["model"] == model]
    if df.empty:
        raise DataFormatError(f"{path}: no rows for model {model!r}")
    if smart_columns is None:
        smart = [c for c in df.columns if c.startswith("smart_")]
        cover = df[smart].notna().mean()
        smart_columns = [c for c in smart if cover[c] >= coverage]
    if not smart_columns:
        raise DataFormatError(f"{path}: no SMART column reaches {coverage:.0%} coverage")
    before = len(df)
    df = df.dropna(subset=smart_columns)
    if len(df) < before:
        log.info("dropped %d incomplete rows", before - len(df))
    df = df.assign(date=pd.to_datetime(df["date"], format="%Y-%m-%d"))
    df = df.sort_values(["serial_number", "date"], kind="mergesort").reset_index(drop=True)
    dup = df.duplicated(["serial_number", "date"]).to_numpy()
    if dup.any():
        i = int(np.argmax(dup))
        raise DataFormatError(f"duplicate row for serial {df['serial_number'].iloc[i]} on {df['date'].iloc[i]}")

    values = np.column_stack([df[smart_columns].to_numpy(dtype=np.float64),
                              np.full(len(df), np.nan)])
    aux = {
        "serial_number": df["serial_number"].astype(str).to_numpy(),
        "model": df["model"].astype(str).to_numpy(),
        "capacity_bytes": df["capacity_bytes"].to_numpy(dtype=np.float64),
        "failure": df["failure"].to_numpy(dtype=np.int64),
    }
    return SeriesFrame(timestamps=df["date"].to_numpy(dtype="datetime64[s]"), values=values,
                       columns=list(smart_columns) + ["rul"], target="rul",
                       inputs=list(smart_columns), aux=aux, name=Path(path).name)


def write_hdd(frame: SeriesFrame, path) -> None:
    """Write a drive log in the Backblaze dialect (SMART columns only)."""
    smart = frame.input_columns
    df = pd.DataFrame({
        "date": pd.to_datetime(frame.timestamps).strftime("%Y-%m-%d"),
        "serial_number": frame.aux["serial_number"],
        "model": frame.aux.get("model", np.full(len(frame), "SYNTH")),
        "capacity_bytes": frame.aux.get("capacity_bytes", np.zeros(len(frame))).astype(np.int64),
        "failure": frame.aux["failure"].astype(np.int64),
    })
    for c in smart:
        df[c] = frame.col(c)
    df.to_csv(path, index=False, float_format="%.17g")
