from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace

import numpy as np


class DataFormatError(ValueError):
    """Input file does not match the expected dialect."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass
class SeriesFrame:
    """Timestamp-indexed multivariate series.

    ``values`` is rows x columns with NaN marking a missing cell. ``inputs``
    names the columns fed to a model (all columns when ``None``). ``aux`` holds
    per-row non-feature columns such as ``serial_number`` or ``failure``.
    ``norm`` keeps (min, max, lo, hi) per normalized column.
    """

    timestamps: np.ndarray
    values: np.ndarray
    columns: list[str]
    target: str
    inputs: list[str] | None = None
    aux: dict[str, np.ndarray] = field(default_factory=dict)
    norm: dict[str, tuple[float, float, float, float]] = field(default_factory=dict)
    name: str = "frame"

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype="datetime64[s]")
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[1] != len(self.columns):
            raise ValueError(f"values shape {self.values.shape} does not match {len(self.columns)} columns")
        if len(self.timestamps) != len(self.values):
            raise ValueError("timestamps and values differ in length")
        for k, v in self.aux.items():
            if len(v) != len(self.values):
                raise ValueError(f"aux column {k!r} differs in length")
        if self.target not in self.columns:
            raise ValueError(f"target {self.target!r} is not a column")
        for c in self.inputs or ():
            if c not in self.columns:
                raise ValueError(f"input column {c!r} is not a column")
        self.check_order()

    def __len__(self) -> int:
        return len(self.values)

    @property
    def groups(self) -> np.ndarray | None:
        return self.aux.get("serial_number")

    @property
    def input_columns(self) -> list[str]:
        return list(self.inputs) if self.inputs is not None else list(self.columns)

    def col(self, name: str) -> np.ndarray:
        return self.values[:, self.columns.index(name)]

    def input_matrix(self) -> np.ndarray:
        return self.values[:, [self.columns.index(c) for c in self.input_columns]]

    def check_order(self) -> None:
        """Timestamps must strictly increase (within each serial when grouped)."""
        ts = self.timestamps
        if len(ts) < 2:
            return
        groups = self.groups
        if groups is None:
            bad = ts[1:] <= ts[:-1]
        else:
            same = groups[1:] == groups[:-1]
            bad = same & (ts[1:] <= ts[:-1])
        if np.any(bad):
            i = int(np.argmax(bad)) + 1
            raise ValueError(f"timestamps not strictly increasing at row {i}")

    def with_values(self, values: np.ndarray, **changes) -> "SeriesFrame":
        return replace(self, values=values, **changes)

    def take(self, rows) -> "SeriesFrame":
        rows = np.asarray(rows)
        return replace(self, timestamps=self.timestamps[rows], values=self.values[rows],
                       aux={k: v[rows] for k, v in self.aux.items()})

    def select(self, columns: list[str]) -> "SeriesFrame":
        idx = [self.columns.index(c) for c in columns]
        inputs = None if self.inputs is None else [c for c in self.inputs if c in columns]
        return replace(self, values=self.values[:, idx], columns=list(columns), inputs=inputs,
                       norm={k: v for k, v in self.norm.items() if k in columns})

    def missing_count(self) -> int:
        return int(np.isnan(self.values).sum())

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(self.timestamps.astype("int64").tobytes())
        h.update(np.ascontiguousarray(self.values).tobytes())
        h.update("|".join(self.columns).encode())
        return h.hexdigest()[:16]


@dataclass
class WindowedDataset:
    """Supervised windows: inputs N x L x F, targets N x 1 or N x L."""

    inputs: np.ndarray
    targets: np.ndarray
    lookback: int
    input_times: np.ndarray | None = None
    target_times: np.ndarray | None = None
    groups: np.ndarray | None = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        self.targets = np.asarray(self.targets, dtype=np.float64)
        if self.inputs.ndim != 3 or len(self.inputs) != len(self.targets):
            raise ValueError(f"inconsistent window shapes {self.inputs.shape} / {self.targets.shape}")

    def __len__(self) -> int:
        return len(self.inputs)

    @property
    def features(self) -> int:
        return self.inputs.shape[2]

    @property
    def mode(self) -> str:
        return self.provenance.get("mode", "next-step")

    def subset(self, rows, split: str | None = None) -> "WindowedDataset":
        prov = dict(self.provenance)
        if split is not None:
            prov["split"] = split
        pick = (lambda a: None if a is None else a[rows])
        return WindowedDataset(self.inputs[rows], self.targets[rows], self.lookback,
                               pick(self.input_times), pick(self.target_times), pick(self.groups), prov)

    def with_inputs(self, inputs: np.ndarray, **prov) -> "WindowedDataset":
        p = dict(self.provenance)
        p.update(prov)
        return WindowedDataset(inputs, self.targets, self.lookback, self.input_times,
                               self.target_times, self.groups, p)

    @staticmethod
    def concat(parts: list["WindowedDataset"], **prov) -> "WindowedDataset":
        first = parts[0]
        cat = (lambda name: None if getattr(first, name) is None
               else np.concatenate([getattr(p, name) for p in parts]))
        p = dict(first.provenance)
        p.update(prov)
        return WindowedDataset(np.concatenate([p_.inputs for p_ in parts]),
                               np.concatenate([p_.targets for p_ in parts]),
                               first.lookback, cat("input_times"), cat("target_times"), cat("groups"), p)

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.inputs).tobytes())
        h.update(np.ascontiguousarray(self.targets).tobytes())
        return h.hexdigest()[:16]
