"""LSTM forecasters built on the tape autodiff.

Two architectures share one parameter-handling base:

* :class:`VanillaLstmModel` maps an L x F window to one next-step value.
* :class:`EncDecLstmModel` encodes the window into a context vector, feeds the
  context to a decoder at every one of L steps and emits one value per step.

Both put a ReLU dense layer and dropout between the recurrent state and a
linear output head.
"""

from __future__ import annotations

import contextlib
import copy
from typing import Iterator

import numpy as np

from . import autodiff as ad
from .autodiff import ShapeError, Tensor
from .rng import stream

GATES = ("f", "j", "k", "o")


def _uniform(rng: np.random.Generator, fan_in: int, shape: tuple[int, ...]) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class LstmCellParams:
    """Gate weights of one LSTM cell.

    For each gate g in (f, j, k, o): ``X_g`` is F x H (input), ``Z_g`` is
    H x H (recurrent) and ``b_g`` has length H. ``f`` forgets, ``j`` and ``k``
    form the input contribution ``j * k``, ``o`` gates the output.
    """

    def __init__(self, tensors: dict[str, Tensor]):
        self.tensors = tensors
        self.features = tensors["X_f"].shape[0]
        self.hidden = tensors["Z_f"].shape[0]
        for g in GATES:
            if tensors[f"X_{g}"].shape != (self.features, self.hidden):
                raise ShapeError("LstmCellParams", tensors[f"X_{g}"].shape, (self.features, self.hidden))
            if tensors[f"Z_{g}"].shape != (self.hidden, self.hidden):
                raise ShapeError("LstmCellParams", tensors[f"Z_{g}"].shape, (self.hidden, self.hidden))
            if tensors[f"b_{g}"].shape != (self.hidden,):
                raise ShapeError("LstmCellParams", tensors[f"b_{g}"].shape, (self.hidden,))

    @staticmethod
    def names() -> list[str]:
        return [f"{kind}_{g}" for kind in ("X", "Z", "b") for g in GATES]

    @classmethod
    def init(cls, features: int, hidden: int, rng: np.random.Generator) -> "LstmCellParams":
        tensors = {}
        for g in GATES:
            tensors[f"X_{g}"] = _uniform(rng, features, (features, hidden))
        for g in GATES:
            tensors[f"Z_{g}"] = _uniform(rng, hidden, (hidden, hidden))
        for g in GATES:
            tensors[f"b_{g}"] = np.zeros(hidden)
        return cls({k: Tensor(v, requires_grad=True, name=k) for k, v in tensors.items()})

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]


def _gate(x: Tensor, s: Tensor, p: LstmCellParams, g: str) -> Tensor:
    return x @ p[f"X_{g}"] + s @ p[f"Z_{g}"] + p[f"b_{g}"]


def lstm_cell_step(x_t, s_prev, c_prev, params: LstmCellParams) -> tuple[Tensor, Tensor]:
    """Advance one LSTM cell by a single time step.

    Works on single vectors or on row batches. The cell update is the
    standard ``c_t = f * c_prev + j * k`` with no squashing of the cell state.
    """
    x_t, s_prev, c_prev = ad.as_tensor(x_t), ad.as_tensor(s_prev), ad.as_tensor(c_prev)
    if x_t.shape[-1] != params.features:
        raise ShapeError("lstm_cell_step", x_t.shape, params["X_f"].shape)
    if s_prev.shape[-1] != params.hidden or c_prev.shape != s_prev.shape:
        raise ShapeError("lstm_cell_step", s_prev.shape, c_prev.shape)
    f_g = ad.sigmoid(_gate(x_t, s_prev, params, "f"))
    j = ad.sigmoid(_gate(x_t, s_prev, params, "j"))
    k = ad.tanh(_gate(x_t, s_prev, params, "k"))
    i_g = j * k
    c_t = f_g * c_prev + i_g
    o_g = ad.sigmoid(_gate(x_t, s_prev, params, "o"))
    s_t = ad.tanh(c_t) * o_g
    return s_t, c_t


def unroll(cell: LstmCellParams, X: Tensor, steps: int | None = None,
           repeat_input: Tensor | None = None) -> list[Tensor]:
    """Run ``cell`` from zero state; returns the hidden state after every step.

    ``X`` is N x L x F. With ``repeat_input`` the same N x F input is fed at each
    of ``steps`` steps instead.
    """
    if repeat_input is not None:
        n = repeat_input.shape[0]
    else:
        n, steps = X.shape[0], X.shape[1]
    s = Tensor(np.zeros((n, cell.hidden)))
    c = Tensor(np.zeros((n, cell.hidden)))
    states = []
    for t in range(steps):
        x_t = repeat_input if repeat_input is not None else X[:, t, :]
        s, c = lstm_cell_step(x_t, s, c, cell)
        states.append(s)
    return states


class ForecastModel:
    """Parameter container plus architecture descriptor shared by both models."""

    kind = "base"

    def __init__(self, features: int, lookback: int, hidden: int = 100, dense: int = 100,
                 dropout: float = 0.1, seed: int = 0):
        if not 0.0 <= dropout < 1.0:
            raise ValueError(f"dropout must lie in [0, 1), got {dropout}")
        if min(features, lookback, hidden, dense) < 1:
            raise ValueError("features, lookback, hidden and dense sizes must be positive")
        self.features = features
        self.lookback = lookback
        self.hidden = hidden
        self.dense = dense
        self.dropout = dropout
        self.seed = seed
        self.params: dict[str, Tensor] = {}

    # -- parameter plumbing -------------------------------------------------

    def _add(self, prefix: str, arrays: dict[str, np.ndarray]) -> None:
        for k, v in arrays.items():
            name = f"{prefix}.{k}"
            self.params[name] = Tensor(v, requires_grad=True, name=name)

    def _cell(self, prefix: str) -> LstmCellParams:
        return LstmCellParams({k: self.params[f"{prefix}.{k}"] for k in LstmCellParams.names()})

    def parameters(self) -> list[Tensor]:
        return list(self.params.values())

    def named_parameters(self) -> Iterator[tuple[str, Tensor]]:
        return iter(self.params.items())

    def get_arrays(self) -> list[np.ndarray]:
        return [p.data.copy() for p in self.params.values()]

    def set_arrays(self, arrays) -> None:
        arrays = list(arrays)
        if len(arrays) != len(self.params):
            raise ShapeError("set_arrays", (len(arrays),), (len(self.params),))
        for p, a in zip(self.params.values(), arrays):
            a = np.asarray(a, dtype=np.float64)
            if a.shape != p.shape:
                raise ShapeError(f"set_arrays[{p.name}]", a.shape, p.shape)
            p.data = a.copy()

    @contextlib.contextmanager
    def frozen(self):
        """Temporarily exclude parameters from differentiation."""
        flags = [p.requires_grad for p in self.params.values()]
        for p in self.params.values():
            p.requires_grad = False
        try:
            yield self
        finally:
            for p, f in zip(self.params.values(), flags):
                p.requires_grad = f

    def clone(self) -> "ForecastModel":
        return copy.deepcopy(self)

    def descriptor(self) -> dict:
        return {"kind": self.kind, "features": self.features, "lookback": self.lookback,
                "hidden": self.hidden, "dense": self.dense, "dropout": self.dropout,
                "seed": self.seed}

    def zero_(self) -> "ForecastModel":
        for p in self.params.values():
            p.data = np.zeros_like(p.data)
        return self

    # -- forward ------------------------------------------------------------

    def _check_window(self, X: Tensor) -> Tensor:
        if X.data.ndim != 3:
            raise ShapeError(f"{self.kind}_forward", X.shape, (-1, self.lookback, self.features))
        if X.shape[1] == 0:
            raise ValueError("window length must be at least 1")
        if X.shape[2] != self.features:
            raise ShapeError(f"{self.kind}_forward", X.shape, (-1, self.lookback, self.features))
        return X

    def _head(self, h: Tensor, train_mode: bool, rng) -> Tensor:
        z = ad.relu(h @ self.params["dense.W"] + self.params["dense.b"])
        z = ad.dropout(z, self.dropout, rng, train_mode)
        return z @ self.params["head.W"] + self.params["head.b"]

    def forward(self, X, train_mode: bool = False, rng: np.random.Generator | None = None) -> Tensor:
        raise NotImplementedError

    def __call__(self, X, train_mode: bool = False, rng: np.random.Generator | None = None) -> Tensor:
        X = ad.as_tensor(X)
        if X.data.ndim == 2:
            return ad.reshape(self.forward(ad.reshape(X, (1,) + X.shape), train_mode, rng), (-1,))
        return self.forward(X, train_mode, rng)

    def predict(self, X: np.ndarray, chunk: int = 2048) -> np.ndarray:
        """Evaluation-mode predictions for a stack of windows, no tape."""
        X = np.asarray(X, dtype=np.float64)
        outs = [self.forward(Tensor(X[i:i + chunk])).data for i in range(0, len(X), chunk)]
        return np.concatenate(outs, axis=0)


class VanillaLstmModel(ForecastModel):
    """One LSTM layer, ReLU dense layer, dropout, single linear output."""

    kind = "vanilla"

    def __init__(self, features: int, lookback: int = 1, hidden: int = 100, dense: int = 100,
                 dropout: float = 0.1, seed: int = 0):
        super().__init__(features, lookback, hidden, dense, dropout, seed)
        rng = stream(seed, "init", self.kind)
        cell = LstmCellParams.init(features, hidden, rng)
        self._add("lstm", {k: cell[k].data for k in LstmCellParams.names()})
        self._add("dense", {"W": _uniform(rng, hidden, (hidden, dense)), "b": np.zeros(dense)})
        self._add("head", {"W": _uniform(rng, dense, (dense, 1)), "b": np.zeros(1)})

    @property
    def cell(self) -> LstmCellParams:
        return self._cell("lstm")

    def forward(self, X, train_mode: bool = False, rng: np.random.Generator | None = None) -> Tensor:
        X = self._check_window(ad.as_tensor(X))
        states = unroll(self.cell, X)
        return self._head(states[-1], train_mode, rng)


class EncDecLstmModel(ForecastModel):
    """Encoder LSTM -> repeated context -> decoder LSTM -> per-step dense head."""

    kind = "encdec"

    def __init__(self, features: int, lookback: int, hidden: int = 100, dense: int = 100,
                 dropout: float = 0.1, seed: int = 0):
        super().__init__(features, lookback, hidden, dense, dropout, seed)
        rng = stream(seed, "init", self.kind)
        enc = LstmCellParams.init(features, hidden, rng)
        dec = LstmCellParams.init(hidden, hidden, rng)
        self._add("encoder", {k: enc[k].data for k in LstmCellParams.names()})
        self._add("decoder", {k: dec[k].data for k in LstmCellParams.names()})
        self._add("dense", {"W": _uniform(rng, hidden, (hidden, dense)), "b": np.zeros(dense)})
        self._add("head", {"W": _uniform(rng, dense, (dense, 1)), "b": np.zeros(1)})

    @property
    def encoder(self) -> LstmCellParams:
        return self._cell("encoder")

    @property
    def decoder(self) -> LstmCellParams:
        return self._cell("decoder")

    def forward(self, X, train_mode: bool = False, rng: np.random.Generator | None = None) -> Tensor:
        X = self._check_window(ad.as_tensor(X))
        if X.shape[1] != self.lookback:
            raise ShapeError("encdec_forward", X.shape, (-1, self.lookback, self.features))
        context = unroll(self.encoder, X)[-1]
        states = unroll(self.decoder, None, steps=self.lookback, repeat_input=context)
        seq = ad.stack(states, axis=1)  # N x L x H
        out = self._head(seq, train_mode, rng)  # N x L x 1
        return ad.reshape(out, (X.shape[0], self.lookback))


def vanilla_forward(window, model: VanillaLstmModel, train_mode: bool = False,
                    rng: np.random.Generator | None = None) -> Tensor:
    return model(window, train_mode, rng)


def encdec_forward(window, model: EncDecLstmModel, train_mode: bool = False,
                   rng: np.random.Generator | None = None) -> Tensor:
    return model(window, train_mode, rng)


MODEL_KINDS = {"vanilla": VanillaLstmModel, "encdec": EncDecLstmModel}


def build_model(kind: str, features: int, lookback: int, **kwargs) -> ForecastModel:
    try:
        cls = MODEL_KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown model kind {kind!r}; expected one of {sorted(MODEL_KINDS)}") from None
    return cls(features=features, lookback=lookback, **kwargs)
