"""A small numpy neural network: 1-D convolutions or an MLP, trained with Adam."""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field

import numpy as np

from ..errors import DimensionError, TrainingError
from ..stability import KINDS, IndexKind
from .encoding import N_FEATURES, closed_rows

FORMAT = "sdnrvs-model/1"


# --- layers ---------------------------------------------------------------
# Each layer maps (batch, ...) arrays; parameters live in the model's flat
# weight list and are addressed by index so the model stays serializable.

class Conv1d:
    def __init__(self, c_in, c_out, k):
        self.c_in, self.c_out, self.k = c_in, c_out, k
        self.pad = k // 2

    def shapes(self):
        return [(self.k * self.c_in, self.c_out), (self.c_out,)]

    def _cols(self, x):
        B, E, C = x.shape
        xp = np.zeros((B, E + 2 * self.pad, C))
        xp[:, self.pad:self.pad + E] = x
        return np.concatenate([xp[:, s:s + E] for s in range(self.k)], axis=2)

    def forward(self, x, params, cache):
        W, b = params
        cols = self._cols(x)
        cache.append(cols)
        return cols @ W + b

    def backward(self, dy, params, cache, grads):
        W, _ = params
        cols = cache.pop()
        B, E, _ = dy.shape
        grads.append((cols.reshape(-1, cols.shape[2]).T @ dy.reshape(-1, self.c_out), dy.sum(axis=(0, 1))))
        dcols = dy @ W.T
        dxp = np.zeros((B, E + 2 * self.pad, self.c_in))
        for s in range(self.k):
            dxp[:, s:s + E] += dcols[:, :, s * self.c_in:(s + 1) * self.c_in]
        return dxp[:, self.pad:self.pad + E]


class Dense:
    def __init__(self, n_in, n_out):
        self.n_in, self.n_out = n_in, n_out

    def shapes(self):
        return [(self.n_in, self.n_out), (self.n_out,)]

    def forward(self, x, params, cache):
        W, b = params
        cache.append(x)
        return x @ W + b

    def backward(self, dy, params, cache, grads):
        W, _ = params
        x = cache.pop()
        grads.append((x.T @ dy, dy.sum(axis=0)))
        return dy @ W.T


class ReLU:
    def shapes(self):
        return []

    def forward(self, x, params, cache):
        mask = x > 0
        cache.append(mask)
        return x * mask

    def backward(self, dy, params, cache, grads):
        return dy * cache.pop()


class GlobalAvgPool:
    def shapes(self):
        return []

    def forward(self, x, params, cache):
        cache.append(x.shape[1])
        return x.mean(axis=1)

    def backward(self, dy, params, cache, grads):
        n = cache.pop()
        return np.repeat(dy[:, None, :] / n, n, axis=1)


class Flatten:
    def shapes(self):
        return []

    def forward(self, x, params, cache):
        cache.append(x.shape)
        return x.reshape(x.shape[0], -1)

    def backward(self, dy, params, cache, grads):
        return dy.reshape(cache.pop())


class Dropout:
    def __init__(self, p):
        self.p = p

    def shapes(self):
        return []

    def forward(self, x, params, cache, rng=None):
        if rng is None or self.p == 0:
            cache.append(None)
            return x
        mask = (rng.random(x.shape) >= self.p) / (1.0 - self.p)
        cache.append(mask)
        return x * mask

    def backward(self, dy, params, cache, grads):
        mask = cache.pop()
        return dy if mask is None else dy * mask


def build_layers(arch):
    layers = []
    for layer_def in arch:
        kind = layer_def["kind"]
        if kind == "conv1d":
            layers.append(Conv1d(layer_def["in"], layer_def["out"], layer_def["k"]))
        elif kind == "dense":
            layers.append(Dense(layer_def["in"], layer_def["out"]))
        elif kind == "relu":
            layers.append(ReLU())
        elif kind == "gap":
            layers.append(GlobalAvgPool())
        elif kind == "flatten":
            layers.append(Flatten())
        elif kind == "dropout":
            layers.append(Dropout(layer_def["p"]))
        else:
            raise ValueError(f"unknown layer kind {kind!r}")
    return layers


def cnn_arch(filters=(8, 16, 32, 64), kernel=3, dropout=0.2):
    arch, c = [], N_FEATURES
    for f in filters:
        arch += [{"kind": "conv1d", "in": c, "out": f, "k": kernel}, {"kind": "relu"}]
        c = f
    arch += [{"kind": "gap"}, {"kind": "dropout", "p": dropout}, {"kind": "dense", "in": c, "out": 1}]
    return arch


def mlp_arch(n_branch, hidden=(128, 64), dropout=0.2):
    arch, n = [{"kind": "flatten"}], n_branch * N_FEATURES
    for h in hidden:
        arch += [{"kind": "dense", "in": n, "out": h}, {"kind": "relu"}, {"kind": "dropout", "p": dropout}]
        n = h
    arch.append({"kind": "dense", "in": n, "out": 1})
    return arch


# --- model ----------------------------------------------------------------

@dataclass
class PredictorModel:
    arch: list
    weights: list
    n_branch: int
    x_mean: np.ndarray
    x_std: np.ndarray
    y_mean: float
    y_std: float
    target_kind: IndexKind
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self._layers = build_layers(self.arch)

    @property
    def input_shape(self):
        return (self.n_branch, N_FEATURES)

    def _params(self):
        out, pos = [], 0
        for layer in self._layers:
            n = len(layer.shapes())
            out.append(self.weights[pos:pos + n])
            pos += n
        return out

    def normalize(self, X):
        mask = closed_rows(X)
        Xn = (X - self.x_mean) / self.x_std
        return Xn * mask[..., None]

    def forward(self, Xn, rng=None, cache=None):
        cache = [] if cache is None else cache
        h = Xn
        for layer, params in zip(self._layers, self._params()):
            if isinstance(layer, Dropout):
                h = layer.forward(h, params, cache, rng)
            else:
                h = layer.forward(h, params, cache)
        return h[:, 0]

    def backward(self, dout, cache):
        grads = []
        d = dout[:, None]
        for layer, params in zip(reversed(self._layers), reversed(self._params())):
            d = layer.backward(d, params, cache, grads)
        flat = []
        for g in reversed(grads):
            flat.extend(g)
        return flat


def predict(model: PredictorModel, enc) -> float:
    """Predicted index of one encoding (dropout disabled)."""
    enc = np.asarray(enc, dtype=float)
    if enc.shape != model.input_shape:
        raise DimensionError(f"encoding shape {enc.shape} does not match model input {model.input_shape}")
    return float(predict_batch(model, enc[None])[0])


def predict_batch(model: PredictorModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.shape[1:] != model.input_shape:
        raise DimensionError(f"batch shape {X.shape} does not match model input {model.input_shape}")
    return model.forward(model.normalize(X)) * model.y_std + model.y_mean


# --- training -------------------------------------------------------------

@dataclass(frozen=True)
class Hyperparams:
    learning_rate: float = 1e-3
    epochs: int = 30
    batch_size: int = 20
    dropout: float = 0.2
    arch: str = "cnn"
    filters: tuple = (8, 16, 32, 64)
    kernel: int = 3
    hidden: tuple = (128, 64)


def _init_weights(arch, layers, rng):
    weights = []
    for layer in layers:
        shapes = layer.shapes()
        if not shapes:
            continue
        w_shape, b_shape = shapes
        fan_in = w_shape[0]
        weights.append(rng.standard_normal(w_shape) * np.sqrt(2.0 / fan_in))
        weights.append(np.zeros(b_shape))
    return weights


def train(data, hp: Hyperparams | None = None, seed: int = 0) -> PredictorModel:
    """Fit a predictor on the train split of ``data`` by mini-batch Adam.

    Inputs are standardized per feature column over closed-branch rows and
    targets to zero mean and unit variance, both on the train split.

    Raises
    ------
    TrainingError
        If either split is empty or the loss becomes non-finite.
    """
    hp = hp or Hyperparams()
    X_tr, y_tr = data.X[data.train], data.y[data.train]
    X_te, y_te = data.X[~data.train], data.y[~data.train]
    if len(y_tr) < 1 or len(y_te) < 1:
        raise TrainingError(f"degenerate split: {len(y_tr)} train / {len(y_te)} test rows")
    n_branch = data.X.shape[1]
    arch_name = hp.arch
    if arch_name == "cnn":
        arch = cnn_arch(hp.filters, hp.kernel, hp.dropout)
    elif arch_name == "mlp":
        arch = mlp_arch(n_branch, hp.hidden, hp.dropout)
    else:
        raise ValueError(f"unknown architecture {hp.arch!r}")

    rows = X_tr[closed_rows(X_tr)]
    x_mean = rows.mean(axis=0)
    x_std = rows.std(axis=0)
    x_std[x_std < 1e-12] = 1.0
    y_mean = float(y_tr.mean())
    y_std = float(y_tr.std())
    if y_std < 1e-12:
        y_std = 1.0

    rng = np.random.default_rng(seed)
    layers = build_layers(arch)
    weights = _init_weights(arch, layers, rng)
    model = PredictorModel(arch, weights, n_branch, x_mean, x_std, y_mean, y_std,
                           data.kind, {})
    Xn_tr = model.normalize(X_tr)
    Xn_te = model.normalize(X_te)
    t_tr = (y_tr - y_mean) / y_std
    t_te = (y_te - y_mean) / y_std

    b1, b2, eps = 0.9, 0.999, 1e-8
    m = [np.zeros_like(w) for w in weights]
    v = [np.zeros_like(w) for w in weights]
    step = 0
    history = []
    n = len(t_tr)
    for epoch in range(hp.epochs):
        order = rng.permutation(n)
        for start in range(0, n, hp.batch_size):
            idx = order[start:start + hp.batch_size]
            cache = []
            out = model.forward(Xn_tr[idx], rng, cache)
            err = out - t_tr[idx]
            grads = model.backward(2.0 * err / len(idx), cache)
            step += 1
            for k, g in enumerate(grads):
                m[k] = b1 * m[k] + (1 - b1) * g
                v[k] = b2 * v[k] + (1 - b2) * g * g
                mh = m[k] / (1 - b1 ** step)
                vh = v[k] / (1 - b2 ** step)
                weights[k] -= hp.learning_rate * mh / (np.sqrt(vh) + eps)
        tr = float(np.mean((model.forward(Xn_tr) - t_tr) ** 2))
        te = float(np.mean((model.forward(Xn_te) - t_te) ** 2))
        if not (np.isfinite(tr) and np.isfinite(te)):
            raise TrainingError(f"loss became non-finite in epoch {epoch}")
        history.append((tr, te))

    model.metadata = {
        "seed": int(seed),
        "epochs": hp.epochs,
        "arch_name": arch_name,
        "learning_rate": hp.learning_rate,
        "batch_size": hp.batch_size,
        "dropout": hp.dropout,
        "n_train": int(len(t_tr)),
        "n_test": int(len(t_te)),
        "train_mse": history[-1][0],
        "test_mse": history[-1][1],
        "train_rmse": float(np.sqrt(history[-1][0]) * y_std),
        "test_rmse": float(np.sqrt(history[-1][1]) * y_std),
        "history": [list(h) for h in history],
    }
    return model


# --- persistence ----------------------------------------------------------

def _b64(a):
    a = np.ascontiguousarray(a, dtype="<f8")
    return {"shape": list(a.shape), "dtype": "<f8", "data": base64.b64encode(a.tobytes()).decode("ascii")}


def _unb64(d):
    return np.frombuffer(base64.b64decode(d["data"]), dtype=d["dtype"]).reshape(d["shape"]).copy()


def model_to_dict(model: PredictorModel) -> dict:
    return {
        "format": FORMAT,
        "architecture": model.arch,
        "n_branch": model.n_branch,
        "target_kind": model.target_kind.name,
        "normalization": {
            "x_mean": _b64(model.x_mean),
            "x_std": _b64(model.x_std),
            "y_mean": model.y_mean,
            "y_std": model.y_std,
        },
        "metadata": model.metadata,
        "weights": [_b64(w) for w in model.weights],
    }


def model_from_dict(doc: dict) -> PredictorModel:
    if doc.get("format") != FORMAT:
        raise ValueError(f"unsupported model format {doc.get('format')!r}")
    norm = doc["normalization"]
    return PredictorModel(
        doc["architecture"],
        [_unb64(w) for w in doc["weights"]],
        int(doc["n_branch"]),
        _unb64(norm["x_mean"]),
        _unb64(norm["x_std"]),
        float(norm["y_mean"]),
        float(norm["y_std"]),
        KINDS[doc["target_kind"]],
        doc.get("metadata", {}),
    )


def save_model(model: PredictorModel, path, extra=None) -> None:
    doc = model_to_dict(model)
    if extra:
        doc["provenance"] = extra
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_model(path) -> PredictorModel:
    with open(path) as fh:
        return model_from_dict(json.load(fh))
