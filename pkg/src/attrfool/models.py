"""Native differentiable text classifiers with exact gradients w.r.t. the embedding matrix."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .lexicon import EmbeddingStore, TokenSequence

CHECKPOINT_MAGIC = "attrfool-model/1"

MEANPOOL_LINEAR = "meanpool_linear"
CNN = "cnn"
ATTENTION_POOL = "attention_pool"
ARCHITECTURES = (MEANPOOL_LINEAR, CNN, ATTENTION_POOL)


class ModelError(ValueError):
    pass


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss."""


@dataclass(frozen=True)
class ModelConfig:
    arch: str
    embed_dim: int
    num_labels: int
    hidden: int = 16
    kernel_widths: tuple[int, ...] = (2, 3)
    seed: int = 0

    def __post_init__(self):
        if self.arch not in ARCHITECTURES:
            raise ModelError(f"unknown architecture {self.arch!r}")
        if min(self.embed_dim, self.num_labels, self.hidden) <= 0:
            raise ModelError("all sizes must be positive")
        if self.arch == CNN and (not self.kernel_widths or min(self.kernel_widths) < 1):
            raise ModelError("kernel widths must be positive")

    def to_dict(self) -> dict:
        return {
            "arch": self.arch,
            "embed_dim": self.embed_dim,
            "num_labels": self.num_labels,
            "hidden": self.hidden,
            "kernel_widths": list(self.kernel_widths),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(
            arch=d["arch"],
            embed_dim=int(d["embed_dim"]),
            num_labels=int(d["num_labels"]),
            hidden=int(d["hidden"]),
            kernel_widths=tuple(int(k) for k in d["kernel_widths"]),
            seed=int(d["seed"]),
        )


@dataclass(frozen=True)
class Prediction:
    logits: np.ndarray
    y: int

    @classmethod
    def from_logits(cls, logits: np.ndarray) -> "Prediction":
        # np.argmax resolves ties toward the smallest index
        return cls(logits=logits, y=int(np.argmax(logits)))


def _glorot(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


class NativeClassifier:
    """Base class: embedding lookup plus an architecture-specific head.

    ``_forward`` and ``_backward`` are exact adjoints of each other; everything
    else (prediction, attribution, training) is built on the pair.
    """

    arch = ""

    def __init__(self, config: ModelConfig, store: EmbeddingStore, params=None):
        if config.arch != self.arch:
            raise ModelError(f"config is for {config.arch!r}, not {self.arch!r}")
        if store.dimension != config.embed_dim:
            raise ModelError(
                f"store dimension {store.dimension} != model embed_dim {config.embed_dim}"
            )
        self.config = config
        self.store = store
        self.params = params if params is not None else self._init_params()

    # -- interface used by attacks and explainers ---------------------------------

    @property
    def num_labels(self) -> int:
        return self.config.num_labels

    def embed(self, tokens, mask=()) -> np.ndarray:
        """Embedding matrix, d rows by p columns; masked positions become zero columns."""
        p = len(tokens)
        bad = [i for i in mask if not 0 <= i < p]
        if bad:
            raise ModelError(f"mask indices out of range: {bad}")
        mask = set(mask)
        X = np.zeros((self.config.embed_dim, p))
        for i, tok in enumerate(tokens):
            if i not in mask:
                X[:, i] = self.store.vector(tok)
        return X

    def forward(self, X: np.ndarray):
        """Logits plus the attention weights when the architecture has them (else None)."""
        self._check_input(X)
        logits, aux, _ = self._forward(X)
        return Prediction.from_logits(logits), aux

    def predict(self, tokens, mask=()) -> Prediction:
        pred, _ = self.forward(self.embed(tokens, mask))
        return pred

    def grad_logit(self, X: np.ndarray, label: int) -> np.ndarray:
        """Exact gradient of logit ``label`` with respect to every entry of X."""
        self._check_input(X)
        if not 0 <= label < self.config.num_labels:
            raise ModelError(f"label {label} out of range")
        _, _, cache = self._forward(X)
        upstream = np.zeros(self.config.num_labels)
        upstream[label] = 1.0
        dX, _ = self._backward(X, cache, upstream)
        return dX

    def attention_weights(self, X: np.ndarray) -> np.ndarray:
        raise ModelError(f"{self.arch} exposes no attention weights")

    def attribute(self, tokens, label, request, mask=()) -> np.ndarray:
        from .attribution import native_attribution

        return native_attribution(self, tokens, label, request, mask)

    # -- persistence ---------------------------------------------------------------

    def save(self, path) -> None:
        payload = {
            "format": CHECKPOINT_MAGIC,
            "config": self.config.to_dict(),
            "params": {k: v.tolist() for k, v in sorted(self.params.items())},
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, sort_keys=True)
            fh.write("\n")

    # -- architecture hooks ----------------------------------------------------------

    def _init_params(self) -> dict:
        raise NotImplementedError

    def _forward(self, X):
        raise NotImplementedError

    def _backward(self, X, cache, dlogits):
        raise NotImplementedError

    def _check_input(self, X: np.ndarray) -> None:
        if X.ndim != 2 or X.shape[0] != self.config.embed_dim:
            raise ModelError(
                f"expected input with {self.config.embed_dim} rows, got shape {X.shape}"
            )


class MeanPoolLinear(NativeClassifier):
    """Mean over token vectors followed by a linear head; the analytic baseline."""

    arch = MEANPOOL_LINEAR

    def _init_params(self):
        rng = np.random.default_rng(self.config.seed)
        d, L = self.config.embed_dim, self.config.num_labels
        return {"W": _glorot(rng, (L, d), d, L), "b": np.zeros(L)}

    def _forward(self, X):
        h = X.mean(axis=1)
        logits = self.params["W"] @ h + self.params["b"]
        return logits, None, {"h": h}

    def _backward(self, X, cache, dlogits):
        W = self.params["W"]
        p = X.shape[1]
        dX = np.repeat(((W.T @ dlogits) / p)[:, None], p, axis=1)
        grads = {"W": np.outer(dlogits, cache["h"]), "b": dlogits.copy()}
        return dX, grads


class ConvMaxPool(NativeClassifier):
    """1-D convolutions over positions, ReLU, max-over-time, linear head."""

    arch = CNN

    def _init_params(self):
        rng = np.random.default_rng(self.config.seed)
        d, L, C = self.config.embed_dim, self.config.num_labels, self.config.hidden
        params = {}
        for k in self.config.kernel_widths:
            params[f"K{k}"] = _glorot(rng, (C, d, k), d * k, C)
            params[f"bk{k}"] = np.zeros(C)
        feat = C * len(self.config.kernel_widths)
        params["W"] = _glorot(rng, (L, feat), feat, L)
        params["b"] = np.zeros(L)
        return params

    def _pad(self, X):
        # sequences shorter than the widest kernel get zero columns on the right
        need = max(self.config.kernel_widths)
        if X.shape[1] >= need:
            return X
        return np.concatenate([X, np.zeros((X.shape[0], need - X.shape[1]))], axis=1)

    def _forward(self, X):
        Xp = self._pad(X)
        P = Xp.shape[1]
        feats, cache = [], {"P": P}
        for k in self.config.kernel_widths:
            K, bk = self.params[f"K{k}"], self.params[f"bk{k}"]
            T = P - k + 1
            windows = np.stack([Xp[:, t : t + k] for t in range(T)])  # (T, d, k)
            pre = np.einsum("cdk,tdk->ct", K, windows) + bk[:, None]
            act = np.maximum(pre, 0.0)
            arg = np.argmax(act, axis=1)
            feats.append(act[np.arange(act.shape[0]), arg])
            cache[k] = (windows, pre, arg)
        features = np.concatenate(feats)
        logits = self.params["W"] @ features + self.params["b"]
        cache["features"] = features
        return logits, None, cache

    def _backward(self, X, cache, dlogits):
        C = self.config.hidden
        W = self.params["W"]
        dfeat = W.T @ dlogits
        grads = {"W": np.outer(dlogits, cache["features"]), "b": dlogits.copy()}
        dXp = np.zeros((X.shape[0], cache["P"]))
        for wi, k in enumerate(self.config.kernel_widths):
            windows, pre, arg = cache[k]
            dpool = dfeat[wi * C : (wi + 1) * C]
            dact = np.zeros_like(pre)
            dact[np.arange(C), arg] = dpool
            dpre = dact * (pre > 0.0)
            K = self.params[f"K{k}"]
            grads[f"K{k}"] = np.einsum("ct,tdk->cdk", dpre, windows)
            grads[f"bk{k}"] = dpre.sum(axis=1)
            dwin = np.einsum("ct,cdk->tdk", dpre, K)
            for t in range(windows.shape[0]):
                dXp[:, t : t + k] += dwin[t]
        return dXp[:, : X.shape[1]], grads


class AttentionPool(NativeClassifier):
    """Per-token scores v . tanh(Wa x_i), softmax weights, weighted-sum pooling, linear head."""

    arch = ATTENTION_POOL

    def _init_params(self):
        rng = np.random.default_rng(self.config.seed)
        d, L, k = self.config.embed_dim, self.config.num_labels, self.config.hidden
        return {
            "Wa": _glorot(rng, (k, d), d, k),
            "va": _glorot(rng, (k,), k, 1),
            "W": _glorot(rng, (L, d), d, L),
            "b": np.zeros(L),
        }

    def _scores(self, X):
        U = np.tanh(self.params["Wa"] @ X)  # (k, p)
        e = self.params["va"] @ U  # (p,)
        return U, e

    @staticmethod
    def _softmax(e):
        z = np.exp(e - e.max())
        return z / z.sum()

    def _forward(self, X):
        U, e = self._scores(X)
        alpha = self._softmax(e)
        z = X @ alpha
        logits = self.params["W"] @ z + self.params["b"]
        return logits, alpha, {"U": U, "alpha": alpha, "z": z}

    def _backward(self, X, cache, dlogits):
        W, Wa, va = self.params["W"], self.params["Wa"], self.params["va"]
        U, alpha, z = cache["U"], cache["alpha"], cache["z"]
        dz = W.T @ dlogits
        dalpha = X.T @ dz
        de = alpha * (dalpha - float(alpha @ dalpha))
        dU = va[:, None] * de[None, :]
        dpre = dU * (1.0 - U**2)
        dX = dz[:, None] * alpha[None, :] + Wa.T @ dpre
        grads = {
            "W": np.outer(dlogits, z),
            "b": dlogits.copy(),
            "Wa": dpre @ X.T,
            "va": U @ de,
        }
        return dX, grads

    def attention_weights(self, X: np.ndarray) -> np.ndarray:
        self._check_input(X)
        _, e = self._scores(X)
        return self._softmax(e)


_ARCH_CLASSES = {
    MEANPOOL_LINEAR: MeanPoolLinear,
    CNN: ConvMaxPool,
    ATTENTION_POOL: AttentionPool,
}


def build_model(config: ModelConfig, store: EmbeddingStore, params=None) -> NativeClassifier:
    return _ARCH_CLASSES[config.arch](config, store, params)


def load_model(path, store: EmbeddingStore) -> NativeClassifier:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != CHECKPOINT_MAGIC:
        raise ModelError(f"{path}: not a {CHECKPOINT_MAGIC} checkpoint")
    config = ModelConfig.from_dict(payload["config"])
    params = {k: np.array(v, dtype=np.float64) for k, v in payload["params"].items()}
    return build_model(config, store, params)


@dataclass
class TrainConfig:
    epochs: int = 30
    learning_rate: float = 0.5
    batch_size: int = 32
    seed: int = 0


@dataclass
class TrainStats:
    final_loss: float
    train_accuracy: float
    eval_accuracy: float | None = None


def _cross_entropy(logits: np.ndarray, label: int) -> tuple[float, np.ndarray]:
    shifted = logits - logits.max()
    logsumexp = np.log(np.exp(shifted).sum())
    loss = float(logsumexp - shifted[label])
    dlogits = np.exp(shifted - logsumexp)
    dlogits[label] -= 1.0
    return loss, dlogits


def accuracy(model: NativeClassifier, samples) -> float:
    if not samples:
        raise ModelError("accuracy over an empty sample list")
    hits = sum(1 for s in samples if model.predict(s.tokens).y == s.label)
    return hits / len(samples)


def train(
    model: NativeClassifier,
    samples: list[TokenSequence],
    cfg: TrainConfig | None = None,
    eval_samples: list[TokenSequence] | None = None,
) -> TrainStats:
    """Minibatch SGD on cross-entropy; deterministic under a fixed seed."""
    cfg = cfg or TrainConfig()
    if not samples:
        raise ModelError("training set is empty")
    for s in samples:
        if s.label is None or not 0 <= s.label < model.config.num_labels:
            raise ModelError(f"sample label {s.label!r} outside 0..{model.config.num_labels - 1}")
    rng = np.random.default_rng(cfg.seed)
    embedded = [(model.embed(s.tokens), s.label) for s in samples]
    last_loss = float("nan")
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(embedded))
        epoch_loss = 0.0
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            grads = {k: np.zeros_like(v) for k, v in model.params.items()}
            batch_loss = 0.0
            for idx in batch:
                X, label = embedded[idx]
                logits, _, cache = model._forward(X)
                loss, dlogits = _cross_entropy(logits, label)
                batch_loss += loss
                _, g = model._backward(X, cache, dlogits)
                for k in grads:
                    grads[k] += g[k]
            if not np.isfinite(batch_loss):
                raise DivergenceError(
                    f"non-finite loss at epoch {epoch}; lower the learning rate"
                )
            scale = cfg.learning_rate / len(batch)
            for k in model.params:
                model.params[k] -= scale * grads[k]
            epoch_loss += batch_loss
        last_loss = epoch_loss / len(embedded)
    stats = TrainStats(final_loss=last_loss, train_accuracy=accuracy(model, samples))
    if eval_samples:
        stats.eval_accuracy = accuracy(model, eval_samples)
    return stats
