"""Small numpy text classifiers with analytic gradients and forward-pass metering.

Two architectures are provided:

* ``linear`` -- sum of token embeddings followed by an affine softmax layer.
* ``cnn`` -- one convolution (kernel 3, zero "same" padding, tanh) with global
  max pooling over positions, then an affine softmax layer.

Both map the empty sequence to the zero feature vector. Every evaluation of a
sequence through :meth:`MeteredModel.predict`, :meth:`MeteredModel.predict_many`
or a gradient call advances the model's pass counter by one per sequence.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

ARCHITECTURES = ("linear", "cnn")
KERNEL_SIZE = 3
CHECKPOINT_VERSION = 1
OOV_TOKEN = "<unk>"


class TrainingError(RuntimeError):
    pass


class Vocabulary:
    """Dense token-to-index map. Index 0 is reserved for out-of-vocabulary tokens."""

    def __init__(self, tokens: Sequence[str]):
        tokens = list(tokens)
        if not tokens or tokens[0] != OOV_TOKEN:
            tokens = [OOV_TOKEN] + [t for t in tokens if t != OOV_TOKEN]
        if len(set(tokens)) != len(tokens):
            raise ValueError("vocabulary tokens must be unique")
        self.tokens = tokens
        self.index = {t: i for i, t in enumerate(tokens)}

    @classmethod
    def build(cls, texts: Iterable[Sequence[str]]) -> "Vocabulary":
        seen = set()
        for toks in texts:
            seen.update(toks)
        seen.discard(OOV_TOKEN)
        return cls([OOV_TOKEN] + sorted(seen))

    @property
    def oov_index(self) -> int:
        return 0

    def __len__(self) -> int:
        return len(self.tokens)

    def encode(self, tokens: Sequence[str]) -> tuple[int, ...]:
        return tuple(self.index.get(t, 0) for t in tokens)

    def decode(self, ids: Sequence[int]) -> list[str]:
        return [self.tokens[i] for i in ids]


@dataclass(frozen=True)
class Prediction:
    probs: np.ndarray
    predicted_class: int


@dataclass
class TrainConfig:
    arch: str = "linear"
    dim: int = 32
    filters: int = 32
    epochs: int = 10
    batch_size: int = 32
    learning_rate: float = 0.01
    init_scale: float = 0.1
    seed: int = 0


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _pad_batch(seqs: Sequence[Sequence[int]]) -> tuple[np.ndarray, np.ndarray]:
    width = max((len(s) for s in seqs), default=0)
    ids = np.zeros((len(seqs), width), dtype=np.int64)
    mask = np.zeros((len(seqs), width), dtype=bool)
    for b, s in enumerate(seqs):
        ids[b, : len(s)] = s
        mask[b, : len(s)] = True
    return ids, mask


class MeteredModel:
    """Classifier over token ids with an exact forward-pass counter."""

    def __init__(self, arch: str, params: dict[str, np.ndarray], num_classes: int,
                 vocab: Vocabulary | None = None):
        if arch not in ARCHITECTURES:
            raise ValueError(f"unknown architecture {arch!r}")
        self.arch = arch
        self.params = {k: np.asarray(v, dtype=np.float64) for k, v in params.items()}
        for name, value in self.params.items():
            if not np.all(np.isfinite(value)):
                raise ValueError(f"parameter {name} has non-finite entries")
        self.num_classes = int(num_classes)
        self.vocab = vocab
        self.train_history: list[float] = []
        self._passes = 0
        self._lock = threading.Lock()

    # -- construction -----------------------------------------------------

    @classmethod
    def initialize(cls, arch: str, vocab_size: int, num_classes: int, dim: int = 32,
                   filters: int = 32, scale: float = 0.1, seed: int = 0,
                   vocab: Vocabulary | None = None) -> "MeteredModel":
        rng = np.random.default_rng(seed)
        params = {"embeddings": rng.normal(0.0, scale, size=(vocab_size, dim))}
        if arch == "cnn":
            params["kernel"] = rng.normal(0.0, scale, size=(KERNEL_SIZE, dim, filters))
            params["conv_bias"] = np.zeros(filters)
            feat = filters
        else:
            feat = dim
        params["weights"] = rng.normal(0.0, scale, size=(num_classes, feat))
        params["bias"] = np.zeros(num_classes)
        return cls(arch, params, num_classes, vocab)

    @property
    def embeddings(self) -> np.ndarray:
        return self.params["embeddings"]

    @property
    def dim(self) -> int:
        return self.embeddings.shape[1]

    @property
    def vocab_size(self) -> int:
        return self.embeddings.shape[0]

    # -- metering ---------------------------------------------------------

    def _charge(self, n: int) -> None:
        with self._lock:
            self._passes += n

    @property
    def passes(self) -> int:
        return self._passes

    def reset_passes(self) -> None:
        with self._lock:
            self._passes = 0

    # -- forward / backward -------------------------------------------------

    def embed(self, seq: Sequence[int]) -> np.ndarray:
        """Embedding rows for ``seq`` (l x d); not metered."""
        ids = np.asarray(seq, dtype=np.int64).reshape(-1)
        if ids.size and (ids.min() < 0 or ids.max() >= self.vocab_size):
            raise IndexError("token id outside the vocabulary")
        return self.embeddings[ids]

    def _forward(self, emb: np.ndarray, mask: np.ndarray):
        """Logits for a padded batch of embedded sequences (B x L x d)."""
        p = self.params
        nonempty = mask.any(axis=1)
        if self.arch == "linear":
            feats = (emb * mask[..., None]).sum(axis=1)
            cache = {"emb": emb, "mask": mask}
        else:
            B, L, d = emb.shape
            padded = np.zeros((B, L + 2, d))
            padded[:, 1 : L + 1] = emb * mask[..., None]
            z = np.broadcast_to(p["conv_bias"], (B, L, p["conv_bias"].size)).copy()
            for j in range(KERNEL_SIZE):
                z += padded[:, j : j + L] @ p["kernel"][j]
            act = np.tanh(z)
            masked = np.where(mask[..., None], act, -np.inf)
            if L:
                arg = masked.argmax(axis=1)  # B x F, first index on ties
                feats = np.take_along_axis(act, arg[:, None, :], axis=1)[:, 0, :]
            else:
                arg = np.zeros((B, z.shape[2]), dtype=np.int64)
                feats = np.zeros((B, z.shape[2]))
            feats = np.where(nonempty[:, None], feats, 0.0)
            cache = {"padded": padded, "act": act, "arg": arg, "mask": mask,
                     "nonempty": nonempty, "L": L, "masked": masked}
        cache["feats"] = feats
        logits = feats @ p["weights"].T + p["bias"]
        return logits, cache

    def _backward(self, cache, dlogits: np.ndarray, param_grads: bool = True):
        """Gradients of sum(dlogits * logits) w.r.t. parameters and embeddings."""
        p = self.params
        feats = cache["feats"]
        grads = {}
        if param_grads:
            grads["weights"] = dlogits.T @ feats
            grads["bias"] = dlogits.sum(axis=0)
        dfeats = dlogits @ p["weights"]
        mask = cache["mask"]
        if self.arch == "linear":
            demb = np.broadcast_to(dfeats[:, None, :], mask.shape + (dfeats.shape[1],))
            demb = demb * mask[..., None]
            return grads, demb
        L = cache["L"]
        B, F = dfeats.shape
        arg = cache["arg"]
        act = cache["act"]
        chosen = np.take_along_axis(act, arg[:, None, :], axis=1)[:, 0, :] if L else np.zeros((B, F))
        dchosen = dfeats * (1.0 - chosen**2) * cache["nonempty"][:, None]
        dz = np.zeros((B, L, F))
        if L:
            np.put_along_axis(dz, arg[:, None, :], dchosen[:, None, :], axis=1)
        padded = cache["padded"]
        dpadded = np.zeros_like(padded)
        if param_grads:
            grads["kernel"] = np.zeros_like(p["kernel"])
            grads["conv_bias"] = dz.sum(axis=(0, 1))
        for j in range(KERNEL_SIZE):
            if param_grads:
                grads["kernel"][j] = np.einsum("btd,btf->df", padded[:, j : j + L], dz)
            dpadded[:, j : j + L] += dz @ p["kernel"][j].T
        demb = dpadded[:, 1 : L + 1] * mask[..., None]
        return grads, demb

    def _probs_for(self, seqs: Sequence[Sequence[int]]) -> np.ndarray:
        ids, mask = _pad_batch(seqs)
        if ids.size and ids.max() >= self.vocab_size:
            raise IndexError("token id outside the vocabulary")
        logits, _ = self._forward(self.embeddings[ids], mask)
        return _softmax(logits)

    def predict(self, seq: Sequence[int]) -> Prediction:
        probs = self._probs_for([seq])[0]
        self._charge(1)
        return Prediction(probs, int(np.argmax(probs)))

    def predict_many(self, seqs: Sequence[Sequence[int]]) -> np.ndarray:
        """Probability rows for several sequences; one pass per sequence."""
        if not len(seqs):
            return np.zeros((0, self.num_classes))
        probs = self._probs_for(seqs)
        self._charge(len(seqs))
        return probs

    def prob_and_grad_at(self, emb: np.ndarray, target: int,
                         output: str = "prob") -> tuple[float, np.ndarray]:
        """p_target and its gradient w.r.t. an arbitrary l x d embedding matrix.

        With ``output="logit"`` the target logit is differentiated instead.
        Used directly by path-integral attribution; one metered pass.
        """
        emb = np.asarray(emb, dtype=np.float64)
        if emb.ndim != 2 or emb.shape[0] == 0:
            raise ValueError("gradient undefined on empty input")
        if not 0 <= target < self.num_classes:
            raise ValueError(f"class {target} out of range")
        mask = np.ones((1, emb.shape[0]), dtype=bool)
        logits, cache = self._forward(emb[None], mask)
        self._charge(1)
        if output == "logit":
            dlogits = np.zeros(self.num_classes)
            dlogits[target] = 1.0
            value = float(logits[0, target])
        elif output == "prob":
            probs = _softmax(logits)[0]
            # d p_t / d logits = p_t (onehot_t - p)
            dlogits = -probs[target] * probs
            dlogits[target] += probs[target]
            value = float(probs[target])
        else:
            raise ValueError(f"unknown output {output!r}")
        _, demb = self._backward(cache, dlogits[None], param_grads=False)
        return value, demb[0]

    def grad_wrt_embeddings(self, seq: Sequence[int], target: int) -> np.ndarray:
        """Analytic d p_target / d e(x)_i, one row per token."""
        if len(seq) == 0:
            raise ValueError("gradient undefined on empty input")
        return self.prob_and_grad_at(self.embed(seq), target)[1]

    def conv_margin(self, seq: Sequence[int]) -> float:
        """Smallest gap between the winning and runner-up positions over all filters.

        Infinite for ``linear`` models and inputs of a single token. A small margin
        signals a max-pool tie where the gradient is not defined.
        """
        if self.arch != "cnn" or len(seq) < 2:
            return np.inf
        _, cache = self._forward(self.embed(seq)[None], np.ones((1, len(seq)), dtype=bool))
        act = np.sort(cache["act"][0], axis=0)
        return float((act[-1] - act[-2]).min())

    # -- persistence --------------------------------------------------------

    def save(self, path: str | Path) -> None:
        header = {"version": CHECKPOINT_VERSION, "arch": self.arch,
                  "num_classes": self.num_classes,
                  "vocab": self.vocab.tokens if self.vocab is not None else None}
        with open(path, "wb") as fh:
            np.savez(fh, header=np.array(json.dumps(header)),
                     **{f"param_{k}": v for k, v in self.params.items()})

    @classmethod
    def load(cls, path: str | Path) -> "MeteredModel":
        with np.load(path, allow_pickle=False) as data:
            header = json.loads(str(data["header"]))
            if header.get("version") != CHECKPOINT_VERSION:
                raise ValueError(f"unsupported checkpoint version {header.get('version')}")
            params = {k[len("param_"):]: data[k] for k in data.files if k.startswith("param_")}
        vocab = Vocabulary(header["vocab"]) if header["vocab"] is not None else None
        return cls(header["arch"], params, header["num_classes"], vocab)


def reset_pass_counter(model: MeteredModel) -> None:
    model.reset_passes()


def read_pass_counter(model: MeteredModel) -> int:
    return model.passes


def _adam_step(params, grads, state, lr, t, beta1=0.9, beta2=0.999, eps=1e-8):
    for k, g in grads.items():
        m, v = state.setdefault(k, (np.zeros_like(g), np.zeros_like(g)))
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        state[k] = (m, v)
        mhat = m / (1 - beta1**t)
        vhat = v / (1 - beta2**t)
        params[k] -= lr * mhat / (np.sqrt(vhat) + eps)


def _loss_and_grads(model: MeteredModel, seqs, labels):
    ids, mask = _pad_batch(seqs)
    logits, cache = model._forward(model.embeddings[ids], mask)
    probs = _softmax(logits)
    n = len(seqs)
    loss = -np.log(np.clip(probs[np.arange(n), labels], 1e-300, None)).mean()
    dlogits = probs.copy()
    dlogits[np.arange(n), labels] -= 1.0
    dlogits /= n
    grads, demb = model._backward(cache, dlogits)
    demb_table = np.zeros_like(model.embeddings)
    np.add.at(demb_table, ids[mask], demb[mask])
    grads["embeddings"] = demb_table
    return float(loss), grads


def corpus_loss(model: MeteredModel, seqs, labels, batch_size: int = 256) -> float:
    total = 0.0
    labels = np.asarray(labels)
    for start in range(0, len(seqs), batch_size):
        chunk = seqs[start : start + batch_size]
        probs = model._probs_for(chunk)
        y = labels[start : start + batch_size]
        total += -np.log(np.clip(probs[np.arange(len(chunk)), y], 1e-300, None)).sum()
    return total / len(seqs)


def train(seqs: Sequence[Sequence[int]], labels: Sequence[int], config: TrainConfig,
          num_classes: int | None = None, vocab: Vocabulary | None = None,
          vocab_size: int | None = None) -> MeteredModel:
    """Fit a classifier with minibatch Adam on softmax cross-entropy.

    Deterministic given ``config.seed``. The pass counter is zero on return.
    ``train_history`` holds the full-corpus loss after each epoch.
    """
    seqs = [tuple(s) for s in seqs]
    labels = np.asarray(labels, dtype=np.int64)
    if not seqs:
        raise ValueError("empty corpus")
    if len(seqs) != len(labels):
        raise ValueError("sequence and label counts differ")
    if len(np.unique(labels)) < 2:
        raise ValueError("training needs at least two classes")
    if any(len(s) == 0 for s in seqs):
        raise ValueError("training sequences must be non-empty")
    if num_classes is None:
        num_classes = int(labels.max()) + 1
    if vocab_size is None:
        vocab_size = len(vocab) if vocab is not None else max(max(s) for s in seqs) + 1

    model = MeteredModel.initialize(config.arch, vocab_size, num_classes, dim=config.dim,
                                    filters=config.filters, scale=config.init_scale,
                                    seed=config.seed, vocab=vocab)
    rng = np.random.default_rng(config.seed + 1)
    state: dict = {}
    step = 0
    for _ in range(config.epochs):
        order = rng.permutation(len(seqs))
        for start in range(0, len(order), config.batch_size):
            idx = order[start : start + config.batch_size]
            loss, grads = _loss_and_grads(model, [seqs[i] for i in idx], labels[idx])
            if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads.values()):
                raise TrainingError("training diverged")
            step += 1
            _adam_step(model.params, grads, state, config.learning_rate, step)
        epoch_loss = corpus_loss(model, seqs, labels)
        if not np.isfinite(epoch_loss):
            raise TrainingError("training diverged")
        model.train_history.append(epoch_loss)
    model.reset_passes()
    return model


def accuracy(model: MeteredModel, seqs, labels) -> float:
    """Unmetered accuracy helper."""
    probs = np.concatenate([model._probs_for(seqs[i : i + 256]) for i in range(0, len(seqs), 256)])
    return float((probs.argmax(axis=1) == np.asarray(labels)).mean())
