"""Built-in acceptability classifier: logistic regression over signed hashed
word- and character-n-gram features.

Exists so the whole pipeline, metrics, and acceptance suite run with zero
model infrastructure; heavyweight fine-tuned scorers plug in out of process
through the external-scorer protocol instead. Training is full-batch gradient
descent with momentum on the cross-entropy, early-stopped on validation loss
with a patience window, and fully deterministic for a given seed.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

FEATURE_VERSION = 1
ARTIFACT_MAGIC = b"XLIN"

log = logging.getLogger(__name__)


class SingleLabelError(ValueError):
    """Training data contains only one class."""


@dataclass(frozen=True)
class TrainerConfig:
    dims: int = 2**18
    word_ngrams: tuple[int, int] = (1, 2)
    char_ngrams: tuple[int, int] = (3, 5)
    learning_rate: float = 2.0
    momentum: float = 0.9
    l2: float = 1e-5
    max_epochs: int = 200
    patience: int = 10  # epochs without validation improvement
    val_fraction: float = 0.1  # used only when no dev split is supplied
    seed: int = 0

    def __post_init__(self):
        if self.dims & (self.dims - 1):
            raise ValueError("dims must be a power of two")


def _hashed(feature: str, dims: int) -> tuple[int, float]:
    digest = hashlib.blake2b(feature.encode("utf-8"), digest_size=8).digest()
    h = int.from_bytes(digest, "big")
    sign = 1.0 if h & (1 << 63) == 0 else -1.0
    return h & (dims - 1), sign


def _ngrams(text: str, word_ngrams: tuple[int, int], char_ngrams: tuple[int, int]):
    text = text.lower()
    words = text.split()
    for n in range(word_ngrams[0], word_ngrams[1] + 1):
        for i in range(len(words) - n + 1):
            yield "w:" + " ".join(words[i : i + n])
    compact = " ".join(words)
    for n in range(char_ngrams[0], char_ngrams[1] + 1):
        for i in range(len(compact) - n + 1):
            yield "c:" + compact[i : i + n]


def featurize(
    texts: Sequence[str], cfg: TrainerConfig
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """CSR-style (indptr, indices, data) with l2-normalized rows."""
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for text in texts:
        row: dict[int, float] = {}
        for gram in _ngrams(text, cfg.word_ngrams, cfg.char_ngrams):
            idx, sign = _hashed(gram, cfg.dims)
            row[idx] = row.get(idx, 0.0) + sign
        norm = math.sqrt(sum(v * v for v in row.values()))
        for idx in sorted(row):
            if row[idx] == 0.0:
                continue
            indices.append(idx)
            data.append(row[idx] / norm if norm else 0.0)
        indptr.append(len(indices))
    return (
        np.asarray(indptr, dtype=np.int64),
        np.asarray(indices, dtype=np.int64),
        np.asarray(data, dtype=np.float64),
    )


def _matvec(indptr, indices, data, w) -> np.ndarray:
    contrib = data * w[indices]
    out = np.zeros(len(indptr) - 1)
    np.add.at(out, np.repeat(np.arange(len(indptr) - 1), np.diff(indptr)), contrib)
    return out


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-z))


def _logit(p: float) -> float:
    p = min(max(p, 1e-6), 1 - 1e-6)
    return math.log(p / (1 - p))


@dataclass
class HashedLinearModel:
    weights: np.ndarray
    bias: float  # fixed at logit(base rate); empty inputs score the base rate
    base_rate: float
    mode: str
    seed: int
    dims: int
    word_ngrams: tuple[int, int]
    char_ngrams: tuple[int, int]
    feature_version: int = FEATURE_VERSION

    def _trainer_cfg(self) -> TrainerConfig:
        return TrainerConfig(
            dims=self.dims, word_ngrams=self.word_ngrams, char_ngrams=self.char_ngrams
        )

    def score_texts(self, texts: Sequence[str]) -> np.ndarray:
        cfg = self._trainer_cfg()
        indptr, indices, data = featurize(texts, cfg)
        z = _matvec(indptr, indices, data, self.weights) + self.bias
        return _sigmoid(z)

    # -- single-file binary artifact: magic, header JSON, raw weights -----

    def artifact_bytes(self) -> bytes:
        header = json.dumps(
            {
                "feature_version": self.feature_version,
                "mode": self.mode,
                "seed": self.seed,
                "dims": self.dims,
                "word_ngrams": list(self.word_ngrams),
                "char_ngrams": list(self.char_ngrams),
                "bias": self.bias,
                "base_rate": self.base_rate,
            },
            sort_keys=True,
        ).encode("utf-8")
        body = self.weights.astype("<f8").tobytes()
        return ARTIFACT_MAGIC + struct.pack("<I", len(header)) + header + body

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(self.artifact_bytes())

    @classmethod
    def load(cls, path: str | Path) -> "HashedLinearModel":
        blob = Path(path).read_bytes()
        if blob[:4] != ARTIFACT_MAGIC:
            raise ValueError(f"{path}: not a filter model artifact")
        (header_len,) = struct.unpack("<I", blob[4:8])
        header = json.loads(blob[8 : 8 + header_len].decode("utf-8"))
        if header["feature_version"] != FEATURE_VERSION:
            raise ValueError(
                f"{path}: feature_version {header['feature_version']}, expected {FEATURE_VERSION}"
            )
        weights = np.frombuffer(blob[8 + header_len :], dtype="<f8").copy()
        return cls(
            weights=weights,
            bias=header["bias"],
            base_rate=header["base_rate"],
            mode=header["mode"],
            seed=header["seed"],
            dims=header["dims"],
            word_ngrams=tuple(header["word_ngrams"]),
            char_ngrams=tuple(header["char_ngrams"]),
        )


@dataclass(frozen=True)
class TrainHistory:
    epochs_run: int
    best_epoch: int
    train_loss: float
    val_loss: float
    val_accuracy: float


def _cross_entropy(p: np.ndarray, y: np.ndarray) -> float:
    eps = 1e-12
    return float(-np.mean(y * np.log(p + eps) + (1 - y) * np.log(1 - p + eps)))


def train_model(
    train_texts: Sequence[str],
    train_labels: Sequence[bool],
    val_texts: Sequence[str],
    val_labels: Sequence[bool],
    cfg: TrainerConfig = TrainerConfig(),
    mode: str = "full",
) -> tuple[HashedLinearModel, TrainHistory]:
    """Gradient descent on the cross-entropy with early stopping.

    The bias is pinned to the training-set base rate (never updated), so an
    input with no features scores exactly that rate.
    """
    y = np.asarray([bool(l) for l in train_labels], dtype=np.float64)
    if y.min() == y.max():
        raise SingleLabelError("training set contains a single class")
    y_val = np.asarray([bool(l) for l in val_labels], dtype=np.float64)

    indptr, indices, data = featurize(train_texts, cfg)
    v_indptr, v_indices, v_data = featurize(val_texts, cfg)
    rows = np.repeat(np.arange(len(train_texts)), np.diff(indptr))

    base_rate = float(y.mean())
    bias = _logit(base_rate)
    w = np.zeros(cfg.dims)
    velocity = np.zeros(cfg.dims)

    best_val = math.inf
    best_w = w.copy()
    best_epoch = 0
    epochs_run = 0
    for epoch in range(1, cfg.max_epochs + 1):
        epochs_run = epoch
        z = _matvec(indptr, indices, data, w) + bias
        p = _sigmoid(z)
        residual = (p - y) / len(y)
        grad = np.zeros(cfg.dims)
        np.add.at(grad, indices, data * residual[rows])
        grad += cfg.l2 * w
        velocity = cfg.momentum * velocity - cfg.learning_rate * grad
        w = w + velocity

        val_p = _sigmoid(_matvec(v_indptr, v_indices, v_data, w) + bias)
        val_loss = _cross_entropy(val_p, y_val)
        if val_loss < best_val - 1e-9:
            best_val = val_loss
            best_w = w.copy()
            best_epoch = epoch
        elif epoch - best_epoch >= cfg.patience:
            break

    model = HashedLinearModel(
        weights=best_w,
        bias=bias,
        base_rate=base_rate,
        mode=mode,
        seed=cfg.seed,
        dims=cfg.dims,
        word_ngrams=cfg.word_ngrams,
        char_ngrams=cfg.char_ngrams,
    )
    train_p = _sigmoid(_matvec(indptr, indices, data, best_w) + bias)
    val_p = _sigmoid(_matvec(v_indptr, v_indices, v_data, best_w) + bias)
    val_acc = float(np.mean((val_p >= 0.5) == y_val.astype(bool))) if len(y_val) else float("nan")
    history = TrainHistory(
        epochs_run=epochs_run,
        best_epoch=best_epoch,
        train_loss=_cross_entropy(train_p, y),
        val_loss=best_val if len(y_val) else float("nan"),
        val_accuracy=val_acc,
    )
    log.info(
        "trained filter: %d epochs (best %d), val loss %.4f, val acc %.3f",
        epochs_run,
        best_epoch,
        history.val_loss,
        history.val_accuracy,
    )
    return model, history


def split_for_validation(
    instance_ids: Sequence[str], val_fraction: float, seed: int
) -> set[str]:
    """Instance-level validation carve-out (keeps all 5 candidates together)."""
    import random as _random

    distinct = sorted(set(instance_ids))
    rng = _random.Random(f"{seed}:val-split")
    rng.shuffle(distinct)
    n_val = max(1, int(len(distinct) * val_fraction))
    return set(distinct[:n_val])
