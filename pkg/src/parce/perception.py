"""Softmax classifier over raw pixels plus per-channel summary statistics."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .errors import DomainError, TrainingError

CLF_MAGIC = b"PARCECLF"


@dataclass(frozen=True)
class ClassPosterior:
    probs: np.ndarray
    logits: np.ndarray

    @property
    def predicted(self):
        return int(np.argmax(self.logits))

    @property
    def confidence(self):
        return float(self.probs[self.predicted])


@dataclass
class LabeledDataset:
    images: np.ndarray  # (N, H, W, 3)
    labels: np.ndarray  # (N,)
    split: str = "train"
    paths: list = field(default_factory=list)

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=float)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if len(self.images) != len(self.labels):
            raise DomainError("images and labels differ in length")
        if self.split not in ("train", "holdout", "test"):
            raise DomainError(f"unknown split {self.split!r}")

    def __len__(self):
        return len(self.labels)

    def subset(self, idx, split=None):
        idx = np.asarray(idx)
        paths = [self.paths[i] for i in idx] if self.paths else []
        return LabeledDataset(self.images[idx], self.labels[idx], split or self.split, paths)


def softmax(logits):
    """Row-wise softmax with max subtraction."""
    z = np.asarray(logits, dtype=float)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def features(images):
    """Flattened pixels followed by per-channel means and variances."""
    x = np.asarray(images, dtype=float)
    single = x.ndim == 3
    if single:
        x = x[None]
    n = x.shape[0]
    flat = x.reshape(n, -1)
    ch = x.reshape(n, -1, x.shape[-1])
    out = np.concatenate([flat, ch.mean(axis=1), ch.var(axis=1)], axis=1)
    return out[0] if single else out


@dataclass(frozen=True, eq=False)
class Classifier:
    weights: np.ndarray  # (C, D)
    bias: np.ndarray  # (C,)
    class_names: tuple
    input_shape: tuple  # (H, W, channels)

    @property
    def n_classes(self):
        return len(self.bias)

    def _check(self, images):
        x = np.asarray(images, dtype=float)
        shape = x.shape[-3:]
        if x.ndim not in (3, 4) or tuple(shape) != tuple(self.input_shape):
            raise DomainError(f"expected image shape {tuple(self.input_shape)}, got {x.shape}")
        return x

    def logits(self, images):
        return features(self._check(images)) @ self.weights.T + self.bias

    def save(self, path):
        h, w, c = self.input_shape
        names = "\n".join(self.class_names).encode()
        io.write_flat(
            path, CLF_MAGIC, (self.n_classes, h, w, c, self.weights.shape[1]), (self.weights, self.bias), names
        )

    @classmethod
    def load(cls, path):
        def shapes(hdr):
            k, _, _, _, d = hdr
            return [(k, d), (k,)]

        hdr, (w, b), names = io.read_flat(Path(path), CLF_MAGIC, shapes)
        return cls(w, b, tuple(names.decode().split("\n")), tuple(int(v) for v in hdr[1:4]))


def predict(classifier: Classifier, image) -> ClassPosterior:
    z = classifier.logits(image)
    return ClassPosterior(softmax(z), z)


def predict_batch(classifier: Classifier, images):
    z = classifier.logits(images)
    return softmax(z), z


def cross_entropy(W, b, X, y, l2=0.0):
    """Mean cross-entropy (plus L2 on W) and its gradients w.r.t. ``W`` and ``b``."""
    z = X @ W.T + b
    z = z - z.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    n = X.shape[0]
    loss = -logp[np.arange(n), y].mean() + 0.5 * l2 * np.sum(W * W)
    g = np.exp(logp)
    g[np.arange(n), y] -= 1.0
    g /= n
    return loss, g.T @ X + l2 * W, g.sum(axis=0)


def train_classifier(
    train: LabeledDataset,
    epochs=1000,
    learning_rate=4.0,
    seed=0,
    l2=1e-4,
    class_names=None,
    n_classes=None,
    history=None,
):
    """Full-batch gradient descent on standardized features.

    Features are standardized and rescaled so the data matrix has unit
    spectral norm per sample; the affine map is folded back into the returned
    weights, so the classifier consumes raw features. Pass a list as
    ``history`` to collect the training loss after each epoch.
    """
    if len(train) == 0:
        raise TrainingError("empty training set")
    k = int(n_classes or (train.labels.max() + 1))
    counts = np.bincount(train.labels, minlength=k)
    if np.any(counts == 0):
        raise TrainingError(f"classes without examples: {np.flatnonzero(counts == 0).tolist()}")
    X = features(train.images)
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    sd[sd < 1e-12] = 1.0
    Z = (X - mu) / sd
    # the few summary columns would otherwise be drowned out by the pixel block
    n_sum = 2 * train.images.shape[-1]
    boost = np.ones(Z.shape[1])
    boost[-n_sum:] = np.sqrt((Z.shape[1] - n_sum) / n_sum)
    Z *= boost
    sd = sd / boost
    scale = np.linalg.norm(Z, ord=2) / np.sqrt(len(Z))
    scale = scale if scale > 0 else 1.0
    Z /= scale

    rng = np.random.default_rng(seed)
    W = rng.normal(scale=0.01, size=(k, Z.shape[1]))
    b = np.zeros(k)
    for _ in range(int(epochs)):
        loss, gW, gb = cross_entropy(W, b, Z, train.labels, l2)
        W -= learning_rate * gW
        b -= learning_rate * gb
        if history is not None:
            history.append(cross_entropy(W, b, Z, train.labels, l2)[0])

    W_raw = W / (sd * scale)
    b_raw = b - W_raw @ mu
    names = tuple(class_names) if class_names else tuple(str(i) for i in range(k))
    return Classifier(W_raw, b_raw, names, tuple(train.images.shape[1:]))
