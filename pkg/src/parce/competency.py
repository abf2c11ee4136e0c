"""Probabilistic reconstruction-based competency scores.

The overall score of an image combines the classifier posterior with a
per-class Gaussian model of reconstruction loss::

    rho = p[c_hat] * sum_c p[c] * (1 - Phi((loss - 2 mu_c) / sigma_c - z))

The regional map applies the same expression to the inpainting loss of each
segment, reusing the whole-image posterior.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfc, logsumexp

from . import io
from .config import CompetencyConfig, FhParams
from .errors import CalibrationError, DomainError
from .perception import ClassPosterior, predict, predict_batch, softmax
from .reconstruction import reconstruct, reconstruction_losses, segment_inpaint_losses
from .segmentation import SegmentMap, segment

_SQRT2 = math.sqrt(2.0)


def gaussian_cdf(x):
    """Standard normal CDF, 0.5 * erfc(-x / sqrt 2)."""
    out = 0.5 * erfc(-np.asarray(x, dtype=float) / _SQRT2)
    return float(out) if np.ndim(out) == 0 else out


def z_from_confidence(confidence):
    """z with Phi(z) = confidence / 100, by bisection."""
    if not 0 < confidence < 100:
        raise DomainError(f"confidence must lie in (0, 100), got {confidence}")
    target = confidence / 100.0
    lo, hi = -40.0, 40.0
    while hi - lo > 1e-12:
        mid = 0.5 * (lo + hi)
        if gaussian_cdf(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True, eq=False)
class ClassLossModel:
    mu: np.ndarray
    sigma: np.ndarray
    n_samples: np.ndarray

    @property
    def n_classes(self):
        return len(self.mu)

    def save_csv(self, path):
        rows = [(c, repr(float(m)), repr(float(s)), int(n)) for c, (m, s, n) in enumerate(zip(self.mu, self.sigma, self.n_samples))]
        io.write_csv(path, ("class_id", "mu", "sigma", "n"), rows)

    @classmethod
    def load_csv(cls, path):
        rows = sorted(io.read_csv(path), key=lambda r: int(r["class_id"]))
        return cls(
            np.array([float(r["mu"]) for r in rows]),
            np.array([float(r["sigma"]) for r in rows]),
            np.array([int(r["n"]) for r in rows]),
        )


def fit_loss_model(losses, labels, n_classes, sigma_min=1e-6):
    """Per-class sample mean and (n-1) standard deviation, grouped by true label."""
    losses = np.asarray(losses, dtype=float)
    labels = np.asarray(labels, dtype=np.int64)
    mu = np.zeros(n_classes)
    sigma = np.zeros(n_classes)
    counts = np.bincount(labels, minlength=n_classes)[:n_classes]
    short = [c for c in range(n_classes) if counts[c] < 2]
    if short:
        raise CalibrationError(f"classes with fewer than 2 calibration samples: {short}", short)
    for c in range(n_classes):
        v = losses[labels == c]
        mu[c] = v.mean()
        sigma[c] = max(v.std(ddof=1), sigma_min)
    return ClassLossModel(mu, sigma, counts)


def p_id_given_class(loss, mu, sigma, z):
    """1 - Phi((loss - 2 mu) / sigma - z), clamped to [0, 1]."""
    # grouped so that loss = 2 mu + z sigma gives exactly zero
    val = 1.0 - gaussian_cdf((np.asarray(loss, dtype=float) - (2.0 * mu + z * sigma)) / sigma)
    out = np.clip(val, 0.0, 1.0)
    return float(out) if np.ndim(out) == 0 else out


def competency_from_probs(probs, loss, model: ClassLossModel, z):
    """Combine posterior(s) with loss(es); broadcasts over leading axes."""
    probs = np.asarray(probs, dtype=float)
    loss = np.asarray(loss, dtype=float)
    pid = p_id_given_class(loss[..., None], model.mu, model.sigma, z)
    return probs.max(axis=-1) * np.sum(probs * pid, axis=-1)


def overall_score(posterior, loss, model: ClassLossModel, z):
    probs = posterior.probs if isinstance(posterior, ClassPosterior) else np.asarray(posterior)
    if len(probs) != model.n_classes:
        raise DomainError("posterior and loss model cover different class sets")
    return float(competency_from_probs(probs, loss, model, z))


@dataclass(frozen=True, eq=False)
class RegionalMap:
    scores: np.ndarray  # (H, W)
    segment_scores: np.ndarray  # (n_segments,)
    segment_losses: np.ndarray  # (n_segments,), NaN for all-sky segments
    segments: SegmentMap


def regional_map(probs, ae, image, segments: SegmentMap, model: ClassLossModel, z, sky=None, trim=None):
    """Per-pixel, segment-constant competency map; sky pixels score 1."""
    img = np.asarray(image, dtype=float)
    if segments.shape != img.shape[:2]:
        raise DomainError(f"segment map {segments.shape} does not match image {img.shape[:2]}")
    probs = probs.probs if isinstance(probs, ClassPosterior) else np.asarray(probs)
    losses = segment_inpaint_losses(ae, img, segments.segment_id, exclude=sky, trim=trim)
    scores = np.ones(segments.n_segments)
    ok = ~np.isnan(losses)
    scores[ok] = competency_from_probs(probs, losses[ok], model, z)
    per_pixel = scores[segments.segment_id]
    if sky is not None:
        per_pixel = np.where(sky, 1.0, per_pixel)
    return RegionalMap(per_pixel, scores, losses, segments)


def calibrate(
    ae, holdout, mode="overall", seg_params: FhParams | None = None, sky=None, n_classes=None, sigma_min=1e-6, trim=None
):
    """Fit the per-class Gaussian loss model on holdout data.

    ``overall`` groups full-image reconstruction losses by true label.
    ``regional`` inpaints every segment of every holdout image and pools the
    segment losses under the source image's label.
    """
    k = int(n_classes or (holdout.labels.max() + 1))
    if mode == "overall":
        losses = reconstruction_losses(ae, holdout.images)
        return fit_loss_model(losses, holdout.labels, k, sigma_min)
    if mode != "regional":
        raise DomainError(f"mode must be overall|regional, got {mode!r}")
    seg_params = seg_params or FhParams()
    all_losses, all_labels = [], []
    for img, lab in zip(holdout.images, holdout.labels):
        seg = segment(img, seg_params)
        ls = segment_inpaint_losses(ae, img, seg.segment_id, exclude=sky, trim=trim)
        ls = ls[~np.isnan(ls)]
        all_losses.append(ls)
        all_labels.append(np.full(len(ls), lab))
    return fit_loss_model(np.concatenate(all_losses), np.concatenate(all_labels), k, sigma_min)


@dataclass(frozen=True, eq=False)
class CompetencyRecord:
    overall: float
    posterior: ClassPosterior
    loss: float
    regional: np.ndarray | None = None
    segment_scores: np.ndarray | None = None
    segments: SegmentMap | None = None

    @classmethod
    def perfect(cls, shape, n_classes=1):
        """A record with competency 1 everywhere."""
        probs = np.zeros(n_classes)
        probs[0] = 1.0
        return cls(1.0, ClassPosterior(probs, np.log(np.maximum(probs, 1e-300))), 0.0, np.ones(shape), np.ones(1), None)


@dataclass(eq=False)
class CompetencyEstimator:
    """Classifier, autoencoder and both calibrations bundled for scoring."""

    classifier: object
    ae: object
    overall_model: ClassLossModel
    regional_model: ClassLossModel | None = None
    config: CompetencyConfig = field(default_factory=CompetencyConfig)
    seg_params: FhParams = field(default_factory=FhParams)
    sky: np.ndarray | None = None

    def __post_init__(self):
        self._z_ovl = self.config.z_overall
        self._z_reg = self.config.z_regional
        self._trim = self.config.context_trim or None

    def score(self, image, regional=True) -> CompetencyRecord:
        post = predict(self.classifier, image)
        _, loss = reconstruct(self.ae, image)
        rho = overall_score(post, loss, self.overall_model, self._z_ovl)
        if not regional:
            return CompetencyRecord(rho, post, loss)
        if self.regional_model is None:
            raise DomainError("regional scoring requested without a regional calibration")
        seg = segment(image, self.seg_params)
        reg = regional_map(post, self.ae, image, seg, self.regional_model, self._z_reg, self.sky, self._trim)
        return CompetencyRecord(rho, post, loss, reg.scores, reg.segment_scores, seg)

    def overall_batch(self, images):
        probs, _ = predict_batch(self.classifier, images)
        losses = reconstruction_losses(self.ae, images)
        return competency_from_probs(probs, losses, self.overall_model, self._z_ovl), probs


# ---------------------------------------------------------------------------
# logit-only baselines, oriented so that higher means more confident


def score_baseline(method, logits, temperature=None):
    z = np.asarray(logits, dtype=float)
    if method == "msp":
        return np.max(softmax(z), axis=-1)
    if method == "temperature":
        if temperature is None or temperature <= 0:
            raise DomainError("temperature scaling needs T > 0")
        return np.max(softmax(z / temperature), axis=-1)
    if method == "entropy":
        p = softmax(z)
        with np.errstate(divide="ignore", invalid="ignore"):
            plogp = np.where(p > 0, p * np.log(p), 0.0)
        return np.sum(plogp, axis=-1)
    if method == "energy":
        return logsumexp(z, axis=-1)
    raise DomainError(f"unknown baseline {method!r}")


def fit_temperature(logits, labels, lo=0.05, hi=20.0, tol=1e-6):
    """Golden-section search for the NLL-minimizing temperature on log scale."""
    z = np.asarray(logits, dtype=float)
    y = np.asarray(labels, dtype=np.int64)

    def nll(log_t):
        s = z / math.exp(log_t)
        return float(np.mean(logsumexp(s, axis=1) - s[np.arange(len(y)), y]))

    g = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = math.log(lo), math.log(hi)
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = nll(c), nll(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = nll(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = nll(d)
    return math.exp(0.5 * (a + b))
