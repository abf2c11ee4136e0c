"""Train, calibrate and persist the full model bundle."""

from __future__ import annotations

from pathlib import Path

from .competency import ClassLossModel, CompetencyEstimator, calibrate
from .config import CLASS_NAMES, Settings
from .data import build_corpus
from .perception import Classifier, train_classifier
from .reconstruction import LinearAutoencoder, fit_autoencoder
from .world import sky_mask

CLASSIFIER_FILE = "classifier.bin"
AE_FILE = "autoencoder.bin"
OVERALL_FILE = "calibration_overall.csv"
REGIONAL_FILE = "calibration_regional.csv"


def build_estimator(settings: Settings | None = None, corpus=None) -> CompetencyEstimator:
    """Generate the corpus (unless given), train every model and calibrate both modes."""
    s = settings or Settings()
    d = s.data
    if corpus is None:
        corpus = build_corpus(d.tiles_per_class, s.seed, s.camera, d.test_fraction, d.holdout_fraction)
    clf = train_classifier(corpus.train, d.epochs, d.learning_rate, s.seed, d.l2, CLASS_NAMES, len(CLASS_NAMES))
    ae = fit_autoencoder(corpus.train, d.rank, s.seed)
    sky = sky_mask(s.camera)
    k = len(CLASS_NAMES)
    sig = s.competency.sigma_min
    overall = calibrate(ae, corpus.holdout, "overall", n_classes=k, sigma_min=sig)
    trim = s.competency.context_trim or None
    regional = calibrate(ae, corpus.holdout, "regional", s.segmentation, sky, k, sig, trim)
    return CompetencyEstimator(clf, ae, overall, regional, s.competency, s.segmentation, sky)


def save_estimator(est: CompetencyEstimator, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    est.classifier.save(out / CLASSIFIER_FILE)
    est.ae.save(out / AE_FILE)
    est.overall_model.save_csv(out / OVERALL_FILE)
    if est.regional_model is not None:
        est.regional_model.save_csv(out / REGIONAL_FILE)
    return out


def load_estimator(model_dir, settings: Settings | None = None) -> CompetencyEstimator:
    s = settings or Settings()
    d = Path(model_dir)
    regional = ClassLossModel.load_csv(d / REGIONAL_FILE) if (d / REGIONAL_FILE).exists() else None
    return CompetencyEstimator(
        Classifier.load(d / CLASSIFIER_FILE),
        LinearAutoencoder.load(d / AE_FILE),
        ClassLossModel.load_csv(d / OVERALL_FILE),
        regional,
        s.competency,
        s.segmentation,
        sky_mask(s.camera),
    )
