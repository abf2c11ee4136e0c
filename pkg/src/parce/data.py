"""Training corpus and OOD scene generation."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import io
from .config import CLASS_NAMES, CameraModel
from .perception import LabeledDataset
from .world import World, _mix_seed, box_obstacle, generate_tile, render_camera, render_labels


def stratified_split(labels, fraction, seed):
    """Indices (rest, picked) with ``fraction`` of every class picked."""
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    picked = []
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        idx = idx[rng.permutation(idx.size)]
        picked.extend(idx[: int(round(fraction * idx.size))].tolist())
    picked = np.sort(np.asarray(picked, dtype=np.int64))
    rest = np.setdiff1d(np.arange(labels.size), picked)
    return rest, picked


@dataclass
class Corpus:
    train: LabeledDataset
    holdout: LabeledDataset
    test: LabeledDataset


def build_corpus(tiles_per_class=200, seed=0, cam: CameraModel | None = None, test_fraction=0.25, holdout_fraction=0.2):
    """Tiles for every terrain class, split stratified into train/holdout/test.

    The holdout set is ``holdout_fraction`` of the non-test (training) pool.
    """
    cam = cam or CameraModel()
    images, labels = [], []
    for c in range(len(CLASS_NAMES)):
        for i in range(tiles_per_class):
            images.append(generate_tile(c, _mix_seed(seed, i), cam.image_width, cam))
            labels.append(c)
    full = LabeledDataset(np.stack(images), np.array(labels), "train")
    pool, test = stratified_split(full.labels, test_fraction, _mix_seed(seed, 0xE57))
    tr, ho = stratified_split(full.labels[pool], holdout_fraction, _mix_seed(seed, 0x401D))
    return Corpus(
        full.subset(pool[tr], "train"),
        full.subset(pool[ho], "holdout"),
        full.subset(test, "test"),
    )


@dataclass
class OodScenes:
    images: np.ndarray  # (N, H, W, 3)
    terrain: np.ndarray  # (N,) class of the surrounding terrain
    masks: np.ndarray  # (N, H, W) True on unfamiliar-obstacle pixels


def ood_scenes(n, seed=0, cam: CameraModel | None = None, distance=(1.0, 3.5), size=(1.2, 2.2), min_fraction=0.05):
    """Single-class terrain with one or two unfamiliar obstacles in view.

    Placements are redrawn until unfamiliar pixels cover at least
    ``min_fraction`` of the image.
    """
    cam = cam or CameraModel()
    rng = np.random.default_rng(_mix_seed(seed, 0x00D))
    imgs, terr, masks = [], [], []
    for i in range(n):
        c = int(rng.integers(len(CLASS_NAMES)))
        illum = float(rng.uniform(0.85, 1.15))
        for _ in range(100):
            x0, y0, th = rng.uniform(-500, 500), rng.uniform(-500, 500), rng.uniform(-math.pi, math.pi)
            obs = []
            for _j in range(int(rng.integers(1, 3))):
                d = rng.uniform(*distance)
                bearing = rng.uniform(-0.5, 0.5)
                length, width = rng.uniform(*size, 2)
                cx = x0 + d * math.cos(th + bearing)
                cy = y0 + d * math.sin(th + bearing)
                obs.append(
                    box_obstacle(cx, cy, length, width, rng.uniform(0, math.pi), "unfamiliar", int(rng.integers(1 << 30)))
                )
            world = World(
                seed=_mix_seed(seed, i, 0x00D),
                uniform_class=c,
                illumination=illum,
                obstacles=tuple(obs),
                extent=(-1e4, 1e4, -1e4, 1e4),
            )
            state = (x0, y0, th)
            mask = render_labels(world, state, cam) >= 0
            if mask.mean() >= min_fraction:
                break
        imgs.append(render_camera(world, state, cam))
        masks.append(mask)
        terr.append(c)
    return OodScenes(np.stack(imgs), np.array(terr), np.stack(masks))


def write_corpus(corpus: Corpus, out_dir):
    """Write every tile as PPM plus a CSV manifest of (ppm_path, label_id, split)."""
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    rows = []
    for ds in (corpus.train, corpus.holdout, corpus.test):
        for i, (img, lab) in enumerate(zip(ds.images, ds.labels)):
            rel = f"images/{ds.split}_{i:04d}_c{lab}.ppm"
            io.write_ppm(out / rel, img)
            rows.append((rel, int(lab), ds.split))
    io.write_csv(out / "manifest.csv", ("ppm_path", "label_id", "split"), rows)
    return out / "manifest.csv"


def read_manifest(path):
    """Load the datasets listed in a manifest, keyed by split."""
    path = Path(path)
    groups = {}
    for row in io.read_csv(path):
        groups.setdefault(row["split"], []).append(row)
    out = {}
    for split, rows in groups.items():
        imgs = np.stack([io.read_ppm(path.parent / r["ppm_path"]) for r in rows])
        labels = np.array([int(r["label_id"]) for r in rows])
        out[split] = LabeledDataset(imgs, labels, split, [r["ppm_path"] for r in rows])
    return out
