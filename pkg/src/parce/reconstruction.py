"""Linear autoencoder: empirical mean plus a truncated orthonormal basis.

Both the full-image reconstruction loss and the masked inpainting loss are
mean squared errors per pixel-channel on [0, 1] intensities.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io
from .errors import DomainError

AE_MAGIC = b"PARCEAE0"
RIDGE = 1e-6


@dataclass(frozen=True, eq=False)
class LinearAutoencoder:
    mean: np.ndarray  # (d,)
    basis: np.ndarray  # (d, r), orthonormal columns
    input_shape: tuple

    @property
    def rank(self):
        return self.basis.shape[1]

    def _flat(self, image):
        x = np.asarray(image, dtype=float)
        if tuple(x.shape) != tuple(self.input_shape):
            raise DomainError(f"expected image shape {tuple(self.input_shape)}, got {x.shape}")
        return x.ravel()

    def save(self, path):
        h, w, c = self.input_shape
        io.write_flat(path, AE_MAGIC, (h, w, c, self.rank), (self.mean, self.basis))

    @classmethod
    def load(cls, path):
        def shapes(hdr):
            h, w, c, r = hdr
            return [(h * w * c,), (h * w * c, r)]

        hdr, (mean, basis), _ = io.read_flat(Path(path), AE_MAGIC, shapes)
        return cls(mean, basis, tuple(int(v) for v in hdr[:3]))


def fit_autoencoder(train, rank=32, seed=0):
    """Fit mean and top-``rank`` right singular vectors of the centered data.

    Each basis vector is signed so its largest-magnitude entry is positive.
    The SVD is deterministic; ``seed`` is accepted for interface symmetry.
    """
    images = np.asarray(getattr(train, "images", train), dtype=float)
    n = images.shape[0]
    X = images.reshape(n, -1)
    d = X.shape[1]
    if rank < 1 or rank > min(d, n):
        raise DomainError(f"rank must lie in [1, {min(d, n)}], got {rank}")
    mean = X.mean(axis=0)
    _, _, vt = np.linalg.svd(X - mean, full_matrices=False)
    basis = vt[:rank].T.copy()
    pivot = np.argmax(np.abs(basis), axis=0)
    signs = np.sign(basis[pivot, np.arange(rank)])
    signs[signs == 0] = 1.0
    basis *= signs
    return LinearAutoencoder(mean, basis, tuple(images.shape[1:]))


def explained_variance(train, ae):
    """Fraction of the centered training variance captured by the basis."""
    X = np.asarray(getattr(train, "images", train), dtype=float)
    X = X.reshape(len(X), -1) - ae.mean
    total = np.sum(X * X)
    return float(np.sum((X @ ae.basis) ** 2) / total) if total > 0 else 1.0


def reconstruct(ae: LinearAutoencoder, image):
    """Project onto the affine span; returns (display image, loss)."""
    x = ae._flat(image)
    c = ae.basis.T @ (x - ae.mean)
    y = ae.mean + ae.basis @ c
    loss = float(np.mean((y - x) ** 2))
    return np.clip(y, 0.0, 1.0).reshape(ae.input_shape), loss


def reconstruction_losses(ae: LinearAutoencoder, images):
    """Vectorized reconstruction loss for a batch of images."""
    X = np.asarray(images, dtype=float).reshape(len(images), -1) - ae.mean
    R = X - (X @ ae.basis) @ ae.basis.T
    return np.mean(R * R, axis=1)


def _mask_index(ae, mask):
    m = np.asarray(mask, dtype=bool)
    h, w, c = ae.input_shape
    if m.shape != (h, w):
        raise DomainError(f"mask shape {m.shape} does not match image {(h, w)}")
    n_miss = int(m.sum())
    if n_miss == 0 or n_miss == m.size:
        raise DomainError("mask needs at least one missing and one visible pixel")
    pix = np.flatnonzero(m.ravel())
    return (pix[:, None] * c + np.arange(c)).ravel()


def _inpaint_code(ae, proj_all, x, idx, ridge):
    um = ae.basis[idx]
    gram = np.eye(ae.rank) * (1.0 + ridge) - um.T @ um
    rhs = proj_all - um.T @ (x[idx] - ae.mean[idx])
    return np.linalg.solve(gram, rhs), um


def inpaint(ae: LinearAutoencoder, image, mask, ridge=RIDGE):
    """Fill masked pixels from a code fitted to the visible pixels only.

    The code solves ridge-regularized least squares over visible
    pixel-channels. The loss is the MSE over missing pixel-channels between
    the decode and the true image content.
    """
    x = ae._flat(image)
    idx = _mask_index(ae, mask)
    code, um = _inpaint_code(ae, ae.basis.T @ (x - ae.mean), x, idx, ridge)
    filled = ae.mean[idx] + um @ code
    loss = float(np.mean((filled - x[idx]) ** 2))
    out = x.copy()
    out[idx] = filled
    return np.clip(out, 0.0, 1.0).reshape(ae.input_shape), loss


def trimmed_outliers(ae: LinearAutoencoder, image, exclude=None, k=3.0, iters=3, ridge=RIDGE):
    """Pixel-channels that a trimmed full-image fit cannot explain.

    Starts from the plain projection, then repeatedly drops pixel-channels
    whose residual exceeds ``k`` robust standard deviations (MAD based) and
    refits on the rest. Returns a flat boolean mask over pixel-channels.
    """
    x = ae._flat(image)
    c = ae.input_shape[2]
    keep = np.ones(x.size, dtype=bool)
    if exclude is not None:
        keep = np.repeat(~np.asarray(exclude, dtype=bool).ravel(), c)
    r0 = x - ae.mean
    u = ae.basis
    proj = u.T @ r0
    code = proj
    out = np.zeros(x.size, dtype=bool)
    for _ in range(iters):
        res = r0 - u @ code
        base = res[keep & ~out]
        if base.size == 0:
            break
        scale = 1.4826 * np.median(np.abs(base - np.median(base))) + 1e-12
        new = keep & (np.abs(res) > k * scale)
        if np.array_equal(new, out):
            break
        out = new
        uo = u[out]
        code = np.linalg.solve(np.eye(ae.rank) * (1.0 + ridge) - uo.T @ uo, proj - uo.T @ r0[out])
    return out


def segment_inpaint_losses(ae: LinearAutoencoder, image, segment_ids, exclude=None, ridge=RIDGE, trim=None):
    """Inpainting loss for every segment, using the segment as the missing mask.

    ``exclude`` marks pixels (e.g. sky) dropped from every segment. Segments
    left empty, or covering the whole image, get NaN. With ``trim=k`` the
    pixel-channels flagged by :func:`trimmed_outliers` are also removed from
    every segment's visible context, so a strongly unfamiliar object cannot
    drag the fitted code away for the familiar terrain around it.
    """
    x = ae._flat(image)
    seg = np.asarray(segment_ids)
    keep = np.ones(seg.shape, dtype=bool) if exclude is None else ~np.asarray(exclude, dtype=bool)
    r0 = x - ae.mean
    proj = ae.basis.T @ r0
    c = ae.input_shape[2]
    n_seg = int(seg.max()) + 1
    flat_seg = seg.ravel()
    flat_keep = keep.ravel()
    order = np.argsort(flat_seg, kind="stable")
    bounds = np.searchsorted(flat_seg[order], np.arange(n_seg + 1))
    losses = np.full(n_seg, np.nan)
    outliers = None if trim is None else trimmed_outliers(ae, image, exclude, trim, ridge=ridge)
    for s in range(n_seg):
        pix = order[bounds[s] : bounds[s + 1]]
        pix = pix[flat_keep[pix]]
        if pix.size == 0 or pix.size == flat_seg.size:
            continue
        idx = (pix[:, None] * c + np.arange(c)).ravel()
        if outliers is None:
            code, um = _inpaint_code(ae, proj, x, idx, ridge)
        else:
            hidden = outliers.copy()
            hidden[idx] = True
            uh = ae.basis[hidden]
            code = np.linalg.solve(np.eye(ae.rank) * (1.0 + ridge) - uh.T @ uh, proj - uh.T @ r0[hidden])
            um = ae.basis[idx]
        r = ae.mean[idx] + um @ code - x[idx]
        losses[s] = np.mean(r * r)
    return losses
