"""Hot numeric kernels with a numba path and a pure-numpy fallback.

Set ``PARCE_NUMBA=0`` in the environment to force the numpy path. Both
implementations are importable regardless of the flag (``numba_impl`` and
``numpy_impl``) so they can be compared side by side.
"""

import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("PARCE_NUMBA", "1").strip().lower() not in (
    "0",
    "false",
    "no",
    "off",
)

_M1 = np.uint64(0x9E3779B97F4A7C15)
_M2 = np.uint64(0xC2B2AE3D27D4EB4F)
_M3 = np.uint64(0x165667B19E3779F9)
_M4 = np.uint64(0xBF58476D1CE4E5B9)
_M5 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0


# ---------------------------------------------------------------------------
# lattice value noise


def _hash01_numpy(ix, iy, seed):
    """Uniform [0, 1) value per integer lattice point (splitmix64 finalizer)."""
    with np.errstate(over="ignore"):
        h = (ix.astype(np.int64).view(np.uint64) * _M1) ^ (
            iy.astype(np.int64).view(np.uint64) * _M2
        )
        h = h ^ (np.uint64(seed) * _M3)
        h = h ^ (h >> _S30)
        h = h * _M4
        h = h ^ (h >> _S27)
        h = h * _M5
        h = h ^ (h >> _S31)
    return (h >> _S11).astype(np.float64) * _INV53


def _value_noise_numpy(xs, ys, seed, freq, octaves, gain):
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    total = np.zeros(xs.shape)
    norm = 0.0
    amp = 1.0
    f = freq
    for o in range(octaves):
        s = (seed + 0x9E37 * (o + 1)) & 0x3FFFFFFFFFFFFFFF
        px = xs * f
        py = ys * f
        x0 = np.floor(px)
        y0 = np.floor(py)
        tx = px - x0
        ty = py - y0
        tx = tx * tx * (3.0 - 2.0 * tx)
        ty = ty * ty * (3.0 - 2.0 * ty)
        ix = x0.astype(np.int64)
        iy = y0.astype(np.int64)
        v00 = _hash01_numpy(ix, iy, s)
        v10 = _hash01_numpy(ix + 1, iy, s)
        v01 = _hash01_numpy(ix, iy + 1, s)
        v11 = _hash01_numpy(ix + 1, iy + 1, s)
        a = v00 + tx * (v10 - v00)
        b = v01 + tx * (v11 - v01)
        total += amp * (a + ty * (b - a))
        norm += amp
        amp *= gain
        f *= 2.0
    return total / norm


def _hash01_scalar(ix, iy, seed):
    h = (np.uint64(ix) * _M1) ^ (np.uint64(iy) * _M2)
    h = h ^ (np.uint64(seed) * _M3)
    h = h ^ (h >> _S30)
    h = h * _M4
    h = h ^ (h >> _S27)
    h = h * _M5
    h = h ^ (h >> _S31)
    return np.float64(h >> _S11) * _INV53


def _value_noise_loop(xs, ys, seed, freq, octaves, gain):
    n = xs.shape[0]
    out = np.zeros(n)
    norm = 0.0
    amp = 1.0
    for o in range(octaves):
        norm += amp
        amp *= gain
    for i in range(n):
        amp = 1.0
        f = freq
        acc = 0.0
        for o in range(octaves):
            s = (seed + 0x9E37 * (o + 1)) & 0x3FFFFFFFFFFFFFFF
            px = xs[i] * f
            py = ys[i] * f
            x0 = np.floor(px)
            y0 = np.floor(py)
            tx = px - x0
            ty = py - y0
            tx = tx * tx * (3.0 - 2.0 * tx)
            ty = ty * ty * (3.0 - 2.0 * ty)
            ix = np.int64(x0)
            iy = np.int64(y0)
            v00 = _hash01_scalar(ix, iy, s)
            v10 = _hash01_scalar(ix + 1, iy, s)
            v01 = _hash01_scalar(ix, iy + 1, s)
            v11 = _hash01_scalar(ix + 1, iy + 1, s)
            a = v00 + tx * (v10 - v00)
            b = v01 + tx * (v11 - v01)
            acc += amp * (a + ty * (b - a))
            amp *= gain
            f *= 2.0
        out[i] = acc / norm
    return out


# ---------------------------------------------------------------------------
# Felzenszwalb merge loop over pre-sorted edges


def _fh_merge_loop(n, src, dst, w, k, min_size):
    parent = np.arange(n)
    size = np.ones(n, dtype=np.int64)
    rank = np.zeros(n, dtype=np.int64)
    thresh = np.full(n, k)
    m = src.shape[0]

    for e in range(m):
        a = src[e]
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        b = dst[e]
        while parent[b] != b:
            parent[b] = parent[parent[b]]
            b = parent[b]
        if a != b and w[e] <= thresh[a] and w[e] <= thresh[b]:
            if rank[a] < rank[b]:
                a, b = b, a
            parent[b] = a
            size[a] += size[b]
            if rank[a] == rank[b]:
                rank[a] += 1
            thresh[a] = w[e] + k / size[a]

    for e in range(m):
        a = src[e]
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        b = dst[e]
        while parent[b] != b:
            parent[b] = parent[parent[b]]
            b = parent[b]
        if a != b and (size[a] < min_size or size[b] < min_size):
            if rank[a] < rank[b]:
                a, b = b, a
            parent[b] = a
            size[a] += size[b]
            if rank[a] == rank[b]:
                rank[a] += 1

    roots = np.empty(n, dtype=np.int64)
    for i in range(n):
        a = i
        while parent[a] != a:
            a = parent[a]
        roots[i] = a
    return roots


def _relabel_loop(roots):
    n = roots.shape[0]
    lut = np.full(n, -1, dtype=np.int64)
    out = np.empty(n, dtype=np.int64)
    nxt = 0
    for i in range(n):
        r = roots[i]
        if lut[r] < 0:
            lut[r] = nxt
            nxt += 1
        out[i] = lut[r]
    return out


def _relabel_numpy(roots):
    _, first = np.unique(roots, return_index=True)
    order = np.argsort(first, kind="stable")
    lut = np.empty(roots.max() + 1, dtype=np.int64)
    lut[roots[first[order]]] = np.arange(order.size)
    return lut[roots]


# ---------------------------------------------------------------------------
# batched vehicle rollout


def _wrap_angle_scalar(a):
    return a - 2.0 * np.pi * np.ceil((a - np.pi) / (2.0 * np.pi))


def _rollout_loop(states0, inputs, dt, alpha, beta):
    n = states0.shape[0]
    h = inputs.shape[1]
    out = np.empty((n, h + 1, 5))
    for i in range(n):
        x = states0[i, 0]
        y = states0[i, 1]
        th = states0[i, 2]
        v = states0[i, 3]
        om = states0[i, 4]
        out[i, 0, 0] = x
        out[i, 0, 1] = y
        out[i, 0, 2] = th
        out[i, 0, 3] = v
        out[i, 0, 4] = om
        for k in range(h):
            c = np.cos(th)
            s = np.sin(th)
            x = x + dt * c * v
            y = y + dt * s * v
            th = _wrap_angle_scalar(th + dt * om)
            v = (1.0 - alpha) * v + alpha * inputs[i, k, 0]
            om = (1.0 - beta) * om + beta * inputs[i, k, 1]
            out[i, k + 1, 0] = x
            out[i, k + 1, 1] = y
            out[i, k + 1, 2] = th
            out[i, k + 1, 3] = v
            out[i, k + 1, 4] = om
    return out


def _rollout_numpy(states0, inputs, dt, alpha, beta):
    n, h = inputs.shape[0], inputs.shape[1]
    out = np.empty((n, h + 1, 5))
    cur = np.array(states0, dtype=np.float64, copy=True)
    out[:, 0] = cur
    for k in range(h):
        x, y, th, v, om = cur.T
        nxt = np.empty_like(cur)
        nxt[:, 0] = x + dt * np.cos(th) * v
        nxt[:, 1] = y + dt * np.sin(th) * v
        a = th + dt * om
        nxt[:, 2] = a - 2.0 * np.pi * np.ceil((a - np.pi) / (2.0 * np.pi))
        nxt[:, 3] = (1.0 - alpha) * v + alpha * inputs[:, k, 0]
        nxt[:, 4] = (1.0 - beta) * om + beta * inputs[:, k, 1]
        out[:, k + 1] = nxt
        cur = nxt
    return out


# ---------------------------------------------------------------------------
# dispatch

numpy_impl = {
    "value_noise": _value_noise_numpy,
    "fh_merge": _fh_merge_loop,
    "relabel": _relabel_numpy,
    "rollout": _rollout_numpy,
}

if HAVE_NUMBA:
    _hash01_scalar = njit(cache=True)(_hash01_scalar)
    _wrap_angle_scalar = njit(cache=True)(_wrap_angle_scalar)
    numba_impl = {
        "value_noise": njit(cache=True)(_value_noise_loop),
        "fh_merge": njit(cache=True)(_fh_merge_loop),
        "relabel": njit(cache=True)(_relabel_loop),
        "rollout": njit(cache=True)(_rollout_loop),
    }
else:  # pragma: no cover
    numba_impl = dict(numpy_impl)

_active = numba_impl if USE_NUMBA else numpy_impl


def value_noise(xs, ys, seed, freq, octaves=3, gain=0.5):
    """Fractal lattice value noise in [0, 1] at ground points ``(xs, ys)``."""
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    ys = np.ascontiguousarray(ys, dtype=np.float64)
    shape = xs.shape
    out = _active["value_noise"](
        xs.ravel(), ys.ravel(), int(seed) & 0x3FFFFFFFFFFFFFFF, float(freq), int(octaves), float(gain)
    )
    return out.reshape(shape)


def fh_merge(n, src, dst, w, k, min_size):
    return _active["fh_merge"](
        int(n),
        np.ascontiguousarray(src, dtype=np.int64),
        np.ascontiguousarray(dst, dtype=np.int64),
        np.ascontiguousarray(w, dtype=np.float64),
        float(k),
        int(min_size),
    )


def relabel(roots):
    return _active["relabel"](np.ascontiguousarray(roots, dtype=np.int64))


def rollout(states0, inputs, dt, alpha, beta):
    return _active["rollout"](
        np.ascontiguousarray(states0, dtype=np.float64),
        np.ascontiguousarray(inputs, dtype=np.float64),
        float(dt),
        float(alpha),
        float(beta),
    )
