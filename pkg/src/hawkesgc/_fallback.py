"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``.

Signatures and results match the compiled module up to floating-point
summation order.
"""

import numpy as np

# cap on the (rows, n, M) block materialised at once
_BLOCK_ELEMENTS = 4_000_000


def excitation_features(times, types, num_types, centers, sigma):
    times = np.asarray(times, dtype=np.float64)
    types = np.asarray(types, dtype=np.int64)
    centers = np.asarray(centers, dtype=np.float64)
    n, nb = times.size, centers.size
    out = np.zeros((n, num_types, nb))
    if n < 2:
        return out
    onehot = np.zeros((n, num_types))
    onehot[np.arange(n), types] = 1.0
    rows = max(1, _BLOCK_ELEMENTS // max(1, n * nb))
    inv2s2 = 0.5 / (sigma * sigma)
    for start in range(1, n, rows):
        stop = min(n, start + rows)
        tau = times[start:stop, None] - times[None, :stop]
        earlier = np.arange(stop)[None, :] < np.arange(start, stop)[:, None]
        k = np.exp(-((tau[..., None] - centers) ** 2) * inv2s2)
        k *= earlier[..., None]
        out[start:stop] = np.einsum("ijm,jv->ivm", k, onehot[:stop])
    return out


def sine_intensity(t, times, types, amplitude, frequency, phase, support_end,
                   stepped, out):
    lag = t - np.asarray(times)
    keep = lag > 0.0
    if not keep.any():
        return out
    lag = lag[keep]
    src = np.asarray(types)[keep]
    b = amplitude[:, src]
    c = np.cos(frequency[:, src] * lag - phase[:, src])
    live = (b != 0.0) & (lag <= support_end[:, src])
    if stepped:
        vals = np.where(live & (c <= 0.0), b, 0.0)
    else:
        vals = np.where(live, b * (1.0 - c), 0.0)
    out += vals.sum(axis=1)
    return out
