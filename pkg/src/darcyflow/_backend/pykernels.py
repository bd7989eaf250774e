"""Numpy implementations of the hot kernels.

These are the reference semantics; the compiled extension in ``_ckernels``
must match them to floating-point roundoff.  Everything here is vectorised
and chunked so evaluating a 1000-mode field at 10^4 points stays inside a
bounded temporary footprint.
"""

import numpy as np

BACKEND_NAME = "numpy"

# Chunk size keeps the (points x modes) temporaries around ~8 MB.
_CHUNK = 1 << 20


def _chunks(n_pts, n_modes):
    step = max(1, _CHUNK // max(n_modes, 1))
    for start in range(0, n_pts, step):
        yield start, min(start + step, n_pts)


def mode_sum(modes, phases, pts):
    """sum_i cos(phase_i + 2*pi*k_i.x) for each point.

    modes: (N, d), phases: (N,), pts: (n, d) -> (n,)
    """
    n = pts.shape[0]
    out = np.empty(n)
    for a, b in _chunks(n, modes.shape[0]):
        arg = 2.0 * np.pi * (pts[a:b] @ modes.T)
        arg += phases
        np.cos(arg, out=arg)
        out[a:b] = arg.sum(axis=1)
    return out


def mode_sum_grad(modes, phases, pts):
    """Mode sum and its gradient.

    Returns (y, g) with y as in :func:`mode_sum` and
    g[:, j] = sum_i -2*pi*k_ij * sin(phase_i + 2*pi*k_i.x).
    """
    n, d = pts.shape
    y = np.empty(n)
    g = np.empty((n, d))
    for a, b in _chunks(n, modes.shape[0]):
        arg = 2.0 * np.pi * (pts[a:b] @ modes.T)
        arg += phases
        y[a:b] = np.cos(arg).sum(axis=1)
        np.sin(arg, out=arg)
        g[a:b] = arg @ (-2.0 * np.pi * modes)
    return y, g


def mode_sum_lagged(modes, phases, pts, lag_cos, lag_sin):
    """Mode sum at each point plus sums at fixed shifts of the point set.

    lag_cos[l, i] = cos(2*pi*k_i.r_l) and lag_sin likewise encode the shift
    r_l; the shifted sums follow from the angle-addition identity.
    Returns (y (n,), ylag (n, L)).
    """
    n = pts.shape[0]
    y = np.empty(n)
    ylag = np.empty((n, lag_cos.shape[0]))
    for a, b in _chunks(n, modes.shape[0]):
        arg = 2.0 * np.pi * (pts[a:b] @ modes.T)
        arg += phases
        cos_a = np.cos(arg)
        np.sin(arg, out=arg)
        y[a:b] = cos_a.sum(axis=1)
        ylag[a:b] = cos_a @ lag_cos.T
        ylag[a:b] -= arg @ lag_sin.T
    return y, ylag
