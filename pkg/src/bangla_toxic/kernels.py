"""LSTM time-scan kernels.

The recurrence over timesteps is the only loop that cannot be vectorised
away, so it lives here in two interchangeable implementations:

* ``*_numba``: ``@njit`` compiled loops (default when numba imports).
* ``*_numpy``: pure numpy, one vectorised step per timestep.

Set ``BANGLA_TOXIC_DISABLE_NUMBA=1`` to force the numpy path. ``BACKEND``
reports which one ``lstm_scan_forward`` / ``lstm_scan_backward`` resolve to.

Array layout (all float64, C-contiguous):
    xp     (T, B, 4H)  input projection ``x_t @ W.T + b`` for every step
    U      (4H, H)     recurrent weights, gate blocks ordered [i, f, o, g]
    gates  (T, B, 4H)  post-activation gates
    c, h   (T, B, H)   cell and hidden states
"""

from __future__ import annotations

import os

import numpy as np

from .tensor_core import ONE_MINUS, SIGMOID_CLAMP, sigmoid

_DISABLED = os.environ.get("BANGLA_TOXIC_DISABLE_NUMBA", "").strip().lower() in {
    "1",
    "true",
    "yes",
    "on",
}

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

NUMBA_AVAILABLE = numba is not None


def lstm_scan_forward_numpy(xp, U):
    T, B, H4 = xp.shape
    H = H4 // 4
    UT = np.ascontiguousarray(U.T)
    gates = np.empty_like(xp)
    c = np.empty((T, B, H))
    h = np.empty((T, B, H))
    h_prev = np.zeros((B, H))
    c_prev = np.zeros((B, H))
    for t in range(T):
        z = xp[t] + h_prev @ UT
        ifo = sigmoid(z[:, : 3 * H])
        g = np.tanh(z[:, 3 * H :])
        gates[t, :, : 3 * H] = ifo
        gates[t, :, 3 * H :] = g
        c_t = ifo[:, H : 2 * H] * c_prev + ifo[:, :H] * g
        h_t = ifo[:, 2 * H : 3 * H] * np.tanh(c_t)
        c[t] = c_t
        h[t] = h_t
        c_prev, h_prev = c_t, h_t
    return gates, c, h


def lstm_scan_backward_numpy(dh, gates, c, h, U):
    """Backpropagate ``dh`` (loss gradient wrt every h_t) through the scan.

    Returns ``(dxp, dU)``; ``dxp`` is the gradient wrt the pre-activations,
    which the caller maps onto ``W``, ``b`` and the layer input.
    """
    T, B, H = h.shape
    dxp = np.empty((T, B, 4 * H))
    dU = np.zeros((4 * H, H))
    dh_next = np.zeros((B, H))
    dc_next = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        i = gates[t, :, :H]
        f = gates[t, :, H : 2 * H]
        o = gates[t, :, 2 * H : 3 * H]
        g = gates[t, :, 3 * H :]
        c_prev = c[t - 1] if t > 0 else np.zeros((B, H))
        tc = np.tanh(c[t])
        dht = dh[t] + dh_next
        dct = dc_next + dht * o * (1.0 - tc * tc)
        dz = dxp[t]
        dz[:, :H] = dct * g * i * (1.0 - i)
        dz[:, H : 2 * H] = dct * c_prev * f * (1.0 - f)
        dz[:, 2 * H : 3 * H] = dht * tc * o * (1.0 - o)
        dz[:, 3 * H :] = dct * i * (1.0 - g * g)
        if t > 0:
            dU += dz.T @ h[t - 1]
        dh_next = dz @ U
        dc_next = dct * f
    return dxp, dU


if NUMBA_AVAILABLE:

    @numba.njit(cache=True, inline="always")
    def _sig(x):
        if x > SIGMOID_CLAMP:
            x = SIGMOID_CLAMP
        elif x < -SIGMOID_CLAMP:
            x = -SIGMOID_CLAMP
        if x >= 0.0:
            s = 1.0 / (1.0 + np.exp(-x))
        else:
            e = np.exp(x)
            s = e / (1.0 + e)
        return min(s, ONE_MINUS)

    @numba.njit(cache=True, nogil=True)
    def lstm_scan_forward_numba(xp, U):
        T, B, H4 = xp.shape
        H = H4 // 4
        UT = np.ascontiguousarray(U.T)
        gates = np.empty_like(xp)
        c = np.empty((T, B, H))
        h = np.empty((T, B, H))
        h_prev = np.zeros((B, H))
        c_prev = np.zeros((B, H))
        for t in range(T):
            z = np.dot(h_prev, UT)
            for b in range(B):
                for k in range(H):
                    ig = _sig(xp[t, b, k] + z[b, k])
                    fg = _sig(xp[t, b, H + k] + z[b, H + k])
                    og = _sig(xp[t, b, 2 * H + k] + z[b, 2 * H + k])
                    gg = np.tanh(xp[t, b, 3 * H + k] + z[b, 3 * H + k])
                    gates[t, b, k] = ig
                    gates[t, b, H + k] = fg
                    gates[t, b, 2 * H + k] = og
                    gates[t, b, 3 * H + k] = gg
                    ct = fg * c_prev[b, k] + ig * gg
                    c[t, b, k] = ct
                    h[t, b, k] = og * np.tanh(ct)
            h_prev = h[t].copy()
            c_prev = c[t].copy()
        return gates, c, h

    @numba.njit(cache=True, nogil=True)
    def lstm_scan_backward_numba(dh, gates, c, h, U):
        T, B, H = h.shape
        dxp = np.empty((T, B, 4 * H))
        dU = np.zeros((4 * H, H))
        dh_next = np.zeros((B, H))
        dc_next = np.zeros((B, H))
        for t in range(T - 1, -1, -1):
            for b in range(B):
                for k in range(H):
                    ig = gates[t, b, k]
                    fg = gates[t, b, H + k]
                    og = gates[t, b, 2 * H + k]
                    gg = gates[t, b, 3 * H + k]
                    cp = c[t - 1, b, k] if t > 0 else 0.0
                    tc = np.tanh(c[t, b, k])
                    dht = dh[t, b, k] + dh_next[b, k]
                    dct = dc_next[b, k] + dht * og * (1.0 - tc * tc)
                    dxp[t, b, k] = dct * gg * ig * (1.0 - ig)
                    dxp[t, b, H + k] = dct * cp * fg * (1.0 - fg)
                    dxp[t, b, 2 * H + k] = dht * tc * og * (1.0 - og)
                    dxp[t, b, 3 * H + k] = dct * ig * (1.0 - gg * gg)
                    dc_next[b, k] = dct * fg
            dz = dxp[t]
            if t > 0:
                dU += np.dot(dz.T, h[t - 1])
            dh_next = np.dot(dz, U)
        return dxp, dU

else:  # pragma: no cover
    lstm_scan_forward_numba = None
    lstm_scan_backward_numba = None


if NUMBA_AVAILABLE and not _DISABLED:
    BACKEND = "numba"
    lstm_scan_forward = lstm_scan_forward_numba
    lstm_scan_backward = lstm_scan_backward_numba
else:
    BACKEND = "numpy"
    lstm_scan_forward = lstm_scan_forward_numpy
    lstm_scan_backward = lstm_scan_backward_numpy
