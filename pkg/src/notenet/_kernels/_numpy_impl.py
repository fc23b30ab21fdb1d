"""Pure-numpy kernels. Reference path and fallback when numba is off."""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def lstm_forward(xw, U, rec_mask):
    """Run the recurrence over precomputed input projections.

    xw: (n, L, 4h) input projections plus bias, gate order i, f, g, o.
    U: (h, 4h) recurrent kernel. rec_mask: (n, h) or None.
    Returns hidden states, cell states and activated gates, all time-indexed.
    """
    n, L, h4 = xw.shape
    h = h4 // 4
    hs = np.zeros((n, L, h), dtype=xw.dtype)
    cs = np.zeros((n, L, h), dtype=xw.dtype)
    gates = np.empty((n, L, h4), dtype=xw.dtype)
    hprev = np.zeros((n, h), dtype=xw.dtype)
    cprev = np.zeros((n, h), dtype=xw.dtype)
    for t in range(L):
        hin = hprev * rec_mask if rec_mask is not None else hprev
        z = xw[:, t] + hin @ U
        ifo = _sigmoid(z[:, np.r_[0:2 * h, 3 * h:4 * h]])
        i, f, o = ifo[:, :h], ifo[:, h:2 * h], ifo[:, 2 * h:]
        g = np.tanh(z[:, 2 * h:3 * h])
        c = f * cprev + i * g
        hcur = o * np.tanh(c)
        gates[:, t, :h] = i
        gates[:, t, h:2 * h] = f
        gates[:, t, 2 * h:3 * h] = g
        gates[:, t, 3 * h:] = o
        hs[:, t] = hcur
        cs[:, t] = c
        hprev, cprev = hcur, c
    return hs, cs, gates


def lstm_backward(dhs, hs, cs, gates, U, rec_mask):
    """Gradients w.r.t. the input projections and the recurrent kernel."""
    n, L, h = hs.shape
    dxw = np.empty((n, L, 4 * h), dtype=hs.dtype)
    dU = np.zeros_like(U)
    dh_next = np.zeros((n, h), dtype=hs.dtype)
    dc_next = np.zeros((n, h), dtype=hs.dtype)
    zeros = np.zeros((n, h), dtype=hs.dtype)
    for t in range(L - 1, -1, -1):
        i = gates[:, t, :h]
        f = gates[:, t, h:2 * h]
        g = gates[:, t, 2 * h:3 * h]
        o = gates[:, t, 3 * h:]
        cprev = cs[:, t - 1] if t > 0 else zeros
        hprev = hs[:, t - 1] if t > 0 else zeros
        dh = dhs[:, t] + dh_next
        tc = np.tanh(cs[:, t])
        dc = dh * o * (1.0 - tc * tc) + dc_next
        dz = dxw[:, t]
        dz[:, :h] = dc * g * i * (1.0 - i)
        dz[:, h:2 * h] = dc * cprev * f * (1.0 - f)
        dz[:, 2 * h:3 * h] = dc * i * (1.0 - g * g)
        dz[:, 3 * h:] = dh * tc * o * (1.0 - o)
        hin = hprev * rec_mask if rec_mask is not None else hprev
        dU += hin.T @ dz
        dh_next = dz @ U.T
        if rec_mask is not None:
            dh_next *= rec_mask
        dc_next = dc * f
    return dxw, dU


def maxpool_forward(X, pool, stride):
    """Window max over axis 1; ``argidx`` holds absolute positions of the first max."""
    win = sliding_window_view(X, pool, axis=1)[:, ::stride]  # (n, Lout, c, pool)
    rel = win.argmax(axis=-1)
    out = np.take_along_axis(win, rel[..., None], axis=-1)[..., 0]
    starts = (np.arange(win.shape[1]) * stride)[None, :, None]
    return np.ascontiguousarray(out), rel + starts


def maxpool_backward(g, argidx, length):
    n, lout, c = g.shape
    dX = np.zeros((n, length, c), dtype=g.dtype)
    nn = np.broadcast_to(np.arange(n)[:, None, None], g.shape)
    cc = np.broadcast_to(np.arange(c)[None, None, :], g.shape)
    np.add.at(dX, (nn, argidx, cc), g)
    return dX


def scatter_add_rows(target, indices, rows):
    np.add.at(target, np.reshape(indices, -1), np.reshape(rows, (-1, target.shape[1])))


def depthwise_forward(X, D):
    """out[n, t, c] = sum over tau of X[n, t + tau, c] * D[tau, c]."""
    k = D.shape[0]
    lout = X.shape[1] - k + 1
    out = np.zeros((X.shape[0], lout, X.shape[2]), dtype=X.dtype)
    for tau in range(k):
        out += X[:, tau:tau + lout, :] * D[tau]
    return out


def depthwise_backward(g, X, D):
    k = D.shape[0]
    lout = g.shape[1]
    dX = np.zeros_like(X)
    dD = np.empty_like(D)
    for tau in range(k):
        dX[:, tau:tau + lout, :] += g * D[tau]
        dD[tau] = (g * X[:, tau:tau + lout, :]).sum(axis=(0, 1))
    return dX, dD
