"""numba-compiled kernels; same signatures and results as the numpy path."""
import numba as nb
import numpy as np

njit_kwargs = {"nogil": True, "cache": True, "fastmath": False}


@nb.njit(**njit_kwargs)
def _sig(x):
    if x >= 0:
        return 1.0 / (1.0 + np.exp(-x))
    e = np.exp(x)
    return e / (1.0 + e)


@nb.njit(**njit_kwargs)
def _lstm_forward(xw, U, rec_mask, use_mask):
    n, L, h4 = xw.shape
    h = h4 // 4
    hs = np.zeros((n, L, h), dtype=xw.dtype)
    cs = np.zeros((n, L, h), dtype=xw.dtype)
    gates = np.empty((n, L, h4), dtype=xw.dtype)
    hin = np.zeros((n, h), dtype=xw.dtype)
    cprev = np.zeros((n, h), dtype=xw.dtype)
    for t in range(L):
        z = hin @ U
        for b in range(n):
            for j in range(h):
                i = _sig(xw[b, t, j] + z[b, j])
                f = _sig(xw[b, t, h + j] + z[b, h + j])
                g = np.tanh(xw[b, t, 2 * h + j] + z[b, 2 * h + j])
                o = _sig(xw[b, t, 3 * h + j] + z[b, 3 * h + j])
                c = f * cprev[b, j] + i * g
                hv = o * np.tanh(c)
                gates[b, t, j] = i
                gates[b, t, h + j] = f
                gates[b, t, 2 * h + j] = g
                gates[b, t, 3 * h + j] = o
                cs[b, t, j] = c
                hs[b, t, j] = hv
                cprev[b, j] = c
                hin[b, j] = hv * rec_mask[b, j] if use_mask else hv
    return hs, cs, gates


@nb.njit(**njit_kwargs)
def _lstm_backward(dhs, hs, cs, gates, U, rec_mask, use_mask):
    n, L, h = hs.shape
    dxw = np.empty((n, L, 4 * h), dtype=hs.dtype)
    dU = np.zeros_like(U)
    dh_next = np.zeros((n, h), dtype=hs.dtype)
    dc_next = np.zeros((n, h), dtype=hs.dtype)
    dz = np.empty((n, 4 * h), dtype=hs.dtype)
    hin = np.empty((n, h), dtype=hs.dtype)
    Ut = np.ascontiguousarray(U.T)
    for t in range(L - 1, -1, -1):
        for b in range(n):
            for j in range(h):
                i = gates[b, t, j]
                f = gates[b, t, h + j]
                g = gates[b, t, 2 * h + j]
                o = gates[b, t, 3 * h + j]
                cprev = cs[b, t - 1, j] if t > 0 else 0.0
                hprev = hs[b, t - 1, j] if t > 0 else 0.0
                dh = dhs[b, t, j] + dh_next[b, j]
                tc = np.tanh(cs[b, t, j])
                dc = dh * o * (1.0 - tc * tc) + dc_next[b, j]
                dz[b, j] = dc * g * i * (1.0 - i)
                dz[b, h + j] = dc * cprev * f * (1.0 - f)
                dz[b, 2 * h + j] = dc * i * (1.0 - g * g)
                dz[b, 3 * h + j] = dh * tc * o * (1.0 - o)
                dc_next[b, j] = dc * f
                hin[b, j] = hprev * rec_mask[b, j] if use_mask else hprev
        dxw[:, t, :] = dz
        dU += hin.T @ dz
        dh_next = dz @ Ut
        if use_mask:
            dh_next *= rec_mask
    return dxw, dU


def lstm_forward(xw, U, rec_mask):
    xw = np.ascontiguousarray(xw)
    U = np.ascontiguousarray(U)
    use = rec_mask is not None
    mask = np.ascontiguousarray(rec_mask) if use else np.ones((1, 1), dtype=xw.dtype)
    return _lstm_forward(xw, U, mask, use)


def lstm_backward(dhs, hs, cs, gates, U, rec_mask):
    use = rec_mask is not None
    mask = np.ascontiguousarray(rec_mask) if use else np.ones((1, 1), dtype=hs.dtype)
    return _lstm_backward(
        np.ascontiguousarray(dhs), hs, cs, gates, np.ascontiguousarray(U), mask, use
    )


@nb.njit(**njit_kwargs)
def _maxpool_forward(X, pool, stride):
    n, L, c = X.shape
    lout = (L - pool) // stride + 1
    out = np.empty((n, lout, c), dtype=X.dtype)
    arg = np.empty((n, lout, c), dtype=np.int64)
    for b in range(n):
        for j in range(lout):
            s = j * stride
            for ch in range(c):
                best = X[b, s, ch]
                pos = s
                for q in range(s + 1, s + pool):
                    v = X[b, q, ch]
                    if v > best:
                        best = v
                        pos = q
                out[b, j, ch] = best
                arg[b, j, ch] = pos
    return out, arg


def maxpool_forward(X, pool, stride):
    return _maxpool_forward(np.ascontiguousarray(X), pool, stride)


@nb.njit(**njit_kwargs)
def maxpool_backward(g, argidx, length):
    n, lout, c = g.shape
    dX = np.zeros((n, length, c), dtype=g.dtype)
    for b in range(n):
        for j in range(lout):
            for ch in range(c):
                dX[b, argidx[b, j, ch], ch] += g[b, j, ch]
    return dX


@nb.njit(**njit_kwargs)
def _scatter_add_rows(target, indices, rows):
    d = target.shape[1]
    for r in range(indices.shape[0]):
        row = indices[r]
        for j in range(d):
            target[row, j] += rows[r, j]


def scatter_add_rows(target, indices, rows):
    d = target.shape[1]
    _scatter_add_rows(target, np.ascontiguousarray(indices).reshape(-1),
                      np.ascontiguousarray(rows).reshape(-1, d))


@nb.njit(**njit_kwargs)
def _depthwise_forward(X, D):
    n, L, c = X.shape
    k = D.shape[0]
    lout = L - k + 1
    out = np.zeros((n, lout, c), dtype=X.dtype)
    for b in range(n):
        for t in range(lout):
            for tau in range(k):
                for ch in range(c):
                    out[b, t, ch] += X[b, t + tau, ch] * D[tau, ch]
    return out


def depthwise_forward(X, D):
    return _depthwise_forward(np.ascontiguousarray(X), np.ascontiguousarray(D))


@nb.njit(**njit_kwargs)
def _depthwise_backward(g, X, D):
    n, lout, c = g.shape
    k = D.shape[0]
    dX = np.zeros_like(X)
    dD = np.zeros_like(D)
    for b in range(n):
        for t in range(lout):
            for tau in range(k):
                for ch in range(c):
                    dX[b, t + tau, ch] += g[b, t, ch] * D[tau, ch]
                    dD[tau, ch] += g[b, t, ch] * X[b, t + tau, ch]
    return dX, dD


def depthwise_backward(g, X, D):
    return _depthwise_backward(
        np.ascontiguousarray(g), np.ascontiguousarray(X), np.ascontiguousarray(D)
    )
