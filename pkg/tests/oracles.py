"""Reference implementations written as plain loops straight from the definitions."""
import math

import numpy as np


def loop_conv1d(x, K, b):
    n, L, c_in = x.shape
    k, _, c_out = K.shape
    out = np.zeros((n, L - k + 1, c_out))
    for s in range(n):
        for t in range(L - k + 1):
            for o in range(c_out):
                acc = b[o]
                for tau in range(k):
                    for c in range(c_in):
                        acc += x[s, t + tau, c] * K[tau, c, o]
                out[s, t, o] = acc
    return out


def _sig(v):
    return 1.0 / (1.0 + math.exp(-v))


def loop_lstm(x, W, U, b):
    """Scalar LSTM, gates ordered i, f, g, o. Returns all hidden states."""
    n, L, c_in = x.shape
    h = U.shape[0]
    out = np.zeros((n, L, h))
    for s in range(n):
        hp, cp = [0.0] * h, [0.0] * h
        for t in range(L):
            z = [b[j] + sum(x[s, t, c] * W[c, j] for c in range(c_in))
                 + sum(hp[r] * U[r, j] for r in range(h)) for j in range(4 * h)]
            hn, cn = [], []
            for u in range(h):
                i, f = _sig(z[u]), _sig(z[h + u])
                g, o = math.tanh(z[2 * h + u]), _sig(z[3 * h + u])
                cn.append(f * cp[u] + i * g)
                hn.append(o * math.tanh(cn[u]))
            hp, cp = hn, cn
            out[s, t] = hp
    return out


def loop_maxpool(x, pool, stride):
    n, L, c = x.shape
    lout = (L - pool) // stride + 1
    return np.array([[[max(x[s, t * stride + j, ch] for j in range(pool)) for ch in range(c)]
                      for t in range(lout)] for s in range(n)])
