"""Pure-numpy reference kernels for recurrent layer passes.

Each kernel processes a whole (batch, time, features) sequence for one
layer in one direction. Weight layout per cell type:

  simple: W (H, H+I), rows act on [h_prev; x]
  gru:    W (3H, H+I), row blocks [update z; reset r; candidate n];
          the candidate block acts on [r*h_prev; x]
  lstm:   W (4H, H+I), row blocks [input i; forget f; cell g; output o]

Backward kernels take the gradient w.r.t. the full hidden sequence and
return (dW, db, dX), accumulating through time.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def simple_forward(W: np.ndarray, b: np.ndarray, X: np.ndarray):
    B, T, I = X.shape
    H = W.shape[0]
    Hseq = np.zeros((B, T, H))
    h = np.zeros((B, H))
    for t in range(T):
        hx = np.concatenate([h, X[:, t]], axis=1)
        h = np.tanh(hx @ W.T + b)
        Hseq[:, t] = h
    return (Hseq,)


def simple_backward(W, b, X, cache, dH):
    (Hseq,) = cache
    B, T, I = X.shape
    H = W.shape[0]
    dW = np.zeros_like(W)
    db = np.zeros_like(b)
    dX = np.zeros_like(X)
    carry = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        h = Hseq[:, t]
        h_prev = Hseq[:, t - 1] if t > 0 else np.zeros((B, H))
        dh = dH[:, t] + carry
        da = dh * (1.0 - h * h)
        hx = np.concatenate([h_prev, X[:, t]], axis=1)
        dW += da.T @ hx
        db += da.sum(axis=0)
        dhx = da @ W
        carry = dhx[:, :H]
        dX[:, t] = dhx[:, H:]
    return dW, db, dX


def gru_forward(W, b, X):
    B, T, I = X.shape
    H = W.shape[0] // 3
    Wz, Wr, Wn = W[:H], W[H : 2 * H], W[2 * H :]
    bz, br, bn = b[:H], b[H : 2 * H], b[2 * H :]
    Hseq = np.zeros((B, T, H))
    Z = np.zeros((B, T, H))
    R = np.zeros((B, T, H))
    N = np.zeros((B, T, H))
    h = np.zeros((B, H))
    for t in range(T):
        x = X[:, t]
        hx = np.concatenate([h, x], axis=1)
        z = _sigmoid(hx @ Wz.T + bz)
        r = _sigmoid(hx @ Wr.T + br)
        rhx = np.concatenate([r * h, x], axis=1)
        n = np.tanh(rhx @ Wn.T + bn)
        h = (1.0 - z) * h + z * n
        Z[:, t], R[:, t], N[:, t], Hseq[:, t] = z, r, n, h
    return Hseq, Z, R, N


def gru_backward(W, b, X, cache, dH):
    Hseq, Z, R, N = cache
    B, T, I = X.shape
    H = W.shape[0] // 3
    Wz, Wr, Wn = W[:H], W[H : 2 * H], W[2 * H :]
    dW = np.zeros_like(W)
    db = np.zeros_like(b)
    dX = np.zeros_like(X)
    carry = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        x = X[:, t]
        h_prev = Hseq[:, t - 1] if t > 0 else np.zeros((B, H))
        z, r, n = Z[:, t], R[:, t], N[:, t]
        dh = dH[:, t] + carry
        dz = dh * (n - h_prev)
        dn = dh * z
        dh_prev = dh * (1.0 - z)
        da_n = dn * (1.0 - n * n)
        rhx = np.concatenate([r * h_prev, x], axis=1)
        dW[2 * H :] += da_n.T @ rhx
        db[2 * H :] += da_n.sum(axis=0)
        drh = da_n @ Wn[:, :H]
        dX[:, t] += da_n @ Wn[:, H:]
        dr = drh * h_prev
        dh_prev += drh * r
        da_z = dz * z * (1.0 - z)
        da_r = dr * r * (1.0 - r)
        hx = np.concatenate([h_prev, x], axis=1)
        dW[:H] += da_z.T @ hx
        db[:H] += da_z.sum(axis=0)
        dW[H : 2 * H] += da_r.T @ hx
        db[H : 2 * H] += da_r.sum(axis=0)
        dh_prev += da_z @ Wz[:, :H] + da_r @ Wr[:, :H]
        dX[:, t] += da_z @ Wz[:, H:] + da_r @ Wr[:, H:]
        carry = dh_prev
    return dW, db, dX


def lstm_forward(W, b, X):
    B, T, I = X.shape
    H = W.shape[0] // 4
    Hseq = np.zeros((B, T, H))
    C = np.zeros((B, T, H))
    GI = np.zeros((B, T, H))
    GF = np.zeros((B, T, H))
    GG = np.zeros((B, T, H))
    GO = np.zeros((B, T, H))
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    for t in range(T):
        hx = np.concatenate([h, X[:, t]], axis=1)
        a = hx @ W.T + b
        gi = _sigmoid(a[:, :H])
        gf = _sigmoid(a[:, H : 2 * H])
        gg = np.tanh(a[:, 2 * H : 3 * H])
        go = _sigmoid(a[:, 3 * H :])
        c = gf * c + gi * gg
        h = go * np.tanh(c)
        Hseq[:, t], C[:, t] = h, c
        GI[:, t], GF[:, t], GG[:, t], GO[:, t] = gi, gf, gg, go
    return Hseq, C, GI, GF, GG, GO


def lstm_backward(W, b, X, cache, dH):
    Hseq, C, GI, GF, GG, GO = cache
    B, T, I = X.shape
    H = W.shape[0] // 4
    dW = np.zeros_like(W)
    db = np.zeros_like(b)
    dX = np.zeros_like(X)
    carry_h = np.zeros((B, H))
    carry_c = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        h_prev = Hseq[:, t - 1] if t > 0 else np.zeros((B, H))
        c_prev = C[:, t - 1] if t > 0 else np.zeros((B, H))
        gi, gf, gg, go = GI[:, t], GF[:, t], GG[:, t], GO[:, t]
        tc = np.tanh(C[:, t])
        dh = dH[:, t] + carry_h
        do = dh * tc
        dc = dh * go * (1.0 - tc * tc) + carry_c
        di = dc * gg
        dg = dc * gi
        df = dc * c_prev
        carry_c = dc * gf
        da = np.concatenate(
            [
                di * gi * (1.0 - gi),
                df * gf * (1.0 - gf),
                dg * (1.0 - gg * gg),
                do * go * (1.0 - go),
            ],
            axis=1,
        )
        hx = np.concatenate([h_prev, X[:, t]], axis=1)
        dW += da.T @ hx
        db += da.sum(axis=0)
        dhx = da @ W
        carry_h = dhx[:, :H]
        dX[:, t] = dhx[:, H:]
    return dW, db, dX
