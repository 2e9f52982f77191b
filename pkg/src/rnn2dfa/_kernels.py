"""Numba-compiled inner loops for training and bulk inference.

Same arithmetic as the numpy reference in ``rnn``; the tests assert exact
agreement.  All arrays are float64; noise enters as pre-drawn standard
normals scaled by nu inside the kernel.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _step(W_xh, W_hh, b_h, W_hy, b_y, h, x, noise_row, nu):
    """One forward step; returns (h_new, probs)."""
    z = W_xh[:, x] + np.dot(W_hh, h) + b_h
    if nu > 0.0:
        z = z + h * (nu * noise_row)
    h_new = np.tanh(z)
    logits = np.dot(W_hy, h_new) + b_y
    m = logits.max()
    e = np.exp(logits - m)
    probs = e / e.sum()
    return h_new, probs


@njit(cache=True)
def run_sequence(W_xh, W_hh, b_h, W_hy, b_y, xs, h0, record):
    """Noise-free forward pass; preds[t] = -1 from the first non-finite step."""
    n = xs.shape[0]
    n_hidden = W_xh.shape[0]
    preds = np.empty(n, dtype=np.int64)
    rec = np.empty((n if record else 1, n_hidden))
    h = h0.copy()
    dummy = np.zeros(n_hidden)
    for t in range(n):
        h, probs = _step(W_xh, W_hh, b_h, W_hy, b_y, h, xs[t], dummy, 0.0)
        if not np.isfinite(h.sum()):
            preds[t:] = -1
            break
        preds[t] = np.argmax(probs)
        if record:
            rec[t] = h
    return preds, h, rec


@njit(cache=True)
def run_sequence_noise(W_xh, W_hh, b_h, W_hy, b_y, xs, noise, nu):
    """Forward pass with live noise; used for the noise-active accuracy column."""
    n = xs.shape[0]
    preds = np.empty(n, dtype=np.int64)
    h = np.zeros(W_xh.shape[0])
    for t in range(n):
        h, probs = _step(W_xh, W_hh, b_h, W_hy, b_y, h, xs[t], noise[t], nu)
        if not np.isfinite(h.sum()):
            preds[t:] = -1
            break
        preds[t] = np.argmax(probs)
    return preds


@njit(cache=True)
def train_epoch(
    W_xh, W_hh, b_h, W_hy, b_y,
    xs, targets, noise, nu,
    bptt_steps, lr, clip, l1,
):
    """One stateful epoch: consecutive windows, one clipped SGD update each.

    Returns (loss_sum, n_correct, n_windows, ok); weights updated in place.
    ok is False when a non-finite loss aborted the epoch.
    """
    n = xs.shape[0]
    n_hidden = W_xh.shape[0]
    n_in = W_xh.shape[1]
    n_out = W_hy.shape[0]
    s = bptt_steps

    hs = np.zeros((s + 1, n_hidden))
    ys = np.zeros((s, n_out))
    gW_xh = np.zeros((n_hidden, n_in))
    gW_hh = np.zeros((n_hidden, n_hidden))
    gb_h = np.zeros(n_hidden)
    gW_hy = np.zeros((n_out, n_hidden))
    gb_y = np.zeros(n_out)

    h = np.zeros(n_hidden)
    loss_sum = 0.0
    n_correct = 0
    n_windows = 0
    start = 0
    while start < n:
        T = min(s, n - start)
        # forward
        hs[0] = h
        ce = 0.0
        for t in range(T):
            x = xs[start + t]
            z = W_xh[:, x] + np.dot(W_hh, hs[t]) + b_h
            if nu > 0.0:
                z = z + hs[t] * (nu * noise[start + t])
            hn = np.tanh(z)
            hs[t + 1] = hn
            logits = np.dot(W_hy, hn) + b_y
            m = logits.max()
            e = np.exp(logits - m)
            probs = e / e.sum()
            ys[t] = probs
            tgt = targets[start + t]
            ce -= np.log(probs[tgt])
            if np.argmax(probs) == tgt:
                n_correct += 1
        ce /= T
        reg = l1 * (np.abs(W_xh).sum() + np.abs(W_hh).sum() + np.abs(W_hy).sum())
        loss = ce + reg
        if not np.isfinite(loss):
            return loss_sum, n_correct, n_windows, False
        loss_sum += loss
        n_windows += 1

        # backward
        gW_xh[:] = 0.0
        gW_hh[:] = 0.0
        gb_h[:] = 0.0
        gW_hy[:] = 0.0
        gb_y[:] = 0.0
        dh_next = np.zeros(n_hidden)
        invT = 1.0 / T
        for t in range(T - 1, -1, -1):
            x = xs[start + t]
            dy = ys[t].copy()
            dy[targets[start + t]] -= 1.0
            dy *= invT
            for i in range(n_out):
                gb_y[i] += dy[i]
                for j in range(n_hidden):
                    gW_hy[i, j] += dy[i] * hs[t + 1, j]
            dh = np.dot(W_hy.T, dy) + dh_next
            dz = (1.0 - hs[t + 1] ** 2) * dh
            for i in range(n_hidden):
                gW_xh[i, x] += dz[i]
                gb_h[i] += dz[i]
                for j in range(n_hidden):
                    gW_hh[i, j] += dz[i] * hs[t, j]
            dh_next = np.dot(W_hh.T, dz)
            if nu > 0.0:
                dh_next = dh_next + (nu * noise[start + t]) * dz

        # L1 subgradient on the weight matrices, clip, update
        for i in range(n_hidden):
            for j in range(n_in):
                g = gW_xh[i, j] + l1 * np.sign(W_xh[i, j])
                g = min(max(g, -clip), clip)
                W_xh[i, j] -= lr * g
            for j in range(n_hidden):
                g = gW_hh[i, j] + l1 * np.sign(W_hh[i, j])
                g = min(max(g, -clip), clip)
                W_hh[i, j] -= lr * g
            g = min(max(gb_h[i], -clip), clip)
            b_h[i] -= lr * g
        for i in range(n_out):
            for j in range(n_hidden):
                g = gW_hy[i, j] + l1 * np.sign(W_hy[i, j])
                g = min(max(g, -clip), clip)
                W_hy[i, j] -= lr * g
            g = min(max(gb_y[i], -clip), clip)
            b_y[i] -= lr * g

        h = hs[T].copy()
        start += T
    return loss_sum, n_correct, n_windows, True
