"""Slow reference implementations for verification.

Nothing here imports the production numerics; every routine is a direct
loop over the defining sums, evaluated in float64.
"""

from __future__ import annotations

import cmath
import math

import numpy as np


def fd_gradient(f, point, h: float = 1e-5) -> np.ndarray:
    """Central differences ``(f(p + h e_i) - f(p - h e_i)) / 2h`` for every coordinate."""
    p = np.array(point, dtype=np.float64)
    flat = p.reshape(-1)
    grad = np.zeros_like(flat)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = f(p)
        flat[i] = orig - h
        down = f(p)
        flat[i] = orig
        grad[i] = (up - down) / (2 * h)
    return grad.reshape(p.shape)


def naive_dft(signal) -> np.ndarray:
    x = [complex(v) for v in np.asarray(signal).ravel()]
    n = len(x)
    return np.array([
        sum(x[j] * cmath.exp(-2j * math.pi * j * k / n) for j in range(n))
        for k in range(n)
    ])


# -- layer references ------------------------------------------------------------

def naive_conv1d(x, w, b=None):
    """'Same' zero-padded stride-1 cross-correlation of one (in, L) map."""
    c_out, c_in, k = w.shape
    length = x.shape[1]
    pad = k // 2
    y = np.zeros((c_out, length))
    for o in range(c_out):
        for j in range(length):
            acc = 0.0 if b is None else float(b[o])
            for i in range(c_in):
                for m in range(k):
                    src = j + m - pad
                    if 0 <= src < length:
                        acc += w[o, i, m] * x[i, src]
            y[o, j] = acc
    return y


def naive_convtranspose1d(x, w, stride, b=None):
    """Overlap-add: every input sample scatters a scaled kernel copy."""
    c_in, c_out, k = w.shape
    length = x.shape[1]
    y = np.zeros((c_out, (length - 1) * stride + k))
    for i in range(c_in):
        for o in range(c_out):
            for j in range(length):
                for m in range(k):
                    y[o, j * stride + m] += x[i, j] * w[i, o, m]
    if b is not None:
        y += np.asarray(b, dtype=np.float64)[:, None]
    return y


def naive_batchnorm_train(xs, gamma, beta, eps):
    """``xs``: list of (ch, L) maps; statistics pooled over all of them."""
    ch = xs[0].shape[0]
    out = [np.zeros_like(x, dtype=np.float64) for x in xs]
    for c in range(ch):
        values = [v for x in xs for v in x[c]]
        mean = sum(values) / len(values)
        var = sum((v - mean) ** 2 for v in values) / len(values)
        for x, y in zip(xs, out):
            for j in range(x.shape[1]):
                y[c, j] = gamma[c] * (x[c, j] - mean) / math.sqrt(var + eps) + beta[c]
    return out


def naive_batchnorm_infer(x, gamma, beta, mean, var, eps):
    y = np.zeros_like(x, dtype=np.float64)
    for c in range(x.shape[0]):
        for j in range(x.shape[1]):
            y[c, j] = gamma[c] * (x[c, j] - mean[c]) / math.sqrt(var[c] + eps) + beta[c]
    return y


def naive_relu(x):
    return np.array([[v if v > 0 else 0.0 for v in row] for row in x])


def naive_maxpool(x, pool):
    return np.array([[max(row[j:j + pool]) for j in range(0, len(row), pool)] for row in x])


def naive_forward(params, config, batch, mode="infer"):
    """Reference U-Net forward on a (batch, c, t) array, one sample map at a time.

    ``mode="train"`` pools batchnorm statistics across the batch.
    """
    maps = [np.asarray(s, dtype=np.float64) for s in batch]
    eps = config.bn_eps

    def cbr(name, xs):
        zs = [naive_conv1d(x, params[name + ".conv.weight"], params[name + ".conv.bias"]) for x in xs]
        g, b = params[name + ".bn.gamma"], params[name + ".bn.beta"]
        if mode == "train":
            hs = naive_batchnorm_train(zs, g, b, eps)
        else:
            hs = [naive_batchnorm_infer(z, g, b, params[name + ".bn.running_mean"],
                                        params[name + ".bn.running_var"], eps) for z in zs]
        return [naive_relu(h) for h in hs]

    skips = []
    h = maps
    for i in range(config.depth):
        h = cbr(f"enc{i}.cbr0", h)
        h = cbr(f"enc{i}.cbr1", h)
        skips.append(h)
        h = [naive_maxpool(x, config.pool_size) for x in h]
    h = cbr("bottleneck.cbr0", h)
    h = cbr("bottleneck.cbr1", h)
    for i in reversed(range(config.depth)):
        up = [naive_convtranspose1d(x, params[f"dec{i}.up.weight"], config.pool_size,
                                    params[f"dec{i}.up.bias"]) for x in h]
        h = [np.vstack([u, s]) for u, s in zip(up, skips[i])]
        h = cbr(f"dec{i}.cbr0", h)
        h = cbr(f"dec{i}.cbr1", h)
    out = [naive_conv1d(x, params["head.weight"], params["head.bias"]) for x in h]
    return np.stack(out)


# -- loss references ---------------------------------------------------------------

def naive_mse(y, x):
    y, x = np.asarray(y, dtype=np.float64), np.asarray(x, dtype=np.float64)
    total, n = 0.0, 0
    for a, b in zip(y.ravel(), x.ravel()):
        total += (a - b) ** 2
        n += 1
    return total / n


def naive_diff(row, order):
    row = list(row)
    for _ in range(order):
        row = [row[j + 1] - row[j] for j in range(len(row) - 1)]
    return row


def naive_difference_loss(y, x, order):
    y, x = np.asarray(y, dtype=np.float64), np.asarray(x, dtype=np.float64)
    total, n = 0.0, 0
    for ry, rx in zip(y.reshape(-1, y.shape[-1]), x.reshape(-1, x.shape[-1])):
        for a, b in zip(naive_diff(ry, order), naive_diff(rx, order)):
            total += (a - b) ** 2
            n += 1
    return total / n


def naive_psd_zscored(row, fs, band=(1.0, 50.0)):
    """Direct-DFT periodogram of one channel, band-limited and z-scored."""
    t = len(row)
    spectrum = naive_dft(row)
    power = [abs(spectrum[k]) ** 2 / (fs * t) for k in range(t // 2 + 1)
             if band[0] - 1e-9 <= k * fs / t <= band[1] + 1e-9]
    mean = sum(power) / len(power)
    std = math.sqrt(sum((p - mean) ** 2 for p in power) / len(power))
    return np.array([(p - mean) / std for p in power])


def naive_loss_freq(y, x, fs):
    y, x = np.asarray(y, dtype=np.float64), np.asarray(x, dtype=np.float64)
    total, n = 0.0, 0
    for ry, rx in zip(y.reshape(-1, y.shape[-1]), x.reshape(-1, x.shape[-1])):
        for a, b in zip(naive_psd_zscored(ry, fs), naive_psd_zscored(rx, fs)):
            total += (a - b) ** 2
            n += 1
    return total / n


def naive_snr_db(y, x, cap=100.0):
    y, x = np.asarray(y, dtype=np.float64), np.asarray(x, dtype=np.float64)
    vals = []
    for ry, rx in zip(y, x):
        sig = sum(v * v for v in rx)
        res = sum((a - b) ** 2 for a, b in zip(ry, rx))
        if res == 0:
            vals.append(cap)
        elif sig == 0:
            vals.append(-cap)
        else:
            vals.append(max(-cap, min(cap, 10 * math.log10(sig / res))))
    return sum(vals) / len(vals)


# -- mixture and optimizer references ---------------------------------------------

def dense_backprojection(A, S, keep):
    """``A'`` @ ``S`` where ``A'`` zeroes every mixing column not in ``keep``."""
    A = np.array(A, dtype=np.float64)
    mask = np.zeros(A.shape[1], dtype=bool)
    mask[list(keep)] = True
    A[:, ~mask] = 0.0
    c, t = A.shape[0], S.shape[1]
    out = np.zeros((c, t))
    for i in range(c):
        for j in range(t):
            out[i, j] = sum(A[i, k] * S[k, j] for k in range(A.shape[1]))
    return out


def scalar_adam(theta, grads, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """Trajectory of one scalar parameter under Adam for a list of gradients."""
    m = v = 0.0
    out = []
    for step, g in enumerate(grads, start=1):
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        m_hat = m / (1 - beta1 ** step)
        v_hat = v / (1 - beta2 ** step)
        theta = theta - lr * m_hat / (math.sqrt(v_hat) + eps)
        out.append(theta)
    return out
