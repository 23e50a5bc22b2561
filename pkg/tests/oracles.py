"""Brute-force reference implementations used by the tests.

These are deliberately written as plain loops and share no code with
``tsviz.tensor``.
"""
import numpy as np


def conv2d_naive(x, k, b, padding="same"):
    h, w, c = x.shape
    kh, kw, _, f = k.shape
    if padding == "same":
        ph, pw = kh // 2, kw // 2
        oh, ow = h, w
    else:
        ph = pw = 0
        oh, ow = h - kh + 1, w - kw + 1
    out = np.zeros((oh, ow, f))
    for i in range(oh):
        for j in range(ow):
            for o in range(f):
                acc = b[o]
                for di in range(kh):
                    for dj in range(kw):
                        y, xx = i + di - ph, j + dj - pw
                        if 0 <= y < h and 0 <= xx < w:
                            for ch in range(c):
                                acc += x[y, xx, ch] * k[di, dj, ch, o]
                out[i, j, o] = acc
    return out


def maxpool_naive(x):
    h, w, c = x.shape
    out = np.zeros((h // 2, w // 2, c))
    arg = np.zeros((h // 2, w // 2, c), dtype=int)
    for i in range(h // 2):
        for j in range(w // 2):
            for ch in range(c):
                best, bi = -np.inf, -1
                for n, (di, dj) in enumerate(((0, 0), (0, 1), (1, 0), (1, 1))):
                    v = x[2 * i + di, 2 * j + dj, ch]
                    if v > best:
                        best, bi = v, n
                out[i, j, ch] = best
                arg[i, j, ch] = bi
    return out, arg


def upsample_naive(x):
    h, w, c = x.shape
    out = np.zeros((2 * h, 2 * w, c))
    for i in range(2 * h):
        for j in range(2 * w):
            out[i, j] = x[i // 2, j // 2]
    return out


def dense_naive(x, w, b):
    out = np.array(b, dtype=float)
    for j in range(w.shape[1]):
        for i in range(w.shape[0]):
            out[j] += x[i] * w[i, j]
    return out


def central_difference(fn, x, step=1e-5):
    """Gradient of scalar ``fn`` at array ``x`` by central differences (x restored)."""
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        old = x[idx]
        x[idx] = old + step
        up = fn()
        x[idx] = old - step
        down = fn()
        x[idx] = old
        g[idx] = (up - down) / (2 * step)
    return g


def erase_naive(image, region):
    """Step-by-step 3x3 stamping, one pixel at a time."""
    out = image.copy()
    h, w = region.shape
    for y in range(h):
        for x in range(w):
            if region[y, x]:
                for dy in (-1, 0, 1):
                    for dx in (-1, 0, 1):
                        if 0 <= y + dy < h and 0 <= x + dx < w:
                            out[y + dy, x + dx, :] = 0.0
    return out


def perturbation_naive(image, heat, f):
    """Algorithm-style simulation with an explicit decreasing bin bound.

    Bin membership is tested with integer arithmetic on the bound index so
    that no floating accumulation of the 1/10 decrement enters the test.
    """
    X = image.copy()
    f0 = f(X)
    pc = [(0, f0)]
    total = 0.0
    for j in range(1, 12):
        region = np.zeros(heat.shape, dtype=bool)
        for (y, x), v in np.ndenumerate(heat):
            if j < 11:
                hi = (11 - j) / 10
                lo = (10 - j) / 10
                region[y, x] = lo < v <= hi
            else:
                region[y, x] = v == 0
        X = erase_naive(X, region)
        fj = f(X)
        pc.append((j, fj))
        total += f0 - fj
    return pc, total / 11
