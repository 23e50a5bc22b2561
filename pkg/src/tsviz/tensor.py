"""Raw numeric kernels on float64 arrays.

Images use the (height, width, channels) layout.  Every function here is a
pure function of its inputs; the ``*_backward`` helpers are the vector-Jacobian
products used by :mod:`tsviz.autodiff`.
"""
import numpy as np

from .errors import DimensionError

DTYPE = np.float64


def as_tensor(x):
    """Return ``x`` as a contiguous float64 array of rank 1 to 4."""
    a = np.ascontiguousarray(x, dtype=DTYPE)
    if not 1 <= a.ndim <= 4:
        raise DimensionError(f"tensor rank must be 1..4, got {a.ndim}", axis="rank")
    return a


def _check_rank(x, rank, name):
    if x.ndim != rank:
        raise DimensionError(f"{name}: expected rank {rank}, got shape {x.shape}", axis="rank")


def _pad_amount(kh, kw, padding):
    if padding == "same":
        return kh // 2, kw // 2
    if padding == "valid":
        return 0, 0
    raise ValueError(f"unknown padding {padding!r}")


def _im2col(x, kh, kw, ph, pw):
    if ph or pw:
        x = np.pad(x, ((ph, ph), (pw, pw), (0, 0)))
    oh, ow = x.shape[0] - kh + 1, x.shape[1] - kw + 1
    # column layout is (kh, kw, c), matching k.reshape(kh * kw * c, f)
    cols = np.concatenate([x[i:i + oh, j:j + ow, :] for i in range(kh) for j in range(kw)], axis=2)
    return cols.reshape(oh * ow, -1), oh, ow


def _check_conv(x, k, b):
    _check_rank(x, 3, "conv2d input")
    _check_rank(k, 4, "conv2d kernels")
    kh, kw, c, f = k.shape
    if kh % 2 == 0 or kw % 2 == 0:
        raise DimensionError(f"conv2d: kernel extents must be odd, got {kh}x{kw}", axis="kernel")
    if x.shape[2] != c:
        raise DimensionError(
            f"conv2d: input has {x.shape[2]} channels, kernels expect {c}", axis="channels")
    if b.shape != (f,):
        raise DimensionError(f"conv2d: bias shape {b.shape} != ({f},)", axis="filters")


def conv2d(x, k, b, padding="same"):
    """2-D cross-correlation of ``x[h,w,c]`` with ``k[kh,kw,c,f]`` plus bias."""
    _check_conv(x, k, b)
    kh, kw, c, f = k.shape
    ph, pw = _pad_amount(kh, kw, padding)
    if x.shape[0] + 2 * ph < kh or x.shape[1] + 2 * pw < kw:
        raise DimensionError("conv2d: kernel larger than input", axis="spatial")
    cols, oh, ow = _im2col(x, kh, kw, ph, pw)
    return (cols @ k.reshape(kh * kw * c, f) + b).reshape(oh, ow, f)


def conv2d_backward(gout, x, k, padding="same", need_input=True):
    """Gradients of :func:`conv2d` with respect to input, kernels and bias.

    With ``need_input=False`` the input gradient is returned as ``None``.
    """
    kh, kw, c, f = k.shape
    ph, pw = _pad_amount(kh, kw, padding)
    cols, oh, ow = _im2col(x, kh, kw, ph, pw)
    g = gout.reshape(oh * ow, f)
    kmat = k.reshape(kh * kw * c, f)
    dk = (cols.T @ g).reshape(kh, kw, c, f)
    db = g.sum(axis=0)
    if not need_input:
        return None, np.ascontiguousarray(dk), db
    dcols = (g @ kmat.T).reshape(oh, ow, kh, kw, c)
    h, w = x.shape[:2]
    dxp = np.zeros((h + 2 * ph, w + 2 * pw, c), dtype=DTYPE)
    for i in range(kh):
        for j in range(kw):
            dxp[i:i + oh, j:j + ow, :] += dcols[:, :, i, j, :]
    dx = dxp[ph:ph + h, pw:pw + w, :]
    return np.ascontiguousarray(dx), np.ascontiguousarray(dk), db


def maxpool2x2(x):
    """2x2 max pooling with stride 2.

    Returns the pooled tensor and, per output cell, the index (0..3, row-major
    within the window) of the element that was selected.  Ties resolve to the
    lowest index.
    """
    _check_rank(x, 3, "maxpool2x2 input")
    h, w, c = x.shape
    if h % 2 or w % 2:
        raise DimensionError(f"maxpool2x2: spatial extents must be even, got {h}x{w}",
                             axis="height" if h % 2 else "width")
    win = x.reshape(h // 2, 2, w // 2, 2, c).transpose(0, 2, 4, 1, 3).reshape(h // 2, w // 2, c, 4)
    idx = np.argmax(win, axis=-1)
    out = np.take_along_axis(win, idx[..., None], axis=-1)[..., 0]
    return out, idx


def maxpool2x2_backward(gout, idx):
    oh, ow, c = gout.shape
    g = np.zeros((oh, ow, c, 4), dtype=DTYPE)
    np.put_along_axis(g, idx[..., None], gout[..., None], axis=-1)
    return g.reshape(oh, ow, c, 2, 2).transpose(0, 3, 1, 4, 2).reshape(2 * oh, 2 * ow, c)


def upsample2x(x):
    """Nearest-neighbour upsampling: each pixel becomes a 2x2 block."""
    _check_rank(x, 3, "upsample2x input")
    return np.repeat(np.repeat(x, 2, axis=0), 2, axis=1)


def upsample2x_backward(gout):
    h, w, c = gout.shape
    return gout.reshape(h // 2, 2, w // 2, 2, c).sum(axis=(1, 3))


def avgpool2x2(x):
    h, w, c = x.shape
    return x.reshape(h // 2, 2, w // 2, 2, c).mean(axis=(1, 3))


def concat_channels(a, b):
    """Stack ``a`` then ``b`` along the channel axis."""
    _check_rank(a, 3, "concat_channels first operand")
    _check_rank(b, 3, "concat_channels second operand")
    if a.shape[0] != b.shape[0]:
        raise DimensionError(f"concat_channels: heights {a.shape[0]} != {b.shape[0]}", axis="height")
    if a.shape[1] != b.shape[1]:
        raise DimensionError(f"concat_channels: widths {a.shape[1]} != {b.shape[1]}", axis="width")
    return np.concatenate([a, b], axis=2)


def dense(x, w, b):
    _check_rank(x, 1, "dense input")
    _check_rank(w, 2, "dense weights")
    if w.shape[0] != x.shape[0]:
        raise DimensionError(f"dense: input length {x.shape[0]} != weight rows {w.shape[0]}",
                             axis="in_features")
    if b.shape != (w.shape[1],):
        raise DimensionError(f"dense: bias shape {b.shape} != ({w.shape[1]},)", axis="out_features")
    return x @ w + b


def relu(x):
    return np.maximum(x, 0.0)


def sigmoid(x):
    # branch-free stable form
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def softmax(z):
    z = np.asarray(z, dtype=DTYPE)
    e = np.exp(z - z.max())
    return e / e.sum()


def log_softmax(z):
    z = np.asarray(z, dtype=DTYPE)
    s = z - z.max()
    return s - np.log(np.exp(s).sum())


def flatten(x):
    return x.reshape(-1)
