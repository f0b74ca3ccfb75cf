"""A desk-scale fully-convolutional detector with hand-rolled forward and
backward passes.

Structure: a plain conv stem producing features at 1/4..1/32 of the input,
a U-shaped merging branch (2x nearest-neighbor unpool, channel concat,
1x1 bottleneck, 3x3 fuse), a final 3x3, and 1x1 output heads.  Tensors are
(batch, channels, height, width) float32 throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .decode import QUAD, RBOX, DenseOutputs
from .errors import BadShape, MissingCache

HALF_PI = math.pi / 2.0


# ---------------------------------------------------------------- layers


def _im2col(x: np.ndarray, k: int) -> np.ndarray:
    """(B, C, H, W) -> (B, C*k*k, H*W) patches under same-padding."""
    b, c, h, w = x.shape
    p = (k - 1) // 2
    xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
    cols = np.empty((b, c, k * k, h, w), dtype=x.dtype)
    idx = 0
    for di in range(k):
        for dj in range(k):
            cols[:, :, idx] = xp[:, :, di:di + h, dj:dj + w]
            idx += 1
    return cols.reshape(b, c * k * k, h * w)


def _col2im(dcols: np.ndarray, shape, k: int) -> np.ndarray:
    """Adjoint of _im2col: scatter-add patches back into the image."""
    b, c, h, w = shape
    p = (k - 1) // 2
    dxp = np.zeros((b, c, h + 2 * p, w + 2 * p), dtype=dcols.dtype)
    d = dcols.reshape(b, c, k * k, h, w)
    idx = 0
    for di in range(k):
        for dj in range(k):
            dxp[:, :, di:di + h, dj:dj + w] += d[:, :, idx]
            idx += 1
    return dxp[:, :, p:p + h, p:p + w] if p else dxp


def conv2d_forward(x, w, b):
    """Same-padded convolution; returns (y, cache)."""
    cout, cin, k, _ = w.shape
    bsz, c, h, wd = x.shape
    if c != cin:
        raise BadShape(f"conv expects {cin} input channels, got {c}")
    if k == 1:
        y = np.tensordot(w.reshape(cout, cin), x, axes=([1], [1]))
        y = np.moveaxis(y, 0, 1) + b[None, :, None, None]
        return y, (x, None)
    cols = _im2col(x, k)
    y = np.tensordot(w.reshape(cout, -1), cols, axes=([1], [1]))  # (Cout, B, HW)
    y = np.moveaxis(y, 0, 1).reshape(bsz, cout, h, wd) + b[None, :, None, None]
    return y, (x, cols)


def conv2d_backward(dy, w, cache):
    """Returns (dx, dw, db)."""
    x, cols = cache
    cout, cin, k, _ = w.shape
    bsz, _, h, wd = x.shape
    dyr = dy.reshape(bsz, cout, h * wd)
    db = dy.sum(axis=(0, 2, 3))
    if k == 1:
        xr = x.reshape(bsz, cin, h * wd)
        dw = np.tensordot(dyr, xr, axes=([0, 2], [0, 2])).reshape(w.shape)
        dx = np.tensordot(w.reshape(cout, cin), dyr, axes=([0], [1]))
        dx = np.moveaxis(dx, 0, 1).reshape(x.shape)
        return dx, dw, db
    dw = np.tensordot(dyr, cols, axes=([0, 2], [0, 2])).reshape(w.shape)
    dcols = np.tensordot(w.reshape(cout, -1), dyr, axes=([0], [1]))
    dcols = np.moveaxis(dcols, 0, 1)
    dx = _col2im(dcols, x.shape, k)
    return dx, dw, db


def relu_forward(x):
    return np.maximum(x, 0.0), x > 0.0


def relu_backward(dy, mask):
    return dy * mask


def maxpool2_forward(x):
    b, c, h, w = x.shape
    if h % 2 or w % 2:
        raise BadShape("maxpool2 requires even spatial dims")
    win = x.reshape(b, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5)
    win = win.reshape(b, c, h // 2, w // 2, 4)
    idx = win.argmax(axis=-1)
    y = np.take_along_axis(win, idx[..., None], axis=-1)[..., 0]
    return y, (idx, x.shape)


def maxpool2_backward(dy, cache):
    idx, shape = cache
    b, c, h, w = shape
    dwin = np.zeros((b, c, h // 2, w // 2, 4), dtype=dy.dtype)
    np.put_along_axis(dwin, idx[..., None], dy[..., None], axis=-1)
    dwin = dwin.reshape(b, c, h // 2, w // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5)
    return dwin.reshape(shape)


def upsample2_forward(x):
    return np.repeat(np.repeat(x, 2, axis=2), 2, axis=3)


def upsample2_backward(dy):
    b, c, h, w = dy.shape
    return dy.reshape(b, c, h // 2, 2, w // 2, 2).sum(axis=(3, 5))


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.clip(x, -60.0, 60.0)))


# ----------------------------------------------------------------- model


@dataclass(frozen=True)
class NetConfig:
    stem_channels: tuple[int, int, int, int] = (8, 16, 32, 64)
    merge_channels: tuple[int, int, int] = (32, 32, 32)
    head: str = RBOX
    d_max: float = 64.0
    input_size: int = 128

    def __post_init__(self):
        if self.input_size % 32:
            raise ValueError("input_size must be divisible by 32")
        if any(c <= 0 for c in self.stem_channels + self.merge_channels):
            raise ValueError("channel counts must be positive")
        if self.head not in (RBOX, QUAD):
            raise ValueError("head must be 'rbox' or 'quad'")

    @property
    def geo_channels(self) -> int:
        return 5 if self.head == RBOX else 8


class TinyTextNet:
    """Dense text detector at output stride 4 with explicit backprop."""

    def __init__(self, cfg: NetConfig = NetConfig(), seed: int = 0,
                 dtype=np.float32):
        self.cfg = cfg
        self.dtype = np.dtype(dtype)
        self.params: dict[str, np.ndarray] = {}
        self._cache = None
        rng = np.random.default_rng(seed)
        c = cfg.stem_channels
        m = cfg.merge_channels
        self._add_conv(rng, "s1a", 1, c[0], 3)
        self._add_conv(rng, "s1b", c[0], c[0], 3)
        for i in (2, 3, 4):
            self._add_conv(rng, f"s{i}a", c[i - 2], c[i - 1], 3)
            self._add_conv(rng, f"s{i}b", c[i - 1], c[i - 1], 3)
        prev = c[3]
        for j, fch in enumerate((c[2], c[1], c[0])):
            self._add_conv(rng, f"m{j}a", prev + fch, m[j], 1)
            self._add_conv(rng, f"m{j}b", m[j], m[j], 3)
            prev = m[j]
        self._add_conv(rng, "final", m[2], m[2], 3)
        self._add_conv(rng, "head_s", m[2], 1, 1)
        self._add_conv(rng, "head_g", m[2], cfg.geo_channels, 1)
        if cfg.head == RBOX:
            # start the distance channels near small-box scale instead of
            # d_max/2 (logistic of 0): speeds up early geometry fitting
            self.params["head_g.b"][:4] = -1.0

    def _add_conv(self, rng, name, cin, cout, k):
        bound = math.sqrt(6.0 / (cin * k * k))
        self.params[f"{name}.w"] = rng.uniform(
            -bound, bound, size=(cout, cin, k, k)
        ).astype(self.dtype)
        self.params[f"{name}.b"] = np.zeros(cout, dtype=self.dtype)

    # -- forward

    def _conv_relu(self, name, x, caches):
        y, cc = conv2d_forward(x, self.params[f"{name}.w"], self.params[f"{name}.b"])
        out, rc = relu_forward(y)
        caches[name] = (cc, rc)
        return out

    def forward(self, x: np.ndarray):
        """Returns (score (B,1,h,w), geometry (B,C,h,w)); caches activations."""
        x = np.ascontiguousarray(x, dtype=self.dtype)
        if x.ndim != 4 or x.shape[1] != 1:
            raise BadShape(f"expected (B, 1, H, W) input, got {x.shape}")
        if x.shape[2] % 32 or x.shape[3] % 32:
            raise BadShape("spatial dims must be divisible by 32")
        # inputs are grayscale in [0, 1]; center them so the first layer
        # sees zero-mean activations
        x = x - np.asarray(0.5, dtype=self.dtype)
        caches: dict = {}
        h = self._conv_relu("s1a", x, caches)
        h, caches["p1a"] = maxpool2_forward(h)
        h = self._conv_relu("s1b", h, caches)
        h, caches["p1b"] = maxpool2_forward(h)
        feats = [h]  # 1/4
        for i in (2, 3, 4):
            h, caches[f"p{i}"] = maxpool2_forward(h)
            h = self._conv_relu(f"s{i}a", h, caches)
            h = self._conv_relu(f"s{i}b", h, caches)
            feats.append(h)  # 1/8, 1/16, 1/32

        g = feats[3]
        split_at = []
        for j, f in enumerate((feats[2], feats[1], feats[0])):
            g = upsample2_forward(g)
            split_at.append(g.shape[1])
            cat = np.concatenate([g, f], axis=1)
            g = self._conv_relu(f"m{j}a", cat, caches)
            g = self._conv_relu(f"m{j}b", g, caches)
        g = self._conv_relu("final", g, caches)

        s_logits, caches["head_s"] = conv2d_forward(
            g, self.params["head_s.w"], self.params["head_s.b"]
        )
        g_raw, caches["head_g"] = conv2d_forward(
            g, self.params["head_g.w"], self.params["head_g.b"]
        )
        score = sigmoid(s_logits)
        if self.cfg.head == RBOX:
            sig = sigmoid(g_raw)
            geometry = np.concatenate(
                [sig[:, :4] * self.cfg.d_max, (sig[:, 4:5] - 0.5) * HALF_PI], axis=1
            )
            caches["head_act"] = (score, sig)
        else:
            geometry = g_raw
            caches["head_act"] = (score, None)
        caches["split_at"] = split_at
        self._cache = caches
        if not np.all(np.isfinite(score)) or not np.all(np.isfinite(geometry)):
            raise BadShape("non-finite values in network outputs")
        return score, geometry

    # -- backward

    def _conv_relu_back(self, name, dy, caches, grads):
        cc, rc = caches[name]
        dy = relu_backward(dy, rc)
        dx, dw, db = conv2d_backward(dy, self.params[f"{name}.w"], cc)
        grads[f"{name}.w"] = dw.astype(self.dtype)
        grads[f"{name}.b"] = db.astype(self.dtype)
        return dx

    def backward(self, dscore: np.ndarray, dgeometry: np.ndarray):
        """Gradients of every parameter given output-map gradients."""
        if self._cache is None:
            raise MissingCache("forward() must run before backward()")
        caches = self._cache
        grads: dict[str, np.ndarray] = {}
        score, sig = caches["head_act"]

        ds_logits = (dscore * score * (1.0 - score)).astype(self.dtype)
        if self.cfg.head == RBOX:
            dg_raw = np.empty_like(dgeometry, dtype=self.dtype)
            dg_raw[:, :4] = dgeometry[:, :4] * self.cfg.d_max * sig[:, :4] * (1 - sig[:, :4])
            dg_raw[:, 4:5] = dgeometry[:, 4:5] * HALF_PI * sig[:, 4:5] * (1 - sig[:, 4:5])
        else:
            dg_raw = dgeometry.astype(self.dtype)

        dx_s, dw, db = conv2d_backward(ds_logits, self.params["head_s.w"], caches["head_s"])
        grads["head_s.w"], grads["head_s.b"] = dw.astype(self.dtype), db.astype(self.dtype)
        dx_g, dw, db = conv2d_backward(dg_raw, self.params["head_g.w"], caches["head_g"])
        grads["head_g.w"], grads["head_g.b"] = dw.astype(self.dtype), db.astype(self.dtype)

        dg = self._conv_relu_back("final", dx_s + dx_g, caches, grads)
        dfeats = [None, None, None, None]
        for j in (2, 1, 0):
            dg = self._conv_relu_back(f"m{j}b", dg, caches, grads)
            dcat = self._conv_relu_back(f"m{j}a", dg, caches, grads)
            n = caches["split_at"][j]
            dfeats[2 - j] = dcat[:, n:]  # grad of the skip feature
            dg = upsample2_backward(dcat[:, :n])
        dh = dg + 0.0  # grad flowing into feats[3]
        for i in (4, 3, 2):
            if i < 4:
                dh = dh + dfeats[i - 1]
            dh = self._conv_relu_back(f"s{i}b", dh, caches, grads)
            dh = self._conv_relu_back(f"s{i}a", dh, caches, grads)
            dh = maxpool2_backward(dh, caches[f"p{i}"])
        dh = dh + dfeats[0]
        dh = maxpool2_backward(dh, caches["p1b"])
        dh = self._conv_relu_back("s1b", dh, caches, grads)
        dh = maxpool2_backward(dh, caches["p1a"])
        self._conv_relu_back("s1a", dh, caches, grads)
        return grads

    def dense_outputs(self, score, geometry, batch_index: int = 0) -> DenseOutputs:
        """Slice one batch element into a decoder-ready structure."""
        return DenseOutputs(
            score=np.asarray(score[batch_index, 0], dtype=np.float64),
            geometry=np.asarray(geometry[batch_index], dtype=np.float64),
            stride=4,
            head=self.cfg.head,
        )
