"""Layers with explicit forward caches and analytic backward passes.

Every layer keeps the forward activations it needs for backward and
accumulates parameter gradients on itself; optimizers mutate the
parameter arrays in place, so layers never copy them. Weight matrices
are initialized uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out))
from the caller's rng; biases start at zero.
"""

from __future__ import annotations

import numpy as np

from ..errors import NoCachedForward, ShapeMismatch


def _glorot(rng, shape, fan_in, fan_out, dtype):
    a = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-a, a, shape).astype(dtype)


def softmax(z, axis=-1):
    z = z - z.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


class Layer:
    def params(self):
        return []

    def grads(self):
        return []

    def zero_grads(self):
        for g in self.grads():
            g[...] = 0.0


class Dense(Layer):
    def __init__(self, n_in, n_out, rng, dtype=np.float64):
        self.n_in = n_in
        self.n_out = n_out
        self.W = _glorot(rng, (n_in, n_out), n_in, n_out, dtype)
        self.b = np.zeros(n_out, dtype=dtype)
        self.gW = np.zeros_like(self.W)
        self.gb = np.zeros_like(self.b)
        self._x = None

    def params(self):
        return [self.W, self.b]

    def grads(self):
        return [self.gW, self.gb]

    def forward(self, x, train=True):
        if x.shape[-1] != self.n_in:
            raise ShapeMismatch(
                f"dense expects {self.n_in} inputs, got {x.shape[-1]}")
        self._x = x if train else None
        return x @ self.W + self.b

    def backward(self, g):
        if self._x is None:
            raise NoCachedForward("dense backward without cached forward")
        self.gW += self._x.T @ g
        self.gb += g.sum(axis=0)
        return g @ self.W.T


def _conv_geometry(h, w, k, stride, pad):
    oh = (h + 2 * pad - k) // stride + 1
    ow = (w + 2 * pad - k) // stride + 1
    return oh, ow


def _im2col_indices(c, h, w, k, stride, pad):
    """Flat gather indices (c*k*k, oh*ow) into a padded (c,h+2p,w+2p)."""
    hp, wp = h + 2 * pad, w + 2 * pad
    oh, ow = _conv_geometry(h, w, k, stride, pad)
    ci = np.repeat(np.arange(c), k * k)
    ki = np.tile(np.repeat(np.arange(k), k), c)
    kj = np.tile(np.arange(k), c * k)
    oi = stride * np.repeat(np.arange(oh), ow)
    oj = stride * np.tile(np.arange(ow), oh)
    rows = ki[:, None] + oi[None, :]
    cols = kj[:, None] + oj[None, :]
    return ci[:, None] * (hp * wp) + rows * wp + cols


class Conv2D(Layer):
    """Strided 2-D convolution over NCHW tensors, via im2col."""

    def __init__(self, c_in, c_out, rng, k=4, stride=2, pad=1,
                 dtype=np.float64):
        self.c_in, self.c_out = c_in, c_out
        self.k, self.stride, self.pad = k, stride, pad
        fan = c_in * k * k
        self.W = _glorot(rng, (c_out, fan), fan, c_out * k * k, dtype)
        self.b = np.zeros(c_out, dtype=dtype)
        self.gW = np.zeros_like(self.W)
        self.gb = np.zeros_like(self.b)
        self._cache = None
        self._idx = {}

    def params(self):
        return [self.W, self.b]

    def grads(self):
        return [self.gW, self.gb]

    def _indices(self, h, w):
        key = (h, w)
        if key not in self._idx:
            self._idx[key] = _im2col_indices(self.c_in, h, w, self.k,
                                             self.stride, self.pad)
        return self._idx[key]

    def forward(self, x, train=True):
        if x.ndim != 4 or x.shape[1] != self.c_in:
            raise ShapeMismatch(f"conv2d expects (B,{self.c_in},H,W), "
                                f"got {x.shape}")
        bsz, _, h, w = x.shape
        p = self.pad
        xp = np.zeros((bsz, self.c_in, h + 2 * p, w + 2 * p), dtype=x.dtype)
        xp[:, :, p:h + p, p:w + p] = x
        idx = self._indices(h, w)
        cols = xp.reshape(bsz, -1)[:, idx.reshape(-1)]
        cols = cols.reshape(bsz, idx.shape[0], idx.shape[1])
        out = np.matmul(self.W[None], cols) + self.b[None, :, None]
        oh, ow = _conv_geometry(h, w, self.k, self.stride, self.pad)
        self._cache = (cols, (bsz, h, w)) if train else None
        return out.reshape(bsz, self.c_out, oh, ow)

    def backward(self, g):
        if self._cache is None:
            raise NoCachedForward("conv2d backward without cached forward")
        cols, (bsz, h, w) = self._cache
        gf = g.reshape(bsz, self.c_out, -1)
        self.gW += np.einsum("bol,bkl->ok", gf, cols)
        self.gb += gf.sum(axis=(0, 2))
        dcols = np.matmul(self.W.T[None], gf)
        p = self.pad
        idx = self._indices(h, w).reshape(-1)
        dxp = np.zeros((bsz, self.c_in * (h + 2 * p) * (w + 2 * p)),
                       dtype=g.dtype)
        for i in range(bsz):
            np.add.at(dxp[i], idx, dcols[i].reshape(-1))
        dxp = dxp.reshape(bsz, self.c_in, h + 2 * p, w + 2 * p)
        return np.ascontiguousarray(dxp[:, :, p:h + p, p:w + p])


class Deconv2D(Layer):
    """Transposed strided convolution (the adjoint of Conv2D)."""

    def __init__(self, c_in, c_out, rng, k=4, stride=2, pad=1,
                 dtype=np.float64):
        self.c_in, self.c_out = c_in, c_out
        self.k, self.stride, self.pad = k, stride, pad
        fan = c_out * k * k
        self.W = _glorot(rng, (c_in, fan), c_in * k * k, fan, dtype)
        self.b = np.zeros(c_out, dtype=dtype)
        self.gW = np.zeros_like(self.W)
        self.gb = np.zeros_like(self.b)
        self._cache = None
        self._idx = {}

    def params(self):
        return [self.W, self.b]

    def grads(self):
        return [self.gW, self.gb]

    def out_size(self, h):
        return (h - 1) * self.stride - 2 * self.pad + self.k

    def _indices(self, oh, ow):
        # indices are built for the OUTPUT raster: forward scatters into
        # it, backward gathers from it
        key = (oh, ow)
        if key not in self._idx:
            self._idx[key] = _im2col_indices(self.c_out, oh, ow, self.k,
                                             self.stride, self.pad)
        return self._idx[key]

    def forward(self, x, train=True):
        if x.ndim != 4 or x.shape[1] != self.c_in:
            raise ShapeMismatch(f"deconv2d expects (B,{self.c_in},H,W), "
                                f"got {x.shape}")
        bsz, _, h, w = x.shape
        oh, ow = self.out_size(h), self.out_size(w)
        x_flat = x.reshape(bsz, self.c_in, h * w)
        cols = np.matmul(self.W.T[None], x_flat)
        p = self.pad
        idx = self._indices(oh, ow).reshape(-1)
        outp = np.zeros((bsz, self.c_out * (oh + 2 * p) * (ow + 2 * p)),
                        dtype=x.dtype)
        for i in range(bsz):
            np.add.at(outp[i], idx, cols[i].reshape(-1))
        outp = outp.reshape(bsz, self.c_out, oh + 2 * p, ow + 2 * p)
        out = outp[:, :, p:oh + p, p:ow + p] + self.b[None, :, None, None]
        self._cache = (x_flat, (bsz, h, w)) if train else None
        return np.ascontiguousarray(out)

    def backward(self, g):
        if self._cache is None:
            raise NoCachedForward("deconv2d backward without cached forward")
        x_flat, (bsz, h, w) = self._cache
        oh, ow = self.out_size(h), self.out_size(w)
        p = self.pad
        gp = np.zeros((bsz, self.c_out, oh + 2 * p, ow + 2 * p),
                      dtype=g.dtype)
        gp[:, :, p:oh + p, p:ow + p] = g
        idx = self._indices(oh, ow)
        gcols = gp.reshape(bsz, -1)[:, idx.reshape(-1)]
        gcols = gcols.reshape(bsz, idx.shape[0], idx.shape[1])
        self.gW += np.einsum("bil,bkl->ik", x_flat, gcols)
        self.gb += g.sum(axis=(0, 2, 3))
        dx = np.matmul(self.W[None], gcols)
        return dx.reshape(bsz, self.c_in, h, w)


class RnnTanh(Layer):
    """Single tanh recurrent layer, many-to-one.

    forward takes (B, T, n_in) and returns the last hidden state (B, h);
    backward takes the gradient on that state and unrolls through time.
    """

    def __init__(self, n_in, n_hidden, rng, dtype=np.float64):
        self.n_in, self.n_hidden = n_in, n_hidden
        self.Wx = _glorot(rng, (n_in, n_hidden), n_in, n_hidden, dtype)
        self.Wh = _glorot(rng, (n_hidden, n_hidden), n_hidden, n_hidden,
                          dtype)
        self.b = np.zeros(n_hidden, dtype=dtype)
        self.gWx = np.zeros_like(self.Wx)
        self.gWh = np.zeros_like(self.Wh)
        self.gb = np.zeros_like(self.b)
        self._cache = None

    def params(self):
        return [self.Wx, self.Wh, self.b]

    def grads(self):
        return [self.gWx, self.gWh, self.gb]

    def forward(self, x, train=True):
        if x.ndim != 3 or x.shape[2] != self.n_in:
            raise ShapeMismatch(f"rnn expects (B,T,{self.n_in}), "
                                f"got {x.shape}")
        bsz, T, _ = x.shape
        h = np.zeros((bsz, self.n_hidden), dtype=x.dtype)
        hs = [h]
        for t in range(T):
            h = np.tanh(x[:, t] @ self.Wx + h @ self.Wh + self.b)
            hs.append(h)
        self._cache = (x, hs) if train else None
        return hs[-1]

    def backward(self, g):
        if self._cache is None:
            raise NoCachedForward("rnn backward without cached forward")
        x, hs = self._cache
        bsz, T, _ = x.shape
        gx = np.empty_like(x)
        gh = g
        for t in range(T - 1, -1, -1):
            ga = gh * (1.0 - hs[t + 1] ** 2)
            self.gWx += x[:, t].T @ ga
            self.gWh += hs[t].T @ ga
            self.gb += ga.sum(axis=0)
            gx[:, t] = ga @ self.Wx.T
            gh = ga @ self.Wh.T
        return gx


class Relu(Layer):
    def __init__(self):
        self._mask = None

    def forward(self, x, train=True):
        self._mask = (x > 0) if train else None
        return np.maximum(x, 0.0)

    def backward(self, g):
        if self._mask is None:
            raise NoCachedForward("relu backward without cached forward")
        return g * self._mask


class Sigmoid(Layer):
    def __init__(self):
        self._y = None

    def forward(self, x, train=True):
        y = 1.0 / (1.0 + np.exp(-x))
        self._y = y if train else None
        return y

    def backward(self, g):
        if self._y is None:
            raise NoCachedForward("sigmoid backward without cached forward")
        return g * self._y * (1.0 - self._y)


class Tanh(Layer):
    def __init__(self):
        self._y = None

    def forward(self, x, train=True):
        y = np.tanh(x)
        self._y = y if train else None
        return y

    def backward(self, g):
        if self._y is None:
            raise NoCachedForward("tanh backward without cached forward")
        return g * (1.0 - self._y ** 2)


class Sequential(Layer):
    def __init__(self, *layers):
        self.layers = list(layers)

    def params(self):
        return [p for l in self.layers for p in l.params()]

    def grads(self):
        return [g for l in self.layers for g in l.grads()]

    def forward(self, x, train=True):
        for l in self.layers:
            x = l.forward(x, train=train)
        return x

    def backward(self, g):
        for l in reversed(self.layers):
            g = l.backward(g)
        return g
