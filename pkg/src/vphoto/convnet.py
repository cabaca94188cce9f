"""Minimal convolutional layers with exact backprop.

Just enough machinery for the two small adversarial networks: strided 3x3
convolutions, a dense head, tanh and sigmoid nonlinearities.  Forward passes
cache what backward needs; gradients accumulate on the layers until applied
by an SGD step.  Everything is float64 so finite-difference checks are sharp.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class Conv2d:
    """3x3 convolution, configurable stride, zero padding 1."""

    def __init__(self, in_ch: int, out_ch: int, stride: int = 2, rng=None, kernel: int = 3, pad: int = 1):
        self.in_ch = in_ch
        self.out_ch = out_ch
        self.kernel = kernel
        self.stride = stride
        self.pad = pad
        bound = 1.0 / np.sqrt(in_ch * kernel * kernel)
        rng = rng or np.random.default_rng(0)
        self.w = rng.uniform(-bound, bound, size=(out_ch, in_ch, kernel, kernel))
        self.b = np.zeros(out_ch)
        self.grad_w = np.zeros_like(self.w)
        self.grad_b = np.zeros_like(self.b)
        self._cache = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        p, k, s = self.pad, self.kernel, self.stride
        xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
        windows = sliding_window_view(xp, (k, k), axis=(2, 3))[:, :, ::s, ::s]
        self._cache = (x.shape, windows)
        return np.einsum("bchwij,ocij->bohw", windows, self.w) + self.b[None, :, None, None]

    def backward(self, dy: np.ndarray) -> np.ndarray:
        x_shape, windows = self._cache
        self.grad_w += np.einsum("bohw,bchwij->ocij", dy, windows)
        self.grad_b += dy.sum(axis=(0, 2, 3))
        b, c, h, w = x_shape
        p, k, s = self.pad, self.kernel, self.stride
        ho, wo = dy.shape[2], dy.shape[3]
        dxp = np.zeros((b, c, h + 2 * p, w + 2 * p))
        for i in range(k):
            for j in range(k):
                patch = np.einsum("bohw,oc->bchw", dy, self.w[:, :, i, j])
                dxp[:, :, i : i + s * ho : s, j : j + s * wo : s] += patch
        return dxp[:, :, p : p + h, p : p + w]

    def params(self):
        return [self.w, self.b]

    def grads(self):
        return [self.grad_w, self.grad_b]


class Dense:
    def __init__(self, in_dim: int, out_dim: int, rng=None):
        bound = 1.0 / np.sqrt(in_dim)
        rng = rng or np.random.default_rng(0)
        self.w = rng.uniform(-bound, bound, size=(out_dim, in_dim))
        self.b = np.zeros(out_dim)
        self.grad_w = np.zeros_like(self.w)
        self.grad_b = np.zeros_like(self.b)
        self._x = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._x = x
        return x @ self.w.T + self.b

    def backward(self, dy: np.ndarray) -> np.ndarray:
        self.grad_w += dy.T @ self._x
        self.grad_b += dy.sum(axis=0)
        return dy @ self.w

    def params(self):
        return [self.w, self.b]

    def grads(self):
        return [self.grad_w, self.grad_b]


class Tanh:
    def __init__(self):
        self._y = None

    def forward(self, x):
        self._y = np.tanh(x)
        return self._y

    def backward(self, dy):
        return dy * (1.0 - self._y**2)

    def params(self):
        return []

    def grads(self):
        return []


class Flatten:
    def __init__(self):
        self._shape = None

    def forward(self, x):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dy):
        return dy.reshape(self._shape)

    def params(self):
        return []

    def grads(self):
        return []


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def forward(layers, x):
    for layer in layers:
        x = layer.forward(x)
    return x


def backward(layers, dy):
    for layer in reversed(layers):
        dy = layer.backward(dy)
    return dy


def parameters(layers):
    out = []
    for layer in layers:
        out.extend(layer.params())
    return out


def gradients(layers):
    out = []
    for layer in layers:
        out.extend(layer.grads())
    return out


def zero_grads(layers):
    for g in gradients(layers):
        g[...] = 0.0


def sgd_step(layers, lr: float):
    for p, g in zip(parameters(layers), gradients(layers)):
        p -= lr * g
    zero_grads(layers)
