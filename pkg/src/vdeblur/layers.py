"""Parameterized building blocks with named-parameter traversal."""

from __future__ import annotations

import numpy as np

from . import ops
from .tensor import Tensor


class Layer:
    """Base class: children and parameters are discovered from attributes
    in definition order, which keeps checkpoint field order stable."""

    def named_params(self, prefix=""):
        for name, value in vars(self).items():
            key = f"{prefix}{name}" if not prefix else f"{prefix}.{name}"
            if isinstance(value, Tensor) and value.requires_grad:
                yield key, value
            elif isinstance(value, Layer):
                yield from value.named_params(key)
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Layer):
                        yield from item.named_params(f"{key}.{i}")

    def params(self):
        for _, p in self.named_params():
            yield p

    def zero_grad(self):
        for p in self.params():
            p.zero_grad()


class Conv2d(Layer):
    def __init__(self, cin, cout, kernel, stride=1, padding=0, rng=None,
                 dtype=np.float32, zero_init=False, slope=0.1):
        fan_in = cin * kernel * kernel
        if zero_init:
            w = np.zeros((cout, cin, kernel, kernel), dtype=dtype)
        else:
            w = ops.kaiming_uniform(rng, (cout, cin, kernel, kernel), fan_in, slope, dtype)
        self.weight = Tensor(w, requires_grad=True)
        self.bias = Tensor(np.zeros(cout, dtype=dtype), requires_grad=True)
        self.stride = stride
        self.padding = padding

    def __call__(self, x):
        return ops.conv2d(x, self.weight, self.bias, self.stride, self.padding)


class ConvTranspose2d(Layer):
    def __init__(self, cin, cout, kernel, stride=1, padding=0, rng=None,
                 dtype=np.float32, slope=0.1):
        fan_in = cin * kernel * kernel
        w = ops.kaiming_uniform(rng, (cin, cout, kernel, kernel), fan_in, slope, dtype)
        self.weight = Tensor(w, requires_grad=True)
        self.bias = Tensor(np.zeros(cout, dtype=dtype), requires_grad=True)
        self.stride = stride
        self.padding = padding

    def __call__(self, x):
        return ops.conv_transpose2d(x, self.weight, self.bias, self.stride, self.padding)


class Linear(Layer):
    def __init__(self, cin, cout, rng=None, dtype=np.float32, slope=0.1):
        w = ops.kaiming_uniform(rng, (cout, cin), cin, slope, dtype)
        self.weight = Tensor(w, requires_grad=True)
        self.bias = Tensor(np.zeros(cout, dtype=dtype), requires_grad=True)

    def __call__(self, x):
        return ops.linear(x, self.weight, self.bias)


class ResidualBlock(Layer):
    """conv3x3 -> LeakyReLU -> conv3x3 with an identity skip, no normalization."""

    def __init__(self, channels, rng, dtype=np.float32, slope=0.1):
        self.conv1 = Conv2d(channels, channels, 3, padding=1, rng=rng, dtype=dtype, slope=slope)
        self.conv2 = Conv2d(channels, channels, 3, padding=1, rng=rng, dtype=dtype, slope=slope)
        self.slope = slope

    def __call__(self, x):
        return x + self.conv2(ops.leaky_relu(self.conv1(x), self.slope))
