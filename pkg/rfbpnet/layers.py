"""Dense layers with hand-derived backward passes.

The functional layers are classes of static methods: ``forward(...)`` returns
``(out, cache)`` and ``backward(dout, cache)`` returns the gradients. Caches
are plain values, so one set of weights can be run through any number of
forwards (the two Siamese branches) and each backward is fed its own cache.

The module classes further down own ``Parameter`` objects and accumulate
gradients into them with ``+=``.
"""

import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy.special import expit

from rfbpnet.utils import (ConfigurationError, DimensionError, ParameterError, StateError,
                           check_finite)

ACTIVATIONS = ('relu', 'sigmoid', 'tanh', 'softplus', 'leaky_relu', 'elu', 'prelu', 'none')
LEAKY_SLOPE = 0.01
ELU_ALPHA = 1.0
PRELU_INIT = 0.25

BN_EPS = 1e-5
BN_MOMENTUM = 0.1


def _require_cache(cache, layer):
    if cache is None:
        raise StateError('%s backward called without a forward cache' % layer)


class Parameter:
    """A learnable array with its gradient and Adam moment buffers."""

    def __init__(self, name, value):
        self.name = name
        self.value = value
        self.grad = np.zeros_like(value)
        self.moment1 = np.zeros_like(value)
        self.moment2 = np.zeros_like(value)

    @property
    def shape(self):
        return self.value.shape

    def zero_grad(self):
        self.grad.fill(0)

    def cast_(self, dtype):
        """Convert value, gradient and moments to dtype in place."""
        self.value = self.value.astype(dtype)
        self.grad = self.grad.astype(dtype)
        self.moment1 = self.moment1.astype(dtype)
        self.moment2 = self.moment2.astype(dtype)

    def __repr__(self):
        return '%s(%r, shape=%s)' % (self.__class__.__name__, self.name, self.value.shape)


class Conv:
    """2-D cross-correlation over [N, C, H, W] batches."""

    @staticmethod
    def output_size(size, kernel, stride, padding):
        return (size + 2 * padding - kernel) // stride + 1

    @staticmethod
    def forward(x, w, b, stride=1, padding=0):
        """
        Args:
            x: input of shape [N, C, H, W]
            w: weights of shape [O, C, kh, kw]
            b: bias of shape [O]
            stride (int), padding (int): applied to both spatial axes.
        Returns:
            (out of shape [N, O, H', W'], cache)
        Raises:
            DimensionError: if the shapes are inconsistent.
        """
        if x.ndim != 4:
            raise DimensionError('conv2d input must be [N, C, H, W], got shape %s' % (x.shape,))
        if w.ndim != 4:
            raise DimensionError('conv2d weight must be [O, C, kh, kw], got shape %s' % (w.shape,))
        n, c, h, wd = x.shape
        o, wc, kh, kw = w.shape
        if wc != c:
            raise DimensionError('conv2d channel mismatch: input axis 1 is %d, weight axis 1 is %d'
                                 % (c, wc))
        if b.shape != (o,):
            raise DimensionError('conv2d bias shape %s does not match weight axis 0 (%d)'
                                 % (b.shape, o))
        if stride < 1 or padding < 0:
            raise ParameterError('conv2d needs stride >= 1 and padding >= 0')
        ho = Conv.output_size(h, kh, stride, padding)
        wo = Conv.output_size(wd, kw, stride, padding)
        if ho < 1 or wo < 1:
            raise DimensionError('conv2d output would be %dx%d: input axes 2, 3 are %dx%d for a '
                                 '%dx%d kernel' % (ho, wo, h, wd, kh, kw))

        xp = x
        if padding:
            xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
        cols = np.empty((n, c, kh, kw, ho, wo), dtype=np.result_type(x, w))
        for i in range(kh):
            i_end = i + stride * ho
            for j in range(kw):
                j_end = j + stride * wo
                cols[:, :, i, j] = xp[:, :, i:i_end:stride, j:j_end:stride]

        out = np.tensordot(cols, w, axes=([1, 2, 3], [1, 2, 3]))
        out = np.ascontiguousarray(out.transpose(0, 3, 1, 2)) + b.reshape(1, -1, 1, 1)
        cache = (x.shape, cols, w, stride, padding)
        return out, cache

    @staticmethod
    def backward(dout, cache):
        """
        Returns:
            (dx, dw, db)
        Raises:
            StateError: if cache is None.
            DimensionError: if dout does not have the forward output shape.
        """
        _require_cache(cache, 'conv2d')
        x_shape, cols, w, stride, padding = cache
        n, c, h, wd = x_shape
        o, _, kh, kw = w.shape
        ho, wo = cols.shape[4], cols.shape[5]
        if dout.shape != (n, o, ho, wo):
            raise DimensionError('conv2d grad_out shape %s, forward output was %s'
                                 % (dout.shape, (n, o, ho, wo)))

        db = dout.sum(axis=(0, 2, 3))
        dw = np.tensordot(dout, cols, axes=([0, 2, 3], [0, 4, 5]))
        dcols = np.tensordot(dout, w, axes=([1], [0])).transpose(0, 3, 4, 5, 1, 2)

        dxp = np.zeros((n, c, h + 2 * padding, wd + 2 * padding), dtype=dcols.dtype)
        for i in range(kh):
            i_end = i + stride * ho
            for j in range(kw):
                j_end = j + stride * wo
                dxp[:, :, i:i_end:stride, j:j_end:stride] += dcols[:, :, i, j]
        dx = dxp[:, :, padding:padding + h, padding:padding + wd]
        return np.ascontiguousarray(dx), dw, db


class Affine:
    """Fully connected layer, out = x W^T + b."""

    @staticmethod
    def forward(x, w, b):
        if x.ndim != 2:
            raise DimensionError('linear input must be [N, F], got shape %s' % (x.shape,))
        if w.ndim != 2 or w.shape[1] != x.shape[1]:
            raise DimensionError('linear weight shape %s does not match input axis 1 (%d)'
                                 % (w.shape, x.shape[1]))
        if b.shape != (w.shape[0],):
            raise DimensionError('linear bias shape %s does not match weight axis 0 (%d)'
                                 % (b.shape, w.shape[0]))
        out = x @ w.T + b
        return out, (x, w)

    @staticmethod
    def backward(dout, cache):
        _require_cache(cache, 'linear')
        x, w = cache
        if dout.shape != (x.shape[0], w.shape[0]):
            raise DimensionError('linear grad_out shape %s, forward output was %s'
                                 % (dout.shape, (x.shape[0], w.shape[0])))
        dx = dout @ w
        dw = dout.T @ x
        db = dout.sum(axis=0)
        return dx, dw, db


class SpatialBatchNorm:
    """Per-channel batch normalisation of [N, C, H, W] batches."""

    @staticmethod
    # pylint: disable=too-many-arguments
    def forward(x, gamma, beta, running_mean, running_var, mode='train',
                eps=BN_EPS, momentum=BN_MOMENTUM):
        """
        Train mode normalises with batch statistics and updates the running
        buffers in place (running = (1 - momentum) * running + momentum * batch);
        eval mode uses the running buffers only.

        Raises:
            ParameterError: train mode with a batch of one sample.
            ConfigurationError: unknown mode.
        """
        if x.ndim != 4:
            raise DimensionError('batchnorm2d input must be [N, C, H, W], got shape %s'
                                 % (x.shape,))
        channels = x.shape[1]
        if gamma.shape != (channels,) or beta.shape != (channels,):
            raise DimensionError('batchnorm2d affine shapes %s/%s do not match input axis 1 (%d)'
                                 % (gamma.shape, beta.shape, channels))
        axes = (0, 2, 3)
        if mode == 'train':
            if x.shape[0] < 2:
                raise ParameterError('batchnorm2d in train mode needs a batch of at least 2 '
                                     'samples, got %d' % x.shape[0])
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)
            running_mean *= (1.0 - momentum)
            running_mean += momentum * mean
            running_var *= (1.0 - momentum)
            running_var += momentum * var
        elif mode == 'eval':
            mean = running_mean
            var = running_var
        else:
            raise ConfigurationError("batchnorm2d mode must be 'train' or 'eval', got %r" % mode)

        inv_std = (1.0 / np.sqrt(var + eps)).astype(x.dtype)
        xhat = (x - mean.reshape(1, -1, 1, 1).astype(x.dtype)) * inv_std.reshape(1, -1, 1, 1)
        out = gamma.reshape(1, -1, 1, 1) * xhat + beta.reshape(1, -1, 1, 1)
        return out, (mode, xhat, gamma, inv_std)

    @staticmethod
    def backward(dout, cache):
        """
        Returns:
            (dx, dgamma, dbeta)
        """
        _require_cache(cache, 'batchnorm2d')
        mode, xhat, gamma, inv_std = cache
        if dout.shape != xhat.shape:
            raise DimensionError('batchnorm2d grad_out shape %s, forward output was %s'
                                 % (dout.shape, xhat.shape))
        axes = (0, 2, 3)
        dgamma = (dout * xhat).sum(axis=axes)
        dbeta = dout.sum(axis=axes)
        dxhat = dout * gamma.reshape(1, -1, 1, 1)
        scale = inv_std.reshape(1, -1, 1, 1)
        if mode == 'train':
            count = dout.size // dout.shape[1]
            dx = (scale / count) * (count * dxhat
                                    - dxhat.sum(axis=axes, keepdims=True)
                                    - xhat * (dxhat * xhat).sum(axis=axes, keepdims=True))
        else:
            dx = dxhat * scale
        return dx, dgamma, dbeta


class Activation:
    """Elementwise non-linearities selected by name."""

    @staticmethod
    def forward(name, x, slope=None):
        """
        Args:
            name (str): one of ACTIVATIONS.
            x: input array of any shape.
            slope: learnable PReLU slope, shape [1]; ignored for other names.
        Raises:
            ConfigurationError: unknown activation name.
        """
        if name == 'relu':
            out = np.maximum(x, 0)
        elif name == 'sigmoid':
            out = expit(x)
        elif name == 'tanh':
            out = np.tanh(x)
        elif name == 'softplus':
            out = np.logaddexp(0, x)
        elif name == 'leaky_relu':
            out = np.where(x > 0, x, LEAKY_SLOPE * x)
        elif name == 'elu':
            out = np.where(x > 0, x, ELU_ALPHA * np.expm1(np.minimum(x, 0)))
        elif name == 'prelu':
            if slope is None:
                raise StateError('prelu needs its slope parameter')
            out = np.where(x > 0, x, slope.astype(x.dtype) * x)
        elif name == 'none':
            out = x
        else:
            raise ConfigurationError('unknown activation %r, expected one of %s'
                                     % (name, ', '.join(ACTIVATIONS)))
        return out, (name, x, out, slope)

    @staticmethod
    def backward(dout, cache):
        """
        Returns:
            (dx, dslope) where dslope is None unless the activation is prelu.
        """
        _require_cache(cache, 'activation')
        name, x, out, slope = cache
        dslope = None
        if name == 'relu':
            dx = dout * (x > 0)
        elif name == 'sigmoid':
            dx = dout * out * (1 - out)
        elif name == 'tanh':
            dx = dout * (1 - out * out)
        elif name == 'softplus':
            dx = dout * expit(x)
        elif name == 'leaky_relu':
            dx = dout * np.where(x > 0, 1.0, LEAKY_SLOPE).astype(dout.dtype)
        elif name == 'elu':
            dx = dout * np.where(x > 0, 1.0, out + ELU_ALPHA).astype(dout.dtype)
        elif name == 'prelu':
            negative = x <= 0
            dx = dout * np.where(negative, slope.astype(dout.dtype), 1)
            dslope = np.array([(dout * x * negative).sum()], dtype=slope.dtype)
        else:
            dx = dout
        return dx, dslope


@dataclass
class LayerSpec:
    """Geometry of one layer of a sequential stack."""

    kind: str
    in_size: int = 0
    out_size: int = 0
    kernel_size: int = 3
    stride: int = 1
    padding: int = 0
    activation: str = 'none'
    prelu_init: float = PRELU_INIT
    eps: float = BN_EPS
    momentum: float = BN_MOMENTUM

    KINDS = ('conv2d', 'linear', 'batchnorm2d', 'activation', 'flatten')

    def output_shape(self, input_shape):
        """Shape (without the batch axis) this layer produces for input_shape.

        Raises:
            DimensionError: the geometry does not fit the input.
            ConfigurationError: unknown kind or activation.
        """
        input_shape = tuple(input_shape)
        if self.kind == 'conv2d':
            if len(input_shape) != 3 or input_shape[0] != self.in_size:
                raise DimensionError('conv2d expects [%d, H, W], got %s'
                                     % (self.in_size, list(input_shape)))
            height = Conv.output_size(input_shape[1], self.kernel_size, self.stride, self.padding)
            width = Conv.output_size(input_shape[2], self.kernel_size, self.stride, self.padding)
            if height < 1 or width < 1:
                raise DimensionError('conv2d output would be %dx%d for input %s'
                                     % (height, width, list(input_shape)))
            return (self.out_size, height, width)
        if self.kind == 'linear':
            if input_shape != (self.in_size,):
                raise DimensionError('linear expects [%d], got %s'
                                     % (self.in_size, list(input_shape)))
            return (self.out_size,)
        if self.kind == 'batchnorm2d':
            if len(input_shape) != 3 or input_shape[0] != self.in_size:
                raise DimensionError('batchnorm2d expects [%d, H, W], got %s'
                                     % (self.in_size, list(input_shape)))
            return input_shape
        if self.kind == 'activation':
            if self.activation not in ACTIVATIONS:
                raise ConfigurationError('unknown activation %r' % self.activation)
            return input_shape
        if self.kind == 'flatten':
            return (int(np.prod(input_shape)),)
        raise ConfigurationError('unknown layer kind %r, expected one of %s'
                                 % (self.kind, ', '.join(self.KINDS)))


class Layer:
    """Base class for the stateful layers."""

    name = None

    def parameters(self):
        return []

    def buffers(self):
        """Non-learned arrays that still belong to the layer state, as (name, array)."""
        return []

    def forward(self, x, train=False):
        raise NotImplementedError

    def backward(self, dout, cache):
        raise NotImplementedError

    def cast_(self, dtype):
        for param in self.parameters():
            param.cast_(dtype)


def kaiming_uniform(rng, shape, fan_in, dtype):
    """Kaiming-uniform init for ReLU stacks: U(-sqrt(6 / fan_in), +sqrt(6 / fan_in))."""
    bound = math.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class Conv2d(Layer):
    # pylint: disable=too-many-arguments
    def __init__(self, name, in_channels, out_channels, kernel_size, stride, padding, rng,
                 dtype=np.float32):
        self.name = name
        self.stride = stride
        self.padding = padding
        shape = (out_channels, in_channels, kernel_size, kernel_size)
        fan_in = in_channels * kernel_size * kernel_size
        self.weight = Parameter(name + '.weight', kaiming_uniform(rng, shape, fan_in, dtype))
        self.bias = Parameter(name + '.bias', np.zeros(out_channels, dtype=dtype))

    def parameters(self):
        return [self.weight, self.bias]

    def forward(self, x, train=False):
        return Conv.forward(x, self.weight.value, self.bias.value, self.stride, self.padding)

    def backward(self, dout, cache):
        dx, dw, db = Conv.backward(dout, cache)
        self.weight.grad += dw
        self.bias.grad += db
        return dx


class Linear(Layer):
    # pylint: disable=too-many-arguments
    def __init__(self, name, in_features, out_features, rng, dtype=np.float32):
        self.name = name
        shape = (out_features, in_features)
        self.weight = Parameter(name + '.weight', kaiming_uniform(rng, shape, in_features, dtype))
        self.bias = Parameter(name + '.bias', np.zeros(out_features, dtype=dtype))

    def parameters(self):
        return [self.weight, self.bias]

    def forward(self, x, train=False):
        return Affine.forward(x, self.weight.value, self.bias.value)

    def backward(self, dout, cache):
        dx, dw, db = Affine.backward(dout, cache)
        self.weight.grad += dw
        self.bias.grad += db
        return dx


class BatchNorm2d(Layer):
    # pylint: disable=too-many-arguments
    def __init__(self, name, channels, eps=BN_EPS, momentum=BN_MOMENTUM, dtype=np.float32):
        self.name = name
        self.eps = eps
        self.momentum = momentum
        self.gamma = Parameter(name + '.gamma', np.ones(channels, dtype=dtype))
        self.beta = Parameter(name + '.beta', np.zeros(channels, dtype=dtype))
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)

    def parameters(self):
        return [self.gamma, self.beta]

    def buffers(self):
        return [(self.name + '.running_mean', self.running_mean),
                (self.name + '.running_var', self.running_var)]

    def forward(self, x, train=False):
        return SpatialBatchNorm.forward(x, self.gamma.value, self.beta.value,
                                        self.running_mean, self.running_var,
                                        mode='train' if train else 'eval',
                                        eps=self.eps, momentum=self.momentum)

    def backward(self, dout, cache):
        dx, dgamma, dbeta = SpatialBatchNorm.backward(dout, cache)
        self.gamma.grad += dgamma
        self.beta.grad += dbeta
        return dx

    def cast_(self, dtype):
        super().cast_(dtype)
        self.running_mean = self.running_mean.astype(dtype)
        self.running_var = self.running_var.astype(dtype)


class ActivationLayer(Layer):
    def __init__(self, name, activation, prelu_init=PRELU_INIT, dtype=np.float32):
        if activation not in ACTIVATIONS:
            raise ConfigurationError('unknown activation %r, expected one of %s'
                                     % (activation, ', '.join(ACTIVATIONS)))
        self.name = name
        self.activation = activation
        self.slope = None
        if activation == 'prelu':
            self.slope = Parameter(name + '.slope', np.full(1, prelu_init, dtype=dtype))

    def parameters(self):
        return [self.slope] if self.slope is not None else []

    def forward(self, x, train=False):
        slope = self.slope.value if self.slope is not None else None
        return Activation.forward(self.activation, x, slope)

    def backward(self, dout, cache):
        dx, dslope = Activation.backward(dout, cache)
        if dslope is not None:
            self.slope.grad += dslope
        return dx


class Flatten(Layer):
    def __init__(self, name):
        self.name = name

    def forward(self, x, train=False):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, dout, cache):
        _require_cache(cache, 'flatten')
        return dout.reshape(cache)


def build_layer(spec, name, rng, dtype=np.float32):
    """Instantiate the layer described by a LayerSpec."""
    if spec.kind == 'conv2d':
        return Conv2d(name, spec.in_size, spec.out_size, spec.kernel_size, spec.stride,
                      spec.padding, rng, dtype)
    if spec.kind == 'linear':
        return Linear(name, spec.in_size, spec.out_size, rng, dtype)
    if spec.kind == 'batchnorm2d':
        return BatchNorm2d(name, spec.in_size, spec.eps, spec.momentum, dtype)
    if spec.kind == 'activation':
        return ActivationLayer(name, spec.activation, spec.prelu_init, dtype)
    if spec.kind == 'flatten':
        return Flatten(name)
    raise ConfigurationError('unknown layer kind %r' % spec.kind)


@dataclass
class Sequential:
    """A chain of layers run in order; backward walks the caches in reverse."""

    layers: List[Layer] = field(default_factory=list)

    @classmethod
    def from_specs(cls, specs, input_shape, prefix, rng, dtype=np.float32):
        """Validate the geometry of specs against input_shape and build the stack.

        Returns:
            (Sequential, output_shape)
        """
        shape = tuple(input_shape)
        layers = []
        for index, spec in enumerate(specs):
            shape = spec.output_shape(shape)
            layers.append(build_layer(spec, '%s.%d' % (prefix, index), rng, dtype))
        return cls(layers), shape

    def parameters(self):
        return [param for layer in self.layers for param in layer.parameters()]

    def buffers(self):
        return [buf for layer in self.layers for buf in layer.buffers()]

    def forward(self, x, train=False) -> Tuple[np.ndarray, List[Optional[tuple]]]:
        caches = []
        for layer in self.layers:
            x, cache = layer.forward(x, train)
            check_finite(x, layer.name)
            caches.append(cache)
        return x, caches

    def backward(self, dout, caches):
        if caches is None or len(caches) != len(self.layers):
            raise StateError('sequential backward needs one cache per layer')
        for layer, cache in zip(reversed(self.layers), reversed(caches)):
            dout = layer.backward(dout, cache)
        return dout

    def cast_(self, dtype):
        for layer in self.layers:
            layer.cast_(dtype)
