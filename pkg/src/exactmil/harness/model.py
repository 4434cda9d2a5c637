"""All-convolutional scoring model with hand-written backpropagation.

Every layer is a valid-mode strided cross-correlation.  Rectifiers follow
every layer except the last, which emits ``C + 1`` logit channels per
output location.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import InputTooSmall, ShapeMismatch
from ..tensor import LogitTensor


@dataclass
class ConvLayer:
    kernel: np.ndarray  # (out, in, k, k)
    bias: np.ndarray  # (out,)
    stride: int = 1

    @property
    def size(self) -> int:
        return self.kernel.shape[-1]


@dataclass
class ModelParams:
    layers: list[ConvLayer] = field(default_factory=list)

    @property
    def num_classes(self) -> int:
        return self.layers[-1].kernel.shape[0] - 1

    @property
    def in_channels(self) -> int:
        return self.layers[0].kernel.shape[1]

    def copy(self) -> "ModelParams":
        return ModelParams([ConvLayer(l.kernel.copy(), l.bias.copy(), l.stride)
                            for l in self.layers])

    def output_size(self, height: int, width: int) -> tuple[int, int]:
        for layer in self.layers:
            height = conv_output_size(height, layer.size, layer.stride)
            width = conv_output_size(width, layer.size, layer.stride)
        return height, width

    def architecture(self) -> list[dict]:
        return [{"out_channels": l.kernel.shape[0], "in_channels": l.kernel.shape[1],
                 "kernel": l.size, "stride": l.stride} for l in self.layers]

    def to_json(self) -> dict:
        return {
            "architecture": self.architecture(),
            "layers": [{"kernel": l.kernel.tolist(), "bias": l.bias.tolist()}
                       for l in self.layers],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "ModelParams":
        layers = []
        for arch, arrays in zip(doc["architecture"], doc["layers"]):
            kernel = np.asarray(arrays["kernel"], dtype=np.float64)
            bias = np.asarray(arrays["bias"], dtype=np.float64)
            expected = (arch["out_channels"], arch["in_channels"], arch["kernel"], arch["kernel"])
            if kernel.shape != expected or bias.shape != (arch["out_channels"],):
                raise ShapeMismatch(f"checkpoint layer shape {kernel.shape} != {expected}")
            layers.append(ConvLayer(kernel, bias, int(arch["stride"])))
        return cls(layers)


def conv_output_size(size: int, kernel: int, stride: int) -> int:
    if size < kernel:
        raise InputTooSmall(f"input extent {size} is smaller than kernel {kernel}")
    return (size - kernel) // stride + 1


def init_params(rng: np.random.Generator, num_classes: int, in_channels: int = 1,
                widths=(16, 32), kernel: int = 5, stride: int = 2) -> ModelParams:
    """He-initialized feature layers plus a 1x1 detection layer."""
    layers = []
    fan_in_channels = in_channels
    for width in widths:
        fan_in = fan_in_channels * kernel * kernel
        w = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(width, fan_in_channels, kernel, kernel))
        layers.append(ConvLayer(w, np.zeros(width), stride))
        fan_in_channels = width
    w = rng.normal(0.0, np.sqrt(1.0 / fan_in_channels), size=(num_classes + 1, fan_in_channels, 1, 1))
    layers.append(ConvLayer(w, np.zeros(num_classes + 1), 1))
    return ModelParams(layers)


def zero_params(num_classes: int, in_channels: int = 1, widths=(16, 32),
                kernel: int = 5, stride: int = 2) -> ModelParams:
    params = init_params(np.random.default_rng(0), num_classes, in_channels, widths, kernel, stride)
    for layer in params.layers:
        layer.kernel[...] = 0.0
        layer.bias[...] = 0.0
    return params


def _windows(x: np.ndarray, k: int, s: int) -> np.ndarray:
    """(B, C, H, W) -> (B, C, Ho, Wo, k, k) strided patch view."""
    return sliding_window_view(x, (k, k), axis=(2, 3))[:, :, ::s, ::s]


def forward_batch(params: ModelParams, x: np.ndarray):
    """Logits of shape (B, C+1, M, N) and the cache needed by :func:`backward_batch`."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 4 or x.shape[1] != params.in_channels:
        raise ShapeMismatch(f"expected (B, {params.in_channels}, H, W) input, got {x.shape}")
    params.output_size(x.shape[2], x.shape[3])
    cache = []
    last = len(params.layers) - 1
    for i, layer in enumerate(params.layers):
        win = _windows(x, layer.size, layer.stride)
        out = np.tensordot(win, layer.kernel, axes=([1, 4, 5], [1, 2, 3]))
        out = out.transpose(0, 3, 1, 2) + layer.bias[None, :, None, None]
        cache.append((x, win))
        x = np.maximum(out, 0.0) if i < last else out
    return x, cache


def backward_batch(params: ModelParams, cache, d_logits: np.ndarray) -> ModelParams:
    """Gradients of ``sum(d_logits * logits)`` with respect to every parameter."""
    grads = []
    d_out = d_logits
    for i in range(len(params.layers) - 1, -1, -1):
        layer = params.layers[i]
        x, win = cache[i]
        if i < len(params.layers) - 1:
            # Rectifier sits after this layer; its output is the next layer's input.
            d_out = d_out * (cache[i + 1][0] > 0)
        dk = np.tensordot(d_out, win, axes=([0, 2, 3], [0, 2, 3]))
        db = d_out.sum(axis=(0, 2, 3))
        grads.append(ConvLayer(dk, db, layer.stride))
        if i == 0:
            break
        k, s = layer.size, layer.stride
        Ho, Wo = d_out.shape[2], d_out.shape[3]
        dcol = np.tensordot(d_out, layer.kernel, axes=([1], [0]))  # (B, Ho, Wo, Cin, k, k)
        dx = np.zeros_like(x)
        for a in range(k):
            for b in range(k):
                dx[:, :, a:a + s * (Ho - 1) + 1:s, b:b + s * (Wo - 1) + 1:s] += \
                    dcol[:, :, :, :, a, b].transpose(0, 3, 1, 2)
        d_out = dx
    grads.reverse()
    return ModelParams(grads)


def model_forward(params: ModelParams, image: np.ndarray) -> LogitTensor:
    """Logits for one ``(channels, H, W)`` image."""
    logits, _ = forward_batch(params, np.asarray(image)[None])
    return LogitTensor(logits[0])


def model_backward(params: ModelParams, image: np.ndarray, d_logits) -> ModelParams:
    d = np.asarray(getattr(d_logits, "values", d_logits), dtype=np.float64)
    logits, cache = forward_batch(params, np.asarray(image)[None])
    if d.shape != logits.shape[1:]:
        raise ShapeMismatch(f"gradient shape {d.shape} != logits shape {logits.shape[1:]}")
    return backward_batch(params, cache, d[None])
