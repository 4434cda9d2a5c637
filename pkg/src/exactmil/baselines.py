"""Losses the exact likelihood is compared against.

``traditional_mil_cost`` is the max-pooling multiclass MIL cost.  It needs a
tensor normalized over *all* entries, not per location, which is what
:func:`global_softmax` produces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyLabelSet, InvalidTensor, MaxIsZero, NonFiniteInput, ShapeNotSingleton
from .likelihood import likelihood_exact
from .tensor import LabelSet, LogitTensor, ProbTensor, _ChannelTensor, validate_prob_tensor

GLOBAL_NORMALIZATION_TOL = 1e-6


class GlobalProbTensor(_ChannelTensor):
    """Nonnegative ``(C+1, M, N)`` tensor whose entries sum to one overall."""

    def __post_init__(self):
        super().__post_init__()
        if np.any(self.values < 0) or not np.all(np.isfinite(self.values)):
            raise InvalidTensor("global probability tensor needs finite nonnegative entries")
        total = float(self.values.sum())
        if abs(total - 1.0) > GLOBAL_NORMALIZATION_TOL:
            raise InvalidTensor(f"entries sum to {total!r}, not 1")


def global_softmax(Z: LogitTensor) -> GlobalProbTensor:
    z = Z.values
    if not np.all(np.isfinite(z)):
        raise NonFiniteInput("logit tensor contains non-finite entries")
    e = np.exp(z - z.max())
    return GlobalProbTensor(e / e.sum())


def traditional_mil_cost(labels: LabelSet, Q: GlobalProbTensor) -> float:
    if not len(labels):
        raise EmptyLabelSet("the max-pooling MIL cost is undefined for an empty label set")
    labels.check_range(Q.num_classes)
    total = 0.0
    for label in labels:
        peak = float(Q.values[label - 1].max())
        if peak <= 0.0:
            raise MaxIsZero(f"class {label} has zero mass at every location")
        total += math.log(peak)
    return -total / len(labels)


def traditional_mil_logit_grad(labels: LabelSet, Z: LogitTensor) -> tuple[float, np.ndarray]:
    """Cost and a subgradient with respect to the logits.

    The max picks the first maximizing location in row-major scan order.
    """
    Q = global_softmax(Z)
    cost = traditional_mil_cost(labels, Q)
    grad = Q.values.copy()
    weight = 1.0 / len(labels)
    width = Q.width
    for label in labels:
        flat = int(np.argmax(Q.values[label - 1]))
        grad[label - 1, flat // width, flat % width] -= weight
    return cost, grad


def cross_entropy_special_case(label: int, P: ProbTensor) -> float:
    """``-log p[label]`` for a single-location tensor."""
    if P.height != 1 or P.width != 1:
        raise ShapeNotSingleton(f"expected a 1x1 grid, got {P.height}x{P.width}")
    validate_prob_tensor(P)
    LabelSet([label]).check_range(P.num_classes)
    p = float(P.values[label - 1, 0, 0])
    return math.inf if p == 0.0 else -math.log(p)


def negative_bag_logprob(P: ProbTensor) -> float:
    """Log probability that nothing but background is emitted."""
    return likelihood_exact(LabelSet(), P).logprob


def classify_global_max(Z: LogitTensor) -> int:
    """Class whose single most confident location is largest under the global softmax.

    This is the decision rule matching :func:`traditional_mil_cost`.
    """
    Q = global_softmax(Z)
    return int(np.argmax(Q.values[:-1].max(axis=(1, 2)))) + 1
