"""Gradients of the exact log-likelihood with respect to probabilities and logits."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ZeroProbability
from .likelihood import (
    EXACT,
    MAX_SUBSET_ORDER,
    LikelihoodResult,
    _alternating_sum,
    _check,
    _guard,
    _location_log_sums,
    _result,
    _submasks_ascending,
    likelihood_exact,
)
from .signed_log import sl_add_arrays
from .tensor import LabelSet, LogitTensor, ProbTensor, softmax_locations


@dataclass(frozen=True, eq=False)
class GradTensor:
    values: np.ndarray
    mode: str  # "prob" or "logit"

    @property
    def shape(self):
        return self.values.shape


def exact_with_prob_grad(labels: LabelSet, P: ProbTensor,
                         max_subset_order: int = MAX_SUBSET_ORDER):
    """Log-likelihood and its gradient with respect to ``P`` in one subset sweep.

    For a subset ``S`` (with background) the term ``alpha_S`` is a product
    of per-location sums, so its derivative with respect to ``p[c, m, n]``
    for ``c`` in ``S`` is ``alpha_S / s_S[m, n]``.  Subsets with zero alpha
    contribute nothing and are skipped.
    """
    _guard(len(labels), max_subset_order)
    _check(labels, P)
    C, M, N = P.num_classes, P.height, P.width
    channels = [label - 1 for label in labels.labels]
    L = len(channels)
    full = (1 << L) - 1

    log_alphas = []
    per_location = []
    for mask in range(1 << L):
        chosen = [c for i, c in enumerate(channels) if mask >> i & 1] + [C]
        log_s = _location_log_sums(P, chosen)
        log_alphas.append(float(log_s.sum()))
        per_location.append((chosen, log_s))

    total, scale = _alternating_sum(full, log_alphas)
    if L > M * N:
        result = LikelihoodResult(0, -math.inf, len(log_alphas), EXACT)
    else:
        result = _result(total, scale, len(log_alphas), EXACT)
    if result.is_zero:
        raise ZeroProbability(f"label set {labels!r} has probability zero")

    acc_sign = np.zeros((C + 1, M, N), dtype=np.int8)
    acc_log = np.full((C + 1, M, N), -np.inf)
    for sub in _submasks_ascending(full):
        la = log_alphas[sub]
        if la == -math.inf:
            continue
        chosen, log_s = per_location[sub]
        sign = -1 if (L - bin(sub).count("1")) % 2 else 1
        term_log = la - log_s
        term_sign = np.full((M, N), sign, dtype=np.int8)
        for c in chosen:
            acc_sign[c], acc_log[c] = sl_add_arrays(acc_sign[c], acc_log[c], term_sign, term_log)
    grad = np.where(acc_sign == 0, 0.0, acc_sign * np.exp(acc_log - result.logprob))
    return result, grad


def grad_wrt_prob(labels: LabelSet, P: ProbTensor,
                  max_subset_order: int = MAX_SUBSET_ORDER) -> GradTensor:
    _, grad = exact_with_prob_grad(labels, P, max_subset_order)
    return GradTensor(grad, "prob")


def exact_with_logit_grad(labels: LabelSet, Z: LogitTensor,
                          max_subset_order: int = MAX_SUBSET_ORDER):
    P = softmax_locations(Z)
    result, g = exact_with_prob_grad(labels, P, max_subset_order)
    p = P.values
    return result, p * (g - (p * g).sum(axis=0, keepdims=True))


def grad_wrt_logits(labels: LabelSet, Z: LogitTensor,
                    max_subset_order: int = MAX_SUBSET_ORDER) -> GradTensor:
    """Gradient of the log-likelihood through the per-location softmax.

    Sums to zero over channels at every location.
    """
    _, grad = exact_with_logit_grad(labels, Z, max_subset_order)
    return GradTensor(grad, "logit")


def finite_difference_gradient(labels: LabelSet, Z: LogitTensor, h: float = 1e-5) -> GradTensor:
    if h <= 0:
        raise ValueError("finite-difference step must be positive")
    base = Z.values
    grad = np.empty_like(base)

    def loglik(values):
        res = likelihood_exact(labels, softmax_locations(LogitTensor(values)))
        if res.is_zero:
            raise ZeroProbability("zero probability at a probed point")
        return res.logprob

    for idx in np.ndindex(base.shape):
        plus = base.copy()
        minus = base.copy()
        plus[idx] += h
        minus[idx] -= h
        grad[idx] = (loglik(plus) - loglik(minus)) / (2 * h)
    return GradTensor(grad, "logit")
