"""Probability that a probability tensor emits exactly a given label set.

Four routes to the same number:

* :func:`likelihood_exact` -- alternating inclusion-exclusion series over the
  subsets of the label set, each term an ``alpha`` (every location emits a
  label from a subset).
* :func:`likelihood_beta` -- ``alpha`` of the full augmented set minus the
  ``beta`` terms (every label of a subset emitted at least once, nothing
  else emitted) that miss some class of the label set.
* :func:`likelihood_upper_bound` -- the ``beta`` route truncated to low-order
  terms; since every ``beta`` is nonnegative this bounds the exact value
  from above.
* :func:`brute_force_likelihood` -- enumeration of every emission grid.

Everything is carried as logarithms; alternating sums use signed-log
arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Iterator

import numpy as np

from .errors import EmptySubset, EnumerationTooLarge, NumericalError, SubsetOrderExceeded
from .signed_log import ZERO, SignedLogValue, sl_add, sl_from_log, sl_sum
from .tensor import LabelSet, ProbTensor, validate_prob_tensor

MAX_SUBSET_ORDER = 16
BRUTE_FORCE_LIMIT = 10**7
# Negative results or betas smaller than this (linear domain) are rounding noise.
NEGATIVE_NOISE_TOL = 1e-9

EXACT = "exact-series"
BETA = "beta-recursion"
BRUTE = "brute-force"


def truncated(k: int) -> str:
    return f"truncated({k})"


@dataclass(frozen=True)
class AugmentedSubset:
    """Subset of ``labels + {background}``.

    ``mask`` has bit ``i`` set when the ``i``-th smallest member of the
    label set is included; ``phi`` flags the background label.
    """

    mask: int
    phi: bool

    def __len__(self) -> int:
        return bin(self.mask).count("1") + int(self.phi)

    def channels(self, labels: LabelSet, num_classes: int) -> list[int]:
        """0-based channel indices of the members."""
        out = [label - 1 for i, label in enumerate(labels.labels) if self.mask >> i & 1]
        if self.phi:
            out.append(num_classes)
        return out

    def members(self, labels: LabelSet, num_classes: int) -> tuple[int, ...]:
        return tuple(c + 1 for c in self.channels(labels, num_classes))


@dataclass(frozen=True)
class LikelihoodResult:
    sign: int
    logprob: float
    terms_evaluated: int
    method: str

    @property
    def is_zero(self) -> bool:
        return self.sign == 0

    def prob(self) -> float:
        return 0.0 if self.sign == 0 else math.exp(self.logprob)

    def to_dict(self) -> dict:
        logprob = "-inf" if self.sign == 0 else self.logprob
        return {"logprob": logprob, "method": self.method,
                "terms_evaluated": self.terms_evaluated}


def _result(total: SignedLogValue, scale: float, terms: int, method: str) -> LikelihoodResult:
    """Turn an accumulated signed-log probability into a result.

    ``scale`` is the log magnitude of the largest term; a negative total
    within rounding noise of it is reported as zero probability.
    """
    if total.sign < 0:
        if total.logmag - scale > math.log(NEGATIVE_NOISE_TOL):
            raise NumericalError(
                f"{method} produced a negative probability {-math.exp(total.logmag):.3e}")
        total = ZERO
    if total.sign == 0:
        return LikelihoodResult(0, -math.inf, terms, method)
    return LikelihoodResult(1, min(total.logmag, 0.0), terms, method)


def _check(labels: LabelSet, P: ProbTensor) -> None:
    validate_prob_tensor(P)
    labels.check_range(P.num_classes)


def _location_log_sums(P: ProbTensor, channels) -> np.ndarray:
    """``log`` of the per-location probability mass on ``channels``."""
    with np.errstate(divide="ignore"):
        return np.log(P.values[channels].sum(axis=0))


def _log_alpha_channels(P: ProbTensor, channels) -> float:
    return float(_location_log_sums(P, channels).sum())


def log_alpha(S: AugmentedSubset, P: ProbTensor, labels: LabelSet) -> float:
    """Log probability that every location emits a member of ``S``.

    ``S`` indexes into ``labels``; ``-inf`` when some location puts zero mass
    on ``S``.
    """
    if len(S) == 0:
        raise EmptySubset("alpha needs a nonempty subset")
    _check(labels, P)
    return _log_alpha_channels(P, S.channels(labels, P.num_classes))


def log_alpha_of(members, P: ProbTensor) -> float:
    """:func:`log_alpha` addressed by 1-based channel numbers (background = C+1)."""
    channels = sorted({int(c) - 1 for c in members})
    if not channels:
        raise EmptySubset("alpha needs a nonempty subset")
    validate_prob_tensor(P)
    return _log_alpha_channels(P, channels)


def _guard(order: int, max_subset_order: int) -> None:
    if order > max_subset_order:
        raise SubsetOrderExceeded(order, max_subset_order)


def _submasks_ascending(mask: int) -> Iterator[int]:
    """All submasks of ``mask`` in increasing numeric order."""
    bits = [i for i in range(mask.bit_length()) if mask >> i & 1]
    for j in range(1 << len(bits)):
        sub = 0
        for k, b in enumerate(bits):
            if j >> k & 1:
                sub |= 1 << b
        yield sub


def _alternating_sum(mask: int, log_alphas) -> tuple[SignedLogValue, float]:
    """Inclusion-exclusion sum over the submasks of ``mask``.

    ``log_alphas[sub]`` is ``log alpha`` of the classes in ``sub`` plus the
    background.  Returns the signed-log total and the largest term's log.
    """
    order = bin(mask).count("1")
    total = ZERO
    scale = -math.inf
    for sub in _submasks_ascending(mask):
        la = log_alphas[sub]
        if la == -math.inf:
            continue
        sign = -1 if (order - bin(sub).count("1")) % 2 else 1
        total = sl_add(total, SignedLogValue(sign, la))
        scale = max(scale, la)
    return total, scale


def _log_alpha_table(labels: LabelSet, P: ProbTensor) -> list[float]:
    """``log alpha`` of ``S + {background}`` for every subset ``S`` of the labels,
    indexed by bitmask over label positions."""
    bg = P.num_classes
    channels = [label - 1 for label in labels.labels]
    table = []
    for mask in range(1 << len(channels)):
        chosen = [c for i, c in enumerate(channels) if mask >> i & 1]
        table.append(_log_alpha_channels(P, chosen + [bg]))
    return table


def likelihood_exact(labels: LabelSet, P: ProbTensor,
                     max_subset_order: int = MAX_SUBSET_ORDER) -> LikelihoodResult:
    """Exact probability of the label set by the alternating subset series.

    Costs ``2**len(labels)`` alpha evaluations, each linear in the grid
    size.  More labels than grid locations is reported as probability zero.
    """
    _guard(len(labels), max_subset_order)
    _check(labels, P)
    table = _log_alpha_table(labels, P)
    full = (1 << len(labels)) - 1
    total, scale = _alternating_sum(full, table)
    if len(labels) > P.height * P.width:
        return LikelihoodResult(0, -math.inf, len(table), EXACT)
    return _result(total, scale, len(table), EXACT)


def _beta_recursion(labels: LabelSet, P: ProbTensor, max_order: int) -> dict[int, SignedLogValue]:
    """Signed-log betas keyed by a combined mask (bit ``len(labels)`` is the
    background), for every nonempty subset of order ``<= max_order``."""
    L = len(labels)
    channels = [label - 1 for label in labels.labels] + [P.num_classes]
    betas: dict[int, SignedLogValue] = {}
    for order in range(1, max_order + 1):
        for combo in combinations(range(L + 1), order):
            mask = sum(1 << i for i in combo)
            alpha = sl_from_log(_log_alpha_channels(P, [channels[i] for i in combo]))
            missing = sl_sum(-betas[sub] for sub in _submasks_ascending(mask)
                             if sub and sub != mask)
            beta = sl_add(alpha, missing)
            if beta.sign < 0:
                if beta.logmag > math.log(NEGATIVE_NOISE_TOL):
                    raise NumericalError(f"negative beta {-math.exp(beta.logmag):.3e}")
                beta = ZERO
            betas[mask] = beta
    return betas


def _split_mask(mask: int, L: int) -> AugmentedSubset:
    return AugmentedSubset(mask & ((1 << L) - 1), bool(mask >> L & 1))


def beta_table(labels: LabelSet, P: ProbTensor, max_order: int | None = None,
               max_subset_order: int = MAX_SUBSET_ORDER) -> dict[AugmentedSubset, float]:
    """Log ``beta`` for every nonempty subset of ``labels + {background}`` of
    order at most ``max_order`` (default: all of them)."""
    L = len(labels)
    if max_order is None:
        max_order = L + 1
    if max_order > L + 1:
        raise SubsetOrderExceeded(max_order, L + 1)
    _guard(max_order - 1, max_subset_order)
    _check(labels, P)
    betas = _beta_recursion(labels, P, max_order)
    return {_split_mask(mask, L): b.log() for mask, b in betas.items()}


def _beta_route(labels: LabelSet, P: ProbTensor, k: int, method: str) -> LikelihoodResult:
    """Full-set alpha minus betas of subsets ``U`` and ``U + {background}``
    with ``U`` a proper subset of ``labels`` of size ``<= k``."""
    L = len(labels)
    full = (1 << L) - 1
    k = min(k, L - 1)
    log_full = _log_alpha_channels(P, [label - 1 for label in labels.labels] + [P.num_classes])
    if L == 0:
        return _result(sl_from_log(log_full), log_full, 1, method)
    betas = _beta_recursion(labels, P, k + 1)
    subtracted = []
    for mask in sorted(betas):
        u = mask & full
        if u == full or bin(u).count("1") > k:
            continue
        subtracted.append(betas[mask])
    total = sl_add(sl_from_log(log_full), -sl_sum(subtracted))
    return _result(total, log_full, 1 + len(subtracted), method)


def likelihood_beta(labels: LabelSet, P: ProbTensor,
                    max_subset_order: int = MAX_SUBSET_ORDER) -> LikelihoodResult:
    _guard(len(labels), max_subset_order)
    _check(labels, P)
    result = _beta_route(labels, P, len(labels), BETA)
    if len(labels) > P.height * P.width:
        return LikelihoodResult(0, -math.inf, result.terms_evaluated, BETA)
    return result


def likelihood_upper_bound(labels: LabelSet, P: ProbTensor, k: int,
                           max_subset_order: int = MAX_SUBSET_ORDER) -> LikelihoodResult:
    """Upper bound keeping only subtracted betas over at most ``k`` classes.

    ``k = len(labels) - 1`` keeps every term and reproduces the exact value.
    Only ``k`` is limited by ``max_subset_order``, so large label sets are
    fine at small ``k``.
    """
    if not 0 <= k <= max(len(labels), 0):
        raise ValueError(f"truncation order must lie in [0, {len(labels)}], got {k}")
    _guard(k, max_subset_order)
    _check(labels, P)
    return _beta_route(labels, P, k, truncated(k))


def brute_force_distribution(P: ProbTensor, limit: int = BRUTE_FORCE_LIMIT) -> np.ndarray:
    """Probability of every emitted label set, indexed by :meth:`LabelSet.to_mask`.

    Enumerates all ``(C+1)**(M*N)`` emission grids; each grid's probability
    is the product of its per-location emission probabilities.
    """
    validate_prob_tensor(P)
    K = P.num_classes + 1
    locs = P.height * P.width
    count = K ** locs
    if count > limit:
        raise EnumerationTooLarge(f"{K}**{locs} = {count} emission grids exceeds {limit}")
    flat = P.values.reshape(K, locs)
    bit = np.array([1 << c for c in range(K - 1)] + [0], dtype=np.int64)
    out = np.zeros(1 << (K - 1))
    chunk = 1 << 20
    for start in range(0, count, chunk):
        code = np.arange(start, min(start + chunk, count), dtype=np.int64)
        prob = np.ones(code.shape)
        mask = np.zeros(code.shape, dtype=np.int64)
        for loc in range(locs):
            digit = code % K
            code //= K
            prob *= flat[digit, loc]
            mask |= bit[digit]
        out += np.bincount(mask, weights=prob, minlength=out.size)
    return out


def brute_force_likelihood(labels: LabelSet, P: ProbTensor,
                           limit: int = BRUTE_FORCE_LIMIT) -> LikelihoodResult:
    labels.check_range(P.num_classes)
    dist = brute_force_distribution(P, limit)
    prob = float(dist[labels.to_mask()])
    count = (P.num_classes + 1) ** (P.height * P.width)
    if prob <= 0.0:
        return LikelihoodResult(0, -math.inf, count, BRUTE)
    return LikelihoodResult(1, min(math.log(prob), 0.0), count, BRUTE)


def sum_over_all_label_sets(P: ProbTensor, max_subset_order: int = MAX_SUBSET_ORDER) -> float:
    """Log of the total exact probability over all ``2**C`` label sets (should be 0).

    Each label set's probability is the same alternating series as
    :func:`likelihood_exact`; the alpha values are shared across label sets.
    """
    C = P.num_classes
    _guard(C, max_subset_order)
    validate_prob_tensor(P)
    table = _log_alpha_table(LabelSet(range(1, C + 1)), P)
    locs = P.height * P.width
    total = ZERO
    for mask in range(1 << C):
        if bin(mask).count("1") > locs:
            continue
        part, scale = _alternating_sum(mask, table)
        res = _result(part, scale, 0, EXACT)
        if res.sign:
            total = sl_add(total, sl_from_log(res.logprob))
    return total.log()
