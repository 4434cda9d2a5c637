"""Sign and log-magnitude arithmetic for alternating sums of tiny numbers.

A value ``(sign, logmag)`` stands for ``sign * exp(logmag)``.  Addition
anchors at the operand of larger magnitude so ``exp`` only ever sees a
nonpositive argument.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

# Opposite-sign operands closer than this in log magnitude cancel to zero.
CANCEL_TOL = 1e-14


@dataclass(frozen=True)
class SignedLogValue:
    sign: int
    logmag: float = -math.inf

    @property
    def is_zero(self) -> bool:
        return self.sign == 0

    def value(self) -> float:
        """Linear-domain value (may underflow to 0.0)."""
        return 0.0 if self.sign == 0 else self.sign * math.exp(self.logmag)

    def log(self) -> float:
        """Extended-real log of a nonnegative value."""
        if self.sign < 0:
            raise ValueError("log of a negative signed-log value")
        return -math.inf if self.sign == 0 else self.logmag

    def __neg__(self) -> "SignedLogValue":
        return SignedLogValue(-self.sign, self.logmag)


ZERO = SignedLogValue(0)
ONE = SignedLogValue(1, 0.0)


def sl_from_log(logmag: float) -> SignedLogValue:
    if logmag == -math.inf:
        return ZERO
    return SignedLogValue(1, float(logmag))


def sl_add(a: SignedLogValue, b: SignedLogValue) -> SignedLogValue:
    if a.sign == 0:
        return b
    if b.sign == 0:
        return a
    # Anchor on the larger magnitude; ties resolved by sign so that the
    # operand order never matters.
    if (b.logmag, b.sign) > (a.logmag, a.sign):
        a, b = b, a
    diff = b.logmag - a.logmag
    if a.sign == b.sign:
        return SignedLogValue(a.sign, a.logmag + math.log1p(math.exp(diff)))
    if diff > -CANCEL_TOL:
        return ZERO
    return SignedLogValue(a.sign, a.logmag + math.log1p(-math.exp(diff)))


def sl_sum(terms: Iterable[SignedLogValue]) -> SignedLogValue:
    """Left fold of :func:`sl_add` in input order."""
    total = ZERO
    for term in terms:
        total = sl_add(total, term)
    return total


def sl_add_arrays(sign_a, log_a, sign_b, log_b):
    """Elementwise :func:`sl_add` over numpy arrays of signs and log magnitudes.

    Returns new ``(sign, logmag)`` arrays; zero entries carry ``-inf``.
    """
    sign_a = np.asarray(sign_a, dtype=np.int8)
    sign_b = np.asarray(sign_b, dtype=np.int8)
    log_a = np.where(sign_a == 0, -np.inf, log_a)
    log_b = np.where(sign_b == 0, -np.inf, log_b)
    swap = (log_b > log_a) | ((log_b == log_a) & (sign_b > sign_a))
    hi_s = np.where(swap, sign_b, sign_a)
    lo_s = np.where(swap, sign_a, sign_b)
    hi_l = np.where(swap, log_b, log_a)
    lo_l = np.where(swap, log_a, log_b)
    with np.errstate(invalid="ignore"):
        diff = np.where(lo_s == 0, -np.inf, lo_l - hi_l)
    same = (hi_s == lo_s) | (lo_s == 0)
    with np.errstate(divide="ignore"):
        out_l = np.where(
            same,
            hi_l + np.log1p(np.exp(diff)),
            hi_l + np.log1p(-np.exp(np.minimum(diff, -CANCEL_TOL))),
        )
    out_s = hi_s.copy()
    cancelled = ~same & (diff > -CANCEL_TOL)
    out_s[cancelled] = 0
    out_l = np.where(out_s == 0, -np.inf, out_l)
    return out_s, out_l
