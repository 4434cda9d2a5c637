"""Label sets and per-location probability / logit tensors.

Tensors have shape ``(C + 1, M, N)`` and are stored channel-major,
row-major: the channel index varies slowest, then the row ``m``, then the
column ``n``.  Channel ``C + 1`` (1-based) is the background label.  All
public coordinates reported in errors are 1-based.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    InvalidTensor,
    LabelOutOfRange,
    NegativeEntry,
    NonFiniteInput,
    ShapeMismatch,
    UnnormalizedLocation,
)

NORMALIZATION_TOL = 1e-6


@dataclass(frozen=True)
class LabelSet:
    """Distinct class labels present in a bag, stored sorted ascending.

    The background label is never a member.  Duplicates in the input
    collapse, so ``LabelSet([2, 2, 4]) == LabelSet([4, 2])``.
    """

    labels: tuple[int, ...] = ()

    def __init__(self, labels: Iterable[int] = ()):
        items = sorted({int(x) for x in labels})
        if items and items[0] < 1:
            raise LabelOutOfRange(f"class labels start at 1, got {items[0]}")
        object.__setattr__(self, "labels", tuple(items))

    def __len__(self) -> int:
        return len(self.labels)

    def __iter__(self):
        return iter(self.labels)

    def __contains__(self, label) -> bool:
        return label in self.labels

    def check_range(self, num_classes: int) -> None:
        if self.labels and self.labels[-1] > num_classes:
            raise LabelOutOfRange(
                f"label {self.labels[-1]} outside [1, {num_classes}]")

    def to_mask(self) -> int:
        """Bitmask with bit ``l - 1`` set for every member ``l``."""
        mask = 0
        for label in self.labels:
            mask |= 1 << (label - 1)
        return mask

    @classmethod
    def from_mask(cls, mask: int) -> "LabelSet":
        return cls(i + 1 for i in range(mask.bit_length()) if mask >> i & 1)

    @classmethod
    def from_binary_vector(cls, bits: Sequence[int]) -> "LabelSet":
        return cls(i + 1 for i, b in enumerate(bits) if b)

    def __repr__(self) -> str:
        return f"LabelSet({set(self.labels) or '{}'})"


def to_binary_vector(labels: LabelSet, num_classes: int) -> list[int]:
    labels.check_range(num_classes)
    return [1 if i in labels else 0 for i in range(1, num_classes + 1)]


def _frozen_array(values) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class _ChannelTensor:
    values: np.ndarray

    def __post_init__(self):
        arr = _frozen_array(self.values)
        if arr.ndim != 3 or arr.shape[0] < 2 or arr.shape[1] < 1 or arr.shape[2] < 1:
            raise ShapeMismatch(
                f"expected shape (C+1, M, N) with C, M, N >= 1, got {arr.shape}")
        object.__setattr__(self, "values", arr)

    @property
    def num_classes(self) -> int:
        return self.values.shape[0] - 1

    @property
    def background(self) -> int:
        """1-based channel index of the background label."""
        return self.values.shape[0]

    @property
    def height(self) -> int:
        return self.values.shape[1]

    @property
    def width(self) -> int:
        return self.values.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.values.shape


class ProbTensor(_ChannelTensor):
    """Per-location categorical distributions over ``C + 1`` labels."""


class LogitTensor(_ChannelTensor):
    """Unnormalized per-location scores feeding a softmax."""

    def __post_init__(self):
        super().__post_init__()
        if not np.all(np.isfinite(self.values)):
            raise NonFiniteInput("logit tensor contains non-finite entries")


def validate_prob_tensor(P: ProbTensor) -> None:
    values = P.values
    if not np.all(np.isfinite(values)):
        raise NonFiniteInput("probability tensor contains non-finite entries")
    negative = np.argwhere(values < 0)
    if negative.size:
        label, m, n = (int(i) + 1 for i in negative[0])
        raise NegativeEntry(label, m, n)
    sums = values.sum(axis=0)
    bad = np.argwhere(np.abs(sums - 1.0) > NORMALIZATION_TOL)
    if bad.size:
        m, n = (int(i) for i in bad[0])
        raise UnnormalizedLocation(m + 1, n + 1, float(sums[m, n]))


def softmax_locations(Z: LogitTensor) -> ProbTensor:
    z = Z.values
    if not np.all(np.isfinite(z)):
        raise NonFiniteInput("logit tensor contains non-finite entries")
    e = np.exp(z - z.max(axis=0, keepdims=True))
    return ProbTensor(e / e.sum(axis=0, keepdims=True))


# ----------------------------------------------------------------------------
# JSON file formats
# ----------------------------------------------------------------------------

def tensor_to_json(T: _ChannelTensor) -> dict:
    kind = "logit" if isinstance(T, LogitTensor) else "prob"
    return {"kind": kind, "shape": list(T.shape), "data": T.values.ravel().tolist()}


def tensor_from_json(doc: dict) -> ProbTensor | LogitTensor:
    try:
        kind = doc["kind"]
        shape = tuple(int(s) for s in doc["shape"])
        data = np.asarray(doc["data"], dtype=np.float64)
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidTensor(f"malformed tensor document: {exc}") from exc
    if len(shape) != 3 or data.size != int(np.prod(shape)):
        raise ShapeMismatch(f"shape {list(shape)} does not match {data.size} data values")
    values = data.reshape(shape)
    if kind == "prob":
        return ProbTensor(values)
    if kind == "logit":
        return LogitTensor(values)
    raise InvalidTensor(f"unknown tensor kind {kind!r}")


def load_tensor(path: str | Path) -> ProbTensor | LogitTensor:
    with open(path) as fh:
        return tensor_from_json(json.load(fh))


def save_tensor(T: _ChannelTensor, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(tensor_to_json(T), fh)


def load_label_set(path: str | Path) -> LabelSet:
    with open(path) as fh:
        doc = json.load(fh)
    try:
        return LabelSet(doc["labels"])
    except (KeyError, TypeError) as exc:
        raise LabelOutOfRange(f"malformed label-set document: {exc}") from exc


def save_label_set(labels: LabelSet, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump({"labels": list(labels.labels)}, fh)
