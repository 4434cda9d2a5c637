"""Test-time read-outs: emission maps, single-label classifiers, transcription."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ShapeMismatch
from .tensor import ProbTensor, validate_prob_tensor


@dataclass(frozen=True, eq=False)
class EmissionMap:
    """``M x N`` grid of 1-based labels; ``background`` is ``C + 1``."""

    cells: np.ndarray
    num_classes: int

    def __post_init__(self):
        cells = np.array(self.cells, dtype=np.int64)
        if cells.ndim != 2:
            raise ShapeMismatch(f"emission map must be 2-D, got shape {cells.shape}")
        if cells.size and (cells.min() < 1 or cells.max() > self.num_classes + 1):
            raise ShapeMismatch(f"cells must lie in [1, {self.num_classes + 1}]")
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)

    @property
    def background(self) -> int:
        return self.num_classes + 1

    def __eq__(self, other) -> bool:
        return (isinstance(other, EmissionMap) and self.num_classes == other.num_classes
                and np.array_equal(self.cells, other.cells))

    def to_json(self) -> dict:
        M, N = self.cells.shape
        return {"shape": [M, N], "num_classes": self.num_classes,
                "cells": self.cells.ravel().tolist()}

    @classmethod
    def from_json(cls, doc: dict, num_classes: int | None = None) -> "EmissionMap":
        M, N = (int(s) for s in doc["shape"])
        cells = np.asarray(doc["cells"], dtype=np.int64)
        if cells.size != M * N:
            raise ShapeMismatch(f"shape {[M, N]} does not match {cells.size} cells")
        if num_classes is None:
            num_classes = int(doc.get("num_classes", 10))
        return cls(cells.reshape(M, N), num_classes)


def load_emission_map(path: str | Path, num_classes: int | None = None) -> EmissionMap:
    with open(path) as fh:
        return EmissionMap.from_json(json.load(fh), num_classes)


def emission_map(P: ProbTensor) -> EmissionMap:
    validate_prob_tensor(P)
    # np.argmax returns the first maximum, i.e. the smallest label.
    return EmissionMap(np.argmax(P.values, axis=0) + 1, P.num_classes)


def classify_alpha(P: ProbTensor) -> int:
    """Label maximizing ``sum_{m,n} log(p[l] + p[background])``."""
    validate_prob_tensor(P)
    v = P.values
    with np.errstate(divide="ignore"):
        scores = np.log(v[:-1] + v[-1]).sum(axis=(1, 2))
    return int(np.argmax(scores)) + 1


def classify_meanpool(P: ProbTensor) -> int:
    """Label with the largest average probability over the grid."""
    validate_prob_tensor(P)
    return int(np.argmax(P.values[:-1].mean(axis=(1, 2)))) + 1


def column_sequence(emap: EmissionMap) -> list[int]:
    """Majority non-background label per column, left to right."""
    bg = emap.background
    out = []
    for column in emap.cells.T:
        counts = Counter(int(c) for c in column if c != bg)
        if not counts:
            out.append(bg)
            continue
        best = max(counts.values())
        out.append(min(label for label, n in counts.items() if n == best))
    return out


def collapse_transcribe(seq: Sequence[int], background: int) -> list[int]:
    """Emit one label per maximal run; background cells end a run."""
    out = []
    previous = background
    for label in seq:
        label = int(label)
        if label != background and label != previous:
            out.append(label)
        previous = label
    return out


def transcription_string(labels: Sequence[int], digits: bool = False) -> str:
    """Render a transcription; ``digits`` maps label 10 to "0" as for house numbers."""
    if digits:
        return "".join("0" if label == 10 else str(label) for label in labels)
    if any(label > 9 for label in labels):
        return " ".join(str(label) for label in labels)
    return "".join(str(label) for label in labels)
