"""SGD training and evaluation of the toy model under weak (label-set) supervision."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..baselines import classify_global_max, traditional_mil_logit_grad
from ..decode import classify_alpha, classify_meanpool
from ..errors import DivergedObjective, ZeroProbability, ZeroProbabilitySample
from ..gradient import exact_with_logit_grad
from ..tensor import LabelSet, LogitTensor, softmax_locations
from .model import ModelParams, backward_batch, forward_batch, init_params
from .scenes import SceneSample, generate_dataset, make_templates, stack_images, stream

log = logging.getLogger(__name__)

LOSSES = ("exact", "mil")
OPTIMIZERS = ("normalized-sgd", "sgd")


@dataclass
class TrainConfig:
    epochs: int = 20
    batch_size: int = 64
    lr_high: float = 0.01
    lr_low: float = 0.001
    seed: int = 7
    num_classes: int = 5
    glyph_size: int = 8
    height: int = 24
    width: int = 24
    noise: float = 0.1
    train_size: int = 6000
    glyphs_per_scene: int = 2
    test_size: int = 1000
    heldout_size: int = 500
    widths: tuple[int, ...] = (16, 32)
    loss: str = "exact"
    optimizer: str = "normalized-sgd"

    def __post_init__(self):
        self.widths = tuple(self.widths)
        if self.epochs < 2:
            raise ValueError("training needs at least 2 epochs")
        if self.lr_high <= 0 or self.lr_low <= 0:
            raise ValueError("learning rates must be positive")
        if self.batch_size < 1 or self.train_size < 1:
            raise ValueError("batch and dataset sizes must be positive")
        if self.loss not in LOSSES:
            raise ValueError(f"loss must be one of {LOSSES}")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}")

    def learning_rate(self, epoch: int) -> float:
        """0-based epoch; the rate drops at the halfway point."""
        return self.lr_high if epoch < self.epochs / 2 else self.lr_low

    def templates(self):
        return make_templates(stream(self.seed, "templates"), self.num_classes, self.glyph_size)


def nll_objective(params: ModelParams, images: np.ndarray, labels: list[LabelSet]):
    """Mean negative exact log-likelihood over a batch, and its parameter gradients."""
    logits, cache = forward_batch(params, images)
    d_logits = np.empty_like(logits)
    total = 0.0
    for i, label_set in enumerate(labels):
        try:
            result, grad = exact_with_logit_grad(label_set, LogitTensor(logits[i]))
        except ZeroProbability as exc:
            raise ZeroProbabilitySample(i) from exc
        total -= result.logprob
        d_logits[i] = -grad
    batch = len(labels)
    return total / batch, backward_batch(params, cache, d_logits / batch)


def mil_objective(params: ModelParams, images: np.ndarray, labels: list[LabelSet]):
    """Mean max-pooling MIL cost under a global softmax, and a subgradient."""
    logits, cache = forward_batch(params, images)
    d_logits = np.empty_like(logits)
    total = 0.0
    for i, label_set in enumerate(labels):
        cost, grad = traditional_mil_logit_grad(label_set, LogitTensor(logits[i]))
        total += cost
        d_logits[i] = grad
    batch = len(labels)
    return total / batch, backward_batch(params, cache, d_logits / batch)


OBJECTIVES = {"exact": nll_objective, "mil": mil_objective}


def _rms(a: np.ndarray) -> float:
    return float(np.sqrt(np.mean(a * a)))


def sgd_step(params: ModelParams, grads: ModelParams, lr: float, normalized: bool) -> None:
    """In-place gradient step.

    With ``normalized`` each kernel and bias gradient is divided by its own
    root-mean-square, so ``lr`` is the RMS size of the update per tensor.
    """
    for layer, grad in zip(params.layers, grads.layers):
        for value, g in ((layer.kernel, grad.kernel), (layer.bias, grad.bias)):
            if normalized:
                scale = _rms(g)
                if scale == 0.0:
                    continue
                g = g / scale
            value -= lr * g


@dataclass
class TrainResult:
    params: ModelParams
    log: list[dict] = field(default_factory=list)


def train(config: TrainConfig, metrics_path: str | Path | None = None,
          record_time: bool = False, train_set: list[SceneSample] | None = None) -> TrainResult:
    """Minibatch SGD over shuffled epochs, rate dropping tenfold halfway.

    Per-epoch records are ``{epoch, mean_nll, lr, wall_ms}`` (``mean_cost``
    replaces ``mean_nll`` for the MIL loss).  ``wall_ms`` is ``None`` unless
    ``record_time`` is set, so that logs from equal seeds are byte-identical.
    """
    templates = config.templates()
    if train_set is None:
        train_set = generate_dataset(stream(config.seed, "train"), config.train_size,
                                     config.glyphs_per_scene, templates,
                                     config.height, config.width, config.noise)
    images = stack_images(train_set)
    labels = [s.labels for s in train_set]
    params = init_params(stream(config.seed, "init"), config.num_classes,
                         images.shape[1], config.widths)
    shuffle_rng = stream(config.seed, "shuffle")
    objective = OBJECTIVES[config.loss]
    key = "mean_nll" if config.loss == "exact" else "mean_cost"

    records = []
    initial = None
    out = open(metrics_path, "w") if metrics_path else None
    try:
        for epoch in range(config.epochs):
            start = time.perf_counter()
            lr = config.learning_rate(epoch)
            order = shuffle_rng.permutation(len(train_set))
            total = 0.0
            for b in range(0, len(order), config.batch_size):
                idx = order[b:b + config.batch_size]
                try:
                    value, grads = objective(params, images[idx], [labels[i] for i in idx])
                except ZeroProbabilitySample as exc:
                    raise ZeroProbabilitySample(int(idx[exc.index])) from exc
                if initial is None:
                    initial = value
                total += value * len(idx)
                sgd_step(params, grads, lr, config.optimizer == "normalized-sgd")
            mean = total / len(order)
            wall = round((time.perf_counter() - start) * 1000.0, 3) if record_time else None
            record = {"epoch": epoch + 1, key: mean, "lr": lr, "wall_ms": wall}
            records.append(record)
            log.info("epoch %d %s=%.6f lr=%g", epoch + 1, key, mean, lr)
            if out:
                out.write(json.dumps(record) + "\n")
                out.flush()
            if not np.isfinite(mean) or mean > 10 * initial:
                raise DivergedObjective(f"epoch {epoch + 1} objective {mean} vs initial {initial}")
    finally:
        if out:
            out.close()
    return TrainResult(params, records)


@dataclass
class Metrics:
    alpha_error: float
    meanpool_error: float
    agreement: float
    global_max_error: float
    heldout_nll: float
    presence_present: list[float]
    presence_absent: list[float]
    test_size: int
    heldout_size: int

    def to_dict(self) -> dict:
        return asdict(self)


def _logits(params: ModelParams, images: np.ndarray, batch: int = 256):
    for b in range(0, len(images), batch):
        logits, _ = forward_batch(params, images[b:b + batch])
        for z in logits:
            yield LogitTensor(z)


def evaluate(params: ModelParams, test_set: list[SceneSample],
             heldout_set: list[SceneSample]) -> Metrics:
    """Single-glyph classification error and held-out bag NLL.

    ``test_set`` scenes must each carry exactly one class.  Besides the two
    per-location classifiers, the error of the max-pooling rule under a
    global softmax is reported; it is the natural read-out of a model
    trained with the traditional MIL cost.
    """
    C = params.num_classes
    wrong_alpha = wrong_mean = wrong_max = agree = 0
    for sample, Z in zip(test_set, _logits(params, stack_images(test_set))):
        (truth,) = sample.labels.labels
        P = softmax_locations(Z)
        a, m = classify_alpha(P), classify_meanpool(P)
        wrong_alpha += a != truth
        wrong_mean += m != truth
        wrong_max += classify_global_max(Z) != truth
        agree += a == m

    present = np.zeros(C)
    absent = np.zeros(C)
    n_present = np.zeros(C)
    nll = 0.0
    held_images = stack_images(heldout_set)
    for b in range(0, len(heldout_set), 256):
        logits, _ = forward_batch(params, held_images[b:b + 256])
        for sample, z in zip(heldout_set[b:b + 256], logits):
            Z = LogitTensor(z)
            result, _ = exact_with_logit_grad(sample.labels, Z)
            nll -= result.logprob
            scores = softmax_locations(Z).values[:-1].mean(axis=(1, 2))
            mask = np.array([c + 1 in sample.labels for c in range(C)])
            present += np.where(mask, scores, 0.0)
            absent += np.where(mask, 0.0, scores)
            n_present += mask
    n_absent = len(heldout_set) - n_present
    n = len(test_set)
    return Metrics(
        alpha_error=wrong_alpha / n,
        meanpool_error=wrong_mean / n,
        agreement=agree / n,
        global_max_error=wrong_max / n,
        heldout_nll=nll / max(len(heldout_set), 1),
        presence_present=(present / np.maximum(n_present, 1)).tolist(),
        presence_absent=(absent / np.maximum(n_absent, 1)).tolist(),
        test_size=n,
        heldout_size=len(heldout_set),
    )


def evaluation_sets(config: TrainConfig):
    """Held-out single-glyph test scenes and multi-glyph scenes for ``config``'s seed."""
    templates = config.templates()
    test = generate_dataset(stream(config.seed, "test"), config.test_size, 1, templates,
                            config.height, config.width, config.noise)
    heldout = generate_dataset(stream(config.seed, "heldout"), config.heldout_size,
                               config.glyphs_per_scene, templates,
                               config.height, config.width, config.noise)
    return test, heldout


def save_checkpoint(params: ModelParams, config: TrainConfig, path: str | Path) -> None:
    doc = params.to_json()
    doc["seed"] = config.seed
    cfg = asdict(config)
    cfg["widths"] = list(config.widths)
    doc["config"] = cfg
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_checkpoint(path: str | Path) -> tuple[ModelParams, TrainConfig]:
    with open(path) as fh:
        doc = json.load(fh)
    return ModelParams.from_json(doc), TrainConfig(**doc["config"])
