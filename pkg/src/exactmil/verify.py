"""Randomized property suites comparing the likelihood routes against each other.

Each suite returns a :class:`SuiteReport` whose ``to_log`` text depends only
on the seed and sizes, so equal seeds give byte-identical logs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .gradient import finite_difference_gradient, grad_wrt_logits
from .likelihood import (
    brute_force_distribution,
    likelihood_beta,
    likelihood_exact,
    likelihood_upper_bound,
    sum_over_all_label_sets,
)
from .tensor import LabelSet, LogitTensor, ProbTensor, softmax_locations

LOGIT_SCALE = 1.5


@dataclass
class SuiteReport:
    suite: str
    seed: int
    tolerance: float
    checks: int = 0
    failures: int = 0
    worst_error: float = 0.0
    cases: list[dict] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.failures == 0

    def record(self, error: float, **case) -> None:
        self.checks += 1
        ok = error <= self.tolerance
        if not ok:
            self.failures += 1
        self.worst_error = max(self.worst_error, error)
        self.cases.append({**case, "error": error, "ok": ok})

    def summary(self) -> dict:
        return {"suite": self.suite, "seed": self.seed, "checks": self.checks,
                "failures": self.failures, "worst_error": self.worst_error,
                "tolerance": self.tolerance, "passed": self.passed}

    def to_log(self) -> str:
        lines = [json.dumps(case, sort_keys=True) for case in self.cases]
        lines.append(json.dumps(self.summary(), sort_keys=True))
        return "\n".join(lines) + "\n"


def random_logits(rng: np.random.Generator, C: int, M: int, N: int) -> LogitTensor:
    return LogitTensor(rng.normal(0.0, LOGIT_SCALE, size=(C + 1, M, N)))


def random_prob_tensor(rng: np.random.Generator, C: int, M: int, N: int) -> ProbTensor:
    return softmax_locations(random_logits(rng, C, M, N))


def _shape(rng, max_c, max_mn, min_c=1):
    C = int(rng.integers(min_c, max_c + 1))
    M, N = (int(v) for v in rng.integers(1, max_mn + 1, size=2))
    return C, M, N


def oracle_suite(seed: int = 0, trials: int = 200, max_classes: int = 4,
                 max_side: int = 3, tol: float = 1e-9) -> SuiteReport:
    """Exact series against brute-force enumeration for every label set."""
    rng = np.random.default_rng(seed)
    report = SuiteReport("oracle", seed, tol)
    for trial in range(trials):
        C, M, N = _shape(rng, max_classes, max_side)
        P = random_prob_tensor(rng, C, M, N)
        dist = brute_force_distribution(P)
        for mask in range(1 << C):
            exact = likelihood_exact(LabelSet.from_mask(mask), P).prob()
            report.record(abs(exact - float(dist[mask])), trial=trial, shape=[C + 1, M, N],
                          mask=mask)
    return report


def method_suite(seed: int = 0, trials: int = 200, max_classes: int = 4, max_side: int = 3,
                 singleton_classes: int = 6, singleton_trials: int = 20,
                 tol: float = 1e-9) -> SuiteReport:
    """Exact series against the beta recursion, relative error in linear domain."""
    rng = np.random.default_rng(seed)
    report = SuiteReport("methods", seed, tol)

    def compare(trial, P, mask):
        labels = LabelSet.from_mask(mask)
        a = likelihood_exact(labels, P).prob()
        b = likelihood_beta(labels, P).prob()
        err = abs(a - b) / max(abs(a), abs(b)) if max(abs(a), abs(b)) > 0 else 0.0
        report.record(err, trial=trial, shape=list(P.shape), mask=mask)

    for trial in range(trials):
        P = random_prob_tensor(rng, *_shape(rng, max_classes, max_side))
        for mask in range(1 << P.num_classes):
            compare(trial, P, mask)
    for trial in range(singleton_trials):
        P = random_prob_tensor(rng, singleton_classes, 1, 1)
        for mask in range(1 << singleton_classes):
            compare(trials + trial, P, mask)
    return report


def partition_suite(seed: int = 0, trials: int = 50, max_classes: int = 8,
                    max_side: int = 4, tol: float = 1e-9) -> SuiteReport:
    """Exact probabilities over all label sets sum to one."""
    rng = np.random.default_rng(seed)
    report = SuiteReport("partition", seed, tol)
    for trial in range(trials):
        C, M, N = _shape(rng, max_classes, max_side)
        P = random_prob_tensor(rng, C, M, N)
        total = math.exp(sum_over_all_label_sets(P))
        report.record(abs(total - 1.0), trial=trial, shape=[C + 1, M, N])
    return report


def _random_label_set(rng, C, max_size):
    size = int(rng.integers(0, min(C, max_size) + 1))
    return LabelSet((rng.permutation(C)[:size] + 1).tolist())


def gradcheck_suite(seed: int = 0, trials: int = 50, max_classes: int = 4,
                    max_side: int = 3, h: float = 1e-5, tol: float = 1e-5) -> SuiteReport:
    """Analytic logit gradient against central finite differences.

    Label sets are drawn with at most ``M * N`` members so the likelihood is
    positive.  The error is ``max |a - fd| / (|a| + 1e-8)``.
    """
    rng = np.random.default_rng(seed)
    report = SuiteReport("gradcheck", seed, tol)
    for trial in range(trials):
        C, M, N = _shape(rng, max_classes, max_side)
        Z = random_logits(rng, C, M, N)
        labels = _random_label_set(rng, C, M * N)
        analytic = grad_wrt_logits(labels, Z).values
        numeric = finite_difference_gradient(labels, Z, h).values
        err = float(np.max(np.abs(analytic - numeric) / (np.abs(analytic) + 1e-8)))
        report.record(err, trial=trial, shape=[C + 1, M, N], labels=list(labels.labels))
    return report


def bounds_suite(seed: int = 0, trials: int = 100, min_size: int = 2, max_size: int = 5,
                 max_side: int = 3, tol: float = 1e-9) -> SuiteReport:
    """Truncated beta series never undercuts the exact value; full order matches it.

    The recorded error for a case is the largest violation over ``k``:
    ``exact - bound_k`` for every ``k``, plus ``|bound_{L-1} - exact|``.
    """
    rng = np.random.default_rng(seed)
    report = SuiteReport("bounds", seed, tol)
    for trial in range(trials):
        size = int(rng.integers(min_size, max_size + 1))
        C, M, N = _shape(rng, max_size + 1, max_side, min_c=size)
        P = random_prob_tensor(rng, C, M, N)
        labels = LabelSet((rng.permutation(C)[:size] + 1).tolist())
        exact = likelihood_exact(labels, P).prob()
        bounds = [likelihood_upper_bound(labels, P, k).prob() for k in range(size)]
        violation = max(exact - b for b in bounds)
        mismatch = abs(bounds[-1] - exact)
        report.record(max(violation, mismatch, 0.0), trial=trial, shape=[C + 1, M, N],
                      labels=list(labels.labels), bounds=bounds, exact=exact)
    return report


SUITES = {
    "oracle": oracle_suite,
    "methods": method_suite,
    "partition": partition_suite,
    "gradcheck": gradcheck_suite,
    "bounds": bounds_suite,
}
