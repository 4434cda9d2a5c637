"""Exact likelihood for multiclass multiple-instance learning.

A model emits, at every location of an ``M x N`` grid, a distribution over
``C`` classes plus a background label.  Given only the set of classes
present in a sample, :func:`likelihood_exact` returns the log-probability
that the grid emits exactly that set.
"""

from .baselines import (
    GlobalProbTensor,
    classify_global_max,
    cross_entropy_special_case,
    global_softmax,
    traditional_mil_cost,
)
from .decode import (
    EmissionMap,
    classify_alpha,
    classify_meanpool,
    collapse_transcribe,
    column_sequence,
    emission_map,
)
from .errors import MilError
from .gradient import GradTensor, finite_difference_gradient, grad_wrt_logits, grad_wrt_prob
from .likelihood import (
    AugmentedSubset,
    LikelihoodResult,
    beta_table,
    brute_force_likelihood,
    likelihood_beta,
    likelihood_exact,
    likelihood_upper_bound,
    log_alpha,
    log_alpha_of,
    sum_over_all_label_sets,
)
from .signed_log import SignedLogValue, sl_add, sl_from_log, sl_sum
from .tensor import (
    LabelSet,
    LogitTensor,
    ProbTensor,
    softmax_locations,
    to_binary_vector,
    validate_prob_tensor,
)

__version__ = "0.1.0"
