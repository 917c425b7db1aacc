"""Detection-cost and proper-scoring metrics over labeled scores.

Conventions used throughout: scores are log-likelihood-ratios when a module
says so; the Bayes decision at threshold eta accepts if and only if
llr >= eta, so a miss requires llr < eta and a false alarm llr >= eta.
Operating points are parametrized by the effective target prior pi_tilde,
or equivalently by its log odds x = logit(pi_tilde); the Bayes threshold is
eta = -x.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence, Union, overload

import numpy as np
from scipy.special import expit

from .errors import DegenerateInput
from .rocch import RocchCurve, pav_llrs, rocch
from .trials import LabeledScores

__all__ = [
    "CostParams",
    "OperatingPoint",
    "ErrorRates",
    "ErrorRateSweep",
    "BayesError",
    "MinBayesError",
    "Dr30Markers",
    "logit",
    "effective_prior",
    "bayes_threshold",
    "error_rates_at",
    "fast_error_rate_sweep",
    "actual_bayes_error",
    "min_bayes_error",
    "min_dcf",
    "cllr",
    "min_cllr",
    "default_x_grid",
    "dr30_markers",
]

_LN2 = float(np.log(2.0))


def logit(p):
    """log(p / (1-p)), computed stably."""
    p = np.asarray(p, dtype=np.float64)
    out = np.log(p) - np.log1p(-p)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class CostParams:
    """A detection cost function: target prior and the two error costs."""

    prior: float
    c_miss: float
    c_fa: float

    def __post_init__(self):
        if not (0.0 < self.prior < 1.0):
            raise ValueError("prior must lie strictly between 0 and 1")
        if not (self.c_miss > 0 and np.isfinite(self.c_miss)):
            raise ValueError("c_miss must be finite and positive")
        if not (self.c_fa > 0 and np.isfinite(self.c_fa)):
            raise ValueError("c_fa must be finite and positive")


def effective_prior(costs: CostParams) -> float:
    """Collapse (prior, c_miss, c_fa) into the single equivalent prior.

    Decisions and normalized costs under the three-parameter DCF are
    identical to the unit-cost DCF at this prior.
    """
    a = costs.prior * costs.c_miss
    b = (1.0 - costs.prior) * costs.c_fa
    return a / (a + b)


def bayes_threshold(pi_tilde: float) -> float:
    """Minimum-expected-cost LLR threshold for an effective prior."""
    if not (0.0 < pi_tilde < 1.0):
        raise ValueError("pi_tilde must lie strictly between 0 and 1")
    return -logit(pi_tilde)


@dataclass(frozen=True)
class OperatingPoint:
    """An operating point given by its effective target prior."""

    pi_tilde: float

    def __post_init__(self):
        if not (0.0 < self.pi_tilde < 1.0):
            raise ValueError("pi_tilde must lie strictly between 0 and 1")

    @classmethod
    def from_costs(cls, costs: CostParams) -> "OperatingPoint":
        return cls(effective_prior(costs))

    @property
    def x(self) -> float:
        """Prior log odds logit(pi_tilde): the plot abscissa."""
        return logit(self.pi_tilde)

    @property
    def eta(self) -> float:
        """Bayes LLR threshold -logit(pi_tilde)."""
        return -self.x


@dataclass(frozen=True)
class ErrorRates:
    """Empirical miss / false-alarm rates at one threshold, with raw counts."""

    p_miss: float
    p_fa: float
    miss_count: int
    fa_count: int


def _require_both_classes(scores: LabeledScores) -> None:
    if scores.n_tar == 0 or scores.n_non == 0:
        raise DegenerateInput("need at least one target and one non-target score")


def error_rates_at(scores: LabeledScores, eta: float) -> ErrorRates:
    """Miss/false-alarm rates of thresholding at eta (accept iff score >= eta).

    eta may be +-inf: +inf rejects everything finite, -inf accepts everything.
    """
    _require_both_classes(scores)
    if np.isnan(eta):
        raise ValueError("eta must not be NaN")
    miss = int(np.count_nonzero(scores.tar < eta))
    fa = int(np.count_nonzero(scores.non >= eta))
    return ErrorRates(miss / scores.n_tar, fa / scores.n_non, miss, fa)


class ErrorRateSweep(Sequence):
    """Vectorized error rates for a batch of thresholds (sequence of ErrorRates)."""

    def __init__(self, p_miss, p_fa, miss_counts, fa_counts):
        self.p_miss = p_miss
        self.p_fa = p_fa
        self.miss_counts = miss_counts
        self.fa_counts = fa_counts

    def __len__(self) -> int:
        return self.p_miss.size

    def __getitem__(self, i) -> ErrorRates:
        if isinstance(i, slice):
            raise TypeError("slicing not supported; index elementwise")
        return ErrorRates(
            float(self.p_miss[i]),
            float(self.p_fa[i]),
            int(self.miss_counts[i]),
            int(self.fa_counts[i]),
        )


def fast_error_rate_sweep(scores: LabeledScores, thresholds) -> ErrorRateSweep:
    """Error rates at many thresholds from one combined sort.

    Scores and thresholds are pooled and sorted together once (thresholds
    ordered before equal scores, so the accept-iff-score>=eta convention
    holds); cumulative class counts then read off every threshold's rates.
    Complexity O((T + N + D) log(T + N + D)) instead of D full scans.

    Args:
        scores: labeled scores.
        thresholds: finite thresholds, any order; results match input order.

    Returns:
        ErrorRateSweep; entry i equals error_rates_at(scores, thresholds[i]).
    """
    _require_both_classes(scores)
    thr = np.asarray(thresholds, dtype=np.float64).reshape(-1)
    if thr.size == 0:
        raise ValueError("need at least one threshold")
    if np.isnan(thr).any():
        raise ValueError("sweep thresholds must not contain NaN")
    n_tar, n_non = scores.n_tar, scores.n_non
    n_sc = n_tar + n_non

    vals = np.concatenate([scores.tar, scores.non, thr])
    is_score = np.zeros(vals.size, dtype=bool)
    is_score[:n_sc] = True
    is_tar = np.zeros(vals.size, dtype=np.int64)
    is_tar[:n_tar] = 1

    order = np.lexsort((is_score, vals))
    sorted_is_score = is_score[order]
    cum_tar = np.concatenate([[0], np.cumsum(is_tar[order])])
    cum_scores = np.concatenate([[0], np.cumsum(sorted_is_score)])

    thr_pos = np.nonzero(~sorted_is_score)[0]
    miss_sorted = cum_tar[thr_pos]
    non_below_sorted = cum_scores[thr_pos] - miss_sorted
    fa_sorted = n_non - non_below_sorted

    undo = np.argsort(thr, kind="stable")
    miss = np.empty(thr.size, dtype=np.int64)
    fa = np.empty(thr.size, dtype=np.int64)
    miss[undo] = miss_sorted
    fa[undo] = fa_sorted
    return ErrorRateSweep(miss / n_tar, fa / n_non, miss, fa)


class BayesError(NamedTuple):
    """Empirical Bayes error-rate of hard decisions at the Bayes threshold."""

    raw: float
    normalized: float


def actual_bayes_error(llrs: LabeledScores, pi_tilde) -> BayesError:
    """Bayes error-rate of thresholding the given LLRs at -logit(pi_tilde).

    raw = pi*P_miss + (1-pi)*P_fa; normalized divides by min(pi, 1-pi), the
    error-rate of the best default (score-free) system, so a well-calibrated
    useless system sits at 1.

    pi_tilde may be a scalar or an array (vectorized via one combined sweep).
    """
    pi = np.asarray(pi_tilde, dtype=np.float64)
    if pi.size == 0 or not ((pi > 0) & (pi < 1)).all():
        raise ValueError("pi_tilde must lie strictly between 0 and 1")
    eta = -logit(pi)
    if pi.ndim == 0:
        rates = error_rates_at(llrs, float(eta))
        p_miss, p_fa = rates.p_miss, rates.p_fa
    else:
        sweep = fast_error_rate_sweep(llrs, eta)
        p_miss, p_fa = sweep.p_miss, sweep.p_fa
    raw = pi * p_miss + (1.0 - pi) * p_fa
    normalized = raw / np.minimum(pi, 1.0 - pi)
    if pi.ndim == 0:
        return BayesError(float(raw), float(normalized))
    return BayesError(raw, normalized)


class MinBayesError(NamedTuple):
    """Optimal-threshold Bayes error-rate, with counts at the optimizing vertex."""

    raw: float
    normalized: float
    miss_count: int
    fa_count: int


def _min_bayes_on_curve(curve: RocchCurve, pi: np.ndarray):
    dcf = pi[:, None] * curve.p_miss[None, :] + (1.0 - pi)[:, None] * curve.p_fa[None, :]
    best = np.argmin(dcf, axis=1)
    rows = np.arange(pi.size)
    raw = dcf[rows, best]
    return raw, curve.miss_counts[best], curve.fa_counts[best]


def min_bayes_error(
    scores: Union[LabeledScores, RocchCurve], pi_tilde
) -> MinBayesError:
    """Minimum Bayes error-rate over all thresholds (evaluator-optimized).

    Minimizes pi*p_miss + (1-pi)*p_fa over the ROC convex hull vertices,
    which equals the exhaustive minimum over every possible threshold.

    Args:
        scores: labeled scores, or a precomputed RocchCurve to amortize the
            hull across many operating points.
        pi_tilde: effective prior, scalar or array.

    Returns:
        MinBayesError; fields are arrays when pi_tilde is an array. The
        count fields report the integer miss/false-alarm counts at the
        optimizing vertex (data-scarcity diagnostics).
    """
    curve = scores if isinstance(scores, RocchCurve) else rocch(scores)
    pi = np.asarray(pi_tilde, dtype=np.float64)
    if pi.size == 0 or not ((pi > 0) & (pi < 1)).all():
        raise ValueError("pi_tilde must lie strictly between 0 and 1")
    raw, miss_counts, fa_counts = _min_bayes_on_curve(curve, np.atleast_1d(pi))
    normalized = raw / np.minimum(np.atleast_1d(pi), 1.0 - np.atleast_1d(pi))
    if pi.ndim == 0:
        return MinBayesError(
            float(raw[0]), float(normalized[0]), int(miss_counts[0]), int(fa_counts[0])
        )
    return MinBayesError(raw, normalized, miss_counts, fa_counts)


def min_dcf(scores: Union[LabeledScores, RocchCurve], costs: CostParams) -> float:
    """Minimum of the three-parameter detection cost function over thresholds.

    Equals (prior*c_miss + (1-prior)*c_fa) times the unit-cost minimum at the
    effective prior.
    """
    scale = costs.prior * costs.c_miss + (1.0 - costs.prior) * costs.c_fa
    return scale * min_bayes_error(scores, effective_prior(costs)).raw


def cllr(llrs: LabeledScores) -> float:
    """Calibration-sensitive log-likelihood-ratio cost, in bits.

    Average of log2(1 + exp(-llr)) over targets and log2(1 + exp(llr)) over
    non-targets, each class weighted 1/2. Computed with logaddexp so finite
    and infinite LLRs are handled without overflow: a correct-sign infinity
    costs nothing, a wrong-sign infinity costs +inf. The score-free system
    (all LLRs zero) costs exactly 1 bit.
    """
    _require_both_classes(llrs)
    tar_cost = np.logaddexp(0.0, -llrs.tar).mean() / _LN2
    non_cost = np.logaddexp(0.0, llrs.non).mean() / _LN2
    return float(0.5 * tar_cost + 0.5 * non_cost)


def min_cllr(scores: LabeledScores) -> float:
    """Cllr after optimal (PAV) recalibration of the scores.

    Invariant under strictly increasing score warps; lower-bounds the Cllr of
    any calibration of these scores.
    """
    tar_llrs, non_llrs = pav_llrs(scores)
    return cllr(LabeledScores(tar_llrs, non_llrs))


def default_x_grid(lo: float = -10.0, hi: float = 0.0, n: int = 501) -> np.ndarray:
    """Uniform grid in x = logit(pi_tilde), the plot abscissa."""
    if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
        raise ValueError("need finite lo < hi")
    if n < 2:
        raise ValueError("need at least two grid points")
    return np.linspace(lo, hi, n)


class Dr30Markers(NamedTuple):
    """Doddington rule-of-30 marker abscissas; None when never reached."""

    x_miss30: Union[float, None]
    x_fa30: Union[float, None]


def dr30_markers(scores: Union[LabeledScores, RocchCurve], x_grid) -> Dr30Markers:
    """Locate the rule-of-30 data-scarcity markers on a prior-log-odds grid.

    Uses the integer error counts at the evaluator-optimized vertex for each
    grid point. x_fa30 is the leftmost grid point with at least 30 false
    alarms (to its left false alarms are scarce); x_miss30 the rightmost with
    at least 30 misses. Between the markers both error types rest on at least
    30 errors, the usual minimum for trusting the estimate.
    """
    x = np.asarray(x_grid, dtype=np.float64).reshape(-1)
    if x.size == 0:
        raise ValueError("x_grid must be non-empty")
    if x.size > 1 and not (np.diff(x) > 0).all():
        raise ValueError("x_grid must be strictly increasing")
    curve = scores if isinstance(scores, RocchCurve) else rocch(scores)
    res = min_bayes_error(curve, expit(x))
    fa_ok = np.nonzero(res.fa_count >= 30)[0]
    miss_ok = np.nonzero(res.miss_count >= 30)[0]
    x_fa30 = float(x[fa_ok[0]]) if fa_ok.size else None
    x_miss30 = float(x[miss_ok[-1]]) if miss_ok.size else None
    return Dr30Markers(x_miss30, x_fa30)
