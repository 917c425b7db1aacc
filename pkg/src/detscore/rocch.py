"""Pool-adjacent-violators isotonic regression and the ROC convex hull.

The hull is not computed with a generic 2-D convex-hull routine: after a
single stable sort of the pooled scores, the PAV block structure on the 0/1
labels *is* the hull. Each block boundary yields one vertex, carrying exact
integer miss/false-alarm counts, which downstream code needs for data-scarcity
(rule-of-30) checks.

Tied scores are pooled into a single PAV input point before fitting, so all
equal scores are guaranteed to share one block regardless of label order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import DegenerateInput, EmptyInput
from .trials import LabeledScores

__all__ = [
    "PavBlocks",
    "RocchCurve",
    "pav_fit",
    "rocch",
    "rocch_eer",
    "uer",
    "prbep",
    "pav_llrs",
    "pav_llr_blocks",
]


@njit(cache=True)
def _pav_kernel(values, weights):
    """Stack-based PAV merge. Returns (block_means, block_weights, block_starts).

    Merges while a block mean is <= its predecessor's, so surviving means are
    strictly increasing (equal-mean neighbours are pooled too).
    """
    n = values.shape[0]
    means = np.empty(n, dtype=np.float64)
    wsum = np.empty(n, dtype=np.float64)
    start = np.empty(n, dtype=np.int64)
    k = 0
    for i in range(n):
        means[k] = values[i]
        wsum[k] = weights[i]
        start[k] = i
        k += 1
        while k > 1 and means[k - 2] >= means[k - 1]:
            w = wsum[k - 2] + wsum[k - 1]
            means[k - 2] = (wsum[k - 2] * means[k - 2] + wsum[k - 1] * means[k - 1]) / w
            wsum[k - 2] = w
            k -= 1
    return means[:k].copy(), wsum[:k].copy(), start[:k].copy()


@dataclass(frozen=True)
class PavBlocks:
    """Blocks of a nondecreasing least-squares fit.

    block_values are the pooled means, strictly increasing across blocks.
    starts[i] is the index of the first input point of block i; sizes[i] its
    run length. tar_counts/non_counts tally the label-1 and label-0 inputs per
    block (exact when the fitted values are 0/1 labels, or when an explicit
    targets mask was passed to pav_fit).
    """

    block_values: np.ndarray
    sizes: np.ndarray
    starts: np.ndarray
    tar_counts: np.ndarray
    non_counts: np.ndarray

    @property
    def n_blocks(self) -> int:
        return self.block_values.size

    def expand(self) -> np.ndarray:
        """Fitted value for every input point, in input order."""
        return np.repeat(self.block_values, self.sizes)


def pav_fit(values, weights=None, targets=None) -> PavBlocks:
    """Weighted least-squares nondecreasing fit of a sequence, in given order.

    Args:
        values: real sequence to fit.
        weights: positive weights, default all ones.
        targets: optional boolean mask marking which inputs are targets, used
            only to fill the per-block counts. When omitted, inputs exactly
            equal to 1 count as targets and inputs exactly equal to 0 as
            non-targets.

    Returns:
        PavBlocks describing the unique optimal monotone fit.
    """
    v = np.asarray(values, dtype=np.float64).reshape(-1)
    if v.size == 0:
        raise EmptyInput("pav_fit needs at least one value")
    if not np.isfinite(v).all():
        raise ValueError("pav_fit values must be finite")
    if weights is None:
        w = np.ones_like(v)
    else:
        w = np.asarray(weights, dtype=np.float64).reshape(-1)
        if w.shape != v.shape:
            raise ValueError("weights must match values in length")
        if not np.isfinite(w).all() or (w <= 0).any():
            raise ValueError("weights must be finite and positive")
    means, _, starts = _pav_kernel(v, w)
    bounds = np.append(starts, v.size)
    sizes = np.diff(bounds)
    if targets is None:
        tar_mask = v == 1.0
        non_mask = v == 0.0
    else:
        tar_mask = np.asarray(targets, dtype=bool).reshape(-1)
        if tar_mask.shape != v.shape:
            raise ValueError("targets mask must match values in length")
        non_mask = ~tar_mask
    tar_counts = np.add.reduceat(tar_mask.astype(np.int64), starts)
    non_counts = np.add.reduceat(non_mask.astype(np.int64), starts)
    return PavBlocks(means, sizes, starts, tar_counts, non_counts)


def _grouped_label_blocks(scores: LabeledScores):
    """Sort pooled scores, pool ties, PAV the group label means.

    Returns block-level arrays (tar counts, non counts, per-group block id,
    group sizes, sort order, group min/max scores).
    """
    n_tar, n_non = scores.n_tar, scores.n_non
    if n_tar == 0 or n_non == 0:
        raise DegenerateInput("need at least one target and one non-target score")
    pooled = np.concatenate([scores.tar, scores.non])
    is_tar = np.zeros(pooled.size, dtype=np.float64)
    is_tar[:n_tar] = 1.0
    order = np.argsort(pooled, kind="stable")
    sp = pooled[order]
    st = is_tar[order]

    new_group = np.empty(sp.size, dtype=bool)
    new_group[0] = True
    np.not_equal(sp[1:], sp[:-1], out=new_group[1:])
    gstarts = np.nonzero(new_group)[0]
    gsizes = np.diff(np.append(gstarts, sp.size))
    gtar = np.add.reduceat(st, gstarts)
    gmean = gtar / gsizes

    means, _, bstarts = _pav_kernel(gmean, gsizes.astype(np.float64))
    # blocks partition the groups; aggregate integer counts per block
    btar = np.add.reduceat(gtar, bstarts).astype(np.int64)
    bsize_groups = np.diff(np.append(bstarts, gstarts.size))
    btotal = np.add.reduceat(gsizes, bstarts)
    bnon = (btotal - btar).astype(np.int64)
    block_of_group = np.repeat(np.arange(bstarts.size), bsize_groups)
    gmin = sp[gstarts]
    gmax = sp[np.append(gstarts[1:], sp.size) - 1]
    return btar, bnon, block_of_group, gsizes, order, gmin, gmax, bstarts


@dataclass(frozen=True)
class RocchCurve:
    """Vertices of the ROC convex hull with exact error counts.

    Vertices run from the all-reject corner (p_miss=1, p_fa=0) to the
    all-accept corner (p_miss=0, p_fa=1): p_fa nondecreasing, p_miss
    nonincreasing, no repeated vertices, and the polyline through them is
    convex. miss_counts/fa_counts are the integer error counts realized at
    each vertex's threshold.
    """

    p_miss: np.ndarray
    p_fa: np.ndarray
    miss_counts: np.ndarray
    fa_counts: np.ndarray
    n_tar: int
    n_non: int

    @property
    def n_vertices(self) -> int:
        return self.p_miss.size


def rocch(scores: LabeledScores) -> RocchCurve:
    """ROC convex hull of a labeled score set.

    Complexity is one O(n log n) sort plus linear PAV. The vertex count is at
    most min(n_tar, n_non) + 2.

    Args:
        scores: target/non-target scores (at least one of each).

    Returns:
        RocchCurve ordered by increasing p_fa.
    """
    btar, bnon, *_ = _grouped_label_blocks(scores)
    n_tar, n_non = scores.n_tar, scores.n_non
    # boundary j = threshold above block j: misses are targets in blocks <= j,
    # false alarms are non-targets in blocks > j; j runs K..0 so p_fa ascends
    miss_cum = np.concatenate([[0], np.cumsum(btar)])
    fa_cum = np.concatenate([[0], np.cumsum(bnon[::-1])])[::-1]
    miss_counts = miss_cum[::-1]
    fa_counts = fa_cum[::-1]
    return RocchCurve(
        p_miss=miss_counts / n_tar,
        p_fa=fa_counts / n_non,
        miss_counts=miss_counts.astype(np.int64),
        fa_counts=fa_counts.astype(np.int64),
        n_tar=n_tar,
        n_non=n_non,
    )


def uer(curve: RocchCurve, ratio: float) -> tuple[float, tuple[float, float]]:
    """Unequal error rate: hull point where p_fa = ratio * p_miss.

    Args:
        curve: ROC convex hull.
        ratio: positive trade-off; the returned value maximizes
            min-DCF(prior, C_miss=ratio, C_fa=1) over all priors.

    Returns:
        (p_fa at the crossing point, (p_miss, p_fa) of the point). When the
        crossing lands between vertices the point is linearly interpolated;
        when it hits a vertex exactly that vertex is returned.
    """
    r = float(ratio)
    if not (r > 0) or not np.isfinite(r):
        raise ValueError("ratio must be finite and positive")
    pm, pf = curve.p_miss, curve.p_fa
    g = pf - r * pm
    idx = int(np.argmax(g >= 0))
    if g[idx] == 0.0:
        return float(pf[idx]), (float(pm[idx]), float(pf[idx]))
    a = g[idx - 1] / (g[idx - 1] - g[idx])
    pm_x = pm[idx - 1] + a * (pm[idx] - pm[idx - 1])
    pf_x = pf[idx - 1] + a * (pf[idx] - pf[idx - 1])
    return float(pf_x), (float(pm_x), float(pf_x))


def rocch_eer(curve: RocchCurve) -> float:
    """Equal error rate of the convex hull: its crossing with p_miss = p_fa."""
    value, _ = uer(curve, 1.0)
    return value


def prbep(scores: LabeledScores) -> float:
    """Precision-recall break-even point, as an absolute (possibly fractional)
    error count: the hull point where the number of misses equals the number
    of false alarms."""
    curve = rocch(scores)
    value, _ = uer(curve, scores.n_tar / scores.n_non)
    return scores.n_non * value


def _block_llrs(btar, bnon, n_tar, n_non) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return (
            np.log(btar.astype(np.float64))
            - np.log(bnon.astype(np.float64))
            - (np.log(n_tar) - np.log(n_non))
        )


def pav_llr_blocks(scores: LabeledScores):
    """Per-block score ranges and LLRs of the PAV calibration of a score set.

    Returns:
        (min_scores, max_scores, llrs): the lowest and highest input score of
        each block and the block's log-likelihood-ratio, ordered by score.
        LLRs are the log posterior-odds of the block corrected by the training
        prior odds n_tar/n_non; pure blocks at the extremes give -inf/+inf.
    """
    btar, bnon, block_of_group, _, _, gmin, gmax, bstarts = _grouped_label_blocks(scores)
    llr = _block_llrs(btar, bnon, scores.n_tar, scores.n_non)
    bounds = np.append(bstarts, block_of_group.size)
    min_scores = gmin[bounds[:-1]]
    max_scores = gmax[bounds[1:] - 1]
    return min_scores, max_scores, llr


def pav_llrs(scores: LabeledScores) -> tuple[np.ndarray, np.ndarray]:
    """Nonparametrically recalibrate training scores to LLRs via PAV.

    Every score is mapped to the LLR of the PAV block it falls in, so the
    output is a nondecreasing function of the input score, invariant under
    strictly increasing score warps, and tied scores map identically.

    Returns:
        (tar_llrs, non_llrs) in the order of the input sequences. Values at
        the extreme pure blocks are -inf/+inf; clipping is the caller's
        choice.
    """
    btar, bnon, block_of_group, gsizes, order, *_ = _grouped_label_blocks(scores)
    llr = _block_llrs(btar, bnon, scores.n_tar, scores.n_non)
    llr_sorted = np.repeat(llr[block_of_group], gsizes)
    out = np.empty(order.size, dtype=np.float64)
    out[order] = llr_sorted
    return out[: scores.n_tar], out[scores.n_tar :]
