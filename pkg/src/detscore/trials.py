"""In-memory data model for trial lists, keys, score matrices and quality measures.

A trial is a (model, segment) pair. All matrix-shaped containers here are laid
out model-major: rows are models, columns are segments, and any flattening of a
matrix into per-trial sequences scans rows first. Names are case-sensitive and
must be unique within their axis. Instances are immutable after construction;
the backing numpy arrays are marked read-only.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import EmptySelection, OverlapError

__all__ = [
    "TrialLabel",
    "TrialIndex",
    "TrialKey",
    "ScoreMatrix",
    "QualityMeasures",
    "LabeledScores",
    "gather_scores_on_key",
    "align_scores_to_key",
    "merge_scores",
    "filter_by_index",
    "filter_by_name_lists",
]


class TrialLabel(IntEnum):
    """Cell labels of a trial key. Values match the binary file encoding."""

    IGNORED = 0
    TARGET = 1
    NONTARGET = 2


def _as_names(names: Iterable[str], what: str) -> tuple[str, ...]:
    out = tuple(str(n) for n in names)
    if len(set(out)) != len(out):
        raise ValueError(f"duplicate {what} names")
    return out


def _freeze(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


def _check_grid(arr: np.ndarray, m: int, s: int, what: str) -> None:
    if arr.shape != (m, s):
        raise ValueError(f"{what} has shape {arr.shape}, expected ({m}, {s})")


@dataclass(frozen=True, eq=False)
class TrialIndex:
    """Which (model, segment) cells of a rectangular trial grid are of interest."""

    model_names: tuple[str, ...]
    segment_names: tuple[str, ...]
    valid: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "model_names", _as_names(self.model_names, "model"))
        object.__setattr__(self, "segment_names", _as_names(self.segment_names, "segment"))
        v = np.asarray(self.valid, dtype=bool).copy()
        _check_grid(v, len(self.model_names), len(self.segment_names), "valid mask")
        object.__setattr__(self, "valid", _freeze(v))

    @property
    def shape(self) -> tuple[int, int]:
        return self.valid.shape

    def __eq__(self, other):
        return (
            isinstance(other, TrialIndex)
            and self.model_names == other.model_names
            and self.segment_names == other.segment_names
            and np.array_equal(self.valid, other.valid)
        )


@dataclass(frozen=True, eq=False)
class TrialKey:
    """Supervised labels over a trial grid.

    Every cell is TARGET, NONTARGET or IGNORED. The derived boolean masks and
    the per-class counts treat IGNORED cells as absent.
    """

    model_names: tuple[str, ...]
    segment_names: tuple[str, ...]
    label: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "model_names", _as_names(self.model_names, "model"))
        object.__setattr__(self, "segment_names", _as_names(self.segment_names, "segment"))
        lab = np.asarray(self.label)
        if not np.issubdtype(lab.dtype, np.integer):
            raise ValueError("key labels must be integers")
        _check_grid(lab, len(self.model_names), len(self.segment_names), "label matrix")
        if lab.size and (lab.min() < 0 or lab.max() > 2):
            raise ValueError("key labels must be 0 (ignored), 1 (target) or 2 (non-target)")
        object.__setattr__(self, "label", _freeze(lab.astype(np.uint8)))

    @property
    def shape(self) -> tuple[int, int]:
        return self.label.shape

    @property
    def target_mask(self) -> np.ndarray:
        return self.label == TrialLabel.TARGET

    @property
    def nontarget_mask(self) -> np.ndarray:
        return self.label == TrialLabel.NONTARGET

    @property
    def n_targets(self) -> int:
        return int(np.count_nonzero(self.label == TrialLabel.TARGET))

    @property
    def n_nontargets(self) -> int:
        return int(np.count_nonzero(self.label == TrialLabel.NONTARGET))

    def to_index(self) -> TrialIndex:
        """Index marking every labeled (non-ignored) cell as valid."""
        return TrialIndex(self.model_names, self.segment_names, self.label != TrialLabel.IGNORED)

    def __eq__(self, other):
        return (
            isinstance(other, TrialKey)
            and self.model_names == other.model_names
            and self.segment_names == other.segment_names
            and np.array_equal(self.label, other.label)
        )


@dataclass(frozen=True, eq=False)
class ScoreMatrix:
    """Detection scores over a trial grid with a validity mask.

    Scores at valid cells must be finite. Scores at invalid cells carry no
    meaning (they are written as 0.0 on serialization and ignored by
    structural equality).
    """

    model_names: tuple[str, ...]
    segment_names: tuple[str, ...]
    valid: np.ndarray
    score: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "model_names", _as_names(self.model_names, "model"))
        object.__setattr__(self, "segment_names", _as_names(self.segment_names, "segment"))
        m, s = len(self.model_names), len(self.segment_names)
        v = np.asarray(self.valid, dtype=bool).copy()
        sc = np.asarray(self.score, dtype=np.float64).copy()
        _check_grid(v, m, s, "valid mask")
        _check_grid(sc, m, s, "score matrix")
        if v.any() and not np.isfinite(sc[v]).all():
            raise ValueError("scores at valid cells must be finite")
        object.__setattr__(self, "valid", _freeze(v))
        object.__setattr__(self, "score", _freeze(sc))

    @property
    def shape(self) -> tuple[int, int]:
        return self.valid.shape

    @property
    def n_valid(self) -> int:
        return int(np.count_nonzero(self.valid))

    def to_index(self) -> TrialIndex:
        return TrialIndex(self.model_names, self.segment_names, self.valid)

    def __eq__(self, other):
        if not (
            isinstance(other, ScoreMatrix)
            and self.model_names == other.model_names
            and self.segment_names == other.segment_names
            and np.array_equal(self.valid, other.valid)
        ):
            return False
        return np.array_equal(self.score[self.valid], other.score[other.valid])


@dataclass(frozen=True, eq=False)
class QualityMeasures:
    """Per-name side information: a (q_dim, n_ids) matrix of finite values."""

    ids: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "ids", _as_names(self.ids, "quality id"))
        v = np.atleast_2d(np.asarray(self.values, dtype=np.float64).copy())
        if v.ndim != 2 or v.shape[1] != len(self.ids):
            raise ValueError(
                f"quality values must be (q_dim, {len(self.ids)}), got {v.shape}"
            )
        if v.size and not np.isfinite(v).all():
            raise ValueError("quality values must be finite")
        object.__setattr__(self, "values", _freeze(v))

    @property
    def q_dim(self) -> int:
        return self.values.shape[0]

    def column(self, name: str) -> np.ndarray:
        try:
            j = self.ids.index(name)
        except ValueError:
            raise KeyError(f"no quality entry for {name!r}") from None
        return self.values[:, j]

    def __eq__(self, other):
        return (
            isinstance(other, QualityMeasures)
            and self.ids == other.ids
            and np.array_equal(self.values, other.values)
        )


@dataclass(frozen=True, eq=False)
class LabeledScores:
    """Flat target and non-target score (or LLR) sequences.

    NaN entries are rejected. Infinities are allowed: calibrated LLRs can be
    legitimately infinite at the extremes.
    """

    tar: np.ndarray
    non: np.ndarray

    def __post_init__(self):
        tar = np.asarray(self.tar, dtype=np.float64).copy()
        non = np.asarray(self.non, dtype=np.float64).copy()
        if tar.ndim != 1 or non.ndim != 1:
            raise ValueError("scores must be one-dimensional")
        if np.isnan(tar).any() or np.isnan(non).any():
            raise ValueError("scores must not contain NaN")
        object.__setattr__(self, "tar", _freeze(tar))
        object.__setattr__(self, "non", _freeze(non))

    @property
    def n_tar(self) -> int:
        return self.tar.size

    @property
    def n_non(self) -> int:
        return self.non.size

    def __eq__(self, other):
        return (
            isinstance(other, LabeledScores)
            and np.array_equal(self.tar, other.tar)
            and np.array_equal(self.non, other.non)
        )


def _lookup(needles: Sequence[str], haystack: Sequence[str]) -> np.ndarray:
    """Indices of needles in haystack, -1 where absent."""
    pos = {name: i for i, name in enumerate(haystack)}
    return np.array([pos.get(n, -1) for n in needles], dtype=np.int64)


def gather_scores_on_key(
    scores: ScoreMatrix, key: Union[TrialKey, TrialIndex]
) -> tuple[np.ndarray, np.ndarray]:
    """Project a score matrix onto another object's grid by name lookup.

    Returns (has_score, values) shaped like the key's grid: has_score marks
    cells whose (model, segment) exists and is valid in the score object;
    values carries the scores there (zero elsewhere).
    """
    ridx = _lookup(key.model_names, scores.model_names)
    cidx = _lookup(key.segment_names, scores.segment_names)
    present = (ridx[:, None] >= 0) & (cidx[None, :] >= 0)
    shape = (len(key.model_names), len(key.segment_names))
    if scores.valid.size == 0:
        return np.zeros(shape, dtype=bool), np.zeros(shape, dtype=np.float64)
    grid = np.ix_(np.clip(ridx, 0, None), np.clip(cidx, 0, None))
    has_score = scores.valid[grid] & present
    values = np.where(has_score, scores.score[grid], 0.0)
    return has_score, values


def align_scores_to_key(scores: ScoreMatrix, key: TrialKey) -> tuple[LabeledScores, int]:
    """Collect scores for the labeled trials of a key.

    Scans the key's grid model-major. Labeled cells whose score is absent
    (name missing from the score object, or cell invalid there) are counted
    but contribute no score.

    Args:
        scores: score matrix to read from.
        key: supervision defining which trials matter and their labels.

    Returns:
        (labeled, n_missing) where labeled holds target and non-target scores
        in the key's model-major cell order and n_missing counts labeled cells
        without a usable score.
    """
    has_score, values = gather_scores_on_key(scores, key)
    labeled = key.label != TrialLabel.IGNORED
    n_missing = int(np.count_nonzero(labeled & ~has_score))
    tar = values[(key.label == TrialLabel.TARGET) & has_score]
    non = values[(key.label == TrialLabel.NONTARGET) & has_score]
    return LabeledScores(tar, non), n_missing


def merge_scores(a: ScoreMatrix, b: ScoreMatrix) -> ScoreMatrix:
    """Union of two score objects over the union of their name lists.

    The result's model (segment) list is a's names followed by b's new names,
    in first-appearance order. A trial may be valid in at most one input;
    otherwise OverlapError is raised (even if the two scores agree).
    """
    models = a.model_names + tuple(n for n in b.model_names if n not in set(a.model_names))
    segments = a.segment_names + tuple(
        n for n in b.segment_names if n not in set(a.segment_names)
    )
    valid = np.zeros((len(models), len(segments)), dtype=bool)
    score = np.zeros((len(models), len(segments)), dtype=np.float64)

    for part in (a, b):
        ri = _lookup(part.model_names, models)
        ci = _lookup(part.segment_names, segments)
        grid = np.ix_(ri, ci)
        if (valid[grid] & part.valid).any():
            raise OverlapError("inputs both score some trial")
        sub_s = score[grid]
        sub_v = valid[grid]
        sub_s[part.valid] = part.score[part.valid]
        sub_v |= part.valid
        score[grid] = sub_s
        valid[grid] = sub_v
    return ScoreMatrix(models, segments, valid, score)


def filter_by_index(scores: ScoreMatrix, index: TrialIndex) -> ScoreMatrix:
    """Restrict a score object to the trials an index declares valid.

    Keeps the score object's own name order, restricted to names present in
    both. The result is valid where both the index and the scores are.
    """
    im = set(index.model_names)
    isg = set(index.segment_names)
    keep_m = [n for n in scores.model_names if n in im]
    keep_s = [n for n in scores.segment_names if n in isg]
    if not keep_m or not keep_s:
        raise EmptySelection("no common (model, segment) pairs remain")
    sri = _lookup(keep_m, scores.model_names)
    sci = _lookup(keep_s, scores.segment_names)
    iri = _lookup(keep_m, index.model_names)
    ici = _lookup(keep_s, index.segment_names)
    valid = scores.valid[np.ix_(sri, sci)] & index.valid[np.ix_(iri, ici)]
    return ScoreMatrix(keep_m, keep_s, valid, scores.score[np.ix_(sri, sci)])


def filter_by_name_lists(
    obj: Union[ScoreMatrix, TrialKey],
    keep_models: Sequence[str],
    keep_segments: Sequence[str],
):
    """Drop rows/columns whose names are not in the keep lists.

    Surviving rows and columns keep obj's order and content. Raises
    EmptySelection when either axis ends up empty.
    """
    km = set(keep_models)
    ks = set(keep_segments)
    keep_m = [n for n in obj.model_names if n in km]
    keep_s = [n for n in obj.segment_names if n in ks]
    if not keep_m or not keep_s:
        raise EmptySelection("name filtering left no trials")
    ri = _lookup(keep_m, obj.model_names)
    ci = _lookup(keep_s, obj.segment_names)
    grid = np.ix_(ri, ci)
    if isinstance(obj, ScoreMatrix):
        return ScoreMatrix(keep_m, keep_s, obj.valid[grid], obj.score[grid])
    if isinstance(obj, TrialKey):
        return TrialKey(keep_m, keep_s, obj.label[grid])
    raise TypeError(f"cannot filter {type(obj).__name__}")
