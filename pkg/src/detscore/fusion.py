"""Supervised score calibration and fusion.

Two families:

* parametric: an affine (or linear-fusion, or bilinear quality-augmented)
  map to LLRs trained by minimizing a prior-weighted logistic-regression
  objective with the trust-region Newton optimizer. The objective reduces to
  Cllr at pi_tilde = 0.5 and an identity map.
* nonparametric: the PAV recalibration of a development set, frozen into a
  monotone piecewise-linear score-to-LLR map.

Trained models round-trip through a small versioned text document.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy.special import expit

from .errors import (
    AlignmentError,
    DegenerateInput,
    DimensionMismatch,
    EmptySelection,
    ParseError,
)
from .metrics import logit
from .optimize import ObjectiveOracle, TrOptions, minimize
from .rocch import pav_llr_blocks
from .trials import (
    LabeledScores,
    QualityMeasures,
    ScoreMatrix,
    TrialKey,
    TrialLabel,
    gather_scores_on_key,
)

__all__ = [
    "FusionModel",
    "PavCalibrationMap",
    "QualityPairs",
    "TrainingConfig",
    "wlr_objective",
    "train_calibration",
    "train_fusion",
    "train_quality_fusion",
    "apply_fusion",
    "train_pav_calibration",
    "apply_pav_calibration",
    "model_to_text",
    "model_from_text",
    "stack_for_key",
    "fuse_matrices",
]

_LN2 = float(np.log(2.0))


@dataclass(frozen=True)
class FusionModel:
    """Affine/bilinear score-to-LLR map: llr = offset + weights.s + q'Wr."""

    offset: float
    weights: np.ndarray
    quality_weights: Optional[np.ndarray] = None

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if w.size == 0:
            raise ValueError("model needs at least one subsystem weight")
        if not np.isfinite(self.offset) or not np.isfinite(w).all():
            raise ValueError("model parameters must be finite")
        object.__setattr__(self, "weights", w)
        if self.quality_weights is not None:
            qw = np.asarray(self.quality_weights, dtype=np.float64)
            if qw.ndim != 2 or qw.shape[0] != qw.shape[1]:
                raise ValueError("quality weights must be a square matrix")
            if not np.isfinite(qw).all():
                raise ValueError("quality weights must be finite")
            if not np.array_equal(qw, qw.T):
                raise ValueError("quality weights must be symmetric")
            object.__setattr__(self, "quality_weights", qw)

    @property
    def n_systems(self) -> int:
        return self.weights.size

    @property
    def q_dim(self) -> int:
        return 0 if self.quality_weights is None else self.quality_weights.shape[0]


@dataclass(frozen=True)
class PavCalibrationMap:
    """Monotone piecewise-linear score-to-LLR map frozen from a PAV fit.

    Constant within each training block (every block contributes its min and
    max score as knots), linear between blocks, clamped outside the training
    score range.
    """

    knot_scores: np.ndarray
    knot_llrs: np.ndarray
    llr_clip: float

    def __post_init__(self):
        xs = np.asarray(self.knot_scores, dtype=np.float64).reshape(-1)
        ys = np.asarray(self.knot_llrs, dtype=np.float64).reshape(-1)
        if xs.size == 0 or xs.shape != ys.shape:
            raise ValueError("need matching, non-empty knot arrays")
        if xs.size > 1 and not (np.diff(xs) > 0).all():
            raise ValueError("knot scores must be strictly increasing")
        if not np.isfinite(xs).all() or not np.isfinite(ys).all():
            raise ValueError("knots must be finite")
        if ys.size > 1 and (np.diff(ys) < 0).any():
            raise ValueError("knot LLRs must be nondecreasing")
        if not (self.llr_clip > 0):
            raise ValueError("llr_clip must be positive")
        object.__setattr__(self, "knot_scores", xs)
        object.__setattr__(self, "knot_llrs", ys)


@dataclass(frozen=True)
class QualityPairs:
    """Per-trial quality vectors: model side (q) and segment side (r).

    Arrays are (q_dim, n_trials) for the target and non-target trial lists,
    in the same order as the score stacks they accompany.
    """

    tar_q: np.ndarray
    tar_r: np.ndarray
    non_q: np.ndarray
    non_r: np.ndarray

    def __post_init__(self):
        arrs = {}
        for name in ("tar_q", "tar_r", "non_q", "non_r"):
            a = np.atleast_2d(np.asarray(getattr(self, name), dtype=np.float64))
            if not np.isfinite(a).all():
                raise ValueError(f"{name} must be finite")
            arrs[name] = a
        dims = {a.shape[0] for a in arrs.values()}
        if len(dims) != 1:
            raise DimensionMismatch(f"quality dimensions differ: {sorted(dims)}")
        if arrs["tar_q"].shape[1] != arrs["tar_r"].shape[1]:
            raise DimensionMismatch("target-side quality lengths differ")
        if arrs["non_q"].shape[1] != arrs["non_r"].shape[1]:
            raise DimensionMismatch("non-target-side quality lengths differ")
        for name, a in arrs.items():
            object.__setattr__(self, name, a)

    @property
    def q_dim(self) -> int:
        return self.tar_q.shape[0]


@dataclass
class TrainingConfig:
    """Knobs for supervised training.

    ptar is the effective target prior the objective is weighted for;
    llr_clip bounds the magnitude of PAV calibration LLRs (nats); ridge adds
    an optional quadratic penalty on the fusion/quality weights (never on the
    offset), default off.
    """

    ptar: float = 0.5
    llr_clip: float = 200.0
    ridge: float = 0.0
    optimizer: TrOptions = field(default_factory=TrOptions)

    def __post_init__(self):
        if not (0.0 < self.ptar < 1.0):
            raise ValueError("ptar must lie strictly between 0 and 1")
        if not (self.llr_clip > 0):
            raise ValueError("llr_clip must be positive")
        if self.ridge < 0:
            raise ValueError("ridge must be non-negative")


def _upper_indices(q: int):
    return np.triu_indices(q)


def _quality_columns(q: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Design columns of the symmetric bilinear form, one per upper-triangle
    entry of W: q_i*r_i on the diagonal, q_i*r_j + q_j*r_i off it."""
    qdim, n = q.shape
    rows_i, rows_j = _upper_indices(qdim)
    cols = np.empty((n, rows_i.size), dtype=np.float64)
    for c, (i, j) in enumerate(zip(rows_i, rows_j)):
        if i == j:
            cols[:, c] = q[i] * r[i]
        else:
            cols[:, c] = q[i] * r[j] + q[j] * r[i]
    return cols


def _design(stack: np.ndarray, quality_q=None, quality_r=None) -> np.ndarray:
    n = stack.shape[1]
    parts = [np.ones((n, 1)), stack.T]
    if quality_q is not None:
        parts.append(_quality_columns(quality_q, quality_r))
    return np.concatenate(parts, axis=1)


def _pack(model: FusionModel) -> np.ndarray:
    parts = [np.array([model.offset]), model.weights]
    if model.quality_weights is not None:
        parts.append(model.quality_weights[_upper_indices(model.q_dim)])
    return np.concatenate(parts)


def _unpack(theta: np.ndarray, n_systems: int, q_dim: int) -> FusionModel:
    offset = float(theta[0])
    weights = theta[1 : 1 + n_systems]
    if q_dim == 0:
        return FusionModel(offset, weights)
    w = np.zeros((q_dim, q_dim))
    w[_upper_indices(q_dim)] = theta[1 + n_systems :]
    w = w + w.T - np.diag(np.diag(w))
    return FusionModel(offset, weights, w)


class _WlrOracle:
    """Prior-weighted logistic objective over fixed design matrices.

    Caches the forward pass at the last parameter vector so Hessian-vector
    products during CG reuse the sigmoids.
    """

    def __init__(self, x_tar, x_non, ptar, ridge):
        self.x_tar = x_tar
        self.x_non = x_non
        self.x0 = logit(ptar)
        self.c_tar = ptar / (x_tar.shape[0] * _LN2)
        self.c_non = (1.0 - ptar) / (x_non.shape[0] * _LN2)
        self.ridge = ridge
        self._theta = None
        self._u_tar = None
        self._u_non = None

    def _forward(self, theta):
        if self._theta is None or not np.array_equal(theta, self._theta):
            self._theta = theta.copy()
            self._u_tar = self.x_tar @ theta + self.x0
            self._u_non = self.x_non @ theta + self.x0
        return self._u_tar, self._u_non

    def _penalized(self, theta):
        pen = theta.copy()
        pen[0] = 0.0
        return pen

    def value_and_grad(self, theta):
        u_tar, u_non = self._forward(theta)
        value = self.c_tar * np.logaddexp(0.0, -u_tar).sum() + self.c_non * np.logaddexp(
            0.0, u_non
        ).sum()
        grad = self.c_non * (expit(u_non) @ self.x_non) - self.c_tar * (
            expit(-u_tar) @ self.x_tar
        )
        if self.ridge:
            pen = self._penalized(theta)
            value += 0.5 * self.ridge * float(pen @ pen)
            grad = grad + self.ridge * pen
        return float(value), grad

    def hessp(self, theta, v):
        u_tar, u_non = self._forward(theta)
        s_tar = expit(u_tar) * expit(-u_tar)
        s_non = expit(u_non) * expit(-u_non)
        hv = self.c_tar * ((s_tar * (self.x_tar @ v)) @ self.x_tar) + self.c_non * (
            (s_non * (self.x_non @ v)) @ self.x_non
        )
        if self.ridge:
            hv = hv + self.ridge * self._penalized(v)
        return hv

    def as_objective(self) -> ObjectiveOracle:
        return ObjectiveOracle(self.value_and_grad, self.hessp)


def _stack_dev(dev: Sequence[LabeledScores]) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(dev, LabeledScores):
        dev = [dev]
    if len(dev) == 0:
        raise DegenerateInput("need at least one subsystem")
    n_tar = {d.n_tar for d in dev}
    n_non = {d.n_non for d in dev}
    if len(n_tar) != 1 or len(n_non) != 1:
        raise AlignmentError("subsystem score stacks differ in trial counts")
    t, n = n_tar.pop(), n_non.pop()
    if t == 0 or n == 0:
        raise DegenerateInput("need both target and non-target development trials")
    tar = np.vstack([d.tar for d in dev])
    non = np.vstack([d.non for d in dev])
    if not (np.isfinite(tar).all() and np.isfinite(non).all()):
        raise ValueError("development scores must be finite")
    return tar, non


def _oracle_for(dev, quality, cfg) -> tuple[_WlrOracle, int, int]:
    tar, non = _stack_dev(dev)
    if quality is None:
        x_tar = _design(tar)
        x_non = _design(non)
        q_dim = 0
    else:
        if quality.tar_q.shape[1] != tar.shape[1] or quality.non_q.shape[1] != non.shape[1]:
            raise AlignmentError("quality vectors do not match trial counts")
        x_tar = _design(tar, quality.tar_q, quality.tar_r)
        x_non = _design(non, quality.non_q, quality.non_r)
        q_dim = quality.q_dim
    return _WlrOracle(x_tar, x_non, cfg.ptar, cfg.ridge), tar.shape[0], q_dim


def wlr_objective(
    model: FusionModel,
    dev: Union[LabeledScores, Sequence[LabeledScores]],
    quality: Optional[QualityPairs] = None,
    ptar: float = 0.5,
    ridge: float = 0.0,
):
    """Evaluate the prior-weighted logistic objective at given parameters.

    The objective is the expected proper scoring rate of the mapped LLRs
    shifted to the operating prior: softplus(-llr - logit(ptar)) over
    targets, weighted ptar/T, plus softplus(llr + logit(ptar)) over
    non-targets, weighted (1-ptar)/N, in bits. With the identity map and
    ptar = 0.5 this is exactly Cllr.

    Returns:
        (value, gradient, hessp) where gradient and hessp follow the packed
        parameter order [offset, weights..., upper-triangle of W...] and
        hessp(v) is the Hessian-vector product at these parameters.
    """
    cfg = TrainingConfig(ptar=ptar, ridge=ridge)
    oracle, n_sys, q_dim = _oracle_for(dev, quality, cfg)
    if n_sys != model.n_systems or q_dim != model.q_dim:
        raise DimensionMismatch(
            f"model is {model.n_systems} systems / q_dim {model.q_dim}, "
            f"data is {n_sys} / {q_dim}"
        )
    theta = _pack(model)
    value, grad = oracle.value_and_grad(theta)
    return value, grad, lambda v: oracle.hessp(theta, np.asarray(v, dtype=np.float64))


def _train(dev, quality, cfg) -> FusionModel:
    oracle, n_sys, q_dim = _oracle_for(dev, quality, cfg)
    n_w = n_sys + (q_dim * (q_dim + 1)) // 2
    theta0 = np.zeros(1 + n_w)
    theta0[1 : 1 + n_sys] = 1.0 / n_sys
    result = minimize(oracle.as_objective(), theta0, cfg.optimizer)
    return _unpack(result.w, n_sys, q_dim)


def train_calibration(dev: LabeledScores, config: Optional[TrainingConfig] = None) -> FusionModel:
    """Train an affine score-to-LLR calibration on a development set.

    Needs at least two scores of each class. Starts from offset 0, weight 1.
    """
    cfg = config or TrainingConfig()
    if dev.n_tar < 2 or dev.n_non < 2:
        raise DegenerateInput("calibration needs at least two scores per class")
    return _train([dev], None, cfg)


def train_fusion(
    dev: Sequence[LabeledScores], config: Optional[TrainingConfig] = None
) -> FusionModel:
    """Train a linear fusion of several aligned subsystems to one LLR.

    Starts from offset 0 and weight 1/n_systems each.
    """
    return _train(dev, None, config or TrainingConfig())


def train_quality_fusion(
    dev: Sequence[LabeledScores],
    quality: QualityPairs,
    config: Optional[TrainingConfig] = None,
) -> FusionModel:
    """Train a fusion augmented with a symmetric bilinear quality term.

    The quality term starts at zero, so the search begins at the plain
    fusion's starting point.
    """
    return _train(dev, quality, config or TrainingConfig())


def apply_fusion(
    model: FusionModel,
    scores_stack,
    quality: Optional[tuple[np.ndarray, np.ndarray]] = None,
) -> np.ndarray:
    """Map a stack of subsystem scores through a trained model.

    Args:
        model: trained parameters.
        scores_stack: (n_systems, n_trials) array (a single 1-D row is
            accepted for one-system models).
        quality: (q, r) arrays of shape (q_dim, n_trials); required exactly
            when the model has quality weights.

    Returns:
        1-D array of fused LLRs.
    """
    s = np.asarray(scores_stack, dtype=np.float64)
    if s.ndim == 1:
        s = s[None, :]
    if s.ndim != 2 or s.shape[0] != model.n_systems:
        raise DimensionMismatch(
            f"score stack has {s.shape[0] if s.ndim == 2 else s.ndim} rows, "
            f"model fuses {model.n_systems} systems"
        )
    if (model.quality_weights is None) != (quality is None):
        raise DimensionMismatch("quality input must be given exactly when the model uses it")
    llr = model.offset + model.weights @ s
    if quality is not None:
        q = np.atleast_2d(np.asarray(quality[0], dtype=np.float64))
        r = np.atleast_2d(np.asarray(quality[1], dtype=np.float64))
        if q.shape != (model.q_dim, s.shape[1]) or r.shape != q.shape:
            raise DimensionMismatch("quality arrays must be (q_dim, n_trials)")
        llr = llr + np.einsum("in,ij,jn->n", q, model.quality_weights, r)
    return llr


def train_pav_calibration(
    dev: LabeledScores, config: Optional[TrainingConfig] = None
) -> PavCalibrationMap:
    """Freeze the PAV recalibration of a development set into a score map.

    Each PAV block contributes its lowest and highest training score as knots
    at the block LLR (clipped to +-llr_clip), so applying the map to the
    training scores reproduces pav_llrs up to the clip.
    """
    cfg = config or TrainingConfig()
    min_s, max_s, llrs = pav_llr_blocks(dev)
    clipped = np.clip(llrs, -cfg.llr_clip, cfg.llr_clip)
    wide = max_s > min_s
    xs = np.concatenate([min_s, max_s[wide]])
    ys = np.concatenate([clipped, clipped[wide]])
    order = np.argsort(xs, kind="stable")
    return PavCalibrationMap(xs[order], ys[order], cfg.llr_clip)


def apply_pav_calibration(cal: PavCalibrationMap, scores) -> np.ndarray:
    """Map scores through a frozen PAV calibration.

    Linear interpolation on the score axis between knots, clamped to the
    first/last knot LLR outside the training range.
    """
    s = np.asarray(scores, dtype=np.float64)
    if np.isnan(s).any():
        raise ValueError("scores must not contain NaN")
    return np.interp(s, cal.knot_scores, cal.knot_llrs)


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def model_to_text(model: Union[FusionModel, PavCalibrationMap]) -> str:
    """Serialize a trained model to a small versioned text document."""
    lines = ["detscore-model 1"]
    if isinstance(model, FusionModel):
        lines.append("kind affine")
        lines.append(f"offset {_fmt(model.offset)}")
        lines.append("weights " + " ".join(_fmt(w) for w in model.weights))
        if model.quality_weights is not None:
            upper = model.quality_weights[_upper_indices(model.q_dim)]
            lines.append(f"qdim {model.q_dim}")
            lines.append("quality-upper " + " ".join(_fmt(w) for w in upper))
    elif isinstance(model, PavCalibrationMap):
        lines.append("kind pav")
        lines.append(f"clip {_fmt(model.llr_clip)}")
        for x, y in zip(model.knot_scores, model.knot_llrs):
            lines.append(f"knot {_fmt(x)} {_fmt(y)}")
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    return "\n".join(lines) + "\n"


def model_from_text(text: str) -> Union[FusionModel, PavCalibrationMap]:
    """Parse a model document produced by model_to_text."""
    rows: list[tuple[int, list[str]]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line:
            rows.append((lineno, line.split()))
    if not rows or rows[0][1] != ["detscore-model", "1"]:
        raise ParseError(rows[0][0] if rows else 1, "not a detscore-model version 1 document")
    fields: dict[str, tuple[int, list[str]]] = {}
    knots: list[tuple[float, float]] = []
    for lineno, parts in rows[1:]:
        name, args = parts[0], parts[1:]
        if name == "knot":
            if len(args) != 2:
                raise ParseError(lineno, "knot lines need two values")
            try:
                knots.append((float(args[0]), float(args[1])))
            except ValueError:
                raise ParseError(lineno, "bad knot value") from None
        elif name in fields:
            raise ParseError(lineno, f"duplicate field {name!r}")
        else:
            fields[name] = (lineno, args)

    def floats(name: str) -> list[float]:
        lineno, args = fields[name]
        try:
            return [float(a) for a in args]
        except ValueError:
            raise ParseError(lineno, f"bad value in field {name!r}") from None

    if "kind" not in fields:
        raise ParseError(1, "missing kind field")
    kind = fields["kind"][1]
    try:
        if kind == ["affine"]:
            (offset,) = floats("offset")
            weights = np.array(floats("weights"))
            if "qdim" in fields:
                (qdim,) = floats("qdim")
                q = int(qdim)
                upper = np.array(floats("quality-upper"))
                if upper.size != q * (q + 1) // 2:
                    raise ParseError(fields["quality-upper"][0], "wrong quality-upper length")
                w = np.zeros((q, q))
                w[_upper_indices(q)] = upper
                w = w + w.T - np.diag(np.diag(w))
                return FusionModel(offset, weights, w)
            return FusionModel(offset, weights)
        if kind == ["pav"]:
            (clip,) = floats("clip")
            if not knots:
                raise ParseError(1, "pav model needs knot lines")
            xs = np.array([k[0] for k in knots])
            ys = np.array([k[1] for k in knots])
            return PavCalibrationMap(xs, ys, clip)
    except KeyError as e:
        raise ParseError(1, f"missing field {e.args[0]!r}") from None
    except ValueError as e:
        raise ParseError(1, str(e)) from None
    raise ParseError(fields["kind"][0], f"unknown model kind {' '.join(kind)!r}")


def stack_for_key(
    score_matrices: Sequence[ScoreMatrix],
    key: TrialKey,
    model_quality: Optional[QualityMeasures] = None,
    segment_quality: Optional[QualityMeasures] = None,
):
    """Align several score matrices (and optional quality) on a key.

    Keeps the labeled trials scored by *every* system, in the key's
    model-major cell order.

    Returns:
        (dev, quality, n_missing): per-system LabeledScores with identical
        trial order, a QualityPairs (or None when no quality was given), and
        the count of labeled trials dropped because some system lacked them.
    """
    if len(score_matrices) == 0:
        raise DegenerateInput("need at least one score matrix")
    if (model_quality is None) != (segment_quality is None):
        raise DimensionMismatch("need quality for both sides or neither")
    common = None
    values = []
    for scores in score_matrices:
        has_score, vals = gather_scores_on_key(scores, key)
        common = has_score if common is None else (common & has_score)
        values.append(vals)
    labeled = key.label != TrialLabel.IGNORED
    n_missing = int(np.count_nonzero(labeled & ~common))
    tar_mask = (key.label == TrialLabel.TARGET) & common
    non_mask = (key.label == TrialLabel.NONTARGET) & common
    dev = [LabeledScores(v[tar_mask], v[non_mask]) for v in values]

    quality = None
    if model_quality is not None:
        try:
            qm = np.stack([model_quality.column(n) for n in key.model_names], axis=1)
            qs = np.stack([segment_quality.column(n) for n in key.segment_names], axis=1)
        except KeyError as e:
            raise AlignmentError(str(e)) from None
        if qm.shape[0] != qs.shape[0]:
            raise DimensionMismatch("model and segment quality dimensions differ")
        tr, tc = np.nonzero(tar_mask)
        nr, nc = np.nonzero(non_mask)
        quality = QualityPairs(qm[:, tr], qs[:, tc], qm[:, nr], qs[:, nc])
    return dev, quality, n_missing


def fuse_matrices(
    model: FusionModel,
    score_matrices: Sequence[ScoreMatrix],
    model_quality: Optional[QualityMeasures] = None,
    segment_quality: Optional[QualityMeasures] = None,
) -> ScoreMatrix:
    """Apply a trained fusion to score matrices, producing an LLR matrix.

    The result lives on the first matrix's name order restricted to names
    every system shares; a cell is valid when every system scores it.
    """
    if len(score_matrices) != model.n_systems:
        raise DimensionMismatch(
            f"model fuses {model.n_systems} systems, got {len(score_matrices)} matrices"
        )
    first = score_matrices[0]
    shared_m = [
        n
        for n in first.model_names
        if all(n in set(s.model_names) for s in score_matrices)
    ]
    shared_s = [
        n
        for n in first.segment_names
        if all(n in set(s.segment_names) for s in score_matrices)
    ]
    if not shared_m or not shared_s:
        raise EmptySelection("score matrices share no trials")
    probe = TrialKey(
        shared_m, shared_s, np.full((len(shared_m), len(shared_s)), 1, dtype=np.int64)
    )
    common = None
    values = []
    for scores in score_matrices:
        has_score, vals = gather_scores_on_key(scores, probe)
        common = has_score if common is None else (common & has_score)
        values.append(vals)
    rows, cols = np.nonzero(common)
    stack = np.stack([v[rows, cols] for v in values])
    quality = None
    if model.quality_weights is not None:
        if model_quality is None or segment_quality is None:
            raise DimensionMismatch("model uses quality; provide both quality sides")
        try:
            qm = np.stack([model_quality.column(n) for n in shared_m], axis=1)
            qs = np.stack([segment_quality.column(n) for n in shared_s], axis=1)
        except KeyError as e:
            raise AlignmentError(str(e)) from None
        quality = (qm[:, rows], qs[:, cols])
    elif model_quality is not None or segment_quality is not None:
        raise DimensionMismatch("model has no quality weights but quality was given")
    fused = apply_fusion(model, stack, quality)
    out = np.zeros(common.shape)
    out[rows, cols] = fused
    return ScoreMatrix(shared_m, shared_s, common, out)
