"""Synthetic two-Gaussian score generator and its exact log-likelihood-ratio.

Targets draw from N(3, 2) (variance 2), non-targets from N(0, 1). Because
both class-conditional densities are known, the true LLR of a raw score is
available in closed form, which makes this distribution a convenient ground
truth for calibration experiments: the raw score is a monotone-warped
(hence miscalibrated) version of llr(s) for s above the parabola's vertex,
and any calibration method can be judged against the analytic curve.
"""

from __future__ import annotations

import numpy as np

from .trials import LabeledScores

__all__ = ["gaussian_scores", "gaussian_llr", "TAR_MEAN", "TAR_VAR", "NON_MEAN", "NON_VAR"]

TAR_MEAN = 3.0
TAR_VAR = 2.0
NON_MEAN = 0.0
NON_VAR = 1.0


def gaussian_scores(n_tar: int, n_non: int, seed=0) -> LabeledScores:
    """Draw labeled scores from the reference two-Gaussian distribution."""
    rng = np.random.default_rng(seed)
    tar = rng.normal(TAR_MEAN, np.sqrt(TAR_VAR), size=n_tar)
    non = rng.normal(NON_MEAN, np.sqrt(NON_VAR), size=n_non)
    return LabeledScores(tar, non)


def gaussian_llr(scores):
    """Exact log-likelihood-ratio of a raw score under the reference model.

    llr(s) = log N(s; 3, 2) - log N(s; 0, 1), a convex parabola in s with
    minimum near s = -1, so the mapping from score to LLR is non-monotone
    on the far-left tail.
    """
    s = np.asarray(scores, dtype=np.float64)
    log_tar = -0.5 * (s - TAR_MEAN) ** 2 / TAR_VAR - 0.5 * np.log(2.0 * np.pi * TAR_VAR)
    log_non = -0.5 * (s - NON_MEAN) ** 2 / NON_VAR - 0.5 * np.log(2.0 * np.pi * NON_VAR)
    return log_tar - log_non
