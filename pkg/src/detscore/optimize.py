"""Trust-region Newton minimizer with Steihaug conjugate-gradient subproblems.

Works on objective oracles that expose the value, the gradient and
Hessian-vector products; the Hessian itself is never formed, so the cost per
inner iteration is one H*v callback. Deterministic: the iterate sequence is a
pure function of (oracle, start, options).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import NoProgressWarning, OracleFailure

__all__ = ["ObjectiveOracle", "TrOptions", "TrDiagnostics", "TrResult", "minimize"]


@dataclass
class ObjectiveOracle:
    """Callbacks defining a smooth objective.

    value_and_grad(w) returns (f, grad); hessp(w, v) returns H(w) @ v.
    """

    value_and_grad: Callable[[np.ndarray], tuple[float, np.ndarray]]
    hessp: Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass
class TrOptions:
    """Trust-region controls.

    accept_threshold/expand_threshold are the agreement ratios below which a
    step is rejected and above which (with an active radius) the radius grows.
    grad_rtol is relative to the gradient norm at the start. cg_max_iter
    defaults to the problem dimension.
    """

    initial_radius: float = 1.0
    max_radius: float = 1000.0
    accept_threshold: float = 0.05
    expand_threshold: float = 0.75
    shrink_factor: float = 0.25
    grow_factor: float = 2.0
    grad_rtol: float = 1e-7
    max_iter: int = 200
    cg_max_iter: Optional[int] = None

    def __post_init__(self):
        if not (0 < self.initial_radius <= self.max_radius):
            raise ValueError("need 0 < initial_radius <= max_radius")
        if not (0 < self.accept_threshold < self.expand_threshold < 1):
            raise ValueError("need 0 < accept_threshold < expand_threshold < 1")
        if not (0 < self.shrink_factor < 1 < self.grow_factor):
            raise ValueError("need shrink_factor < 1 < grow_factor")
        if self.grad_rtol <= 0 or self.max_iter < 1:
            raise ValueError("grad_rtol must be positive and max_iter >= 1")


@dataclass
class TrDiagnostics:
    """What happened during a minimize() run."""

    iterations: int = 0
    n_value_evals: int = 0
    n_hessp_evals: int = 0
    termination: str = ""
    converged: bool = False
    f_history: list = field(default_factory=list)
    grad_norms: list = field(default_factory=list)


@dataclass
class TrResult:
    w: np.ndarray
    f: float
    grad_norm: float
    diagnostics: TrDiagnostics


def _checked_eval(oracle: ObjectiveOracle, w: np.ndarray, diag: TrDiagnostics):
    f, g = oracle.value_and_grad(w)
    diag.n_value_evals += 1
    g = np.asarray(g, dtype=np.float64)
    if not np.isfinite(f) or not np.isfinite(g).all():
        raise OracleFailure(f"non-finite objective value or gradient at w={w!r}")
    return float(f), g


def _boundary_tau(z: np.ndarray, d: np.ndarray, radius: float) -> float:
    """Positive tau with ||z + tau*d|| = radius (requires ||z|| < radius, d != 0)."""
    dd = float(d @ d)
    zd = float(z @ d)
    zz = float(z @ z)
    return (-zd + np.sqrt(zd * zd + dd * (radius * radius - zz))) / dd


def _steihaug_cg(oracle, w, grad, radius, forcing_tol, max_iter, diag):
    """Approximately minimize the local quadratic model within the radius.

    Returns (step, hit_boundary). Walks conjugate directions until the
    residual beats the forcing tolerance, the boundary is reached, or
    negative curvature appears (then runs to the boundary).
    """
    z = np.zeros_like(grad)
    r = grad.copy()
    rr = float(r @ r)
    if np.sqrt(rr) <= forcing_tol:
        return z, False
    d = -grad
    for _ in range(max_iter):
        hd = np.asarray(oracle.hessp(w, d), dtype=np.float64)
        diag.n_hessp_evals += 1
        if not np.isfinite(hd).all():
            raise OracleFailure("non-finite Hessian-vector product")
        dhd = float(d @ hd)
        if dhd <= 0:
            return z + _boundary_tau(z, d, radius) * d, True
        alpha = rr / dhd
        z_next = z + alpha * d
        if float(np.linalg.norm(z_next)) >= radius:
            return z + _boundary_tau(z, d, radius) * d, True
        r = r + alpha * hd
        rr_next = float(r @ r)
        z = z_next
        if np.sqrt(rr_next) <= forcing_tol:
            return z, False
        d = -r + (rr_next / rr) * d
        rr = rr_next
    return z, False


def minimize(
    oracle: ObjectiveOracle, w0, options: Optional[TrOptions] = None
) -> TrResult:
    """Minimize a smooth objective by a trust-region Newton-CG iteration.

    Args:
        oracle: objective callbacks.
        w0: starting point.
        options: trust-region controls; defaults are sensible for
            well-scaled convex problems.

    Returns:
        TrResult with the final iterate, value, gradient norm and
        diagnostics. Hitting the iteration cap raises NoProgressWarning (a
        warning, not an error) and is recorded in diagnostics.termination.
    """
    opts = options or TrOptions()
    w = np.array(w0, dtype=np.float64).reshape(-1).copy()
    if w.size == 0:
        raise ValueError("w0 must have at least one element")
    diag = TrDiagnostics()
    f, g = _checked_eval(oracle, w, diag)
    gnorm = float(np.linalg.norm(g))
    diag.f_history.append(f)
    diag.grad_norms.append(gnorm)
    tol = opts.grad_rtol * gnorm
    cg_cap = opts.cg_max_iter if opts.cg_max_iter is not None else w.size
    radius = opts.initial_radius

    if gnorm == 0.0:
        diag.termination = "gradient exactly zero at start"
        diag.converged = True
        return TrResult(w, f, gnorm, diag)

    for it in range(1, opts.max_iter + 1):
        diag.iterations = it
        forcing = min(0.5, np.sqrt(gnorm)) * gnorm
        step, hit_boundary = _steihaug_cg(oracle, w, g, radius, forcing, cg_cap, diag)
        step_norm = float(np.linalg.norm(step))
        if step_norm == 0.0:
            diag.termination = "zero step from subproblem"
            diag.converged = gnorm <= tol
            return TrResult(w, f, gnorm, diag)

        h_step = np.asarray(oracle.hessp(w, step), dtype=np.float64)
        diag.n_hessp_evals += 1
        predicted = -(float(g @ step) + 0.5 * float(step @ h_step))
        f_new, g_new = _checked_eval(oracle, w + step, diag)
        actual = f - f_new
        rho = actual / predicted if predicted > 0 else -np.inf

        if rho < opts.accept_threshold:
            radius *= opts.shrink_factor
        else:
            w = w + step
            f, g = f_new, g_new
            gnorm = float(np.linalg.norm(g))
            diag.f_history.append(f)
            diag.grad_norms.append(gnorm)
            if rho > opts.expand_threshold and hit_boundary:
                radius = min(opts.grow_factor * radius, opts.max_radius)
        if gnorm <= tol:
            diag.termination = "gradient tolerance reached"
            diag.converged = True
            return TrResult(w, f, gnorm, diag)

    diag.termination = "iteration cap reached"
    diag.converged = False
    warnings.warn(
        f"optimizer stopped after {opts.max_iter} iterations with |grad| = {gnorm:.3e} "
        f"(tolerance {tol:.3e})",
        NoProgressWarning,
        stacklevel=2,
    )
    return TrResult(w, f, gnorm, diag)
