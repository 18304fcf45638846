"""Proximal-gradient solvers for the Huber-loss penalized estimators.

One accelerated engine drives all four entry points. The engine is
FISTA-style momentum with a function-value safeguard: whenever a momentum
candidate would increase the objective, the momentum is restarted and the
step is retaken from the current iterate as a plain proximal-gradient
step, whose backtracked step size guarantees descent. The recorded
objective trace is therefore non-increasing up to 1e-12 per accepted
step. Plain unaccelerated iterations are available via
``SolverConfig(momentum=False)``.

Step sizes come from a backtracking line search against the quadratic
upper bound of the smooth part,

    f(z) <= f(y) + <grad f(y), z - y> + |z - y|^2 / (2 t),

shrinking t by ``backtrack_factor`` until the bound holds. The default
initial step is ``n / (lambda_o^2 * opnorm2)`` where ``opnorm2``
estimates the squared operator norm of the design via 20 power
iterations.

Joint formulation
-----------------
``solve_joint_oracle`` minimizes the quadratic objective with explicit
outlier variables,

    J(beta, theta) = (1/(2n)) |y - X beta - sqrt(n) theta|_2^2
                     + lambda_star |beta|_1 + lambda_o |theta|_1,

by exact alternating minimization. Minimizing J over theta at fixed beta
gives, entrywise in the residual r_i = y_i - <x_i, beta>,

    min_u (r - u)^2 / (2n) + (lambda_o / sqrt(n)) |u|
        = (1/(2n)) r^2                          for |r| <= lambda_o sqrt(n)
        = (lambda_o/sqrt(n)) |r| - lambda_o^2/2  otherwise,

with minimizer u = soft(r, lambda_o sqrt(n)) and theta = u / sqrt(n).
Both branches equal lambda_o^2 H(r / (lambda_o sqrt n)) exactly, so the
theta-profiled joint objective coincides with the Huber objective: no
additive or multiplicative calibration constant remains in this scaling.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, NamedTuple, Optional

import numpy as np

from .penalties import (
    HuberScale,
    nuclear_norm,
    project_inf_ball,
    singular_value_threshold,
    soft_threshold,
)
from .problems import (
    ProblemValidationError,
    RegressionProblem,
    SolverResult,
    TraceProblem,
    TuningParams,
    design_adjoint,
    design_apply,
)

# Objective decreases are tested against this additive slop; it is also the
# per-step tolerance promised by SolverResult.objective_trace.
_MONOTONE_TOL = 1e-12
POWER_ITERS = 20


@dataclass(frozen=True)
class SolverConfig:
    """Knobs shared by all solvers.

    step_rule "backtracking" shrinks the step until the descent lemma
    holds; "fixed" uses initial_step (or a conservative default) as-is.
    ``restart`` enables the function-value momentum restart; the descent
    safeguard stays on regardless so traces remain monotone.
    """

    max_iters: int = 5000
    rel_tol: float = 1e-9
    step_rule: str = "backtracking"
    backtrack_factor: float = 0.5
    initial_step: Optional[float] = None
    momentum: bool = True
    restart: bool = True

    def __post_init__(self):
        if self.max_iters < 1:
            raise ProblemValidationError(f"max_iters must be >= 1, got {self.max_iters}")
        if not (0 < self.rel_tol < 1):
            raise ProblemValidationError(f"rel_tol must be in (0, 1), got {self.rel_tol}")
        if self.step_rule not in ("backtracking", "fixed"):
            raise ProblemValidationError(f"unknown step_rule {self.step_rule!r}")
        if not (0 < self.backtrack_factor < 1):
            raise ProblemValidationError(
                f"backtrack_factor must be in (0, 1), got {self.backtrack_factor}"
            )
        if self.initial_step is not None and not self.initial_step > 0:
            raise ProblemValidationError(
                f"initial_step must be positive when given, got {self.initial_step}"
            )


class JointResult(NamedTuple):
    beta: np.ndarray
    theta: np.ndarray
    objective: float
    iterations: int
    converged: bool


def _power_opnorm_sq(apply_fn, adjoint_fn, shape, iters: int = POWER_ITERS) -> float:
    """Estimate |A|_op^2 where A maps parameter -> (n,) via power iteration."""
    v = np.ones(shape, dtype=float)
    v /= np.linalg.norm(v)
    lam = 1.0
    for _ in range(iters):
        w = adjoint_fn(apply_fn(v))
        nw = float(np.linalg.norm(w))
        if nw <= 1e-300:
            return 1e-300
        v = w / nw
        lam = nw
    return lam


def _minimize(
    x0: np.ndarray,
    smooth: Callable[[np.ndarray], tuple],
    smooth_value: Callable[[np.ndarray], float],
    penalty_value: Callable[[np.ndarray], float],
    prox: Callable[[np.ndarray, float], np.ndarray],
    cfg: SolverConfig,
    t0: float,
):
    """Safeguarded accelerated proximal gradient. Fully deterministic."""
    backtracking = cfg.step_rule == "backtracking"
    x = np.array(x0, dtype=float)
    x_prev = x
    f_x, g_x = smooth(x)
    F_x = f_x + penalty_value(x)
    trace = [F_x]
    t = float(t0)
    theta_mom = 1.0
    converged = False
    iterations = 0
    t_floor = t0 * 1e-20

    for _ in range(cfg.max_iters):
        if cfg.momentum and theta_mom > 1.0:
            theta_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * theta_mom**2))
            y = x + ((theta_mom - 1.0) / theta_next) * (x - x_prev)
            f_y, g_y = smooth(y)
            from_x = False
        else:
            theta_next = 1.0 if not cfg.momentum else 0.5 * (1.0 + np.sqrt(5.0))
            y, f_y, g_y = x, f_x, g_x
            from_x = True

        accepted = None
        while True:
            cand = prox(y - t * g_y, t)
            f_c = smooth_value(cand)
            if backtracking:
                d = cand - y
                bound = f_y + float(np.vdot(g_y, d)) + float(np.vdot(d, d)) / (2.0 * t)
                if f_c > bound + _MONOTONE_TOL * max(1.0, abs(bound)) and t > t_floor:
                    t *= cfg.backtrack_factor
                    continue
            F_c = f_c + penalty_value(cand)
            if F_c <= F_x + _MONOTONE_TOL:
                accepted = (cand, F_c)
                break
            if not from_x and cfg.restart:
                # momentum overshoot: restart and retake the step from x
                y, f_y, g_y = x, f_x, g_x
                from_x = True
                theta_next = 1.0
                continue
            if backtracking and t > t_floor:
                t *= cfg.backtrack_factor
                continue
            break

        if accepted is None:
            # no descent possible at the step floor; stop where we are
            break

        cand, F_c = accepted
        x_prev, x = x, cand
        f_x, g_x = smooth(x)
        F_prev, F_x = F_x, F_c
        trace.append(F_x)
        theta_mom = theta_next
        iterations += 1
        if abs(F_prev - F_x) <= cfg.rel_tol * max(1.0, abs(F_prev)):
            converged = True
            break

    return x, np.asarray(trace), iterations, converged, t


def _default_step(n: int, opnorm_sq: float, cfg: SolverConfig) -> float:
    # the smooth-part curvature is at most opnorm^2 / n for every lambda_o:
    # the loss prefactor lambda_o^2 cancels against the residual rescaling
    if cfg.initial_step is not None:
        return cfg.initial_step
    if cfg.step_rule == "fixed":
        return 0.95 * n / (1.05 * opnorm_sq)
    return n / opnorm_sq


def _huber_smooth_parts(y, apply_fn, adjoint_fn, n, tp):
    scale = tp.lambda_o * np.sqrt(n)
    coef = tp.lambda_o / np.sqrt(n)

    def value(x):
        u = (y - apply_fn(x)) / scale
        a = np.abs(u)
        return float(tp.lambda_o**2 * np.where(a <= 1.0, 0.5 * u * u, a - 0.5).sum())

    def value_grad(x):
        u = (y - apply_fn(x)) / scale
        a = np.abs(u)
        val = float(tp.lambda_o**2 * np.where(a <= 1.0, 0.5 * u * u, a - 0.5).sum())
        grad = -coef * adjoint_fn(np.clip(u, -1.0, 1.0))
        return val, grad

    return value, value_grad


def solve_adversarial_lasso(
    problem: RegressionProblem,
    tp: TuningParams,
    cfg: SolverConfig = SolverConfig(),
    x0: Optional[np.ndarray] = None,
) -> SolverResult:
    """l1-penalized Huber-loss regression; starts at zero unless x0 is given."""
    X, y, n = problem.X, problem.y, problem.n
    apply_fn = lambda b: X @ b
    adjoint_fn = lambda r: X.T @ r
    sv, svg = _huber_smooth_parts(y, apply_fn, adjoint_fn, n, tp)
    pen = lambda b: tp.lambda_star * float(np.abs(b).sum())
    prox = lambda v, t: soft_threshold(v, t * tp.lambda_star)
    op2 = _power_opnorm_sq(apply_fn, adjoint_fn, (problem.d,))
    t0 = _default_step(n, op2, cfg)
    start = np.zeros(problem.d) if x0 is None else np.array(x0, dtype=float)
    x, trace, iters, conv, t = _minimize(start, svg, sv, pen, prox, cfg, t0)
    return SolverResult(x, trace, iters, conv, t)


def solve_matrix_cs(
    problem: TraceProblem,
    tp: TuningParams,
    cfg: SolverConfig = SolverConfig(),
    x0: Optional[np.ndarray] = None,
) -> SolverResult:
    """Nuclear-norm penalized Huber-loss trace regression; zero start default."""
    n = problem.n
    apply_fn = lambda B: design_apply(problem, B)
    adjoint_fn = lambda r: design_adjoint(problem, r)
    sv, svg = _huber_smooth_parts(problem.y, apply_fn, adjoint_fn, n, tp)
    pen = lambda B: tp.lambda_star * nuclear_norm(B)
    prox = lambda V, t: singular_value_threshold(V, t * tp.lambda_star)
    op2 = _power_opnorm_sq(apply_fn, adjoint_fn, problem.dims)
    t0 = _default_step(n, op2, cfg)
    start = np.zeros(problem.dims) if x0 is None else np.array(x0, dtype=float)
    x, trace, iters, conv, t = _minimize(start, svg, sv, pen, prox, cfg, t0)
    return SolverResult(x, trace, iters, conv, t)


def solve_matrix_completion(
    problem: TraceProblem,
    tp: TuningParams,
    cfg: SolverConfig = SolverConfig(),
    B0: Optional[np.ndarray] = None,
) -> SolverResult:
    """Completion solver: gradient step, then SVT, then box projection.

    Iterates stay inside the entrywise ball of radius ``tp.inf_ball_radius``;
    an infeasible start is projected onto the ball rather than rejected.
    """
    if tp.inf_ball_radius is None:
        raise ProblemValidationError("matrix completion requires inf_ball_radius")
    n = problem.n
    radius = tp.inf_ball_radius
    apply_fn = lambda B: design_apply(problem, B)
    adjoint_fn = lambda r: design_adjoint(problem, r)
    sv, svg = _huber_smooth_parts(problem.y, apply_fn, adjoint_fn, n, tp)
    pen = lambda B: tp.lambda_star * nuclear_norm(B)
    prox = lambda V, t: project_inf_ball(
        singular_value_threshold(V, t * tp.lambda_star), radius
    )
    x0 = np.zeros(problem.dims) if B0 is None else project_inf_ball(np.asarray(B0, float), radius)
    op2 = _power_opnorm_sq(apply_fn, adjoint_fn, problem.dims)
    t0 = _default_step(n, op2, cfg)
    x, trace, iters, conv, t = _minimize(x0, svg, sv, pen, prox, cfg, t0)
    return SolverResult(x, trace, iters, conv, t)


def solve_joint_oracle(
    problem: RegressionProblem,
    tp: TuningParams,
    cfg: SolverConfig = SolverConfig(),
    outer_iters: int = 500,
    outer_tol: float = 1e-13,
) -> JointResult:
    """Alternating minimization of the joint quadratic objective J.

    The beta step is an l1-penalized least-squares solve on the adjusted
    responses ``y - sqrt(n) theta`` (warm-started accelerated proximal
    gradient); the theta step is the closed form
    ``theta = soft(y - X beta, lambda_o sqrt(n)) / sqrt(n)``. Both steps
    are exact block minimizers, so J decreases monotonically; the
    profiled value equals the Huber objective at the same beta.
    """
    X, y, n = problem.X, problem.y, problem.n
    sqn = np.sqrt(n)
    scale = tp.lambda_o * sqn
    apply_fn = lambda b: X @ b
    adjoint_fn = lambda r: X.T @ r
    op2 = _power_opnorm_sq(apply_fn, adjoint_fn, (problem.d,))
    inner_cfg = replace(cfg, initial_step=None)
    t0 = cfg.initial_step if cfg.initial_step is not None else n / op2

    pen = lambda b: tp.lambda_star * float(np.abs(b).sum())
    prox = lambda v, t: soft_threshold(v, t * tp.lambda_star)

    beta = np.zeros(problem.d)
    theta = np.zeros(n)
    obj = np.inf
    converged = False
    it = 0
    for it in range(1, outer_iters + 1):
        y_adj = y - sqn * theta

        def sv(b, y_adj=y_adj):
            r = y_adj - X @ b
            return float(np.vdot(r, r)) / (2.0 * n)

        def svg(b, y_adj=y_adj):
            r = y_adj - X @ b
            return float(np.vdot(r, r)) / (2.0 * n), -(X.T @ r) / n

        beta, _, _, _, _ = _minimize(beta, svg, sv, pen, prox, inner_cfg, t0)
        r = y - X @ beta
        theta = soft_threshold(r, scale) / sqn
        resid = r - sqn * theta
        new_obj = (
            float(np.vdot(resid, resid)) / (2.0 * n)
            + tp.lambda_star * float(np.abs(beta).sum())
            + tp.lambda_o * float(np.abs(theta).sum())
        )
        if np.isfinite(obj) and abs(obj - new_obj) <= outer_tol * max(1.0, abs(obj)):
            obj = new_obj
            converged = True
            break
        obj = new_obj
    return JointResult(beta, theta, obj, it, converged)


def directional_curvature(
    X: np.ndarray, xi: np.ndarray, delta: np.ndarray, lambda_o: float
) -> float:
    """Empirical curvature of the Huber data term along a parameter offset.

    Computes lambda_o^2 sum_i (h(u_i) - h(u_i - v_i)) v_i with
    u_i = xi_i / (lambda_o sqrt n) and v_i = <x_i, delta> / (lambda_o sqrt n).
    Convexity makes every summand nonnegative; on clean designs the total
    concentrates near the quadratic form |X delta|^2 / n.
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    scale = lambda_o * np.sqrt(n)
    u = np.asarray(xi, dtype=float) / scale
    v = (X @ np.asarray(delta, dtype=float)) / scale
    h = lambda t: np.clip(t, -1.0, 1.0)
    return float(lambda_o**2 * np.sum((h(u) - h(u - v)) * v))
