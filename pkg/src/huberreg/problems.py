"""Problem containers for robust penalized regression.

Three observation models share one container family:

* vector regression, ``y_i = <x_i, beta*> + xi_i + sqrt(n) * theta*_i``,
* trace regression with dense matrix covariates,
  ``y_i = <X_i, B*> + xi_i + sqrt(n) * theta*_i``,
* matrix completion, where each covariate is a signed one-hot mask
  ``X_i = d_mc * eps_i * E_{k_i, l_i}`` with ``d_mc = sqrt(d1 * d2)``.

``theta*`` is the adversarial contamination vector, stored before the
``sqrt(n)`` normalization (the factor is applied when responses are built).
Containers are immutable after validation: arrays are copied in and their
write flags cleared, so instances are safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

# Dense matrix covariates are kept only at desk scale; masks are the
# canonical encoding for completion problems.
MAX_DENSE_CELLS = 10**6


class ProblemValidationError(ValueError):
    """A problem container violates one of its type invariants."""


class DimensionMismatchError(ProblemValidationError):
    """Shapes disagree; the message names both offending shapes."""


class InfeasibleError(ValueError):
    """A point violates an explicit feasibility constraint."""


class InternalInvariantError(RuntimeError):
    """Postcondition the library promises was observed to fail.

    Raised on checks that hold by construction (monotone objective
    traces, feasible solver output); seeing one means a bug, not bad
    user input, hence the RuntimeError base.
    """


def _as_locked_float(a, name: str) -> np.ndarray:
    arr = np.array(a, dtype=float, copy=True)
    if not np.all(np.isfinite(arr)):
        raise ProblemValidationError(f"{name} contains non-finite entries")
    arr.flags.writeable = False
    return arr


def _as_locked_int(a, name: str) -> np.ndarray:
    arr = np.array(a, dtype=np.int64, copy=True)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class TuningParams:
    """Penalty levels for the Huber-loss objectives.

    ``lambda_o`` scales the loss (the Huber transition sits at residual
    magnitude ``lambda_o * sqrt(n)``), ``lambda_star`` multiplies the
    structure penalty (l1 norm or nuclear norm), and ``inf_ball_radius``
    is the entrywise box constraint used by matrix completion.
    """

    lambda_o: float
    lambda_star: float
    inf_ball_radius: Optional[float] = None

    def __post_init__(self):
        if not (np.isfinite(self.lambda_o) and self.lambda_o > 0):
            raise ProblemValidationError(f"lambda_o must be positive, got {self.lambda_o}")
        if not (np.isfinite(self.lambda_star) and self.lambda_star > 0):
            raise ProblemValidationError(f"lambda_star must be positive, got {self.lambda_star}")
        if self.inf_ball_radius is not None and not (
            np.isfinite(self.inf_ball_radius) and self.inf_ball_radius > 0
        ):
            raise ProblemValidationError(
                f"inf_ball_radius must be positive when given, got {self.inf_ball_radius}"
            )


@dataclass(frozen=True)
class SolverResult:
    """Output of an iterative solve.

    ``objective_trace`` holds the objective at the initial point and after
    every accepted step; solvers guarantee it is non-increasing up to 1e-12
    per step. ``converged`` is True iff the relative objective change fell
    below the configured tolerance before the iteration cap.
    """

    estimate: np.ndarray
    objective_trace: np.ndarray
    iterations: int
    converged: bool
    final_step_size: float


@dataclass(frozen=True)
class MaskCovariates:
    """Signed one-hot design for matrix completion.

    Sample i observes cell ``(rows[i], cols[i])`` with sign ``signs[i]``;
    the implied covariate matrix is ``d_mc * signs[i] * E_{rows[i], cols[i]}``.
    """

    rows: np.ndarray
    cols: np.ndarray
    signs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rows", _as_locked_int(self.rows, "rows"))
        object.__setattr__(self, "cols", _as_locked_int(self.cols, "cols"))
        object.__setattr__(self, "signs", _as_locked_int(self.signs, "signs"))
        if not (self.rows.shape == self.cols.shape == self.signs.shape) or self.rows.ndim != 1:
            raise DimensionMismatchError(
                f"mask arrays must be equal-length vectors, got rows {self.rows.shape}, "
                f"cols {self.cols.shape}, signs {self.signs.shape}"
            )
        if not np.all(np.abs(self.signs) == 1):
            raise ProblemValidationError("mask signs must be +1 or -1")

    def __len__(self) -> int:
        return self.rows.shape[0]

    def densify(self, d1: int, d2: int) -> np.ndarray:
        """Materialize the n covariate matrices as an (n, d1, d2) array."""
        d_mc = float(np.sqrt(d1 * d2))
        out = np.zeros((len(self), d1, d2))
        out[np.arange(len(self)), self.rows, self.cols] = d_mc * self.signs
        return out


def _check_contamination(n: int, theta_true, outlier_index_set):
    """Validate and normalize the (theta_true, outlier_index_set) pair."""
    if theta_true is not None:
        theta_true = _as_locked_float(theta_true, "theta_true")
        if theta_true.shape != (n,):
            raise DimensionMismatchError(
                f"theta_true has shape {theta_true.shape}, expected ({n},)"
            )
        support = frozenset(np.flatnonzero(theta_true).tolist())
        if outlier_index_set is None:
            outlier_index_set = support
        else:
            outlier_index_set = frozenset(int(i) for i in outlier_index_set)
            if outlier_index_set != support:
                raise ProblemValidationError(
                    f"outlier_index_set {sorted(outlier_index_set)} does not match "
                    f"support of theta_true {sorted(support)}"
                )
    elif outlier_index_set is not None:
        outlier_index_set = frozenset(int(i) for i in outlier_index_set)
        if outlier_index_set and (min(outlier_index_set) < 0 or max(outlier_index_set) >= n):
            raise ProblemValidationError("outlier_index_set contains out-of-range indices")
    return theta_true, outlier_index_set


@dataclass(frozen=True)
class RegressionProblem:
    """Vector regression data: responses y (n,), covariates X (n, d)."""

    y: np.ndarray
    X: np.ndarray
    beta_true: Optional[np.ndarray] = None
    theta_true: Optional[np.ndarray] = None
    outlier_index_set: Optional[frozenset] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "y", _as_locked_float(self.y, "y"))
        object.__setattr__(self, "X", _as_locked_float(self.X, "X"))
        if self.y.ndim != 1 or self.X.ndim != 2:
            raise DimensionMismatchError(
                f"y must be 1-d and X 2-d, got y {self.y.shape}, X {self.X.shape}"
            )
        if self.y.shape[0] != self.X.shape[0]:
            raise DimensionMismatchError(
                f"y has {self.y.shape[0]} rows but X has {self.X.shape[0]}"
            )
        if self.beta_true is not None:
            bt = _as_locked_float(self.beta_true, "beta_true")
            if bt.shape != (self.X.shape[1],):
                raise DimensionMismatchError(
                    f"beta_true has shape {bt.shape}, expected ({self.X.shape[1]},)"
                )
            object.__setattr__(self, "beta_true", bt)
        theta, outliers = _check_contamination(self.n, self.theta_true, self.outlier_index_set)
        object.__setattr__(self, "theta_true", theta)
        object.__setattr__(self, "outlier_index_set", outliers)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class TraceProblem:
    """Trace regression data.

    ``covariates`` is either an (n, d1, d2) dense array or MaskCovariates.
    """

    y: np.ndarray
    covariates: object
    dims: tuple
    B_true: Optional[np.ndarray] = None
    theta_true: Optional[np.ndarray] = None
    outlier_index_set: Optional[frozenset] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "y", _as_locked_float(self.y, "y"))
        d1, d2 = (int(self.dims[0]), int(self.dims[1]))
        object.__setattr__(self, "dims", (d1, d2))
        if d1 < 1 or d2 < 1:
            raise ProblemValidationError(f"dims must be positive, got {self.dims}")
        if self.y.ndim != 1:
            raise DimensionMismatchError(f"y must be 1-d, got shape {self.y.shape}")
        n = self.y.shape[0]
        cov = self.covariates
        if isinstance(cov, MaskCovariates):
            if len(cov) != n:
                raise DimensionMismatchError(
                    f"y has {n} entries but mask covariates have {len(cov)}"
                )
            if cov.rows.size and (cov.rows.min() < 0 or cov.rows.max() >= d1):
                raise ProblemValidationError("mask row indices out of range")
            if cov.cols.size and (cov.cols.min() < 0 or cov.cols.max() >= d2):
                raise ProblemValidationError("mask column indices out of range")
        else:
            if d1 * d2 > MAX_DENSE_CELLS:
                raise ProblemValidationError(
                    f"dense covariates capped at {MAX_DENSE_CELLS} cells, got {d1 * d2}"
                )
            cov = _as_locked_float(cov, "covariates")
            if cov.shape != (n, d1, d2):
                raise DimensionMismatchError(
                    f"covariates have shape {cov.shape}, expected ({n}, {d1}, {d2})"
                )
            object.__setattr__(self, "covariates", cov)
        if self.B_true is not None:
            bt = _as_locked_float(self.B_true, "B_true")
            if bt.shape != (d1, d2):
                raise DimensionMismatchError(
                    f"B_true has shape {bt.shape}, expected ({d1}, {d2})"
                )
            object.__setattr__(self, "B_true", bt)
        theta, outliers = _check_contamination(n, self.theta_true, self.outlier_index_set)
        object.__setattr__(self, "theta_true", theta)
        object.__setattr__(self, "outlier_index_set", outliers)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def d_mc(self) -> float:
        return float(np.sqrt(self.dims[0] * self.dims[1]))

    @property
    def is_mask(self) -> bool:
        return isinstance(self.covariates, MaskCovariates)


def trace_inner(Xi, B: np.ndarray) -> float:
    """Trace inner product <Xi, B> = tr(Xi^T B).

    ``Xi`` is either a (d1, d2) matrix or a mask triple ``(k, l, sign)``;
    for a triple the value is ``d_mc * sign * B[k, l]`` with
    ``d_mc = sqrt(d1 * d2)`` taken from B's shape. No 1/n normalization.
    """
    B = np.asarray(B, dtype=float)
    if B.ndim != 2:
        raise DimensionMismatchError(f"B must be 2-d, got shape {B.shape}")
    if isinstance(Xi, tuple):
        k, l, sign = Xi
        if sign not in (-1, 1):
            raise ProblemValidationError(f"mask sign must be +1 or -1, got {sign}")
        d1, d2 = B.shape
        if not (0 <= k < d1 and 0 <= l < d2):
            raise ProblemValidationError(
                f"mask cell ({k}, {l}) out of range for shape {B.shape}"
            )
        d_mc = float(np.sqrt(d1 * d2))
        return float(d_mc * sign * B[k, l])
    Xi = np.asarray(Xi, dtype=float)
    if Xi.shape != B.shape:
        raise DimensionMismatchError(
            f"covariate shape {Xi.shape} does not match B shape {B.shape}"
        )
    return float(np.vdot(Xi, B))


def design_apply(problem: TraceProblem, B: np.ndarray) -> np.ndarray:
    """All n inner products <X_i, B> at once."""
    if problem.is_mask:
        m = problem.covariates
        return problem.d_mc * m.signs * B[m.rows, m.cols]
    return np.tensordot(problem.covariates, B, axes=([1, 2], [0, 1]))


def design_adjoint(problem: TraceProblem, w: np.ndarray) -> np.ndarray:
    """Adjoint of design_apply: sum_i w_i X_i as a (d1, d2) matrix."""
    d1, d2 = problem.dims
    if problem.is_mask:
        m = problem.covariates
        flat = np.bincount(
            m.rows * d2 + m.cols, weights=problem.d_mc * m.signs * w, minlength=d1 * d2
        )
        return flat.reshape(d1, d2)
    return np.tensordot(w, problem.covariates, axes=(0, 0))


def validate_problem(problem):
    """Re-run all container invariants; returns the problem unchanged.

    Dataclass construction already validates, so this is mainly useful after
    deserialization or for problems assembled field-by-field elsewhere.
    """
    if isinstance(problem, RegressionProblem):
        RegressionProblem(
            problem.y, problem.X, problem.beta_true, problem.theta_true,
            problem.outlier_index_set, problem.meta,
        )
        return problem
    if isinstance(problem, TraceProblem):
        TraceProblem(
            problem.y, problem.covariates, problem.dims, problem.B_true,
            problem.theta_true, problem.outlier_index_set, problem.meta,
        )
        return problem
    raise ProblemValidationError(f"unsupported problem type {type(problem).__name__}")
