"""Problem bundles: a directory of plain CSV/text files for one dataset.

Layout (fixed names, LF newlines, 17-significant-digit floats, so the
same problem always serializes to the same bytes):

    y.csv          one response per line
    X.csv          vector problems: n rows x d columns
                   dense trace problems: n rows, each X_i flattened row-major
    masks.csv      mask problems instead of X.csv; header i,k,l,sign
    meta.txt       "key = value" lines (kind, n, d or d1/d2, o, seed, ...)
    beta_true.csv / B_true.csv / theta_true.csv   optional ground truth
"""

from __future__ import annotations

import os

import numpy as np

from .problems import (
    MaskCovariates,
    ProblemValidationError,
    RegressionProblem,
    TraceProblem,
)

_F = ".17g"


def _fmt_val(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), _F)
    return str(v)


def _write_vector(path: str, v: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for x in np.asarray(v, dtype=float):
            fh.write(format(x, _F) + "\n")


def _write_matrix(path: str, M: np.ndarray, header: str = "") -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if header:
            fh.write(header + "\n")
        for row in np.atleast_2d(M):
            fh.write(",".join(format(float(x), _F) for x in row) + "\n")


def _read_matrix(path: str, skip_header: bool = False) -> np.ndarray:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for i, ln in enumerate(fh):
            if skip_header and i == 0:
                continue
            ln = ln.strip()
            if ln:
                rows.append([float(tok) for tok in ln.split(",")])
    return np.array(rows, dtype=float)


def _parse_meta_value(raw: str):
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        return raw


def write_problem_bundle(problem, out_dir: str) -> None:
    """Serialize a regression or trace problem into ``out_dir``."""
    os.makedirs(out_dir, exist_ok=True)
    meta = {}
    if isinstance(problem, RegressionProblem):
        meta["kind"] = "lasso"
        meta["n"], meta["d"] = problem.n, problem.d
        _write_matrix(os.path.join(out_dir, "X.csv"), problem.X)
        if problem.beta_true is not None:
            _write_vector(os.path.join(out_dir, "beta_true.csv"), problem.beta_true)
    elif isinstance(problem, TraceProblem):
        d1, d2 = problem.dims
        meta["n"], meta["d1"], meta["d2"] = problem.n, d1, d2
        if problem.is_mask:
            meta["kind"] = "completion"
            cov = problem.covariates
            with open(os.path.join(out_dir, "masks.csv"), "w",
                      encoding="utf-8", newline="\n") as fh:
                fh.write("i,k,l,sign\n")
                for i in range(len(cov)):
                    fh.write(f"{i},{cov.rows[i]},{cov.cols[i]},{cov.signs[i]}\n")
        else:
            meta["kind"] = "trace_dense"
            flat = np.asarray(problem.covariates, dtype=float).reshape(problem.n, d1 * d2)
            _write_matrix(os.path.join(out_dir, "X.csv"), flat)
        if problem.B_true is not None:
            _write_matrix(os.path.join(out_dir, "B_true.csv"), problem.B_true)
    else:
        raise ProblemValidationError(f"cannot bundle object of type {type(problem)!r}")

    _write_vector(os.path.join(out_dir, "y.csv"), problem.y)
    if problem.theta_true is not None:
        _write_vector(os.path.join(out_dir, "theta_true.csv"), problem.theta_true)

    meta["o"] = (
        len(problem.outlier_index_set) if problem.outlier_index_set is not None else 0
    )
    meta["seed"] = problem.meta.get("seed", 0)
    for key in sorted(problem.meta):
        if key not in meta:
            meta[key] = problem.meta[key]
    with open(os.path.join(out_dir, "meta.txt"), "w",
              encoding="utf-8", newline="\n") as fh:
        for key, val in meta.items():
            fh.write(f"{key} = {_fmt_val(val)}\n")


def read_meta(bundle_dir: str) -> dict:
    path = os.path.join(bundle_dir, "meta.txt")
    meta = {}
    with open(path, "r", encoding="utf-8") as fh:
        for ln in fh:
            ln = ln.strip()
            if not ln or "=" not in ln:
                continue
            key, _, raw = ln.partition("=")
            meta[key.strip()] = _parse_meta_value(raw.strip())
    return meta


def read_problem_bundle(bundle_dir: str):
    """Inverse of write_problem_bundle; validates on construction."""
    if not os.path.isdir(bundle_dir):
        raise FileNotFoundError(f"bundle directory not found: {bundle_dir}")
    meta = read_meta(bundle_dir)
    kind = meta.get("kind")
    if kind not in ("lasso", "trace_dense", "completion"):
        raise ProblemValidationError(f"meta.txt has unknown kind {meta.get('kind')!r}")

    y = _read_matrix(os.path.join(bundle_dir, "y.csv")).ravel()
    theta_path = os.path.join(bundle_dir, "theta_true.csv")
    theta = _read_matrix(theta_path).ravel() if os.path.exists(theta_path) else None

    if kind == "lasso":
        X = _read_matrix(os.path.join(bundle_dir, "X.csv"))
        bt_path = os.path.join(bundle_dir, "beta_true.csv")
        beta = _read_matrix(bt_path).ravel() if os.path.exists(bt_path) else None
        return RegressionProblem(y=y, X=X, beta_true=beta, theta_true=theta, meta=meta)

    d1, d2 = int(meta["d1"]), int(meta["d2"])
    Bt_path = os.path.join(bundle_dir, "B_true.csv")
    B_true = _read_matrix(Bt_path) if os.path.exists(Bt_path) else None
    if kind == "completion":
        raw = _read_matrix(os.path.join(bundle_dir, "masks.csv"), skip_header=True)
        if raw.size == 0:
            raise ProblemValidationError("masks.csv holds no rows")
        order = np.argsort(raw[:, 0], kind="stable")
        raw = raw[order]
        cov = MaskCovariates(
            rows=raw[:, 1].astype(int),
            cols=raw[:, 2].astype(int),
            signs=raw[:, 3].astype(int),
        )
    else:
        flat = _read_matrix(os.path.join(bundle_dir, "X.csv"))
        if flat.shape[1] != d1 * d2:
            raise ProblemValidationError(
                f"X.csv has {flat.shape[1]} columns, expected d1*d2 = {d1 * d2}"
            )
        cov = flat.reshape(len(flat), d1, d2)
    return TraceProblem(
        y=y, covariates=cov, dims=(d1, d2), B_true=B_true, theta_true=theta, meta=meta
    )
