import numpy as np
import pytest

from huberreg import (
    DimensionMismatchError,
    MaskCovariates,
    ProblemValidationError,
    RegressionProblem,
    TraceProblem,
    TuningParams,
    design_adjoint,
    design_apply,
    read_meta,
    read_problem_bundle,
    trace_inner,
    validate_problem,
    write_problem_bundle,
)


def make_regression(n=20, d=6, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d))
    y = rng.standard_normal(n)
    return RegressionProblem(y=y, X=X)


def make_mask_problem(n=30, d1=4, d2=4, seed=1, theta=None):
    rng = np.random.default_rng(seed)
    cov = MaskCovariates(
        rows=rng.integers(0, d1, n),
        cols=rng.integers(0, d2, n),
        signs=rng.choice([-1, 1], n),
    )
    y = rng.standard_normal(n)
    return TraceProblem(y=y, covariates=cov, dims=(d1, d2), theta_true=theta)


# ---------------------------------------------------------------- trace_inner


def test_trace_inner_mask_hand_value():
    # d_mc = sqrt(4*4) = 4, so <X, B> = 4 * sign * B[k, l] = 4 * (-1) * 0.5
    B = np.zeros((4, 4))
    B[0, 1] = 0.5
    assert trace_inner((0, 1, -1), B) == -2.0


def test_trace_inner_mask_scales_with_dims():
    B = np.zeros((9, 4))
    B[2, 3] = 1.0
    assert trace_inner((2, 3, 1), B) == pytest.approx(6.0)  # sqrt(36)


def test_trace_inner_dense_is_frobenius_pairing():
    rng = np.random.default_rng(2)
    X = rng.standard_normal((5, 7))
    B = rng.standard_normal((5, 7))
    assert trace_inner(X, B) == pytest.approx(float(np.sum(X * B)), rel=1e-14)


def test_trace_inner_bilinear():
    rng = np.random.default_rng(3)
    B1 = rng.standard_normal((4, 4))
    B2 = rng.standard_normal((4, 4))
    a, b = 0.7, -2.3
    for Xi in [(1, 2, -1), rng.standard_normal((4, 4))]:
        lhs = trace_inner(Xi, a * B1 + b * B2)
        rhs = a * trace_inner(Xi, B1) + b * trace_inner(Xi, B2)
        assert lhs == pytest.approx(rhs, rel=1e-12)


def test_mask_densify_matches_one_hot():
    cov = MaskCovariates(rows=[1], cols=[2], signs=[-1])
    dense = cov.densify(3, 4)
    expected = np.zeros((3, 4))
    expected[1, 2] = -np.sqrt(12.0)
    np.testing.assert_allclose(dense[0], expected, atol=1e-15)


def test_mask_densify_agrees_with_trace_inner():
    problem = make_mask_problem(n=12, seed=5)
    rng = np.random.default_rng(6)
    B = rng.standard_normal((4, 4))
    dense = problem.covariates.densify(4, 4)
    for i in range(12):
        ki = problem.covariates.rows[i]
        li = problem.covariates.cols[i]
        si = problem.covariates.signs[i]
        assert trace_inner((ki, li, si), B) == pytest.approx(
            float(np.sum(dense[i] * B)), rel=1e-12
        )


# --------------------------------------------------------- apply and adjoint


def test_design_apply_mask_equals_row_by_row():
    problem = make_mask_problem(n=25, seed=7)
    rng = np.random.default_rng(8)
    B = rng.standard_normal((4, 4))
    out = design_apply(problem, B)
    cov = problem.covariates
    manual = np.array(
        [trace_inner((cov.rows[i], cov.cols[i], cov.signs[i]), B) for i in range(25)]
    )
    np.testing.assert_allclose(out, manual, rtol=1e-13)


def test_design_adjoint_is_true_adjoint():
    rng = np.random.default_rng(9)
    for problem in [
        make_mask_problem(n=40, seed=10),
        TraceProblem(
            y=rng.standard_normal(15),
            covariates=rng.standard_normal((15, 3, 5)),
            dims=(3, 5),
        ),
    ]:
        B = rng.standard_normal(problem.dims)
        w = rng.standard_normal(problem.n)
        lhs = float(np.dot(design_apply(problem, B), w))
        rhs = float(np.sum(design_adjoint(problem, w) * B))
        assert lhs == pytest.approx(rhs, rel=1e-12)


def test_design_adjoint_mask_accumulates_duplicates():
    # two hits on the same cell must add, not overwrite
    cov = MaskCovariates(rows=[0, 0], cols=[1, 1], signs=[1, 1])
    problem = TraceProblem(y=np.zeros(2), covariates=cov, dims=(2, 2))
    out = design_adjoint(problem, np.array([1.0, 1.0]))
    assert out[0, 1] == pytest.approx(2 * 2.0)  # d_mc = 2, two unit weights
    assert out[0, 0] == 0.0


# ------------------------------------------------------------------ validation


def test_tuning_params_reject_nonpositive():
    with pytest.raises(ProblemValidationError):
        TuningParams(0.0, 1.0)
    with pytest.raises(ProblemValidationError):
        TuningParams(1.0, -2.0)
    with pytest.raises(ProblemValidationError):
        TuningParams(1.0, 1.0, inf_ball_radius=0.0)
    tp = TuningParams(1.0, 1.0, inf_ball_radius=0.5)
    assert tp.inf_ball_radius == 0.5


def test_regression_problem_shape_mismatch():
    with pytest.raises(DimensionMismatchError):
        RegressionProblem(y=np.zeros(5), X=np.zeros((4, 3)))
    with pytest.raises(DimensionMismatchError):
        RegressionProblem(y=np.zeros(4), X=np.zeros((4, 3)), beta_true=np.zeros(2))


def test_regression_problem_rejects_nonfinite():
    y = np.zeros(4)
    y_bad = y.copy()
    y_bad[0] = np.nan
    with pytest.raises(ProblemValidationError):
        RegressionProblem(y=y_bad, X=np.zeros((4, 2)))


def test_outlier_set_derived_from_theta():
    theta = np.zeros(10)
    theta[[2, 7]] = 1.5
    p = RegressionProblem(y=np.zeros(10), X=np.ones((10, 1)), theta_true=theta)
    assert p.outlier_index_set == frozenset({2, 7})


def test_outlier_set_mismatch_rejected():
    theta = np.zeros(10)
    theta[3] = 1.0
    with pytest.raises(ProblemValidationError):
        RegressionProblem(
            y=np.zeros(10), X=np.ones((10, 1)),
            theta_true=theta, outlier_index_set={4},
        )


def test_mask_signs_validated():
    with pytest.raises(ProblemValidationError):
        MaskCovariates(rows=[0], cols=[0], signs=[2])


def test_mask_indices_range_checked():
    cov = MaskCovariates(rows=[5], cols=[0], signs=[1])
    with pytest.raises(ProblemValidationError):
        TraceProblem(y=np.zeros(1), covariates=cov, dims=(4, 4))


def test_dense_covariates_capped():
    big = np.zeros((1, 1001, 1001))
    with pytest.raises(ProblemValidationError):
        TraceProblem(y=np.zeros(1), covariates=big, dims=(1001, 1001))


def test_arrays_are_immutable():
    p = make_regression()
    with pytest.raises(ValueError):
        p.y[0] = 1.0
    with pytest.raises(ValueError):
        p.X[0, 0] = 1.0
    pm = make_mask_problem()
    with pytest.raises(ValueError):
        pm.covariates.rows[0] = 0


def test_validate_problem_passes_and_fails():
    validate_problem(make_regression())
    validate_problem(make_mask_problem())
    with pytest.raises(ProblemValidationError):
        validate_problem("not a problem")


# --------------------------------------------------------------- bundle I/O


def test_bundle_roundtrip_lasso(tmp_path):
    rng = np.random.default_rng(12)
    beta = np.array([1.0, 0.0, -0.5])
    theta = np.zeros(8)
    theta[1] = 2.0
    p = RegressionProblem(
        y=rng.standard_normal(8),
        X=rng.standard_normal((8, 3)),
        beta_true=beta,
        theta_true=theta,
        meta={"seed": 12, "sigma": 0.25},
    )
    out = tmp_path / "b"
    write_problem_bundle(p, str(out))
    q = read_problem_bundle(str(out))
    np.testing.assert_array_equal(q.y, p.y)
    np.testing.assert_array_equal(q.X, p.X)
    np.testing.assert_array_equal(q.beta_true, beta)
    np.testing.assert_array_equal(q.theta_true, theta)
    assert q.outlier_index_set == frozenset({1})
    assert q.meta["sigma"] == 0.25
    assert q.meta["kind"] == "lasso"


def test_bundle_roundtrip_mask(tmp_path):
    p = make_mask_problem(n=20, seed=13)
    out = tmp_path / "b"
    write_problem_bundle(p, str(out))
    q = read_problem_bundle(str(out))
    assert q.is_mask
    np.testing.assert_array_equal(q.covariates.rows, p.covariates.rows)
    np.testing.assert_array_equal(q.covariates.cols, p.covariates.cols)
    np.testing.assert_array_equal(q.covariates.signs, p.covariates.signs)
    np.testing.assert_array_equal(q.y, p.y)
    assert (out / "masks.csv").read_text().splitlines()[0] == "i,k,l,sign"


def test_bundle_roundtrip_dense_trace(tmp_path):
    rng = np.random.default_rng(14)
    p = TraceProblem(
        y=rng.standard_normal(6),
        covariates=rng.standard_normal((6, 3, 4)),
        dims=(3, 4),
        B_true=rng.standard_normal((3, 4)),
    )
    out = tmp_path / "b"
    write_problem_bundle(p, str(out))
    q = read_problem_bundle(str(out))
    assert not q.is_mask
    np.testing.assert_array_equal(q.covariates, p.covariates)
    np.testing.assert_array_equal(q.B_true, p.B_true)
    assert read_meta(str(out))["kind"] == "trace_dense"


def test_bundle_bytes_deterministic(tmp_path):
    p = make_regression(seed=15)
    a, b = tmp_path / "a", tmp_path / "b"
    write_problem_bundle(p, str(a))
    write_problem_bundle(p, str(b))
    for name in ["y.csv", "X.csv", "meta.txt"]:
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_bundle_missing_dir_raises(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_problem_bundle(str(tmp_path / "nope"))
