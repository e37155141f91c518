import math

import numpy as np
import pytest

from langxfer.regression import (
    Dataset,
    DegenerateSplitError,
    IncompleteFeaturesError,
    RegressionModel,
    Scaler,
    TransferObservation,
    UndefinedCorrelationError,
    correlation_report,
    fit_model,
    lambda_max,
    lasso_fit,
    load_model,
    lolo_cv,
    minmax_scale,
    pearson,
    pearson_pvalue,
    read_observations,
    rfe,
    rmse,
    save_model,
    write_correlation_report,
    write_observations,
    zero_shot_dataset,
)
from langxfer.similarity import PairFeatureVector

from synthdata import make_benchmark


def make_dataset(X, y, n=None, targets=None, sources=None, s_scores=None, names=None):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    m, d = X.shape
    return Dataset(
        task="qa",
        feature_names=tuple(names or (f"f{j}" for j in range(d))),
        X=X,
        y=y,
        n_shots=np.asarray(n if n is not None else np.zeros(m), dtype=int),
        sources=tuple(sources or (f"s{i}" for i in range(m))),
        targets=tuple(targets or (f"t{i}" for i in range(m))),
        source_scores=np.asarray(
            s_scores if s_scores is not None else np.zeros(m), dtype=float
        ),
    )


def kkt_violation(X, y, lam, intercept, beta):
    # at the optimum the residual is mean-free, so raw columns suffice
    m = X.shape[0]
    residual = y - intercept - X @ beta
    c = X.T @ residual / m
    worst = 0.0
    for j in range(X.shape[1]):
        if beta[j] != 0.0:
            worst = max(worst, abs(c[j] - lam * np.sign(beta[j])))
        else:
            worst = max(worst, abs(c[j]) - lam)
    return worst


# ---------------------------------------------------------------------------
# scaling


def test_minmax_endpoints_and_midpoint():
    dataset = make_dataset([[2.0], [4.0], [6.0]], [0.0, 0.0, 0.0])
    scaled, scaler = minmax_scale(dataset)
    np.testing.assert_allclose(scaled.X[:, 0], [0.0, 0.5, 1.0])
    assert scaler.mins["f0"] == 2.0 and scaler.maxs["f0"] == 6.0


def test_minmax_constant_column():
    dataset = make_dataset([[5.0], [5.0]], [0.0, 0.0])
    scaled, scaler = minmax_scale(dataset)
    np.testing.assert_allclose(scaled.X[:, 0], [0.0, 0.0])
    assert scaler.transform_value("f0", 123.0) == 0.0


def test_scaler_reuse_on_new_value():
    scaler = Scaler(mins={"f": 2.0}, maxs={"f": 6.0})
    assert scaler.transform_value("f", 4.0) == 0.5
    assert scaler.transform_value("f", 8.0) == 1.5  # extrapolates


# ---------------------------------------------------------------------------
# pearson


def test_pearson_perfect_linear():
    assert pearson([1, 2, 3], [2, 4, 6]) == 1.0


def test_pearson_perfect_inverse():
    assert pearson([1, 2, 3], [6, 4, 2]) == -1.0


def test_pearson_hand_computed():
    assert pearson([1, 2, 3], [1, 3, 2]) == pytest.approx(0.5)


def test_pearson_constant_vector():
    with pytest.raises(UndefinedCorrelationError):
        pearson([1, 1, 1], [1, 2, 3])


def test_pearson_needs_three_points():
    with pytest.raises(ValueError):
        pearson([1, 2], [3, 4])


def pearson_two_pass(x, y):
    n = len(x)
    mx = math.fsum(x) / n
    my = math.fsum(y) / n
    cov = math.fsum((a - mx) * (b - my) for a, b in zip(x, y))
    vx = math.fsum((a - mx) ** 2 for a in x)
    vy = math.fsum((b - my) ** 2 for b in y)
    return cov / math.sqrt(vx * vy)


def test_pearson_matches_two_pass_oracle():
    rng = np.random.default_rng(13)
    for _ in range(1000):
        n = int(rng.integers(3, 200))
        x = rng.normal(size=n)
        y = rng.normal(size=n) + rng.uniform(-1, 1) * x
        assert abs(pearson(x, y) - pearson_two_pass(list(x), list(y))) <= 1e-12


def test_pearson_symmetry_and_affine_invariance():
    rng = np.random.default_rng(17)
    for _ in range(200):
        x = rng.normal(size=20)
        y = rng.normal(size=20)
        r = pearson(x, y)
        assert pearson(y, x) == pytest.approx(r, abs=1e-14)
        a, b = rng.uniform(0.1, 5), rng.uniform(-10, 10)
        assert pearson(a * x + b, y) == pytest.approx(r, abs=1e-12)


def test_pvalue_null_statistic():
    assert pearson_pvalue(0.0, 25) == 1.0


def test_pvalue_degenerate_bound():
    assert pearson_pvalue(1.0, 10) == 0.0
    assert pearson_pvalue(-1.0, 10) == 0.0


def test_pvalue_t_table_boundary():
    # t = 2.102 against the 2.101 critical value at 18 dof
    assert pearson_pvalue(0.444, 20) == pytest.approx(0.050, abs=0.002)


def test_pvalue_validates():
    with pytest.raises(ValueError):
        pearson_pvalue(0.5, 2)
    with pytest.raises(ValueError):
        pearson_pvalue(1.5, 10)


# ---------------------------------------------------------------------------
# correlation report


def test_report_feature_equal_to_gap():
    rng = np.random.default_rng(3)
    gap = rng.normal(size=12)
    s_src = rng.uniform(50, 70, size=12)
    X = np.column_stack([gap, rng.normal(size=12)])
    dataset = make_dataset(X, gap + s_src, s_scores=s_src, names=("mirror", "noise"))
    with pytest.warns(UserWarning):  # all rows are n=0, so n-transforms are constant
        rows = correlation_report(dataset)
    mirror = next(r for r in rows if r.predictor == "mirror")
    assert mirror.r == pytest.approx(1.0)
    assert mirror.significant


def test_report_log_transform_wins_on_log_data():
    n = np.array([0, 0, 0, 0, 10, 30, 50, 100, 250, 500, 750, 1000])
    rng = np.random.default_rng(19)
    y = 40.0 + 5.0 * np.log(n + 1.0)
    X = rng.uniform(size=(n.size, 1))
    dataset = make_dataset(X, y, n=n, s_scores=np.full(n.size, 50.0))
    with pytest.warns(UserWarning):  # zero-shot gap is constant on this fixture
        rows = {r.predictor: r for r in correlation_report(dataset)}
    assert rows["log(n+1)"].r == pytest.approx(1.0)
    assert rows["log(n+1)"].r > rows["n"].r


def test_report_constant_feature_warns_and_omits():
    X = np.column_stack([np.ones(10), np.linspace(0, 1, 10)])
    y = np.linspace(10, 20, 10)
    dataset = make_dataset(X, y, s_scores=np.zeros(10), names=("const", "ok"))
    with pytest.warns(UserWarning, match="const"):
        rows = correlation_report(dataset)
    assert all(r.predictor != "const" for r in rows)
    assert any(r.predictor == "ok" for r in rows)


def test_report_csv_percentage_display(tmp_path):
    rng = np.random.default_rng(4)
    n = np.array([0] * 10 + [10, 30, 50, 100])
    mirror = rng.normal(size=n.size)
    y = np.where(n == 0, mirror + 50.0, 60.0 + 2.0 * np.log(n + 1.0))
    dataset = make_dataset(
        mirror.reshape(-1, 1), y, n=n, s_scores=np.full(n.size, 50.0), names=("m",)
    )
    path = tmp_path / "report.csv"
    write_correlation_report(correlation_report(dataset), path)
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "task,block,predictor,r,p_value,significant,display"
    assert any(line.endswith("100.0*") for line in lines[1:])


# ---------------------------------------------------------------------------
# lasso


def test_lasso_univariate_ols():
    intercept, beta = lasso_fit(
        np.array([[-1.0], [0.0], [1.0]]), np.array([-2.0, 0.0, 2.0]), lam=0.0
    )
    assert intercept == 0.0
    assert beta[0] == pytest.approx(2.0, abs=1e-12)


def test_lasso_univariate_soft_threshold_exact():
    intercept, beta = lasso_fit(
        np.array([[-1.0], [0.0], [1.0]]), np.array([-2.0, 0.0, 2.0]), lam=1 / 3
    )
    assert beta[0] == 1.5
    assert intercept == 0.0


def test_lasso_full_shrinkage_at_lambda_max():
    rng = np.random.default_rng(8)
    X = rng.normal(size=(30, 4))
    y = X @ np.array([1.0, -2.0, 0.5, 0.0]) + rng.normal(size=30)
    lam_max = lambda_max(X, y)
    _, beta = lasso_fit(X, y, lam=lam_max * (1 + 1e-12))
    assert np.all(beta == 0.0)
    _, beta_below = lasso_fit(X, y, lam=lam_max * 0.99)
    assert np.any(beta_below != 0.0)


def test_lasso_matches_ols_closed_form():
    rng = np.random.default_rng(21)
    for _ in range(50):
        m = int(rng.integers(8, 50))
        d = int(rng.integers(1, 7))
        X = rng.normal(size=(m, d))
        y = X @ rng.normal(size=d) + rng.normal(size=m)
        intercept, beta = lasso_fit(X, y, lam=0.0)
        design = np.column_stack([np.ones(m), X])
        ols, *_ = np.linalg.lstsq(design, y, rcond=None)
        assert abs(intercept - ols[0]) <= 1e-6
        np.testing.assert_allclose(beta, ols[1:], atol=1e-6)


def test_lasso_kkt_conditions():
    rng = np.random.default_rng(22)
    for _ in range(50):
        m = int(rng.integers(8, 50))
        d = int(rng.integers(1, 7))
        X = rng.normal(size=(m, d))
        y = X @ rng.normal(size=d) + rng.normal(size=m)
        lam = float(rng.uniform(0.01, 0.5))
        intercept, beta = lasso_fit(X, y, lam=lam)
        assert kkt_violation(X, y, lam, intercept, beta) <= 1e-6


def test_lasso_deterministic():
    rng = np.random.default_rng(23)
    X = rng.normal(size=(40, 5))
    y = rng.normal(size=40)
    b0_a, beta_a = lasso_fit(X, y, 0.05)
    b0_b, beta_b = lasso_fit(X, y, 0.05)
    assert b0_a == b0_b
    assert np.array_equal(beta_a, beta_b)


def test_lasso_rejects_nonfinite():
    with pytest.raises(ValueError):
        lasso_fit(np.array([[1.0], [np.nan]]), np.array([1.0, 2.0]), 0.1)


# ---------------------------------------------------------------------------
# rfe


def test_rfe_drops_smallest_coefficient():
    rng = np.random.default_rng(31)
    X = rng.normal(size=(60, 3))
    y = 0.5 * X[:, 0] - 0.9 * X[:, 1] + 0.1 * X[:, 2]
    model = rfe(X, y, ("a", "b", "c"), lam=0.0, k_keep=2)
    assert model.metadata["elimination_order"] == ["c"]
    assert set(model.coefficients) == {"a", "b"}


def test_rfe_keep_all_is_plain_fit():
    rng = np.random.default_rng(32)
    X = rng.normal(size=(40, 3))
    y = rng.normal(size=40)
    model = rfe(X, y, ("a", "b", "c"), lam=0.01, k_keep=3)
    intercept, beta = lasso_fit(X, y, lam=0.01)
    assert model.metadata["elimination_order"] == []
    assert model.intercept == pytest.approx(intercept, rel=1e-12)
    np.testing.assert_allclose(
        [model.coefficients[n] for n in ("a", "b", "c")], beta, rtol=1e-12
    )


def test_rfe_recovers_known_support():
    rng = np.random.default_rng(33)
    X = rng.normal(size=(80, 6))
    y = 3.0 * X[:, 0] - 2.0 * X[:, 1]  # noise-free, support {a, b}
    names = ("a", "b", "c", "d", "e", "f")
    model = rfe(X, y, names, lam=1e-3, k_keep=2)
    assert set(model.coefficients) == {"a", "b"}
    eliminated = model.metadata["elimination_order"]
    assert sorted(eliminated) == ["c", "d", "e", "f"]
    assert len(set(eliminated)) == len(eliminated)


def test_rfe_tie_break_lexicographic():
    # zero columns carry exactly zero coefficients, so ties break by name
    x = np.linspace(-1, 1, 8)
    X = np.column_stack([x, np.zeros(8), np.zeros(8)])
    y = 2.0 * x
    model = rfe(X, y, ("x", "zb", "za"), lam=1e-3, k_keep=1)
    assert model.metadata["elimination_order"] == ["za", "zb"]
    assert set(model.coefficients) == {"x"}


def test_rfe_validates_k_keep():
    X = np.zeros((4, 2))
    y = np.zeros(4)
    with pytest.raises(ValueError):
        rfe(X, y, ("a", "b"), k_keep=0)
    with pytest.raises(ValueError):
        rfe(X, y, ("a", "b"), k_keep=3)


def test_rfe_deterministic_rerun():
    features, observations, _ = make_benchmark(3)
    dataset = zero_shot_dataset(features, observations)
    a = fit_model(dataset, lam=1e-3, k_keep=5)
    b = fit_model(dataset, lam=1e-3, k_keep=5)
    assert a.coefficients == b.coefficients
    assert a.metadata["elimination_order"] == b.metadata["elimination_order"]


# ---------------------------------------------------------------------------
# cross-validation


def test_lolo_fold_structure():
    features, observations, _ = make_benchmark(0)
    dataset = zero_shot_dataset(features, observations)
    result = lolo_cv(dataset, lam=1e-3, k_keep=5)
    assert len(result.folds) == 10
    fi = result.fold("fi")
    assert all(dataset.targets[i] == "fi" for i in fi.test_index)
    assert all(dataset.targets[i] != "fi" for i in fi.train_index)


def test_lolo_noise_free_rmse_zero():
    features, observations, _ = make_benchmark(1, noise_sigma=0.0)
    dataset = zero_shot_dataset(features, observations)
    result = lolo_cv(dataset, lam=0.0)
    assert result.mean_rmse <= 1e-6


def test_lolo_no_leakage():
    features, observations, _ = make_benchmark(2)
    dataset = zero_shot_dataset(features, observations)
    result = lolo_cv(dataset, lam=1e-3, k_keep=5)
    for fold in result.folds:
        train_targets = {dataset.targets[i] for i in fold.train_index}
        assert fold.target not in train_targets
        # scaler statistics recomputed from training rows only must match
        expected = Scaler.fit(dataset.X[list(fold.train_index)], dataset.feature_names)
        assert fold.model.scaler == expected


def test_lolo_needs_two_targets():
    dataset = make_dataset(
        [[0.0], [1.0]], [0.0, 1.0], targets=("fi", "fi"), sources=("en", "ru")
    )
    with pytest.raises(DegenerateSplitError):
        lolo_cv(dataset)


def test_coefficient_scale_invariance():
    features, observations, _ = make_benchmark(5)
    dataset = zero_shot_dataset(features, observations)
    base = fit_model(dataset, lam=1e-3, k_keep=5)
    j = dataset.feature_names.index("phono")
    X2 = dataset.X.copy()
    X2[:, j] *= 37.5
    from dataclasses import replace
    rescaled = replace(dataset, X=X2)
    refit = fit_model(rescaled, lam=1e-3, k_keep=5)
    assert set(refit.coefficients) == set(base.coefficients)
    for name, coef in base.coefficients.items():
        assert refit.coefficients[name] == pytest.approx(coef, abs=1e-9)


# ---------------------------------------------------------------------------
# rmse and files


def test_rmse_zero():
    assert rmse([1.0, 2.0], [1.0, 2.0]) == 0.0


def test_rmse_hand_value():
    assert rmse([0.0, 0.0], [3.0, 4.0]) == pytest.approx(3.5355, abs=1e-4)


def test_rmse_single_element():
    assert rmse([0.0], [5.0]) == 5.0


def test_rmse_length_mismatch():
    with pytest.raises(ValueError):
        rmse([1.0], [1.0, 2.0])


def test_observations_round_trip(tmp_path):
    observations = [
        TransferObservation("qa", "en", "fi", 0, 41.5, 70.25),
        TransferObservation("qa", "en", "fi", 100, 52.0, None),
    ]
    path = tmp_path / "obs.csv"
    write_observations(observations, path)
    loaded = read_observations(path)
    assert loaded[0].source_score == 70.25
    assert loaded[1].source_score is None
    assert loaded[0].score == 41.5
    assert loaded[1].n == 100


def test_model_file_round_trip(tmp_path):
    features, observations, _ = make_benchmark(6)
    dataset = zero_shot_dataset(features, observations)
    model = fit_model(dataset, lam=1e-3, k_keep=5)
    path = tmp_path / "model.json"
    save_model(model, path)
    loaded = load_model(path)
    assert loaded.coefficients == model.coefficients
    assert loaded.intercept == model.intercept
    assert loaded.scaler == model.scaler
    assert loaded.lam == model.lam
    assert loaded.metadata["elimination_order"] == model.metadata["elimination_order"]
    # required provenance fields present in the document
    import json
    payload = json.loads(path.read_text(encoding="utf-8"))
    for key in ("kind", "intercept", "coefficients", "scaler", "lambda", "tool_version"):
        assert key in payload
    assert "k_keep" in payload["metadata"]


def test_dataset_assembly_excludes_incomplete_rows():
    rows = [
        PairFeatureVector("qa", "en", "fi", lex=0.5, morph=0.8),
        PairFeatureVector("qa", "en", "sw", lex=0.1, morph=None),
    ]
    observations = [
        TransferObservation("qa", "en", "fi", 0, 40.0, 70.0),
        TransferObservation("qa", "en", "sw", 0, 30.0, 70.0),
        TransferObservation("qa", "en", "de", 0, 55.0, 70.0),  # no feature row
    ]
    dataset = zero_shot_dataset(rows, observations, feature_names=("lex", "morph"))
    assert len(dataset) == 1
    assert dataset.n_excluded == 2
    assert dataset.targets == ("fi",)


def test_model_raw_score_missing_feature():
    model = RegressionModel(
        task="qa",
        kind="zero_shot",
        intercept=1.0,
        coefficients={"lex": 2.0},
        scaler=Scaler.identity(["lex"]),
        lam=0.0,
    )
    with pytest.raises(IncompleteFeaturesError):
        model.raw_score({"morph": 0.5})
    assert model.raw_score({"lex": 0.5}) == 2.0
