import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from yawcorr.errors import InsufficientDataError, InvalidInputError, ParseError, UndefinedMetricError
from yawcorr.forecast.features import build_features, chronological_split, leak_free
from yawcorr.forecast.forest import train_forest
from yawcorr.forecast.gra import candidate_series, gra_rank
from yawcorr.forecast.linear import LinearParams, train_linear
from yawcorr.forecast.models import (ForecastModel, Hyper, Standardizer, grid_search, load_models, make_hybrid,
                                     predict, save_models, score, train_all)
from yawcorr.forecast.svr import dual_objective, solve_dual, train_svr
from yawcorr.scada import wrap_360
from yawcorr.synth import SynthConfig, generate

from conftest import make_tel


def yaw_tel(theta_d, timestamp=None):
    theta_d = np.asarray(theta_d, dtype=float)
    n = theta_d.size
    kw = {} if timestamp is None else {"timestamp": np.asarray(timestamp)}
    return make_tel(n, wind_direction=wrap_360(180.0 + theta_d), **kw)


# --- features ---------------------------------------------------------------------------

def test_six_minutes_give_one_sample():
    fs = build_features(yaw_tel([1, 2, 3, 4, 5, 6]))
    assert len(fs) == 1
    assert fs.X[0, :5] == pytest.approx([5, 4, 3, 2, 1])
    assert fs.y[0] == pytest.approx(6)


def test_gap_breaks_chain():
    t = 60 * np.array([0, 1, 2, 3, 4, 5, 7, 8, 9, 10, 11, 12])
    fs = build_features(yaw_tel(np.arange(12.0), t))
    assert len(fs) == 2 and fs.y == pytest.approx([5, 11])


def test_large_yaw_counts_as_gap():
    d = np.array([1, 2, 3, 4, 5, 6, 120, 1, 2, 3, 4, 5, 6.0])
    assert len(build_features(yaw_tel(d))) == 2
    assert len(build_features(yaw_tel([1, 2, 3, 4, 5]))) == 0


@pytest.fixture(scope="module")
def synth_fs():
    res = generate(SynthConfig(duration=1500, seed=2))
    return res.telemetry, build_features(res.telemetry)


def test_split_is_chronological_and_leak_free(synth_fs):
    _, fs = synth_fs
    train, test = chronological_split(fs, 0.8)
    assert len(train) == int(0.8 * len(fs))
    assert train.timestamp.max() < test.timestamp.min()
    assert leak_free(train, test)
    # the raw tail without the embargo reuses training targets as lags
    raw_test = fs.select(np.arange(len(train), len(fs)))
    assert not leak_free(train, raw_test)
    with pytest.raises(InvalidInputError):
        chronological_split(fs, 1.0)


# --- grey relational analysis -----------------------------------------------------------

def test_gra_identical_channel_grades_one():
    y = np.sin(np.arange(50) / 5)
    r = gra_rank({"copy": y.copy(), "noise": np.cos(np.arange(50) * 1.7)}, y)
    assert r.ranking[0] == ("copy", 1.0)


def test_gra_prefers_closer_series():
    rng = np.random.default_rng(0)
    y = np.cumsum(rng.normal(size=200))
    r = gra_rank({"far": y + rng.normal(0, 5, 200), "near": y + rng.normal(0, 0.1, 200)}, y)
    assert [name for name, _ in r.ranking] == ["near", "far"]
    assert all(0 < g <= 1 for _, g in r.ranking)


def test_gra_errors_and_constant_guard():
    y = np.arange(20.0)
    with pytest.raises(InvalidInputError):
        gra_rank({"a": y}, y)
    with pytest.raises(InsufficientDataError):
        gra_rank({"a": y[:5], "b": y[:5]}, y[:5])
    r = gra_rank({"flat": np.ones(20), "ramp": y}, y)
    assert "flat" in r.degenerate and r.ranking[0][0] == "ramp"


def test_lags_outrank_temperature(synth_fs):
    tel, _ = synth_fs
    cols, y = candidate_series(tel)
    r = gra_rank(cols, y)
    assert r.grade("theta_d_t") > r.grade("nacelle_temperature")


# --- ridge ------------------------------------------------------------------------------

@pytest.mark.parametrize("seed", range(5))
def test_bfgs_matches_closed_form(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(50, 8))
    y = X @ rng.normal(size=8) + 2.0 + rng.normal(0, 0.3, 50)
    l2 = 0.7
    # minimize 0.5|y - X b - c|^2 + l2 |b|^2 as an augmented least-squares problem
    A = np.vstack([np.column_stack([X, np.ones(50)]), np.column_stack([np.sqrt(2 * l2) * np.eye(8), np.zeros(8)])])
    w = np.linalg.lstsq(A, np.concatenate([y, np.zeros(8)]), rcond=None)[0]
    fit = train_linear(X, y, l2)
    assert np.max(np.abs(fit.beta - w[:8])) < 1e-6
    assert abs(fit.intercept - w[8]) < 1e-6


def test_huge_penalty_predicts_mean():
    rng = np.random.default_rng(1)
    X, y = rng.normal(size=(40, 3)), rng.normal(size=40)
    fit = train_linear(X, y, 1e9)
    assert np.abs(fit.beta).max() < 1e-6
    assert fit.intercept == pytest.approx(y.mean(), abs=1e-6)


# --- SVR --------------------------------------------------------------------------------

def rbf(A, B, scale=1.0):
    d2 = ((A[:, None, :] - B[None, :, :]) ** 2).sum(-1)
    return np.exp(-d2 / scale**2)


def test_svr_constant_target():
    X = np.random.default_rng(0).normal(size=(30, 4))
    m = train_svr(X, np.full(30, 2.5), epsilon=0.1, box_c=1.0)
    assert np.allclose(m.predict(X), 2.5, atol=0.1 + 1e-9)


def test_svr_dual_feasible():
    rng = np.random.default_rng(3)
    X, y = rng.normal(size=(60, 3)), rng.normal(size=60)
    C = 0.5
    sol = solve_dual(X, y, 0.2, C)
    a, a_star = sol.alpha[:60], sol.alpha[60:]
    assert sol.converged
    assert np.all((sol.alpha >= 0) & (sol.alpha <= C))
    assert abs((a - a_star).sum()) < 1e-10


@pytest.mark.parametrize("seed", range(3))
def test_svr_dual_matches_qp(seed):
    cvxopt = pytest.importorskip("cvxopt")
    rng = np.random.default_rng(seed)
    n = 10
    X, y = rng.normal(size=(n, 2)), rng.normal(size=n)
    eps, C = 0.1, 1.0
    K = rbf(X, X)
    # variables [a, a*]
    B = np.hstack([np.eye(n), -np.eye(n)])
    P = B.T @ K @ B + 1e-12 * np.eye(2 * n)
    q = eps * np.ones(2 * n) - np.concatenate([y, -y])
    G = np.vstack([-np.eye(2 * n), np.eye(2 * n)])
    h = np.concatenate([np.zeros(2 * n), C * np.ones(2 * n)])
    A = np.concatenate([np.ones(n), -np.ones(n)])[None, :]
    cvxopt.solvers.options.update({"show_progress": False, "abstol": 1e-12, "reltol": 1e-12, "feastol": 1e-12})
    qp = cvxopt.solvers.qp(*(cvxopt.matrix(v) for v in (P, q, G, h, A, np.zeros(1))))
    ref = float(0.5 * np.array(qp["x"]).ravel() @ P @ np.array(qp["x"]).ravel() + q @ np.array(qp["x"]).ravel())
    sol = solve_dual(X, y, eps, C, tol=1e-9)
    assert abs(dual_objective(sol.alpha, K, y, eps) - ref) < 1e-5


def test_svr_needs_two_samples():
    with pytest.raises(InsufficientDataError):
        train_svr(np.zeros((1, 2)), np.zeros(1))


# --- forest -----------------------------------------------------------------------------

def test_forest_bounded_and_deterministic():
    rng = np.random.default_rng(0)
    X, y = rng.normal(size=(80, 3)), rng.normal(size=80)
    a = train_forest(X, y, n_trees=10, seed=5)
    b = train_forest(X, y, n_trees=10, seed=5)
    Xq = rng.normal(0, 3, size=(100, 3))
    pa = a.predict(Xq)
    assert np.array_equal(pa, b.predict(Xq))
    assert pa.min() >= y.min() and pa.max() <= y.max()


def test_forest_ignores_row_order():
    rng = np.random.default_rng(1)
    X, y = rng.normal(size=(60, 4)), rng.normal(size=60)
    perm = rng.permutation(60)
    Xq = rng.normal(size=(30, 4))
    assert np.array_equal(train_forest(X, y, n_trees=8).predict(Xq), train_forest(X[perm], y[perm], n_trees=8).predict(Xq))


def test_forest_fits_step():
    x = np.linspace(0, 1, 200)[:, None]
    y = np.where(x[:, 0] < 0.5, 0.0, 1.0)
    f = train_forest(x, y, n_trees=20, min_node=2)
    assert np.abs(f.predict(np.array([[0.1], [0.9]])) - [0, 1]).max() < 0.05


def test_forest_rejects_bad_rule():
    with pytest.raises(InvalidInputError):
        train_forest(np.zeros((5, 1)), np.zeros(5), node_rule="depth")


# --- predictions and scoring ------------------------------------------------------------

def constant_model(kind, c):
    st_ = Standardizer(np.zeros(8), np.ones(8))
    return ForecastModel(kind, st_, LinearParams(np.zeros(8), float(c), 0.0))


def test_predict_examples():
    fs = build_features(yaw_tel([1.0, 1.5, 2.0, 3.0, 4.2, 5.0]))
    assert predict(ForecastModel("pm"), fs)[0] == pytest.approx(4.2)
    assert predict(ForecastModel("zero"), fs)[0] == 0.0
    h = ForecastModel("hybrid", members=(constant_model("linear", 1), constant_model("svr", 2), constant_model("forest", 3)))
    assert predict(h, fs)[0] == 2.0
    fs10 = build_features(yaw_tel(np.full(15, 3.0)))
    assert np.all(predict(ForecastModel("pm10"), fs10) == 3.0)


def test_hybrid_needs_each_kind_once():
    with pytest.raises(InvalidInputError):
        ForecastModel("hybrid", members=(constant_model("linear", 1),) * 3)
    with pytest.raises(InvalidInputError):
        ForecastModel("linear")


def test_score_examples():
    m = score([1, 2, 3], [1, 2, 5])
    assert m.mae == pytest.approx(2 / 3) and m.rmse == pytest.approx(np.sqrt(4 / 3)) and m.n == 3
    assert score([1.0], [1.0]).mae == 0.0
    with pytest.raises(UndefinedMetricError):
        score([], [])
    with pytest.raises(InvalidInputError):
        score([1], [1, 2])


@given(st.lists(st.tuples(*[st.floats(-50, 50)] * 4), min_size=1, max_size=30))
def test_hybrid_mae_at_most_member_mean(rows):
    a, b, c, y = map(np.array, zip(*rows))
    h = (a + b + c) / 3
    members = [score(p, y).mae for p in (a, b, c)]
    assert score(h, y).mae <= np.mean(members) + 1e-9


@settings(max_examples=50)
@given(st.integers(0, 10**6))
def test_standardizer_round_trip(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(rng.uniform(-100, 100, 4), rng.uniform(0.01, 50, 4), size=(20, 4))
    s = Standardizer.fit(X)
    assert np.max(np.abs(s.invert(s.apply(X)) - X)) < 1e-12 * max(1.0, np.abs(X).max())


def test_models_round_trip(synth_fs, tmp_path):
    _, fs = synth_fs
    train, test = chronological_split(fs, 0.8)
    models = train_all(train.select(np.arange(300)), Hyper(n_trees=5))
    save_models(tmp_path / "m.json", models)
    back = load_models(tmp_path / "m.json")
    assert set(back) == set(models)
    for k in models:
        assert np.array_equal(predict(models[k], test), predict(back[k], test))
    (tmp_path / "bad.json").write_text("{")
    with pytest.raises(ParseError):
        load_models(tmp_path / "bad.json")


def test_hybrid_inline_members_survive(synth_fs, tmp_path):
    _, fs = synth_fs
    train = fs.select(np.arange(200))
    models = train_all(train, Hyper(n_trees=3))
    lone = {"hybrid": make_hybrid(models["linear"], models["svr"], models["forest"])}
    save_models(tmp_path / "h.json", lone)
    assert np.array_equal(predict(load_models(tmp_path / "h.json")["hybrid"], fs), predict(lone["hybrid"], fs))


def test_grid_search(synth_fs):
    _, fs = synth_fs
    best, rows = grid_search("linear", fs, {"l2": [1e-3, 10.0, 1e4]}, fraction=0.5)
    assert len(rows) == 3
    assert best.l2 == min(rows, key=lambda r: r["mae"])["l2"]
    with pytest.raises(InvalidInputError):
        grid_search("linear", fs, {"box_c": [1.0]})
    with pytest.raises(InvalidInputError):
        grid_search("pm", fs, {})
