import json

import numpy as np
import pandas as pd
import pytest

from pathtrace import regressors
from pathtrace.errors import ArityMismatch, InsufficientData, MissingColumn, MissingNoise
from pathtrace.graph import build_dag
from pathtrace.scm import (FittedScm, block_folds, extract_noise, fit_scm, predict, propagate,
                           sample_noise, select_mechanism)


@pytest.fixture(scope="module")
def linear_chain():
    rng = np.random.default_rng(7)
    a = rng.normal(0, 1, 500)
    b = 2 * a + rng.normal(0, 0.1, 500)
    data = pd.DataFrame({"A": a, "B": b})
    return data, fit_scm(build_dag([("A", "B")]), data)


@pytest.fixture(scope="module")
def noiseless_chain():
    rng = np.random.default_rng(3)
    a = rng.normal(10, 2, 200)
    data = pd.DataFrame({"A": a, "B": 3 * a - 1, "C": 0.5 * (3 * a - 1) + 4})
    return data, fit_scm(build_dag([("A", "B"), ("B", "C")]), data)


def _cv_rmse(X, y, fit_predict, folds=5):
    out = []
    for val in np.array_split(np.arange(len(y)), folds):
        tr = np.setdiff1d(np.arange(len(y)), val)
        err = y[val] - fit_predict(X[tr], y[tr], X[val])
        out.append(np.sqrt(np.mean(err ** 2)))
    return float(np.mean(out))


def test_linear_child_recovers_slope(linear_chain):
    data, scm = linear_chain
    mech = scm.mechanisms["B"]
    assert mech.regressor.name in ("linear", "poly2")
    slope = (predict(mech, [1.0]) - predict(mech, [-1.0])) / 2
    assert abs(slope - 2.0) < 0.1
    assert predict(mech, [1.5]) == pytest.approx(3.0, abs=0.1)


def test_root_is_empirical(linear_chain):
    data, scm = linear_chain
    root = scm.mechanisms["A"]
    assert root.kind == "RootEmpirical"
    np.testing.assert_array_equal(root.sample, np.sort(data["A"].to_numpy()))


def test_constant_child():
    rng = np.random.default_rng(0)
    data = pd.DataFrame({"A": rng.normal(size=40), "B": np.full(40, 4.2)})
    mech = fit_scm(build_dag([("A", "B")]), data).mechanisms["B"]
    assert predict(mech, [123.0]) == 4.2
    assert np.all(mech.sample == 0)


def test_fit_errors():
    dag = build_dag([("A", "B")])
    with pytest.raises(MissingColumn):
        fit_scm(dag, pd.DataFrame({"A": np.arange(30.0)}))
    with pytest.raises(InsufficientData):
        fit_scm(dag, pd.DataFrame({"A": np.arange(10.0), "B": np.arange(10.0)}))


def test_exact_linear_wins_with_zero_cv():
    x = np.linspace(-5, 5, 100)
    model, rmse, scores = select_mechanism(x, 3 * x + 1)
    assert model.name == "linear" and rmse < 1e-9


def test_quadratic_prefers_poly2():
    rng = np.random.default_rng(1)
    x = rng.uniform(-3, 3, 300)
    y = x ** 2
    model, rmse, scores = select_mechanism(x, y)
    # independent oracle: numpy polyfit of degree 1 and 2 on the same blocks
    X = x.reshape(-1, 1)
    lin = _cv_rmse(X, y, lambda a, b, c: np.polyval(np.polyfit(a[:, 0], b, 1), c[:, 0]))
    quad = _cv_rmse(X, y, lambda a, b, c: np.polyval(np.polyfit(a[:, 0], b, 2), c[:, 0]))
    assert quad < lin
    assert scores["linear"] == pytest.approx(lin, rel=1e-6)
    assert scores["poly2"] == pytest.approx(quad, abs=1e-9)
    assert model.name == "poly2"
    assert model.predict([[2.0]])[0] == pytest.approx(4.0, abs=0.2)


def test_pure_noise_prefers_constant():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(400, 2))
    y = rng.normal(size=400)
    model, rmse, scores = select_mechanism(X, y)
    assert model.name == "constant" or rmse == pytest.approx(scores["constant"], rel=1e-3)


def test_winner_has_lowest_cv(linear_chain):
    _, scm = linear_chain
    for mech in scm.mechanisms.values():
        if mech.cv_scores:
            tol = 1e-9 * max(mech.cv_scores.values())
            assert all(mech.cv_rmse <= s + tol for s in mech.cv_scores.values())


def test_folds_are_contiguous_blocks():
    blocks = block_folds(23, 5)
    assert np.concatenate(blocks).tolist() == list(range(23))
    assert all(np.all(np.diff(b) == 1) for b in blocks)


def test_predict_arity(linear_chain):
    _, scm = linear_chain
    with pytest.raises(ArityMismatch):
        predict(scm.mechanisms["B"], [1.0, 2.0])
    with pytest.raises(ArityMismatch):
        predict(scm.mechanisms["A"], [1.0])


def test_noise_noiseless_chain(noiseless_chain):
    data, scm = noiseless_chain
    noise = extract_noise(scm, data)
    np.testing.assert_array_equal(noise["A"], data["A"].to_numpy())
    assert np.max(np.abs(noise["B"])) < 1e-6
    assert np.max(np.abs(noise["C"])) < 1e-6


def test_shock_exceeds_training_quantile(linear_chain):
    data, scm = linear_chain
    shocked = data.copy()
    shocked.loc[17, "B"] += 10
    noise = extract_noise(scm, shocked)
    assert noise["B"][17] > np.quantile(scm.mechanisms["B"].sample, 0.99)


def test_propagate_arithmetic(linear_chain):
    _, scm = linear_chain
    m = scm.mechanisms["B"].regressor
    expected = m.predict([[3.0]])[0] + 1.0
    out = propagate(scm, {"A": 3.0, "B": 1.0})
    assert out["B"] == pytest.approx(expected)
    assert out["B"] == pytest.approx(7.0, abs=0.3)


def test_propagate_zero_noise_reproduces_mechanism(noiseless_chain):
    data, scm = noiseless_chain
    out = propagate(scm, {"A": data["A"].to_numpy(), "B": 0.0, "C": 0.0})
    np.testing.assert_allclose(out["C"], data["C"].to_numpy(), rtol=1e-9)


def test_propagate_missing_noise(linear_chain):
    _, scm = linear_chain
    with pytest.raises(MissingNoise):
        propagate(scm, {"A": 1.0})


def test_round_trip_every_row(linear_chain):
    data, scm = linear_chain
    out = propagate(scm, extract_noise(scm, data))
    for col in data:
        np.testing.assert_allclose(out[col], data[col].to_numpy(), rtol=1e-6, atol=1e-12)


def test_sample_noise(linear_chain):
    _, scm = linear_chain
    mech = scm.mechanisms["B"]
    assert sample_noise(mech, 0, 1).size == 0
    draws = sample_noise(mech, 10_000, 1)
    assert np.isin(draws, mech.sample).all()
    se = mech.sample.std() / np.sqrt(draws.size)
    assert abs(draws.mean() - mech.sample.mean()) < 3 * se
    np.testing.assert_array_equal(draws, sample_noise(mech, 10_000, 1))


def test_fit_deterministic(linear_chain):
    data, scm = linear_chain
    again = fit_scm(scm.dag, data)
    assert json.dumps(again.to_json()) == json.dumps(scm.to_json())


def test_json_round_trip_all_candidates():
    rng = np.random.default_rng(11)
    X = rng.normal(size=(120, 2))
    y = np.sin(X[:, 0]) + X[:, 1] ** 2
    for cand in regressors.CANDIDATES:
        m = cand().fit(X, y)
        back = regressors.from_dict(json.loads(json.dumps(regressors.to_dict(m))))
        np.testing.assert_array_equal(back.predict(X), m.predict(X))


def test_scm_json_round_trip(linear_chain, tmp_path):
    data, scm = linear_chain
    scm.save(tmp_path / "scm.json")
    back = FittedScm.load(tmp_path / "scm.json")
    assert back.metadata == scm.metadata
    a, b = extract_noise(scm, data), extract_noise(back, data)
    for k in a:
        np.testing.assert_array_equal(a[k], b[k])


def test_boosted_trees_fit_step():
    x = np.linspace(0, 1, 400)
    y = np.where(x > 0.5, 1.0, 0.0)
    m = regressors.BoostedTrees().fit(x, y)
    pred = m.predict(x)
    # 50 rounds at rate 0.1 recover 1 - 0.9**50 of the step
    assert np.allclose(pred[x < 0.45], 0.0, atol=0.01)
    assert np.allclose(pred[x > 0.55], 1 - 0.9 ** 50, atol=0.01)


def test_knn_exact_on_duplicated_grid():
    X = np.repeat(np.arange(10.0), 5).reshape(-1, 1)
    y = X[:, 0] * 2
    m = regressors.KNearest().fit(X, y)
    np.testing.assert_allclose(m.predict(np.arange(10.0)), np.arange(10.0) * 2)
