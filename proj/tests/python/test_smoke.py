import math

import numpy as np
import pytest

import slate_forge as sf


def test_pl_log_prob_normalizes():
    scores = np.array([0.3, -1.2, 0.8, 0.0])
    total = 0.0
    for a in range(4):
        for b in range(4):
            if a != b:
                total += math.exp(sf.pl_log_prob(scores, [a, b]))
    assert total == pytest.approx(1.0, abs=1e-12)


def test_pl_log_prob_first_position_is_softmax():
    scores = np.array([1.0, 2.0, 3.0])
    expected = scores[2] - np.log(np.exp(scores).sum())
    assert sf.pl_log_prob(scores, [2]) == pytest.approx(expected, abs=1e-12)


def test_samplers_return_distinct_actions():
    scores = np.linspace(-1.0, 1.0, 20)
    for method in ("sequential", "gumbel"):
        slate = sf.pl_sample(scores, 5, seed=3, method=method)
        assert len(slate) == 5 and len(set(slate)) == 5
        assert slate == sf.pl_sample(scores, 5, seed=3, method=method)
    with pytest.raises(sf.ConfigError):
        sf.pl_sample(scores, 2, method="bogus")


def test_top_k_orders_by_score():
    assert sf.top_k(np.array([0.1, 0.9, 0.5, 0.7]), 3) == [1, 3, 2]


def test_embeddings_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    array = rng.standard_normal((4, 50))
    beta = sf.Embeddings(array)
    assert (beta.dim, beta.actions) == (4, 50)
    np.testing.assert_allclose(beta.numpy(), array)
    np.testing.assert_allclose(beta.scores(np.ones(4)), array.sum(axis=0))
    path = tmp_path / "beta.sleb"
    beta.save(path)
    loaded = sf.Embeddings.load(path)
    np.testing.assert_allclose(loaded.numpy(), array.astype(np.float32), rtol=0, atol=0)


def test_indexes_agree_on_small_catalog(tmp_path):
    rng = np.random.default_rng(1)
    beta = sf.Embeddings(rng.standard_normal((8, 2000)))
    exact = sf.ExactIndex(beta)
    approx = sf.ApproxIndex.build(beta, seed=5)
    h = rng.standard_normal(8)
    assert exact.query(h, 10) == sf.top_k(beta.scores(h), 10)
    assert approx.recall(rng.standard_normal((100, 8)), 10) >= 0.95
    path = tmp_path / "index.slmi"
    approx.save(path)
    reloaded = sf.ApproxIndex.load(path, beta)
    assert reloaded.query(h, 10) == approx.query(h, 10)


def test_index_keeps_embeddings_alive():
    beta = sf.Embeddings(np.eye(3))
    index = sf.ExactIndex(beta)
    del beta
    assert index.query(np.array([0.0, 0.0, 1.0]), 1) == [2]


def test_dataset_validation_and_io(tmp_path):
    ds = sf.Dataset(5, [[3, 1], [0, 4, 2]])
    assert ds.users == 2 and ds.interactions == 5
    assert ds.items(0) == [1, 3]
    with pytest.raises(sf.ValidationError):
        sf.Dataset(5, [[1, 1]])
    path = tmp_path / "x.csv"
    ds.save(path)
    assert sf.Dataset.load(path) == ds
    with pytest.raises(sf.IoError):
        sf.Dataset.load(tmp_path / "missing.csv")


def test_pipeline_is_deterministic():
    ds = sf.generate_synthetic(users=300, actions=400, density=0.03, seed=2)
    assert ds.density == pytest.approx(0.03, rel=0.15)
    assert sf.generate_synthetic(users=300, actions=400, density=0.03, seed=2) == ds
    beta = sf.svd_embeddings(ds, dim=8, seed=1)
    assert (beta.dim, beta.actions) == (8, 400)
    a = sf.train(ds, beta, estimator="lgp", k=3, iterations=20, seed=4)
    b = sf.train(ds, beta, estimator="lgp", k=3, iterations=20, seed=4)
    assert a["params"] == b["params"]
    assert a["iterations"] == 20
    assert all(0.0 <= row["val_reward"] <= 2.0 for row in a["log"])
    with pytest.raises(sf.ConfigError):
        sf.train(ds, beta, estimator="nope")
