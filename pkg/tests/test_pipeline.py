import numpy as np
import pytest

from vgnet import pipeline
from vgnet.pipeline import (
    SEARCH_GRID,
    Corpus,
    TrainConfig,
    TrainingDivergedError,
    confusion_matrix,
    evaluate,
    metrics_from_confusion,
    multi_seed_run,
    prepare_corpus,
    prepare_samples,
    random_search,
    train,
)
from vgnet.series_io import TimeSeries, load_dataset
from vgnet.synthetic import write_synthetic_ucr

QUICK = TrainConfig(nhid=8, lr=1e-2, epochs=12, batch_size=8, seed=0)


@pytest.fixture(scope="module")
def demo_dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("demo")
    tr, te = write_synthetic_ucr(out, "Demo", n_train=24, n_test=16, length=48, seed=3)
    return load_dataset(tr, te, "Demo")


@pytest.fixture(scope="module")
def demo_corpus(demo_dataset):
    return prepare_corpus(demo_dataset, QUICK)


# ---------------------------------------------------------------------------
# config validation
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("bad", [
    dict(nhid=10), dict(nhid=0), dict(lr=0.0), dict(lr=-1.0),
    dict(epochs=0), dict(batch_size=0), dict(readout="max"),
    dict(direction="up"),
])
def test_config_validation(bad):
    with pytest.raises(ValueError):
        TrainConfig(**bad)


# ---------------------------------------------------------------------------
# corpus preparation
# ---------------------------------------------------------------------------

def test_prepare_samples_composition():
    samples = prepare_samples([TimeSeries(0, 1, np.array([3.0, 1.0, 2.0]))],
                              QUICK, split="train")
    assert len(samples) == 1
    s = samples[0]
    assert s.graph.num_edges == 3
    assert s.features.shape == (3, 2)
    assert s.label == 1


def test_prepare_samples_empty_errors():
    with pytest.raises(ValueError):
        prepare_samples([], QUICK, split="train")


def test_prepare_corpus_counts(demo_dataset, demo_corpus):
    assert len(demo_corpus.train) == len(demo_dataset.train)
    assert len(demo_corpus.test) == len(demo_dataset.test)
    assert all(s.split == "train" for s in demo_corpus.train)
    assert all(s.split == "test" for s in demo_corpus.test)


def test_prepare_corpus_accepts_cached_graphs(demo_dataset, demo_corpus):
    cached = {"train": [(s.graph, s.label) for s in demo_corpus.train]}
    corpus = prepare_corpus(demo_dataset, QUICK, cached_graphs=cached)
    assert [s.label for s in corpus.train] == [s.label for s in demo_corpus.train]
    assert corpus.train[0].graph is cached["train"][0][0]


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

def test_metrics_hand_computed_binary():
    conf = np.array([[2, 1], [0, 3]])
    rep = metrics_from_confusion(conf)
    assert rep.accuracy == pytest.approx(5 / 6)
    np.testing.assert_allclose(rep.per_class["precision"], [1.0, 0.75])
    np.testing.assert_allclose(rep.per_class["recall"], [2 / 3, 1.0])
    assert rep.precision == pytest.approx(0.875)
    assert rep.recall == pytest.approx((2 / 3 + 1) / 2)
    f1_0 = 2 * (1 * 2 / 3) / (1 + 2 / 3)
    f1_1 = 2 * (0.75 * 1) / 1.75
    assert rep.f1 == pytest.approx((f1_0 + f1_1) / 2)


def test_metrics_zero_division_rule():
    conf = np.array([[3, 0, 0], [1, 0, 0], [0, 0, 0]])
    rep = metrics_from_confusion(conf)
    np.testing.assert_allclose(rep.per_class["precision"], [0.75, 0.0, 0.0])
    np.testing.assert_allclose(rep.per_class["recall"], [1.0, 0.0, 0.0])
    assert rep.precision == pytest.approx(0.25)


def test_metrics_perfect_predictions():
    rep = metrics_from_confusion(np.diag([4, 3, 2]))
    assert rep.accuracy == rep.precision == rep.recall == rep.f1 == 1.0


def test_metrics_single_class_test_set():
    conf = confusion_matrix([0, 0, 0], [0, 0, 0], num_classes=2)
    rep = metrics_from_confusion(conf)
    assert rep.accuracy == 1.0
    assert rep.precision == 0.5  # absent class contributes 0
    assert rep.recall == 0.5


def test_majority_baseline_reproduces_earthquakes_row():
    # 139-sample binary split with 104 majority-class cases; constant
    # majority predictions must print as 0.37/0.50/0.75/0.43 at 2 decimals
    y_true = np.array([0] * 104 + [1] * 35)
    y_pred = np.zeros(139, dtype=int)
    rep = metrics_from_confusion(confusion_matrix(y_true, y_pred, 2))
    assert round(rep.precision, 2) == 0.37
    assert round(rep.recall, 2) == 0.50
    assert round(rep.accuracy, 2) == 0.75
    assert round(rep.f1, 2) == 0.43


def test_confusion_total_is_test_size():
    conf = confusion_matrix([0, 1, 1, 0, 1], [1, 1, 0, 0, 1], 2)
    assert conf.sum() == 5
    assert conf[1, 1] == 2 and conf[0, 0] == 1


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------

def test_train_first_epoch_loss_near_uniform(demo_corpus):
    result = train(QUICK, demo_corpus)
    ln_c = np.log(demo_corpus.num_classes)
    assert 0.5 * ln_c <= result.loss_history[0] <= 1.5 * ln_c


def test_train_determinism(demo_corpus):
    from vgnet.neural import iter_tensors
    a = train(QUICK, demo_corpus)
    b = train(QUICK, demo_corpus)
    assert a.loss_history == b.loss_history
    for (na, ta), (_, tb) in zip(iter_tensors(a.params), iter_tensors(b.params)):
        np.testing.assert_array_equal(ta, tb)


def test_train_overfits_small_subset(demo_corpus):
    subset = Corpus(name="demo16", num_classes=2,
                    train=demo_corpus.train[:16], test=demo_corpus.test)
    cfg = TrainConfig(nhid=16, lr=1e-2, epochs=40, batch_size=8, seed=0)
    result = train(cfg, subset)
    rep = evaluate(result.params, subset.train, cfg, num_classes=2)
    assert rep.accuracy >= 0.95


def test_train_divergence_reports(demo_corpus, monkeypatch):
    # force a NaN loss on the second step
    calls = {"n": 0}
    real = pipeline.neural.loss_and_grads

    def poisoned(params, batch):
        calls["n"] += 1
        loss, logp, grads = real(params, batch)
        if calls["n"] >= 2:
            return float("nan"), logp, grads
        return loss, logp, grads

    monkeypatch.setattr(pipeline.neural, "loss_and_grads", poisoned)
    with pytest.raises(TrainingDivergedError, match="epoch"):
        train(QUICK, demo_corpus)


def test_three_class_learnable():
    # ramp (chain graph), sinusoid (moderate degrees), spiky (hubs): the
    # feature distributions differ enough that a small net must separate them
    rng = np.random.default_rng(12)

    def make(label, i):
        n = 48
        if label == 0:
            v = np.linspace(0, 1, n) + 0.01 * rng.standard_normal(n)
        elif label == 1:
            v = np.sin(np.arange(n) * 0.5) + 0.05 * rng.standard_normal(n)
        else:
            v = rng.integers(0, 3, n).astype(float)
            v[rng.choice(n, 6, replace=False)] += rng.integers(8, 20, 6)
        return TimeSeries(id=i, label=label, values=v)

    train_series = [make(i % 3, i) for i in range(30)]
    test_series = [make(i % 3, i) for i in range(15)]
    cfg = TrainConfig(nhid=16, lr=1e-2, epochs=30, batch_size=8, seed=1)
    corpus = Corpus(name="tri", num_classes=3,
                    train=prepare_samples(train_series, cfg, "train"),
                    test=prepare_samples(test_series, cfg, "test"))
    result = train(cfg, corpus)
    rep = evaluate(result.params, corpus.test, cfg, num_classes=3)
    assert rep.confusion.shape == (3, 3)
    assert rep.confusion.sum() == 15
    assert rep.accuracy >= 0.8
    assert len(rep.per_class["f1"]) == 3


def test_evaluate_is_pure(demo_corpus):
    result = train(QUICK, demo_corpus)
    a = evaluate(result.params, demo_corpus.test, QUICK, num_classes=2)
    b = evaluate(result.params, demo_corpus.test, QUICK, num_classes=2)
    assert a.to_dict() == b.to_dict()


def test_evaluate_empty_split_errors(demo_corpus):
    result = train(QUICK, demo_corpus)
    with pytest.raises(ValueError):
        evaluate(result.params, [], QUICK)


def test_train_refuses_test_samples(demo_corpus):
    leaky = Corpus(name="x", num_classes=2,
                   train=demo_corpus.test, test=demo_corpus.test)
    with pytest.raises(AssertionError):
        train(QUICK, leaky)


# ---------------------------------------------------------------------------
# multi-seed protocol
# ---------------------------------------------------------------------------

def test_multi_seed_aggregates(demo_corpus):
    summary = multi_seed_run(QUICK, demo_corpus, seeds=[0, 1, 2])
    assert len(summary.runs) == 3
    accs = [r.metrics.accuracy for r in summary.runs]
    assert summary.aggregates["accuracy"]["mean"] == pytest.approx(np.mean(accs))
    assert summary.aggregates["accuracy"]["std"] == pytest.approx(np.std(accs, ddof=1))


def test_multi_seed_single_seed_std_zero(demo_corpus):
    summary = multi_seed_run(QUICK, demo_corpus, seeds=[5])
    assert summary.aggregates["f1"]["std"] == 0.0


def test_multi_seed_repeated_seed_zero_std(demo_corpus):
    summary = multi_seed_run(QUICK, demo_corpus, seeds=[7, 7])
    assert summary.aggregates["accuracy"]["std"] == 0.0


def test_multi_seed_excludes_failures_with_warning(demo_corpus, monkeypatch):
    real = pipeline.train

    def flaky(cfg, corpus):
        if cfg.seed == 1:
            raise TrainingDivergedError("synthetic failure")
        return real(cfg, corpus)

    monkeypatch.setattr(pipeline, "train", flaky)
    with pytest.warns(UserWarning, match="excluded from aggregates"):
        summary = multi_seed_run(QUICK, demo_corpus, seeds=[0, 1, 2])
    assert [r.error is None for r in summary.runs] == [True, False, True]
    ok = [r.metrics.accuracy for r in summary.runs if r.metrics]
    assert summary.aggregates["accuracy"]["mean"] == pytest.approx(np.mean(ok))


def test_multi_seed_requires_seeds(demo_corpus):
    with pytest.raises(ValueError):
        multi_seed_run(QUICK, demo_corpus, seeds=[])


# ---------------------------------------------------------------------------
# random search
# ---------------------------------------------------------------------------

TINY_GRID = {"nhid": [4, 8], "lr": [1e-2, 1e-3], "epochs": [2], "batch_size": [4]}


def test_search_grid_cardinality():
    import itertools
    combos = list(itertools.product(*SEARCH_GRID.values()))
    assert len(combos) == 5 * 4 * 6 * 5 == 600
    assert SEARCH_GRID["epochs"] == [50, 100, 150, 200, 250, 300]


def test_search_single_trial(demo_dataset):
    result = random_search(TINY_GRID, [("Demo", demo_dataset)], trials=1, seed=0,
                           base_config=QUICK)
    assert len(result.trials) == 1
    assert result.best_config is not None
    t = result.trials[0]
    assert (result.best_config.nhid, result.best_config.lr,
            result.best_config.epochs, result.best_config.batch_size) == (
        t["nhid"], t["lr"], t["epochs"], t["batch_size"])


def test_search_clamps_excess_trials(demo_dataset):
    with pytest.warns(UserWarning, match="clamping"):
        result = random_search(TINY_GRID, [("Demo", demo_dataset)], trials=10,
                               seed=0, base_config=QUICK)
    assert len(result.trials) == 4


def test_search_deterministic(demo_dataset):
    kwargs = dict(grids=TINY_GRID, datasets=[("Demo", demo_dataset)],
                  trials=2, seed=11, base_config=QUICK)
    a = random_search(**kwargs)
    b = random_search(**kwargs)
    assert a.trials == b.trials
    assert a.best_config == b.best_config


def test_search_requires_trials(demo_dataset):
    with pytest.raises(ValueError):
        random_search(TINY_GRID, [("Demo", demo_dataset)], trials=0, seed=0)
