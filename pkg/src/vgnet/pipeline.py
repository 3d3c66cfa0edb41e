"""End-to-end training and evaluation protocol.

A dataset becomes a corpus of (visibility graph, feature matrix, label)
samples; training runs seeded mini-batch Adam over the fixed network;
evaluation reports a confusion matrix with macro-averaged metrics; the
multi-seed runner and the random hyperparameter search reproduce the
experiment protocol (fresh seeds per run, mean and sample std per metric).
"""

from __future__ import annotations

import itertools
import time
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import features as gfeat
from . import neural
from .neural import BatchedGraph, ModelParams
from .series_io import Dataset, TimeSeries, znormalize
from .visibility import VisGraph, build_nvg_dc

EVAL_BATCH = 256

# The hyperparameter search grid (600 combinations).
SEARCH_GRID = {
    "nhid": [8, 16, 32, 64, 128],
    "lr": [1e-4, 1e-3, 1e-2, 1e-1],
    "epochs": list(range(50, 301, 50)),
    "batch_size": [16, 32, 64, 128, 256],
}


class TrainingDivergedError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    nhid: int = 128
    lr: float = 1e-3
    epochs: int = 250
    batch_size: int = 32
    seed: int = 0
    normalize_series: bool = False
    normalize_features: bool = False
    alpha: float = neural.DEFAULT_ALPHA
    readout: str = "uniform"
    direction: str = "forward"

    def __post_init__(self):
        if self.nhid % 4 != 0 or self.nhid < 4:
            raise ValueError(f"nhid must be a positive multiple of 4, got {self.nhid}")
        if self.lr <= 0:
            raise ValueError(f"lr must be positive, got {self.lr}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.readout not in ("uniform", "degree"):
            raise ValueError(f"unknown readout mode {self.readout!r}")
        if self.direction not in ("forward", "reverse", "both"):
            raise ValueError(f"unknown message direction {self.direction!r}")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in (
            "nhid", "lr", "epochs", "batch_size", "seed", "normalize_series",
            "normalize_features", "alpha", "readout", "direction")}


@dataclass(eq=False)
class GraphSample:
    graph: VisGraph
    features: np.ndarray
    label: int
    split: str  # "train" or "test"; keeps test graphs out of gradients


@dataclass(eq=False)
class Corpus:
    name: str
    num_classes: int
    train: list[GraphSample]
    test: list[GraphSample]


def prepare_samples(series_list: list[TimeSeries], config: TrainConfig,
                    split: str) -> list[GraphSample]:
    """Build one visibility graph + feature matrix per series."""
    if not series_list:
        raise ValueError("cannot prepare an empty split")
    samples = []
    for ts in series_list:
        if config.normalize_series:
            ts = znormalize(ts)
        graph = build_nvg_dc(ts.values, series_id=ts.id)
        feats = gfeat.node_feature_matrix(graph, normalize=config.normalize_features)
        samples.append(GraphSample(graph=graph, features=feats,
                                   label=ts.label, split=split))
    return samples


def prepare_corpus(dataset: Dataset, config: TrainConfig,
                   cached_graphs: dict[str, list] | None = None) -> Corpus:
    """Convert both splits of a dataset; ``cached_graphs`` may supply
    previously built (graph, label) pairs per split to skip construction."""
    out: dict[str, list[GraphSample]] = {}
    for split, series in (("train", dataset.train), ("test", dataset.test)):
        if cached_graphs and split in cached_graphs:
            samples = []
            for graph, label in cached_graphs[split]:
                feats = gfeat.node_feature_matrix(graph, normalize=config.normalize_features)
                samples.append(GraphSample(graph=graph, features=feats,
                                           label=label, split=split))
            out[split] = samples
        else:
            out[split] = prepare_samples(series, config, split)
    return Corpus(name=dataset.name, num_classes=dataset.num_classes,
                  train=out["train"], test=out["test"])


def make_batch(samples: list[GraphSample], config: TrainConfig) -> BatchedGraph:
    return BatchedGraph.from_graphs(
        [s.graph for s in samples], [s.features for s in samples],
        [s.label for s in samples], direction=config.direction,
        readout=config.readout)


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class MetricsReport:
    confusion: np.ndarray  # (C, C) ints, rows = true, cols = predicted
    accuracy: float
    precision: float  # macro
    recall: float     # macro
    f1: float         # macro
    per_class: dict[str, np.ndarray]

    def to_dict(self) -> dict:
        return {
            "confusion": self.confusion.tolist(),
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "per_class": {k: v.tolist() for k, v in self.per_class.items()},
        }


def confusion_matrix(y_true, y_pred, num_classes: int) -> np.ndarray:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    conf = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(conf, (y_true, y_pred), 1)
    return conf


def metrics_from_confusion(conf: np.ndarray) -> MetricsReport:
    """Macro-averaged metrics with the zero-division -> 0 convention."""
    conf = np.asarray(conf, dtype=np.int64)
    diag = np.diag(conf).astype(np.float64)
    pred_totals = conf.sum(axis=0).astype(np.float64)
    true_totals = conf.sum(axis=1).astype(np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        precision = np.where(pred_totals > 0, diag / pred_totals, 0.0)
        recall = np.where(true_totals > 0, diag / true_totals, 0.0)
        denom = precision + recall
        f1 = np.where(denom > 0, 2 * precision * recall / denom, 0.0)
    total = conf.sum()
    return MetricsReport(
        confusion=conf,
        accuracy=float(diag.sum() / total) if total else 0.0,
        precision=float(precision.mean()),
        recall=float(recall.mean()),
        f1=float(f1.mean()),
        per_class={"precision": precision, "recall": recall, "f1": f1},
    )


# ---------------------------------------------------------------------------
# Train / evaluate
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class TrainResult:
    params: ModelParams
    loss_history: list[float]
    wall_clock: float


def train(config: TrainConfig, corpus: Corpus) -> TrainResult:
    """Seeded mini-batch Adam over epochs x ceil(|train|/batch) steps.

    Batch order reshuffles every epoch from the run's own generator; the
    recorded history is the per-epoch mean training loss.  A non-finite
    loss aborts with a diagnostic rather than silently degrading.
    """
    samples = corpus.train
    assert all(s.split == "train" for s in samples), "test data leaked into training"
    start = time.perf_counter()
    params = neural.init_params(config.nhid, corpus.num_classes,
                                seed=config.seed, alpha=config.alpha)
    state = neural.AdamState.for_params(params)
    shuffle_rng = np.random.default_rng(
        np.random.SeedSequence(entropy=config.seed, spawn_key=(1,)))
    n = len(samples)
    loss_history: list[float] = []
    t = 0
    for epoch in range(config.epochs):
        perm = shuffle_rng.permutation(n)
        epoch_loss = 0.0
        for lo in range(0, n, config.batch_size):
            chunk = [samples[i] for i in perm[lo:lo + config.batch_size]]
            batch = make_batch(chunk, config)
            loss, _, grads = neural.loss_and_grads(params, batch)
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    f"loss became non-finite at epoch {epoch + 1}, step {t + 1} "
                    f"(lr={config.lr}, nhid={config.nhid})")
            t += 1
            neural.adam_step(params, grads, state, lr=config.lr, t=t)
            epoch_loss += loss * len(chunk)
        loss_history.append(epoch_loss / n)
    return TrainResult(params=params, loss_history=loss_history,
                       wall_clock=time.perf_counter() - start)


def evaluate(params: ModelParams, samples: list[GraphSample],
             config: TrainConfig, num_classes: int | None = None) -> MetricsReport:
    """Argmax classification of each graph (ties break to the lowest class)."""
    if not samples:
        raise ValueError("cannot evaluate an empty split")
    if num_classes is None:
        num_classes = params.num_classes
    preds = np.empty(len(samples), dtype=np.int64)
    for lo in range(0, len(samples), EVAL_BATCH):
        chunk = samples[lo:lo + EVAL_BATCH]
        logp = neural.predict_logp(params, make_batch(chunk, config))
        preds[lo:lo + len(chunk)] = np.argmax(logp, axis=1)
    truth = np.array([s.label for s in samples], dtype=np.int64)
    return metrics_from_confusion(confusion_matrix(truth, preds, num_classes))


# ---------------------------------------------------------------------------
# Multi-seed protocol
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class SeedRun:
    seed: int
    metrics: MetricsReport | None
    loss_history: list[float]
    wall_clock: float
    error: str | None = None


@dataclass(eq=False)
class RunSummary:
    dataset: str
    config: TrainConfig
    runs: list[SeedRun]
    aggregates: dict[str, dict[str, float]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "config": self.config.to_dict(),
            "runs": [
                {"seed": r.seed,
                 "metrics": r.metrics.to_dict() if r.metrics else None,
                 "loss_history": r.loss_history,
                 "wall_clock": r.wall_clock,
                 "error": r.error}
                for r in self.runs
            ],
            "aggregates": self.aggregates,
        }


METRIC_NAMES = ("precision", "recall", "accuracy", "f1")


def _aggregate(runs: list[SeedRun]) -> dict[str, dict[str, float]]:
    ok = [r for r in runs if r.metrics is not None]
    out: dict[str, dict[str, float]] = {}
    for name in METRIC_NAMES:
        vals = np.array([getattr(r.metrics, name) for r in ok])
        if vals.size == 0:
            out[name] = {"mean": float("nan"), "std": float("nan")}
        else:
            std = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
            out[name] = {"mean": float(vals.mean()), "std": std}
    return out


def multi_seed_run(config: TrainConfig, corpus: Corpus, seeds) -> RunSummary:
    """Independent train+evaluate per seed; failures are excluded from the
    aggregates with a warning instead of poisoning the means."""
    seeds = list(seeds)
    if not seeds:
        raise ValueError("need at least one seed")
    runs: list[SeedRun] = []
    for seed in seeds:
        cfg = replace(config, seed=seed)
        begin = time.perf_counter()
        try:
            result = train(cfg, corpus)
            metrics = evaluate(result.params, corpus.test, cfg,
                               num_classes=corpus.num_classes)
            runs.append(SeedRun(seed=seed, metrics=metrics,
                                loss_history=result.loss_history,
                                wall_clock=time.perf_counter() - begin))
        except TrainingDivergedError as exc:
            warnings.warn(f"seed {seed} failed and is excluded from aggregates: {exc}",
                          stacklevel=2)
            runs.append(SeedRun(seed=seed, metrics=None, loss_history=[],
                                wall_clock=time.perf_counter() - begin,
                                error=str(exc)))
    return RunSummary(dataset=corpus.name, config=config, runs=runs,
                      aggregates=_aggregate(runs))


# ---------------------------------------------------------------------------
# Random hyperparameter search
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class SearchResult:
    best_config: TrainConfig | None
    best_score: float
    trials: list[dict]


def random_search(grids: dict, datasets: list[tuple[str, Dataset]], trials: int,
                  seed: int, base_config: TrainConfig | None = None) -> SearchResult:
    """Uniform sampling without replacement from the grid product.

    Each trial trains once per dataset and is scored by the mean test-split
    macro F1 across datasets (the search targets, not the report sets);
    diverged trials score as failures and never win.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    base = base_config or TrainConfig()
    combos = list(itertools.product(grids["nhid"], grids["lr"],
                                    grids["epochs"], grids["batch_size"]))
    if trials > len(combos):
        warnings.warn(f"trials={trials} exceeds {len(combos)} grid points; clamping",
                      stacklevel=2)
        trials = len(combos)
    rng = np.random.default_rng(seed)
    picks = rng.choice(len(combos), size=trials, replace=False)

    corpora = {}
    for name, ds in datasets:
        corpora[name] = prepare_corpus(ds, base)

    log: list[dict] = []
    best_config = None
    best_score = -np.inf
    for trial_idx in picks:
        nhid, lr, epochs, batch_size = combos[int(trial_idx)]
        cfg = replace(base, nhid=nhid, lr=lr, epochs=epochs, batch_size=batch_size)
        entry = {"nhid": nhid, "lr": lr, "epochs": epochs,
                 "batch_size": batch_size, "per_dataset_f1": {}, "mean_f1": None,
                 "error": None}
        try:
            scores = []
            for name, _ in datasets:
                corpus = corpora[name]
                result = train(cfg, corpus)
                report = evaluate(result.params, corpus.test, cfg,
                                  num_classes=corpus.num_classes)
                entry["per_dataset_f1"][name] = report.f1
                scores.append(report.f1)
            entry["mean_f1"] = float(np.mean(scores))
            if entry["mean_f1"] > best_score:
                best_score = entry["mean_f1"]
                best_config = cfg
        except TrainingDivergedError as exc:
            entry["error"] = str(exc)
            warnings.warn(f"search trial {combos[int(trial_idx)]} diverged: {exc}",
                          stacklevel=2)
        log.append(entry)
    return SearchResult(best_config=best_config, best_score=best_score, trials=log)
