"""Command-line surface: graph corpus building, training, evaluation,
multi-seed runs, hyperparameter search, and degree-distribution export.

Exit codes: 0 on success, 1 on runtime failure, 2 on usage or IO errors.
"""

from __future__ import annotations

import hashlib
import json
import os
import subprocess
import sys
import time
from contextlib import contextmanager
from pathlib import Path

import click
import numpy as np

from . import features as gfeat
from . import neural, pipeline, series_io, visibility

DEFAULT_CACHE_DIR = Path.home() / ".cache" / "vgnet"


def _cache_dir() -> Path:
    return Path(os.environ.get("GNA_CACHE_DIR", DEFAULT_CACHE_DIR))


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _dataset_name(train_path) -> str:
    stem = Path(train_path).stem
    return stem[:-6] if stem.endswith("_TRAIN") else stem


def _git_describe() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"],
                             capture_output=True, text=True, timeout=5,
                             cwd=Path(__file__).parent)
        if out.returncode == 0:
            return out.stdout.strip()
    except OSError:
        pass
    return "unknown"


@contextmanager
def _output_dir(out):
    """Create the output directory and hold a lockfile while working.

    Concurrent invocations on the same directory are refused (exit 1).
    """
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    lock = out / ".vgnet.lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        click.echo(f"error: {out} is locked by another invocation ({lock})", err=True)
        sys.exit(1)
    try:
        os.close(fd)
        yield out
    finally:
        try:
            os.unlink(lock)
        except OSError:
            pass


def _load_dataset(train, test):
    try:
        return series_io.load_dataset(train, test, _dataset_name(train))
    except (series_io.ParseError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    except OSError as exc:
        click.echo(f"error: cannot read dataset: {exc}", err=True)
        sys.exit(2)


def _build_graph_pairs(series_list):
    return [(visibility.build_nvg_dc(ts.values, series_id=ts.id), ts.label)
            for ts in series_list]


def _cached_corpus(dataset, config, train_path, test_path):
    """Graph corpora cached by (train+test checksum, series normalization)."""
    key_src = _sha256(train_path) + _sha256(test_path) + f"|zn={int(config.normalize_series)}"
    key = hashlib.sha256(key_src.encode()).hexdigest()[:20]
    cache = _cache_dir()
    cached: dict[str, list] = {}
    for split in ("train", "test"):
        path = cache / f"{key}_{split}.vg"
        if path.exists():
            cached[split] = visibility.read_graphs(path)
    corpus = pipeline.prepare_corpus(dataset, config, cached_graphs=cached or None)
    cache.mkdir(parents=True, exist_ok=True)
    for split, samples in (("train", corpus.train), ("test", corpus.test)):
        path = cache / f"{key}_{split}.vg"
        if split not in cached:
            visibility.write_graphs(path, [(s.graph, s.label) for s in samples])
    return corpus


def _print_metrics_table(aggregates):
    click.echo(f"{'metric':<12}{'mean':>8}{'std':>8}")
    for name in pipeline.METRIC_NAMES:
        entry = aggregates[name]
        click.echo(f"{name:<12}{entry['mean']:>8.2f}{entry['std']:>8.2f}")


def _write_json(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _config_options(fn):
    opts = [
        click.option("--nhid", type=int, default=128, show_default=True),
        click.option("--lr", type=float, default=1e-3, show_default=True),
        click.option("--epochs", type=int, default=250, show_default=True),
        click.option("--batch-size", type=int, default=32, show_default=True),
        click.option("--normalize-series", is_flag=True,
                     help="z-normalize each series before graph construction"),
        click.option("--normalize-features", is_flag=True,
                     help="z-normalize feature columns within each graph"),
        click.option("--readout", type=click.Choice(["uniform", "degree"]),
                     default="uniform", show_default=True),
        click.option("--direction", type=click.Choice(["forward", "reverse", "both"]),
                     default="forward", show_default=True),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


def _make_config(nhid, lr, epochs, batch_size, normalize_series,
                 normalize_features, readout, direction, seed=0):
    try:
        return pipeline.TrainConfig(
            nhid=nhid, lr=lr, epochs=epochs, batch_size=batch_size, seed=seed,
            normalize_series=normalize_series, normalize_features=normalize_features,
            readout=readout, direction=direction)
    except ValueError as exc:
        raise click.UsageError(str(exc)) from None


@click.group()
def main():
    """Time series classification via visibility graphs and a graph net."""


@main.command("build-graphs")
@click.option("--train", "train_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--test", "test_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--normalize-series", is_flag=True)
def cmd_build_graphs(train_path, test_path, out_dir, normalize_series):
    """Convert both splits to graph corpus files plus a manifest."""
    dataset = _load_dataset(train_path, test_path)
    with _output_dir(out_dir) as out:
        manifest = {"dataset": dataset.name, "num_classes": dataset.num_classes,
                    "normalize_series": normalize_series, "splits": {}}
        for split, series in (("train", dataset.train), ("test", dataset.test)):
            if normalize_series:
                series = [series_io.znormalize(ts) for ts in series]
            pairs = _build_graph_pairs(series)
            path = out / f"{dataset.name}_{split.upper()}.vg"
            visibility.write_graphs(path, pairs)
            manifest["splits"][split] = {
                "graphs": len(pairs),
                "edges": int(sum(g.num_edges for g, _ in pairs)),
                "file": path.name,
                "sha256": _sha256(path),
            }
        _write_json(out / "manifest.json", manifest)
        click.echo(f"wrote {manifest['splits']['train']['graphs']} train / "
                   f"{manifest['splits']['test']['graphs']} test graphs to {out}")


@main.command("train")
@click.option("--train", "train_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--test", "test_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--seed", type=int, default=0, show_default=True)
@_config_options
def cmd_train(train_path, test_path, out_dir, seed, **cfg):
    """Train one model and save a checkpoint plus its loss history."""
    config = _make_config(seed=seed, **cfg)
    dataset = _load_dataset(train_path, test_path)
    with _output_dir(out_dir) as out:
        corpus = _cached_corpus(dataset, config, train_path, test_path)
        try:
            result = pipeline.train(config, corpus)
        except pipeline.TrainingDivergedError as exc:
            raise click.ClickException(str(exc))
        neural.save_checkpoint(out / "checkpoint.json", result.params, seed)
        _write_json(out / "loss_history.json",
                    {"config": config.to_dict(), "loss_history": result.loss_history})
        metrics = pipeline.evaluate(result.params, corpus.test, config,
                                    num_classes=corpus.num_classes)
        _write_json(out / "eval.json", metrics.to_dict())
        click.echo(f"final train loss {result.loss_history[-1]:.4f}; "
                   f"test accuracy {metrics.accuracy:.2f}, macro f1 {metrics.f1:.2f}")


@main.command("evaluate")
@click.option("--train", "train_path", required=True, type=click.Path(exists=True, dir_okay=False),
              help="train split (fixes the label mapping)")
@click.option("--test", "test_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--checkpoint", "ckpt_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", type=click.Path(file_okay=False))
@_config_options
def cmd_evaluate(train_path, test_path, ckpt_path, out_dir, **cfg):
    """Evaluate a saved checkpoint on the test split."""
    config = _make_config(**cfg)
    dataset = _load_dataset(train_path, test_path)
    params, _ = neural.load_checkpoint(ckpt_path)
    if params.num_classes != dataset.num_classes:
        raise click.ClickException(
            f"checkpoint was trained for {params.num_classes} classes but "
            f"{dataset.name} has {dataset.num_classes}")
    corpus = _cached_corpus(dataset, config, train_path, test_path)
    metrics = pipeline.evaluate(params, corpus.test, config,
                                num_classes=corpus.num_classes)
    for name in pipeline.METRIC_NAMES:
        click.echo(f"{name:<12}{getattr(metrics, name):>8.2f}")
    if out_dir:
        with _output_dir(out_dir) as out:
            _write_json(out / "eval.json", metrics.to_dict())


@main.command("run")
@click.option("--train", "train_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--test", "test_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--seeds", default="0", show_default=True,
              help="comma-separated seed list or a count prefixed with 'n' (n30)")
@_config_options
def cmd_run(train_path, test_path, out_dir, seeds, **cfg):
    """Multi-seed experiment: train+test per seed, report mean and std."""
    config = _make_config(**cfg)
    try:
        seed_list = ([int(s) for s in seeds.split(",")] if not seeds.startswith("n")
                     else list(range(int(seeds[1:]))))
    except ValueError:
        raise click.UsageError(f"cannot parse seed list {seeds!r}")
    dataset = _load_dataset(train_path, test_path)
    with _output_dir(out_dir) as out:
        corpus = _cached_corpus(dataset, config, train_path, test_path)
        start = time.perf_counter()
        summary = pipeline.multi_seed_run(config, corpus, seed_list)
        payload = summary.to_dict()
        payload["wall_clock_total"] = time.perf_counter() - start
        payload["build"] = _git_describe()
        payload["created"] = time.strftime("%Y-%m-%dT%H:%M:%S")
        _write_json(out / "report.json", payload)
        click.echo(f"dataset {summary.dataset}: {len(seed_list)} seeds")
        _print_metrics_table(summary.aggregates)


@main.command("search")
@click.option("--train", "train_paths", required=True, multiple=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--test", "test_paths", required=True, multiple=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--trials", type=int, default=10, show_default=True)
@click.option("--search-seed", type=int, default=0, show_default=True)
@_config_options
def cmd_search(train_paths, test_paths, out_dir, trials, search_seed, **cfg):
    """Random hyperparameter search over the fixed grid."""
    if len(train_paths) != len(test_paths):
        raise click.UsageError("need one --test per --train")
    config = _make_config(**cfg)
    datasets = [( _dataset_name(tr), _load_dataset(tr, te))
                for tr, te in zip(train_paths, test_paths)]
    with _output_dir(out_dir) as out:
        result = pipeline.random_search(pipeline.SEARCH_GRID, datasets,
                                        trials=trials, seed=search_seed,
                                        base_config=config)
        _write_json(out / "search_log.json",
                    {"grid": pipeline.SEARCH_GRID, "seed": search_seed,
                     "trials": result.trials})
        if result.best_config is None:
            raise click.ClickException("every search trial failed")
        _write_json(out / "best_config.json", result.best_config.to_dict())
        click.echo(f"best mean f1 {result.best_score:.4f} with "
                   f"nhid={result.best_config.nhid} lr={result.best_config.lr} "
                   f"epochs={result.best_config.epochs} "
                   f"batch_size={result.best_config.batch_size}")


@main.command("degree-dist")
@click.option("--train", "data_path", required=True, type=click.Path(exists=True, dir_okay=False),
              help="TSV split to read the series from")
@click.option("--index", type=int, default=0, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
def cmd_degree_dist(data_path, index, out_dir):
    """Export a series' degree histogram (log-log ready) and edge list."""
    try:
        series = series_io.parse_ucr_tsv(data_path)
    except (series_io.ParseError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    if not 0 <= index < len(series):
        click.echo(f"error: series index {index} out of range [0, {len(series)})", err=True)
        sys.exit(2)
    ts = series[index]
    graph = visibility.build_nvg_dc(ts.values, series_id=ts.id)
    hist = visibility.degree_distribution(graph)
    with _output_dir(out_dir) as out:
        csv_path = out / f"degree_dist_{index}.csv"
        with open(csv_path, "w", encoding="ascii", newline="\n") as fh:
            fh.write("degree,count,log10_degree,log10_count\n")
            for deg in sorted(hist):
                cnt = hist[deg]
                log_deg = repr(float(np.log10(deg))) if deg else "nan"
                fh.write(f"{deg},{cnt},{log_deg},{float(np.log10(cnt))!r}\n")
        edge_path = out / f"edges_{index}.txt"
        with open(edge_path, "w", encoding="ascii", newline="\n") as fh:
            for i, j in graph.edge_array():
                fh.write(f"{i} {j}\n")
        feats = gfeat.node_feature_matrix(graph)
        gfeat.write_feature_csv(out / f"features_{index}.csv", feats)
        click.echo(f"n={graph.n} edges={graph.num_edges} "
                   f"max_degree={max(hist)} distinct_degrees={len(hist)}")


if __name__ == "__main__":
    main()
