"""Synthetic series generators: four structural families plus a small
two-class dataset writer in the archive TSV format, so the full pipeline
can run (and be tested) without any external data.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np


def uniform_series(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.uniform(0.0, 1.0, n)


def gaussian_series(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.standard_normal(n)


def sinusoidal_series(rng: np.random.Generator, n: int) -> np.ndarray:
    freq = rng.uniform(1.0, 4.0)
    phase = rng.uniform(0.0, 2 * np.pi)
    t = np.arange(n)
    return np.sin(2 * np.pi * freq * t / max(n, 2) + phase) + 0.05 * rng.standard_normal(n)


def spiky_series(rng: np.random.Generator, n: int) -> np.ndarray:
    """Integer-valued baseline with sparse tall spikes.

    Exact small integers keep affine transforms exact in float64, which
    makes tie handling reproducible in invariance tests.
    """
    y = rng.integers(0, 3, n).astype(np.float64)
    n_spikes = max(1, n // 8)
    pos = rng.choice(n, size=min(n_spikes, n), replace=False)
    y[pos] += rng.integers(5, 40, pos.size).astype(np.float64)
    return y


SERIES_FAMILIES = {
    "uniform": uniform_series,
    "gaussian": gaussian_series,
    "sinusoidal": sinusoidal_series,
    "spiky": spiky_series,
}


def two_class_series(rng: np.random.Generator, n: int, label: int) -> np.ndarray:
    """Class 0: smooth sinusoid; class 1: spiky bursts.

    The two produce visibility graphs with very different hub structure,
    so the classifier has real signal to learn.
    """
    if label == 0:
        return sinusoidal_series(rng, n)
    return spiky_series(rng, n) + 0.1 * rng.standard_normal(n)


def write_synthetic_ucr(out_dir, name: str, n_train: int = 24, n_test: int = 24,
                        length: int = 64, seed: int = 0) -> tuple[Path, Path]:
    """Emit <name>_TRAIN.tsv / <name>_TEST.tsv with balanced binary labels
    (raw labels -1 and 1, mirroring the archive's binary sets)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    paths = []
    for split, count in (("TRAIN", n_train), ("TEST", n_test)):
        path = out_dir / f"{name}_{split}.tsv"
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for i in range(count):
                label = i % 2
                values = two_class_series(rng, length, label)
                raw = -1 if label == 0 else 1
                fh.write("\t".join([str(raw)] + [repr(float(v)) for v in values]))
                fh.write("\n")
        paths.append(path)
    return paths[0], paths[1]
