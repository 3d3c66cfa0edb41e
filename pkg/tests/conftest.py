import os
from pathlib import Path

import numpy as np
import pytest

from vgnet.synthetic import SERIES_FAMILIES


def locate_ucr_dataset(name: str) -> Path | None:
    """Find <name>_TRAIN.tsv / <name>_TEST.tsv under UCR_DATA_DIR or ./data."""
    roots = []
    env = os.environ.get("UCR_DATA_DIR")
    if env:
        roots.append(Path(env))
    roots.append(Path(__file__).resolve().parent.parent / "data")
    for root in roots:
        for base in (root / name, root):
            if (base / f"{name}_TRAIN.tsv").exists() and (base / f"{name}_TEST.tsv").exists():
                return base
    return None


def require_ucr(name: str) -> Path:
    base = locate_ucr_dataset(name)
    if base is None:
        pytest.skip(f"UCR dataset {name} not available; set UCR_DATA_DIR to run")
    return base


def random_series_corpus(count: int, rng: np.random.Generator,
                         min_len: int = 2, max_len: int = 256):
    """Mixed series from the four generator families, round-robin."""
    families = list(SERIES_FAMILIES.values())
    for i in range(count):
        n = int(rng.integers(min_len, max_len + 1))
        yield families[i % len(families)](rng, n)
