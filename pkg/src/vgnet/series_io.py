"""Ingestion of UCR-archive-format TSV datasets.

Files carry one series per line: an integer-valued raw label, then the
sample values, tab-separated.  Raw labels (which may be negative or sparse)
are densified by sorting the distinct labels ascending, so class ids are
stable across runs.  The archive's train/test split is preserved as-is.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np


class ParseError(ValueError):
    """Malformed TSV content; carries 1-based line and field positions."""

    def __init__(self, message: str, line: int, column: int | None = None):
        at = f"line {line}" if column is None else f"line {line}, column {column}"
        super().__init__(f"{message} ({at})")
        self.line = line
        self.column = column


@dataclass(eq=False)
class TimeSeries:
    """One labeled univariate series.

    ``label`` holds the raw archive label after parsing and the dense class
    id once the series is part of a :class:`Dataset`.
    """

    id: int
    label: int
    values: np.ndarray


@dataclass(eq=False)
class Dataset:
    name: str
    train: list[TimeSeries]
    test: list[TimeSeries]
    num_classes: int
    label_map: dict[int, int] = field(default_factory=dict)

    @property
    def all_series(self) -> list[TimeSeries]:
        return self.train + self.test


# Published UCR-2018 archive splits for the datasets this project targets:
# (train, test, length, classes).  Used to sanity-check ingestion.
UCR_ARCHIVE_STATS = {
    "Crop": (7200, 16800, 46, 24),
    "Earthquakes": (322, 139, 512, 2),
    "ECG200": (100, 100, 96, 2),
    "ECGFiveDays": (23, 861, 136, 2),
    "ElectricDevices": (8926, 7711, 96, 7),
    "NonInvasiveFetalECGThorax1": (1800, 1965, 750, 42),
    "NonInvasiveFetalECGThorax2": (1800, 1965, 750, 42),
    "Phoneme": (214, 1896, 1024, 39),
    "Strawberry": (613, 370, 235, 2),
    "TwoLeadECG": (23, 1139, 82, 2),
}


def parse_ucr_tsv(path) -> list[TimeSeries]:
    """Parse one split file into TimeSeries with raw labels, in file order.

    Rejects non-numeric tokens and NaN/Inf values, reporting the 1-based
    line and field position; a data line needs a label plus at least two
    values.  Mixed series lengths are accepted with a warning.
    """
    series: list[TimeSeries] = []
    lengths: set[int] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw_line in enumerate(fh, start=1):
            line = raw_line.strip()
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) < 3:
                raise ParseError(
                    f"expected a label and at least 2 values, got {len(fields)} fields",
                    lineno,
                )
            try:
                label = int(float(fields[0]))
            except ValueError:
                raise ParseError(f"non-numeric label {fields[0]!r}", lineno, 1) from None
            values = np.empty(len(fields) - 1, dtype=np.float64)
            for k, tok in enumerate(fields[1:], start=2):
                try:
                    v = float(tok)
                except ValueError:
                    raise ParseError(f"non-numeric value {tok!r}", lineno, k) from None
                if not np.isfinite(v):
                    raise ParseError(f"non-finite value {tok!r}", lineno, k)
                values[k - 2] = v
            lengths.add(values.size)
            series.append(TimeSeries(id=len(series), label=label, values=values))
    if len(lengths) > 1:
        warnings.warn(f"{path}: mixed series lengths {sorted(lengths)}", stacklevel=2)
    return series


def write_ucr_tsv(path, series_list) -> None:
    """Re-emit series in the archive TSV format (shortest exact decimals)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for ts in series_list:
            fh.write("\t".join([str(ts.label)] + [repr(float(v)) for v in ts.values]))
            fh.write("\n")


def load_dataset(train_path, test_path, name: str) -> Dataset:
    """Load both splits and assign dense class ids.

    Dense ids follow the ascending sort of the distinct raw labels seen in
    train and test together; an empty split is an error.
    """
    raw_train = parse_ucr_tsv(train_path)
    raw_test = parse_ucr_tsv(test_path)
    if not raw_train or not raw_test:
        raise ValueError(f"{name}: empty split (train={len(raw_train)}, test={len(raw_test)})")
    raw_labels = sorted({ts.label for ts in raw_train + raw_test})
    label_map = {raw: dense for dense, raw in enumerate(raw_labels)}
    if len(label_map) < 2:
        raise ValueError(f"{name}: needs at least 2 classes, found {len(label_map)}")

    def densify(split: list[TimeSeries]) -> list[TimeSeries]:
        return [TimeSeries(id=ts.id, label=label_map[ts.label], values=ts.values)
                for ts in split]

    return Dataset(name=name, train=densify(raw_train), test=densify(raw_test),
                   num_classes=len(label_map), label_map=label_map)


def znormalize(series: TimeSeries) -> TimeSeries:
    """Zero-mean, unit population-std copy; constant series become zeros.

    Centers and rescales twice: on ill-conditioned inputs (tiny spread at
    large magnitude) a single pass leaves cancellation residue in the mean
    and std, and the refinement pass restores idempotence to machine
    precision.
    """
    norm = series.values
    for _ in range(2):
        std = float(norm.std())
        if std < 1e-12:
            norm = np.zeros_like(norm)
            break
        norm = (norm - norm.mean()) / std
    return TimeSeries(id=series.id, label=series.label, values=norm)
