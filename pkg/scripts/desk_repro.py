#!/usr/bin/env python3
"""Desk-scale reproduction: reference hyperparameters (nhid=128, lr=1e-3,
epochs=250, batch=32) over 5 seeds on ECG200 and TwoLeadECG, with the
ablation ladder (feature normalization, degree readout, bidirectional
messages) tried in order if the base configuration misses the bar.

Needs the extracted archive: <data>/<Name>/<Name>_TRAIN.tsv etc.
"""

import argparse
import json
import time
from dataclasses import replace
from pathlib import Path

from vgnet import pipeline
from vgnet.pipeline import TrainConfig
from vgnet.series_io import load_dataset

BARS = {"ECG200": {"accuracy": 0.65, "f1": 0.60},
        "TwoLeadECG": {"accuracy": 0.80}}
BASE = TrainConfig(nhid=128, lr=1e-3, epochs=250, batch_size=32)
ABLATIONS = [BASE,
             replace(BASE, normalize_features=True),
             replace(BASE, readout="degree"),
             replace(BASE, direction="both")]


def find(data_dir: Path, name: str) -> Path:
    for base in (data_dir / name, data_dir):
        if (base / f"{name}_TRAIN.tsv").exists():
            return base
    raise SystemExit(f"cannot find {name} under {data_dir}")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--data", type=Path, required=True)
    ap.add_argument("--out", type=Path, default=Path("desk_repro_report.json"))
    ap.add_argument("--seeds", type=int, default=5)
    args = ap.parse_args()
    seeds = list(range(args.seeds))
    results = {}
    start = time.perf_counter()
    for name, bars in BARS.items():
        base = find(args.data, name)
        ds = load_dataset(base / f"{name}_TRAIN.tsv", base / f"{name}_TEST.tsv", name)
        for cfg in ABLATIONS:
            corpus = pipeline.prepare_corpus(ds, cfg)
            summary = pipeline.multi_seed_run(cfg, corpus, seeds)
            agg = summary.aggregates
            line = "  ".join(f"{m}={agg[m]['mean']:.3f}+-{agg[m]['std']:.3f}"
                             for m in pipeline.METRIC_NAMES)
            tag = (f"norm_feat={cfg.normalize_features} readout={cfg.readout} "
                   f"direction={cfg.direction}")
            print(f"{name} [{tag}]\n  {line}")
            results[name] = {"config": cfg.to_dict(), "aggregates": agg}
            if all(agg[m]["mean"] >= bar for m, bar in bars.items()):
                print(f"  -> meets the bar {bars}")
                break
        else:
            print(f"  -> BELOW the bar {bars} under every ablation")
    results["wall_clock"] = time.perf_counter() - start
    args.out.write_text(json.dumps(results, indent=1, sort_keys=True))
    print(f"total {results['wall_clock']:.0f}s; report at {args.out}")


if __name__ == "__main__":
    main()
