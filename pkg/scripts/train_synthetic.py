#!/usr/bin/env python3
"""End-to-end demo: generate a synthetic dataset, train, evaluate, and
dump congruity maps for the first dev sample.

Usage: python scripts/train_synthetic.py [workdir]
"""

import json
import sys
import time
from pathlib import Path

from congruity.config import Config
from congruity.dump import dump_congruity
from congruity.synth import SyntheticSpec, write_synthetic
from congruity.data import load_manifest
from congruity.train import evaluate_checkpoint, train


def main() -> int:
    workdir = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("runs/synthetic")
    workdir.mkdir(parents=True, exist_ok=True)

    train_manifest, _ = write_synthetic(SyntheticSpec(count=256, seed=7), workdir / "train")
    dev_manifest, _ = write_synthetic(SyntheticSpec(count=128, seed=8), workdir / "dev")
    train_set = load_manifest(train_manifest)
    dev_set = load_manifest(dev_manifest)

    config = Config(d=32, h=4, lr=1e-3, seed=1, max_epochs=200,
                    early_stop_patience=15).validate()
    started = time.perf_counter()
    checkpoint = train(config, train_set, dev_set)
    elapsed = time.perf_counter() - started

    checkpoint.save(workdir / "model.hcec")
    metrics = evaluate_checkpoint(checkpoint, dev_set)
    print(json.dumps({"dev": metrics.to_dict(), "best_epoch": checkpoint.epoch,
                      "seconds": round(elapsed, 1)}, sort_keys=True))

    dump_congruity(checkpoint, dev_set[0], workdir / "dev0_congruity.csv")
    print(f"wrote {workdir / 'model.hcec'} and {workdir / 'dev0_congruity.csv'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
