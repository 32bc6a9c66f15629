"""
Seeded experiments, CSV learning curves and a K sweep
=====================================================

The harness runs batches of seeded policy-iteration runs from a flat config
file and writes per-run and aggregate CSVs. The same functionality is on the
command line::

    gmmqf run --config configs/mountain_car.cfg --out results/mc
    gmmqf sweep-k --config configs/mountain_car.cfg --k 5,20,50
    gmmqf validate-gradients --seed 0
"""

import tempfile
from pathlib import Path

from gmmqf.harness import compare_k_sweep, config_echo, load_config, run_experiment

cfg = load_config(Path(__file__).resolve().parent.parent / "configs" / "smoke.cfg")
print(config_echo(cfg))

with tempfile.TemporaryDirectory() as tmp:
    results = [
        run_experiment(cfg.replace(n_components=k), workers=1, out_dir=Path(tmp) / f"K{k}")
        for k in (2, 4)
    ]
    print((Path(tmp) / "K4" / "aggregate.csv").read_text())
    print(compare_k_sweep(results, window=(0, 2)).format())
