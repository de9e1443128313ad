"""
MNIST at desk scale
===================

Builds IDX files from the 5000-image MNIST sample bundled with ``mlxtend``,
cuts a stratified 2000/500/1000 split and runs all seven strategies on a
784-64-64-10 network. Takes under two minutes on one core.
"""

import json
import sys
import tempfile
from pathlib import Path

from mlxtend.data import mnist_data

from dbnclass.data import RawDataset, write_idx
from dbnclass.experiment import ExperimentConfig, run_experiment

work = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp())
work.mkdir(parents=True, exist_ok=True)

X, y = mnist_data()
write_idx(RawDataset(X / 255.0, y, 10), work / "img.gz", work / "lab.gz", shape=(28, 28))

cfg = {
    "dataset": {"loader": "idx", "train": {"images": "img.gz", "labels": "lab.gz"},
                "subsample": 0.7, "split": [4 / 7, 1 / 7, 2 / 7]},
    "architecture": [784, 64, 64, 10],
    "hyper": {"pretrain_epochs": 10, "finetune_epochs": 30, "batch_size": 10, "mu0": 0.01},
    "strategies": ["DBN_FFN", "DBN_PLUS_LOSS", "EL_DBN", "EL_DBNOPT", "FFN_DBN", "FFN_DBNOPT", "BL"],
    "seeds": [0],
    "output_dir": "run",
}
(work / "cfg.json").write_text(json.dumps(cfg, indent=2))

run_experiment(ExperimentConfig.load(work / "cfg.json"), log=print)
print((work / "run" / "report.tsv").read_text())
