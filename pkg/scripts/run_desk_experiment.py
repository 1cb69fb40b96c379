#!/usr/bin/env python3
"""End-to-end desk-scale experiment: simulate, train (mixed and ill-posed),
retrieve and evaluate, all through the CLI with the shipped presets.

Usage:
    python scripts/run_desk_experiment.py [workdir]

Artifacts land under ``workdir`` (default ./desk_experiment): datasets,
checkpoints, the training report, TES tables and the evaluation bundle.
"""

import sys
import time
from pathlib import Path

from lwirsep.cli import main

REPO = Path(__file__).resolve().parents[1]


def run(argv):
    print(f"$ lwirsep {' '.join(argv)}", flush=True)
    code = main(argv)
    if code != 0:
        sys.exit(code)


def main_script():
    work = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("desk_experiment")
    work.mkdir(parents=True, exist_ok=True)
    data = work / "data"
    t0 = time.time()

    run(["simulate", "--config", str(REPO / "configs/desk_simulate.cfg"),
         "--out", str(data), "--force"])
    run(["train", "--config", str(REPO / "configs/desk_train.cfg"),
         "--data", str(data), "--out", str(work / "mixed"),
         "--log-every", "10", "--force"])
    run(["train", "--config", str(REPO / "configs/desk_train.cfg"),
         "--data", str(data), "--out", str(work / "ill_posed"),
         "--mode", "ill-posed", "--log-every", "10", "--force"])
    run(["retrieve", "--checkpoint", str(work / "mixed/best.ckpt"),
         "--data", str(data / "field.lwirds"), "--out", str(work / "tes_field"),
         "--criterion", "mae+norm", "--force"])
    run(["retrieve", "--checkpoint", str(work / "mixed/best.ckpt"),
         "--data", str(data / "simulated.lwirds"), "--out", str(work / "tes_sim"),
         "--criterion", "mae", "--force"])
    run(["evaluate", "--checkpoint", str(work / "mixed/best.ckpt"),
         "--data", str(data), "--out", str(work / "eval"), "--force"])

    print(f"\ndone in {(time.time() - t0) / 60:.1f} min; artifacts in {work}/")


if __name__ == "__main__":
    main_script()
