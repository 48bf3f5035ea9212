"""Hard / soft / MIDAS comparison over several training seeds."""
from __future__ import annotations

import csv
import io
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Iterable, List, Optional, Sequence

import numpy as np

from .synthdata import SynthConfig, gen_dataset, read_dataset, write_dataset
from .trainer import MODES, TrainConfig, evaluate, train

log = logging.getLogger(__name__)

DEFAULT_SEEDS = (0, 1, 2, 3, 4)
CSV_NAME = "ablation.csv"


def _run_one(args):
    train_set, test_set, config = args
    model, _ = train(train_set, config)
    report = evaluate(model, test_set)
    return config.mode, config.seed, report.uar, report.war


def ablation_rows(train_set, test_set, seeds: Sequence[int], base: TrainConfig, modes=MODES, jobs: int = 1) -> List[tuple]:
    """``(mode, seed, uar, war)`` for every mode and seed, then one median row per mode."""
    tasks = [(train_set, test_set, replace(base, mode=m, seed=int(s))) for m in modes for s in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_one, tasks))
    else:
        results = []
        for task in tasks:
            results.append(_run_one(task))
            log.info("mode=%s seed=%d uar=%.4f war=%.4f", *results[-1])
    rows = list(results)
    for m in modes:
        uars = [r[2] for r in results if r[0] == m]
        wars = [r[3] for r in results if r[0] == m]
        rows.append((m, "median", float(np.median(uars)), float(np.median(wars))))
    return rows


def rows_to_csv(rows: Iterable[tuple]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["mode", "seed", "uar", "war"])
    for mode, seed, uar, war in rows:
        writer.writerow([mode, seed, repr(float(uar)), repr(float(war))])
    return buf.getvalue()


def medians(rows: Iterable[tuple]) -> dict:
    """``{mode: (uar, war)}`` from the median rows."""
    return {m: (u, w) for m, s, u, w in rows if s == "median"}


def ablation_suite(
    out_dir,
    seeds: Sequence[int] = DEFAULT_SEEDS,
    synth: Optional[SynthConfig] = None,
    base: Optional[TrainConfig] = None,
    data_dir=None,
    jobs: int = 1,
) -> List[tuple]:
    """Train all four modes per seed and write ``ablation.csv`` under ``out_dir``.

    Uses the dataset at ``data_dir`` if given, otherwise generates one from
    ``synth`` into ``out_dir/data``.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if data_dir is None:
        manifest = gen_dataset(synth or SynthConfig())
        write_dataset(manifest, out_dir / "data")
    else:
        manifest = read_dataset(data_dir)
    rows = ablation_rows(manifest.split("train"), manifest.split("test"), seeds, base or TrainConfig(), jobs=jobs)
    (out_dir / CSV_NAME).write_text(rows_to_csv(rows), encoding="utf-8")
    return rows
