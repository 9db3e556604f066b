#!/usr/bin/env python3
"""Generate a small random benchmark scenario and replay it.

Writes factor matrices, a sparse label vector, an update stream, and a
penalty matrix into a directory (default ./demo_scenario), then runs the
regression, spline, lowrank, and baseline solvers over the stream with the
exact oracles enabled and prints where the CSV reports landed.

    python3 scripts/run_demo.py [output-dir]
"""

import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from kronsketch.bench import Scenario, replay, report, save_matrix, save_sparse_vector
from kronsketch.linalg import SparseVector


def main():
    out_dir = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_scenario")
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(2024)

    factor_paths = []
    for i in range(3):
        path = out_dir / f"factor{i}.kmat"
        save_matrix(path, rng.standard_normal((8, 2)))
        factor_paths.append(str(path))
    save_matrix(out_dir / "delta.kmat", 0.25 * rng.standard_normal((8, 2)))
    save_sparse_vector(
        out_dir / "label.spvec", SparseVector.from_dense(rng.standard_normal(512))
    )
    save_sparse_vector(
        out_dir / "label_delta.spvec",
        SparseVector(512, rng.choice(512, 8, replace=False), rng.standard_normal(8)),
    )
    L = np.zeros((7, 8))
    for i in range(7):
        L[i, i] = 1.0
        L[i, i + 1] = -1.0
    save_matrix(out_dir / "penalty.kmat", L)
    (out_dir / "stream.txt").write_text(
        "Q\nU 2 delta.kmat\nQ\nB label_delta.spvec\nQ\nU 1 delta.kmat\nQ\n"
    )

    common = dict(
        factors=factor_paths,
        label=str(out_dir / "label.spvec"),
        stream=str(out_dir / "stream.txt"),
        oracle=True,
        eps=0.5,
        seed=7,
    )
    runs = {
        "regression": Scenario(solver="regression", cfactor=0.05, delta=0.1, **common),
        "spline": Scenario(
            solver="spline", cbase="osnap", tbase="tensorsrht", cfactor=0.25,
            spline_l=str(out_dir / "penalty.kmat"), lam=1.0, delta=0.1, **common,
        ),
        "lowrank": Scenario(
            solver="lowrank", cbase="osnap", tbase="tensorsrht", cfactor=1.0,
            rank=2, delta=0.1, **common,
        ),
        "baseline": Scenario(solver="baseline", delta=0.2, cfactor=1.0, **common),
    }
    for name, scenario in runs.items():
        records = replay(scenario)
        csv_path = out_dir / f"report_{name}.csv"
        report(records, csv_path)
        ratios = [f"{r.ratio:.4f}" for r in records if r.ratio is not None]
        print(f"{name:>10}: {csv_path}  query ratios: {', '.join(ratios)}")


if __name__ == "__main__":
    main()
