#!/usr/bin/env python3
"""Side-by-side attack comparison on a leaky and a private fixture.

Builds one generator that memorizes its training data and one that never
saw it, runs the pairwise and distribution attacks on both, and prints
the origin-proportion tables. The leaky column should pin train near
1.0 at small cutoffs; the private column should hover near 1/3.

Usage:
    python3 scripts/run_leak_comparison.py
    python3 scripts/run_leak_comparison.py --n-train 200 --per-origin 100
"""

import argparse
import time

import numpy as np

from synthaudit import attack, fixtures, tensor_io
from synthaudit.attack import Direction
from synthaudit.tensor_io import Origin


def run_attacks(fx, per_origin, seed):
    cands = tensor_io.build_candidate_set(
        fx.train, fx.val, fx.test, per_origin=per_origin, seed=seed
    )
    pairwise = attack.min_distances(cands, fx.synthetic)
    threshold = attack.neighbor_threshold(cands, fx.synthetic, 1.0)
    dist = attack.cluster_sizes(cands, fx.synthetic, threshold)
    return {
        "pairwise": (pairwise.min_distance, pairwise.origins, Direction.SMALLEST_FIRST),
        "distribution": (
            dist.neighbor_count.astype(np.float64),
            dist.origins,
            Direction.LARGEST_FIRST,
        ),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-train", type=int, default=1000)
    ap.add_argument("--n-val", type=int, default=400)
    ap.add_argument("--n-test", type=int, default=400)
    ap.add_argument("--per-origin", type=int, default=333)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    sizes = dict(n_train=args.n_train, n_val=args.n_val, n_test=args.n_test,
                 seed=args.seed)
    t0 = time.monotonic()
    runs = {
        "leaky": fixtures.make_leaky_fixture(epsilon=0.0, **sizes),
        "private": fixtures.make_private_fixture(shape=(1, 16, 16), **sizes),
    }
    per_origin = min(args.per_origin, args.n_train, args.n_val, args.n_test)
    cutoffs = sorted({min(50, per_origin), per_origin, 3 * per_origin})

    results = {name: run_attacks(fx, per_origin, args.seed * 1000 + 7)
               for name, fx in runs.items()}

    for kind in ("pairwise", "distribution"):
        print(f"\n== {kind} attack, top-k origin proportions ==")
        print(f"{'k':>6} | {'leaky train/val/test':>22} | {'private train/val/test':>23}")
        tables = {}
        for name in runs:
            scores, origins, direction = results[name][kind]
            tables[name] = attack.cutoff_table(scores, origins, cutoffs, direction)
        for i, k in enumerate(cutoffs):
            cells = []
            for name in runs:
                r = tables[name].rows[i]
                cells.append(f"{r.p_train:.2f} / {r.p_val:.2f} / {r.p_test:.2f}")
            print(f"{k:>6} | {cells[0]:>22} | {cells[1]:>23}")
        for name in runs:
            scores, origins, direction = results[name][kind]
            auc = attack.attack_auc(scores, origins, Origin.TRAIN, Origin.VAL,
                                    direction)
            print(f"  {name:>8} train-vs-val AUC: {auc:.3f}")

    print(f"\ndone in {time.monotonic() - t0:.1f}s")


if __name__ == "__main__":
    main()
