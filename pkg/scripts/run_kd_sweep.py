#!/usr/bin/env python3
"""Sweep one code-layer axis on a clustered synthetic reconstruction problem.

Each value gets a full fit + evaluation with a seed derived from (base seed,
position), so rerunning the script reproduces the table bit for bit.

Example:
    python3 scripts/run_kd_sweep.py --axis alphabet_size --values 4,8,16,32
    python3 scripts/run_kd_sweep.py --axis composer \
        --values linear-sum,linear-hidden,lstm --epochs 30
"""

import argparse

import numpy as np

from codepress.datasets import clustered_embeddings
from codepress.reporting import save_reports, text_table
from codepress.sweeps import SWEEP_AXES, SweepBase, sweep
from codepress.training import TrainConfig


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--axis", required=True, choices=SWEEP_AXES)
    ap.add_argument("--values", required=True, help="comma-separated axis values")
    ap.add_argument("--vocab-size", type=int, default=1000)
    ap.add_argument("--embed-dim", type=int, default=32)
    ap.add_argument("--clusters", type=int, default=20)
    ap.add_argument("--alphabet", type=int, default=16, help="K when not swept")
    ap.add_argument("--length", type=int, default=4, help="D when not swept")
    ap.add_argument("--digit-dim", type=int, default=32, help="d' when not swept")
    ap.add_argument("--epochs", type=int, default=20)
    ap.add_argument("--batch-size", type=int, default=128)
    ap.add_argument("--learning-rate", type=float, default=0.01)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="", help="also write reports as JSON lines")
    args = ap.parse_args()

    targets, _ = clustered_embeddings(
        args.vocab_size, args.embed_dim, args.clusters, np.random.default_rng(args.seed)
    )
    base = SweepBase(
        targets=targets,
        alphabet_size=args.alphabet,
        code_length=args.length,
        digit_dim=args.digit_dim,
        train=TrainConfig(
            epochs=args.epochs,
            batch_size=args.batch_size,
            learning_rate=args.learning_rate,
            seed=args.seed,
        ),
    )
    values = [
        raw.strip() if args.axis == "composer" else int(raw)
        for raw in args.values.split(",")
    ]
    reports = sweep(args.axis, values, base)
    if args.out:
        save_reports(args.out, reports)
    print(text_table(reports))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
