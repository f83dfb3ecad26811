"""Command-line front end.

Subcommands:

* ``fit-codes``  — train codes + composer from a config file; writes the code
  table (text), the codebook (binary) and per-epoch metrics (JSON lines).
  Outputs are bit-reproducible for a fixed config.
* ``eval``       — score saved artifacts against an embedding file.
* ``baseline``   — run a comparison method on an embedding file.
* ``sweep``      — repeat fit-codes along one config axis.
* ``probe-codes`` — print symbols grouped by their learned code.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from .baselines import (
    evaluate_full,
    evaluate_low_rank,
    evaluate_pq,
    evaluate_scalar,
    pretrained_codes,
    random_codes,
)
from .codes import load_code_table, save_code_table
from .composer import compose_digits, load_codebook, save_codebook
from .configfile import build_code_config, build_train_config, describe_defaults, parse_config
from .datasets import clustered_embeddings, load_embeddings, make_vocab
from .metrics import code_semantics_probe, nn_overlap
from .reporting import build_report, save_reports, text_table, verify_accounting
from .sweeps import SWEEP_AXES, SweepBase, sweep
from .tasks import ReconstructionTask
from .training import fit


def _load_targets(settings: dict):
    """(symbols, target matrix) from the config's data section."""
    if settings["embeddings_path"]:
        vocab, matrix = load_embeddings(settings["embeddings_path"])
        return vocab.symbols, matrix
    rng = np.random.default_rng(settings["data_seed"])
    matrix, _ = clustered_embeddings(
        settings["vocab_size"],
        settings["embed_dim"],
        settings["synthetic_clusters"],
        rng,
        spread=settings["synthetic_spread"],
    )
    return make_vocab(settings["vocab_size"]).symbols, matrix


def _fit_from_settings(settings: dict):
    symbols, targets = _load_targets(settings)
    settings = dict(settings, vocab_size=targets.shape[0], embed_dim=targets.shape[1])
    task = ReconstructionTask(
        targets, val_fraction=settings["val_fraction"], split_seed=settings["data_seed"]
    )
    code_cfg = build_code_config(settings)
    train_cfg = build_train_config(settings)
    pretrained = targets if train_cfg.guidance.mode == "pdg" else None
    result = fit(
        task,
        code_cfg,
        settings["composer"],
        train_cfg,
        hidden_width=settings["hidden_width"],
        tie_output_gate=settings["tie_output_gate"],
        pretrained=pretrained,
        symbols=symbols,
    )
    return settings, task, result


def cmd_fit_codes(args) -> int:
    if args.help_config:
        print(describe_defaults())
        return 0
    if args.config is None:
        print("error: a config file is required (or --help-config)", file=sys.stderr)
        return 1
    settings = parse_config(args.config)
    settings, task, result = _fit_from_settings(settings)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_code_table(result.table, out / "codes.txt")
    save_codebook(result.book, out / "codebook.bin")
    with open(out / "metrics.jsonl", "w", encoding="utf-8") as fh:
        for record in result.history:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
    scores = result.evaluate()
    print(
        f"fit-codes: vocab={result.table.vocab_size} "
        f"K={result.table.alphabet_size} D={result.table.code_length} "
        f"best_val={result.best_val:.6f} "
        f"reconstruction_mse={scores['reconstruction_mse']:.6f} -> {out}"
    )
    return 0


def cmd_eval(args) -> int:
    start = time.perf_counter()
    table = load_code_table(args.codes)
    book = load_codebook(args.codebook)
    vocab, targets = load_embeddings(args.embeddings)
    if table.vocab_size != len(vocab):
        raise ValueError(
            f"code table covers {table.vocab_size} symbols, embeddings {len(vocab)}"
        )
    task = ReconstructionTask(targets)

    def embed_rows(ids):
        return compose_digits(table.codes[np.asarray(ids, dtype=np.int64)], book).data

    scores = task.evaluate(embed_rows)
    overlap = None
    if args.k > 0:
        overlap = nn_overlap(targets, embed_rows(np.arange(len(vocab))), args.k)
    echo = {
        "family": "kd",
        "vocab_size": table.vocab_size,
        "embed_dim": targets.shape[1],
        "alphabet_size": table.alphabet_size,
        "code_length": table.code_length,
        "digit_dim": book.digit_dim,
        "extra_params": book.extra_param_count(),
        "composer": book.kind.value,
    }
    report = build_report(
        method=f"kd({book.kind.value})",
        config=echo,
        metrics=scores,
        reconstruction_mse=scores["reconstruction_mse"],
        nn_overlap=overlap,
        wall_time_s=time.perf_counter() - start,
    )
    verify_accounting(report)
    if args.out:
        save_reports(args.out, [report])
    print(text_table([report]))
    return 0


def cmd_baseline(args) -> int:
    start = time.perf_counter()
    vocab, targets = load_embeddings(args.embeddings)
    n, d = targets.shape
    if args.method == "full":
        qr = evaluate_full(targets)
        echo = {"family": "full", "vocab_size": n, "embed_dim": d}
    elif args.method == "lowrank":
        qr = evaluate_low_rank(targets, args.rank, seed=args.seed)
        echo = {"family": "lowrank", "vocab_size": n, "embed_dim": d, "rank": args.rank}
    elif args.method == "pq":
        qr = evaluate_pq(targets, args.subspaces, args.centroids, np.random.default_rng(args.seed))
        echo = {
            "family": "pq",
            "vocab_size": n,
            "embed_dim": d,
            "subspaces": args.subspaces,
            "n_centroids": args.centroids,
        }
    elif args.method == "scalar":
        qr = evaluate_scalar(targets, args.bits)
        echo = {"family": "scalar", "vocab_size": n, "embed_dim": d, "bits_per_value": args.bits}
    elif args.method in ("random", "pretrained"):
        return _cmd_code_baseline(args, vocab, targets, start)
    else:
        raise ValueError(f"unknown baseline method {args.method!r}")
    overlap = nn_overlap(targets, qr.reconstruction, args.k) if args.k > 0 else None
    report = build_report(
        method=qr.method,
        config=echo,
        reconstruction_mse=qr.mse,
        nn_overlap=overlap,
        wall_time_s=time.perf_counter() - start,
    )
    verify_accounting(report)
    if args.out:
        save_reports(args.out, [report])
    print(text_table([report]))
    return 0


def _cmd_code_baseline(args, vocab, targets, start) -> int:
    """Frozen-random-code and two-stage pretrained-code baselines."""
    from .codes import CodeConfig
    from .training import TrainConfig

    n, d = targets.shape
    cfg = TrainConfig(epochs=args.epochs, seed=args.seed)
    if args.method == "random":
        table = random_codes(n, args.alphabet, args.length, args.seed, symbols=vocab.symbols)
        task = ReconstructionTask(targets)
        code_cfg = CodeConfig(n, args.alphabet, args.length, d, allow_lossy=True)
        result = fit(task, code_cfg, "linear-sum", cfg, frozen_table=table, symbols=vocab.symbols)
        tag = "random-codes"
    else:
        table, stage1 = pretrained_codes(
            targets, args.alphabet, args.length, "linear-sum", cfg=cfg, symbols=vocab.symbols
        )
        result = stage1
        tag = "pretrained-codes"
    scores = result.evaluate()
    echo = {
        "family": "kd",
        "vocab_size": n,
        "embed_dim": d,
        "alphabet_size": args.alphabet,
        "code_length": args.length,
        "digit_dim": result.book.digit_dim,
        "extra_params": result.book.extra_param_count(),
    }
    report = build_report(
        method=tag,
        config=echo,
        metrics=scores,
        reconstruction_mse=scores["reconstruction_mse"],
        wall_time_s=time.perf_counter() - start,
    )
    if args.out:
        save_reports(args.out, [report])
    print(text_table([report]))
    return 0


def cmd_sweep(args) -> int:
    settings = parse_config(args.config)
    symbols, targets = _load_targets(settings)
    settings = dict(settings, vocab_size=targets.shape[0], embed_dim=targets.shape[1])
    base = SweepBase(
        targets=targets,
        alphabet_size=settings["alphabet_size"],
        code_length=settings["code_length"],
        digit_dim=settings["digit_dim"],
        composer=settings["composer"],
        hidden_width=settings["hidden_width"],
        train=build_train_config(settings),
    )
    values = []
    for raw in args.values.split(","):
        raw = raw.strip()
        values.append(raw if args.axis == "composer" else int(raw))
    reports = sweep(args.axis, values, base)
    if args.out:
        save_reports(args.out, reports)
    print(text_table(reports))
    return 0


def cmd_probe_codes(args) -> int:
    table = load_code_table(args.codes)
    groups: dict[str, list[str]] = {}
    for i, sym in enumerate(table.symbols):
        groups.setdefault(table.code_string(i), []).append(sym)
    shown = 0
    for code in sorted(groups):
        members = groups[code]
        if args.collisions_only and len(members) < 2:
            continue
        print(f"{code}: {' '.join(members)}")
        shown += 1
        if args.max_groups and shown >= args.max_groups:
            print(f"... ({len(groups) - shown} more groups)")
            break
    if args.embeddings:
        vocab, matrix = load_embeddings(args.embeddings)
        if len(vocab) != table.vocab_size:
            raise ValueError("embedding file does not match the code table")
        probe = code_semantics_probe(table, matrix, np.random.default_rng(args.seed))
        if probe.available:
            print(
                f"intra-code cosine {probe.intra_mean:.4f} over {probe.intra_pairs} pairs; "
                f"global {probe.global_mean:.4f} +/- {probe.global_se:.4f} "
                f"({probe.excess_in_se_units:.1f} se above global)"
            )
        else:
            print("code semantics probe: N/A (no colliding codes)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="codepress", description="Learn discrete codes that compress embedding layers."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit-codes", help="train codes + composer from a config file")
    p.add_argument("config", nargs="?", help="key=value config file")
    p.add_argument("--out-dir", default="run_out", help="artifact directory")
    p.add_argument("--help-config", action="store_true", help="list config keys and exit")
    p.set_defaults(func=cmd_fit_codes)

    p = sub.add_parser("eval", help="score saved artifacts against an embedding file")
    p.add_argument("--codes", required=True)
    p.add_argument("--codebook", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--k", type=int, default=10, help="neighborhood size for overlap (0 skips)")
    p.add_argument("--out", default="", help="write the report as JSON lines")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("baseline", help="run a comparison method")
    p.add_argument("method", choices=["full", "lowrank", "pq", "scalar", "random", "pretrained"])
    p.add_argument("--embeddings", required=True)
    p.add_argument("--rank", type=int, default=8)
    p.add_argument("--subspaces", type=int, default=2)
    p.add_argument("--centroids", type=int, default=64)
    p.add_argument("--bits", type=int, default=8)
    p.add_argument("--alphabet", type=int, default=16, help="K for code baselines")
    p.add_argument("--length", type=int, default=4, help="D for code baselines")
    p.add_argument("--epochs", type=int, default=25, help="training epochs for code baselines")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k", type=int, default=0, help="neighborhood size for overlap (0 skips)")
    p.add_argument("--out", default="", help="write the report as JSON lines")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("sweep", help="repeat fit-codes along one config axis")
    p.add_argument("config", help="key=value config file")
    p.add_argument("--axis", required=True, choices=SWEEP_AXES)
    p.add_argument("--values", required=True, help="comma-separated axis values")
    p.add_argument("--out", default="", help="write reports as JSON lines")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("probe-codes", help="print symbols grouped by learned code")
    p.add_argument("--codes", required=True)
    p.add_argument("--embeddings", default="", help="optional embeddings for similarity stats")
    p.add_argument("--max-groups", type=int, default=50)
    p.add_argument("--collisions-only", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_probe_codes)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
