"""Configuration sweeps and the optimization-trick ablation ladder.

Each run in a sweep gets an independent seed derived from (base seed, run
index), so runs are reproducible individually and reorderable collectively.
A run that raises is recorded as a failure entry; the sweep carries on.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .codes import CodeConfig
from .composer import DEFAULT_HIDDEN_WIDTH, ComposerKind
from .guidance import GuidanceConfig
from .reporting import RunReport, build_report
from .tasks import ReconstructionTask
from .training import FitResult, TempSchedule, TrainConfig, fit

SWEEP_AXES = ("alphabet_size", "code_length", "digit_dim", "composer")


@dataclass(frozen=True)
class SweepBase:
    """Reference configuration a sweep perturbs one axis of."""

    targets: np.ndarray  # reconstruction targets (vocab, embed_dim)
    alphabet_size: int = 16
    code_length: int = 4
    digit_dim: int = 16
    composer: str = "linear-sum"
    hidden_width: int = DEFAULT_HIDDEN_WIDTH
    train: TrainConfig = field(default_factory=TrainConfig)
    allow_lossy: bool = True


def derived_seed(base_seed: int, index: int) -> int:
    """Deterministic per-run seed from the base seed and the run's index."""
    return int(np.random.SeedSequence([base_seed, index]).generate_state(1)[0])


def run_one(base: SweepBase, seed: int, **overrides) -> tuple[RunReport, FitResult]:
    """One fit+eval at the base configuration with the given field overrides."""
    settings = {
        "alphabet_size": base.alphabet_size,
        "code_length": base.code_length,
        "digit_dim": base.digit_dim,
        "composer": base.composer,
    }
    settings.update(overrides)
    task = ReconstructionTask(base.targets)
    code_cfg = CodeConfig(
        vocab_size=task.vocab_size,
        alphabet_size=int(settings["alphabet_size"]),
        code_length=int(settings["code_length"]),
        code_embed_dim=int(settings["digit_dim"]),
        allow_lossy=base.allow_lossy,
    )
    cfg = replace(base.train, seed=seed)
    pretrained = base.targets if cfg.guidance.mode == "pdg" else None
    result = fit(
        task,
        code_cfg,
        ComposerKind(settings["composer"]),
        cfg,
        hidden_width=base.hidden_width,
        pretrained=pretrained,
    )
    scores = result.evaluate()
    echo = {
        "family": "kd",
        "vocab_size": task.vocab_size,
        "embed_dim": task.embed_dim,
        "alphabet_size": code_cfg.alphabet_size,
        "code_length": code_cfg.code_length,
        "digit_dim": code_cfg.code_embed_dim,
        "extra_params": result.book.extra_param_count(),
        "composer": str(settings["composer"]),
        "seed": seed,
    }
    report = build_report(
        method=f"kd({settings['composer']})",
        config=echo,
        metrics={"val_loss": result.best_val, **scores},
        reconstruction_mse=scores.get("reconstruction_mse"),
    )
    return report, result


def sweep(axis: str, values, base: SweepBase) -> list[RunReport]:
    """Fit+eval once per axis value; failures become error-tagged reports."""
    if axis not in SWEEP_AXES:
        raise ValueError(f"axis must be one of {SWEEP_AXES}, got {axis!r}")
    reports: list[RunReport] = []
    for index, value in enumerate(values):
        seed = derived_seed(base.train.seed, index)
        try:
            report, _ = run_one(base, seed, **{axis: value})
            report.method = f"kd[{axis}={value}]"
        except Exception as exc:  # preserve partial results
            report = RunReport(
                method=f"kd[{axis}={value}] FAILED",
                config={"family": "kd", "axis": axis, "value": str(value), "error": str(exc)},
                params_count=0,
                bits=0,
                compression_ratio=0.0,
            )
        reports.append(report)
    return reports


# -- ablation ladder -----------------------------------------------------------

ABLATION_ORDER = (
    "cr",  # continuous relaxation only: no STE, constant tau, no entropy
    "cr_ste",  # + straight-through discretization
    "cr_ste_sched",  # + temperature schedule
    "cr_ste_sched_ent",  # + entropy regularization
    "pdg_no_autoencoder",  # + distillation guidance, autoencoder term off
    "pdg_full",  # + autoencoder term
)


def ablation_variants(base: TrainConfig) -> list[tuple[str, TrainConfig]]:
    """The cumulative trick ladder, all derived from one base TrainConfig."""
    constant = TempSchedule(kind="constant", tau_init=base.schedule.tau_init, tau_min=base.schedule.tau_init)
    decaying = base.schedule if base.schedule.kind == "exponential" else TempSchedule()
    no_guide = GuidanceConfig(mode="none")
    pdg_off = replace(base.guidance, mode="pdg", autoencoder=False)
    pdg_on = replace(base.guidance, mode="pdg", autoencoder=True)
    return [
        ("cr", replace(base, use_straight_through=False, schedule=constant,
                       entropy_weight=0.0, guidance=no_guide)),
        ("cr_ste", replace(base, use_straight_through=True, schedule=constant,
                           entropy_weight=0.0, guidance=no_guide)),
        ("cr_ste_sched", replace(base, use_straight_through=True, schedule=decaying,
                                 entropy_weight=0.0, guidance=no_guide)),
        ("cr_ste_sched_ent", replace(base, use_straight_through=True, schedule=decaying,
                                     guidance=no_guide)),
        ("pdg_no_autoencoder", replace(base, use_straight_through=True, schedule=decaying,
                                       guidance=pdg_off)),
        ("pdg_full", replace(base, use_straight_through=True, schedule=decaying,
                             guidance=pdg_on)),
    ]


def run_ablation(base: SweepBase) -> list[RunReport]:
    """Six-row report over the trick ladder on the base reconstruction task.

    All variants share the base seed, making the ladder a paired comparison.
    """
    reports = []
    for tag, cfg in ablation_variants(base.train):
        variant = replace(base, train=cfg)
        try:
            report, _ = run_one(variant, cfg.seed)
            report.method = tag
        except Exception as exc:
            report = RunReport(
                method=f"{tag} FAILED",
                config={"family": "kd", "variant": tag, "error": str(exc)},
                params_count=0,
                bits=0,
                compression_ratio=0.0,
            )
        reports.append(report)
    return reports
