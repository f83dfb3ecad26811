"""Flat key=value run configuration.

One setting per line, ``key = value``; blank lines and ``#`` comments are
ignored.  Unknown keys are rejected.  Every key has a default, so an empty
file is a valid configuration.  ``describe_defaults()`` renders the full
documented key table (also shown by ``codepress fit-codes --help-config``).
"""

from __future__ import annotations

from dataclasses import dataclass

from .codes import CodeConfig
from .guidance import GuidanceConfig
from .training import TempSchedule, TrainConfig


@dataclass(frozen=True)
class _Key:
    default: object
    help: str


DEFAULTS: dict[str, _Key] = {
    # data
    "embeddings_path": _Key("", "text embedding file to load as targets; empty -> synthetic"),
    "vocab_size": _Key(1000, "symbol count for synthetic targets"),
    "embed_dim": _Key(32, "embedding width d of the targets"),
    "synthetic_clusters": _Key(20, "cluster count for synthetic targets"),
    "synthetic_spread": _Key(0.1, "within-cluster noise scale for synthetic targets"),
    "data_seed": _Key(0, "seed for synthetic target generation"),
    "val_fraction": _Key(0.0, "fraction of symbols held out of training (0 = validate on all rows)"),
    # code shape
    "alphabet_size": _Key(16, "K: digit alphabet size"),
    "code_length": _Key(4, "D: digits per code"),
    "digit_dim": _Key(16, "d': width of each digit vector"),
    "allow_lossy": _Key(True, "permit K^D < vocab (colliding codes)"),
    # composer
    "composer": _Key("linear-sum", "linear-sum | linear-hidden | lstm"),
    "hidden_width": _Key(300, "hidden units for the linear-hidden composer"),
    "tie_output_gate": _Key(False, "lstm only: reuse the t-gate weights for the o-gate"),
    # optimization
    "epochs": _Key(50, "passes over the training split"),
    "batch_size": _Key(128, "minibatch size"),
    "learning_rate": _Key(0.001, "step size"),
    "optimizer": _Key("adam", "adam | sgd"),
    "grad_clip": _Key(5.0, "global gradient-norm cap (0 disables)"),
    "seed": _Key(0, "training seed (init, shuffling, masks)"),
    "use_straight_through": _Key(True, "discretize forward passes during training"),
    # temperature schedule
    "schedule_kind": _Key("exponential", "constant | exponential"),
    "tau_init": _Key(1.0, "starting softmax temperature"),
    "tau_min": _Key(0.1, "final softmax temperature"),
    "tau_horizon": _Key(0, "step reaching tau_min; 0 -> half the total steps"),
    # entropy regularization
    "entropy_weight": _Key(0.01, "weight on the relaxed-code entropy penalty"),
    "entropy_ramp_fraction": _Key(0.1, "fraction of steps to ramp the entropy weight in"),
    # guidance
    "guidance_mode": _Key("none", "none | odg | pdg"),
    "keep_prob": _Key(0.7, "odg: Bernoulli keep probability for the mixing mask"),
    "match_weight": _Key(1.0, "odg: weight of the match penalty (ramped in)"),
    "embed_weight": _Key(1.0, "pdg: weight on composed-vs-pretrained rows"),
    "logit_weight": _Key(1.0, "pdg: weight on code-logits-vs-encoder agreement"),
    "autoencoder": _Key(True, "pdg: include the autoencoder term"),
    "guidance_ramp_fraction": _Key(0.2, "odg: fraction of steps to ramp match_weight in"),
    "mask_per_symbol": _Key(False, "odg: one mask scalar per symbol instead of per coordinate"),
    "encoder_hidden": _Key(256, "pdg: encoder hidden width"),
}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _coerce(key: str, raw: str):
    default = DEFAULTS[key].default
    if isinstance(default, bool):
        low = raw.lower()
        if low in _TRUE:
            return True
        if low in _FALSE:
            return False
        raise ValueError(f"{key}: expected a boolean, got {raw!r}")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw


def parse_config(path) -> dict:
    """Read a key=value file onto the defaults; unknown keys are an error."""
    settings = {key: spec.default for key, spec in DEFAULTS.items()}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, _, raw = text.partition("=")
            key, raw = key.strip(), raw.strip()
            if key not in DEFAULTS:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                settings[key] = _coerce(key, raw)
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    return settings


def describe_defaults() -> str:
    width = max(len(k) for k in DEFAULTS)
    lines = []
    for key, spec in DEFAULTS.items():
        lines.append(f"{key.ljust(width)}  {str(spec.default):>12}  {spec.help}")
    return "\n".join(lines)


def build_code_config(settings: dict) -> CodeConfig:
    return CodeConfig(
        vocab_size=settings["vocab_size"],
        alphabet_size=settings["alphabet_size"],
        code_length=settings["code_length"],
        code_embed_dim=settings["digit_dim"],
        allow_lossy=settings["allow_lossy"],
    )


def build_guidance_config(settings: dict) -> GuidanceConfig:
    return GuidanceConfig(
        mode=settings["guidance_mode"],
        keep_prob=settings["keep_prob"],
        match_weight=settings["match_weight"],
        embed_weight=settings["embed_weight"],
        logit_weight=settings["logit_weight"],
        autoencoder=settings["autoencoder"],
        ramp_fraction=settings["guidance_ramp_fraction"],
        mask_per_symbol=settings["mask_per_symbol"],
        encoder_hidden=settings["encoder_hidden"],
    )


def build_train_config(settings: dict) -> TrainConfig:
    schedule = TempSchedule(
        kind=settings["schedule_kind"],
        tau_init=settings["tau_init"],
        tau_min=settings["tau_min"],
        horizon=settings["tau_horizon"],
    )
    return TrainConfig(
        epochs=settings["epochs"],
        batch_size=settings["batch_size"],
        learning_rate=settings["learning_rate"],
        optimizer=settings["optimizer"],
        schedule=schedule,
        entropy_weight=settings["entropy_weight"],
        entropy_ramp_fraction=settings["entropy_ramp_fraction"],
        guidance=build_guidance_config(settings),
        use_straight_through=settings["use_straight_through"],
        grad_clip=settings["grad_clip"],
        seed=settings["seed"],
    )
