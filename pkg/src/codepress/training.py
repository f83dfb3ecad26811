"""End-to-end code learning: relax -> discretize -> compose -> task loss.

Per batch the trainer wires

    rows   = gather(code logits, batch symbols)
    relaxed = softmax(rows / tau)
    sel    = straight_through(relaxed)        # optional but on by default
    v      = compose(sel, codebook)
    loss   = task(v or guidance-mixed v) + gamma_t * entropy + guidance terms

then takes one optimizer step on every parameter group (code logits, codebook,
task parameters, guidance parameters).  Logit and continuous-table updates are
row-sparse: symbols absent from a batch are untouched.  Checkpointing keeps
the parameters with the lowest validation loss under *hard* codes, which is
exactly the inference regime.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .codes import CodeConfig, CodeTable, entropy_regularizer, extract_codes, init_logits
from .composer import (
    DEFAULT_HIDDEN_WIDTH,
    CodeBook,
    ComposerKind,
    compose_digits,
    compose_relaxed,
    init_codebook,
)
from .guidance import (
    GuidanceConfig,
    autoencoder_loss,
    distillation_loss,
    draw_mix_mask,
    init_encoder,
    odg_match_penalty,
    odg_mix,
)

SCHEDULE_KINDS = ("constant", "exponential")
OPTIMIZER_KINDS = ("adam", "sgd")
AUTO_HORIZON = 0  # sentinel: resolve to half the total steps at fit time


@dataclass(frozen=True)
class TempSchedule:
    """Temperature as a function of the global step."""

    kind: str = "exponential"
    tau_init: float = 1.0
    tau_min: float = 0.1
    horizon: int = AUTO_HORIZON  # step at which tau_min is reached

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise ValueError(f"schedule kind must be one of {SCHEDULE_KINDS}")
        if not self.tau_init >= self.tau_min > 0:
            raise ValueError("need tau_init >= tau_min > 0")
        if self.horizon < 0:
            raise ValueError("horizon must be >= 0")

    def temperature(self, step: int) -> float:
        if step < 0:
            raise ValueError("step must be >= 0")
        if self.kind == "constant":
            return self.tau_init
        if step >= self.horizon or self.tau_init == self.tau_min:
            return self.tau_min
        # geometric interpolation: tau_init * r^step with r = (tau_min/tau_init)^(1/horizon)
        return self.tau_init * (self.tau_min / self.tau_init) ** (step / self.horizon)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 128
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    schedule: TempSchedule = field(default_factory=TempSchedule)
    entropy_weight: float = 0.01
    entropy_ramp_fraction: float = 0.1
    guidance: GuidanceConfig = field(default_factory=GuidanceConfig)
    use_straight_through: bool = True
    grad_clip: float = 5.0
    seed: int = 0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.optimizer not in OPTIMIZER_KINDS:
            raise ValueError(f"optimizer must be one of {OPTIMIZER_KINDS}")
        if self.entropy_weight < 0 or not 0 <= self.entropy_ramp_fraction <= 1:
            raise ValueError("invalid entropy settings")


class Sgd:
    """Plain gradient step; sparse rows behave identically to dense here."""

    def __init__(self, params: dict[str, Tensor], lr: float):
        self.params = params
        self.lr = lr

    def step(self, grads: dict[str, np.ndarray], rows: dict[str, np.ndarray] | None = None):
        rows = rows or {}
        for name, p in self.params.items():
            if name in rows:
                r = rows[name]
                p.data[r] -= self.lr * grads[name][r]
            else:
                p.data -= self.lr * grads[name]


class Adam:
    """Adaptive-moment optimizer with lazy row updates for large tables.

    For a parameter listed in ``rows`` only the given rows advance (their
    first/second moments and values); all other rows stay bit-identical.
    Bias correction uses the global step count.
    """

    def __init__(self, params: dict[str, Tensor], lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.t = 0

    def step(self, grads: dict[str, np.ndarray], rows: dict[str, np.ndarray] | None = None):
        rows = rows or {}
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for name, p in self.params.items():
            g = grads[name]
            if name in rows:
                r = rows[name]
                self.m[name][r] = self.beta1 * self.m[name][r] + (1 - self.beta1) * g[r]
                self.v[name][r] = self.beta2 * self.v[name][r] + (1 - self.beta2) * g[r] ** 2
                update = (self.m[name][r] / c1) / (np.sqrt(self.v[name][r] / c2) + self.eps)
                p.data[r] -= self.lr * update
            else:
                self.m[name] = self.beta1 * self.m[name] + (1 - self.beta1) * g
                self.v[name] = self.beta2 * self.v[name] + (1 - self.beta2) * g**2
                update = (self.m[name] / c1) / (np.sqrt(self.v[name] / c2) + self.eps)
                p.data -= self.lr * update


def _ramp(step: int, ramp_steps: int) -> float:
    if ramp_steps <= 0:
        return 1.0
    return min(1.0, step / ramp_steps)


class Trainer:
    """Owns the parameter groups and runs seeded epochs over one task."""

    def __init__(
        self,
        task,
        code_cfg: CodeConfig,
        composer_kind: ComposerKind | str,
        cfg: TrainConfig,
        hidden_width: int = DEFAULT_HIDDEN_WIDTH,
        tie_output_gate: bool = False,
        pretrained: np.ndarray | None = None,
        frozen_table: CodeTable | None = None,
        symbols: list[str] | None = None,
    ):
        if code_cfg.vocab_size != task.vocab_size:
            raise ValueError("code config and task disagree on vocabulary size")
        g = cfg.guidance
        if g.mode == "pdg" and pretrained is None:
            raise ValueError("pdg guidance requires a pretrained embedding matrix")
        if g.mode == "pdg" and frozen_table is not None:
            raise ValueError("pdg guidance needs trainable code logits, not a frozen table")
        if pretrained is not None:
            pretrained = np.asarray(pretrained, dtype=np.float64)
            if pretrained.shape != (task.vocab_size, task.embed_dim):
                raise ValueError("pretrained matrix must be (vocab, embed_dim)")
        if frozen_table is not None and (
            frozen_table.vocab_size != code_cfg.vocab_size
            or frozen_table.alphabet_size != code_cfg.alphabet_size
            or frozen_table.code_length != code_cfg.code_length
        ):
            raise ValueError("frozen table does not match the code config")

        self.task = task
        self.code_cfg = code_cfg
        self.cfg = cfg
        self.rng = np.random.default_rng(cfg.seed)
        self.symbols = symbols
        self.pretrained = pretrained
        self.frozen_table = frozen_table

        self.logits = None if frozen_table is not None else init_logits(code_cfg, self.rng)
        self.book = init_codebook(
            code_cfg.alphabet_size,
            code_cfg.code_length,
            code_cfg.code_embed_dim,
            task.embed_dim,
            composer_kind,
            self.rng,
            hidden_width=hidden_width,
            tie_output_gate=tie_output_gate,
        )
        self.u_table = None
        self.encoder = None
        if g.mode == "odg":
            scale = 1.0 / np.sqrt(task.embed_dim)
            self.u_table = Tensor(
                self.rng.uniform(-scale, scale, (task.vocab_size, task.embed_dim)),
                name="odg_u",
            )
        elif g.mode == "pdg":
            self.encoder = init_encoder(
                task.embed_dim,
                code_cfg.alphabet_size,
                code_cfg.code_length,
                self.rng,
                hidden=g.encoder_hidden,
            )

        self.params: dict[str, Tensor] = {}
        if self.logits is not None:
            self.params["code_logits"] = self.logits
        self.params.update(self.book.parameters())
        self.params.update(task.parameters())
        if self.u_table is not None:
            self.params["odg_u"] = self.u_table
        if self.encoder is not None:
            self.params.update(self.encoder.parameters())

        if cfg.optimizer == "adam":
            self.opt = Adam(
                self.params, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps
            )
        else:
            self.opt = Sgd(self.params, cfg.learning_rate)

        n_train = len(getattr(task, "train_ids"))
        steps_per_epoch = max(1, math.ceil(n_train / cfg.batch_size))
        self.total_steps = max(1, cfg.epochs * steps_per_epoch)
        sched = cfg.schedule
        if sched.kind == "exponential" and sched.horizon == AUTO_HORIZON:
            sched = replace(sched, horizon=max(1, self.total_steps // 2))
        self.schedule = sched
        self.entropy_ramp_steps = math.ceil(cfg.entropy_ramp_fraction * self.total_steps)
        self.guidance_ramp_steps = math.ceil(g.ramp_fraction * self.total_steps)

        self.step = 0
        self.history: list[dict] = []
        self.aborted = False
        self.last_grad_norms: dict[str, float] = {}
        self._last_good = self._snapshot()

    # -- parameter snapshots ------------------------------------------------

    def _snapshot(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.params.items()}

    def _restore(self, snap: dict[str, np.ndarray]) -> None:
        for name, p in self.params.items():
            p.data = snap[name].copy()

    # -- inference-mode embeddings ------------------------------------------

    def current_table(self) -> CodeTable:
        if self.frozen_table is not None:
            return self.frozen_table
        return extract_codes(self.logits, self.symbols)

    def embed_rows_hard(self, indices: np.ndarray) -> np.ndarray:
        """Inference-regime rows: hard codes through the composer, no mixing."""
        digits = self.current_table().codes[np.asarray(indices, dtype=np.int64)]
        return compose_digits(digits, self.book).data

    def validate(self) -> float:
        return self.task.validation_loss(self.embed_rows_hard)

    # -- one training epoch ---------------------------------------------------

    def _batch_loss(self, batch, tau: float):
        """Assemble the full scalar loss for one batch; returns bookkeeping."""
        cfg, g = self.cfg, self.cfg.guidance
        n_sym = batch.symbols.size
        if self.frozen_table is not None:
            v = compose_digits(self.frozen_table.codes[batch.symbols], self.book)
            relaxed = None
            logit_rows = None
        else:
            logit_rows = ad.gather_rows(self.logits, batch.symbols)
            relaxed = ad.softmax_t(logit_rows, tau)
            sel = ad.straight_through(relaxed) if cfg.use_straight_through else relaxed
            v = compose_relaxed(sel, self.book)

        entropy_val = 0.0
        guidance_val = 0.0
        task_input = v

        if g.mode == "odg":
            u_rows = ad.gather_rows(self.u_table, batch.symbols)
            mask = draw_mix_mask(
                (n_sym, self.task.embed_dim), g.keep_prob, self.rng, g.mask_per_symbol
            )
            task_input = odg_mix(u_rows, v, mask)
            lam = g.match_weight * _ramp(self.step, self.guidance_ramp_steps)
            penalty = ad.scale(odg_match_penalty(u_rows, v), 1.0 / n_sym)
            guidance_val = penalty.item()
            guidance_term = ad.scale(penalty, lam)
        elif g.mode == "pdg":
            u_batch = self.pretrained[batch.symbols]
            dist = distillation_loss(
                logit_rows, u_batch, self.encoder, self.book, tau,
                g.embed_weight, g.logit_weight,
            )
            total = dist
            if g.autoencoder:
                total = total + autoencoder_loss(u_batch, self.encoder, self.book, tau)
            guidance_term = ad.scale(total, 1.0 / n_sym)
            guidance_val = guidance_term.item()
        else:
            guidance_term = None

        loss = self.task.batch_loss(task_input, batch)
        task_val = loss.item()

        if relaxed is not None:
            entropy = ad.scale(entropy_regularizer(relaxed), 1.0 / n_sym)
            entropy_val = entropy.item()
            if cfg.entropy_weight > 0:
                gamma = cfg.entropy_weight * _ramp(self.step, self.entropy_ramp_steps)
                loss = loss + ad.scale(entropy, gamma)
        if guidance_term is not None:
            loss = loss + guidance_term
        return loss, task_val, entropy_val, guidance_val

    def train_epoch(self) -> dict:
        """One seeded-shuffled pass; returns the epoch's metrics record."""
        cfg = self.cfg
        sums = np.zeros(3)
        count = 0
        tau = self.schedule.temperature(self.step)
        for batch in self.task.train_batches(cfg.batch_size, self.rng):
            tau = self.schedule.temperature(self.step)
            try:
                loss, task_val, ent_val, guid_val = self._batch_loss(batch, tau)
                grads = ad.gradients(loss, self.params)
            except FloatingPointError:
                self.aborted = True
                self._restore(self._last_good)
                record = self._record(tau, sums, count, val=None, aborted=True)
                self.history.append(record)
                return record
            if cfg.grad_clip > 0:
                ad.global_norm_clip(grads, cfg.grad_clip)
            self.last_grad_norms = {
                name: float(np.sqrt((g * g).sum())) for name, g in grads.items()
            }
            rows = {}
            if "code_logits" in self.params:
                rows["code_logits"] = batch.symbols
            if "odg_u" in self.params:
                rows["odg_u"] = batch.symbols
            self.opt.step(grads, rows)
            sums += (task_val, ent_val, guid_val)
            count += 1
            self.step += 1
        val = self.validate()
        self._last_good = self._snapshot()
        record = self._record(tau, sums, count, val=val, aborted=False)
        self.history.append(record)
        return record

    def _record(self, tau, sums, count, val, aborted) -> dict:
        denom = max(count, 1)
        return {
            "step": self.step,
            "tau": float(tau),
            "task_loss": float(sums[0] / denom),
            "entropy": float(sums[1] / denom),
            "guidance_loss": float(sums[2] / denom),
            "val_metric": None if val is None else float(val),
            "aborted": aborted,
        }


@dataclass
class FitResult:
    table: CodeTable
    book: CodeBook
    task: object
    history: list[dict]
    best_val: float
    best_epoch: int
    aborted: bool
    u_table: Tensor | None = None

    def embed_rows(self, indices) -> np.ndarray:
        """Inference-mode embedding rows straight from the hard code table."""
        digits = self.table.codes[np.asarray(indices, dtype=np.int64)]
        return compose_digits(digits, self.book).data

    def embedding_matrix(self) -> np.ndarray:
        return self.embed_rows(np.arange(self.table.vocab_size))

    def evaluate(self) -> dict[str, float]:
        return self.task.evaluate(self.embed_rows)


def fit(
    task,
    code_cfg: CodeConfig,
    composer_kind: ComposerKind | str,
    cfg: TrainConfig,
    *,
    hidden_width: int = DEFAULT_HIDDEN_WIDTH,
    tie_output_gate: bool = False,
    pretrained: np.ndarray | None = None,
    frozen_table: CodeTable | None = None,
    symbols: list[str] | None = None,
) -> FitResult:
    """Train codes + composer + task end-to-end; keep the best-validation
    checkpoint (hard-code evaluation) and extract the final code table from it."""
    trainer = Trainer(
        task,
        code_cfg,
        composer_kind,
        cfg,
        hidden_width=hidden_width,
        tie_output_gate=tie_output_gate,
        pretrained=pretrained,
        frozen_table=frozen_table,
        symbols=symbols,
    )
    best_val = trainer.validate()
    best_epoch = 0
    best_snap = trainer._snapshot()
    for _ in range(cfg.epochs):
        record = trainer.train_epoch()
        if trainer.aborted:
            break
        if record["val_metric"] < best_val:
            best_val = record["val_metric"]
            best_epoch = len(trainer.history)
            best_snap = trainer._snapshot()
    trainer._restore(best_snap)
    return FitResult(
        table=trainer.current_table(),
        book=trainer.book,
        task=task,
        history=trainer.history,
        best_val=float(best_val),
        best_epoch=best_epoch,
        aborted=trainer.aborted,
        u_table=trainer.u_table,
    )
