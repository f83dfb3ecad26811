"""Discrete code representation: relaxed logits, hard tables, stats, export.

A symbol's code is a sequence of ``code_length`` digits, each in
``{0 .. alphabet_size - 1}``.  During training codes live as trainable logits
of shape (vocab, code_length, alphabet); at inference they are frozen into a
``CodeTable`` of integer digits.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

LOGIT_INIT_STD = 0.01


@dataclass(frozen=True)
class CodeConfig:
    """Shape of the code system: vocab size, alphabet, length, embedding width."""

    vocab_size: int
    alphabet_size: int
    code_length: int
    code_embed_dim: int
    allow_lossy: bool = False

    def __post_init__(self):
        if self.vocab_size < 1:
            raise ValueError("vocab_size must be >= 1")
        if self.alphabet_size < 2:
            raise ValueError("alphabet_size must be >= 2")
        if self.code_length < 1:
            raise ValueError("code_length must be >= 1")
        if self.code_embed_dim < 1:
            raise ValueError("code_embed_dim must be >= 1")
        if not self.allow_lossy and self.code_space < self.vocab_size:
            raise ValueError(
                f"code space {self.code_space} cannot address {self.vocab_size} symbols; "
                "pass allow_lossy=True for a deliberately colliding configuration"
            )

    @property
    def code_space(self) -> int:
        return self.alphabet_size**self.code_length


def init_logits(cfg: CodeConfig, rng: np.random.Generator) -> Tensor:
    """Near-zero normal logits so initial relaxed codes are near-uniform."""
    data = rng.normal(0.0, LOGIT_INIT_STD, (cfg.vocab_size, cfg.code_length, cfg.alphabet_size))
    return Tensor(data, op="leaf", name="code_logits")


def tempering_softmax(logits: Tensor, tau: float) -> Tensor:
    """Relax logit rows into probability rows; tau -> 0 recovers hard argmax."""
    return ad.softmax_t(logits, tau)


def straight_through(relaxed: Tensor) -> Tensor:
    """Discretize relaxed rows: forward one_hot(argmax), backward identity.

    Rows must be valid probability vectors (nonnegative, summing to one).
    """
    _check_probability_rows(relaxed.data, "straight_through")
    return ad.straight_through(relaxed)


def _check_probability_rows(values: np.ndarray, op: str, tol: float = 1e-6) -> None:
    if np.any(values < -tol):
        raise ValueError(f"{op}: negative entries in probability rows")
    sums = values.sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > tol):
        raise ValueError(f"{op}: rows must sum to 1 within {tol}")


def entropy_regularizer(relaxed: Tensor) -> Tensor:
    """Total entropy -sum p*log(p) of all relaxed rows (0*log 0 counts as 0).

    Zero exactly when every row is one-hot; a uniform row contributes ln(K).
    """
    if np.any(relaxed.data < 0):
        raise ValueError("entropy_regularizer: negative entries")
    return -ad.tsum(ad.multiply(relaxed, ad.log(relaxed)))


@dataclass
class CodeTable:
    """Frozen symbol -> digit-sequence allocation."""

    symbols: list[str]
    codes: np.ndarray  # (vocab, code_length) int64
    alphabet_size: int

    def __post_init__(self):
        self.codes = np.asarray(self.codes, dtype=np.int64)
        if self.codes.ndim != 2 or self.codes.shape[0] != len(self.symbols):
            raise ValueError("codes must be (len(symbols), code_length)")
        if self.codes.size and (self.codes.min() < 0 or self.codes.max() >= self.alphabet_size):
            raise ValueError(f"digits must lie in [0, {self.alphabet_size})")

    @property
    def vocab_size(self) -> int:
        return len(self.symbols)

    @property
    def code_length(self) -> int:
        return self.codes.shape[1]

    def code_string(self, i: int) -> str:
        return "-".join(str(d) for d in self.codes[i])


def extract_codes(logits: Tensor | np.ndarray, symbols: list[str] | None = None) -> CodeTable:
    """Hard table from logits: per-row argmax, lowest index on ties."""
    values = logits.data if isinstance(logits, Tensor) else np.asarray(logits)
    if values.ndim != 3:
        raise ValueError(f"expected (vocab, code_length, alphabet) logits, got {values.shape}")
    n, _, k = values.shape
    if symbols is None:
        symbols = [str(i) for i in range(n)]
    return CodeTable(symbols=list(symbols), codes=np.argmax(values, axis=-1), alphabet_size=k)


def save_code_table(table: CodeTable, path) -> None:
    """Text export, one `symbol d1-d2-...-dD` line per symbol under a #kd header."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(
            f"#kd K={table.alphabet_size} D={table.code_length} N={table.vocab_size}\n"
        )
        for i, sym in enumerate(table.symbols):
            fh.write(f"{sym} {table.code_string(i)}\n")


def load_code_table(path) -> CodeTable:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header.startswith("#kd "):
            raise ValueError(f"{path}: missing #kd header")
        fields = dict(part.split("=", 1) for part in header[4:].split())
        k, d, n = int(fields["K"]), int(fields["D"]), int(fields["N"])
        symbols, codes = [], []
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            sym, _, digits = line.partition(" ")
            parts = digits.split("-")
            if len(parts) != d:
                raise ValueError(f"{path}:{lineno}: expected {d} digits, got {len(parts)}")
            symbols.append(sym)
            codes.append([int(p) for p in parts])
    if len(symbols) != n:
        raise ValueError(f"{path}: header says N={n} but found {len(symbols)} rows")
    return CodeTable(symbols=symbols, codes=np.array(codes, dtype=np.int64), alphabet_size=k)


@dataclass(frozen=True)
class CodeSpaceStats:
    unique_codes: int
    utilization: float
    collisions: int


def code_space_stats(table: CodeTable, alphabet_size: int, code_length: int) -> CodeSpaceStats:
    """Occupancy of the K^D code space: unique codes, fill rate, collision count."""
    unique = len({tuple(row) for row in table.codes})
    space = alphabet_size**code_length
    return CodeSpaceStats(
        unique_codes=unique,
        utilization=unique / space,
        collisions=table.vocab_size - unique,
    )


def code_groups(table: CodeTable) -> dict[tuple[int, ...], list[int]]:
    """Symbol indices grouped by identical full code, insertion-ordered."""
    groups: dict[tuple[int, ...], list[int]] = {}
    for i, row in enumerate(table.codes):
        groups.setdefault(tuple(int(d) for d in row), []).append(i)
    return groups
