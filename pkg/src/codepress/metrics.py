"""Embedding quality metrics: neighborhood overlap and code semantics probe."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codes import CodeTable, code_groups


def _unit_rows(matrix: np.ndarray) -> np.ndarray:
    matrix = np.asarray(matrix, dtype=np.float64)
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    safe = np.where(norms > 0, norms, 1.0)
    return matrix / safe


def nn_overlap(reference: np.ndarray, candidate: np.ndarray, k: int) -> float:
    """Mean fraction of shared cosine top-k neighbors, self excluded.

    1.0 when the candidate preserves every neighborhood; about k/(N-1) for
    unrelated matrices.  Equal similarities break toward the lower index.
    """
    reference, candidate = np.asarray(reference), np.asarray(candidate)
    if reference.shape[0] != candidate.shape[0]:
        raise ValueError("matrices must describe the same symbols")
    n = reference.shape[0]
    if not 1 <= k < n:
        raise ValueError(f"k must lie in [1, {n - 1}], got {k}")

    def topk(matrix: np.ndarray) -> np.ndarray:
        unit = _unit_rows(matrix)
        sim = unit @ unit.T
        np.fill_diagonal(sim, -np.inf)
        return np.argsort(-sim, axis=1, kind="stable")[:, :k]

    ref_nn = topk(reference)
    cand_nn = topk(candidate)
    shared = sum(
        len(set(ref_nn[i]).intersection(cand_nn[i])) for i in range(n)
    )
    return shared / (n * k)


@dataclass(frozen=True)
class ProbeReport:
    """Cosine similarity inside shared-code groups vs between random pairs."""

    available: bool
    intra_mean: float = float("nan")
    intra_pairs: int = 0
    global_mean: float = float("nan")
    global_se: float = float("nan")
    global_pairs: int = 0

    @property
    def excess_in_se_units(self) -> float:
        """How many global standard errors the intra-code mean sits above the
        global mean; the headline statistic of the probe."""
        return (self.intra_mean - self.global_mean) / self.global_se


def code_semantics_probe(
    table: CodeTable,
    matrix: np.ndarray,
    rng: np.random.Generator,
    max_intra_pairs: int = 20000,
    global_pairs: int = 50000,
) -> ProbeReport:
    """Do symbols sharing one full code look alike in embedding space?

    Compares mean pairwise cosine within collision groups against a Monte
    Carlo estimate over uniformly random symbol pairs.  Reports unavailable
    when the table has no collisions.
    """
    unit = _unit_rows(matrix)
    n = unit.shape[0]
    if n != table.vocab_size:
        raise ValueError("embedding matrix and code table must align")

    intra: list[tuple[int, int]] = []
    for members in code_groups(table).values():
        if len(members) < 2:
            continue
        for a in range(len(members)):
            for b in range(a + 1, len(members)):
                intra.append((members[a], members[b]))
    if not intra:
        return ProbeReport(available=False)
    if len(intra) > max_intra_pairs:
        keep = rng.choice(len(intra), size=max_intra_pairs, replace=False)
        intra = [intra[i] for i in keep]
    ii, jj = np.array(intra).T
    intra_sims = (unit[ii] * unit[jj]).sum(axis=1)

    gi = rng.integers(0, n, global_pairs)
    gj = rng.integers(0, n - 1, global_pairs)
    gj = gj + (gj >= gi)  # uniform over pairs with i != j
    global_sims = (unit[gi] * unit[gj]).sum(axis=1)

    return ProbeReport(
        available=True,
        intra_mean=float(intra_sims.mean()),
        intra_pairs=len(intra),
        global_mean=float(global_sims.mean()),
        global_se=float(global_sims.std(ddof=1) / np.sqrt(global_pairs)),
        global_pairs=global_pairs,
    )
