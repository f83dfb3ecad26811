"""Comparison methods: low-rank factorization, product quantization, scalar
quantization, random codes, and two-stage pretrained codes.

Every method reports storage through the same accounting helpers as the coded
layer, so bit comparisons across methods are internally consistent.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import accounting, autodiff as ad
from .autodiff import Tensor
from .codes import CodeConfig, CodeTable, extract_codes
from .composer import CodeBook, ComposerKind
from .tasks import ReconstructionTask
from .training import Adam, FitResult, Sgd, TrainConfig, fit


# -- low-rank factorization ---------------------------------------------------


@dataclass
class LowRankFactors:
    a: np.ndarray  # (n, rank)
    b: np.ndarray  # (rank, dim)
    mse: float  # per-entry mean squared reconstruction error

    def reconstruct(self) -> np.ndarray:
        return self.a @ self.b


def low_rank_fit(
    matrix: np.ndarray,
    rank: int,
    iters: int = 4000,
    lr: float = 0.02,
    seed: int = 0,
    tol: float = 1e-12,
) -> LowRankFactors:
    """Fit U ~= A @ B by adaptive-moment gradient descent on the squared error.

    Stops early when the per-entry MSE improvement over 200 iterations falls
    below ``tol`` relative to the current value.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    n, d = matrix.shape
    if not 1 <= rank <= min(n, d):
        raise ValueError(f"rank must lie in [1, {min(n, d)}], got {rank}")
    rng = np.random.default_rng(seed)
    scale = 1.0 / np.sqrt(rank)
    a = Tensor(rng.normal(0.0, scale, (n, rank)), name="lowrank_a")
    b = Tensor(rng.normal(0.0, scale, (rank, d)), name="lowrank_b")
    params = {"a": a, "b": b}
    opt = Adam(params, lr)
    target = Tensor(matrix, op="leaf", name="lowrank_target")
    inv_size = 1.0 / matrix.size
    prev = None
    for t in range(iters):
        loss = ad.scale(ad.squared_error(a @ b, target), inv_size)
        mse = loss.item()
        if t % 200 == 0:
            if prev is not None and prev - mse <= tol * max(prev, 1e-30):
                break
            prev = mse
        grads = ad.gradients(loss, params)
        opt.step(grads)
    diff = a.data @ b.data - matrix
    return LowRankFactors(a=a.data, b=b.data, mse=float((diff * diff).mean()))


def low_rank_bits(n: int, d: int, rank: int) -> int:
    return accounting.FLOAT_BITS * (n * rank + rank * d)


# -- k-means and product quantization ------------------------------------------


@dataclass
class KMeansResult:
    centroids: np.ndarray  # (k, dim)
    assignments: np.ndarray  # (n,)
    inertia_history: list[float] = field(default_factory=list)

    @property
    def inertia(self) -> float:
        return self.inertia_history[-1]


def _kmeans_pp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Spread the initial centers: each next center is drawn with probability
    proportional to its squared distance from the chosen ones."""
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[int(rng.integers(n))]
    d2 = ((points - centers[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0.0:  # every point already coincides with a center
            centers[i] = points[int(rng.integers(n))]
            continue
        centers[i] = points[int(rng.choice(n, p=d2 / total))]
        d2 = np.minimum(d2, ((points - centers[i]) ** 2).sum(axis=1))
    return centers


def _nearest(points: np.ndarray, centers: np.ndarray) -> tuple[np.ndarray, float]:
    d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    assign = np.argmin(d2, axis=1)  # ties -> lowest index
    inertia = float(d2[np.arange(points.shape[0]), assign].sum())
    return assign, inertia


def lloyd_kmeans(
    points: np.ndarray,
    k: int,
    rng: np.random.Generator,
    max_iter: int = 25,
    tol: float = 1e-6,
) -> KMeansResult:
    """Lloyd iterations from a k-means++ start; inertia never increases.

    Stops on relative improvement below ``tol`` or after ``max_iter`` rounds.
    Clusters that lose all members keep their previous center.
    """
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    centers = _kmeans_pp_init(points, k, rng)
    history: list[float] = []
    prev = float("inf")
    assign = np.zeros(n, dtype=np.int64)
    for _ in range(max_iter):
        assign, inertia = _nearest(points, centers)
        history.append(inertia)
        if prev - inertia <= tol * max(prev, 1e-12):
            break
        prev = inertia
        for c in range(k):
            members = points[assign == c]
            if members.shape[0]:
                centers[c] = members.mean(axis=0)
    assign, inertia = _nearest(points, centers)
    history.append(inertia)
    return KMeansResult(centroids=centers, assignments=assign, inertia_history=history)


@dataclass
class PQResult:
    centroids: list[np.ndarray]  # one (k, block_width) array per subspace
    assignments: np.ndarray  # (n, subspaces)
    block_width: int

    @property
    def subspaces(self) -> int:
        return len(self.centroids)

    @property
    def n_centroids(self) -> int:
        return self.centroids[0].shape[0]

    def reconstruct(self) -> np.ndarray:
        return np.concatenate(
            [self.centroids[j][self.assignments[:, j]] for j in range(self.subspaces)],
            axis=1,
        )


def product_quantize(
    matrix: np.ndarray,
    subspaces: int,
    n_centroids: int,
    rng: np.random.Generator,
    max_iter: int = 25,
    tol: float = 1e-6,
) -> PQResult:
    """Split columns into contiguous blocks and k-means-quantize each block."""
    matrix = np.asarray(matrix, dtype=np.float64)
    n, d = matrix.shape
    if d % subspaces != 0:
        raise ValueError(f"dim {d} not divisible into {subspaces} subspaces")
    if n_centroids > n:
        raise ValueError(f"cannot place {n_centroids} centroids over {n} points")
    width = d // subspaces
    centroids, assigns = [], []
    for j in range(subspaces):
        block = matrix[:, j * width : (j + 1) * width]
        km = lloyd_kmeans(block, n_centroids, rng, max_iter=max_iter, tol=tol)
        centroids.append(km.centroids)
        assigns.append(km.assignments)
    return PQResult(
        centroids=centroids, assignments=np.stack(assigns, axis=1), block_width=width
    )


def pq_as_kd(pq: PQResult, symbols: list[str] | None = None) -> tuple[CodeTable, CodeBook]:
    """Express a PQ model as a linear-sum coded layer.

    Code position j's digit-vector table holds centroid block j zero-padded to
    the full width, so summing the selected digit vectors reproduces the PQ
    concatenation exactly.
    """
    n, m = pq.assignments.shape
    k, w = pq.n_centroids, pq.block_width
    d = m * w
    tables = []
    for j in range(m):
        padded = np.zeros((k, d))
        padded[:, j * w : (j + 1) * w] = pq.centroids[j]
        tables.append(Tensor(padded, op="leaf", name=f"table_{j}"))
    if symbols is None:
        symbols = [str(i) for i in range(n)]
    table = CodeTable(symbols=symbols, codes=pq.assignments, alphabet_size=k)
    book = CodeBook(kind=ComposerKind.LINEAR, tables=tables, projection=None)
    return table, book


def pq_bits(n: int, d: int, subspaces: int, n_centroids: int) -> int:
    """Assignment bits via code accounting plus 32-bit centroid storage."""
    return accounting.code_bits(n, n_centroids, subspaces) + accounting.FLOAT_BITS * (
        n_centroids * d
    )


# -- scalar quantization --------------------------------------------------------


@dataclass
class ScalarQuantResult:
    quantized: np.ndarray
    codes: np.ndarray  # integer grid positions
    offset: float
    scale: float
    bits: int

    def reconstruct(self) -> np.ndarray:
        return self.quantized


def scalar_quantize(matrix: np.ndarray, bits: int) -> ScalarQuantResult:
    """Uniform min-max grid with 2**bits levels over the whole matrix.

    Max absolute error is (max-min) / (2*(2**bits - 1)); a constant matrix is
    reproduced exactly (scale 0).
    """
    if not 1 <= bits <= 32:
        raise ValueError("bits must lie in [1, 32]")
    matrix = np.asarray(matrix, dtype=np.float64)
    lo, hi = float(matrix.min()), float(matrix.max())
    levels = 2**bits
    if hi == lo:
        return ScalarQuantResult(
            quantized=matrix.copy(),
            codes=np.zeros(matrix.shape, dtype=np.int64),
            offset=lo,
            scale=0.0,
            bits=bits,
        )
    scale = (hi - lo) / (levels - 1)
    codes = np.rint((matrix - lo) / scale).astype(np.int64)
    return ScalarQuantResult(
        quantized=lo + codes * scale, codes=codes, offset=lo, scale=scale, bits=bits
    )


def scalar_bits(n: int, d: int, bits: int) -> int:
    return n * d * bits + 2 * accounting.FLOAT_BITS  # grid offset + scale


# -- dense reference model ---------------------------------------------------------


@dataclass
class DenseFitResult:
    """An uncompressed embedding table trained directly on a task."""

    matrix: np.ndarray
    history: list[dict]
    task: object

    def embed_rows(self, indices) -> np.ndarray:
        return self.matrix[np.asarray(indices, dtype=np.int64)]

    def evaluate(self) -> dict[str, float]:
        return self.task.evaluate(self.embed_rows)


def fit_dense_embedding(task, cfg: TrainConfig | None = None) -> DenseFitResult:
    """Train a full (vocab, dim) embedding table on the task, no codes.

    This is the reference every compression method is measured against: the
    same task and optimizer with a free parameter row per symbol.  Task
    parameters (e.g. a classifier head) train jointly and stay on the task
    object, so quantized variants of the returned matrix can be re-scored
    through the same head via ``task.evaluate``.
    """
    if cfg is None:
        cfg = TrainConfig()
    rng = np.random.default_rng(cfg.seed)
    scale = 1.0 / np.sqrt(task.embed_dim)
    table = Tensor(
        rng.uniform(-scale, scale, (task.vocab_size, task.embed_dim)),
        name="dense_table",
    )
    params = {"dense_table": table, **task.parameters()}
    if cfg.optimizer == "adam":
        opt = Adam(params, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
    else:
        opt = Sgd(params, cfg.learning_rate)
    history: list[dict] = []
    for _ in range(cfg.epochs):
        losses = []
        for batch in task.train_batches(cfg.batch_size, rng):
            rows = ad.gather_rows(table, batch.symbols)
            loss = task.batch_loss(rows, batch)
            losses.append(loss.item())
            grads = ad.gradients(loss, params)
            if cfg.grad_clip > 0:
                ad.global_norm_clip(grads, cfg.grad_clip)
            opt.step(grads, {"dense_table": batch.symbols})
        val = task.validation_loss(
            lambda ids: table.data[np.asarray(ids, dtype=np.int64)]
        )
        history.append(
            {
                "task_loss": float(np.mean(losses)) if losses else 0.0,
                "val_metric": float(val),
            }
        )
    return DenseFitResult(matrix=table.data.copy(), history=history, task=task)


# -- code-table baselines --------------------------------------------------------


def random_codes(
    n: int,
    alphabet_size: int,
    code_length: int,
    seed: int,
    symbols: list[str] | None = None,
) -> CodeTable:
    """Digits drawn i.i.d. uniform over the alphabet; reproducible by seed."""
    rng = np.random.default_rng(seed)
    codes = rng.integers(0, alphabet_size, (n, code_length))
    if symbols is None:
        symbols = [str(i) for i in range(n)]
    return CodeTable(symbols=symbols, codes=codes, alphabet_size=alphabet_size)


def pretrained_codes(
    matrix: np.ndarray,
    alphabet_size: int,
    code_length: int,
    composer_kind: ComposerKind | str = ComposerKind.LINEAR,
    digit_dim: int | None = None,
    cfg: TrainConfig | None = None,
    symbols: list[str] | None = None,
) -> tuple[CodeTable, FitResult]:
    """Two-stage scheme, stage one: learn codes purely by reconstructing the
    given matrix, then freeze them (stage two trains a composer + task with
    ``frozen_table=`` the returned table)."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if cfg is None:
        cfg = TrainConfig(epochs=25, batch_size=128)
    task = ReconstructionTask(matrix)
    code_cfg = CodeConfig(
        vocab_size=matrix.shape[0],
        alphabet_size=alphabet_size,
        code_length=code_length,
        code_embed_dim=digit_dim if digit_dim is not None else matrix.shape[1],
        allow_lossy=True,
    )
    result = fit(task, code_cfg, composer_kind, cfg, symbols=symbols)
    return result.table, result


# -- packaged results -------------------------------------------------------------


@dataclass
class QuantizationResult:
    method: str
    reconstruction: np.ndarray
    params_count: int
    bits: int
    mse: float


def _mse(a: np.ndarray, b: np.ndarray) -> float:
    diff = a - b
    return float((diff * diff).mean())


def evaluate_full(matrix: np.ndarray) -> QuantizationResult:
    n, d = matrix.shape
    return QuantizationResult(
        method="full",
        reconstruction=np.asarray(matrix, dtype=np.float64),
        params_count=n * d,
        bits=accounting.dense_layer_bits(n, d),
        mse=0.0,
    )


def evaluate_low_rank(matrix: np.ndarray, rank: int, **kwargs) -> QuantizationResult:
    n, d = matrix.shape
    factors = low_rank_fit(matrix, rank, **kwargs)
    recon = factors.reconstruct()
    return QuantizationResult(
        method=f"lowrank(r={rank})",
        reconstruction=recon,
        params_count=n * rank + rank * d,
        bits=low_rank_bits(n, d, rank),
        mse=_mse(recon, matrix),
    )


def evaluate_pq(
    matrix: np.ndarray, subspaces: int, n_centroids: int, rng: np.random.Generator
) -> QuantizationResult:
    n, d = matrix.shape
    pq = product_quantize(matrix, subspaces, n_centroids, rng)
    recon = pq.reconstruct()
    return QuantizationResult(
        method=f"pq({subspaces}x{n_centroids})",
        reconstruction=recon,
        params_count=n_centroids * d,
        bits=pq_bits(n, d, subspaces, n_centroids),
        mse=_mse(recon, matrix),
    )


def evaluate_scalar(matrix: np.ndarray, bits: int) -> QuantizationResult:
    n, d = matrix.shape
    sq = scalar_quantize(matrix, bits)
    return QuantizationResult(
        method=f"scalar({bits}bit)",
        reconstruction=sq.reconstruct(),
        params_count=n * d,
        bits=scalar_bits(n, d, bits),
        mse=_mse(sq.quantized, matrix),
    )
