"""Run reports: one record per trained/evaluated configuration.

Storage figures are always recomputed from the configuration echo through the
accounting module — never copied from the caller — so a corrupted config and
its report disagree loudly (``verify_accounting``).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

from . import accounting
from .baselines import low_rank_bits, pq_bits, scalar_bits

FAMILIES = ("kd", "full", "lowrank", "pq", "scalar")


@dataclass
class RunReport:
    method: str
    config: dict
    params_count: int
    bits: int
    compression_ratio: float  # dense float32 bits / this method's bits
    metrics: dict = field(default_factory=dict)
    reconstruction_mse: float | None = None
    nn_overlap: float | None = None
    wall_time_s: float | None = None


def accounting_for(config: dict) -> tuple[int, int, float]:
    """(params, bits, compression ratio) implied by a config echo."""
    family = config.get("family")
    if family not in FAMILIES:
        raise ValueError(f"config echo needs a family in {FAMILIES}, got {family!r}")
    n, d = int(config["vocab_size"]), int(config["embed_dim"])
    full_bits = accounting.dense_layer_bits(n, d)
    if family == "kd":
        k, length = int(config["alphabet_size"]), int(config["code_length"])
        dprime, extra = int(config["digit_dim"]), int(config["extra_params"])
        params = accounting.composer_params(k, length, dprime, extra)
        bits = accounting.coded_layer_bits(n, k, length, dprime, extra)
    elif family == "full":
        params, bits = n * d, full_bits
    elif family == "lowrank":
        rank = int(config["rank"])
        params = n * rank + rank * d
        bits = low_rank_bits(n, d, rank)
    elif family == "pq":
        m, k = int(config["subspaces"]), int(config["n_centroids"])
        params = k * d
        bits = pq_bits(n, d, m, k)
    else:  # scalar
        params = n * d
        bits = scalar_bits(n, d, int(config["bits_per_value"]))
    return params, bits, full_bits / bits


def build_report(
    method: str,
    config: dict,
    metrics: dict | None = None,
    reconstruction_mse: float | None = None,
    nn_overlap: float | None = None,
    wall_time_s: float | None = None,
) -> RunReport:
    params, bits, ratio = accounting_for(config)
    return RunReport(
        method=method,
        config=dict(config),
        params_count=params,
        bits=bits,
        compression_ratio=ratio,
        metrics=dict(metrics or {}),
        reconstruction_mse=reconstruction_mse,
        nn_overlap=nn_overlap,
        wall_time_s=wall_time_s,
    )


def verify_accounting(report: RunReport) -> None:
    """Recompute storage figures from the config echo; raise on any mismatch."""
    params, bits, ratio = accounting_for(report.config)
    if params != report.params_count:
        raise ValueError(
            f"params mismatch: report says {report.params_count}, config implies {params}"
        )
    if bits != report.bits:
        raise ValueError(f"bits mismatch: report says {report.bits}, config implies {bits}")
    if ratio != report.compression_ratio:
        raise ValueError(
            f"ratio mismatch: report says {report.compression_ratio}, config implies {ratio}"
        )


def save_reports(path, reports: list[RunReport]) -> None:
    """Line-delimited JSON, one report per line, keys sorted."""
    with open(path, "w", encoding="utf-8") as fh:
        for r in reports:
            fh.write(json.dumps(asdict(r), sort_keys=True) + "\n")


def load_reports(path) -> list[RunReport]:
    reports = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                reports.append(RunReport(**json.loads(line)))
    return reports


MISSING = "—"  # em dash for absent values


def _fmt(value, kind: str) -> str:
    if value is None:
        return MISSING
    if kind == "int":
        return f"{int(value):,}"
    if kind == "ratio":
        return f"{value:.2f}x"
    return f"{value:.4f}"


def text_table(reports: list[RunReport]) -> str:
    """Aligned human-readable table over all reports; absent metrics show a dash."""
    if not reports:
        raise ValueError("no reports to render")
    metric_keys = sorted({k for r in reports for k in r.metrics})
    header = ["method", "params", "bits", "ratio", "recon_mse", "nn_overlap", *metric_keys]
    rows = [header]
    for r in reports:
        row = [
            r.method,
            _fmt(r.params_count, "int"),
            _fmt(r.bits, "int"),
            _fmt(r.compression_ratio, "ratio"),
            _fmt(r.reconstruction_mse, "float"),
            _fmt(r.nn_overlap, "float"),
        ]
        row.extend(_fmt(r.metrics.get(k), "float") for k in metric_keys)
        rows.append(row)
    widths = [max(len(row[c]) for row in rows) for c in range(len(header))]
    lines = []
    for i, row in enumerate(rows):
        cells = [
            row[0].ljust(widths[0]),
            *[row[c].rjust(widths[c]) for c in range(1, len(row))],
        ]
        lines.append("  ".join(cells).rstrip())
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)
