"""Metrics CSV persistence.

Schema (one row per iteration, exact header below): floats are written
with 17 significant digits so a parsed file reproduces the original
doubles bit for bit, making replay comparisons byte-exact.
"""

from .errors import ConfigError, IoFailure
from .trainer import MetricsRow

CSV_HEADER = "t,grad_norm_sq,grad_norm_sq_node_max,drift_theta,drift_momentum,lyapunov,loss"


def _fmt(value):
    return f"{value:.17g}"


def emit_metrics(rows, path):
    """Write rows to path; header-only file for an empty run."""
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(CSV_HEADER + "\n")
            for row in rows:
                handle.write(
                    ",".join(
                        (
                            str(row.t),
                            _fmt(row.grad_norm_sq),
                            _fmt(row.grad_norm_sq_node_max),
                            _fmt(row.drift_theta),
                            _fmt(row.drift_momentum),
                            _fmt(row.lyapunov),
                            _fmt(row.loss),
                        )
                    )
                    + "\n"
                )
    except OSError as exc:
        raise IoFailure(f"cannot write metrics to {path}: {exc}") from exc


def read_metrics(path):
    try:
        with open(path, "r", encoding="utf-8") as handle:
            lines = [line.rstrip("\n") for line in handle]
    except OSError as exc:
        raise IoFailure(f"cannot read metrics from {path}: {exc}") from exc
    if not lines or lines[0] != CSV_HEADER:
        raise ConfigError(f"{path}: unexpected metrics header")
    rows = []
    for line in lines[1:]:
        if not line:
            continue
        t, *floats = line.split(",")
        values = [float(tok) for tok in floats]
        rows.append(MetricsRow(int(t), *values))
    return rows
