"""Render convergence/ablation figures from metrics CSVs.

Consumes the simulator's external interfaces verbatim: the metrics CSV
schema (`t,grad_norm_sq,grad_norm_sq_node_max,drift_theta,drift_momentum,
lyapunov,loss`) and the ablation filename convention
`<attack>__<rule>__beta<b>__seed<k>.csv` (plain runs are named
`run_seed<k>.csv`). One figure: a panel per panel-key value, a curve per
curve-key value, the mean across seeds with a min-max band. Seeds with
mismatched iteration counts are truncated to the common prefix with a
warning; small seed counts get an honest min-max band rather than a
standard deviation. Rendering reads the inputs, never rewrites them, and
re-rendering the same inputs produces the same bytes.
"""

import configparser
import csv
import glob
import os
import re
import warnings
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

CSV_COLUMNS = (
    "t",
    "grad_norm_sq",
    "grad_norm_sq_node_max",
    "drift_theta",
    "drift_momentum",
    "lyapunov",
    "loss",
)

CELL_PATTERN = re.compile(
    r"^(?P<attack>[A-Za-z0-9-]+)__(?P<rule>[A-Za-z0-9-]+)__beta(?P<beta>[^_]+)__seed(?P<seed>\d+)\.csv$"
)
RUN_PATTERN = re.compile(r"^run_seed(?P<seed>\d+)\.csv$")

FIELD_KEYS = ("attack", "rule", "beta", "rule_beta")


class FigureError(Exception):
    """Base error for figure rendering."""


class NoInputError(FigureError):
    """The input glob matched no parseable metrics files."""


class MissingColumnError(FigureError):
    """The requested metric column is not in the CSV schema."""


@dataclass(frozen=True)
class FigureSpec:
    input_glob: str
    metric: str = "grad_norm_sq"
    panel_key: str = "attack"
    curve_key: str = "rule_beta"
    output: str = "figure.png"
    log_scale: bool = False
    title: str = ""

    def __post_init__(self):
        if self.metric not in CSV_COLUMNS or self.metric == "t":
            raise MissingColumnError(
                f"metric {self.metric!r} not in schema columns {CSV_COLUMNS[1:]}"
            )
        if self.panel_key not in FIELD_KEYS or self.curve_key not in FIELD_KEYS:
            raise FigureError(
                f"panel/curve keys must be one of {FIELD_KEYS}, "
                f"got {self.panel_key!r}/{self.curve_key!r}"
            )


def parse_spec(path):
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path, "r", encoding="utf-8") as handle:
            parser.read_file(handle)
    except (OSError, configparser.Error) as exc:
        raise FigureError(f"cannot read figure spec {path}: {exc}") from exc
    if not parser.has_section("figure"):
        raise FigureError(f"{path}: missing [figure] section")
    section = parser["figure"]
    known = {"input_glob", "metric", "panel_key", "curve_key", "output", "log_scale", "title"}
    unknown = set(section) - known
    if unknown:
        raise FigureError(f"{path}: unknown keys {sorted(unknown)}")
    if "input_glob" not in section:
        raise FigureError(f"{path}: input_glob is required")
    return FigureSpec(
        input_glob=section.get("input_glob"),
        metric=section.get("metric", "grad_norm_sq"),
        panel_key=section.get("panel_key", "attack"),
        curve_key=section.get("curve_key", "rule_beta"),
        output=section.get("output", "figure.png"),
        log_scale=section.getboolean("log_scale", fallback=False),
        title=section.get("title", ""),
    )


def _parse_name(name):
    match = CELL_PATTERN.match(name)
    if match:
        fields = match.groupdict()
        fields["rule_beta"] = f"{fields['rule']}, beta={fields['beta']}"
        return fields
    match = RUN_PATTERN.match(name)
    if match:
        return {
            "attack": "run",
            "rule": "run",
            "beta": "",
            "rule_beta": "run",
            "seed": match.group("seed"),
        }
    return None


def _read_metric(path, metric):
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or tuple(header) != CSV_COLUMNS:
            raise FigureError(f"{path}: unexpected metrics header {header}")
        column = header.index(metric)
        return np.array([float(row[column]) for row in reader if row])


def collect_series(spec):
    """Group matched files into {panel: {curve: [per-seed series]}}."""
    paths = sorted(glob.glob(spec.input_glob))
    groups = {}
    matched = 0
    for path in paths:
        fields = _parse_name(os.path.basename(path))
        if fields is None:
            warnings.warn(f"skipping {path}: name does not follow the run/cell convention")
            continue
        series = _read_metric(path, spec.metric)
        matched += 1
        panel = fields[spec.panel_key]
        curve = fields[spec.curve_key]
        groups.setdefault(panel, {}).setdefault(curve, []).append(series)
    if matched == 0:
        raise NoInputError(f"no metrics files match {spec.input_glob!r}")
    return groups


def _stack_truncated(series_list, panel, curve):
    lengths = {len(s) for s in series_list}
    if len(lengths) > 1:
        shortest = min(lengths)
        warnings.warn(
            f"panel {panel!r} curve {curve!r}: iteration counts differ "
            f"{sorted(lengths)}; truncating to common prefix {shortest}"
        )
        series_list = [s[:shortest] for s in series_list]
    return np.vstack(series_list)


def build_figure(spec):
    """Assemble the matplotlib figure for spec (the saving is render's job)."""
    groups = collect_series(spec)
    panels = sorted(groups)
    curves = sorted({curve for panel in groups.values() for curve in panel})
    colors = plt.get_cmap("tab10")
    ncols = min(2, len(panels))
    nrows = (len(panels) + ncols - 1) // ncols
    fig, axes = plt.subplots(
        nrows, ncols, figsize=(6.0 * ncols, 3.6 * nrows), squeeze=False, sharex=True
    )
    for idx, panel in enumerate(panels):
        ax = axes[idx // ncols][idx % ncols]
        for curve in sorted(groups[panel]):
            stacked = _stack_truncated(groups[panel][curve], panel, curve)
            steps = np.arange(stacked.shape[1])
            color = colors(curves.index(curve) % 10)
            ax.plot(steps, stacked.mean(axis=0), label=curve, color=color, linewidth=1.2)
            if stacked.shape[0] > 1:
                ax.fill_between(
                    steps, stacked.min(axis=0), stacked.max(axis=0),
                    color=color, alpha=0.2, linewidth=0,
                )
        if spec.log_scale:
            ax.set_yscale("log")
        ax.set_title(panel)
        ax.set_xlabel("iteration")
        ax.set_ylabel(spec.metric)
    for idx in range(len(panels), nrows * ncols):
        axes[idx // ncols][idx % ncols].set_axis_off()
    handles, labels = axes[0][0].get_legend_handles_labels()
    if handles:
        fig.legend(handles, labels, loc="lower center", ncol=min(4, len(labels)),
                   fontsize="small", frameon=False)
    if spec.title:
        fig.suptitle(spec.title)
    fig.tight_layout(rect=(0.0, 0.05 + 0.02 * (len(curves) > 4), 1.0, 1.0))
    return fig


def render(spec):
    """Render the figure described by spec; returns the output path."""
    fig = build_figure(spec)
    out_dir = os.path.dirname(spec.output)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    fig.savefig(spec.output, dpi=120)
    plt.close(fig)
    return spec.output
