"""Render benchmark figures from the experiment runner's results CSV.

Four figure families are supported, one image per family:

- ``n``:      metric panels against the training-set size sweep
- ``newpct``: metric panels against the percentage of new actions
- ``gamma``:  metric panels against the reward-structure violation knob
- ``rho``:    tuned-policy panels against the lower bound on new-action mass

The value families share three panels (normalized overall value, normalized
value per existing action, normalized value per new action); methods whose
per-new column is entirely null never chose new actions and are omitted
from the per-new panel. Error bars are standard errors across seeds. Series
are ordered alphabetically by method tag so legends are stable.
"""
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib
import numpy as np
import pandas as pd

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

VALUE_PANELS = (
    ("norm_overall", "overall policy value"),
    ("norm_existing", "value per existing action"),
    ("norm_new", "value per new action"),
)
RHO_PANELS = (
    ("overall_value", "overall policy value"),
    ("existing_action_mass", "proportion of existing actions"),
    ("new_action_mass", "proportion of new actions"),
)

FAMILIES = {
    "n": {"panels": VALUE_PANELS, "xlabel": "training data size"},
    "newpct": {"panels": VALUE_PANELS, "xlabel": "percentage of new actions"},
    "gamma": {"panels": VALUE_PANELS, "xlabel": "interaction-violation weight"},
    "rho": {"panels": RHO_PANELS, "xlabel": "lower bound on new-action mass"},
}

BASE_COLUMNS = (
    "sweep_name", "sweep_value", "seed", "method",
    "overall_value", "norm_overall", "value_per_existing", "norm_existing",
    "value_per_new", "norm_new", "new_action_mass",
)

_COLORS = plt.cm.tab10.colors
_MARKERS = "osD^vPXd*h"


@dataclass
class RenderResult:
    """What was drawn: output file plus the series kept per panel."""

    path: Path
    panel_methods: dict = field(default_factory=dict)


def load_results(csv_path) -> pd.DataFrame:
    frame = pd.read_csv(csv_path)
    missing = [c for c in BASE_COLUMNS if c not in frame.columns]
    if missing:
        raise ValueError(f"results CSV is missing column(s): {', '.join(missing)}")
    if "error" in frame.columns:
        failed = frame["error"].fillna("") != ""
        if failed.any():
            warnings.warn(f"dropping {int(failed.sum())} error row(s)", stacklevel=2)
            frame = frame[~failed]
    frame = frame.copy()
    frame["existing_action_mass"] = 1.0 - frame["new_action_mass"]
    return frame


def _x_positions(values):
    """Numeric positions plus tick labels; handles -inf as a leading category."""
    ordered = sorted(values, key=float)
    finite = [v for v in ordered if np.isfinite(v)]
    if len(finite) == len(ordered):
        return ordered, ordered, [_fmt(v) for v in ordered]
    positions = list(range(len(ordered)))
    return ordered, positions, [_fmt(v) for v in ordered]


def _fmt(value) -> str:
    if not np.isfinite(value):
        return "-inf" if value < 0 else "inf"
    if float(value).is_integer():
        return str(int(value))
    return f"{value:g}"


def render(csv_path, family: str, out_dir, fmt: str = "png") -> RenderResult:
    """Render one figure family to ``<out_dir>/figure_<family>.<fmt>``."""
    if family not in FAMILIES:
        raise ValueError(f"unknown figure family {family!r}; choose from {sorted(FAMILIES)}")
    spec = FAMILIES[family]
    frame = load_results(csv_path)
    if frame.empty:
        warnings.warn("results CSV selects no rows; skipping render", stacklevel=2)
        return RenderResult(path=None)

    methods = sorted(frame["method"].unique())
    xs, positions, labels = _x_positions(frame["sweep_value"].unique())
    position_of = dict(zip(xs, positions))

    fig, axes = plt.subplots(1, len(spec["panels"]), figsize=(4.2 * len(spec["panels"]), 3.4))
    panel_methods = {}
    for ax, (column, title) in zip(np.atleast_1d(axes), spec["panels"]):
        kept = []
        for idx, method in enumerate(methods):
            rows = frame[frame["method"] == method]
            if rows[column].isna().all():
                continue  # never chose new actions; keep it off the per-new panel
            kept.append(method)
            grouped = rows.groupby("sweep_value")[column]
            mean = grouped.mean()
            counts = grouped.count()
            err = grouped.std(ddof=1).fillna(0.0) / np.sqrt(counts.clip(lower=1))
            x = [position_of[v] for v in mean.index]
            order = np.argsort(x)
            x = np.array(x)[order]
            y = mean.to_numpy()[order]
            e = err.to_numpy()[order]
            ax.errorbar(
                x, y, yerr=e, label=method,
                color=_COLORS[idx % len(_COLORS)],
                marker=_MARKERS[idx % len(_MARKERS)],
                markersize=4, capsize=2, linewidth=1.2,
            )
        ax.set_title(title, fontsize=10)
        ax.set_xlabel(spec["xlabel"], fontsize=9)
        ax.set_xticks(positions)
        ax.set_xticklabels(labels, fontsize=8)
        ax.tick_params(axis="y", labelsize=8)
        ax.grid(alpha=0.3)
        panel_methods[column] = kept

    handles, labels_ = np.atleast_1d(axes)[0].get_legend_handles_labels()
    if not handles:
        for ax in np.atleast_1d(axes):
            h, l = ax.get_legend_handles_labels()
            if h:
                handles, labels_ = h, l
                break
    fig.legend(handles, labels_, loc="upper center", ncol=min(8, max(1, len(methods))),
               fontsize=8, frameon=False, bbox_to_anchor=(0.5, 1.02))
    fig.tight_layout(rect=(0, 0, 1, 0.92))

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"figure_{family}.{fmt}"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return RenderResult(path=path, panel_methods=panel_methods)


def render_all(csv_path, out_dir, families=("n", "newpct", "gamma", "rho"),
               fmt: str = "png") -> list:
    return [render(csv_path, family, out_dir, fmt=fmt) for family in families]
