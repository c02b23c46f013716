"""Bar charts written next to the tabular reports."""

from __future__ import annotations

from pathlib import Path
from typing import Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .report import PrevalenceTable, SecurityTable  # noqa: E402

PathLike = Union[str, Path]

_STYLE = {
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "savefig.dpi": 150,
}

# PNG metadata would otherwise embed the matplotlib version string
_METADATA = {"Software": None}


def plot_security(table: SecurityTable, path: PathLike) -> Path:
    """Grouped bars: share of open- and closed-group URLs carrying each field."""
    path = Path(path)
    rows = table.rows
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(7.5, 0.32 * max(len(rows), 3) + 1.2))
        y = range(len(rows))
        ax.barh([i - 0.2 for i in y], [r.pct.open for r in rows], height=0.4, label="open")
        ax.barh([i + 0.2 for i in y], [r.pct.closed for r in rows], height=0.4, label="closed")
        ax.set_yticks(list(y))
        ax.set_yticklabels([r.name for r in rows])
        ax.invert_yaxis()
        ax.set_xlabel("% URLs")
        ax.set_xlim(0, 100)
        if rows:
            ax.legend(loc="lower right", frameon=False)
        ax.set_title("Security-related header fields")
        fig.tight_layout()
        fig.savefig(path, metadata=_METADATA)
        plt.close(fig)
    return path


def plot_prevalence(table: PrevalenceTable, path: PathLike, top: int = 20) -> Path:
    path = Path(path)
    rows = table.rows[:top]
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(7.5, 0.28 * max(len(rows), 3) + 1.2))
        colors = ["tab:red" if r.purpose and r.purpose.value == "security" else "tab:gray" for r in rows]
        ax.barh(range(len(rows)), [r.occurrences for r in rows], color=colors)
        ax.set_yticks(range(len(rows)))
        ax.set_yticklabels([r.name for r in rows])
        ax.invert_yaxis()
        ax.set_xlabel("responses containing the field")
        ax.set_title(f"Top {len(rows)} response header fields")
        fig.tight_layout()
        fig.savefig(path, metadata=_METADATA)
        plt.close(fig)
    return path
