"""Run artifacts: JSON reports, human tables, CSV traces, and figures.

Everything a command-line run leaves behind goes through this module:
probe reports serialized against a versioned schema, fixed-width tables
for the terminal, RFC-4180 CSV files of trace coefficients and probe
histories, JSON sidecars with run metadata, and PNG figures rendered on
the non-interactive backend.  Serialization is canonical (sorted keys,
plain floats), so a report for a seeded run is byte-for-byte stable.
"""

from __future__ import annotations

import csv
import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from .cq import TimeMarchResult
from .probes import ProbeReport
from .solver import LaplaceSolveResult

__all__ = [
    "SCHEMA_VERSION",
    "figure_convergence",
    "figure_frequency",
    "figure_march",
    "figure_suite",
    "render_table",
    "reports_to_json",
    "write_frequency_csv",
    "write_json",
    "write_march_csv",
    "write_march_fields_csv",
]

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "wavebem-report/1"


def _plt():
    """Import pyplot lazily on the file-rendering backend."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


# ---------------------------------------------------------------------------
# probe reports
# ---------------------------------------------------------------------------

def reports_to_json(
    reports: Sequence[ProbeReport],
    meta: Optional[Dict[str, object]] = None,
) -> str:
    """Canonical JSON document for a list of probe reports."""
    doc = {
        "schema": SCHEMA_VERSION,
        "meta": meta or {},
        "reports": [r.to_dict() for r in reports],
        "passed": all(r.passed for r in reports),
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def write_json(path, payload: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(payload, encoding="ascii")
    logger.info("wrote %s", path)
    return path


def render_table(reports: Sequence[ProbeReport]) -> str:
    """Fixed-width measurement table, one row per threshold check."""
    rows = [("probe", "measurement", "value", "threshold", "status")]
    for rep in reports:
        for m in rep.measurements:
            rows.append(
                (
                    rep.probe,
                    m.name,
                    f"{m.value:.6g}",
                    f"{m.op} {m.threshold:g}",
                    "pass" if m.passed else "FAIL",
                )
            )
    widths = [max(len(r[i]) for r in rows) for i in range(5)]
    lines = []
    for k, row in enumerate(rows):
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
        if k == 0:
            lines.append("  ".join("-" * w for w in widths))
    n_fail = sum(not r.passed for r in reports)
    verdict = "pass" if n_fail == 0 else f"FAIL ({n_fail} probe(s))"
    lines.append("")
    lines.append(f"suite result: {verdict}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# CSV artifacts
# ---------------------------------------------------------------------------

def _open_csv(path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def write_frequency_csv(path, result: LaplaceSolveResult) -> Path:
    """Trace coefficients of one frequency solve, one dof per row."""
    path = _open_csv(path)
    with path.open("w", newline="", encoding="ascii") as handle:
        writer = csv.writer(handle)
        writer.writerow(
            ["subdomain", "component", "index", "real", "imag"]
        )
        for k in range(result.traces.n_subdomains):
            for comp, block in (
                ("dirichlet", result.traces.dirichlet[k]),
                ("neumann", result.traces.neumann[k]),
            ):
                for i, value in enumerate(block):
                    writer.writerow(
                        [k + 1, comp, i, repr(value.real), repr(value.imag)]
                    )
    logger.info("wrote %s", path)
    return path


def write_march_csv(path, result: TimeMarchResult) -> Path:
    """Per-step single-trace coefficients of a time march."""
    path = _open_csv(path)
    n_free = result.traces.shape[1]
    with path.open("w", newline="", encoding="ascii") as handle:
        writer = csv.writer(handle)
        writer.writerow(
            ["step", "time"] + [f"c{j}" for j in range(n_free)]
        )
        for n, t in enumerate(result.times):
            writer.writerow(
                [n, repr(float(t))]
                + [repr(float(v)) for v in result.traces[n]]
            )
    logger.info("wrote %s", path)
    return path


def write_march_fields_csv(path, times, points, series) -> Path:
    """Field history at probe points; one step per row."""
    path = _open_csv(path)
    points = np.asarray(points, dtype=float)
    series = np.asarray(series)
    with path.open("w", newline="", encoding="ascii") as handle:
        writer = csv.writer(handle)
        writer.writerow(
            ["step", "time"]
            + [
                "p({:g},{:g},{:g})".format(*pt)
                for pt in points
            ]
        )
        for n, t in enumerate(times):
            writer.writerow(
                [n, repr(float(t))]
                + [repr(float(v)) for v in series[n]]
            )
    logger.info("wrote %s", path)
    return path


# ---------------------------------------------------------------------------
# figures
# ---------------------------------------------------------------------------

def figure_frequency(path, result: LaplaceSolveResult) -> Path:
    """Coefficient-magnitude profile of one frequency solve."""
    plt = _plt()
    path = _open_csv(path)
    fig, ax = plt.subplots(figsize=(7.0, 4.0))
    for k in range(result.traces.n_subdomains):
        ax.semilogy(
            np.abs(result.traces.dirichlet[k]),
            lw=0.8,
            label=f"subdomain {k + 1}: dirichlet",
        )
        ax.semilogy(
            np.abs(result.traces.neumann[k]),
            lw=0.8,
            label=f"subdomain {k + 1}: neumann",
        )
    ax.set_xlabel("coefficient index")
    ax.set_ylabel("magnitude")
    ax.set_title(f"trace coefficients at s = {result.s:g}")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    logger.info("wrote %s", path)
    return path


def figure_march(path, result: TimeMarchResult, points=None, series=None):
    """Trace-norm history of a march, plus probe-point fields if given."""
    plt = _plt()
    path = _open_csv(path)
    two = series is not None and np.size(series) > 0
    fig, axes = plt.subplots(
        2 if two else 1, 1, figsize=(7.0, 5.5 if two else 3.5), sharex=True
    )
    ax0 = axes[0] if two else axes
    ax0.plot(result.times, np.linalg.norm(result.traces, axis=1), lw=1.2)
    ax0.set_ylabel("trace norm")
    ax0.set_title(
        f"{result.scheme} march: dt = {result.dt:g}, "
        f"{len(result.times) - 1} steps"
    )
    if two:
        series = np.asarray(series)
        for j, pt in enumerate(np.atleast_2d(points)):
            axes[1].plot(
                result.times,
                series[:, j],
                lw=1.0,
                label="({:g},{:g},{:g})".format(*pt),
            )
        axes[1].set_ylabel("field at probe points")
        axes[1].legend(fontsize=8)
        axes[1].set_xlabel("time")
    else:
        ax0.set_xlabel("time")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    logger.info("wrote %s", path)
    return path


def figure_convergence(path, x, errors, xlabel: str, title: str) -> Path:
    """Log-log error decay with the fitted slope in the legend."""
    plt = _plt()
    path = _open_csv(path)
    x = np.asarray(x, dtype=float)
    errors = np.asarray(errors, dtype=float)
    slope = np.polyfit(np.log(x), np.log(errors), 1)[0]
    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    ax.loglog(x, errors, "o-", label=f"measured (slope {slope:.2f})")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("error")
    ax.set_title(title)
    ax.grid(True, which="both", lw=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    logger.info("wrote %s", path)
    return path


def figure_suite(path, reports: Sequence[ProbeReport]) -> Path:
    """Margin chart: measured value against threshold per check.

    Bars show ``log10(value / threshold)`` for upper bounds and its
    negative for lower bounds, so anything below zero passes and the
    zero line is the acceptance boundary.  Sign-only checks (threshold
    zero) are shown at the chart edge with their pass color.
    """
    plt = _plt()
    path = _open_csv(path)
    labels: List[str] = []
    margins: List[float] = []
    colors: List[str] = []
    edge = 3.0
    for rep in reports:
        for m in rep.measurements:
            labels.append(f"{rep.probe}:{m.name}")
            if m.threshold != 0.0 and m.value > 0.0:
                raw = np.log10(abs(m.value) / abs(m.threshold))
                if m.op in (">=", ">"):
                    raw = -raw
                margin = float(np.clip(raw, -edge, edge))
            else:
                margin = -edge if m.passed else edge
            margins.append(margin)
            colors.append("#2a7e43" if m.passed else "#b03a2e")
    fig, ax = plt.subplots(figsize=(7.5, 0.32 * len(labels) + 1.2))
    ypos = np.arange(len(labels))
    ax.barh(ypos, margins, color=colors, height=0.6)
    ax.axvline(0.0, color="k", lw=1.0)
    ax.set_yticks(ypos)
    ax.set_yticklabels(labels, fontsize=7)
    ax.invert_yaxis()
    ax.set_xlabel("log10(value / threshold), clipped; below 0 passes")
    ax.set_xlim(-edge - 0.2, edge + 0.2)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    logger.info("wrote %s", path)
    return path
