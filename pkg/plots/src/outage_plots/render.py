"""Render one outage-vs-SNR chart from a sweep CSV.

The input contract is the sweep CSV schema: '#' comment lines, then a header
with the eighteen sweep columns, rows sorted by (r, snr_db), probabilities in
scientific notation and inapplicable cells blank.  This module only consumes
that file format; it never computes outage values itself.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import matplotlib

matplotlib.use("Agg")
# deterministic ids inside SVG output
matplotlib.rcParams["svg.hashsalt"] = "outage-plots"

import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)

SWEEP_COLUMNS = (
    "model_id", "m", "n", "snr_db", "gamma", "r", "target_rate_nats",
    "p_mc", "ci_low", "ci_high", "p_low_snr", "p_low_outage_approx",
    "p_piecewise", "p_scalar_exact", "d_dmt", "gamma_high_boundary",
    "trials", "seed",
)

LABEL_MC = "Monte Carlo (95% CI)"
LABEL_MC_BOUND = "MC upper bound (no events)"
LABEL_LOW_SNR = "Low-SNR closed form"
LABEL_PIECEWISE = "Piecewise approximation"
LABEL_SCALAR = "Scalar exact"


class SchemaError(ValueError):
    """The CSV does not conform to the sweep schema."""


@dataclass(frozen=True)
class PlotSpec:
    """What to render: which CSV, which multiplexing gain, where to."""

    csv_path: Path
    r: float
    out_path: Path
    title: Optional[str] = None


def read_sweep(path: Path) -> list[dict]:
    """Parse a sweep CSV into row dicts with floats (None for blank cells)."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from exc
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    if not lines:
        raise SchemaError(f"{path}: no header row found")
    reader = csv.DictReader(lines)
    got = tuple(reader.fieldnames or ())
    missing = [c for c in SWEEP_COLUMNS if c not in got]
    extra = [c for c in got if c not in SWEEP_COLUMNS]
    if missing or extra:
        parts = []
        if missing:
            parts.append(f"missing column(s): {', '.join(missing)}")
        if extra:
            parts.append(f"unexpected column(s): {', '.join(extra)}")
        raise SchemaError(f"{path}: {'; '.join(parts)}")
    rows = []
    for lineno, raw in enumerate(reader, 2):
        row: dict = {"model_id": raw["model_id"]}
        for name in SWEEP_COLUMNS[1:]:
            cell = raw[name]
            if cell is None:
                raise SchemaError(f"{path}, row {lineno}: too few fields")
            cell = cell.strip()
            if cell == "":
                row[name] = None
                continue
            try:
                row[name] = int(cell) if name in ("m", "n", "trials", "seed") else float(cell)
            except ValueError as exc:
                raise SchemaError(
                    f"{path}, row {lineno}: non-numeric value {cell!r} in {name}"
                ) from exc
        rows.append(row)
    return rows


def select_rows(rows: list[dict], r: float) -> list[dict]:
    """Rows matching the requested multiplexing gain, sorted by SNR."""
    picked = [
        row for row in rows
        if row["r"] is not None and math.isclose(row["r"], r, rel_tol=1e-9, abs_tol=1e-12)
    ]
    picked.sort(key=lambda row: row["snr_db"])
    return picked


def build_figure(rows: list[dict], title: Optional[str] = None):
    """Assemble the chart for one multiplexing gain; the caller saves it."""
    if not rows:
        raise SchemaError("no rows to plot")
    fig, ax = plt.subplots(figsize=(8.0, 5.5))

    with_events = [row for row in rows if row["p_mc"] and row["p_mc"] > 0.0]
    if with_events:
        x = [row["snr_db"] for row in with_events]
        y = [row["p_mc"] for row in with_events]
        err_low = [row["p_mc"] - row["ci_low"] for row in with_events]
        err_high = [row["ci_high"] - row["p_mc"] for row in with_events]
        ax.errorbar(x, y, yerr=[err_low, err_high], fmt="o", markersize=3.5,
                    capsize=2, linewidth=1, color="tab:blue", label=LABEL_MC)

    # log axis cannot show zero-count cells; mark their interval top instead
    empty = [row for row in rows if row["p_mc"] == 0.0 and row["ci_high"]]
    if empty:
        ax.plot([row["snr_db"] for row in empty], [row["ci_high"] for row in empty],
                "v", markersize=5, color="tab:blue", fillstyle="none",
                label=LABEL_MC_BOUND)

    plateau = [row for row in rows if row["p_low_snr"] is not None]
    if plateau:
        ax.plot([row["snr_db"] for row in plateau],
                [row["p_low_snr"] for row in plateau],
                "--", color="tab:green", linewidth=1.5, label=LABEL_LOW_SNR)

    piecewise = [row for row in rows if row["p_piecewise"] is not None]
    if piecewise:
        ax.plot([row["snr_db"] for row in piecewise],
                [row["p_piecewise"] for row in piecewise],
                "-", color="tab:red", linewidth=1.5, label=LABEL_PIECEWISE)

    scalar = [row for row in rows if row["p_scalar_exact"] is not None]
    if scalar:
        ax.plot([row["snr_db"] for row in scalar],
                [row["p_scalar_exact"] for row in scalar],
                "-", color="tab:purple", linewidth=1.2, label=LABEL_SCALAR)

    ax.set_yscale("log")
    ax.set_xlabel("SNR (dB)")
    ax.set_ylabel("Outage probability")
    first = rows[0]
    ax.set_title(title or f"{first['model_id']} {first['m']}x{first['n']}, r = {first['r']:g}")
    ax.grid(True, which="both", linestyle=":", alpha=0.6)
    ax.legend(loc="lower left")
    fig.tight_layout()
    return fig


def _savefig_metadata(suffix: str) -> Optional[dict]:
    # strip timestamps where the format would otherwise embed one
    if suffix == ".svg":
        return {"Date": None}
    if suffix == ".pdf":
        return {"CreationDate": None}
    return None


def render(spec: PlotSpec) -> Path:
    """Read, filter, draw and save; returns the output path."""
    rows = select_rows(read_sweep(spec.csv_path), spec.r)
    if not rows:
        raise SchemaError(f"{spec.csv_path}: no rows with r = {spec.r:g}")
    fig = build_figure(rows, spec.title)
    out = Path(spec.out_path)
    try:
        fig.savefig(out, dpi=120, metadata=_savefig_metadata(out.suffix.lower()))
    finally:
        plt.close(fig)
    return out
