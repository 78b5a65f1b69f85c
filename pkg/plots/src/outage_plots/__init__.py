"""Charts for outage-vs-SNR sweep CSVs: Monte Carlo points with intervals,
the low-SNR plateau, and the optional piecewise/scalar overlays."""

__version__ = "0.1.0"

from .render import (
    PlotSpec,
    SchemaError,
    SWEEP_COLUMNS,
    build_figure,
    read_sweep,
    render,
    select_rows,
)

__all__ = [
    "PlotSpec",
    "SchemaError",
    "SWEEP_COLUMNS",
    "build_figure",
    "read_sweep",
    "render",
    "select_rows",
]
