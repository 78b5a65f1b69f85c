"""Configuration-driven sweep runner and command-line interface.

Evaluates the closed forms and the Monte Carlo estimator over a
(model, SNR, multiplexing gain) grid and writes one CSV row per cell.
Output is deterministic for a fixed config and seed: cells get their own
derived seeds, rows are sorted by (r, snr_db), and the only
non-reproducible output line is a '#'-prefixed timestamp comment.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .analytic import (
    correlation_power_cdf,
    dmt,
    low_outage_approx_correlated,
    low_outage_approx_iid,
    low_snr_outage_iid,
    mrc_cdf,
    PiecewiseParams,
    piecewise_outage,
    regime_boundaries,
    scalar_outage_exact,
    target_rate,
)
from .channel import (
    ChannelDims,
    CorrelationModel,
    FullCorrelation,
    IidCorrelation,
    KroneckerCorrelation,
    exponential_correlation,
)
from .montecarlo import MIN_TRIALS, calibrate_c, estimate_outage

THREADS_ENV_VAR = "MIMO_OUTAGE_THREADS"

_PROB_FIELDS = (
    "p_mc",
    "ci_low",
    "ci_high",
    "p_low_snr",
    "p_low_outage_approx",
    "p_piecewise",
    "p_scalar_exact",
)
_INT_FIELDS = ("m", "n", "trials", "seed")


@dataclass(frozen=True)
class SweepRow:
    """One (model, gamma, r) grid cell with every applicable outage value.

    Inapplicable values are None and serialize to blank CSV cells, since 0
    is a valid probability.
    """

    model_id: str
    m: int
    n: int
    snr_db: float
    gamma: float
    r: float
    target_rate_nats: float
    p_mc: float
    ci_low: float
    ci_high: float
    p_low_snr: float
    p_low_outage_approx: Optional[float]
    p_piecewise: Optional[float]
    p_scalar_exact: Optional[float]
    d_dmt: Optional[float]
    gamma_high_boundary: Optional[float]
    trials: int
    seed: int

    def __post_init__(self) -> None:
        for name in _PROB_FIELDS:
            value = getattr(self, name)
            if value is not None and not 0.0 <= value <= 1.0:
                raise ValueError(f"{name}={value} is not a probability")
        if not math.isclose(self.gamma, 10.0 ** (self.snr_db / 10.0), rel_tol=1e-12):
            raise ValueError(f"gamma {self.gamma} does not match snr_db {self.snr_db}")


SWEEP_COLUMNS = tuple(f.name for f in fields(SweepRow))


@dataclass(frozen=True)
class SweepConfig:
    """Validated sweep description: grid, channel model, trials, seeding."""

    dims: ChannelDims
    model: CorrelationModel
    model_id: str
    snr_db_grid: tuple[float, ...]
    r_grid: tuple[float, ...]
    trials: int
    seed: int
    piecewise_mode: str                 # "omit" | "user" | "calibrate"
    c_value: Optional[float]
    anchors_db: tuple[float, ...]
    calibrate_trials: int
    d_override: Optional[float]
    out_path: str
    config_hash: str


def derive_seed(base_seed: int, *indices: int) -> int:
    """Deterministic 64-bit sub-seed for a grid cell or auxiliary run."""
    ss = np.random.SeedSequence(entropy=base_seed, spawn_key=tuple(indices))
    return int(ss.generate_state(1, np.uint64)[0])


def load_matrix_csv(path: Path, expected_size: int, name: str) -> np.ndarray:
    """Read a square complex matrix stored as one 're,im' pair per line, row-major."""
    try:
        text = path.read_text()
    except OSError as exc:
        raise ValueError(f"cannot read {name} matrix file {path}: {exc}") from exc
    entries = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise ValueError(
                f"{name} matrix file {path}, line {lineno}: expected 're,im', got {line!r}"
            )
        try:
            entries.append(complex(float(parts[0]), float(parts[1])))
        except ValueError as exc:
            raise ValueError(
                f"{name} matrix file {path}, line {lineno}: non-numeric entry"
            ) from exc
    size = math.isqrt(len(entries))
    if size * size != len(entries) or size == 0:
        raise ValueError(
            f"{name} matrix file {path} holds {len(entries)} entries, not a square count"
        )
    if size != expected_size:
        raise ValueError(
            f"{name} matrix file {path} is {size}x{size}, expected "
            f"{expected_size}x{expected_size}"
        )
    return np.array(entries, dtype=complex).reshape(size, size)


def _build_model(spec: dict, dims: ChannelDims, base_dir: Path) -> tuple[CorrelationModel, str]:
    kind = spec.get("type")
    if kind == "iid":
        model: CorrelationModel = IidCorrelation()
    elif kind == "full":
        if "matrix_file" not in spec:
            raise ValueError("full correlation model requires 'matrix_file'")
        R = load_matrix_csv(base_dir / spec["matrix_file"], dims.size, "R")
        model = FullCorrelation(R)
    elif kind == "kronecker":
        if "tx_file" in spec or "rx_file" in spec:
            if not ("tx_file" in spec and "rx_file" in spec):
                raise ValueError("kronecker model needs both 'tx_file' and 'rx_file'")
            tx = load_matrix_csv(base_dir / spec["tx_file"], dims.m, "R_t")
            rx = load_matrix_csv(base_dir / spec["rx_file"], dims.n, "R_r")
        elif "rho_tx" in spec and "rho_rx" in spec:
            tx = exponential_correlation(dims.m, float(spec["rho_tx"]))
            rx = exponential_correlation(dims.n, float(spec["rho_rx"]))
        else:
            raise ValueError(
                "kronecker model needs either per-side matrix files or rho_tx/rho_rx"
            )
        model = KroneckerCorrelation(tx, rx)
    else:
        raise ValueError(f"unknown model type {kind!r}; use iid, full or kronecker")
    model_id = str(spec.get("id", kind))
    if any(ch in model_id for ch in ",\n\r"):
        raise ValueError(f"model id {model_id!r} must not contain commas or newlines")
    return model, model_id


def load_config(path: str | Path, seed_override: Optional[int] = None) -> SweepConfig:
    """Parse and validate a JSON sweep config, resolving matrix files."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except OSError as exc:
        raise ValueError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValueError(f"config {path} is not valid JSON: {exc}") from exc

    hasher = hashlib.sha256(json.dumps(raw, sort_keys=True).encode())

    try:
        dims = ChannelDims(int(raw["m"]), int(raw["n"]))
    except KeyError as exc:
        raise ValueError(f"config is missing antenna count {exc}") from exc

    model, model_id = _build_model(raw.get("model", {"type": "iid"}), dims, path.parent)
    for key in ("matrix_file", "tx_file", "rx_file"):
        if key in raw.get("model", {}):
            hasher.update((path.parent / raw["model"][key]).read_bytes())

    grid_spec = raw.get("snr_db")
    if not isinstance(grid_spec, dict):
        raise ValueError("config requires an 'snr_db' object with start/stop/step")
    start, stop = float(grid_spec["start"]), float(grid_spec["stop"])
    step = float(grid_spec["step"])
    if step <= 0.0:
        raise ValueError(f"snr_db.step must be > 0, got {step}")
    if stop < start:
        raise ValueError(f"snr_db.stop {stop} is below snr_db.start {start}")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    snr_grid = tuple(start + i * step for i in range(count))

    r_grid = tuple(float(v) for v in raw.get("r", []))
    if not r_grid:
        raise ValueError("config requires a non-empty 'r' grid")
    if any(v < 0.0 for v in r_grid):
        raise ValueError("multiplexing gains must be >= 0")

    trials = int(raw.get("trials", 0))
    if trials < MIN_TRIALS:
        raise ValueError(f"trials must be >= {MIN_TRIALS}, got {trials}")

    seed = int(raw.get("seed", 0)) if seed_override is None else int(seed_override)
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")

    pw = raw.get("piecewise", {"mode": "omit"})
    mode = pw.get("mode", "omit")
    c_value = None
    anchors_db: tuple[float, ...] = ()
    calibrate_trials = trials
    if mode == "user":
        c_value = float(pw["c"])
        if c_value <= 0.0:
            raise ValueError(f"piecewise c must be positive, got {c_value}")
    elif mode == "calibrate":
        anchors_db = tuple(float(v) for v in pw.get("anchors_db", ()))
        if not anchors_db:
            raise ValueError("piecewise calibrate mode requires 'anchors_db'")
        calibrate_trials = int(pw.get("trials", trials))
    elif mode != "omit":
        raise ValueError(f"unknown piecewise mode {mode!r}; use omit, user or calibrate")
    d_override = float(pw["d"]) if "d" in pw else None

    return SweepConfig(
        dims=dims,
        model=model,
        model_id=model_id,
        snr_db_grid=snr_grid,
        r_grid=tuple(sorted(r_grid)),
        trials=trials,
        seed=seed,
        piecewise_mode=mode,
        c_value=c_value,
        anchors_db=anchors_db,
        calibrate_trials=calibrate_trials,
        d_override=d_override,
        out_path=str(raw.get("out", "sweep.csv")),
        config_hash=hasher.hexdigest(),
    )


def _format_field(name: str, value) -> str:
    if value is None:
        return ""
    if name in _INT_FIELDS:
        return str(value)
    if name in _PROB_FIELDS:
        return f"{value:.8e}"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_sweep_csv(rows: list[SweepRow], path: str | Path, comments: list[str]) -> None:
    """Serialize rows with the canonical header; comments go first, '#'-prefixed."""
    lines = [f"# {c}" for c in comments]
    lines.append(",".join(SWEEP_COLUMNS))
    for row in rows:
        lines.append(
            ",".join(_format_field(name, getattr(row, name)) for name in SWEEP_COLUMNS)
        )
    Path(path).write_text("\n".join(lines) + "\n")


def read_sweep_csv(path: str | Path) -> list[SweepRow]:
    """Parse a sweep CSV back into rows (inverse of write_sweep_csv)."""
    lines = Path(path).read_text().splitlines()
    body = [ln for ln in lines if ln and not ln.startswith("#")]
    if not body:
        raise ValueError(f"{path} contains no header row")
    header = tuple(body[0].split(","))
    if header != SWEEP_COLUMNS:
        raise ValueError(
            f"{path} header mismatch: expected {','.join(SWEEP_COLUMNS)}"
        )
    rows = []
    for ln in body[1:]:
        parts = ln.split(",")
        if len(parts) != len(SWEEP_COLUMNS):
            raise ValueError(f"{path}: row has {len(parts)} fields, expected {len(SWEEP_COLUMNS)}")
        kwargs = {}
        for name, text in zip(SWEEP_COLUMNS, parts):
            if text == "":
                kwargs[name] = None
            elif name == "model_id":
                kwargs[name] = text
            elif name in _INT_FIELDS:
                kwargs[name] = int(text)
            else:
                kwargs[name] = float(text)
        rows.append(SweepRow(**kwargs))
    return rows


def _trial_floor(config: SweepConfig) -> list[str]:
    """Trial-count floor messages for ~10% relative CI half-width per r value."""
    problems = []
    for r in config.r_grid:
        if isinstance(config.model, IidCorrelation):
            p = low_snr_outage_iid(config.dims, r)
        else:
            p = correlation_power_cdf(config.model, config.dims).cdf(config.dims.m * r)
        if p > 0.0 and config.trials < 100.0 / p:
            problems.append(
                f"r={r}: trials={config.trials} is below the ~{math.ceil(100.0 / p)} "
                f"needed for a 10% relative interval at the plateau level {p:.3e}"
            )
    return problems


def _piecewise_setup(config: SweepConfig, threads: int):
    """Per-r piecewise constants: {r: (c, d)} with None marking unavailable parts."""
    dims, model = config.dims, config.model
    iid = isinstance(model, IidCorrelation)
    setup: dict[float, tuple[Optional[float], Optional[float]]] = {}
    for ri, r in enumerate(config.r_grid):
        if config.d_override is not None:
            d = config.d_override
        elif iid and r <= dims.min_dim:
            d = dmt(dims, r).d
        else:
            d = None
            if config.piecewise_mode != "omit":
                warnings.warn(
                    f"r={r}: no diversity exponent available (correlated model needs "
                    "an explicit piecewise 'd'); leaving p_piecewise blank",
                    stacklevel=2,
                )
        c = config.c_value
        if config.piecewise_mode == "calibrate" and d is not None and d > 0.0:
            anchors = [10.0 ** (db / 10.0) for db in config.anchors_db]
            try:
                result = calibrate_c(
                    model, dims, r, anchors,
                    config.calibrate_trials,
                    derive_seed(config.seed, ri, 1_000_000),
                    workers=threads,
                )
                c = result.c
            except ValueError as exc:
                warnings.warn(f"r={r}: calibration failed ({exc}); "
                              "leaving p_piecewise blank", stacklevel=2)
                c = None
        elif config.piecewise_mode == "calibrate" and d is not None:
            warnings.warn(f"r={r}: diversity gain is 0, nothing to calibrate", stacklevel=2)
            c = None
        setup[r] = (c, d)
    return setup


def run_sweep(config: SweepConfig, threads: int = 1, force: bool = False,
              out_path: Optional[str] = None) -> list[SweepRow]:
    """Run every (r, snr) cell, write the CSV, and print a short summary.

    Cells are dispatched to a thread pool; each cell's Monte Carlo seed is
    derived from (config seed, r index, snr index), so output is independent
    of scheduling.  Returns the sorted rows.
    """
    problems = _trial_floor(config)
    if problems:
        msg = "; ".join(problems)
        if not force:
            raise ValueError(f"trial floor violated ({msg}); pass force to proceed")
        warnings.warn(f"proceeding despite trial floor: {msg}", stacklevel=2)

    dims, model = config.dims, config.model
    iid = isinstance(model, IidCorrelation)
    f_h = None if iid else correlation_power_cdf(model, dims).cdf
    pw = _piecewise_setup(config, threads)

    def closed_forms(r: float) -> dict:
        out: dict = {}
        if iid:
            out["p_low_snr"] = low_snr_outage_iid(dims, r)
            out["p_low_outage_approx"] = low_outage_approx_iid(dims, r)
        else:
            out["p_low_snr"] = float(f_h(dims.m * r))
            try:
                out["p_low_outage_approx"] = low_outage_approx_correlated(model, dims, r)
            except ValueError:
                out["p_low_outage_approx"] = None
        out["d_dmt"] = dmt(dims, r).d if r <= dims.min_dim else None
        out["gamma_high_boundary"] = (
            regime_boundaries(r).gamma_high if 0.0 < r <= 1.0 else None
        )
        return out

    per_r = {r: closed_forms(r) for r in config.r_grid}

    def run_cell(cell: tuple[int, float, int, float]) -> SweepRow:
        ri, r, gi, snr_db = cell
        gamma = 10.0 ** (snr_db / 10.0)
        cell_seed = derive_seed(config.seed, ri, gi)
        est = estimate_outage(model, dims, gamma, r, config.trials, cell_seed)
        forms = per_r[r]
        c, d = pw[r]
        if c is not None and d is not None:
            plateau_cdf = f_h if f_h is not None else (lambda x: mrc_cdf(dims.size, x))
            p_piecewise = piecewise_outage(dims, r, gamma, PiecewiseParams(c, d), plateau_cdf)
        else:
            p_piecewise = None
        p_scalar = (
            scalar_outage_exact(r, gamma) if dims.size == 1 and 0.0 <= r <= 1.0 else None
        )
        return SweepRow(
            model_id=config.model_id,
            m=dims.m,
            n=dims.n,
            snr_db=snr_db,
            gamma=gamma,
            r=r,
            target_rate_nats=target_rate(r, gamma),
            p_mc=est.p_hat,
            ci_low=est.ci_low,
            ci_high=est.ci_high,
            p_low_snr=forms["p_low_snr"],
            p_low_outage_approx=forms["p_low_outage_approx"],
            p_piecewise=p_piecewise,
            p_scalar_exact=p_scalar,
            d_dmt=forms["d_dmt"],
            gamma_high_boundary=forms["gamma_high_boundary"],
            trials=config.trials,
            seed=cell_seed,
        )

    cells = [
        (ri, r, gi, snr_db)
        for ri, r in enumerate(config.r_grid)
        for gi, snr_db in enumerate(config.snr_db_grid)
    ]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(run_cell, cells))
    else:
        rows = [run_cell(c) for c in cells]
    rows.sort(key=lambda row: (row.r, row.snr_db))

    destination = out_path if out_path is not None else config.out_path
    comments = [
        f"mimo-outage {__version__} sweep",
        f"generated {datetime.now(timezone.utc).isoformat(timespec='seconds')}",
        f"config sha256 {config.config_hash} seed {config.seed}",
    ]
    write_sweep_csv(rows, destination, comments)

    print(f"wrote {len(rows)} rows to {destination}")
    for r in config.r_grid:
        sub = [row for row in rows if row.r == r]
        c, d = pw[r]
        pieces = f"c={c:.4g}, d={d:.4g}" if c is not None and d is not None else "no piecewise"
        print(
            f"r={r}: plateau {per_r[r]['p_low_snr']:.6e}, "
            f"p_mc from {sub[0].p_mc:.3e} ({sub[0].snr_db:g} dB) "
            f"to {sub[-1].p_mc:.3e} ({sub[-1].snr_db:g} dB), {pieces}"
        )
    return rows


def boundary_report(r_list: list[float]) -> str:
    """Low/high-SNR regime boundary table (dB) for scalar-channel gains."""
    for r in r_list:
        if not 0.0 < r <= 1.0:
            raise ValueError(f"boundary report needs r in (0, 1], got {r}")
    lines = [f"{'r':>6}  {'gamma_low_dB':>12}  {'gamma_high_dB':>13}"]
    for r in r_list:
        low, high = regime_boundaries(r)
        lines.append(
            f"{r:>6g}  {10.0 * math.log10(low):>12.1f}  {10.0 * math.log10(high):>13.1f}"
        )
    return "\n".join(lines)


def _default_threads() -> int:
    value = os.environ.get(THREADS_ENV_VAR, "")
    try:
        return max(1, int(value))
    except ValueError:
        return 1


def _parse_r_list(text: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad r list {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mimo-outage",
        description="MIMO outage probability: low-SNR closed forms vs Monte Carlo",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sweep = sub.add_parser("sweep", help="run a config-driven (snr, r) sweep to CSV")
    p_sweep.add_argument("--config", required=True, help="JSON sweep config")
    p_sweep.add_argument("--out", help="output CSV path (overrides config)")
    p_sweep.add_argument("--threads", type=int, default=_default_threads(),
                         help=f"worker threads (default from ${THREADS_ENV_VAR} or 1)")
    p_sweep.add_argument("--seed", type=int, help="override the config seed")
    p_sweep.add_argument("--force", action="store_true",
                         help="proceed even when trials are below the recommended floor")

    p_boundary = sub.add_parser("boundary", help="print low/high-SNR regime boundaries")
    p_boundary.add_argument("--r", required=True, type=_parse_r_list,
                            help="comma-separated multiplexing gains in (0, 1]")

    p_cal = sub.add_parser("calibrate", help="fit the high-SNR constant c from a config")
    p_cal.add_argument("--config", required=True, help="JSON sweep config (calibrate mode)")
    p_cal.add_argument("--threads", type=int, default=_default_threads())
    p_cal.add_argument("--seed", type=int, help="override the config seed")

    p_mc = sub.add_parser("mc", help="single-cell Monte Carlo outage estimate (i.i.d.)")
    p_mc.add_argument("--m", required=True, type=int)
    p_mc.add_argument("--n", required=True, type=int)
    p_mc.add_argument("--snr-db", required=True, type=float)
    p_mc.add_argument("--r", required=True, type=float)
    p_mc.add_argument("--trials", required=True, type=int)
    p_mc.add_argument("--seed", required=True, type=int)
    p_mc.add_argument("--threads", type=int, default=_default_threads())
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "sweep":
            config = load_config(args.config, seed_override=args.seed)
            run_sweep(config, threads=args.threads, force=args.force, out_path=args.out)
        elif args.command == "boundary":
            print(boundary_report(args.r))
        elif args.command == "calibrate":
            config = load_config(args.config, seed_override=args.seed)
            if config.piecewise_mode != "calibrate":
                raise ValueError("config must set piecewise mode 'calibrate'")
            anchors = [10.0 ** (db / 10.0) for db in config.anchors_db]
            for ri, r in enumerate(config.r_grid):
                result = calibrate_c(
                    config.model, config.dims, r, anchors,
                    config.calibrate_trials,
                    derive_seed(config.seed, ri, 1_000_000),
                    workers=args.threads,
                )
                per_anchor = ", ".join(f"{v:.4g}" for v in result.anchor_values)
                print(
                    f"r={r}: c={result.c:.6g} (d={result.d:g}, spread {result.spread:.2%}, "
                    f"anchors [{per_anchor}])"
                )
        elif args.command == "mc":
            dims = ChannelDims(args.m, args.n)
            gamma = 10.0 ** (args.snr_db / 10.0)
            est = estimate_outage(
                IidCorrelation(), dims, gamma, args.r, args.trials, args.seed,
                workers=args.threads,
            )
            print(
                f"p_hat={est.p_hat:.8e} ci95=[{est.ci_low:.8e}, {est.ci_high:.8e}] "
                f"outages={est.outage_count}/{est.trials} seed={est.seed}"
            )
        else:  # pragma: no cover - argparse enforces the choices
            raise ValueError(f"unknown command {args.command}")
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
