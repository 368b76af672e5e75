"""
Configuration-driven experiments: single runs through the whole pipeline,
(message size x reconfiguration delay) sweeps, speedup heatmaps and the
invariant suite behind `retri-schedules verify`.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from importlib.resources import files
from multiprocessing import Pool
from pathlib import Path
from typing import List, Literal, Optional, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .cost_model import (
    COST_COLUMNS,
    CostParams,
    closed_form_cost,
    cost_from_metrics,
    cost_row,
    crosscheck,
    effective_message_bytes,
)
from .optimizer import (
    AUDIT_MAX_PHASES,
    audit_balanced_plans,
    balanced_segments,
    optimal_R,
    plan_from_segments,
)
from .propagation import execute, verify_all_delivered
from .schedules import Algorithm, export_schedule, schedule_for
from .ternary import balanced_ternary_table, padded_size, phase_count
from .topology import ReconfigPlan, check_subring_minimality

package_files = files(__package__)

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_PATH = package_files / "resources" / "evaluation_grid.cfg"
# grids shipped with the package, loadable by name
BUNDLED_CONFIGS = ("evaluation_grid", "bruck_grid", "small_ring_grid", "large_ring_grid")

SWEEP_COLUMNS = COST_COLUMNS + ["speedup_vs_baseline"]
CHECK_COLUMNS = ["check", "ok", "detail"]
CROSSCHECK_RTOL = 1e-9

BYTE_UNITS = {"b": 1, "kb": 1024, "mb": 1024**2, "gb": 1024**3}
DURATION_UNITS_NS = {"ns": 1, "us": 1000, "µs": 1000, "ms": 10**6, "s": 10**9}
NS_PER_SECOND = 10**9
RATE_UNITS = {"bps": 1, "kbps": 10**3, "mbps": 10**6, "gbps": 10**9}
_QUANTITY = re.compile(r"^\s*([0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s*([^\s0-9.]*)\s*$")


class ConfigError(ValueError):
    """Invalid experiment configuration; `line` is None for command-line overrides."""

    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        where = f"line {line}: " if line is not None else ""
        what = f"{field}: " if field else ""
        super().__init__(f"{where}{what}{message}")


class GridMismatchError(ValueError):
    """Heatmap inputs cover different (message size, delta) grids."""


# ---------------------------------------------------------------------------
# units


def _quantity(text, units, default_unit):
    match = _QUANTITY.match(str(text))
    if not match:
        raise ValueError(f"Cannot parse quantity '{text}'")
    number, unit = match.groups()
    unit = (unit or default_unit).lower()
    if unit not in units:
        raise ValueError(f"Unknown unit '{unit}' in '{text}', expected one of {sorted(units)}")
    try:
        return Decimal(number) * units[unit]
    except InvalidOperation:
        raise ValueError(f"Cannot parse quantity '{text}'") from None


def parse_bytes(text):
    """'256MB' -> 268435456 (binary multiples); bare numbers are bytes."""
    value = _quantity(text, BYTE_UNITS, "b")
    if value != value.to_integral_value():
        raise ValueError(f"'{text}' is not a whole number of bytes")
    return int(value)


def parse_duration_ns(text):
    """'1.7us' -> 1700; bare numbers are seconds."""
    value = _quantity(text, DURATION_UNITS_NS, "s")
    if value != value.to_integral_value():
        raise ValueError(f"'{text}' is not a whole number of nanoseconds")
    return int(value)


def parse_duration(text):
    """Duration in seconds, parsed exactly through integer nanoseconds."""
    return parse_duration_ns(text) / NS_PER_SECOND


def parse_rate(text):
    """'400Gbps' -> 4e11 bits per second; bare numbers are bits per second."""
    return float(_quantity(text, RATE_UNITS, "bps"))


def _largest_unit(value, units):
    for unit, size in sorted(units.items(), key=lambda item: -item[1]):
        if value and value % size == 0:
            return f"{value // size}{unit}"
    return None


def format_bytes(nbytes):
    return _largest_unit(nbytes, {"B": 1, "KB": 1024, "MB": 1024**2, "GB": 1024**3}) or "0B"


def format_duration_ns(ns):
    return _largest_unit(ns, {"ns": 1, "us": 1000, "ms": 10**6, "s": 10**9}) or "0s"


def format_duration(seconds):
    return format_duration_ns(round(seconds * NS_PER_SECOND))


def format_rate(bits_per_s):
    if bits_per_s == int(bits_per_s):
        label = _largest_unit(int(bits_per_s), {"bps": 1, "Kbps": 10**3, "Mbps": 10**6, "Gbps": 10**9})
        if label:
            return label
    return f"{bits_per_s!r}bps"


def _parse_bool(text):
    value = str(text).strip().lower()
    if value in ("true", "yes", "on", "1"):
        return True
    if value in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"Expected a boolean, got '{text}'")


def _parse_reconfigs(text):
    value = str(text).strip().lower()
    if value == "auto":
        return "auto"
    try:
        return int(value)
    except ValueError:
        raise ValueError(f"Expected 'auto' or an integer, got '{text}'") from None


def _split_list(text):
    items = [item.strip() for item in str(text).split(",")]
    if not all(items):
        raise ValueError(f"Empty item in list '{text}'")
    return items


# ---------------------------------------------------------------------------
# configuration


class BaselineConfig(BaseModel):
    """Second algorithm the candidate's totals are compared against."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    algorithm: Algorithm
    n: int = Field(ge=2)
    reconfigs: Union[Literal["auto"], int] = "auto"

    @field_validator("algorithm", mode="before")
    @classmethod
    def _algorithm(cls, value):
        return Algorithm.parse(value)

    @field_validator("reconfigs")
    @classmethod
    def _reconfigs(cls, value):
        if value != "auto" and value < 0:
            raise ValueError(f"Reconfiguration count must be non-negative, got {value}")
        return value

    def __str__(self):
        return f"{self.algorithm.value}:{self.n}:{self.reconfigs}"


def parse_baseline(text):
    """'ALGO:N[:RECONFIGS]', e.g. 'direct:64' or 'bruck:64:auto'; 'none' disables."""
    value = str(text).strip()
    if value.lower() in ("", "none"):
        return None
    parts = value.split(":")
    if len(parts) not in (2, 3):
        raise ValueError(f"Baseline must be ALGO:N[:RECONFIGS], got '{text}'")
    fields = {"algorithm": parts[0], "n": int(parts[1])}
    if len(parts) == 3:
        fields["reconfigs"] = _parse_reconfigs(parts[2])
    return BaselineConfig(**fields)


def parse_baselines(text):
    """Comma-separated baselines for a comparison, e.g. 'bruck:8, direct:8'; 'none' is empty."""
    if str(text).strip().lower() in ("", "none"):
        return []
    return [parse_baseline(item) for item in _split_list(text)]


class ExperimentConfig(BaseModel):
    """One experiment: candidate algorithm, grid and model parameters.

    Durations are kept as integer nanoseconds so grid values such as 1.7us or
    150ms stay exact; `delta_seconds`, `alpha_s` and `alpha_h` expose them in
    seconds for the cost model and the CSV output.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    algorithm: Algorithm = Algorithm.RETRI
    n: int = Field(default=81, ge=2)
    message_bytes: List[int] = Field(default_factory=lambda: [1024], min_length=1)
    delta_ns: List[int] = Field(default_factory=lambda: [1000], min_length=1)
    alpha_s_ns: int = Field(default=1700, ge=0)
    alpha_h_ns: int = Field(default=1000, ge=0)
    bandwidth_bits_per_s: float = Field(default=400e9, gt=0)
    reconfigs: Union[Literal["auto"], int] = "auto"
    baseline: Optional[BaselineConfig] = None
    comparison: List[BaselineConfig] = Field(default_factory=list)
    normalize_per_node: bool = False

    @field_validator("algorithm", mode="before")
    @classmethod
    def _algorithm(cls, value):
        return Algorithm.parse(value)

    @field_validator("message_bytes")
    @classmethod
    def _sizes(cls, value):
        if any(m < 0 for m in value):
            raise ValueError(f"Message sizes must be non-negative, got {value}")
        return value

    @field_validator("delta_ns")
    @classmethod
    def _deltas(cls, value):
        if any(d < 0 for d in value):
            raise ValueError(f"Reconfiguration delays must be non-negative, got {value}")
        return value

    @field_validator("reconfigs")
    @classmethod
    def _reconfigs(cls, value):
        if value != "auto" and value < 0:
            raise ValueError(f"Reconfiguration count must be non-negative, got {value}")
        return value

    @property
    def delta_seconds(self):
        return [d / NS_PER_SECOND for d in self.delta_ns]

    @property
    def alpha_s(self):
        return self.alpha_s_ns / NS_PER_SECOND

    @property
    def alpha_h(self):
        return self.alpha_h_ns / NS_PER_SECOND

    def params(self, delta=None):
        return CostParams.from_bandwidth(
            self.alpha_s,
            self.alpha_h,
            self.bandwidth_bits_per_s,
            self.delta_seconds[0] if delta is None else delta,
        )

    def echo_lines(self):
        """Effective configuration as 'key = value' lines, readable by load_config."""
        values = {
            "algorithm": self.algorithm.value,
            "n": str(self.n),
            "message_bytes": ", ".join(format_bytes(m) for m in self.message_bytes),
            "delta": ", ".join(format_duration_ns(d) for d in self.delta_ns),
            "alpha_s": format_duration_ns(self.alpha_s_ns),
            "alpha_h": format_duration_ns(self.alpha_h_ns),
            "bandwidth": format_rate(self.bandwidth_bits_per_s),
            "reconfigs": str(self.reconfigs),
            "baseline": str(self.baseline) if self.baseline else "none",
            "compare": ", ".join(str(b) for b in self.comparison) or "none",
            "normalize_per_node": str(self.normalize_per_node).lower(),
        }
        return [f"{key} = {value}" for key, value in values.items()]


# config key -> (model field, value parser)
CONFIG_KEYS = {
    "algorithm": ("algorithm", lambda v: Algorithm.parse(v.strip())),
    "n": ("n", lambda v: int(v.strip())),
    "message_bytes": ("message_bytes", lambda v: [parse_bytes(x) for x in _split_list(v)]),
    "delta": ("delta_ns", lambda v: [parse_duration_ns(x) for x in _split_list(v)]),
    "alpha_s": ("alpha_s_ns", parse_duration_ns),
    "alpha_h": ("alpha_h_ns", parse_duration_ns),
    "bandwidth": ("bandwidth_bits_per_s", parse_rate),
    "reconfigs": ("reconfigs", _parse_reconfigs),
    "baseline": ("baseline", parse_baseline),
    "compare": ("comparison", parse_baselines),
    "normalize_per_node": ("normalize_per_node", _parse_bool),
}
_FIELD_KEYS = {field: key for key, (field, _) in CONFIG_KEYS.items()}


def _parse_entry(key, raw, line):
    if key not in CONFIG_KEYS:
        raise ConfigError(f"unknown key, expected one of {sorted(CONFIG_KEYS)}", key, line)
    field, parser = CONFIG_KEYS[key]
    try:
        return field, parser(raw)
    except ValidationError as e:
        raise ConfigError(e.errors()[0]["msg"], key, line) from None
    except ValueError as e:
        raise ConfigError(str(e), key, line) from None


def parse_config_text(text):
    """Parse 'key = value' lines into model fields.

    Returns
    -------
    values : dict
        model field -> parsed value
    lines : dict
        model field -> 1-based source line
    """
    values, lines = {}, {}
    for number, raw_line in enumerate(text.splitlines(), start=1):
        content = raw_line.split("#", 1)[0].strip()
        if not content:
            continue
        if "=" not in content:
            raise ConfigError(f"expected 'key = value', got '{content}'", None, number)
        key, raw = (part.strip() for part in content.split("=", 1))
        field, value = _parse_entry(key, raw, number)
        if field in values:
            raise ConfigError(f"duplicate key (first set on line {lines[field]})", key, number)
        values[field], lines[field] = value, number
    return values, lines


def load_config(path=None, overrides=None):
    """Read an experiment configuration file and apply overrides.

    Parameters
    ----------
    path : str or Path, optional
        config file or the name of a bundled grid (BUNDLED_CONFIGS), default
        the bundled evaluation grid
    overrides : dict, optional
        config key -> raw string value (e.g. from command-line flags); None
        values are ignored

    Returns
    -------
    ExperimentConfig
    """
    if path is None:
        source = DEFAULT_CONFIG_PATH
    elif str(path) in BUNDLED_CONFIGS:
        source = package_files / "resources" / f"{path}.cfg"
    else:
        source = Path(path)
    try:
        text = source.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config file: {e}") from None
    values, lines = parse_config_text(text)
    for key, raw in (overrides or {}).items():
        if raw is None:
            continue
        field, value = _parse_entry(key, raw, None)
        values[field] = value
        lines.pop(field, None)
    try:
        config = ExperimentConfig(**values)
    except ValidationError as e:
        error = e.errors()[0]
        field = error["loc"][0] if error["loc"] else None
        raise ConfigError(error["msg"], _FIELD_KEYS.get(field, field), lines.get(field)) from None
    logger.info("Loaded config from %s", source)
    return config


# ---------------------------------------------------------------------------
# runs


@dataclass(frozen=True)
class CellCost:
    algorithm: Algorithm
    n: int
    R: int
    cost: object
    extrapolated: bool


def effective_size(algorithm, n):
    """Ring size the algorithm actually runs on (padded for log-phase schedules)."""
    algorithm = Algorithm.parse(algorithm)
    return n if algorithm.radix is None else padded_size(n, algorithm.radix)


def cell_cost(algorithm, n, reconfigs, m, params):
    """Closed-form cost of one grid cell, choosing R* when reconfigs is 'auto'.

    The closed forms are priced with the bytes the blocks actually carry
    (ceil(m / n) per block), so non-divisible m costs what the schedule sends.
    """
    algorithm = Algorithm.parse(algorithm)
    n_eff = effective_size(algorithm, n)
    m_eff = effective_message_bytes(algorithm, n, m, n_eff)
    if algorithm.radix is None:
        if reconfigs not in ("auto", 0):
            raise ConfigError("the direct baseline cannot be reconfigured", "reconfigs")
        return CellCost(algorithm, n_eff, 0, closed_form_cost(algorithm, n_eff, m_eff, params), False)
    s = phase_count(n_eff, algorithm.radix)
    if reconfigs == "auto":
        R, cost = optimal_R(n_eff, m_eff, params, algorithm)
    else:
        if not 0 <= reconfigs < s:
            raise ConfigError(f"{reconfigs} outside [0, {s - 1}] for n={n_eff}", "reconfigs")
        R, cost = reconfigs, closed_form_cost(algorithm, n_eff, m_eff, params, reconfigs)
    extrapolated = algorithm is Algorithm.BRUCK_MIRRORED and 0 < R < s - 1
    return CellCost(algorithm, n_eff, R, cost, extrapolated)


def _speedup(candidate, baseline, normalize_per_node):
    ours, theirs = candidate.cost.total, baseline.cost.total
    if normalize_per_node:
        ours, theirs = ours / candidate.n, theirs / baseline.n
    return theirs / ours if ours > 0 else float("nan")


@dataclass(frozen=True)
class RunReport:
    """Everything one pipeline run produced.

    `crosscheck_error` is None on padded rings, where virtual blocks carry no
    bytes and the closed form at the padded size is an upper bound.
    """

    algorithm: Algorithm
    n_requested: int
    n: int
    m: int
    params: CostParams
    plan: ReconfigPlan
    closed: object
    simulated: object
    crosscheck_error: Optional[float]
    metrics: list
    delivery: object
    extrapolated: bool = False
    baseline: Optional[CellCost] = None
    speedup: Optional[float] = None

    @property
    def R(self):
        return self.closed.R

    @property
    def padded(self):
        return self.n != self.n_requested

    @property
    def ok(self):
        return self.delivery.ok and (self.crosscheck_error is None or self.crosscheck_error < CROSSCHECK_RTOL)

    def row(self):
        row = cost_row(self.algorithm, self.n, self.m, self.params, self.closed)
        row["speedup_vs_baseline"] = float("nan") if self.speedup is None else self.speedup
        return row


def _plan_for(algorithm, s, R):
    if algorithm.radix is None:
        return ReconfigPlan.static(s)
    return plan_from_segments(balanced_segments(s, R))


def run_single(config, message_bytes=None, delta=None, schedule_path=None):
    """Schedule, execute, verify and cost one (m, delta) cell of `config`.

    Parameters
    ----------
    config : ExperimentConfig
    message_bytes : int, optional
        default the first message size of the config
    delta : float, optional
        reconfiguration delay in seconds, default the first of the config
    schedule_path : str or Path, optional
        also export the generated schedule there

    Returns
    -------
    RunReport
    """
    m = config.message_bytes[0] if message_bytes is None else message_bytes
    params = config.params(delta)
    candidate = cell_cost(config.algorithm, config.n, config.reconfigs, m, params)

    schedule = schedule_for(config.algorithm, config.n, m, pad=True)
    if schedule_path is not None:
        export_schedule(schedule, schedule_path)
    plan = _plan_for(config.algorithm, schedule.s, candidate.R)
    final, metrics = execute(schedule, plan)
    delivery = verify_all_delivered(final, schedule)
    simulated = cost_from_metrics(metrics, params, candidate.R)

    error = None if schedule.padded else crosscheck(candidate.cost.total, simulated)
    if schedule.padded:
        logger.info("Ring of %d nodes padded to %d", config.n, schedule.n)
    if candidate.extrapolated:
        logger.info("Bruck cost with R=%d is a model extrapolation", candidate.R)

    baseline, speedup = None, None
    if config.baseline is not None:
        b = config.baseline
        baseline = cell_cost(b.algorithm, b.n, b.reconfigs, m, params)
        speedup = _speedup(candidate, baseline, config.normalize_per_node)

    return RunReport(
        algorithm=config.algorithm,
        n_requested=config.n,
        n=schedule.n,
        m=m,
        params=params,
        plan=plan,
        closed=candidate.cost,
        simulated=simulated,
        crosscheck_error=error,
        metrics=metrics,
        delivery=delivery,
        extrapolated=candidate.extrapolated,
        baseline=baseline,
        speedup=speedup,
    )


def _sweep_cell(args):
    config, m, delta = args
    params = config.params(delta)
    candidate = cell_cost(config.algorithm, config.n, config.reconfigs, m, params)
    row = cost_row(config.algorithm, candidate.n, m, params, candidate.cost)
    if config.baseline is None:
        row["speedup_vs_baseline"] = float("nan")
    else:
        b = config.baseline
        baseline = cell_cost(b.algorithm, b.n, b.reconfigs, m, params)
        row["speedup_vs_baseline"] = _speedup(candidate, baseline, config.normalize_per_node)
    return row


def run_sweep(config, n_jobs=1):
    """Closed-form cost of every (m, delta) cell, m outer and delta inner.

    Parameters
    ----------
    config : ExperimentConfig
    n_jobs : int, default=1
        worker processes; rows keep grid order either way

    Returns
    -------
    pd.DataFrame
        columns SWEEP_COLUMNS
    """
    cells = [(config, m, delta) for m in config.message_bytes for delta in config.delta_seconds]
    if n_jobs > 1:
        with Pool(n_jobs) as pool:
            rows = pool.map(_sweep_cell, cells)
    else:
        rows = [_sweep_cell(cell) for cell in cells]
    logger.info("Evaluated %d sweep cells", len(rows))
    return pd.DataFrame(rows, columns=SWEEP_COLUMNS)


def sweep_csv(frame, config):
    """CSV text with the effective configuration echoed as '# key = value' lines."""
    header = "".join(f"# {line}\n" for line in config.echo_lines())
    return header + frame.to_csv(index=False, lineterminator="\n")


def write_sweep(frame, config, path):
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(sweep_csv(frame, config))
    return path


def read_sweep(path):
    return pd.read_csv(path, comment="#", float_precision="round_trip")


# ---------------------------------------------------------------------------
# heatmaps


def emit_heatmap(sweep, baseline, normalize_per_node=False):
    """Speedup matrix baseline_total / candidate_total over the sweep grid.

    Parameters
    ----------
    sweep, baseline : pd.DataFrame or path
        sweep tables (or CSV files) of the candidate and the baseline
    normalize_per_node : bool, default=False
        divide each total by its ring size first

    Returns
    -------
    speedups : pd.DataFrame
        rows message sizes, columns deltas
    reconfigs : pd.DataFrame
        candidate R per cell, same shape
    """
    if not isinstance(sweep, pd.DataFrame):
        sweep = read_sweep(sweep)
    if not isinstance(baseline, pd.DataFrame):
        baseline = read_sweep(baseline)
    keys = ["m_bytes", "delta"]
    for name, frame in (("sweep", sweep), ("baseline", baseline)):
        if frame.duplicated(keys).any():
            raise GridMismatchError(f"{name} table has repeated (m_bytes, delta) cells")
    ours = set(map(tuple, sweep[keys].itertuples(index=False)))
    theirs = set(map(tuple, baseline[keys].itertuples(index=False)))
    if ours != theirs:
        missing = sorted(ours ^ theirs)[:5]
        raise GridMismatchError(f"Sweep and baseline grids differ, e.g. at {missing}")

    merged = sweep.merge(baseline, on=keys, suffixes=("", "_baseline"))
    ours_total, theirs_total = merged["total"], merged["total_baseline"]
    if normalize_per_node:
        ours_total, theirs_total = ours_total / merged["n"], theirs_total / merged["n_baseline"]
    merged["speedup"] = theirs_total / ours_total

    speedups = merged.pivot(index="m_bytes", columns="delta", values="speedup").sort_index().sort_index(axis=1)
    reconfigs = merged.pivot(index="m_bytes", columns="delta", values="R").sort_index().sort_index(axis=1)
    return speedups, reconfigs.astype(int)


def write_heatmap(speedups, reconfigs, path):
    """Matrix CSV with two decimals plus an '<stem>_R<suffix>' sidecar of R per cell."""
    path = Path(path)
    speedups.to_csv(path, float_format="%.2f")
    sidecar = path.with_name(f"{path.stem}_R{path.suffix}")
    reconfigs.to_csv(sidecar)
    return path, sidecar


def render_heatmap_text(speedups, reconfigs=None):
    """Plain-text table, e.g. '6.18 (R=3)' per cell, with unit-formatted labels."""
    cells = speedups.apply(lambda column: column.map("{:.2f}".format))
    if reconfigs is not None:
        cells = cells + reconfigs.astype(int).apply(lambda column: column.map(" (R={})".format))
    cells.index = [format_bytes(int(m)) for m in speedups.index]
    cells.columns = [format_duration(d) for d in speedups.columns]
    cells.index.name = "m \\ delta"
    return cells.to_string()


# ---------------------------------------------------------------------------
# multi-baseline comparisons

# short cell tags: reconfigurable Bruck (B), static ring (S)
BASELINE_TAGS = {Algorithm.BRUCK_MIRRORED: "B", Algorithm.DIRECT: "S", Algorithm.RETRI: "T"}


@dataclass(frozen=True)
class BaselineComparison:
    """Candidate speedups against several baselines on one grid.

    `best` names, per cell, the baseline with the lowest (normalized) total,
    i.e. the stronger baseline the candidate has to beat.
    """

    speedups: dict
    reconfigs: pd.DataFrame
    best: pd.DataFrame

    @property
    def labels(self):
        return list(self.speedups)

    def best_speedups(self):
        """Speedup over the stronger baseline of every cell."""
        first = next(iter(self.speedups.values()))
        values = np.minimum.reduce([s.to_numpy() for s in self.speedups.values()])
        return pd.DataFrame(values, index=first.index, columns=first.columns)

    def tags(self):
        """Display tag per label; full labels when two baselines share an algorithm."""
        tags = {label: BASELINE_TAGS[Algorithm.parse(label.split(":")[0])] for label in self.labels}
        if len(set(tags.values())) < len(tags):
            return {label: label for label in self.labels}
        return tags


def _baseline_label(frame):
    if frame.empty:
        raise GridMismatchError("baseline table has no rows")
    return f"{Algorithm.parse(frame['algorithm'].iloc[0]).value}:{int(frame['n'].iloc[0])}"


def emit_comparison(sweep, baselines, normalize_per_node=False):
    """Speedup matrices of the candidate against every baseline, plus the stronger one.

    Parameters
    ----------
    sweep : pd.DataFrame or path
        sweep table (or CSV) of the candidate
    baselines : list of pd.DataFrame or path
        sweep tables of the baselines, all on the candidate's grid
    normalize_per_node : bool, default=False
        divide each total by its ring size first

    Returns
    -------
    BaselineComparison
    """
    if not baselines:
        raise ValueError("A comparison needs at least one baseline")
    if not isinstance(sweep, pd.DataFrame):
        sweep = read_sweep(sweep)
    speedups, reconfigs = {}, None
    for baseline in baselines:
        if not isinstance(baseline, pd.DataFrame):
            baseline = read_sweep(baseline)
        label = _baseline_label(baseline)
        if label in speedups:
            raise GridMismatchError(f"baseline {label} given twice")
        speedups[label], reconfigs = emit_heatmap(sweep, baseline, normalize_per_node)

    first = next(iter(speedups.values()))
    stacked = np.stack([s.to_numpy() for s in speedups.values()])
    # argmin keeps the first baseline on ties
    winners = np.array(list(speedups), dtype=object)[np.argmin(stacked, axis=0)]
    best = pd.DataFrame(winners, index=first.index, columns=first.columns)
    return BaselineComparison(speedups, reconfigs, best)


def _long_form(matrix, name):
    return matrix.reset_index().melt(id_vars="m_bytes", var_name="delta", value_name=name)


def write_comparison(comparison, path):
    """One row per cell: m_bytes, delta, R, speedup_<label> per baseline, best."""
    keys = ["m_bytes", "delta"]
    table = _long_form(comparison.reconfigs, "R")
    for label, speedups in comparison.speedups.items():
        table = table.merge(_long_form(speedups, f"speedup_{label}"), on=keys)
    table = table.merge(_long_form(comparison.best, "best"), on=keys)
    table.sort_values(keys).to_csv(path, index=False)
    return Path(path)


def render_comparison_text(comparison):
    """Plain-text table, e.g. 'B 1.26* S 2.04 (R=1)'; '*' marks the stronger baseline."""
    tags = comparison.tags()
    best = comparison.best.to_numpy()
    reconfigs = comparison.reconfigs.to_numpy()
    matrices = {label: s.to_numpy() for label, s in comparison.speedups.items()}
    rows = []
    for i in range(best.shape[0]):
        row = []
        for j in range(best.shape[1]):
            parts = [
                f"{tags[label]} {values[i, j]:.2f}" + ("*" if best[i, j] == label else "")
                for label, values in matrices.items()
            ]
            row.append(" ".join(parts) + f" (R={int(reconfigs[i, j])})")
        rows.append(row)
    cells = pd.DataFrame(
        rows,
        index=[format_bytes(int(m)) for m in comparison.best.index],
        columns=[format_duration(d) for d in comparison.best.columns],
    )
    cells.index.name = "m \\ delta"
    legend = ", ".join(f"{tags[label]} = {label}" for label in matrices)
    return f"{cells.to_string()}\n* stronger baseline; {legend}"


def _baseline_config(config, baseline):
    return config.model_copy(
        update={
            "algorithm": baseline.algorithm,
            "n": baseline.n,
            "reconfigs": baseline.reconfigs,
            "baseline": None,
            "comparison": [],
        }
    )


def run_comparison(config, n_jobs=1):
    """Sweep the candidate and every `compare` baseline of `config`, then compare."""
    if not config.comparison:
        raise ConfigError("no baselines to compare against", "compare")
    sweep = run_sweep(config, n_jobs)
    baselines = [run_sweep(_baseline_config(config, b), n_jobs) for b in config.comparison]
    return emit_comparison(sweep, baselines, config.normalize_per_node)


# ---------------------------------------------------------------------------
# audits


def audit_reconfiguration_plans(config):
    """Balanced-plan optimality over every grid cell (log-phase algorithms, s <= 8).

    Returns
    -------
    pd.DataFrame
        m_bytes, delta, ok, counterexamples (one row per cell; empty when the
        candidate has no plans to audit)
    """
    columns = ["m_bytes", "delta", "ok", "counterexamples"]
    algorithm = config.algorithm
    if algorithm.radix is None:
        return pd.DataFrame(columns=columns)
    n_eff = effective_size(algorithm, config.n)
    rows = []
    for m in config.message_bytes:
        for delta in config.delta_seconds:
            m_eff = effective_message_bytes(algorithm, config.n, m, n_eff)
            audit = audit_balanced_plans(n_eff, m_eff, config.params(delta), algorithm)
            rows.append((m, delta, audit.ok, "; ".join(f"R={c[0]}:{c[1]}" for c in audit.counterexamples)))
    return pd.DataFrame(rows, columns=columns)


def _hop_law_holds(metrics, plan, radix):
    for k, m in enumerate(metrics):
        expected = radix ** (k - plan.active_phase(k))
        if m.hops != expected or abs(m.congestion - expected) > 1e-12:
            return False
    return True


def _plans_to_check(s):
    candidates = [ReconfigPlan.static(s), ReconfigPlan.every_phase(s)]
    candidates += [ReconfigPlan.single_boundary(s, k) for k in range(1, s)]
    # s = 1 and s = 2 repeat plans
    unique = {}
    for plan in candidates:
        unique.setdefault(str(plan), plan)
    return list(unique.values())


def verify_invariants(config):
    """Delivery, placement and model-agreement checks for the configured candidate.

    Returns
    -------
    pd.DataFrame
        one row per named check: check, ok, detail
    """
    algorithm = config.algorithm
    n_eff = effective_size(algorithm, config.n)
    # 6-byte blocks split evenly into Bruck halves and into thirds
    m = 6 * n_eff
    params = config.params()
    schedule = schedule_for(algorithm, n_eff, m, pad=False)
    checks = []

    if algorithm.radix is None:
        final, metrics = execute(schedule)
        delivery = verify_all_delivered(final, schedule)
        checks.append(("delivery static", delivery.ok, f"{len(delivery.misplaced)} misplaced"))
        closed = closed_form_cost(algorithm, n_eff, m, params)
        error = crosscheck(closed.total, cost_from_metrics(metrics, params))
        checks.append(("closed form R=0", error < CROSSCHECK_RTOL, f"relative error {error:.3g}"))
        return pd.DataFrame(checks, columns=CHECK_COLUMNS)

    radix, s = algorithm.radix, schedule.s
    for plan in _plans_to_check(s):
        final, metrics = execute(schedule, plan)
        delivery = verify_all_delivered(final, schedule)
        checks.append((f"delivery {plan}", delivery.ok, f"{len(delivery.misplaced)} misplaced"))
        checks.append((f"hop/congestion law {plan}", _hop_law_holds(metrics, plan, radix), ""))

    for k in range(s):
        checks.append((f"subring minimality k={k}", check_subring_minimality(n_eff, k, radix), ""))

    if radix == 3:
        table = balanced_ternary_table(n_eff).astype(np.int64)
        values = table @ (3 ** np.arange(s, dtype=np.int64))
        distinct = len(np.unique(table, axis=0)) == n_eff
        bijective = distinct and np.array_equal(values % n_eff, np.arange(n_eff))
        checks.append(("digit bijection", bool(bijective), f"{n_eff} offsets"))
        per_direction = {
            len(ids)
            for phase in schedule.phases
            for sends in phase.sends
            for ids in (sends.to_left, sends.to_right)
        }
        balanced = per_direction == {n_eff // 3}
        checks.append(("n/3 blocks per direction", balanced, f"counts {sorted(per_direction)}"))

    for R in range(s):
        plan = plan_from_segments(balanced_segments(s, R))
        _, metrics = execute(schedule, plan)
        closed = closed_form_cost(algorithm, n_eff, m, params, R)
        error = crosscheck(closed.total, cost_from_metrics(metrics, params, R))
        checks.append((f"closed form R={R}", error < CROSSCHECK_RTOL, f"relative error {error:.3g}"))

    if s <= AUDIT_MAX_PHASES:
        audit = audit_reconfiguration_plans(config)
        bad = audit[~audit["ok"]]
        detail = f"{len(bad)} of {len(audit)} cells with counterexamples"
        checks.append(("balanced plan audit", bad.empty, detail))
    else:
        logger.info("Skipping plan audit for s=%d", s)

    return pd.DataFrame(checks, columns=CHECK_COLUMNS)
