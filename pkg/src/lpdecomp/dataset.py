"""Time-series container, CSV loading, transforms, and per-horizon design matrices.

The design convention is a direct projection of an outcome led h periods on
the date-t shock plus controls:

    y_{t+h} = xi_h + beta_h * s_t + gamma_h' Z_t + v_{t+h}

Each horizon h in 0..H gets its own design with column order

    [intercept, trend_1..trend_d, shock, target lags, shock lags, control lags]

so the shock column index is always 1 + trend_degree.  Rows are indexed by the
date of the shock s_t, which is the date every weight and contribution later
attaches to.
"""
from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field

import numpy as np

from .util import DataError, DesignError, moving_average

__all__ = [
    "TimeSeriesFrame",
    "LPSpec",
    "HorizonDesign",
    "load_csv",
    "transform",
    "subsample",
    "build_designs",
]

_ANNUAL_RE = re.compile(r"^(\d{4})$")
_MONTH_RE = re.compile(r"^(\d{4})-(\d{2})$")
_DAY_RE = re.compile(r"^(\d{4})-(\d{2})-(\d{2})$")
_QUARTER_RE = re.compile(r"^(\d{4})-?Q([1-4])$")


def _parse_one_date(token: str) -> tuple[str, int]:
    """Return (frequency, period ordinal) for one date token."""
    token = token.strip()
    m = _ANNUAL_RE.match(token)
    if m:
        return "A", int(m.group(1))
    m = _MONTH_RE.match(token)
    if m:
        y, mo = int(m.group(1)), int(m.group(2))
        if not 1 <= mo <= 12:
            raise DataError(f"month out of range in date {token!r}")
        return "M", y * 12 + (mo - 1)
    m = _DAY_RE.match(token)
    if m:
        y, mo, d = int(m.group(1)), int(m.group(2)), int(m.group(3))
        if not 1 <= mo <= 12 or not 1 <= d <= 31:
            raise DataError(f"invalid calendar date {token!r}")
        return "M", y * 12 + (mo - 1)
    m = _QUARTER_RE.match(token)
    if m:
        y, q = int(m.group(1)), int(m.group(2))
        return "Q", y * 4 + (q - 1)
    raise DataError(
        f"unrecognised date {token!r}; expected YYYY, YYYY-MM, YYYY-MM-DD or YYYYQn"
    )


def _validate_dates(dates: tuple[str, ...]) -> str:
    """Check strictly increasing, single-format, step-of-one dates; return freq."""
    if len(dates) == 0:
        raise DataError("empty date column")
    freq, prev = _parse_one_date(dates[0])
    day_suffix = dates[0][8:10] if _DAY_RE.match(dates[0].strip()) else None
    for i, tok in enumerate(dates[1:], start=1):
        f, ordinal = _parse_one_date(tok)
        if f != freq:
            raise DataError(
                f"mixed date frequencies: row 0 is {dates[0]!r} but row {i} is {tok!r}"
            )
        if day_suffix is not None and tok.strip()[8:10] != day_suffix:
            raise DataError(
                f"day-of-month must be constant for monthly stamps; row {i} is {tok!r}"
            )
        if ordinal <= prev:
            raise DataError(
                f"dates must be strictly increasing; row {i} ({tok!r}) does not follow {dates[i - 1]!r}"
            )
        if ordinal - prev != 1:
            raise DataError(
                f"non-uniform frequency: gap of {ordinal - prev} periods between "
                f"{dates[i - 1]!r} and {tok!r}"
            )
        prev = ordinal
    return freq


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(a, dtype=np.float64)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class TimeSeriesFrame:
    """Aligned named series over a regular date grid.

    Frames are immutable: transforms return new frames, and the stored arrays
    are marked read-only so fitted objects can share them safely.
    """

    dates: tuple[str, ...]
    columns: dict[str, np.ndarray]
    freq: str = field(default="")

    def __post_init__(self) -> None:
        if not self.columns:
            raise DataError("frame needs at least one value column")
        freq = _validate_dates(self.dates)
        if self.freq and self.freq != freq:
            raise DataError(f"declared frequency {self.freq!r} does not match dates ({freq!r})")
        object.__setattr__(self, "freq", freq)
        n = len(self.dates)
        clean: dict[str, np.ndarray] = {}
        for name, values in self.columns.items():
            arr = np.asarray(values, dtype=np.float64)
            if arr.ndim != 1:
                raise DataError(f"column {name!r} is not one-dimensional")
            if arr.shape[0] != n:
                raise DataError(
                    f"column {name!r} has {arr.shape[0]} rows but the date column has {n}"
                )
            if not np.all(np.isfinite(arr)):
                bad = int(np.flatnonzero(~np.isfinite(arr))[0])
                raise DataError(
                    f"column {name!r} has a missing or non-finite value at {self.dates[bad]!r}"
                )
            clean[name] = _readonly(arr)
        object.__setattr__(self, "columns", clean)

    @property
    def n_obs(self) -> int:
        return len(self.dates)

    def column(self, name: str) -> np.ndarray:
        if name not in self.columns:
            raise DataError(
                f"no column {name!r}; available: {', '.join(sorted(self.columns))}"
            )
        return self.columns[name]

    def slice(self, start: int, stop: int) -> "TimeSeriesFrame":
        """Row slice [start, stop) as a new frame."""
        if not 0 <= start < stop <= self.n_obs:
            raise DataError(f"bad slice [{start}, {stop}) for {self.n_obs} rows")
        return TimeSeriesFrame(
            dates=self.dates[start:stop],
            columns={k: v[start:stop] for k, v in self.columns.items()},
        )


def load_csv(path: str, date_column: str = "date") -> TimeSeriesFrame:
    """Load an RFC-4180 CSV with a header row into a TimeSeriesFrame.

    Every non-date cell must parse as a finite float; blanks are treated as
    missing data and rejected, because the estimators need a gap-free sample.
    """
    try:
        fh = open(path, "r", newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if date_column not in header:
            raise DataError(f"{path}: no {date_column!r} column in header {header}")
        if len(set(header)) != len(header):
            raise DataError(f"{path}: duplicate column names in header")
        date_pos = header.index(date_column)
        value_names = [h for i, h in enumerate(header) if i != date_pos]
        if not value_names:
            raise DataError(f"{path}: no value columns besides the date")
        dates: list[str] = []
        values: list[list[float]] = [[] for _ in value_names]
        for rownum, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DataError(
                    f"{path}: row {rownum} has {len(row)} fields, expected {len(header)}"
                )
            dates.append(row[date_pos].strip())
            j = 0
            for i, cell in enumerate(row):
                if i == date_pos:
                    continue
                cell = cell.strip()
                if cell == "":
                    raise DataError(
                        f"{path}: missing value for {value_names[j]!r} at row {rownum}"
                    )
                try:
                    values[j].append(float(cell))
                except ValueError:
                    raise DataError(
                        f"{path}: cannot parse {cell!r} as a number "
                        f"({value_names[j]!r}, row {rownum})"
                    ) from None
                j += 1
    return TimeSeriesFrame(
        dates=tuple(dates),
        columns={name: np.asarray(col) for name, col in zip(value_names, values)},
    )


def _bound_to_ordinal(token: str, freq: str, side: str) -> int:
    """Map a possibly coarser date bound onto the frame's period scale."""
    f, o = _parse_one_date(token)
    if f == freq:
        return o
    if f == "A" and freq == "M":
        return o * 12 if side == "start" else o * 12 + 11
    if f == "A" and freq == "Q":
        return o * 4 if side == "start" else o * 4 + 3
    raise DataError(
        f"subsample bound {token!r} does not match the frame frequency {freq!r}"
    )


def subsample(frame: TimeSeriesFrame, start: str | None = None, end: str | None = None) -> TimeSeriesFrame:
    """Inclusive date-range restriction; bounds may be coarser than the data."""
    ordinals = [_parse_one_date(d)[1] for d in frame.dates]
    lo = _bound_to_ordinal(start, frame.freq, "start") if start else ordinals[0]
    hi = _bound_to_ordinal(end, frame.freq, "end") if end else ordinals[-1]
    keep = [i for i, o in enumerate(ordinals) if lo <= o <= hi]
    if not keep:
        raise DataError(f"subsample [{start!r}, {end!r}] selects no rows")
    return frame.slice(keep[0], keep[-1] + 1)


_TRANSFORMS = ("diff", "log_diff", "standardize", "cumulative_lead_sum", "moving_average")


def transform(
    frame: TimeSeriesFrame,
    op: str,
    columns: list[str] | tuple[str, ...] | None = None,
    *,
    horizon: int | None = None,
    window: int | None = None,
) -> TimeSeriesFrame:
    """Apply a column transform and re-align the whole frame.

    Ops and their row trims:

    - ``diff``: first difference, drops the first row.
    - ``log_diff``: difference of logs, drops the first row; requires positive values.
    - ``standardize``: subtract the mean, divide by the population (1/T) standard
      deviation; no trim.
    - ``cumulative_lead_sum``: value at t becomes sum of rows t..t+horizon, drops
      the last ``horizon`` rows.
    - ``moving_average``: trailing mean over ``window`` rows, drops the first
      ``window - 1`` rows.

    Untransformed columns are sliced to the surviving rows so the frame stays
    rectangular and date-aligned.
    """
    if op not in _TRANSFORMS:
        raise DataError(f"unknown transform {op!r}; expected one of {_TRANSFORMS}")
    names = list(columns) if columns is not None else list(frame.columns)
    for name in names:
        frame.column(name)

    head, tail = 0, 0
    if op in ("diff", "log_diff"):
        head = 1
    elif op == "cumulative_lead_sum":
        if horizon is None or horizon < 0:
            raise DataError("cumulative_lead_sum needs a horizon >= 0")
        tail = horizon
    elif op == "moving_average":
        if window is None or window < 1:
            raise DataError("moving_average needs a window >= 1")
        head = window - 1
    n = frame.n_obs
    if n - head - tail < 1:
        raise DataError(f"transform {op!r} leaves no rows (T={n})")

    new_cols: dict[str, np.ndarray] = {}
    for name, vals in frame.columns.items():
        if name not in names:
            new_cols[name] = vals[head : n - tail]
            continue
        if op == "diff":
            new_cols[name] = np.diff(vals)
        elif op == "log_diff":
            if np.any(vals <= 0):
                bad = int(np.flatnonzero(vals <= 0)[0])
                raise DataError(
                    f"log_diff needs positive values; column {name!r} is "
                    f"{vals[bad]} at {frame.dates[bad]!r}"
                )
            new_cols[name] = np.diff(np.log(vals))
        elif op == "standardize":
            mu = float(np.mean(vals))
            sd = float(np.sqrt(np.mean((vals - mu) ** 2)))
            if sd == 0.0:
                raise DataError(f"cannot standardize constant column {name!r}")
            new_cols[name] = (vals - mu) / sd
        elif op == "cumulative_lead_sum":
            csum = np.concatenate(([0.0], np.cumsum(vals)))
            new_cols[name] = csum[horizon + 1 :] - csum[: n - horizon]
        elif op == "moving_average":
            new_cols[name] = moving_average(vals, window)
    return TimeSeriesFrame(dates=frame.dates[head : n - tail], columns=new_cols)


@dataclass(frozen=True)
class LPSpec:
    """What to project on what: names, lag order, horizon grid, options.

    ``controls`` enter as lags 1..p (0..p when ``contemporaneous_controls``);
    the target and shock always contribute lags 1..p on top of the
    contemporaneous shock regressor.
    """

    target: str
    shock: str
    controls: tuple[str, ...] = ()
    lags: int = 0
    horizons: int = 0
    trend_degree: int = 0
    cumulate: bool = False
    standardize_shock: bool = False
    common_sample: bool = False
    contemporaneous_controls: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "controls", tuple(self.controls))
        if self.lags < 0:
            raise DesignError(f"lags must be >= 0, got {self.lags}")
        if self.horizons < 0:
            raise DesignError(f"horizons must be >= 0, got {self.horizons}")
        if not 0 <= self.trend_degree <= 4:
            raise DesignError(f"trend_degree must be in 0..4, got {self.trend_degree}")
        if self.shock == self.target:
            raise DesignError("shock and target must be different columns")
        if self.shock in self.controls:
            raise DesignError(f"shock {self.shock!r} cannot also be a control")
        if self.target in self.controls:
            raise DesignError(f"target {self.target!r} cannot also be a control")
        if len(set(self.controls)) != len(self.controls):
            raise DesignError("duplicate control names")

    @property
    def n_regressors(self) -> int:
        extra = 1 if self.contemporaneous_controls else 0
        return (
            1
            + self.trend_degree
            + 1
            + 2 * self.lags
            + len(self.controls) * (self.lags + extra)
        )


@dataclass(frozen=True)
class HorizonDesign:
    """One horizon's regression pieces: y led h periods against [1, trend, s_t, lags]."""

    horizon: int
    y: np.ndarray
    X: np.ndarray
    shock_col: int
    column_names: tuple[str, ...]
    dates: tuple[str, ...]
    target: str
    shock: str
    lags: int
    sample_policy: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "y", _readonly(self.y))
        object.__setattr__(self, "X", _readonly(self.X))
        t, k = self.X.shape
        if self.y.shape != (t,):
            raise DesignError(f"y has shape {self.y.shape}, X has {t} rows")
        if len(self.dates) != t:
            raise DesignError("row dates misaligned with X")
        if len(self.column_names) != k:
            raise DesignError("column names misaligned with X")
        if not 0 <= self.shock_col < k:
            raise DesignError(f"shock_col {self.shock_col} out of range for K={k}")

    @property
    def n_obs(self) -> int:
        return self.X.shape[0]

    @property
    def n_regressors(self) -> int:
        return self.X.shape[1]


def _trend_columns(n_rows: int, degree: int) -> np.ndarray:
    """Powers of a 0..1 ramp, orthonormalized against the intercept and each other."""
    if degree == 0:
        return np.empty((n_rows, 0))
    ramp = np.zeros(n_rows) if n_rows == 1 else np.arange(n_rows) / (n_rows - 1)
    basis = [np.full(n_rows, 1.0 / math.sqrt(n_rows))]
    out = []
    for d in range(1, degree + 1):
        v = ramp**d
        for _ in range(2):  # one re-orthogonalization pass for stability
            for b in basis:
                v = v - (b @ v) * b
        norm = float(np.linalg.norm(v))
        if norm < 1e-12 * n_rows:
            raise DesignError(
                f"trend degree {degree} is degenerate on {n_rows} rows"
            )
        v = v / norm
        basis.append(v)
        out.append(v)
    return np.column_stack(out)


def build_designs(frame: TimeSeriesFrame, spec: LPSpec) -> list[HorizonDesign]:
    """Construct the horizon-h designs for h = 0..H.

    The first ``lags`` rows are burned for lag construction and the last h rows
    for the lead, so the maximal sample has T_h = T - lags - h rows.  With
    ``common_sample`` every horizon is truncated to the h = H sample and X is
    bit-identical across horizons.
    """
    y_series = frame.column(spec.target)
    s_series = np.asarray(frame.column(spec.shock))
    for c in spec.controls:
        frame.column(c)
    if spec.standardize_shock:
        mu = float(np.mean(s_series))
        sd = float(np.sqrt(np.mean((s_series - mu) ** 2)))
        if sd == 0.0:
            raise DesignError(f"shock {spec.shock!r} is constant; cannot standardize")
        s_series = (s_series - mu) / sd

    n = frame.n_obs
    p = spec.lags
    big_h = spec.horizons
    k = spec.n_regressors
    t_last_common = n - 1 - big_h
    if t_last_common - p + 1 < k + 1:
        raise DesignError(
            f"sample too short: T={n}, lags={p}, horizons={big_h} leave "
            f"{t_last_common - p + 1} rows for {k} regressors"
        )

    names: list[str] = ["const"]
    names += [f"trend{d}" for d in range(1, spec.trend_degree + 1)]
    names.append(spec.shock)
    names += [f"{spec.target}.l{j}" for j in range(1, p + 1)]
    names += [f"{spec.shock}.l{j}" for j in range(1, p + 1)]
    lag0 = 0 if spec.contemporaneous_controls else 1
    for c in spec.controls:
        names += [f"{c}.l{j}" for j in range(lag0, p + 1)]
    shock_col = 1 + spec.trend_degree

    designs: list[HorizonDesign] = []
    for h in range(big_h + 1):
        t_last = t_last_common if spec.common_sample else n - 1 - h
        t_idx = np.arange(p, t_last + 1)
        t_h = t_idx.size
        blocks = [np.ones((t_h, 1)), _trend_columns(t_h, spec.trend_degree)]
        blocks.append(s_series[t_idx][:, None])
        for j in range(1, p + 1):
            blocks.append(y_series[t_idx - j][:, None])
        for j in range(1, p + 1):
            blocks.append(s_series[t_idx - j][:, None])
        for c in spec.controls:
            series = frame.column(c)
            for j in range(lag0, p + 1):
                blocks.append(series[t_idx - j][:, None])
        x = np.hstack(blocks)
        if spec.cumulate:
            csum = np.concatenate(([0.0], np.cumsum(y_series)))
            y = csum[t_idx + h + 1] - csum[t_idx]
        else:
            y = y_series[t_idx + h]
        designs.append(
            HorizonDesign(
                horizon=h,
                y=y,
                X=x,
                shock_col=shock_col,
                column_names=tuple(names),
                dates=tuple(frame.dates[p : t_last + 1]),
                target=spec.target,
                shock=spec.shock,
                lags=p,
                sample_policy="common" if spec.common_sample else "maximal",
            )
        )
    return designs
