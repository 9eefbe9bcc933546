"""Run configuration: an INI file with typed sections, overridable by flags.

The file format mirrors the RunConfig fields one to one.  Unknown sections
or keys are hard errors, because a typo that silently falls back to a
default is the worst possible behavior in a batch tool.  The fully resolved
configuration is echoed into every output directory so a run can be
reproduced from its artifacts alone.
"""
from __future__ import annotations

import configparser
import dataclasses
import math
from dataclasses import dataclass

from .dataset import LPSpec
from .forest import ForestParams
from .util import DataError, DesignError

# section -> key -> default (as the string a config file would contain)
_SCHEMA: dict[str, dict[str, str]] = {
    "data": {
        "path": "",
        "date_column": "date",
        "target": "y",
        "shock": "s",
        "controls": "",
        "lags": "0",
        "horizons": "0",
        "trend_degree": "0",
        "cumulate": "false",
        "standardize_shock": "false",
        "common_sample": "false",
        "contemporaneous_controls": "false",
        "subsample": "",
    },
    "estimator": {
        "kind": "both",
        "delta": "1.0",
    },
    "forest": {
        "trees": "1000",
        "min_node_size": "5",
        "split_candidate_fraction": "0.06666666666666667",
        "bootstrap": "true",
        "seed": "0",
        "always_split": "",
    },
    "diagnostics": {
        "concentration_q": "10.0",
        "trim_lower": "1.0",
        "trim_upper": "99.0",
        "ma_windows": "6,12",
        "window": "",
    },
    "inference": {
        "band_levels": "0.95",
        "bandwidth": "",
    },
    "clustering": {
        "enabled": "false",
        "k": "2",
        "seed": "0",
    },
    "output": {
        "directory": "out",
        "formats": "csv,json,svg",
    },
}

_TRUE = {"true", "1", "yes", "on"}
_FALSE = {"false", "0", "no", "off"}


def _bool(raw: str, where: str) -> bool:
    low = raw.strip().lower()
    if low in _TRUE:
        return True
    if low in _FALSE:
        return False
    raise DataError(f"{where}: expected a boolean, got {raw!r}")


def _int(raw: str, where: str) -> int:
    try:
        return int(raw.strip())
    except ValueError:
        raise DataError(f"{where}: expected an integer, got {raw!r}") from None


def _float(raw: str, where: str) -> float:
    try:
        return float(raw.strip())
    except ValueError:
        raise DataError(f"{where}: expected a number, got {raw!r}") from None


def _names(raw: str) -> tuple[str, ...]:
    return tuple(tok.strip() for tok in raw.split(",") if tok.strip())


@dataclass(frozen=True)
class RunConfig:
    """Everything one batch invocation needs, validated up front."""

    data_path: str
    date_column: str = "date"
    target: str = "y"
    shock: str = "s"
    controls: tuple[str, ...] = ()
    lags: int = 0
    horizons: int = 0
    trend_degree: int = 0
    cumulate: bool = False
    standardize_shock: bool = False
    common_sample: bool = False
    contemporaneous_controls: bool = False
    subsample_start: str | None = None
    subsample_end: str | None = None
    estimator: str = "both"
    delta: float = 1.0
    trees: int = 1000
    min_node_size: int = 5
    split_candidate_fraction: float = 1.0 / 15.0
    bootstrap: bool = True
    forest_seed: int = 0
    always_split: tuple[str, ...] | None = None
    concentration_q: float = 10.0
    trim_lower: float = 1.0
    trim_upper: float = 99.0
    ma_windows: tuple[int, ...] = (6, 12)
    window: int | None = None
    band_levels: tuple[float, ...] = (0.95,)
    bandwidth: int | None = None
    cluster_enabled: bool = False
    cluster_k: int = 2
    cluster_seed: int = 0
    output_dir: str = "out"
    formats: tuple[str, ...] = ("csv", "json", "svg")

    def __post_init__(self):
        if not self.data_path:
            raise DesignError("data.path is required")
        if self.estimator not in ("linear", "forest", "both"):
            raise DesignError(
                f"estimator.kind must be linear, forest, or both, got {self.estimator!r}"
            )
        if not math.isfinite(self.delta):
            raise DesignError("estimator.delta must be finite")
        if not 0.0 < self.concentration_q <= 100.0:
            raise DesignError(f"concentration_q must be in (0, 100], got {self.concentration_q}")
        if not 0.0 <= self.trim_lower < self.trim_upper <= 100.0:
            raise DesignError(
                f"trim percentiles must satisfy 0 <= lower < upper <= 100, "
                f"got ({self.trim_lower}, {self.trim_upper})"
            )
        if any(w < 1 for w in self.ma_windows):
            raise DesignError("ma_windows entries must be >= 1")
        if self.window is not None and self.window < 1:
            raise DesignError(f"diagnostics.window must be >= 1, got {self.window}")
        if not self.band_levels:
            raise DesignError("inference.band_levels must not be empty")
        if any(not 0.0 < lvl < 1.0 for lvl in self.band_levels):
            raise DesignError(f"band levels must be in (0, 1), got {self.band_levels}")
        if self.bandwidth is not None and self.bandwidth < 0:
            raise DesignError(f"inference.bandwidth must be >= 0, got {self.bandwidth}")
        if self.cluster_k < 1:
            raise DesignError(f"clustering.k must be >= 1, got {self.cluster_k}")
        unknown = set(self.formats) - {"csv", "json", "svg"}
        if unknown:
            raise DesignError(f"unknown output format(s): {', '.join(sorted(unknown))}")
        if "csv" not in self.formats:
            raise DesignError("csv output cannot be disabled; charts are derived from it")

    def spec(self) -> LPSpec:
        return LPSpec(
            target=self.target,
            shock=self.shock,
            controls=self.controls,
            lags=self.lags,
            horizons=self.horizons,
            trend_degree=self.trend_degree,
            cumulate=self.cumulate,
            standardize_shock=self.standardize_shock,
            common_sample=self.common_sample,
            contemporaneous_controls=self.contemporaneous_controls,
        )

    def forest_params(self) -> ForestParams:
        return ForestParams(
            n_trees=self.trees,
            min_node_size=self.min_node_size,
            split_candidate_fraction=self.split_candidate_fraction,
            bootstrap=self.bootstrap,
            seed=self.forest_seed,
            always_split=self.always_split,
        )

    def wants(self, kind: str) -> bool:
        return self.estimator in (kind, "both")


def parse_subsample(raw: str) -> tuple[str | None, str | None]:
    """Split a 'start:end' range; either side may be empty."""
    raw = raw.strip()
    if not raw:
        return None, None
    if ":" not in raw:
        raise DataError(f"subsample must look like 'start:end', got {raw!r}")
    start, _, end = raw.partition(":")
    return start.strip() or None, end.strip() or None


def _strings_to_config(values: dict[str, dict[str, str]]) -> RunConfig:
    d = values["data"]
    e = values["estimator"]
    f = values["forest"]
    g = values["diagnostics"]
    i = values["inference"]
    c = values["clustering"]
    o = values["output"]
    start, end = parse_subsample(d["subsample"])
    always = _names(f["always_split"])
    return RunConfig(
        data_path=d["path"].strip(),
        date_column=d["date_column"].strip(),
        target=d["target"].strip(),
        shock=d["shock"].strip(),
        controls=_names(d["controls"]),
        lags=_int(d["lags"], "data.lags"),
        horizons=_int(d["horizons"], "data.horizons"),
        trend_degree=_int(d["trend_degree"], "data.trend_degree"),
        cumulate=_bool(d["cumulate"], "data.cumulate"),
        standardize_shock=_bool(d["standardize_shock"], "data.standardize_shock"),
        common_sample=_bool(d["common_sample"], "data.common_sample"),
        contemporaneous_controls=_bool(
            d["contemporaneous_controls"], "data.contemporaneous_controls"
        ),
        subsample_start=start,
        subsample_end=end,
        estimator=e["kind"].strip(),
        delta=_float(e["delta"], "estimator.delta"),
        trees=_int(f["trees"], "forest.trees"),
        min_node_size=_int(f["min_node_size"], "forest.min_node_size"),
        split_candidate_fraction=_float(
            f["split_candidate_fraction"], "forest.split_candidate_fraction"
        ),
        bootstrap=_bool(f["bootstrap"], "forest.bootstrap"),
        forest_seed=_int(f["seed"], "forest.seed"),
        always_split=always if always else None,
        concentration_q=_float(g["concentration_q"], "diagnostics.concentration_q"),
        trim_lower=_float(g["trim_lower"], "diagnostics.trim_lower"),
        trim_upper=_float(g["trim_upper"], "diagnostics.trim_upper"),
        ma_windows=tuple(
            _int(tok, "diagnostics.ma_windows") for tok in _names(g["ma_windows"])
        ),
        window=_int(g["window"], "diagnostics.window") if g["window"].strip() else None,
        band_levels=tuple(
            _float(tok, "inference.band_levels") for tok in _names(i["band_levels"])
        ),
        bandwidth=_int(i["bandwidth"], "inference.bandwidth") if i["bandwidth"].strip() else None,
        cluster_enabled=_bool(c["enabled"], "clustering.enabled"),
        cluster_k=_int(c["k"], "clustering.k"),
        cluster_seed=_int(c["seed"], "clustering.seed"),
        output_dir=o["directory"].strip(),
        formats=_names(o["formats"]),
    )


def load_config(
    path: str | None = None,
    overrides: dict[tuple[str, str], str] | None = None,
) -> RunConfig:
    """Defaults, then the INI file, then explicit overrides, strictly checked."""
    values = {sec: dict(keys) for sec, keys in _SCHEMA.items()}
    if path is not None:
        parser = configparser.ConfigParser(interpolation=None)
        try:
            with open(path, "r", encoding="utf-8") as fh:
                parser.read_file(fh)
        except OSError as exc:
            raise DataError(f"cannot read config {path!r}: {exc}") from None
        except configparser.Error as exc:
            raise DataError(f"malformed config {path!r}: {exc}") from None
        for sec in parser.sections():
            if sec not in _SCHEMA:
                raise DataError(
                    f"{path}: unknown section [{sec}]; "
                    f"expected one of {', '.join(sorted(_SCHEMA))}"
                )
            for key, raw in parser.items(sec):
                if key not in _SCHEMA[sec]:
                    raise DataError(
                        f"{path}: unknown key {key!r} in [{sec}]; "
                        f"expected one of {', '.join(sorted(_SCHEMA[sec]))}"
                    )
                values[sec][key] = raw
    for (sec, key), raw in (overrides or {}).items():
        if sec not in _SCHEMA or key not in _SCHEMA[sec]:
            raise DataError(f"unknown config field {sec}.{key}")
        values[sec][key] = raw
    return _strings_to_config(values)


def config_text(cfg: RunConfig) -> str:
    """Render the resolved configuration back to canonical INI text."""

    def join_names(names) -> str:
        return ",".join(names) if names else ""

    sections = {
        "data": {
            "path": cfg.data_path,
            "date_column": cfg.date_column,
            "target": cfg.target,
            "shock": cfg.shock,
            "controls": join_names(cfg.controls),
            "lags": str(cfg.lags),
            "horizons": str(cfg.horizons),
            "trend_degree": str(cfg.trend_degree),
            "cumulate": str(cfg.cumulate).lower(),
            "standardize_shock": str(cfg.standardize_shock).lower(),
            "common_sample": str(cfg.common_sample).lower(),
            "contemporaneous_controls": str(cfg.contemporaneous_controls).lower(),
            "subsample": f"{cfg.subsample_start or ''}:{cfg.subsample_end or ''}"
            if (cfg.subsample_start or cfg.subsample_end)
            else "",
        },
        "estimator": {"kind": cfg.estimator, "delta": repr(cfg.delta)},
        "forest": {
            "trees": str(cfg.trees),
            "min_node_size": str(cfg.min_node_size),
            "split_candidate_fraction": repr(cfg.split_candidate_fraction),
            "bootstrap": str(cfg.bootstrap).lower(),
            "seed": str(cfg.forest_seed),
            "always_split": join_names(cfg.always_split or ()),
        },
        "diagnostics": {
            "concentration_q": repr(cfg.concentration_q),
            "trim_lower": repr(cfg.trim_lower),
            "trim_upper": repr(cfg.trim_upper),
            "ma_windows": ",".join(str(w) for w in cfg.ma_windows),
            "window": "" if cfg.window is None else str(cfg.window),
        },
        "inference": {
            "band_levels": ",".join(repr(l) for l in cfg.band_levels),
            "bandwidth": "" if cfg.bandwidth is None else str(cfg.bandwidth),
        },
        "clustering": {
            "enabled": str(cfg.cluster_enabled).lower(),
            "k": str(cfg.cluster_k),
            "seed": str(cfg.cluster_seed),
        },
        "output": {
            "directory": cfg.output_dir,
            "formats": join_names(cfg.formats),
        },
    }
    lines = []
    for sec, keys in sections.items():
        lines.append(f"[{sec}]")
        for key, val in keys.items():
            lines.append(f"{key} = {val}")
        lines.append("")
    return "\n".join(lines)


def round_trip(cfg: RunConfig) -> RunConfig:
    """Parse the echoed text back; used to assert the echo loses nothing."""
    import io

    parser = configparser.ConfigParser(interpolation=None)
    parser.read_file(io.StringIO(config_text(cfg)))
    values = {sec: dict(keys) for sec, keys in _SCHEMA.items()}
    for sec in parser.sections():
        for key, raw in parser.items(sec):
            values[sec][key] = raw
    return _strings_to_config(values)


def replace(cfg: RunConfig, **changes) -> RunConfig:
    """dataclasses.replace with the validation re-run."""
    return dataclasses.replace(cfg, **changes)
