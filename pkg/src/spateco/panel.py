"""Municipal panel data: loading, description, standardization, slicing.

A panel is a region x indicator x year grid of real values. Missing cells
are explicit (stored as NaN) and are excluded from every cross-sectional
computation; nothing is ever imputed.
"""

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConflictError,
    DegenerateScaleError,
    InsufficientDataError,
    ParseError,
)

LONG_COLUMNS = ("region_code", "region_name", "microregion", "indicator", "year", "value")


@dataclass(frozen=True)
class RegionId:
    """A spatial unit: municipality code, display name, microregion group.

    ``capital`` marks the microregion's reference municipality, used when
    region-level tables are read as the capital's value.
    """

    code: str
    name: str
    microregion: str
    capital: bool = False

    def __post_init__(self):
        if not self.code:
            raise ValueError("region code must be non-empty")
        if not self.microregion:
            raise ValueError(f"region {self.code!r}: microregion must be non-empty")


@dataclass(frozen=True)
class DescriptiveStats:
    """Cross-sectional summary with sample (n-1) sd."""

    n: int
    mean: float
    sd: float
    variance: float
    coef_var: float
    min: float
    median: float
    max: float
    range: float

    def as_dict(self):
        return {
            "n": self.n,
            "mean": self.mean,
            "sd": self.sd,
            "variance": self.variance,
            "coef_var": self.coef_var,
            "min": self.min,
            "median": self.median,
            "max": self.max,
            "range": self.range,
        }


@dataclass(frozen=True)
class PanelDataset:
    """Immutable region x indicator x year value grid.

    ``values[r, i, t]`` is the observation for region r, indicator i,
    year t; NaN encodes an explicitly missing cell.
    """

    regions: tuple
    indicators: tuple
    years: tuple
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        codes = [r.code for r in self.regions]
        if len(set(codes)) != len(codes):
            raise ConflictError("duplicate region codes in dataset")
        if len(set(self.indicators)) != len(self.indicators):
            raise ConflictError("duplicate indicator codes in dataset")
        if list(self.years) != sorted(set(self.years)):
            raise ValueError("years must be strictly increasing")
        expected = (len(self.regions), len(self.indicators), len(self.years))
        if self.values.shape != expected:
            raise ValueError(f"value grid shape {self.values.shape} != {expected}")
        self.values.setflags(write=False)

    @property
    def n_cells(self):
        return self.values.size

    @property
    def n_observed(self):
        return int(np.isfinite(self.values).sum())

    def region_index(self, code):
        for i, r in enumerate(self.regions):
            if r.code == code:
                return i
        raise KeyError(f"unknown region code {code!r}")

    def value(self, region_code, indicator, year):
        i = self.region_index(region_code)
        j = self.indicators.index(indicator)
        k = self.years.index(year)
        return float(self.values[i, j, k])

    def cross_section(self, indicator, year):
        """Per-region values for one (indicator, year), NaN where missing."""
        j = self.indicators.index(indicator)
        k = self.years.index(year)
        return np.asarray(self.values[:, j, k], dtype=float)

    def manifest(self):
        return {
            "regions": [
                {
                    "code": r.code,
                    "name": r.name,
                    "microregion": r.microregion,
                    "capital": r.capital,
                }
                for r in self.regions
            ],
            "indicators": list(self.indicators),
            "years": list(self.years),
            "n_cells": self.n_cells,
            "n_observed": self.n_observed,
        }


def load_panel(source, delimiter=",", columns=None):
    """Read a long-format delimited stream into a PanelDataset.

    Expected columns (header row required): region_code, region_name,
    microregion, indicator, year, value; an optional ``capital`` column
    flags microregion capitals. An empty value field is an explicitly
    missing cell.
    """
    if isinstance(source, (str, bytes)):
        source = io.StringIO(source if isinstance(source, str) else source.decode("utf-8"))
    reader = csv.reader(source, delimiter=delimiter)
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty input: header row required")
    header = [h.strip() for h in header]
    colmap = dict(columns) if columns else {}
    idx = {}
    for col in LONG_COLUMNS + ("capital",):
        name = colmap.get(col, col)
        if name in header:
            idx[col] = header.index(name)
    missing_cols = [c for c in LONG_COLUMNS if c not in idx]
    if missing_cols:
        raise ParseError(f"missing required columns: {', '.join(missing_cols)}")

    regions = {}
    indicators = []
    years = set()
    cells = {}
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not f.strip() for f in row):
            continue
        if len(row) <= max(idx.values()):
            raise ParseError(f"expected at least {max(idx.values()) + 1} fields, got {len(row)}", line=lineno)
        code = row[idx["region_code"]].strip()
        name = row[idx["region_name"]].strip()
        micro = row[idx["microregion"]].strip()
        indicator = row[idx["indicator"]].strip()
        if not code or not indicator:
            raise ParseError("region_code and indicator must be non-empty", line=lineno)
        try:
            year = int(row[idx["year"]])
        except ValueError:
            raise ParseError(f"bad year {row[idx['year']]!r}", line=lineno)
        raw = row[idx["value"]].strip()
        if raw == "":
            value = math.nan
        else:
            try:
                value = float(raw)
            except ValueError:
                raise ParseError(f"bad value {raw!r}", line=lineno)
            if not math.isfinite(value):
                raise ParseError(f"non-finite value {raw!r}", line=lineno)
        capital = False
        if "capital" in idx:
            capital = row[idx["capital"]].strip().lower() in ("1", "true", "yes")

        if code in regions:
            prev = regions[code]
            if (prev.name, prev.microregion) != (name, micro):
                raise ConflictError(
                    f"line {lineno}: region {code!r} redefined "
                    f"({prev.name!r}/{prev.microregion!r} vs {name!r}/{micro!r})"
                )
            if capital and not prev.capital:
                regions[code] = RegionId(code, name, micro, capital=True)
        else:
            try:
                regions[code] = RegionId(code, name, micro, capital=capital)
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno)

        key = (code, indicator, year)
        if key in cells:
            if not (math.isnan(cells[key]) and math.isnan(value)) and cells[key] != value:
                raise ConflictError(f"line {lineno}: duplicate cell {key} with conflicting values")
        cells[key] = value
        if indicator not in indicators:
            indicators.append(indicator)
        years.add(year)

    region_list = tuple(regions.values())
    indicator_list = tuple(indicators)
    year_list = tuple(sorted(years))
    grid = np.full((len(region_list), len(indicator_list), len(year_list)), np.nan)
    r_idx = {r.code: i for i, r in enumerate(region_list)}
    i_idx = {ind: j for j, ind in enumerate(indicator_list)}
    y_idx = {y: k for k, y in enumerate(year_list)}
    for (code, indicator, year), value in cells.items():
        grid[r_idx[code], i_idx[indicator], y_idx[year]] = value
    return PanelDataset(region_list, indicator_list, year_list, grid)


def save_panel(dataset, stream, delimiter=","):
    """Write the dataset back to long format (observed cells only)."""
    writer = csv.writer(stream, delimiter=delimiter, lineterminator="\n")
    writer.writerow(LONG_COLUMNS + ("capital",))
    for i, region in enumerate(dataset.regions):
        for j, indicator in enumerate(dataset.indicators):
            for k, year in enumerate(dataset.years):
                v = dataset.values[i, j, k]
                if not math.isfinite(v):
                    continue
                writer.writerow(
                    [region.code, region.name, region.microregion,
                     indicator, year, repr(float(v)), int(region.capital)]
                )


def describe_values(values):
    """Descriptive statistics of a 1-D sample, NaN entries dropped."""
    x = np.asarray(values, dtype=float)
    x = x[np.isfinite(x)]
    n = x.size
    if n < 2:
        raise InsufficientDataError(f"need >= 2 observations, got {n}")
    mean = float(x.mean())
    sd = float(x.std(ddof=1))
    if sd == 0.0:
        cv = 0.0
    elif mean == 0.0:
        cv = math.nan
    else:
        cv = 100.0 * sd / mean
    return DescriptiveStats(
        n=n,
        mean=mean,
        sd=sd,
        variance=sd * sd,
        coef_var=cv,
        min=float(x.min()),
        median=float(np.median(x)),
        max=float(x.max()),
        range=float(x.max() - x.min()),
    )


def describe(dataset, indicator, year):
    """Cross-sectional descriptive statistics over non-missing regions."""
    return describe_values(dataset.cross_section(indicator, year))


def standardize(dataset):
    """Z-score every (indicator, year) cross-section over its regions.

    Uses sample (n-1) sd. A zero-sd cross-section is an error, as is a
    single-observation one; fully missing cross-sections stay missing.
    """
    out = np.array(dataset.values, dtype=float)
    for j, indicator in enumerate(dataset.indicators):
        for k, year in enumerate(dataset.years):
            col = out[:, j, k]
            mask = np.isfinite(col)
            n = int(mask.sum())
            if n == 0:
                continue
            if n < 2:
                raise DegenerateScaleError(
                    f"cannot standardize {indicator} {year}: only {n} observation"
                )
            sd = float(col[mask].std(ddof=1))
            if sd == 0.0:
                raise DegenerateScaleError(f"zero variance in {indicator} {year}")
            col[mask] = (col[mask] - col[mask].mean()) / sd
    return PanelDataset(dataset.regions, dataset.indicators, dataset.years, out)


@dataclass(frozen=True)
class PercentileClassification:
    """Regions strictly above the cut percentile of a cross-section."""

    indicator: str
    year: int
    cut: float
    threshold: float
    labels: dict
    above: tuple

    def as_dict(self):
        return {
            "indicator": self.indicator,
            "year": self.year,
            "cut": self.cut,
            "threshold": self.threshold,
            "labels": dict(self.labels),
            "above": list(self.above),
        }


def classify_percentile(dataset, indicator, year, cut=75.0):
    """Label regions above/below the cut percentile (type-7 interpolation)."""
    if not 0 <= cut < 100:
        raise ValueError(f"cut must be in [0, 100), got {cut}")
    values = dataset.cross_section(indicator, year)
    mask = np.isfinite(values)
    if mask.sum() < 4:
        raise InsufficientDataError(
            f"need >= 4 observations for percentile classification, got {int(mask.sum())}"
        )
    threshold = float(np.percentile(values[mask], cut))
    labels = {}
    above = []
    for region, v, ok in zip(dataset.regions, values, mask):
        if not ok:
            continue
        if v > threshold:
            labels[region.code] = "above"
            above.append(region.code)
        else:
            labels[region.code] = "below"
    return PercentileClassification(indicator, year, float(cut), threshold, labels, tuple(above))


def dump_manifest(dataset, stream):
    json.dump(dataset.manifest(), stream, indent=2, sort_keys=True)
    stream.write("\n")
