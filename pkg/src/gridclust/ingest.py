"""Dataset I/O, validation, annual averaging, and grid-to-grid resampling.

On-disk dataset layout ("GTS" format):

- ``manifest.json`` with fields ``variable``, ``units`` ("celsius"|"kelvin"),
  ``calendar`` ("gregorian"|"360_day"), ``geometry`` (``mode``, ``origin_lat``,
  ``origin_lon``, ``cell_dlat``, ``cell_dlon``, ``nrows``, ``ncols``),
  ``missing_value`` (number) and ``years`` (array of integers).
- ``data/<year>.csv`` with one line per day, each line carrying
  ``nrows * ncols`` comma-separated decimal values in row-major order,
  LF line endings.
- optional ``elevation.csv``: ``nrows`` lines of ``ncols`` values in meters;
  ``missing_value`` applies.

Loading is strict: day counts must match the declared calendar, every
non-sentinel value must be finite, and validation errors name the offending
year/day/cell.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    CoverageError,
    DatasetError,
    EmptyDomainError,
    ParameterError,
    ShapeMismatchError,
    YearLookupError,
)
from .gridcore import (
    FIXED360,
    GEOGRAPHIC,
    GREGORIAN,
    METERS,
    TEMPERATURE_UNITS,
    CalendarSpec,
    DailySeriesGrid,
    GridGeometry,
    ScalarField,
    days_in_year,
)

MANIFEST_NAME = "manifest.json"
DATA_DIR = "data"
ELEVATION_NAME = "elevation.csv"

# JSON spelling of calendar kinds.
_CAL_FROM_JSON = {"gregorian": GREGORIAN, "360_day": FIXED360}
_CAL_TO_JSON = {v: k for k, v in _CAL_FROM_JSON.items()}

# A missing-value sentinel must sit outside any plausible temperature in
# either celsius or kelvin.
_TEMP_RANGE = (-150.0, 400.0)

RESAMPLE_AREA_WEIGHTED = "area_weighted"
RESAMPLE_NEAREST = "nearest"

# A resampled target cell keeps a value only if valid source cells cover at
# least this fraction of its area.
MIN_COVERAGE = 0.5


@dataclass(frozen=True)
class DatasetManifest:
    """Parsed, validated manifest of a GTS dataset directory."""

    variable: str
    units: str
    calendar: CalendarSpec
    geometry: GridGeometry
    missing_value: float
    years: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.units not in TEMPERATURE_UNITS:
            raise DatasetError(f"manifest units must be celsius or kelvin, got {self.units!r}")
        years = tuple(int(y) for y in self.years)
        if not years:
            raise DatasetError("manifest years list is empty")
        if any(b <= a for a, b in zip(years, years[1:])):
            raise DatasetError("manifest years must be strictly increasing")
        object.__setattr__(self, "years", years)
        mv = float(self.missing_value)
        if not np.isfinite(mv):
            raise DatasetError("missing_value must be finite")
        if _TEMP_RANGE[0] <= mv <= _TEMP_RANGE[1]:
            raise DatasetError(
                f"missing_value {mv} lies inside the physical temperature range "
                f"{_TEMP_RANGE}; pick a sentinel outside it"
            )

    @property
    def payload_files(self) -> tuple[str, ...]:
        """Relative per-year payload paths implied by the years list."""
        return tuple(f"{DATA_DIR}/{year}.csv" for year in self.years)

    def to_json_dict(self) -> dict:
        g = self.geometry
        return {
            "variable": self.variable,
            "units": self.units,
            "calendar": _CAL_TO_JSON[self.calendar.kind],
            "geometry": {
                "mode": g.mode,
                "origin_lat": g.origin_lat,
                "origin_lon": g.origin_lon,
                "cell_dlat": g.cell_dlat,
                "cell_dlon": g.cell_dlon,
                "nrows": g.nrows,
                "ncols": g.ncols,
            },
            "missing_value": self.missing_value,
            "years": list(self.years),
        }


def _parse_manifest_dict(doc: dict) -> DatasetManifest:
    for key in ("variable", "units", "calendar", "geometry", "missing_value", "years"):
        if key not in doc:
            raise DatasetError(f"manifest missing field {key!r}")
    cal = doc["calendar"]
    if cal not in _CAL_FROM_JSON:
        raise DatasetError(f"manifest calendar must be 'gregorian' or '360_day', got {cal!r}")
    gdoc = doc["geometry"]
    for key in ("mode", "origin_lat", "origin_lon", "cell_dlat", "cell_dlon", "nrows", "ncols"):
        if key not in gdoc:
            raise DatasetError(f"manifest geometry missing field {key!r}")
    try:
        geometry = GridGeometry(
            mode=str(gdoc["mode"]),
            origin_lat=float(gdoc["origin_lat"]),
            origin_lon=float(gdoc["origin_lon"]),
            cell_dlat=float(gdoc["cell_dlat"]),
            cell_dlon=float(gdoc["cell_dlon"]),
            nrows=int(gdoc["nrows"]),
            ncols=int(gdoc["ncols"]),
        )
    except ParameterError as exc:
        raise DatasetError(f"manifest geometry invalid: {exc}") from exc
    return DatasetManifest(
        variable=str(doc["variable"]),
        units=str(doc["units"]),
        calendar=CalendarSpec(_CAL_FROM_JSON[cal]),
        geometry=geometry,
        missing_value=float(doc["missing_value"]),
        years=tuple(int(y) for y in doc["years"]),
    )


def load_manifest(root: str | os.PathLike) -> DatasetManifest:
    """Read and validate ``manifest.json``.  Missing file raises FileNotFoundError."""
    path = Path(root) / MANIFEST_NAME
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DatasetError(f"{path}: invalid JSON: {exc}") from exc
    return _parse_manifest_dict(doc)


def _parse_day_line(line: str, ncells: int, where: str) -> np.ndarray:
    parts = line.split(",")
    if len(parts) != ncells:
        raise DatasetError(f"{where}: expected {ncells} values, got {len(parts)}")
    try:
        return np.asarray(parts, dtype=np.float64)
    except ValueError:
        for idx, p in enumerate(parts):
            try:
                float(p)
            except ValueError:
                raise DatasetError(f"{where}, cell {idx}: unparseable value {p.strip()!r}") from None
        raise


def _load_year_file(path: Path, year: int, manifest: DatasetManifest) -> np.ndarray:
    nrows, ncols = manifest.geometry.shape
    ncells = nrows * ncols
    expected_days = days_in_year(manifest.calendar, year)
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if len(lines) != expected_days:
        raise DatasetError(
            f"year {year}: {len(lines)} daily lines, calendar requires {expected_days}"
        )
    out = np.empty((expected_days, nrows, ncols), dtype=np.float64)
    mv = manifest.missing_value
    for day, line in enumerate(lines):
        flat = _parse_day_line(line, ncells, f"year {year} day {day}")
        grid = flat.reshape(nrows, ncols)
        missing = grid == mv
        bad = ~np.isfinite(grid) & ~missing
        if bad.any():
            r, c = np.argwhere(bad)[0]
            raise DatasetError(
                f"year {year} day {day} cell ({r},{c}): non-finite value that is "
                f"not the missing_value sentinel"
            )
        out[day] = np.where(missing, np.nan, grid)
    return out


def load_dataset(root: str | os.PathLike) -> DailySeriesGrid:
    """Load a GTS dataset directory into a fully validated in-memory series.

    Cells equal to the manifest's ``missing_value`` become masked (NaN).
    Raises ``DatasetError`` on the first format violation, ``FileNotFoundError``
    when the manifest or a payload file is absent.
    """
    root = Path(root)
    manifest = load_manifest(root)
    data = {}
    for year in manifest.years:
        path = root / DATA_DIR / f"{year}.csv"
        if not path.exists():
            raise FileNotFoundError(f"missing payload file {path}")
        data[year] = _load_year_file(path, year, manifest)
    return DailySeriesGrid(
        geometry=manifest.geometry,
        calendar=manifest.calendar,
        units=manifest.units,
        years=manifest.years,
        data=data,
        variable=manifest.variable,
        missing_value=manifest.missing_value,
    )


def validate_dataset(root: str | os.PathLike) -> list[str]:
    """Collect every format violation in a dataset directory.

    Returns an empty list for a well-formed dataset.  Unlike
    :func:`load_dataset` this keeps going after the first problem so the
    report lists all of them.  A missing manifest still raises
    FileNotFoundError (there is nothing to check against).
    """
    root = Path(root)
    violations: list[str] = []
    try:
        manifest = load_manifest(root)
    except DatasetError as exc:
        return [str(exc)]
    for year in manifest.years:
        path = root / DATA_DIR / f"{year}.csv"
        if not path.exists():
            violations.append(f"missing payload file {path}")
            continue
        try:
            _load_year_file(path, year, manifest)
        except DatasetError as exc:
            violations.append(str(exc))
    elev = root / ELEVATION_NAME
    if elev.exists():
        try:
            load_elevation(elev, manifest.geometry, manifest.missing_value)
        except DatasetError as exc:
            violations.append(str(exc))
    return violations


def _format_value(v: float) -> str:
    return repr(float(v))


def write_dataset(
    series: DailySeriesGrid,
    root: str | os.PathLike,
    elevation: ScalarField | None = None,
) -> None:
    """Serialize a series back to the GTS directory format.

    Values are written with shortest round-trip float formatting, so a
    load/write/load cycle is value-identical.
    """
    root = Path(root)
    manifest = DatasetManifest(
        variable=series.variable or "unknown",
        units=series.units,
        calendar=series.calendar,
        geometry=series.geometry,
        missing_value=series.missing_value,
        years=series.years,
    )
    root.mkdir(parents=True, exist_ok=True)
    (root / DATA_DIR).mkdir(exist_ok=True)
    with open(root / MANIFEST_NAME, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest.to_json_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    mv = series.missing_value
    for year in series.years:
        arr = series.year_values(year)
        with open(root / DATA_DIR / f"{year}.csv", "w", encoding="utf-8", newline="\n") as fh:
            for day in range(arr.shape[0]):
                flat = arr[day].ravel()
                fh.write(",".join(
                    _format_value(mv) if np.isnan(v) else _format_value(v) for v in flat
                ))
                fh.write("\n")
    if elevation is not None:
        write_elevation(elevation, root / ELEVATION_NAME, mv)


def write_elevation(elevation: ScalarField, path: str | os.PathLike, missing_value: float) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in range(elevation.geometry.nrows):
            row = [
                _format_value(elevation.values[r, c]) if elevation.mask[r, c]
                else _format_value(missing_value)
                for c in range(elevation.geometry.ncols)
            ]
            fh.write(",".join(row))
            fh.write("\n")


def load_elevation(
    path: str | os.PathLike, geometry: GridGeometry, missing_value: float
) -> ScalarField:
    """Read an ``elevation.csv`` grid (meters) against a known geometry."""
    nrows, ncols = geometry.shape
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if len(lines) != nrows:
        raise DatasetError(f"{path}: expected {nrows} elevation lines, got {len(lines)}")
    values = np.empty((nrows, ncols), dtype=np.float64)
    for r, line in enumerate(lines):
        values[r] = _parse_day_line(line, ncols, f"{path} line {r}")
    mask = values != missing_value
    bad = ~np.isfinite(values) & mask
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise DatasetError(f"{path} cell ({r},{c}): non-finite elevation")
    return ScalarField(geometry, np.where(mask, values, 0.0), mask, METERS)


@dataclass(frozen=True)
class AnnualMeanStack:
    """Per-year annual-mean fields plus the combined validity mask.

    The combined mask marks cells valid in *every* year, which is the domain
    all downstream clustering operates on.
    """

    geometry: GridGeometry
    units: str
    years: tuple[int, ...]
    fields: tuple[ScalarField, ...]
    mask: np.ndarray

    def __post_init__(self) -> None:
        if len(self.fields) != len(self.years):
            raise ParameterError("one field per year required")
        for f in self.fields:
            if f.geometry.shape != self.geometry.shape:
                raise ShapeMismatchError("annual fields must share the stack geometry")
        mask = np.array(self.mask, dtype=bool, copy=True)
        if mask.shape != self.geometry.shape:
            raise ShapeMismatchError("stack mask shape mismatch")
        mask.setflags(write=False)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "years", tuple(int(y) for y in self.years))
        object.__setattr__(self, "fields", tuple(self.fields))

    @property
    def n_years(self) -> int:
        return len(self.years)

    def field_for(self, year: int) -> ScalarField:
        try:
            return self.fields[self.years.index(year)]
        except ValueError:
            raise YearLookupError(f"year {year} not in stack") from None


def annual_mean(
    series: DailySeriesGrid, year: int, min_valid_fraction: float = 1.0
) -> ScalarField:
    """Per-cell arithmetic mean of one year's valid daily values.

    A cell is masked when its fraction of valid days falls below
    ``min_valid_fraction`` (default 1.0: any gap masks the cell).
    """
    if not (0.0 < min_valid_fraction <= 1.0):
        raise ParameterError("min_valid_fraction must be in (0, 1]")
    arr = series.year_values(year)
    ndays = arr.shape[0]
    valid = ~np.isnan(arr)
    counts = valid.sum(axis=0)
    sums = np.where(valid, arr, 0.0).sum(axis=0)
    mask = counts >= min_valid_fraction * ndays
    mask &= counts > 0
    means = np.divide(sums, counts, out=np.zeros_like(sums), where=counts > 0)
    return ScalarField(series.geometry, np.where(mask, means, 0.0), mask, series.units)


def build_annual_stack(
    series: DailySeriesGrid, min_valid_fraction: float = 1.0
) -> AnnualMeanStack:
    """One annual mean per year; combined mask is the intersection of years."""
    if not series.years:
        raise EmptyDomainError("series has no years")
    fields = tuple(annual_mean(series, y, min_valid_fraction) for y in series.years)
    mask = np.ones(series.geometry.shape, dtype=bool)
    for f in fields:
        mask &= f.mask
    return AnnualMeanStack(series.geometry, series.units, series.years, fields, mask)


def _overlap_lengths(dst_edges: np.ndarray, src_edges: np.ndarray) -> np.ndarray:
    """(ndst, nsrc) interval-overlap lengths between two edge vectors."""
    lo = np.maximum(dst_edges[:-1, None], src_edges[None, :-1])
    hi = np.minimum(dst_edges[1:, None], src_edges[None, 1:])
    return np.clip(hi - lo, 0.0, None)


def _lat_weights(dst_edges: np.ndarray, src_edges: np.ndarray, geographic: bool) -> np.ndarray:
    """Row-overlap weights; geographic mode scales each overlap strip by
    cos(latitude of the strip center)."""
    ov = _overlap_lengths(dst_edges, src_edges)
    if not geographic:
        return ov
    lo = np.maximum(dst_edges[:-1, None], src_edges[None, :-1])
    hi = np.minimum(dst_edges[1:, None], src_edges[None, 1:])
    centers = np.where(ov > 0, 0.5 * (lo + hi), 0.0)
    return ov * np.maximum(np.cos(np.radians(centers)), 0.0)


def resample(field: ScalarField, target: GridGeometry, method: str = RESAMPLE_AREA_WEIGHTED) -> ScalarField:
    """Regrid a field onto a target geometry.

    ``area_weighted``: each target cell becomes the overlap-area-weighted
    mean of intersecting valid source cells (geographic mode weights each
    overlap rectangle by the cosine of its center latitude).  ``nearest``:
    the value of the source cell containing the target cell center.  A target
    cell is masked when valid source coverage of its area is below 0.5.
    """
    src = field.geometry
    if src.mode != target.mode:
        raise ParameterError(f"grid modes differ: {src.mode} vs {target.mode}")
    if method not in (RESAMPLE_AREA_WEIGHTED, RESAMPLE_NEAREST):
        raise ParameterError(f"unknown resampling method {method!r}")

    # Bounding boxes must intersect at all.
    if (
        src.lat_edges()[-1] <= target.lat_edges()[0]
        or target.lat_edges()[-1] <= src.lat_edges()[0]
        or src.lon_edges()[-1] <= target.lon_edges()[0]
        or target.lon_edges()[-1] <= src.lon_edges()[0]
    ):
        raise CoverageError("source and target geometries are spatially disjoint")

    if method == RESAMPLE_NEAREST:
        return _resample_nearest(field, target)
    return _resample_area_weighted(field, target)


def _resample_nearest(field: ScalarField, target: GridGeometry) -> ScalarField:
    src = field.geometry
    rows = np.floor(
        (target.lat_centers() - (src.origin_lat - 0.5 * src.cell_dlat)) / src.cell_dlat
    ).astype(int)
    cols = np.floor(
        (target.lon_centers() - (src.origin_lon - 0.5 * src.cell_dlon)) / src.cell_dlon
    ).astype(int)
    row_ok = (rows >= 0) & (rows < src.nrows)
    col_ok = (cols >= 0) & (cols < src.ncols)
    r_idx = np.clip(rows, 0, src.nrows - 1)
    c_idx = np.clip(cols, 0, src.ncols - 1)
    values = field.values[np.ix_(r_idx, c_idx)]
    mask = field.mask[np.ix_(r_idx, c_idx)] & row_ok[:, None] & col_ok[None, :]
    return ScalarField(target, np.where(mask, values, 0.0), mask, field.units)


def _resample_area_weighted(field: ScalarField, target: GridGeometry) -> ScalarField:
    src = field.geometry
    geographic = src.mode == GEOGRAPHIC
    w_lat = _lat_weights(target.lat_edges(), src.lat_edges(), geographic)  # (Rt, Rs)
    w_lon = _overlap_lengths(target.lon_edges(), src.lon_edges())  # (Ct, Cs)

    valid = field.mask.astype(np.float64)
    vals = np.where(field.mask, field.values, 0.0)
    # einsum keeps the reduction order fixed (no BLAS dispatch).
    num = np.einsum("ir,rc,jc->ij", w_lat, vals * valid, w_lon, optimize=False)
    den = np.einsum("ir,rc,jc->ij", w_lat, valid, w_lon, optimize=False)

    if geographic:
        cell_lat_area = target.cell_dlat * np.maximum(
            np.cos(np.radians(target.lat_centers())), 0.0
        )
    else:
        cell_lat_area = np.full(target.nrows, target.cell_dlat)
    area = cell_lat_area[:, None] * target.cell_dlon

    coverage = np.divide(den, area, out=np.zeros_like(den), where=area > 0)
    mask = coverage >= MIN_COVERAGE
    out = np.divide(num, den, out=np.zeros_like(num), where=den > 0)
    return ScalarField(target, np.where(mask, out, 0.0), mask, field.units)
