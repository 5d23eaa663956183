"""Watershed-based mining of spatio-temporally invariant core regions.

The pipeline runs in five stages over a stack of annual fields:

1. per-year focus points: strict local extrema over the 8-connected
   neighborhood (equal-valued plateaus are canonicalized to their
   lexicographically smallest cell);
2. per-year zones: priority-flood watershed growth from the focus points;
3. recurrence mining: counting, per exact cell, how many years produced a
   focus there, with a frequent flag at ``count >= min_years``;
4. cores: grouping of all observed focus cells, either by 8-connected
   contiguity (CC) or within a Chebyshev radius with transitive closure
   (CR), classified by member recurrence into CHD / CLD / CND;
5. consensus: per-cell modal core assignment across all years.

The number of cores is an output of the process, never an input.
"""

from __future__ import annotations

import heapq
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from .errors import EmptyDomainError, ParameterError, ShapeMismatchError
from .gridcore import (
    NEIGHBOR_OFFSETS,
    CellIndex,
    ScalarField,
    ZoneMap,
    chebyshev,
)
from .ingest import AnnualMeanStack

ORIENT_MAXIMA = "maxima"
ORIENT_MINIMA = "minima"
ORIENTATIONS = frozenset({ORIENT_MAXIMA, ORIENT_MINIMA})

MODE_CC = "cc"
MODE_CR = "cr"

CLASS_CHD = "CHD"  # contains a highly dominating (very frequent) focus
CLASS_CLD = "CLD"  # contains a less dominating focus
CLASS_CND = "CND"  # no dominating focus at all

DEFAULT_THETA_HIGH = 0.60
DEFAULT_THETA_DOM = 12.0 / 31.0


@dataclass(frozen=True)
class FocusPoint:
    """A strict local extremum (or plateau representative) in one year."""

    cell: CellIndex
    year: int
    value: float


@dataclass(frozen=True)
class FocusFrequencyTable:
    """Recurrence counts of focus cells across years."""

    counts: Mapping[CellIndex, int]
    total_years: int
    min_years: int

    def __post_init__(self) -> None:
        if self.total_years < 1:
            raise ParameterError("total_years must be >= 1")
        if self.min_years < 1:
            raise ParameterError("min_years must be >= 1")
        counts = {CellIndex(*c): int(n) for c, n in dict(self.counts).items()}
        for cell, n in counts.items():
            if not 0 < n <= self.total_years:
                raise ParameterError(f"count {n} for {cell} outside (0, {self.total_years}]")
        object.__setattr__(self, "counts", counts)

    def frequency(self, cell: CellIndex) -> float:
        return self.counts[cell] / self.total_years

    def is_frequent(self, cell: CellIndex) -> bool:
        return self.counts[cell] >= self.min_years

    @property
    def frequent_cells(self) -> tuple[CellIndex, ...]:
        return tuple(sorted(c for c in self.counts if self.is_frequent(c)))

    @property
    def cells(self) -> tuple[CellIndex, ...]:
        return tuple(sorted(self.counts))


@dataclass(frozen=True)
class Core:
    """A group of recurring focus cells and the territory their zones span."""

    id: int
    member_cells: tuple[CellIndex, ...]
    member_counts: tuple[int, ...]
    total_years: int
    mode: str
    radius: int | None
    dominance: str | None
    extent: frozenset[CellIndex]

    @property
    def member_frequencies(self) -> tuple[float, ...]:
        return tuple(n / self.total_years for n in self.member_counts)

    @property
    def max_frequency(self) -> float:
        return max(self.member_frequencies)

    @property
    def representative(self) -> CellIndex:
        """Highest-count member, ties to the lexicographically smallest cell."""
        best = min(zip(self.member_cells, self.member_counts), key=lambda t: (-t[1], t[0]))
        return best[0]

    @property
    def extent_size(self) -> int:
        return len(self.extent)


def _check_orientation(orientation: str) -> bool:
    if orientation not in ORIENTATIONS:
        raise ParameterError(f"orientation must be 'maxima' or 'minima', got {orientation!r}")
    return orientation == ORIENT_MAXIMA


def _neighbor_envelope(values: np.ndarray, mask: np.ndarray, maxima: bool) -> np.ndarray:
    """Per-cell extreme (max for maxima, min for minima) over unmasked neighbors.

    Cells with no unmasked neighbor get -inf (maxima) / +inf (minima).
    """
    fill = -np.inf if maxima else np.inf
    padded = np.full((values.shape[0] + 2, values.shape[1] + 2), fill)
    padded[1:-1, 1:-1] = np.where(mask, values, fill)
    env = np.full(values.shape, fill)
    for dr, dc in NEIGHBOR_OFFSETS:
        shifted = padded[1 + dr : padded.shape[0] - 1 + dr, 1 + dc : padded.shape[1] - 1 + dc]
        env = np.maximum(env, shifted) if maxima else np.minimum(env, shifted)
    return env


def detect_focus_points(
    field: ScalarField, orientation: str, year: int = 0
) -> list[FocusPoint]:
    """Strict local extrema of a field over unmasked 8-neighborhoods.

    An equal-valued 8-connected plateau whose entire unmasked boundary is on
    the wrong side emits exactly one focus at its lexicographically smallest
    cell; a plateau spanning every unmasked cell emits none.  Results are
    ordered by (row, col).
    """
    maxima = _check_orientation(orientation)
    mask = field.mask
    total_valid = int(mask.sum())
    if total_valid == 0:
        raise EmptyDomainError("field is fully masked")
    values = field.values
    env = _neighbor_envelope(values, mask, maxima)

    foci: list[FocusPoint] = []
    if total_valid == 1:
        # A single unmasked cell is a plateau spanning the whole domain.
        return foci

    strict = mask & ((values > env) if maxima else (values < env))
    plateau_seed = mask & (values == env)

    nrows, ncols = values.shape
    visited = np.zeros_like(mask, dtype=bool)
    for r in range(nrows):
        for c in range(ncols):
            if strict[r, c]:
                foci.append(FocusPoint(CellIndex(r, c), year, float(values[r, c])))
                continue
            if not plateau_seed[r, c] or visited[r, c]:
                continue
            # Flood the equal-valued component and test its whole boundary.
            v0 = values[r, c]
            comp = [(r, c)]
            stack = [(r, c)]
            visited[r, c] = True
            ok = True
            while stack:
                cr, cc = stack.pop()
                for dr, dc in NEIGHBOR_OFFSETS:
                    nr, nc = cr + dr, cc + dc
                    if not (0 <= nr < nrows and 0 <= nc < ncols) or not mask[nr, nc]:
                        continue
                    nv = values[nr, nc]
                    if nv == v0:
                        if not visited[nr, nc]:
                            visited[nr, nc] = True
                            comp.append((nr, nc))
                            stack.append((nr, nc))
                    elif (maxima and nv > v0) or (not maxima and nv < v0):
                        ok = False
            if ok and len(comp) < total_valid:
                rr, cc2 = min(comp)
                foci.append(FocusPoint(CellIndex(rr, cc2), year, float(v0)))
    foci.sort(key=lambda f: f.cell)
    return foci


def watershed_zones(
    field: ScalarField, foci: Sequence[FocusPoint], orientation: str
) -> ZoneMap:
    """Priority-flood region growing from focus seeds.

    Queue entries are ``(value, row, col)`` with the extremal value popped
    first (largest under maxima orientation), ties broken by smaller
    (row, col), then by earlier insertion.  A cell is labeled on its first
    pop; its unmasked 8-neighbors are then enqueued under the same label.
    Unmasked cells unreachable from every focus stay unlabeled.
    """
    maxima = _check_orientation(orientation)
    if not foci:
        raise ParameterError("watershed requires at least one focus")
    geom = field.geometry
    mask = field.mask
    values = field.values
    sign = -1.0 if maxima else 1.0

    labels = np.full(geom.shape, -1, dtype=np.int32)
    anchors: dict[int, CellIndex] = {}
    seen_cells = set()
    heap: list[tuple[float, int, int, int, int]] = []
    seq = 0
    for i, fp in enumerate(foci):
        r, c = fp.cell
        if not geom.contains(r, c):
            raise ParameterError(f"focus {fp.cell} outside the grid")
        if not mask[r, c]:
            raise ParameterError(f"focus {fp.cell} lies on a masked cell")
        if (r, c) in seen_cells:
            raise ParameterError(f"duplicate focus cell {fp.cell}")
        seen_cells.add((r, c))
        anchors[i] = CellIndex(r, c)
        heapq.heappush(heap, (sign * values[r, c], r, c, seq, i))
        seq += 1

    nrows, ncols = geom.shape
    while heap:
        _, r, c, _, lab = heapq.heappop(heap)
        if labels[r, c] != -1:
            continue
        labels[r, c] = lab
        for dr, dc in NEIGHBOR_OFFSETS:
            nr, nc = r + dr, c + dc
            if 0 <= nr < nrows and 0 <= nc < ncols and mask[nr, nc] and labels[nr, nc] == -1:
                heapq.heappush(heap, (sign * values[nr, nc], nr, nc, seq, lab))
                seq += 1
    return ZoneMap(geom, labels, anchors)


def mine_frequent_foci(
    yearly_foci: Sequence[Sequence[FocusPoint]], total_years: int, min_years: int
) -> FocusFrequencyTable:
    """Count per-exact-cell focus recurrence across years.

    Every observed focus cell enters the table; a cell is flagged frequent
    iff its count reaches ``min_years``.
    """
    counts: dict[CellIndex, int] = {}
    for year_foci in yearly_foci:
        for fp in year_foci:
            cell = CellIndex(*fp.cell)
            counts[cell] = counts.get(cell, 0) + 1
    return FocusFrequencyTable(counts, total_years, min_years)


def _group_cells(cells: list[CellIndex], max_dist: int) -> list[list[CellIndex]]:
    """Transitive closure of 'within Chebyshev distance max_dist' over cells."""
    parent = list(range(len(cells)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(len(cells)):
        for j in range(i + 1, len(cells)):
            if chebyshev(cells[i], cells[j]) <= max_dist:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)
    groups: dict[int, list[CellIndex]] = {}
    for i, cell in enumerate(cells):
        groups.setdefault(find(i), []).append(cell)
    return [sorted(g) for g in groups.values()]


def build_cores(
    table: FocusFrequencyTable,
    mode: str = MODE_CC,
    radius: int = 1,
    yearly_zones: Sequence[ZoneMap] = (),
) -> list[Core]:
    """Group all observed focus cells into cores and attach their extents.

    CC joins 8-adjacent focus cells (connected components); CR joins any two
    foci within Chebyshev distance ``radius``, closed transitively.  A core's
    extent is the union over years of the cells of every zone whose anchor is
    one of its members.  Ids are assigned by decreasing maximum member
    frequency, ties by smallest member cell.  Dominance is left unset; see
    :func:`classify_core`.
    """
    if mode not in (MODE_CC, MODE_CR):
        raise ParameterError(f"mode must be 'cc' or 'cr', got {mode!r}")
    if mode == MODE_CR and radius < 1:
        raise ParameterError("CR mode requires radius >= 1")
    cells = sorted(table.counts)
    if not cells:
        return []
    max_dist = 1 if mode == MODE_CC else radius
    groups = _group_cells(cells, max_dist)

    # Zone membership lookups, one pass per year.
    anchor_zone_cells: dict[CellIndex, list[list[CellIndex]]] = {c: [] for c in cells}
    for zm in yearly_zones:
        for label, anchor in zm.anchors.items():
            if anchor in anchor_zone_cells:
                anchor_zone_cells[anchor].append(zm.cells_of(label))

    def sort_key(group: list[CellIndex]):
        return (-max(table.counts[c] for c in group), group[0])

    cores = []
    for i, group in enumerate(sorted(groups, key=sort_key)):
        extent = set(group)
        for member in group:
            for zone_cells in anchor_zone_cells[member]:
                extent.update(zone_cells)
        cores.append(
            Core(
                id=i,
                member_cells=tuple(group),
                member_counts=tuple(table.counts[c] for c in group),
                total_years=table.total_years,
                mode=mode,
                radius=radius if mode == MODE_CR else None,
                dominance=None,
                extent=frozenset(extent),
            )
        )
    return cores


def classify_core(
    core: Core,
    table: FocusFrequencyTable,
    theta_high: float = DEFAULT_THETA_HIGH,
    theta_dom: float = DEFAULT_THETA_DOM,
) -> str:
    """Dominance class from member recurrence frequencies.

    CHD when any member reaches ``theta_high``; else CLD when any member
    reaches ``theta_dom``; else CND.
    """
    if not (0.0 < theta_dom <= theta_high <= 1.0):
        raise ParameterError(
            f"thresholds must satisfy 0 < theta_dom <= theta_high <= 1, "
            f"got theta_dom={theta_dom}, theta_high={theta_high}"
        )
    freqs = [table.counts[c] / table.total_years for c in core.member_cells]
    top = max(freqs)
    if top >= theta_high:
        return CLASS_CHD
    if top >= theta_dom:
        return CLASS_CLD
    return CLASS_CND


def _translate_to_cores(zm: ZoneMap, cores: Sequence[Core]) -> np.ndarray:
    """Zone labels -> core ids: a zone maps to the core holding its anchor,
    else to the core with the Chebyshev-nearest member (ties to smaller id)."""
    member_to_core = {}
    for core in cores:
        for cell in core.member_cells:
            member_to_core.setdefault(cell, core.id)
    if not zm.anchors:
        return np.full(zm.labels.shape, -1, dtype=np.int32)
    max_label = max(zm.anchors)
    lut = np.full(max_label + 2, -1, dtype=np.int32)
    for label in sorted(zm.anchors):
        anchor = zm.anchors[label]
        cid = member_to_core.get(anchor)
        if cid is None:
            cid = min(
                (min(chebyshev(anchor, m) for m in core.member_cells), core.id)
                for core in cores
            )[1]
        lut[label] = cid
    lab = zm.labels
    return np.where(lab >= 0, lut[np.clip(lab, 0, max_label)], -1).astype(np.int32)


def consensus_zone_map(yearly_zones: Sequence[ZoneMap], cores: Sequence[Core]) -> ZoneMap:
    """Per-cell modal core id across years ("zone of maximum occurrence").

    Each year's zones are first translated to core ids; a cell's consensus
    label is the core id occurring in the most years, ties to the smaller
    id.  Cells labeled in no year stay unlabeled.
    """
    if not yearly_zones:
        raise ParameterError("consensus requires at least one yearly zone map")
    if not cores:
        raise ParameterError("consensus requires at least one core")
    geom = yearly_zones[0].geometry
    for zm in yearly_zones:
        if zm.geometry.shape != geom.shape:
            raise ShapeMismatchError("yearly zone maps must share a geometry")
    ncores = len(cores)
    votes = np.zeros((ncores,) + geom.shape, dtype=np.int32)
    for zm in yearly_zones:
        translated = _translate_to_cores(zm, cores)
        for cid in range(ncores):
            votes[cid] += translated == cid
    total = votes.sum(axis=0)
    winner = votes.argmax(axis=0).astype(np.int32)  # first max = smallest id
    labels = np.where(total > 0, winner, -1)
    anchors = {core.id: core.representative for core in cores}
    return ZoneMap(geom, labels, anchors)


@dataclass(frozen=True)
class MisticParams:
    """Knobs for the full pipeline run.

    ``theta_dom=None`` derives the dominance threshold from the frequent
    threshold (``min_years / total_years``).
    """

    orientation: str = ORIENT_MAXIMA
    min_years: int = 12
    mode: str = MODE_CC
    radius: int = 1
    theta_high: float = DEFAULT_THETA_HIGH
    theta_dom: float | None = None


@dataclass(frozen=True)
class MisticResult:
    years: tuple[int, ...]
    yearly_foci: Mapping[int, tuple[FocusPoint, ...]]
    yearly_zones: Mapping[int, ZoneMap]
    table: FocusFrequencyTable
    cores: tuple[Core, ...]
    consensus: ZoneMap
    theta_high: float
    theta_dom: float
    notices: tuple[str, ...]


def _year_products(
    field: ScalarField, year: int, orientation: str
) -> tuple[list[FocusPoint], ZoneMap]:
    foci = detect_focus_points(field, orientation, year=year)
    if foci:
        zones = watershed_zones(field, foci, orientation)
    else:
        zones = ZoneMap(field.geometry, np.full(field.geometry.shape, -1, np.int32), {})
    return foci, zones


def run_mistic(
    stack: AnnualMeanStack, params: MisticParams = MisticParams(), workers: int = 1
) -> MisticResult:
    """Compose the full pipeline over an annual-mean stack.

    Every year runs over the stack's combined mask so recurrence is counted
    on a stable domain.  Per-year stages may run on a thread pool
    (``workers``); outputs are identical to sequential execution.
    """
    if stack.n_years == 0:
        raise EmptyDomainError("stack has no years")
    _check_orientation(params.orientation)
    notices: list[str] = []

    fields = {
        year: ScalarField(stack.geometry, f.values, stack.mask, f.units)
        for year, f in zip(stack.years, stack.fields)
    }
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {
                year: pool.submit(_year_products, fields[year], year, params.orientation)
                for year in stack.years
            }
            products = {year: futures[year].result() for year in stack.years}
    else:
        products = {
            year: _year_products(fields[year], year, params.orientation)
            for year in stack.years
        }

    yearly_foci = {year: tuple(p[0]) for year, p in products.items()}
    yearly_zones = {year: p[1] for year, p in products.items()}

    for year in stack.years:
        if not yearly_foci[year]:
            notices.append(f"year {year}: no focus points detected")
            continue
        unreached = int((stack.mask & (yearly_zones[year].labels == -1)).sum())
        if unreached:
            notices.append(f"year {year}: {unreached} unmasked cells unreachable from any focus")

    total_years = stack.n_years
    table = mine_frequent_foci(
        [yearly_foci[y] for y in stack.years], total_years, params.min_years
    )
    if params.theta_dom is not None:
        theta_dom = params.theta_dom
    else:
        # Derived from the frequent threshold, clamped so the CHD bar stays
        # on top when min_years/total_years exceeds it (short stacks).
        theta_dom = min(params.min_years / total_years, params.theta_high)

    zone_list = [yearly_zones[y] for y in stack.years]
    cores = build_cores(table, params.mode, params.radius, zone_list)
    cores = tuple(
        replace(core, dominance=classify_core(core, table, params.theta_high, theta_dom))
        for core in cores
    )

    if cores:
        consensus = consensus_zone_map(zone_list, cores)
    else:
        notices.append("no focus points detected in any year; no cores, empty consensus")
        consensus = ZoneMap(stack.geometry, np.full(stack.geometry.shape, -1, np.int32), {})

    return MisticResult(
        years=stack.years,
        yearly_foci=yearly_foci,
        yearly_zones=yearly_zones,
        table=table,
        cores=cores,
        consensus=consensus,
        theta_high=params.theta_high,
        theta_dom=theta_dom,
        notices=tuple(notices),
    )
