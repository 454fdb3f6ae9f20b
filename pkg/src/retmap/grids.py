"""ETDRS-derived adaptive grids.

The base layout is the standard 9-region ETDRS grid: a center disc plus
two rings split into four quadrants at the diagonal angles.  Cells are
annular sectors that refine by 4-way radial x angular bisection (the
center disc first splits into four quadrant sectors), forming a polar
quadtree whose leaves always tile the outer disc exactly.

Angular bounds are stored as turn fractions relative to the -45 degree
diagonal.  All subdivision bounds are then dyadic rationals, which float64
represents exactly, so leaf masks partition the lattice without epsilon
fudging.  Radian bounds are derived views for callers that want angles.

Grids are immutable; split/merge/fit return new grids with structural
sharing of untouched cells.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .attributes import AttributeMap
from .errors import DomainMismatchError, GridEditError, ValidationError
from .geometry import (
    AcquisitionGeometry,
    EnFaceDomain,
    lattice_positions_mm,
    physical_to_enface,
)

ANGLE_ORIGIN = -math.pi / 4.0
SECTOR_LABELS = ("nasal", "superior", "temporal", "inferior")

HARD_MAX_DEPTH = 6
FIT_MIN_POINTS = 16
RELIABLE_MIN_VALID = 8
COVERAGE_THRESHOLD = 0.5


@dataclass(frozen=True)
class EtdrsLayout:
    """Concentric circle diameters (mm) of the base grid."""

    diameters: tuple[float, float, float] = (1.0, 3.0, 6.0)

    def __post_init__(self):
        d = self.diameters
        if len(d) != 3 or not (0 < d[0] < d[1] < d[2]):
            raise ValidationError(
                f"diameters must be three strictly increasing positive values, got {d}"
            )

    @property
    def radii(self) -> tuple[float, float, float]:
        d = self.diameters
        return (d[0] / 2.0, d[1] / 2.0, d[2] / 2.0)


@dataclass(frozen=True)
class CellSummary:
    """Statistics of the valid map points enclosed by a cell.

    mean/sd/vmin/vmax are None when the cell holds no valid point.
    cross_subject_sd is only set by fit_common_grid.
    """

    n_valid: int
    mean: float | None
    sd: float | None
    vmin: float | None
    vmax: float | None
    coverage: float
    reliable: bool
    cross_subject_sd: float | None = None


@dataclass(frozen=True)
class GridCell:
    """Annular sector cell; angular bounds t0/t1 are turn fractions."""

    id: str
    r_inner: float
    r_outer: float
    t0: float
    t1: float
    depth: int
    children: tuple[str, ...] = ()
    summary: CellSummary | None = None

    @property
    def theta_start(self) -> float:
        return ANGLE_ORIGIN + self.t0 * 2.0 * math.pi

    @property
    def theta_end(self) -> float:
        return ANGLE_ORIGIN + self.t1 * 2.0 * math.pi

    @property
    def is_leaf(self) -> bool:
        return not self.children

    @property
    def is_full_circle(self) -> bool:
        return self.t1 - self.t0 >= 1.0

    @property
    def area_mm2(self) -> float:
        return math.pi * (self.r_outer**2 - self.r_inner**2) * (self.t1 - self.t0)


@dataclass(frozen=True)
class AdaptiveGrid:
    layout: EtdrsLayout
    cells: dict[str, GridCell]
    provenance: tuple[str, ...] = ()

    def leaf_ids(self) -> list[str]:
        return sorted(cid for cid, c in self.cells.items() if c.is_leaf)

    def leaves(self) -> list[GridCell]:
        return [self.cells[cid] for cid in self.leaf_ids()]

    def cell(self, cell_id: str) -> GridCell:
        try:
            return self.cells[cell_id]
        except KeyError:
            raise GridEditError(f"no cell {cell_id!r} in grid") from None


def turn_of(x: float, y: float) -> float:
    """Angular position as a turn fraction in [0, 1) from the -45 deg diagonal."""
    t = (math.atan2(y, x) - ANGLE_ORIGIN) / (2.0 * math.pi)
    if t < 0.0:
        t += 1.0
    if t >= 1.0:
        t = 0.0
    return t


def _turn_array(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    t = (np.arctan2(y, x) - ANGLE_ORIGIN) / (2.0 * math.pi)
    t = np.where(t < 0.0, t + 1.0, t)
    return np.where(t >= 1.0, 0.0, t)


_polar_cache: dict[EnFaceDomain, tuple[np.ndarray, np.ndarray]] = {}


def polar_arrays(domain: EnFaceDomain) -> tuple[np.ndarray, np.ndarray]:
    """(radius mm, turn fraction) of every lattice point; cached per domain."""
    cached = _polar_cache.get(domain)
    if cached is None:
        x, y = lattice_positions_mm(domain)
        cached = (np.hypot(x, y), _turn_array(x, y))
        if len(_polar_cache) > 32:
            _polar_cache.clear()
        _polar_cache[domain] = cached
    return cached


def cell_point_membership(cell: GridCell, point: tuple[float, float]) -> bool:
    """True iff the physical point (x, y) in mm lies inside the cell."""
    x, y = point
    r = math.hypot(x, y)
    if not (cell.r_inner <= r < cell.r_outer):
        return False
    if cell.is_full_circle:
        return True
    t = turn_of(x, y)
    return cell.t0 <= t < cell.t1


def _cell_window(cell: GridCell, domain: EnFaceDomain) -> tuple[slice, slice]:
    """Lattice index window that covers the cell's physical bounding box."""
    thetas = [cell.theta_start, cell.theta_end]
    radii = [cell.r_inner, cell.r_outer]
    xs, ys = [], []
    for th in thetas:
        for r in radii:
            xs.append(r * math.cos(th))
            ys.append(r * math.sin(th))
    # Cardinal directions reach the bounding box edge when inside the span.
    for tc, dx, dy in ((0.125, 1, 0), (0.375, 0, 1), (0.625, -1, 0), (0.875, 0, -1)):
        if cell.t0 <= tc <= cell.t1 or cell.is_full_circle:
            xs.append(dx * cell.r_outer)
            ys.append(dy * cell.r_outer)
    if cell.r_inner == 0.0:
        xs.append(0.0)
        ys.append(0.0)
    ix0, iy0 = physical_to_enface(min(xs), min(ys), domain)
    ix1, iy1 = physical_to_enface(max(xs), max(ys), domain)
    ix_lo, ix_hi = sorted((ix0, ix1))
    iy_lo, iy_hi = sorted((iy0, iy1))
    col = slice(
        max(0, int(math.floor(ix_lo)) - 1),
        min(domain.width, int(math.ceil(ix_hi)) + 2),
    )
    row = slice(
        max(0, int(math.floor(iy_lo)) - 1),
        min(domain.n_bscans, int(math.ceil(iy_hi)) + 2),
    )
    return row, col


def cell_mask(cell: GridCell, domain: EnFaceDomain) -> np.ndarray:
    """Boolean lattice mask of the cell."""
    r, t = polar_arrays(domain)
    row, col = _cell_window(cell, domain)
    mask = np.zeros(domain.shape, dtype=bool)
    rw = r[row, col]
    inside = (rw >= cell.r_inner) & (rw < cell.r_outer)
    if not cell.is_full_circle:
        tw = t[row, col]
        inside &= (tw >= cell.t0) & (tw < cell.t1)
    mask[row, col] = inside
    return mask


def summarize_cell(
    amap: AttributeMap,
    cell: GridCell,
    coverage_threshold: float = COVERAGE_THRESHOLD,
    min_valid: int = RELIABLE_MIN_VALID,
) -> CellSummary:
    """Statistics over all valid map points whose position is inside the cell."""
    mask = cell_mask(cell, amap.domain)
    total = int(mask.sum())
    if total == 0:
        return CellSummary(0, None, None, None, None, 0.0, False)
    vals = amap.values[mask]
    vals = vals[np.isfinite(vals)]
    n_valid = int(vals.size)
    coverage = n_valid / total
    if n_valid == 0:
        return CellSummary(0, None, None, None, None, 0.0, False)
    sd = float(np.std(vals, ddof=1)) if n_valid > 1 else 0.0
    return CellSummary(
        n_valid=n_valid,
        mean=float(vals.mean()),
        sd=sd,
        vmin=float(vals.min()),
        vmax=float(vals.max()),
        coverage=coverage,
        reliable=(coverage >= coverage_threshold and n_valid >= min_valid),
    )


def etdrs_base_grid(
    layout: EtdrsLayout = EtdrsLayout(), amap: AttributeMap | None = None
) -> AdaptiveGrid:
    """The 9-region base grid; summaries computed when a map is given."""
    r0, r1, r2 = layout.radii
    cells: dict[str, GridCell] = {}
    cells["center"] = GridCell("center", 0.0, r0, 0.0, 1.0, 0)
    quarters = (0.0, 0.25, 0.5, 0.75, 1.0)
    for ring, (ri, ro) in (("inner", (r0, r1)), ("outer", (r1, r2))):
        for q, label in enumerate(SECTOR_LABELS):
            cid = f"{ring}-{label}"
            cells[cid] = GridCell(cid, ri, ro, quarters[q], quarters[q + 1], 0)
    grid = AdaptiveGrid(layout=layout, cells=cells)
    if amap is not None:
        grid = recompute_summaries(grid, amap)
    return grid


def recompute_summaries(grid: AdaptiveGrid, amap: AttributeMap) -> AdaptiveGrid:
    cells = {
        cid: replace(c, summary=summarize_cell(amap, c)) for cid, c in grid.cells.items()
    }
    return AdaptiveGrid(layout=grid.layout, cells=cells, provenance=grid.provenance)


def _child_bounds(cell: GridCell) -> list[tuple[float, float, float, float]]:
    """Bounds (r_inner, r_outer, t0, t1) of the four children."""
    if cell.is_full_circle:
        # Center disc: first split is purely angular into the four quadrants.
        tq = [cell.t0 + (cell.t1 - cell.t0) * k / 4.0 for k in range(5)]
        return [(cell.r_inner, cell.r_outer, tq[k], tq[k + 1]) for k in range(4)]
    r_mid = 0.5 * (cell.r_inner + cell.r_outer)
    t_mid = 0.5 * (cell.t0 + cell.t1)
    return [
        (cell.r_inner, r_mid, cell.t0, t_mid),
        (r_mid, cell.r_outer, cell.t0, t_mid),
        (cell.r_inner, r_mid, t_mid, cell.t1),
        (r_mid, cell.r_outer, t_mid, cell.t1),
    ]


def _make_children(cell: GridCell) -> list[GridCell]:
    return [
        GridCell(
            id=f"{cell.id}/{k}",
            r_inner=b[0],
            r_outer=b[1],
            t0=b[2],
            t1=b[3],
            depth=cell.depth + 1,
        )
        for k, b in enumerate(_child_bounds(cell))
    ]


def split_cell(
    grid: AdaptiveGrid,
    cell_id: str,
    amap: AttributeMap | None = None,
    max_depth: int = HARD_MAX_DEPTH,
) -> AdaptiveGrid:
    """Split a leaf into its four children; other cells are untouched."""
    cell = grid.cell(cell_id)
    if not cell.is_leaf:
        raise GridEditError(f"cell {cell_id!r} is not a leaf")
    if cell.depth >= max_depth:
        raise GridEditError(f"cell {cell_id!r} is already at max depth {max_depth}")
    children = _make_children(cell)
    if amap is not None:
        children = [replace(c, summary=summarize_cell(amap, c)) for c in children]
    cells = dict(grid.cells)
    cells[cell_id] = replace(cell, children=tuple(c.id for c in children))
    for c in children:
        cells[c.id] = c
    return AdaptiveGrid(
        layout=grid.layout,
        cells=cells,
        provenance=grid.provenance + (f"split:{cell_id}",),
    )


def merge_children(
    grid: AdaptiveGrid, cell_id: str, amap: AttributeMap | None = None
) -> AdaptiveGrid:
    """Remove a cell's children (all of which must be leaves)."""
    cell = grid.cell(cell_id)
    if cell.is_leaf:
        raise GridEditError(f"cell {cell_id!r} has no children to merge")
    if not all(grid.cells[c].is_leaf for c in cell.children):
        raise GridEditError(
            f"cell {cell_id!r} has non-leaf children; merge bottom-up"
        )
    cells = dict(grid.cells)
    for c in cell.children:
        del cells[c]
    merged = replace(cell, children=())
    if amap is not None:
        merged = replace(merged, summary=summarize_cell(amap, merged))
    cells[cell_id] = merged
    return AdaptiveGrid(
        layout=grid.layout,
        cells=cells,
        provenance=grid.provenance + (f"merge:{cell_id}",),
    )


def fit_grid(
    amap: AttributeMap,
    sd_threshold: float,
    max_depth: int,
    min_points: int = FIT_MIN_POINTS,
    layout: EtdrsLayout = EtdrsLayout(),
) -> AdaptiveGrid:
    """Greedy top-down refinement under a variation bound.

    Starting from the 9 base cells, any leaf whose sample SD exceeds
    sd_threshold is split, provided it is above neither the depth limit
    nor the min_points-per-child floor.  Deterministic; the parameters are
    recorded in the grid provenance.
    """
    if not sd_threshold > 0:
        raise ValueError(f"sd_threshold must be > 0, got {sd_threshold}")
    if not 0 <= max_depth <= HARD_MAX_DEPTH:
        raise ValueError(f"max_depth must be in [0, {HARD_MAX_DEPTH}], got {max_depth}")
    base = etdrs_base_grid(layout, amap)
    grid = AdaptiveGrid(
        layout=layout,
        cells=dict(base.cells),
        provenance=(
            f"fit:sd_threshold={sd_threshold!r},max_depth={max_depth},"
            f"min_points={min_points}",
        ),
    )
    grid = _refine(grid, amap, sd_threshold, max_depth, min_points)
    return grid


def _refine(
    grid: AdaptiveGrid,
    amap: AttributeMap,
    sd_threshold: float,
    max_depth: int,
    min_points: int,
) -> AdaptiveGrid:
    cells = dict(grid.cells)
    queue = sorted(cid for cid, c in cells.items() if c.is_leaf)
    while queue:
        cid = queue.pop(0)
        cell = cells[cid]
        s = cell.summary
        if s is None or s.sd is None or not s.sd > sd_threshold:
            continue
        if cell.depth >= max_depth:
            continue
        children = [
            replace(c, summary=summarize_cell(amap, c)) for c in _make_children(cell)
        ]
        if any(c.summary.n_valid < min_points for c in children):
            continue
        cells[cid] = replace(cell, children=tuple(c.id for c in children))
        for c in children:
            cells[c.id] = c
        queue.extend(sorted(c.id for c in children))
    return AdaptiveGrid(layout=grid.layout, cells=cells, provenance=grid.provenance)


def refit_grid(
    grid: AdaptiveGrid,
    amap: AttributeMap,
    sd_threshold: float,
    max_depth: int,
    min_points: int = FIT_MIN_POINTS,
) -> AdaptiveGrid:
    """Continue greedy refinement from an existing grid (fit is idempotent)."""
    return _refine(grid, amap, sd_threshold, max_depth, min_points)


def fit_common_grid(
    maps: list[AttributeMap],
    sd_threshold: float,
    max_depth: int,
    min_points: int = FIT_MIN_POINTS,
    layout: EtdrsLayout = EtdrsLayout(),
) -> AdaptiveGrid:
    """Fit one grid to the per-point group mean of several maps.

    A point enters the mean map iff it is valid in at least half the maps.
    Leaf summaries describe the mean map and additionally carry the
    cross-subject SD of per-subject cell means.
    """
    if len(maps) < 2:
        raise DomainMismatchError("fit_common_grid needs at least 2 maps")
    domain = maps[0].domain
    for m in maps[1:]:
        if m.domain != domain:
            raise DomainMismatchError(
                f"maps do not share one domain: {m.domain} != {domain}"
            )
    stack = np.stack([m.values for m in maps])
    finite = np.isfinite(stack)
    counts = finite.sum(axis=0)
    valid = counts * 2 >= len(maps)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = np.where(finite, stack, 0.0).sum(axis=0) / counts
    mean[~valid | (counts == 0)] = np.nan
    mean_map = AttributeMap(
        layer_id=maps[0].layer_id, kind=maps[0].kind, values=mean, domain=domain
    )
    grid = fit_grid(mean_map, sd_threshold, max_depth, min_points, layout)

    cells = dict(grid.cells)
    for cid in grid.leaf_ids():
        cell = cells[cid]
        subject_means = []
        for m in maps:
            s = summarize_cell(m, cell)
            if s.n_valid > 0:
                subject_means.append(s.mean)
        if len(subject_means) > 1:
            cross = float(np.std(np.asarray(subject_means), ddof=1))
        else:
            cross = None
        cells[cid] = replace(cell, summary=replace(cell.summary, cross_subject_sd=cross))
    return AdaptiveGrid(
        layout=grid.layout,
        cells=cells,
        provenance=grid.provenance + (f"common:n_maps={len(maps)}",),
    )


def compression_ratio(grid: AdaptiveGrid, geometry: AcquisitionGeometry) -> float:
    """Leaf count over the raw per-slice value count (width x bscan_height)."""
    return len(grid.leaf_ids()) / float(geometry.width * geometry.bscan_height)


def assign_leaves(grid: AdaptiveGrid, domain: EnFaceDomain) -> np.ndarray:
    """Index of the containing leaf (into sorted leaf_ids) per lattice point, -1 outside."""
    out = np.full(domain.shape, -1, dtype=np.int32)
    for idx, cid in enumerate(grid.leaf_ids()):
        mask = cell_mask(grid.cells[cid], domain)
        out[mask & (out < 0)] = idx
    return out


def point_to_leaf(grid: AdaptiveGrid, point: tuple[float, float]) -> str | None:
    for cid in grid.leaf_ids():
        if cell_point_membership(grid.cells[cid], point):
            return cid
    return None


def _summary_to_dict(s: CellSummary | None) -> dict | None:
    if s is None:
        return None
    return {
        "n_valid": s.n_valid,
        "mean": s.mean,
        "sd": s.sd,
        "min": s.vmin,
        "max": s.vmax,
        "coverage": s.coverage,
        "reliable": s.reliable,
        "cross_subject_sd": s.cross_subject_sd,
    }


def _summary_from_dict(d: dict | None) -> CellSummary | None:
    if d is None:
        return None
    return CellSummary(
        n_valid=int(d["n_valid"]),
        mean=d["mean"],
        sd=d["sd"],
        vmin=d["min"],
        vmax=d["max"],
        coverage=float(d["coverage"]),
        reliable=bool(d["reliable"]),
        cross_subject_sd=d.get("cross_subject_sd"),
    )


def grid_to_dict(grid: AdaptiveGrid) -> dict:
    """Serialize as a tree document; turn fractions make round-trips exact."""
    return {
        "layout": {"diameters": list(grid.layout.diameters)},
        "provenance": list(grid.provenance),
        "cells": [
            {
                "id": c.id,
                "r_inner": c.r_inner,
                "r_outer": c.r_outer,
                "t0": c.t0,
                "t1": c.t1,
                "theta_start": c.theta_start,
                "theta_end": c.theta_end,
                "depth": c.depth,
                "children": list(c.children),
                "summary": _summary_to_dict(c.summary),
            }
            for _, c in sorted(grid.cells.items())
        ],
    }


def grid_from_dict(doc: dict) -> AdaptiveGrid:
    layout = EtdrsLayout(diameters=tuple(doc["layout"]["diameters"]))
    cells = {}
    for c in doc["cells"]:
        cells[c["id"]] = GridCell(
            id=c["id"],
            r_inner=float(c["r_inner"]),
            r_outer=float(c["r_outer"]),
            t0=float(c["t0"]),
            t1=float(c["t1"]),
            depth=int(c["depth"]),
            children=tuple(c["children"]),
            summary=_summary_from_dict(c.get("summary")),
        )
    return AdaptiveGrid(
        layout=layout, cells=cells, provenance=tuple(doc.get("provenance", ()))
    )
