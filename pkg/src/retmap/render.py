"""Raster rendering of maps, deviations, and comparisons.

Sequential palette (light to dark red) for raw attribute values; diverging
blue-white-red, centered on zero, for deviations and group differences.
Invalid points are gray, significant regions get black outlines, and
significant grid cells get orange borders.  Output is deterministic
byte-for-byte for fixed inputs.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .attributes import AttributeMap
from .grids import AdaptiveGrid, assign_leaves
from .stats import ComparisonMap, DeviationMap, Region

INVALID_RGB = (128, 128, 128)
OUTLINE_RGB = (0, 0, 0)
GRID_LINE_RGB = (70, 70, 70)
SIGNIFICANT_BORDER_RGB = (255, 140, 0)
UNTESTED_RGB = (190, 190, 190)

# Light-to-dark red ramp.
_SEQ_STOPS = np.array([0.0, 0.25, 0.5, 0.75, 1.0])
_SEQ_COLORS = np.array(
    [(255, 245, 240), (252, 187, 161), (251, 106, 74), (203, 24, 29), (103, 0, 13)],
    dtype=float,
)

# Blue-white-red, white exactly at the center.
_DIV_STOPS = np.array([0.0, 0.25, 0.5, 0.75, 1.0])
_DIV_COLORS = np.array(
    [(5, 48, 97), (107, 172, 208), (255, 255, 255), (214, 96, 77), (103, 0, 31)],
    dtype=float,
)


def _ramp(norm: np.ndarray, stops: np.ndarray, colors: np.ndarray) -> np.ndarray:
    norm = np.clip(norm, 0.0, 1.0)
    rgb = np.empty(norm.shape + (3,), dtype=np.uint8)
    for ch in range(3):
        rgb[..., ch] = np.rint(np.interp(norm, stops, colors[:, ch])).astype(np.uint8)
    return rgb


def sequential_rgb(norm: np.ndarray) -> np.ndarray:
    """Map [0, 1] to the light-to-dark red ramp."""
    return _ramp(norm, _SEQ_STOPS, _SEQ_COLORS)


def diverging_rgb(norm: np.ndarray) -> np.ndarray:
    """Map [-1, 1] (0 = white) to the blue-white-red ramp."""
    return _ramp((np.asarray(norm) + 1.0) / 2.0, _DIV_STOPS, _DIV_COLORS)


def _upscale(arr: np.ndarray, scale: int) -> np.ndarray:
    if scale == 1:
        return arr
    return np.repeat(np.repeat(arr, scale, axis=0), scale, axis=1)


def _value_image(
    values: np.ndarray,
    palette: str,
    value_range: tuple[float, float] | None,
) -> np.ndarray:
    finite = np.isfinite(values)
    if value_range is None:
        if finite.any():
            if palette == "diverging":
                hi = float(np.max(np.abs(values[finite])))
                hi = hi if hi > 0 else 1.0
                value_range = (-hi, hi)
            else:
                value_range = (float(values[finite].min()), float(values[finite].max()))
        else:
            value_range = (0.0, 1.0)
    lo, hi = value_range
    span = hi - lo if hi > lo else 1.0
    norm = np.where(finite, (values - lo) / span, 0.0)
    if palette == "diverging":
        rgb = diverging_rgb(norm * 2.0 - 1.0)
    else:
        rgb = sequential_rgb(norm)
    rgb[~finite] = INVALID_RGB
    return rgb


def _draw_mask_outline(rgb: np.ndarray, mask: np.ndarray, color) -> None:
    """Color pixels of `mask` that touch the outside (4-neighborhood)."""
    pad = np.pad(mask, 1, constant_values=False)
    interior = pad[:-2, 1:-1] & pad[2:, 1:-1] & pad[1:-1, :-2] & pad[1:-1, 2:]
    border = mask & ~interior
    rgb[border] = color


def _draw_assignment_borders(
    rgb: np.ndarray, assign: np.ndarray, highlight: np.ndarray | None = None
) -> None:
    """Draw leaf borders; cells flagged in `highlight` get orange borders."""
    right = np.zeros(assign.shape, dtype=bool)
    down = np.zeros(assign.shape, dtype=bool)
    right[:, :-1] = assign[:, :-1] != assign[:, 1:]
    down[:-1, :] = assign[:-1, :] != assign[1:, :]
    border = (right | down) & (assign >= 0)
    rgb[border] = GRID_LINE_RGB
    if highlight is not None and highlight.any():
        hl = np.zeros(assign.shape, dtype=bool)
        sig = np.where(assign >= 0, highlight[np.clip(assign, 0, None)], False)
        hl[:, :-1] |= right[:, :-1] & (sig[:, :-1] | sig[:, 1:])
        hl[:-1, :] |= down[:-1, :] & (sig[:-1, :] | sig[1:, :])
        rgb[hl & border] = SIGNIFICANT_BORDER_RGB


def render_attribute_map(
    amap: AttributeMap,
    value_range: tuple[float, float] | None = None,
    palette: str = "sequential",
    scale: int = 4,
) -> np.ndarray:
    return _upscale(_value_image(amap.values, palette, value_range), scale)


def render_deviation_map(
    dev: DeviationMap,
    z_range: float = 4.0,
    scale: int = 4,
) -> np.ndarray:
    z = np.where(np.isfinite(dev.z), dev.z, np.nan)
    # Sentinel infinities render at the palette ends.
    z = np.where(np.isposinf(dev.z), z_range, z)
    z = np.where(np.isneginf(dev.z), -z_range, z)
    return _upscale(_value_image(z, "diverging", (-z_range, z_range)), scale)


def render_comparison_points(
    cmp: ComparisonMap,
    regions: list[Region] | None = None,
    value_range: tuple[float, float] | None = None,
    scale: int = 4,
) -> np.ndarray:
    if cmp.mode != "point":
        raise ValueError("point renderer needs a point-wise comparison")
    rgb = _value_image(cmp.diff, "diverging", value_range)
    rgb[~cmp.tested] = UNTESTED_RGB
    rgb = _upscale(rgb, scale)
    if regions:
        for region in regions:
            mask = _upscale(region.mask(cmp.domain), scale)
            _draw_mask_outline(rgb, mask, OUTLINE_RGB)
    return rgb


def render_comparison_cells(
    cmp: ComparisonMap,
    grid: AdaptiveGrid | None = None,
    value_range: tuple[float, float] | None = None,
    scale: int = 4,
) -> np.ndarray:
    """Cells filled by their group mean difference; significant borders orange."""
    if cmp.mode != "cell":
        raise ValueError("cell renderer needs a cell-wise comparison")
    grid = grid if grid is not None else cmp.grid
    if grid is None:
        raise ValueError("cell rendering needs the grid")
    assign = assign_leaves(grid, cmp.domain)
    leaf_ids = grid.leaf_ids()
    by_id = {r.cell_id: r for r in cmp.cells}
    diffs = np.array(
        [
            (by_id[cid].diff if cid in by_id and by_id[cid].diff is not None else np.nan)
            for cid in leaf_ids
        ]
    )
    sig = np.array(
        [bool(cid in by_id and by_id[cid].significant) for cid in leaf_ids], dtype=bool
    )
    values = np.full(cmp.domain.shape, np.nan)
    inside = assign >= 0
    values[inside] = diffs[assign[inside]]
    rgb = _value_image(values, "diverging", value_range)
    rgb[~inside] = INVALID_RGB
    assign_up = _upscale(assign, scale)
    rgb = _upscale(rgb, scale)
    _draw_assignment_borders(rgb, assign_up, highlight=sig)
    return rgb


def render_grid_overlay(
    amap: AttributeMap,
    grid: AdaptiveGrid,
    value_range: tuple[float, float] | None = None,
    scale: int = 4,
) -> np.ndarray:
    """Attribute map with the grid's leaf borders drawn on top."""
    rgb = _upscale(_value_image(amap.values, "sequential", value_range), scale)
    assign_up = _upscale(assign_leaves(grid, amap.domain), scale)
    _draw_assignment_borders(rgb, assign_up)
    return rgb


def save_png(rgb: np.ndarray, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(rgb, mode="RGB").save(path, format="PNG")
    return path


def png_bytes(rgb: np.ndarray) -> bytes:
    import io

    buf = io.BytesIO()
    Image.fromarray(rgb, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()
