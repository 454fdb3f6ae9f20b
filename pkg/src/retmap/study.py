"""Batch cross-sectional study evaluation: cohorts in, reports out.

One invocation handles one study.  Outputs under the configured directory:

  cells.csv      per-cell test table (grid mode), schema v1
  regions.csv    per-region measurement table (map mode), schema v1
  manifest.json  config echo, dataset manifest with warnings, metrics
  L<layer>_<attribute>_*.json / *.png   serialized artifacts and images

All outputs are deterministic functions of the inputs and config.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .artifacts import (
    attribute_map_to_dict,
    comparison_to_dict,
    config_to_dict,
    save_artifact,
)
from .attributes import AttributeKind, AttributeMap, compute_attribute_map
from .dataset import Dataset, load_cohort
from .errors import InsufficientDataError
from .grids import fit_common_grid, grid_to_dict
from .render import (
    png_bytes,
    render_attribute_map,
    render_comparison_cells,
    render_comparison_points,
    render_grid_overlay,
)
from .stats import (
    ComparisonConfig,
    ComparisonMap,
    Region,
    compare_gridwise,
    compare_pointwise,
    extract_significant_regions,
    measure_region,
)

CSV_SCHEMA_VERSION = 1

CELL_COLUMNS = (
    "layer", "attribute", "cell_id", "n_p", "n_c",
    "mean_p", "mean_c", "diff", "p", "d", "significant",
)
REGION_COLUMNS = (
    "layer", "attribute", "region_id", "n_p", "n_c",
    "mean_p", "mean_c", "diff", "p", "d", "significant",
    "n_points", "area_mm2", "centroid_x_mm", "centroid_y_mm", "min_p",
)


@dataclass(frozen=True)
class StudyConfig:
    patients_dir: str
    controls_dir: str
    layers: tuple[int, ...]
    attributes: tuple[AttributeKind, ...]
    out_dir: str
    mode: str = "both"  # "map" | "grid" | "both"
    test: str = "welch_t"
    alpha: float = 0.05
    # None = mode-dependent default: benjamini_hochberg point-wise, none cell-wise.
    correction: str | None = None
    sd_threshold: float = 10.0
    max_depth: int = 4
    palette: str = "auto"
    value_range: tuple[float, float] | None = None
    render_scale: int = 4

    def __post_init__(self):
        if self.mode not in ("map", "grid", "both"):
            raise ValueError(f"mode must be map/grid/both, got {self.mode!r}")
        if not self.layers or not self.attributes:
            raise ValueError("at least one layer and one attribute required")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")

    def point_config(self) -> ComparisonConfig:
        return ComparisonConfig(
            test=self.test,
            alpha=self.alpha,
            correction=self.correction or "benjamini_hochberg",
        )

    def cell_config(self) -> ComparisonConfig:
        return ComparisonConfig(
            test=self.test,
            alpha=self.alpha,
            correction=self.correction or "none",
        )


@dataclass
class StudyReport:
    out_dir: Path
    metrics: list[dict] = field(default_factory=list)
    files: list[str] = field(default_factory=list)
    manifest: dict = field(default_factory=dict)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: Path, columns, rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    path.write_text(buf.getvalue(), encoding="utf-8", newline="")


def _dataset_manifest(datasets: list[Dataset]) -> list[dict]:
    return [
        {
            "id": d.id,
            "eye": d.geometry.eye,
            "group_label": d.group_label,
            "shape": [d.geometry.n_bscans, d.geometry.width],
            "warnings": list(d.warnings),
        }
        for d in datasets
    ]


def _attr_slug(kind: AttributeKind) -> str:
    return kind.label.replace(":", "-")


def _group_mean_map(maps: list[AttributeMap]) -> AttributeMap:
    stack = np.stack([m.values for m in maps])
    finite = np.isfinite(stack)
    counts = finite.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = np.where(finite, stack, 0.0).sum(axis=0) / counts
    mean[counts == 0] = np.nan
    return AttributeMap(
        layer_id=maps[0].layer_id, kind=maps[0].kind, values=mean, domain=maps[0].domain
    )


def run_study(config: StudyConfig) -> StudyReport:
    """Execute the full study pipeline and write the report files."""
    patients = load_cohort(config.patients_dir)
    controls = load_cohort(config.controls_dir)
    if len(patients) < 3 or len(controls) < 3:
        raise InsufficientDataError(
            f"study needs >= 3 datasets per cohort, got {len(patients)} patients "
            f"and {len(controls)} controls"
        )
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    report = StudyReport(out_dir=out)
    cell_rows: list[tuple] = []
    region_rows: list[tuple] = []

    for layer in config.layers:
        for kind in config.attributes:
            slug = f"L{layer:02d}_{_attr_slug(kind)}"
            pmaps = [compute_attribute_map(d, layer, kind) for d in patients]
            cmaps = [compute_attribute_map(d, layer, kind) for d in controls]
            metrics = {
                "layer": layer,
                "attribute": kind.label,
                "n_patients": len(pmaps),
                "n_controls": len(cmaps),
            }

            mean_map = _group_mean_map(pmaps)
            mean_palette = "sequential" if config.palette == "auto" else config.palette
            _emit(report, out / f"{slug}_patient_mean.json",
                  attribute_map_to_dict(mean_map))
            _emit_png(
                report, out / f"{slug}_patient_mean.png",
                render_attribute_map(
                    mean_map, value_range=config.value_range,
                    palette=mean_palette, scale=config.render_scale,
                ),
            )

            if config.mode in ("grid", "both"):
                grid = fit_common_grid(
                    cmaps, config.sd_threshold, config.max_depth
                )
                gridwise = compare_gridwise(grid, pmaps, cmaps, config.cell_config())
                for rec in gridwise.cells:
                    cell_rows.append(
                        (layer, kind.label, rec.cell_id, rec.n_p, rec.n_c,
                         rec.mean_p, rec.mean_c, rec.diff, rec.p, rec.d,
                         rec.significant)
                    )
                metrics["n_cells"] = len(gridwise.cells)
                metrics["n_significant_cells"] = gridwise.n_significant
                _emit(report, out / f"{slug}_grid.json", grid_to_dict(grid))
                _emit(report, out / f"{slug}_gridwise.json",
                      comparison_to_dict(gridwise))
                _emit_png(
                    report, out / f"{slug}_gridwise.png",
                    render_comparison_cells(
                        gridwise, value_range=config.value_range,
                        scale=config.render_scale,
                    ),
                )
                _emit_png(
                    report, out / f"{slug}_grid_overlay.png",
                    render_grid_overlay(
                        mean_map, grid, value_range=config.value_range,
                        scale=config.render_scale,
                    ),
                )

            if config.mode in ("map", "both"):
                pointwise = compare_pointwise(pmaps, cmaps, config.point_config())
                regions = extract_significant_regions(pointwise)
                for region in regions:
                    region_rows.append(
                        _region_row(layer, kind, region, pointwise, pmaps, cmaps,
                                    config)
                    )
                metrics["n_significant_points"] = int(pointwise.significant.sum())
                metrics["n_tested_points"] = int(pointwise.tested.sum())
                metrics["n_regions"] = len(regions)
                metrics["significant_area_mm2"] = float(
                    sum(r.area_mm2 for r in regions)
                )
                _emit(report, out / f"{slug}_pointwise.json",
                      comparison_to_dict(pointwise, regions))
                _emit_png(
                    report, out / f"{slug}_pointwise.png",
                    render_comparison_points(
                        pointwise, regions, value_range=config.value_range,
                        scale=config.render_scale,
                    ),
                )

            report.metrics.append(metrics)

    _write_csv(out / "cells.csv", CELL_COLUMNS, cell_rows)
    report.files.append("cells.csv")
    _write_csv(out / "regions.csv", REGION_COLUMNS, region_rows)
    report.files.append("regions.csv")

    manifest = {
        "schema_version": CSV_SCHEMA_VERSION,
        "conventions": {
            "laterality": "left eyes mirrored during analysis so +x is always nasal",
            "angles": "0 rad = nasal (+x), counter-clockwise",
        },
        "config": {
            "patients_dir": str(config.patients_dir),
            "controls_dir": str(config.controls_dir),
            "layers": list(config.layers),
            "attributes": [k.label for k in config.attributes],
            "mode": config.mode,
            "test": config.test,
            "alpha": config.alpha,
            "correction": config.correction,
            "point_config": config_to_dict(config.point_config()),
            "cell_config": config_to_dict(config.cell_config()),
            "sd_threshold": config.sd_threshold,
            "max_depth": config.max_depth,
        },
        "datasets": {
            "patients": _dataset_manifest(patients),
            "controls": _dataset_manifest(controls),
        },
        "metrics": report.metrics,
        "files": sorted(report.files),
    }
    save_artifact({"artifact": "study_manifest", **manifest}, out / "manifest.json")
    report.files.append("manifest.json")
    report.manifest = manifest
    return report


def _region_row(
    layer: int,
    kind: AttributeKind,
    region: Region,
    pointwise: ComparisonMap,
    pmaps: list[AttributeMap],
    cmaps: list[AttributeMap],
    config: StudyConfig,
) -> tuple:
    mask = region.mask(pointwise.domain)
    try:
        m = measure_region(pmaps, mask, control_maps=cmaps,
                           config=config.cell_config())
        n_p, n_c, mean_p = m.n_p, m.n_c, m.mean
        mean_c = None if m.mean is None or m.diff is None else m.mean - m.diff
        diff, p, d = m.diff, m.p, m.d
    except InsufficientDataError:
        n_p = n_c = mean_p = mean_c = diff = p = d = None
    return (
        layer, kind.label, region.id, n_p, n_c, mean_p, mean_c, diff, p, d,
        True, region.n_points, region.area_mm2,
        region.centroid_mm[0], region.centroid_mm[1], region.min_p,
    )


def _emit(report: StudyReport, path: Path, doc: dict) -> None:
    save_artifact(doc, path)
    report.files.append(path.name)


def _emit_png(report: StudyReport, path: Path, rgb) -> None:
    path.write_bytes(png_bytes(rgb))
    report.files.append(path.name)
