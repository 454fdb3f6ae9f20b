/**
 * Focus view: the selected layer enlarged, with optional grid overlay
 * (cells colored and labeled by their average values, individually
 * replaceable by map sections), significant-cell borders, significant
 * region outlines, the current selection, and the hover crosshair.
 */

import type { ComparisonPayload, GridPayload, MapPayload } from "../api.js";
import { decodeArray } from "../api.js";
import type { Surface } from "../draw.js";
import {
  cellContains,
  enfaceToPhysical,
  leafAssignment,
  leafCells,
  pointInPolygon,
} from "../geometry.js";
import {
  cssColor,
  divergingRgb,
  normalize,
  normalizeSymmetric,
  sequentialRgb,
  HIGHLIGHT_RGB,
  type Rgb,
} from "../palette.js";
import type { Selection, ViewState } from "../state.js";
import {
  cellFillLayer,
  comparisonPointLayer,
  deviationLayer,
  drawCellBorders,
  drawMaskHighlight,
  drawRegionOutlines,
  rawMapLayer,
  upscale,
  type PixelLayer,
} from "./maplayer.js";

export interface FocusInputs {
  state: ViewState;
  map: MapPayload;
  grid: GridPayload | null;
  comparison: ComparisonPayload | null;
  cellComparison: ComparisonPayload | null;
}

export interface FocusRenderInfo {
  dataset: string;
  layer: number;
  attribute: string;
  mode: string;
  selection: Selection;
  gridVersion: number | null;
  leafIds: string[] | null;
  cellLabels: Record<string, string>;
}

export class FocusView {
  lastRender: FocusRenderInfo | null = null;
  private scale = 1;
  private assignCache: { key: string; assign: Int32Array } | null = null;
  private lastInputs: FocusInputs | null = null;

  constructor(private surface: Surface) {}

  private assignment(grid: GridPayload, map: MapPayload): Int32Array {
    const key = `${grid.grid_id}:${grid.version}:${map.dataset}`;
    if (!this.assignCache || this.assignCache.key !== key) {
      this.assignCache = { key, assign: leafAssignment(grid.tree, map.domain) };
    }
    return this.assignCache.assign;
  }

  render(inputs: FocusInputs): void {
    const { state, map, grid, comparison, cellComparison } = inputs;
    this.lastInputs = inputs;
    const [h, w] = map.shape;
    this.scale = Math.max(1, Math.floor(Math.min(this.surface.width / w, this.surface.height / h)));

    let layer: PixelLayer;
    if (state.mode === "deviation" && map.deviation) {
      layer = deviationLayer(map, state.palette.divergingMax);
    } else if (state.mode === "comparison" && comparison) {
      layer = comparisonPointLayer(comparison, null);
    } else {
      layer = rawMapLayer(map, state.palette.range);
    }

    const cellLabels: Record<string, string> = {};
    let leafIds: string[] | null = null;
    if (grid && state.gridOverlay) {
      const assign = this.assignment(grid, map);
      const leaves = leafCells(grid.tree);
      leafIds = leaves.map((c) => c.id);
      const sectionSet = new Set<number>(
        state.mapSectionCells
          .map((cid) => leafIds!.indexOf(cid))
          .filter((k) => k >= 0),
      );
      let colors: (Rgb | null)[];
      let highlight: boolean[] | null = null;
      if (state.mode === "comparison" && cellComparison?.cells) {
        const byId = new Map(cellComparison.cells.map((c) => [c.cell_id, c]));
        const absMax =
          Math.max(
            ...cellComparison.cells.map((c) => Math.abs(c.diff ?? 0)),
            1e-12,
          );
        colors = leaves.map((leaf) => {
          const rec = byId.get(leaf.id);
          if (!rec || rec.diff === null) return null;
          cellLabels[leaf.id] = rec.diff.toFixed(2);
          return divergingRgb(normalizeSymmetric(rec.diff, absMax));
        });
        highlight = leaves.map((leaf) => byId.get(leaf.id)?.significant ?? false);
      } else {
        const range = state.palette.range ?? map.range ?? [0, 1];
        colors = leaves.map((leaf) => {
          const mean = leaf.summary?.mean;
          if (mean === null || mean === undefined) return null;
          cellLabels[leaf.id] = mean.toFixed(2);
          return sequentialRgb(normalize(mean, range[0], range[1]));
        });
      }
      layer = cellFillLayer(layer, assign, colors, sectionSet);
      drawCellBorders(layer, assign, highlight);
    }

    if (state.mode === "comparison" && comparison?.regions?.length) {
      drawRegionOutlines(layer, comparison.regions);
    }

    if (state.selection) {
      drawMaskHighlight(layer, this.selectionMask(state.selection, map, grid));
    }

    const scaled = upscale(layer, this.scale);
    this.surface.clear();
    this.surface.putImage(scaled.rgba, scaled.width, scaled.height);

    if (grid && state.gridOverlay) {
      for (const leaf of leafCells(grid.tree)) {
        const label = cellLabels[leaf.id];
        if (label === undefined) continue;
        const mid = 0.5 * (leaf.t0 + leaf.t1);
        const theta = -Math.PI / 4 + mid * 2 * Math.PI;
        const r = 0.5 * (leaf.r_inner + leaf.r_outer);
        const [ix, iy] = this.physToSurface(r * Math.cos(theta), r * Math.sin(theta), map);
        this.surface.text(ix, iy, label, "#222");
      }
    }

    if (state.hover) {
      const x = (state.hover.ix + 0.5) * this.scale;
      const y = (state.hover.iy + 0.5) * this.scale;
      const color = cssColor(HIGHLIGHT_RGB);
      this.surface.polyline([[x - 6, y], [x + 6, y]], color);
      this.surface.polyline([[x, y - 6], [x, y + 6]], color);
    }

    this.lastRender = {
      dataset: map.dataset,
      layer: map.layer,
      attribute: map.attribute,
      mode: state.mode,
      selection: state.selection,
      gridVersion: grid && state.gridOverlay ? grid.version : null,
      leafIds,
      cellLabels,
    };
  }

  private physToSurface(x: number, y: number, map: MapPayload): [number, number] {
    const d = map.domain;
    const xs = d.eye === "left" ? -x : x;
    const ix = (xs * 1000) / d.res_lateral_um + d.fovea_ix;
    const iy = (y * 1000) / d.res_bscan_um + d.fovea_iy;
    return [(ix + 0.5) * this.scale, (iy + 0.5) * this.scale];
  }

  private selectionMask(
    selection: NonNullable<Selection>,
    map: MapPayload,
    grid: GridPayload | null,
  ): Uint8Array {
    const [h, w] = map.shape;
    const mask = new Uint8Array(w * h);
    if (selection.kind === "cells") {
      if (!grid) return mask;
      const cells = grid.tree.cells.filter((c) => selection.cellIds.includes(c.id));
      for (let iy = 0; iy < h; iy++) {
        for (let ix = 0; ix < w; ix++) {
          const [x, y] = enfaceToPhysical(ix, iy, map.domain);
          if (cells.some((c) => cellContains(c, x, y))) mask[iy * w + ix] = 1;
        }
      }
    } else {
      for (let iy = 0; iy < h; iy++) {
        for (let ix = 0; ix < w; ix++) {
          const [x, y] = enfaceToPhysical(ix, iy, map.domain);
          if (pointInPolygon(x, y, selection.points)) mask[iy * w + ix] = 1;
        }
      }
    }
    return mask;
  }

  /** Surface pixel -> lattice point and containing leaf id, for interactions. */
  hitTest(px: number, py: number): { ix: number; iy: number; cellId: string | null } | null {
    const inputs = this.lastInputs;
    if (!inputs) return null;
    const ix = Math.floor(px / this.scale);
    const iy = Math.floor(py / this.scale);
    const [h, w] = inputs.map.shape;
    if (ix < 0 || ix >= w || iy < 0 || iy >= h) return null;
    let cellId: string | null = null;
    if (inputs.grid && inputs.state.gridOverlay) {
      const assign = this.assignment(inputs.grid, inputs.map);
      const k = assign[iy * w + ix];
      if (k >= 0) cellId = leafCells(inputs.grid.tree)[k].id;
    }
    return { ix, iy, cellId };
  }
}
