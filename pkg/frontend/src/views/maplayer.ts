/**
 * Pure pixel-layer builders shared by the overview and focus views.
 * Everything returns RGBA buffers; views blit them onto their surfaces.
 */

import type { ComparisonPayload, MapPayload, RegionDoc } from "../api.js";
import { decodeArray } from "../api.js";
import {
  GRID_LINE_RGB,
  HIGHLIGHT_RGB,
  INVALID_RGB,
  OUTLINE_RGB,
  SIGNIFICANT_BORDER_RGB,
  UNTESTED_RGB,
  divergingRgb,
  normalize,
  normalizeSymmetric,
  sequentialRgb,
  type Rgb,
} from "../palette.js";

export interface PixelLayer {
  rgba: Uint8ClampedArray;
  width: number;
  height: number;
}

function blank(width: number, height: number): PixelLayer {
  const rgba = new Uint8ClampedArray(width * height * 4);
  return { rgba, width, height };
}

function setPx(layer: PixelLayer, i: number, rgb: Rgb): void {
  layer.rgba[4 * i] = rgb[0];
  layer.rgba[4 * i + 1] = rgb[1];
  layer.rgba[4 * i + 2] = rgb[2];
  layer.rgba[4 * i + 3] = 255;
}

/** Raw attribute values on the sequential ramp; invalid points gray. */
export function rawMapLayer(
  payload: MapPayload,
  range: [number, number] | null,
): PixelLayer {
  const [h, w] = payload.shape;
  const values = decodeArray(payload.values) as Float32Array;
  const valid = decodeArray(payload.valid) as Uint8Array;
  const [lo, hi] = range ?? payload.range ?? [0, 1];
  const layer = blank(w, h);
  for (let i = 0; i < w * h; i++) {
    setPx(layer, i, valid[i] ? sequentialRgb(normalize(values[i], lo, hi)) : INVALID_RGB);
  }
  return layer;
}

/** Deviation z-scores on the zero-centered diverging ramp. */
export function deviationLayer(payload: MapPayload, divergingMax: number): PixelLayer {
  if (!payload.deviation) throw new Error("map payload has no deviation block");
  const [h, w] = payload.shape;
  const z = decodeArray(payload.deviation.z) as Float32Array;
  const layer = blank(w, h);
  for (let i = 0; i < w * h; i++) {
    const v = z[i];
    if (Number.isNaN(v)) {
      setPx(layer, i, INVALID_RGB);
    } else {
      const clamped = Number.isFinite(v) ? v : Math.sign(v) * divergingMax;
      setPx(layer, i, divergingRgb(normalizeSymmetric(clamped, divergingMax)));
    }
  }
  return layer;
}

/** Point-wise group differences; untested points light gray. */
export function comparisonPointLayer(cmp: ComparisonPayload, divergingMax: number | null): PixelLayer {
  if (cmp.mode !== "point" || !cmp.shape || !cmp.diff || !cmp.tested) {
    throw new Error("not a point-wise comparison payload");
  }
  const [h, w] = cmp.shape;
  const diff = decodeArray(cmp.diff) as Float32Array;
  const tested = decodeArray(cmp.tested) as Uint8Array;
  let absMax = divergingMax ?? 0;
  if (!absMax) {
    const range = cmp.diff_range;
    absMax = range ? Math.max(Math.abs(range[0]), Math.abs(range[1])) : 1;
  }
  const layer = blank(w, h);
  for (let i = 0; i < w * h; i++) {
    if (!tested[i] || Number.isNaN(diff[i])) {
      setPx(layer, i, UNTESTED_RGB);
    } else {
      setPx(layer, i, divergingRgb(normalizeSymmetric(diff[i], absMax)));
    }
  }
  return layer;
}

/**
 * Fill each grid cell with a constant color (cell mean on the sequential
 * ramp, or cell diff on the diverging ramp), except cells whose fill is
 * replaced by the underlying map pixels.
 */
export function cellFillLayer(
  base: PixelLayer,
  assign: Int32Array,
  cellColors: (Rgb | null)[],
  mapSectionLeafIndices: Set<number>,
): PixelLayer {
  const out: PixelLayer = {
    rgba: new Uint8ClampedArray(base.rgba),
    width: base.width,
    height: base.height,
  };
  for (let i = 0; i < assign.length; i++) {
    const leaf = assign[i];
    if (leaf < 0 || mapSectionLeafIndices.has(leaf)) continue;
    const color = cellColors[leaf];
    if (color) setPx(out, i, color);
  }
  return out;
}

/** Draw leaf borders; leaves flagged in `highlight` get orange borders. */
export function drawCellBorders(
  layer: PixelLayer,
  assign: Int32Array,
  highlight: boolean[] | null,
): void {
  const { width, height } = layer;
  for (let iy = 0; iy < height; iy++) {
    for (let ix = 0; ix < width; ix++) {
      const i = iy * width + ix;
      const a = assign[i];
      if (a < 0) continue;
      const right = ix + 1 < width ? assign[i + 1] : a;
      const down = iy + 1 < height ? assign[i + width] : a;
      if (right !== a || down !== a) {
        const neighbors = [a, right, down];
        const hot = highlight && neighbors.some((k) => k >= 0 && highlight[k]);
        setPx(layer, i, hot ? SIGNIFICANT_BORDER_RGB : GRID_LINE_RGB);
      }
    }
  }
}

/** Black outlines around significant regions (points with an outside 4-neighbor). */
export function drawRegionOutlines(layer: PixelLayer, regions: RegionDoc[]): void {
  const { width, height } = layer;
  const member = new Uint8Array(width * height);
  for (const region of regions) {
    const pts = decodeArray(region.points) as Int32Array;
    for (let k = 0; k < pts.length; k += 2) {
      member[pts[k] * width + pts[k + 1]] = 1;
    }
  }
  for (let iy = 0; iy < height; iy++) {
    for (let ix = 0; ix < width; ix++) {
      const i = iy * width + ix;
      if (!member[i]) continue;
      const edge =
        iy === 0 || iy === height - 1 || ix === 0 || ix === width - 1 ||
        !member[i - 1] || !member[i + 1] || !member[i - width] || !member[i + width];
      if (edge) setPx(layer, i, OUTLINE_RGB);
    }
  }
}

/** Tint the border of selected lattice points (selection highlight). */
export function drawMaskHighlight(layer: PixelLayer, mask: Uint8Array): void {
  const { width, height } = layer;
  for (let iy = 0; iy < height; iy++) {
    for (let ix = 0; ix < width; ix++) {
      const i = iy * width + ix;
      if (!mask[i]) continue;
      const edge =
        iy === 0 || iy === height - 1 || ix === 0 || ix === width - 1 ||
        !mask[i - 1] || !mask[i + 1] || !mask[i - width] || !mask[i + width];
      if (edge) setPx(layer, i, HIGHLIGHT_RGB);
    }
  }
}

/** Integer-upscale a pixel layer for display. */
export function upscale(layer: PixelLayer, scale: number): PixelLayer {
  if (scale === 1) return layer;
  const w = layer.width * scale;
  const h = layer.height * scale;
  const out = blank(w, h);
  for (let iy = 0; iy < h; iy++) {
    const sy = (iy / scale) | 0;
    for (let ix = 0; ix < w; ix++) {
      const sx = (ix / scale) | 0;
      const src = 4 * (sy * layer.width + sx);
      const dst = 4 * (iy * w + ix);
      out.rgba[dst] = layer.rgba[src];
      out.rgba[dst + 1] = layer.rgba[src + 1];
      out.rgba[dst + 2] = layer.rgba[src + 2];
      out.rgba[dst + 3] = layer.rgba[src + 3];
    }
  }
  return out;
}
