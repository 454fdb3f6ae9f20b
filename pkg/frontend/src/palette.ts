/**
 * Color ramps shared by every view.  Raw attribute values use a monotone
 * light-to-dark red ramp; deviations and group differences use a
 * blue-white-red ramp that is white exactly at zero.
 */

export type Rgb = [number, number, number];

export const INVALID_RGB: Rgb = [128, 128, 128];
export const UNTESTED_RGB: Rgb = [190, 190, 190];
export const GRID_LINE_RGB: Rgb = [70, 70, 70];
export const SIGNIFICANT_BORDER_RGB: Rgb = [255, 140, 0];
export const OUTLINE_RGB: Rgb = [0, 0, 0];
export const HIGHLIGHT_RGB: Rgb = [0, 200, 120];

const SEQ_STOPS = [0, 0.25, 0.5, 0.75, 1];
const SEQ_COLORS: Rgb[] = [
  [255, 245, 240],
  [252, 187, 161],
  [251, 106, 74],
  [203, 24, 29],
  [103, 0, 13],
];

const DIV_STOPS = [0, 0.25, 0.5, 0.75, 1];
const DIV_COLORS: Rgb[] = [
  [5, 48, 97],
  [107, 172, 208],
  [255, 255, 255],
  [214, 96, 77],
  [103, 0, 31],
];

function ramp(norm: number, stops: number[], colors: Rgb[]): Rgb {
  const t = Math.min(1, Math.max(0, norm));
  let k = 0;
  while (k < stops.length - 2 && t > stops[k + 1]) k++;
  const span = stops[k + 1] - stops[k];
  const f = span > 0 ? (t - stops[k]) / span : 0;
  const a = colors[k];
  const b = colors[k + 1];
  return [
    Math.round(a[0] + f * (b[0] - a[0])),
    Math.round(a[1] + f * (b[1] - a[1])),
    Math.round(a[2] + f * (b[2] - a[2])),
  ];
}

/** norm in [0, 1] -> light-to-dark red. */
export function sequentialRgb(norm: number): Rgb {
  return ramp(norm, SEQ_STOPS, SEQ_COLORS);
}

/** norm in [-1, 1], 0 -> white. */
export function divergingRgb(norm: number): Rgb {
  return ramp((norm + 1) / 2, DIV_STOPS, DIV_COLORS);
}

export function cssColor(rgb: Rgb): string {
  return `rgb(${rgb[0]},${rgb[1]},${rgb[2]})`;
}

/** Normalize a value into [0, 1] over a range, clamping. */
export function normalize(value: number, lo: number, hi: number): number {
  if (!(hi > lo)) return 0;
  return Math.min(1, Math.max(0, (value - lo) / (hi - lo)));
}

/** Normalize into [-1, 1] symmetric about zero for diverging maps. */
export function normalizeSymmetric(value: number, absMax: number): number {
  if (!(absMax > 0)) return 0;
  return Math.min(1, Math.max(-1, value / absMax));
}
