/**
 * Cross-sectional view: the B-scan image (when a volume is present) with
 * all boundary polylines, and the attribute profile of the selected layer
 * as a line chart underneath.  A marker tracks the hovered A-scan.
 */

import type { BscanPayload } from "../api.js";
import { decodeArray } from "../api.js";
import type { Surface } from "../draw.js";
import { cssColor, HIGHLIGHT_RGB } from "../palette.js";

export interface CrossSectionRenderInfo {
  dataset: string;
  layer: number;
  attribute: string;
  iy: number;
  markerIx: number | null;
  profile: (number | null)[];
  boundaryCount: number;
}

const CHART_FRACTION = 0.4;

export class CrossSectionView {
  lastRender: CrossSectionRenderInfo | null = null;

  constructor(private surface: Surface) {}

  render(payload: BscanPayload, markerIx: number | null): void {
    this.surface.clear();
    const w = this.surface.width;
    const imageH = Math.floor(this.surface.height * (1 - CHART_FRACTION));
    const chartTop = imageH + 4;
    const chartH = this.surface.height - chartTop;
    const sx = w / payload.width;

    if (payload.intensity) {
      const raw = decodeArray(payload.intensity) as Uint8Array;
      const rows = payload.intensity.shape[0];
      const cols = payload.intensity.shape[1];
      const rgba = new Uint8ClampedArray(w * imageH * 4);
      for (let y = 0; y < imageH; y++) {
        const srcY = Math.min(rows - 1, Math.floor((y / imageH) * rows));
        for (let x = 0; x < w; x++) {
          const srcX = Math.min(cols - 1, Math.floor((x / w) * cols));
          const v = raw[srcY * cols + srcX];
          const o = 4 * (y * w + x);
          rgba[o] = rgba[o + 1] = rgba[o + 2] = v;
          rgba[o + 3] = 255;
        }
      }
      this.surface.putImage(rgba, w, imageH);
    } else {
      this.surface.fillRect(0, 0, w, imageH, "#1a1a1a");
    }

    const sy = imageH / payload.bscan_height;
    for (const boundary of payload.boundaries) {
      const pts: [number, number][] = [];
      for (let ix = 0; ix < boundary.length; ix++) {
        const v = boundary[ix];
        if (v === null) continue;
        pts.push([(ix + 0.5) * sx, v * sy]);
      }
      this.surface.polyline(pts, "#ffd34d");
    }

    const finite = payload.profile.filter((v): v is number => v !== null);
    const lo = finite.length ? Math.min(...finite) : 0;
    const hi = finite.length ? Math.max(...finite) : 1;
    const span = hi > lo ? hi - lo : 1;
    const chart: [number, number][] = [];
    for (let ix = 0; ix < payload.profile.length; ix++) {
      const v = payload.profile[ix];
      if (v === null) continue;
      chart.push([
        (ix + 0.5) * sx,
        chartTop + chartH - ((v - lo) / span) * (chartH - 2) - 1,
      ]);
    }
    this.surface.polyline(chart, "#c22");
    this.surface.text(2, chartTop + 10, `${payload.attribute} [${payload.unit}]`, "#666");

    if (markerIx !== null) {
      const x = (markerIx + 0.5) * sx;
      this.surface.polyline(
        [[x, 0], [x, this.surface.height]],
        cssColor(HIGHLIGHT_RGB),
      );
    }

    this.lastRender = {
      dataset: payload.dataset,
      layer: payload.layer,
      attribute: payload.attribute,
      iy: payload.iy,
      markerIx,
      profile: payload.profile,
      boundaryCount: payload.boundaries.length,
    };
  }
}
