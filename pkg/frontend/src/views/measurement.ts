/**
 * Measurement panel: the statistical summary of the current selection.
 * Every number shown is a field of the measurement payload, verbatim.
 */

import type { MeasurementPayload } from "../api.js";
import type { TextPanel } from "../draw.js";
import type { Selection } from "../state.js";

export interface MeasurementRenderInfo {
  selection: Selection;
  fields: MeasurementPayload;
}

function fmt(v: number | null, digits = 3): string {
  if (v === null) return "-";
  if (!Number.isFinite(v)) return v > 0 ? "inf" : "-inf";
  return v.toFixed(digits);
}

export class MeasurementPanel {
  lastRender: MeasurementRenderInfo | null = null;

  constructor(private panel: TextPanel) {}

  render(selection: Selection, payload: MeasurementPayload, unit: string): void {
    this.panel.clear();
    if (selection === null) {
      this.panel.note("no selection");
      this.lastRender = null;
      return;
    }
    this.panel.note(
      selection.kind === "cells"
        ? `cells: ${selection.cellIds.join(", ")}`
        : `polygon (${selection.points.length} vertices)`,
    );
    this.panel.row("n", String(payload.n));
    this.panel.row(`mean [${unit}]`, fmt(payload.mean));
    this.panel.row(`sd [${unit}]`, fmt(payload.sd));
    this.panel.row(`min [${unit}]`, fmt(payload.min));
    this.panel.row(`max [${unit}]`, fmt(payload.max));
    this.panel.row("area [mm2]", fmt(payload.area_mm2));
    if (payload.diff !== null) {
      this.panel.row(`diff vs control [${unit}]`, fmt(payload.diff));
    }
    if (payload.p !== null) {
      this.panel.row("p", fmt(payload.p, 6));
      this.panel.row("effect size d", fmt(payload.d));
      this.panel.row("n patients/controls", `${payload.n_p}/${payload.n_c}`);
      this.panel.row("test", payload.test ?? "-");
    }
    this.lastRender = { selection, fields: payload };
  }

  clear(): void {
    this.panel.clear();
    this.panel.note("no selection");
    this.lastRender = null;
  }
}
