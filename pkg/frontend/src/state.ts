/**
 * Central view state.  Every view renders from this one state tuple, so
 * the linked views can never disagree about what is selected.
 *
 * Invariants enforced on every update:
 *   - exactly one selected layer and attribute at a time;
 *   - the hover cursor lies inside the map domain or is absent;
 *   - the selection is cell ids xor a polygon, never both.
 *
 * Each accepted update bumps a generation counter; responses of stale
 * async requests are dropped by comparing generations.
 */

export type DisplayMode = "raw" | "deviation" | "comparison";

export interface HoverCursor {
  ix: number;
  iy: number;
}

export type Selection =
  | { kind: "cells"; gridId: string; cellIds: string[] }
  | { kind: "polygon"; points: [number, number][] }
  | null;

export interface PaletteConfig {
  /** explicit value range for the raw palette; null = payload range */
  range: [number, number] | null;
  /** symmetric half-range for diverging palettes */
  divergingMax: number;
}

export interface ViewState {
  dataset: string | null;
  patientGroup: string | null;
  controlGroup: string | null;
  layer: number;
  attribute: string;
  mode: DisplayMode;
  gridId: string | null;
  gridOverlay: boolean;
  /** cells whose fill is replaced by the underlying map pixels */
  mapSectionCells: string[];
  hover: HoverCursor | null;
  selection: Selection;
  palette: PaletteConfig;
  generation: number;
}

export function initialState(): ViewState {
  return {
    dataset: null,
    patientGroup: null,
    controlGroup: null,
    layer: 0,
    attribute: "thickness",
    mode: "raw",
    gridId: null,
    gridOverlay: false,
    mapSectionCells: [],
    hover: null,
    selection: null,
    palette: { range: null, divergingMax: 4 },
    generation: 0,
  };
}

export type Listener = (state: ViewState) => void;

export class StateStore {
  private state: ViewState = initialState();
  private listeners: Listener[] = [];
  private domain: { width: number; n_bscans: number } | null = null;

  get(): ViewState {
    return this.state;
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  /** The domain used to validate hover cursors. */
  setDomain(domain: { width: number; n_bscans: number } | null): void {
    this.domain = domain;
  }

  update(patch: Partial<ViewState>): ViewState {
    const next: ViewState = { ...this.state, ...patch };
    this.validate(next, patch);
    next.generation = this.state.generation + 1;
    this.state = next;
    for (const l of this.listeners) l(next);
    return next;
  }

  private validate(next: ViewState, patch: Partial<ViewState>): void {
    if (!Number.isInteger(next.layer) || next.layer < 0) {
      throw new Error(`invalid layer ${next.layer}`);
    }
    if (!next.attribute) {
      throw new Error("an attribute must be selected");
    }
    if (next.hover !== null && this.domain !== null) {
      const { ix, iy } = next.hover;
      if (ix < 0 || ix >= this.domain.width || iy < 0 || iy >= this.domain.n_bscans) {
        throw new Error(`hover (${ix}, ${iy}) outside the domain`);
      }
    }
    if (next.selection !== null) {
      const sel = next.selection;
      if (sel.kind === "cells" && sel.cellIds.length === 0) {
        throw new Error("cell selection must name at least one cell");
      }
      if (sel.kind === "polygon" && sel.points.length < 3) {
        throw new Error("polygon selection needs at least 3 vertices");
      }
    }
    // Switching dataset/layer/attribute invalidates hover and selection
    // unless the caller supplied replacements in the same update.
    const contextChanged =
      (patch.dataset !== undefined && patch.dataset !== this.state.dataset) ||
      (patch.layer !== undefined && patch.layer !== this.state.layer) ||
      (patch.attribute !== undefined && patch.attribute !== this.state.attribute);
    if (contextChanged) {
      if (patch.selection === undefined) next.selection = null;
      if (patch.hover === undefined) next.hover = null;
      if (patch.gridId === undefined) next.gridId = null;
      if (patch.mapSectionCells === undefined) next.mapSectionCells = [];
    }
  }
}
