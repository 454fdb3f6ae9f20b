/**
 * Wires the state store, the API client, and the four linked views.
 *
 * All data flows one way: interactions update the state, the controller
 * fetches whatever payloads the new state needs (dropping stale responses
 * via per-request tokens), and every view re-renders from the same state
 * tuple plus those payloads.  On an edit conflict (409) the grid state is
 * refreshed to the server's truth.
 */

import {
  ApiClient,
  ApiError,
  type Catalog,
  type ComparisonPayload,
  type DatasetEntry,
  type GridPayload,
  type MapPayload,
} from "./api.js";
import { StateStore, type Selection, type ViewState } from "./state.js";
import type { CrossSectionView } from "./views/crosssection.js";
import type { FocusView } from "./views/focus.js";
import type { MeasurementPanel } from "./views/measurement.js";
import type { OverviewView } from "./views/overview.js";

export interface ControllerViews {
  overview: OverviewView;
  focus: FocusView;
  cross: CrossSectionView;
  panel: MeasurementPanel;
}

export interface ControllerOptions {
  sdThreshold: number;
  maxDepth: number;
}

export class LinkedViewsController {
  catalog: Catalog | null = null;
  session: string | null = null;
  grid: GridPayload | null = null;
  comparison: ComparisonPayload | null = null;
  cellComparison: ComparisonPayload | null = null;
  /** transient view-level error banner text, cleared by the next success */
  errorBanner: string | null = null;

  private mapCache = new Map<string, MapPayload>();
  private tokens = { bscan: 0, measure: 0, compare: 0, refresh: 0 };

  constructor(
    private api: ApiClient,
    public store: StateStore,
    private views: ControllerViews,
    private options: ControllerOptions = { sdThreshold: 8, maxDepth: 4 },
  ) {
    views.overview.onSelectLayer = (layer) => void this.selectLayer(layer);
  }

  private dataset(): DatasetEntry {
    const state = this.store.get();
    const entry = this.catalog?.datasets.find((d) => d.id === state.dataset);
    if (!entry) throw new Error("no dataset selected");
    return entry;
  }

  async init(datasetId?: string): Promise<void> {
    this.catalog = await this.api.catalog();
    const entry = datasetId
      ? this.catalog.datasets.find((d) => d.id === datasetId)
      : this.catalog.datasets[0];
    if (!entry) throw new Error("catalog is empty");
    this.session = (await this.api.createSession()).session_id;
    this.store.setDomain({ width: entry.shape[1], n_bscans: entry.shape[0] });
    this.store.update({ dataset: entry.id });
    await this.refreshViews();
  }

  private mapKey(state: ViewState, layer: number): string {
    const dev = state.mode === "deviation" ? state.controlGroup ?? "" : "";
    return `${state.dataset}:${layer}:${state.attribute}:${dev}`;
  }

  private async fetchMap(state: ViewState, layer: number): Promise<MapPayload> {
    const key = this.mapKey(state, layer);
    const cached = this.mapCache.get(key);
    if (cached) return cached;
    const deviation =
      state.mode === "deviation" && state.controlGroup ? state.controlGroup : undefined;
    const payload = await this.api.map(state.dataset!, layer, state.attribute, deviation);
    this.mapCache.set(key, payload);
    return payload;
  }

  /** Re-render every view from the current state. */
  async refreshViews(): Promise<void> {
    const token = ++this.tokens.refresh;
    const state = this.store.get();
    if (!state.dataset) return;
    const entry = this.dataset();

    const focusMap = await this.fetchMap(state, state.layer);
    const overviewMaps: MapPayload[] = [];
    for (let layer = 0; layer < entry.n_layers; layer++) {
      overviewMaps.push(await this.fetchMap(state, layer));
    }
    if (token !== this.tokens.refresh) return; // superseded

    this.views.overview.render(state, overviewMaps);
    this.views.focus.render({
      state,
      map: focusMap,
      grid: this.grid,
      comparison: this.comparison,
      cellComparison: this.cellComparison,
    });
    await this.renderCross(state, focusMap);
  }

  private async renderCross(state: ViewState, map: MapPayload): Promise<void> {
    const iy = state.hover ? state.hover.iy : Math.round(map.domain.fovea_iy);
    const token = ++this.tokens.bscan;
    const payload = await this.api.bscan(state.dataset!, iy, state.layer, state.attribute);
    if (token !== this.tokens.bscan) return; // a newer hover superseded this
    this.views.cross.render(payload, state.hover ? state.hover.ix : null);
  }

  async selectDataset(id: string): Promise<void> {
    const entry = this.catalog?.datasets.find((d) => d.id === id);
    if (!entry) throw new Error(`unknown dataset ${id}`);
    this.store.setDomain({ width: entry.shape[1], n_bscans: entry.shape[0] });
    this.grid = null;
    this.comparison = null;
    this.cellComparison = null;
    this.store.update({ dataset: id, gridOverlay: false });
    this.views.panel.clear();
    await this.refreshViews();
  }

  async selectLayer(layer: number): Promise<void> {
    this.grid = null;
    this.comparison = null;
    this.cellComparison = null;
    this.store.update({ layer, gridOverlay: false });
    this.views.panel.clear();
    await this.refreshWithComparison();
  }

  async selectAttribute(attribute: string): Promise<void> {
    this.grid = null;
    this.comparison = null;
    this.cellComparison = null;
    this.store.update({ attribute, gridOverlay: false });
    this.views.panel.clear();
    await this.refreshWithComparison();
  }

  async setMode(
    mode: "raw" | "deviation" | "comparison",
    groups?: { patients: string; controls: string },
  ): Promise<void> {
    this.store.update({
      mode,
      patientGroup: groups?.patients ?? this.store.get().patientGroup,
      controlGroup: groups?.controls ?? this.store.get().controlGroup,
    });
    await this.refreshWithComparison();
  }

  private async refreshWithComparison(): Promise<void> {
    const state = this.store.get();
    if (state.mode === "comparison" && state.patientGroup && state.controlGroup) {
      const token = ++this.tokens.compare;
      const point = await this.api.compare({
        patients: state.patientGroup,
        controls: state.controlGroup,
        layer: state.layer,
        attribute: state.attribute,
        mode: "point",
      });
      let cells: ComparisonPayload | null = null;
      if (state.gridOverlay) {
        // Per-cell results on the session's (possibly edited) grid.
        cells = await this.api.compare({
          patients: state.patientGroup,
          controls: state.controlGroup,
          layer: state.layer,
          attribute: state.attribute,
          mode: "grid",
          ...(this.grid && this.session
            ? { session: this.session, grid_id: this.grid.grid_id }
            : {}),
        });
      }
      if (token !== this.tokens.compare) return;
      this.comparison = point;
      this.cellComparison = cells;
    } else {
      this.comparison = null;
      this.cellComparison = null;
    }
    await this.refreshViews();
  }

  async hoverPoint(ix: number, iy: number): Promise<void> {
    this.store.update({ hover: { ix, iy } });
    const state = this.store.get();
    const focusMap = await this.fetchMap(state, state.layer);
    this.views.focus.render({
      state,
      map: focusMap,
      grid: this.grid,
      comparison: this.comparison,
      cellComparison: this.cellComparison,
    });
    await this.renderCross(state, focusMap);
  }

  async toggleGridOverlay(): Promise<void> {
    const state = this.store.get();
    if (!state.gridOverlay) {
      if (!this.grid) {
        this.grid = await this.api.fitGrid(this.session!, {
          dataset: state.dataset!,
          layer: state.layer,
          attribute: state.attribute,
          sd_threshold: this.options.sdThreshold,
          max_depth: this.options.maxDepth,
        });
      }
      this.store.update({ gridOverlay: true, gridId: this.grid.grid_id });
    } else {
      this.store.update({ gridOverlay: false });
    }
    await this.refreshWithComparison();
  }

  /** Click = split, modifier-click = merge (of the cell's parent subtree). */
  async clickCell(cellId: string, modifier = false): Promise<void> {
    if (!this.grid || !this.session) return;
    this.errorBanner = null;
    try {
      if (modifier) {
        const parent = cellId.includes("/")
          ? cellId.slice(0, cellId.lastIndexOf("/"))
          : cellId;
        this.grid = await this.api.mergeCell(
          this.session, this.grid.grid_id, parent, this.grid.version,
        );
      } else {
        this.grid = await this.api.splitCell(
          this.session, this.grid.grid_id, cellId, this.grid.version,
        );
      }
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        // Conflict: somebody else edited; refresh to the server's truth.
        this.errorBanner = err.body.message;
        const grids = await this.api.listGrids(this.session);
        const mine = grids.grids.find((g) => g.grid_id === this.grid!.grid_id);
        if (mine) this.grid = mine;
      } else {
        throw err;
      }
    }
    await this.refreshViews();
  }

  toggleMapSection(cellId: string): Promise<void> {
    const state = this.store.get();
    const cells = state.mapSectionCells.includes(cellId)
      ? state.mapSectionCells.filter((c) => c !== cellId)
      : [...state.mapSectionCells, cellId];
    this.store.update({ mapSectionCells: cells });
    return this.refreshViews();
  }

  async selectCells(cellIds: string[]): Promise<void> {
    if (!this.grid) throw new Error("cell selection needs the grid overlay");
    const selection: Selection = {
      kind: "cells",
      gridId: this.grid.grid_id,
      cellIds,
    };
    this.store.update({ selection });
    await this.measureSelection();
  }

  async lassoSelect(points: [number, number][]): Promise<void> {
    const selection: Selection = { kind: "polygon", points };
    this.store.update({ selection });
    await this.measureSelection();
  }

  private async measureSelection(): Promise<void> {
    const state = this.store.get();
    if (!state.selection || !this.session) return;
    const token = ++this.tokens.measure;
    const selection =
      state.selection.kind === "cells"
        ? { grid_id: state.selection.gridId, cells: state.selection.cellIds }
        : { polygon: state.selection.points };
    const body =
      state.mode === "comparison" && state.patientGroup && state.controlGroup
        ? {
            layer: state.layer,
            attribute: state.attribute,
            patients: state.patientGroup,
            controls: state.controlGroup,
            selection,
          }
        : {
            layer: state.layer,
            attribute: state.attribute,
            dataset: state.dataset!,
            selection,
          };
    const payload = await this.api.measure(this.session, body);
    if (token !== this.tokens.measure) return;
    const map = await this.fetchMap(state, state.layer);
    this.views.panel.render(state.selection, payload, map.unit);
    await this.refreshViews(); // highlight the selection in every view
  }
}
