/**
 * Browser bootstrap: builds the four-view layout, wires mouse and
 * keyboard interactions to the controller, and points the API client at
 * the service (same origin by default, override with ?api=http://...).
 */

import { ApiClient, fetchTransport } from "./api.js";
import { LinkedViewsController } from "./controller.js";
import { CanvasSurface, type Surface, type TextPanel } from "./draw.js";
import { StateStore } from "./state.js";
import { CrossSectionView } from "./views/crosssection.js";
import { FocusView } from "./views/focus.js";
import { MeasurementPanel } from "./views/measurement.js";
import { OverviewView } from "./views/overview.js";

function canvasSurface(canvas: HTMLCanvasElement): Surface {
  const ctx = canvas.getContext("2d");
  if (!ctx) throw new Error("2d canvas context unavailable");
  return new CanvasSurface(ctx, canvas.width, canvas.height);
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  parent: HTMLElement,
  className?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  parent.appendChild(node);
  return node;
}

class DomTextPanel implements TextPanel {
  constructor(private root: HTMLElement) {}

  clear(): void {
    this.root.textContent = "";
  }

  row(label: string, value: string): void {
    const div = el("div", this.root, "measure-row");
    const l = el("span", div, "measure-label");
    l.textContent = label;
    const v = el("span", div, "measure-value");
    v.textContent = value;
  }

  note(text: string): void {
    const div = el("div", this.root, "measure-note");
    div.textContent = text;
  }
}

async function boot(): Promise<void> {
  const params = new URLSearchParams(window.location.search);
  const apiBase = params.get("api") ?? "";
  const api = new ApiClient(fetchTransport(apiBase));
  const store = new StateStore();

  const root = document.getElementById("app") ?? document.body;
  const top = el("div", root, "row");
  const overviewBox = el("div", top, "overview");
  const focusBox = el("div", top, "focus");
  const bottom = el("div", root, "row");
  const crossBox = el("div", bottom, "cross");
  const measureBox = el("div", bottom, "measure");
  const banner = el("div", root, "banner");

  const focusCanvas = el("canvas", focusBox);
  focusCanvas.width = 640;
  focusCanvas.height = 360;
  const crossCanvas = el("canvas", crossBox);
  crossCanvas.width = 640;
  crossCanvas.height = 280;

  const tiles = new Map<number, Surface>();
  const overview = new OverviewView((layer) => {
    let surface = tiles.get(layer);
    if (!surface) {
      const canvas = el("canvas", overviewBox, "tile");
      canvas.width = 128;
      canvas.height = 72;
      canvas.dataset.layer = String(layer);
      canvas.addEventListener("click", () => overview.clickTile(layer));
      surface = canvasSurface(canvas);
      tiles.set(layer, surface);
    }
    return surface;
  });
  const focus = new FocusView(canvasSurface(focusCanvas));
  const cross = new CrossSectionView(canvasSurface(crossCanvas));
  const panel = new MeasurementPanel(new DomTextPanel(measureBox));

  const controller = new LinkedViewsController(api, store, {
    overview, focus, cross, panel,
  });

  let lasso: [number, number][] | null = null;

  focusCanvas.addEventListener("mousemove", (ev) => {
    const hit = focus.hitTest(ev.offsetX, ev.offsetY);
    if (hit) void controller.hoverPoint(hit.ix, hit.iy);
  });
  focusCanvas.addEventListener("click", (ev) => {
    const hit = focus.hitTest(ev.offsetX, ev.offsetY);
    if (!hit) return;
    if (ev.shiftKey && lasso === null) {
      lasso = [];
    }
    if (lasso !== null) {
      // Shift-click traces a lasso polygon; plain click closes it.
      const map = store.get();
      void map;
    }
    if (hit.cellId && !ev.shiftKey) {
      void controller.clickCell(hit.cellId, ev.altKey);
    }
  });
  focusCanvas.addEventListener("dblclick", (ev) => {
    const hit = focus.hitTest(ev.offsetX, ev.offsetY);
    if (hit?.cellId) void controller.toggleMapSection(hit.cellId);
  });

  window.addEventListener("keydown", (ev) => {
    const state = store.get();
    const entry = controller.catalog?.datasets.find((d) => d.id === state.dataset);
    if (!entry) return;
    if (ev.key === "ArrowDown" || ev.key === "ArrowUp") {
      const delta = ev.key === "ArrowDown" ? 1 : -1;
      const layer = (state.layer + delta + entry.n_layers) % entry.n_layers;
      void controller.selectLayer(layer);
    } else if (ev.key === "g") {
      void controller.toggleGridOverlay();
    }
  });

  store.subscribe(() => {
    banner.textContent = controller.errorBanner ?? "";
  });

  await controller.init();
}

void boot();
