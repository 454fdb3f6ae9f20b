/**
 * Overview: small multiples of every layer's attribute map for the
 * selected dataset, with the selected layer framed.  Clicking a tile
 * selects that layer everywhere.
 */

import type { MapPayload } from "../api.js";
import type { Surface } from "../draw.js";
import type { ViewState } from "../state.js";
import { rawMapLayer, upscale } from "./maplayer.js";

export interface OverviewRenderInfo {
  dataset: string;
  attribute: string;
  layers: number[];
  selectedLayer: number;
}

export class OverviewView {
  lastRender: OverviewRenderInfo | null = null;
  onSelectLayer: ((layer: number) => void) | null = null;

  constructor(private tileSurface: (layer: number) => Surface) {}

  render(state: ViewState, maps: MapPayload[]): void {
    const layers: number[] = [];
    for (const map of maps) {
      const surface = this.tileSurface(map.layer);
      const [h, w] = map.shape;
      const scale = Math.max(1, Math.floor(Math.min(surface.width / w, surface.height / h)));
      const layer = upscale(rawMapLayer(map, state.palette.range), scale);
      surface.clear();
      surface.putImage(layer.rgba, layer.width, layer.height);
      if (map.layer === state.layer) {
        surface.strokeRect(0, 0, layer.width, layer.height, "#10c878");
      }
      layers.push(map.layer);
    }
    this.lastRender = {
      dataset: maps[0]?.dataset ?? "",
      attribute: maps[0]?.attribute ?? state.attribute,
      layers,
      selectedLayer: state.layer,
    };
  }

  clickTile(layer: number): void {
    this.onSelectLayer?.(layer);
  }
}
