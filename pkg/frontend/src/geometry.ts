/**
 * En-face coordinate frame and grid-cell rasterization, mirroring the
 * service's conventions: physical mm relative to the fovea, left eyes
 * mirrored so +x is nasal, angular cell bounds as turn fractions from
 * the -45 degree diagonal.
 */

import type { DomainInfo, GridCellDoc, GridTree } from "./api.js";

const ANGLE_ORIGIN_TURN_OFFSET = 0; // turn fractions already encode the origin

export function enfaceToPhysical(
  ix: number,
  iy: number,
  domain: DomainInfo,
): [number, number] {
  let x = ((ix - domain.fovea_ix) * domain.res_lateral_um) / 1000;
  const y = ((iy - domain.fovea_iy) * domain.res_bscan_um) / 1000;
  if (domain.eye === "left") x = -x;
  return [x, y];
}

export function physicalToEnface(
  x: number,
  y: number,
  domain: DomainInfo,
): [number, number] {
  const xs = domain.eye === "left" ? -x : x;
  return [
    (xs * 1000) / domain.res_lateral_um + domain.fovea_ix,
    (y * 1000) / domain.res_bscan_um + domain.fovea_iy,
  ];
}

/** Angular position as a turn fraction in [0, 1) from the -45 deg diagonal. */
export function turnOf(x: number, y: number): number {
  let t = (Math.atan2(y, x) + Math.PI / 4) / (2 * Math.PI);
  if (t < 0) t += 1;
  if (t >= 1) t = 0;
  return t + ANGLE_ORIGIN_TURN_OFFSET;
}

export function cellContains(cell: GridCellDoc, x: number, y: number): boolean {
  const r = Math.hypot(x, y);
  if (!(r >= cell.r_inner && r < cell.r_outer)) return false;
  if (cell.t1 - cell.t0 >= 1) return true;
  const t = turnOf(x, y);
  return t >= cell.t0 && t < cell.t1;
}

export function leafCells(tree: GridTree): GridCellDoc[] {
  return tree.cells
    .filter((c) => c.children.length === 0)
    .sort((a, b) => (a.id < b.id ? -1 : a.id > b.id ? 1 : 0));
}

/**
 * Index of the containing leaf per lattice point (-1 outside all leaves),
 * indices into leafCells(tree) order.
 */
export function leafAssignment(tree: GridTree, domain: DomainInfo): Int32Array {
  const leaves = leafCells(tree);
  const out = new Int32Array(domain.n_bscans * domain.width).fill(-1);
  for (let iy = 0; iy < domain.n_bscans; iy++) {
    for (let ix = 0; ix < domain.width; ix++) {
      const [x, y] = enfaceToPhysical(ix, iy, domain);
      const r = Math.hypot(x, y);
      const t = turnOf(x, y);
      for (let k = 0; k < leaves.length; k++) {
        const c = leaves[k];
        if (r >= c.r_inner && r < c.r_outer && (c.t1 - c.t0 >= 1 || (t >= c.t0 && t < c.t1))) {
          out[iy * domain.width + ix] = k;
          break;
        }
      }
    }
  }
  return out;
}

/** Even-odd point-in-polygon test in mm coordinates. */
export function pointInPolygon(x: number, y: number, polygon: [number, number][]): boolean {
  let inside = false;
  const n = polygon.length;
  for (let i = 0; i < n; i++) {
    const [x0, y0] = polygon[i];
    const [x1, y1] = polygon[(i + 1) % n];
    if (y0 === y1) continue;
    if ((y0 <= y) !== (y1 <= y)) {
      const xAt = x0 + ((y - y0) * (x1 - x0)) / (y1 - y0);
      if (x < xAt) inside = !inside;
    }
  }
  return inside;
}
