/**
 * Typed client for the analytics service.
 *
 * The transport is injectable so tests can drive the client against
 * recorded payloads; the browser entry point passes a fetch wrapper.
 * Numeric fields displayed anywhere in the viewer come straight from
 * these payloads -- the client never derives statistics of its own.
 */

export interface EncodedArray {
  dtype: string;
  shape: number[];
  data_b64: string;
}

export interface DomainInfo {
  width: number;
  n_bscans: number;
  res_lateral_um: number;
  res_bscan_um: number;
  fovea_ix: number;
  fovea_iy: number;
  eye: string;
}

export interface DatasetEntry {
  id: string;
  eye: string;
  group_label: string | null;
  shape: [number, number];
  n_layers: number;
  layers: string[];
  has_volume: boolean;
  warnings: string[];
}

export interface Catalog {
  datasets: DatasetEntry[];
  groups: string[];
  attributes: string[];
}

export interface DeviationPayload {
  model: string;
  unit: string;
  z: EncodedArray;
  flags: EncodedArray;
  percentiles: number[];
}

export interface MapPayload {
  dataset: string;
  layer: number;
  attribute: string;
  unit: string;
  shape: [number, number];
  domain: DomainInfo;
  values: EncodedArray;
  valid: EncodedArray;
  range: [number, number] | null;
  deviation?: DeviationPayload;
}

export interface BscanPayload {
  dataset: string;
  iy: number;
  width: number;
  bscan_height: number;
  boundaries: (number | null)[][];
  layer: number;
  attribute: string;
  unit: string;
  profile: (number | null)[];
  intensity: EncodedArray | null;
}

export interface CellSummaryDoc {
  n_valid: number;
  mean: number | null;
  sd: number | null;
  min: number | null;
  max: number | null;
  coverage: number;
  reliable: boolean;
  cross_subject_sd?: number | null;
}

export interface GridCellDoc {
  id: string;
  r_inner: number;
  r_outer: number;
  t0: number;
  t1: number;
  theta_start: number;
  theta_end: number;
  depth: number;
  children: string[];
  summary: CellSummaryDoc | null;
}

export interface GridTree {
  layout: { diameters: number[] };
  provenance: string[];
  cells: GridCellDoc[];
}

export interface GridPayload {
  grid_id: string;
  version: number;
  dataset: string;
  layer: number;
  attribute: string;
  tree: GridTree;
  leaf_ids: string[];
}

export interface CellComparisonDoc {
  cell_id: string;
  n_p: number;
  n_c: number;
  mean_p: number | null;
  mean_c: number | null;
  diff: number | null;
  p: number | null;
  d: number | null;
  significant: boolean;
  tested: boolean;
}

export interface RegionDoc {
  id: number;
  points: EncodedArray;
  n_points: number;
  area_mm2: number;
  centroid_mm: [number, number];
  mean_diff: number;
  min_p: number;
  outlines: [number, number][][];
}

export interface ComparisonPayload {
  mode: "point" | "cell";
  config: { test: string; alpha: number; correction: string; min_group: number };
  domain: DomainInfo;
  shape?: [number, number];
  diff?: EncodedArray;
  p?: EncodedArray;
  d?: EncodedArray;
  significant?: EncodedArray;
  tested?: EncodedArray;
  diff_range?: [number, number] | null;
  regions?: RegionDoc[];
  cells?: CellComparisonDoc[];
  grid?: GridTree | null;
  n_significant: number;
}

export interface MeasurementPayload {
  n: number;
  mean: number | null;
  sd: number | null;
  min: number | null;
  max: number | null;
  area_mm2: number;
  diff: number | null;
  p: number | null;
  d: number | null;
  n_p: number | null;
  n_c: number | null;
  test: string | null;
}

export interface ApiErrorBody {
  code: string;
  message: string;
  detail: unknown;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public body: ApiErrorBody,
  ) {
    super(body.message);
  }
}

export interface TransportResponse {
  status: number;
  body: unknown;
}

export type Transport = (
  method: string,
  path: string,
  body?: unknown,
) => Promise<TransportResponse>;

/** Transport over the browser fetch API. */
export function fetchTransport(baseUrl: string): Transport {
  return async (method, path, body) => {
    const resp = await fetch(baseUrl + path, {
      method,
      headers: body === undefined ? {} : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    return { status: resp.status, body: await resp.json() };
  };
}

function decodeBase64(data: string): Uint8Array {
  const binary = atob(data);
  const out = new Uint8Array(binary.length);
  for (let i = 0; i < binary.length; i++) out[i] = binary.charCodeAt(i);
  return out;
}

/** Decode a base64 binary array payload into a typed array (little-endian). */
export function decodeArray(doc: EncodedArray): Float32Array | Float64Array | Int8Array | Uint8Array | Int32Array {
  const bytes = decodeBase64(doc.data_b64);
  const buffer = bytes.buffer.slice(bytes.byteOffset, bytes.byteOffset + bytes.byteLength);
  switch (doc.dtype) {
    case "<f4":
      return new Float32Array(buffer);
    case "<f8":
      return new Float64Array(buffer);
    case "|i1":
      return new Int8Array(buffer);
    case "|u1":
      return new Uint8Array(buffer);
    case "<i4":
      return new Int32Array(buffer);
    default:
      throw new Error(`unsupported dtype ${doc.dtype}`);
  }
}

export class ApiClient {
  constructor(private transport: Transport) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const resp = await this.transport(method, path, body);
    if (resp.status >= 400) {
      throw new ApiError(resp.status, resp.body as ApiErrorBody);
    }
    return resp.body as T;
  }

  catalog(): Promise<Catalog> {
    return this.request("GET", "/catalog");
  }

  map(dataset: string, layer: number, attribute: string, deviation?: string): Promise<MapPayload> {
    const query = deviation ? `?deviation=${encodeURIComponent(deviation)}` : "";
    return this.request(
      "GET",
      `/datasets/${dataset}/layers/${layer}/attributes/${attribute}/map${query}`,
    );
  }

  bscan(dataset: string, iy: number, layer: number, attribute: string): Promise<BscanPayload> {
    return this.request(
      "GET",
      `/datasets/${dataset}/bscans/${iy}?layer=${layer}&attribute=${encodeURIComponent(attribute)}`,
    );
  }

  createSession(): Promise<{ session_id: string }> {
    return this.request("POST", "/sessions", {});
  }

  fitGrid(
    session: string,
    body: { dataset: string; layer: number; attribute: string; sd_threshold: number; max_depth: number },
  ): Promise<GridPayload> {
    return this.request("POST", `/sessions/${session}/grids`, body);
  }

  listGrids(session: string): Promise<{ grids: GridPayload[] }> {
    return this.request("GET", `/sessions/${session}/grids`);
  }

  splitCell(session: string, grid: string, cellId: string, version: number): Promise<GridPayload> {
    return this.request(
      "POST",
      `/sessions/${session}/grids/${grid}/cells/${cellId}/split`,
      { version },
    );
  }

  mergeCell(session: string, grid: string, cellId: string, version: number): Promise<GridPayload> {
    return this.request(
      "POST",
      `/sessions/${session}/grids/${grid}/cells/${cellId}/merge`,
      { version },
    );
  }

  compare(body: {
    patients: string | string[];
    controls: string | string[];
    layer: number;
    attribute: string;
    mode: "point" | "grid";
    test?: string;
    alpha?: number;
    correction?: string;
    session?: string;
    grid_id?: string;
  }): Promise<ComparisonPayload> {
    return this.request("POST", "/compare", body);
  }

  measure(
    session: string,
    body: {
      layer: number;
      attribute: string;
      dataset?: string;
      patients?: string | string[];
      controls?: string | string[];
      selection: { grid_id?: string; cells?: string[]; polygon?: [number, number][] };
    },
  ): Promise<MeasurementPayload> {
    return this.request("POST", `/sessions/${session}/measure`, body);
  }
}
