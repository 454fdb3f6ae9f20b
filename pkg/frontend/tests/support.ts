/**
 * Test doubles: a recording Surface, a recording TextPanel, and a
 * transport that replays the transcript recorded from the real service.
 */

import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import type { Transport, TransportResponse } from "../src/api.js";
import type { Surface, TextPanel } from "../src/draw.js";

type Op = unknown[];

function fnv1a(bytes: Uint8ClampedArray): number {
  let h = 0x811c9dc5;
  for (let i = 0; i < bytes.length; i++) {
    h ^= bytes[i];
    h = Math.imul(h, 0x01000193);
  }
  return h >>> 0;
}

export class FakeSurface implements Surface {
  ops: Op[] = [];

  constructor(
    public readonly width: number,
    public readonly height: number,
  ) {}

  clear(): void {
    this.ops.push(["clear"]);
  }

  putImage(rgba: Uint8ClampedArray, width: number, height: number): void {
    this.ops.push(["putImage", width, height, fnv1a(rgba)]);
  }

  fillRect(x: number, y: number, w: number, h: number, color: string): void {
    this.ops.push(["fillRect", x, y, w, h, color]);
  }

  strokeRect(x: number, y: number, w: number, h: number, color: string): void {
    this.ops.push(["strokeRect", x, y, w, h, color]);
  }

  polyline(points: [number, number][], color: string, lineWidth?: number): void {
    this.ops.push(["polyline", points.length, points[0], points[points.length - 1], color, lineWidth]);
  }

  text(x: number, y: number, text: string, color: string): void {
    this.ops.push(["text", x, y, text, color]);
  }

  /** Digest of everything drawn since the last frame boundary. */
  frameDigest(): string {
    const start = this.ops.lastIndexOf(this.ops.filter((o) => o[0] === "clear").pop()!);
    return JSON.stringify(this.ops.slice(start));
  }
}

export class FakePanel implements TextPanel {
  rows: [string, string][] = [];
  notes: string[] = [];

  clear(): void {
    this.rows = [];
    this.notes = [];
  }

  row(label: string, value: string): void {
    this.rows.push([label, value]);
  }

  note(text: string): void {
    this.notes.push(text);
  }
}

function canonicalJson(value: unknown): string {
  if (value === undefined) return "";
  const sort = (v: unknown): unknown => {
    if (Array.isArray(v)) return v.map(sort);
    if (v !== null && typeof v === "object") {
      const out: Record<string, unknown> = {};
      for (const key of Object.keys(v as object).sort()) {
        out[key] = sort((v as Record<string, unknown>)[key]);
      }
      return out;
    }
    return v;
  };
  return JSON.stringify(sort(value));
}

interface Exchange {
  method: string;
  path: string;
  body: unknown;
  status: number;
  response: unknown;
}

export interface Replay {
  transport: Transport;
  exchanges: Exchange[];
  /** Response body of the recorded exchange matching method+path(+body). */
  response<T>(method: string, path: string, body?: unknown): T;
  requestLog: string[];
}

export function loadReplay(): Replay {
  const here = dirname(fileURLToPath(import.meta.url));
  const raw = readFileSync(join(here, "fixtures", "transcript.json"), "utf-8");
  const exchanges = JSON.parse(raw) as Exchange[];
  const byKey = new Map<string, Exchange>();
  for (const e of exchanges) {
    byKey.set(`${e.method} ${e.path} ${canonicalJson(e.body ?? undefined)}`, e);
  }
  const requestLog: string[] = [];
  const transport: Transport = async (method, path, body): Promise<TransportResponse> => {
    const key = `${method} ${path} ${canonicalJson(body)}`;
    requestLog.push(key);
    const hit = byKey.get(key);
    if (!hit) {
      const known = [...byKey.keys()].join("\n  ");
      throw new Error(`no fixture for:\n  ${key}\nknown:\n  ${known}`);
    }
    return { status: hit.status, body: hit.response };
  };
  return {
    transport,
    exchanges,
    requestLog,
    response<T>(method: string, path: string, body?: unknown): T {
      const hit = byKey.get(`${method} ${path} ${canonicalJson(body)}`);
      if (!hit) throw new Error(`no fixture for ${method} ${path}`);
      return hit.response as T;
    },
  };
}
