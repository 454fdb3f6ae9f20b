/**
 * Minimal drawing surface shared by all views.  The browser adapter wraps
 * a CanvasRenderingContext2D; tests substitute a recording stub, so view
 * logic stays exercisable without a DOM.
 */

export interface Surface {
  readonly width: number;
  readonly height: number;
  clear(): void;
  /** Blit a full-surface RGBA buffer (width*height*4). */
  putImage(rgba: Uint8ClampedArray, width: number, height: number): void;
  fillRect(x: number, y: number, w: number, h: number, color: string): void;
  strokeRect(x: number, y: number, w: number, h: number, color: string): void;
  polyline(points: [number, number][], color: string, lineWidth?: number): void;
  text(x: number, y: number, text: string, color: string): void;
}

/** Surface over a real 2D canvas context. */
export class CanvasSurface implements Surface {
  constructor(
    private ctx: CanvasRenderingContext2D,
    public readonly width: number,
    public readonly height: number,
  ) {}

  clear(): void {
    this.ctx.clearRect(0, 0, this.width, this.height);
  }

  putImage(rgba: Uint8ClampedArray, width: number, height: number): void {
    this.ctx.putImageData(new ImageData(rgba, width, height), 0, 0);
  }

  fillRect(x: number, y: number, w: number, h: number, color: string): void {
    this.ctx.fillStyle = color;
    this.ctx.fillRect(x, y, w, h);
  }

  strokeRect(x: number, y: number, w: number, h: number, color: string): void {
    this.ctx.strokeStyle = color;
    this.ctx.strokeRect(x, y, w, h);
  }

  polyline(points: [number, number][], color: string, lineWidth = 1): void {
    if (points.length < 2) return;
    this.ctx.strokeStyle = color;
    this.ctx.lineWidth = lineWidth;
    this.ctx.beginPath();
    this.ctx.moveTo(points[0][0], points[0][1]);
    for (let i = 1; i < points.length; i++) {
      this.ctx.lineTo(points[i][0], points[i][1]);
    }
    this.ctx.stroke();
  }

  text(x: number, y: number, text: string, color: string): void {
    this.ctx.fillStyle = color;
    this.ctx.fillText(text, x, y);
  }
}

/** Text sink for the measurement panel; the browser adapter appends DOM rows. */
export interface TextPanel {
  clear(): void;
  row(label: string, value: string): void;
  note(text: string): void;
}
