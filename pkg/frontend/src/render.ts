/** Canvas rendering. The geometry (overlay cell placement, alpha scaling)
 * is pure and unit-tested; the CanvasRenderer is a thin DOM shell around
 * it. Every pixel drawn comes from the source image or a service
 * response, never from client-side color math. */

import type { RolloutGrid, SessionState } from "./types";
import type { Renderer } from "./session";

export interface OverlayCell {
  x: number;
  y: number;
  w: number;
  h: number;
  /** Heat in [0, 1], 1 for the hottest cell. */
  alpha: number;
}

/** Lay a G x G heat grid over a width x height image: cell (row 0, col 0)
 * covers the top-left width/G x height/G rectangle. */
export function overlayCells(
  grid: RolloutGrid,
  width: number,
  height: number,
): OverlayCell[] {
  const cellW = width / grid.width;
  const cellH = height / grid.height;
  let max = 0;
  for (const row of grid.values) {
    for (const v of row) max = Math.max(max, v);
  }
  const scale = max > 0 ? 1 / max : 0;
  const cells: OverlayCell[] = [];
  for (let r = 0; r < grid.height; r++) {
    for (let c = 0; c < grid.width; c++) {
      cells.push({
        x: c * cellW,
        y: r * cellH,
        w: cellW,
        h: cellH,
        alpha: grid.values[r][c] * scale,
      });
    }
  }
  return cells;
}

function decodeBase64(data: string): Uint8Array {
  const bin = atob(data);
  const out = new Uint8Array(bin.length);
  for (let i = 0; i < bin.length; i++) out[i] = bin.charCodeAt(i);
  return out;
}

async function toBitmap(pngBase64: string): Promise<ImageBitmap> {
  const blob = new Blob([decodeBase64(pngBase64).buffer as ArrayBuffer], {
    type: "image/png",
  });
  return createImageBitmap(blob);
}

/** Draws the session onto a 2D canvas: result (or source) plus the heat
 * overlay and small markers at enabled hint anchors. */
export class CanvasRenderer implements Renderer {
  constructor(private readonly canvas: HTMLCanvasElement) {}

  async render(state: SessionState): Promise<void> {
    const shown = state.result ?? state.source;
    if (shown === null) return;
    const ctx = this.canvas.getContext("2d");
    if (ctx === null) return;
    const bitmap = await toBitmap(shown);
    this.canvas.width = state.width;
    this.canvas.height = state.height;
    ctx.imageSmoothingEnabled = false;
    ctx.drawImage(bitmap, 0, 0, state.width, state.height);

    if (state.overlay !== null && state.overlay.grid !== null) {
      const cells = overlayCells(state.overlay.grid, state.width, state.height);
      for (const cell of cells) {
        ctx.fillStyle = `rgba(255, 64, 0, ${cell.alpha * state.overlay.opacity})`;
        ctx.fillRect(cell.x, cell.y, cell.w, cell.h);
      }
    }

    for (const hint of state.hints) {
      if (!hint.enabled) continue;
      ctx.fillStyle = `rgb(${hint.rgb[0]}, ${hint.rgb[1]}, ${hint.rgb[2]})`;
      ctx.fillRect(hint.x, hint.y, hint.size, hint.size);
      ctx.strokeStyle = "white";
      ctx.lineWidth = Math.max(1, state.width / 256);
      ctx.strokeRect(hint.x - 0.5, hint.y - 0.5, hint.size + 1, hint.size + 1);
    }
  }
}
