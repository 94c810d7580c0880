/** Session export/import. The hints file uses the same JSON schema the
 * command-line tool and the service read: an array of objects with x, y,
 * size and an rgb triple (the server converts rgb to chroma, keeping all
 * colorimetry in one place). */

import { requestHints } from "./state";
import type { Rgb, SessionState, UiHint } from "./types";

export function exportHints(state: SessionState): string {
  return JSON.stringify(requestHints(state), null, 2);
}

function asInt(value: unknown, what: string): number {
  if (typeof value !== "number" || !Number.isInteger(value)) {
    throw new Error(`${what} must be an integer`);
  }
  return value;
}

export function importHints(text: string): UiHint[] {
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch {
    throw new Error("hints file is not valid JSON");
  }
  if (!Array.isArray(raw)) throw new Error("hints file must contain an array");
  return raw.map((entry, i) => {
    if (entry === null || typeof entry !== "object") {
      throw new Error(`hint entry ${i} is not an object`);
    }
    const e = entry as Record<string, unknown>;
    const rgb = e.rgb;
    if (!Array.isArray(rgb) || rgb.length !== 3 ||
        rgb.some((v) => typeof v !== "number")) {
      throw new Error(`hint entry ${i} needs an rgb triple`);
    }
    return {
      x: asInt(e.x, `hint entry ${i}: x`),
      y: asInt(e.y, `hint entry ${i}: y`),
      size: e.size === undefined ? 2 : asInt(e.size, `hint entry ${i}: size`),
      rgb: rgb as Rgb,
      enabled: true,
    };
  });
}

/** The colorized canvas content as raw PNG bytes. */
export function resultPngBytes(state: SessionState): Uint8Array {
  if (state.result === null) throw new Error("no result to export");
  const bin = atob(state.result);
  const out = new Uint8Array(bin.length);
  for (let i = 0; i < bin.length; i++) out[i] = bin.charCodeAt(i);
  return out;
}

/** Browser download helper. */
export function download(name: string, data: Uint8Array | string, mime: string): void {
  const blob =
    typeof data === "string"
      ? new Blob([data], { type: mime })
      : new Blob([data.buffer as ArrayBuffer], { type: mime });
  const url = URL.createObjectURL(blob);
  const link = document.createElement("a");
  link.href = url;
  link.download = name;
  link.click();
  URL.revokeObjectURL(url);
}
