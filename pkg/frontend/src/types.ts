/** Shared domain types for the colorization workspace. */

export type Rgb = [number, number, number];

/** One placed color condition, anchored at its top-left pixel. */
export interface UiHint {
  x: number;
  y: number;
  size: number;
  rgb: Rgb;
  enabled: boolean;
}

/** Hint as it travels to the service: the rgb form, server converts to ab. */
export interface ServiceHint {
  x: number;
  y: number;
  size: number;
  rgb: Rgb;
}

export interface RolloutGrid {
  height: number;
  width: number;
  values: number[][];
}

/** Attention overlay for one hint; grid is null while a fetch is pending. */
export interface Overlay {
  hintIndex: number;
  grid: RolloutGrid | null;
  opacity: number;
}

export interface SessionState {
  /** Base64 PNG of the loaded source image, null before load. */
  source: string | null;
  width: number;
  height: number;
  hints: UiHint[];
  /** Base64 PNG of the latest service colorization. */
  result: string | null;
  overlay: Overlay | null;
  error: string | null;
  past: Snapshot[];
  future: Snapshot[];
}

/** What undo/redo restores: the hint list and the overlay selection. */
export interface Snapshot {
  hints: UiHint[];
  overlay: Overlay | null;
}

export type SessionEvent =
  | { type: "load"; image: string; width: number; height: number }
  | { type: "place"; x: number; y: number; rgb: Rgb; size?: number }
  | { type: "toggleHint"; index: number }
  | { type: "undo" }
  | { type: "redo" }
  | { type: "result"; image: string }
  | { type: "showRollout"; index: number }
  | { type: "rolloutData"; index: number; grid: RolloutGrid }
  | { type: "hideRollout" }
  | { type: "setOverlayOpacity"; value: number }
  | { type: "error"; message: string }
  | { type: "clearError" };
