/** Pure session state core.
 *
 * Every transition is a pure function of (state, event): no clocks, no
 * randomness, no mutation of the input. Replaying an event log therefore
 * reproduces a session exactly, and undo followed by redo restores the
 * identical state.
 */

import type {
  Overlay,
  ServiceHint,
  SessionEvent,
  SessionState,
  Snapshot,
  UiHint,
} from "./types";

export const DEFAULT_HINT_SIZE = 2;
export const DEFAULT_OVERLAY_OPACITY = 0.55;

export function initialState(): SessionState {
  return {
    source: null,
    width: 0,
    height: 0,
    hints: [],
    result: null,
    overlay: null,
    error: null,
    past: [],
    future: [],
  };
}

function snapshot(state: SessionState): Snapshot {
  return { hints: state.hints, overlay: state.overlay };
}

function fail(state: SessionState, message: string): SessionState {
  return { ...state, error: message };
}

/** Overlay carried across a hint-list change: selection kept, grid stale. */
function staleOverlay(overlay: Overlay | null, hintCount: number): Overlay | null {
  if (overlay === null || overlay.hintIndex >= hintCount) return null;
  return { ...overlay, grid: null };
}

export function reduce(state: SessionState, event: SessionEvent): SessionState {
  switch (event.type) {
    case "load":
      if (event.width < 1 || event.height < 1) {
        return fail(state, `bad image dimensions ${event.width}x${event.height}`);
      }
      return {
        ...initialState(),
        source: event.image,
        width: event.width,
        height: event.height,
      };

    case "place": {
      if (state.source === null) return fail(state, "load an image first");
      const size = event.size ?? DEFAULT_HINT_SIZE;
      if (
        !Number.isInteger(event.x) || !Number.isInteger(event.y) ||
        event.x < 0 || event.y < 0 ||
        event.x > state.width - size || event.y > state.height - size
      ) {
        return fail(
          state,
          `hint at (${event.x}, ${event.y}) is outside the ` +
            `${state.width}x${state.height} image`,
        );
      }
      const at = state.hints.findIndex(
        (h) => h.enabled && h.x === event.x && h.y === event.y && h.size === size,
      );
      const placed: UiHint = {
        x: event.x, y: event.y, size, rgb: event.rgb, enabled: true,
      };
      const hints =
        at >= 0
          ? state.hints.map((h, i) => (i === at ? placed : h))
          : [...state.hints, placed];
      return {
        ...state,
        hints,
        overlay: staleOverlay(state.overlay, hints.length),
        error: null,
        past: [...state.past, snapshot(state)],
        future: [],
      };
    }

    case "toggleHint": {
      if (event.index < 0 || event.index >= state.hints.length) {
        return fail(state, `no hint at index ${event.index}`);
      }
      const hints = state.hints.map((h, i) =>
        i === event.index ? { ...h, enabled: !h.enabled } : h,
      );
      const overlay =
        state.overlay !== null &&
        state.overlay.hintIndex === event.index &&
        !hints[event.index].enabled
          ? null
          : staleOverlay(state.overlay, hints.length);
      return {
        ...state,
        hints,
        overlay,
        error: null,
        past: [...state.past, snapshot(state)],
        future: [],
      };
    }

    case "undo": {
      if (state.past.length === 0) return state;
      const prev = state.past[state.past.length - 1];
      return {
        ...state,
        hints: prev.hints,
        overlay: prev.overlay,
        past: state.past.slice(0, -1),
        future: [...state.future, snapshot(state)],
      };
    }

    case "redo": {
      if (state.future.length === 0) return state;
      const next = state.future[state.future.length - 1];
      return {
        ...state,
        hints: next.hints,
        overlay: next.overlay,
        past: [...state.past, snapshot(state)],
        future: state.future.slice(0, -1),
      };
    }

    case "result":
      return { ...state, result: event.image, error: null };

    case "showRollout": {
      if (state.result === null) return fail(state, "no result to inspect yet");
      const hint = state.hints[event.index];
      if (hint === undefined) return fail(state, `no hint at index ${event.index}`);
      if (!hint.enabled) return fail(state, "cannot roll out a disabled hint");
      return {
        ...state,
        error: null,
        overlay: {
          hintIndex: event.index,
          grid: null,
          opacity: state.overlay?.opacity ?? DEFAULT_OVERLAY_OPACITY,
        },
      };
    }

    case "rolloutData": {
      // stale guard: data for a hint that is no longer selected is dropped
      if (state.overlay === null || state.overlay.hintIndex !== event.index) {
        return state;
      }
      return { ...state, overlay: { ...state.overlay, grid: event.grid } };
    }

    case "hideRollout":
      return { ...state, overlay: null };

    case "setOverlayOpacity": {
      if (state.overlay === null) return state;
      const value = Math.min(1, Math.max(0, event.value));
      return { ...state, overlay: { ...state.overlay, opacity: value } };
    }

    case "error":
      return fail(state, event.message);

    case "clearError":
      return { ...state, error: null };
  }
}

/** The hint list as sent to the service and written by export: enabled
 * hints only, in placement order. */
export function requestHints(state: SessionState): ServiceHint[] {
  return state.hints
    .filter((h) => h.enabled)
    .map((h) => ({ x: h.x, y: h.y, size: h.size, rgb: h.rgb }));
}

/** Position of a hint within the request list, or null if disabled. */
export function requestIndexOf(state: SessionState, hintIndex: number): number | null {
  const hint = state.hints[hintIndex];
  if (hint === undefined || !hint.enabled) return null;
  let position = 0;
  for (let i = 0; i < hintIndex; i++) {
    if (state.hints[i].enabled) position++;
  }
  return position;
}

export function canUndo(state: SessionState): boolean {
  return state.past.length > 0;
}

export function canRedo(state: SessionState): boolean {
  return state.future.length > 0;
}

/** Fold an event log from a fresh session; the replay invariant. */
export function replay(events: SessionEvent[]): SessionState {
  return events.reduce(reduce, initialState());
}
