/** DOM bootstrap: wires the controls to the session controller. */

import { ServiceClient } from "./client";
import { download, exportHints, importHints, resultPngBytes } from "./export";
import { CanvasRenderer } from "./render";
import { SessionController } from "./session";
import { canRedo, canUndo, DEFAULT_HINT_SIZE } from "./state";
import type { Rgb, SessionState } from "./types";

function $(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (el === null) throw new Error(`missing element #${id}`);
  return el;
}

function hexToRgb(hex: string): Rgb {
  const v = parseInt(hex.slice(1), 16);
  return [(v >> 16) & 0xff, (v >> 8) & 0xff, v & 0xff];
}

function bytesToBase64(bytes: Uint8Array): string {
  let bin = "";
  const chunk = 0x8000;
  for (let i = 0; i < bytes.length; i += chunk) {
    bin += String.fromCharCode(...bytes.subarray(i, i + chunk));
  }
  return btoa(bin);
}

async function loadImageFile(file: File): Promise<{ image: string; width: number; height: number }> {
  const bytes = new Uint8Array(await file.arrayBuffer());
  const bitmap = await createImageBitmap(new Blob([bytes.buffer as ArrayBuffer]));
  return { image: bytesToBase64(bytes), width: bitmap.width, height: bitmap.height };
}

function start(): void {
  const canvas = $("canvas") as HTMLCanvasElement;
  const controller = new SessionController(
    new ServiceClient(""),
    new CanvasRenderer(canvas),
  );

  const fileInput = $("file") as HTMLInputElement;
  const colorInput = $("color") as HTMLInputElement;
  const opacityInput = $("opacity") as HTMLInputElement;
  const hintList = $("hints") as HTMLUListElement;
  const banner = $("banner");

  fileInput.addEventListener("change", async () => {
    const file = fileInput.files?.[0];
    if (file === undefined) return;
    void controller.dispatch({ type: "load", ...(await loadImageFile(file)) });
  });

  canvas.addEventListener("click", (ev) => {
    const state = controller.state;
    if (state.source === null) return;
    const rect = canvas.getBoundingClientRect();
    const size = DEFAULT_HINT_SIZE;
    const px = Math.floor(((ev.clientX - rect.left) / rect.width) * state.width);
    const py = Math.floor(((ev.clientY - rect.top) / rect.height) * state.height);
    void controller.dispatch({
      type: "place",
      x: Math.min(Math.max(px, 0), state.width - size),
      y: Math.min(Math.max(py, 0), state.height - size),
      rgb: hexToRgb(colorInput.value),
    });
  });

  $("undo").addEventListener("click", () => void controller.dispatch({ type: "undo" }));
  $("redo").addEventListener("click", () => void controller.dispatch({ type: "redo" }));
  $("clear-overlay").addEventListener("click", () =>
    void controller.dispatch({ type: "hideRollout" }),
  );
  opacityInput.addEventListener("input", () =>
    void controller.dispatch({
      type: "setOverlayOpacity",
      value: Number(opacityInput.value) / 100,
    }),
  );

  $("export-hints").addEventListener("click", () => {
    download("hints.json", exportHints(controller.state), "application/json");
  });
  $("export-png").addEventListener("click", () => {
    try {
      download("colorized.png", resultPngBytes(controller.state), "image/png");
    } catch (err) {
      void controller.dispatch({
        type: "error",
        message: err instanceof Error ? err.message : String(err),
      });
    }
  });
  const importInput = $("import-hints") as HTMLInputElement;
  importInput.addEventListener("change", async () => {
    const file = importInput.files?.[0];
    if (file === undefined) return;
    try {
      for (const hint of importHints(await file.text())) {
        await controller.dispatch({
          type: "place", x: hint.x, y: hint.y, rgb: hint.rgb, size: hint.size,
        });
      }
    } catch (err) {
      void controller.dispatch({
        type: "error",
        message: err instanceof Error ? err.message : String(err),
      });
    }
  });
  $("dismiss").addEventListener("click", () =>
    void controller.dispatch({ type: "clearError" }),
  );

  controller.subscribe((state: SessionState) => {
    banner.classList.toggle("hidden", state.error === null);
    $("banner-text").textContent = state.error ?? "";
    ($("undo") as HTMLButtonElement).disabled = !canUndo(state);
    ($("redo") as HTMLButtonElement).disabled = !canRedo(state);

    hintList.replaceChildren(
      ...state.hints.map((hint, index) => {
        const li = document.createElement("li");
        const swatch = document.createElement("span");
        swatch.className = "swatch";
        swatch.style.background = `rgb(${hint.rgb.join(",")})`;
        const toggle = document.createElement("input");
        toggle.type = "checkbox";
        toggle.checked = hint.enabled;
        toggle.addEventListener("change", () =>
          void controller.dispatch({ type: "toggleHint", index }),
        );
        const label = document.createElement("span");
        label.textContent = `(${hint.x}, ${hint.y})`;
        const roll = document.createElement("button");
        const active = state.overlay?.hintIndex === index;
        roll.textContent = active ? "hide heat" : "heat";
        roll.disabled = !hint.enabled || state.result === null;
        roll.addEventListener("click", () =>
          void controller.dispatch(
            active ? { type: "hideRollout" } : { type: "showRollout", index },
          ),
        );
        li.append(toggle, swatch, label, roll);
        return li;
      }),
    );
  });
}

start();
