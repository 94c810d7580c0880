/** Session controller: joins the pure state core to the service client.
 *
 * Colorize requests are issued whenever an event changes the effective
 * hint list (place, toggle, undo, redo) or selects a rollout overlay.
 * Responses carry a sequence token; a response is applied only if no
 * newer request has been issued since, so the latest request always wins
 * and a stale colorization can never overwrite a newer one.
 */

import { ServiceClient } from "./client";
import {
  initialState,
  reduce,
  requestHints,
  requestIndexOf,
} from "./state";
import type { SessionEvent, SessionState } from "./types";

export interface Renderer {
  render(state: SessionState): void | Promise<void>;
}

export type Listener = (state: SessionState) => void;

export class SessionController {
  state: SessionState = initialState();

  private seq = 0;
  private listeners: Listener[] = [];

  constructor(
    private readonly client: ServiceClient,
    private readonly renderer: Renderer | null = null,
  ) {}

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  /** Apply an event; returns a promise that settles when any request the
   * event triggered has been resolved (or superseded). */
  dispatch(event: SessionEvent): Promise<void> {
    const before = this.state;
    this.setState(reduce(before, event));
    const after = this.state;

    if (after.source === null) return this.paint();

    const hintsChanged =
      JSON.stringify(requestHints(before)) !== JSON.stringify(requestHints(after));
    const overlayNeedsData =
      after.overlay !== null &&
      after.overlay.grid === null &&
      (event.type === "showRollout" || hintsChanged);

    if (hintsChanged || overlayNeedsData) return this.refresh();
    return this.paint();
  }

  /** One in-flight-latest colorize round trip. */
  private async refresh(): Promise<void> {
    const token = ++this.seq;
    const asked = this.state;
    const overlayIndex =
      asked.overlay !== null ? requestIndexOf(asked, asked.overlay.hintIndex) : null;
    try {
      const resp = await this.client.colorize({
        image: asked.source as string,
        hints: requestHints(asked),
        ...(overlayIndex !== null
          ? { return_rollout: true, rollout_hint_index: overlayIndex }
          : {}),
      });
      if (token !== this.seq) return; // superseded; latest wins
      this.setState(reduce(this.state, { type: "result", image: resp.image }));
      if (resp.rollout !== null && asked.overlay !== null) {
        this.setState(
          reduce(this.state, {
            type: "rolloutData",
            index: asked.overlay.hintIndex,
            grid: resp.rollout,
          }),
        );
      }
    } catch (err) {
      if (token !== this.seq) return;
      const message = err instanceof Error ? err.message : String(err);
      this.setState(reduce(this.state, { type: "error", message }));
    }
    await this.paint();
  }

  private async paint(): Promise<void> {
    if (this.renderer !== null) await this.renderer.render(this.state);
  }

  private setState(next: SessionState): void {
    this.state = next;
    for (const listener of this.listeners) listener(next);
  }
}
