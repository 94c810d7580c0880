/** Thin typed wrapper over the colorization service HTTP API. */

import type { RolloutGrid, ServiceHint } from "./types";

export interface ColorizeRequest {
  image: string;
  hints: ServiceHint[];
  return_rollout?: boolean;
  rollout_hint_index?: number;
}

export interface ColorizeResponse {
  image: string;
  latency_ms: number;
  rollout: RolloutGrid | null;
}

export interface ModelInfo {
  config: Record<string, unknown>;
  parameter_count: number;
  gflops: number;
  checkpoint_path: string;
}

export class ServiceError extends Error {
  constructor(
    public readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ServiceError";
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ServiceClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchImpl: FetchLike = (...args) => fetch(...args),
  ) {}

  private async request(path: string, init?: RequestInit): Promise<unknown> {
    let resp: Response;
    try {
      resp = await this.fetchImpl(this.baseUrl + path, init);
    } catch {
      throw new ServiceError(0, "service unreachable");
    }
    const body = await resp.json().catch(() => null);
    if (!resp.ok) {
      const detail =
        body !== null && typeof body === "object" && "detail" in body
          ? String((body as { detail: unknown }).detail)
          : `request failed with status ${resp.status}`;
      throw new ServiceError(resp.status, detail);
    }
    return body;
  }

  async colorize(req: ColorizeRequest): Promise<ColorizeResponse> {
    const body = await this.request("/api/colorize", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(req),
    });
    return body as ColorizeResponse;
  }

  async modelInfo(): Promise<ModelInfo> {
    return (await this.request("/api/model")) as ModelInfo;
  }

  async health(): Promise<{ status: string; uptime_s: number }> {
    return (await this.request("/api/health")) as { status: string; uptime_s: number };
  }
}
