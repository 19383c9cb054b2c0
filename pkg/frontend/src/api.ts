/** HTTP client for the matting service. fetch is injectable for tests. */

import { decodeMatte16, type DecodedMatte } from "./png16.js";
import type { WirePrompt } from "./wire.js";

export interface ModelInfo {
  checkpoint_hash: string | null;
  config: Record<string, unknown>;
}

export interface PredictResponse {
  matte: string; // base64 16-bit PNG
  latency_ms: number;
  model_info: ModelInfo;
}

export class ApiError extends Error {
  readonly status: number;

  constructor(status: number, message: string) {
    super(message);
    this.status = status;
  }
}

export function base64ToBytes(b64: string): Uint8Array {
  const bin = atob(b64);
  const out = new Uint8Array(bin.length);
  for (let i = 0; i < bin.length; i++) out[i] = bin.charCodeAt(i);
  return out;
}

async function errorDetail(resp: Response): Promise<string> {
  try {
    const body = await resp.json();
    return typeof body.detail === "string" ? body.detail : JSON.stringify(body.detail);
  } catch {
    return resp.statusText;
  }
}

export class ApiClient {
  private readonly baseUrl: string;
  private readonly fetchFn: typeof fetch;

  constructor(baseUrl: string, fetchFn: typeof fetch = fetch) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
    this.fetchFn = fetchFn;
  }

  async health(): Promise<{ status: string; checkpoint_hash: string }> {
    const resp = await this.fetchFn(`${this.baseUrl}/api/v1/health`);
    if (!resp.ok) throw new ApiError(resp.status, await errorDetail(resp));
    return resp.json();
  }

  async uploadImage(file: Blob): Promise<string> {
    const form = new FormData();
    form.append("file", file, "upload.png");
    const resp = await this.fetchFn(`${this.baseUrl}/api/v1/images`, {
      method: "POST",
      body: form,
    });
    if (!resp.ok) throw new ApiError(resp.status, await errorDetail(resp));
    const body = await resp.json();
    return body.image_id;
  }

  async predictRaw(imageId: string, prompt: WirePrompt): Promise<PredictResponse> {
    const resp = await this.fetchFn(`${this.baseUrl}/api/v1/predict`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ image_id: imageId, prompt }),
    });
    if (!resp.ok) throw new ApiError(resp.status, await errorDetail(resp));
    return resp.json();
  }

  /** Predict and decode the matte payload. */
  async predictMatte(
    imageId: string,
    prompt: WirePrompt,
  ): Promise<{ matte: DecodedMatte; response: PredictResponse }> {
    const response = await this.predictRaw(imageId, prompt);
    const matte = await decodeMatte16(base64ToBytes(response.matte));
    return { matte, response };
  }
}

/** Serializes predict calls: only the newest request's result is delivered;
 * superseded results resolve to null. */
export class LatestWins {
  private seq = 0;

  async run<T>(task: () => Promise<T>): Promise<T | null> {
    const id = ++this.seq;
    const result = await task();
    return id === this.seq ? result : null;
  }
}
