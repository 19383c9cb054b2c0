import { describe, expect, it } from "vitest";
import { ApiClient, ApiError, LatestWins, base64ToBytes } from "../src/api.js";
import { emptyPrompt } from "../src/wire.js";
import fixtures from "./png_fixtures.json";

const mattePng = (fixtures as { name: string; png_b64: string; values: number[] }[]).find(
  (f) => f.name === "matte_like_32x32",
)!;

type Handler = (url: string, init?: RequestInit) => Response | Promise<Response>;

function stubFetch(handlers: Record<string, Handler>): typeof fetch {
  return (async (input: any, init?: RequestInit) => {
    const url = String(input);
    const path = new URL(url).pathname;
    const handler = handlers[path];
    if (!handler) return new Response("not found", { status: 404 });
    return handler(url, init);
  }) as typeof fetch;
}

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

const recordedPredict = {
  matte: mattePng.png_b64,
  latency_ms: 12.5,
  model_info: { checkpoint_hash: "abc123", config: { input_size: 128 } },
};

describe("ApiClient against a recorded-response stub", () => {
  it("uploads an image and returns its id", async () => {
    const client = new ApiClient(
      "http://svc",
      stubFetch({
        "/api/v1/images": async (_url, init) => {
          expect(init?.method).toBe("POST");
          expect(init?.body).toBeInstanceOf(FormData);
          return jsonResponse({ image_id: "img-1" });
        },
      }),
    );
    expect(await client.uploadImage(new Blob([new Uint8Array([1])]))).toBe("img-1");
  });

  it("maps upload errors to ApiError with status", async () => {
    const client = new ApiClient(
      "http://svc",
      stubFetch({
        "/api/v1/images": () => jsonResponse({ detail: "not a PNG file" }, 400),
      }),
    );
    await expect(client.uploadImage(new Blob([new Uint8Array([1])]))).rejects.toMatchObject({
      status: 400,
      message: "not a PNG file",
    });
  });

  it("sends the prompt verbatim and decodes the recorded matte", async () => {
    let sentBody: any = null;
    const client = new ApiClient(
      "http://svc",
      stubFetch({
        "/api/v1/predict": async (_url, init) => {
          sentBody = JSON.parse(String(init?.body));
          return jsonResponse(recordedPredict);
        },
      }),
    );
    const prompt = emptyPrompt();
    prompt.points = [{ x: 3, y: 4, label: "pos" }];
    const { matte, response } = await client.predictMatte("img-1", prompt);

    expect(sentBody).toEqual({ image_id: "img-1", prompt });
    expect(response.model_info.checkpoint_hash).toBe("abc123");
    expect(matte.width).toBe(32);
    expect(matte.height).toBe(32);
    // exact pixel compare against the recorded 16-bit payload
    for (let i = 0; i < mattePng.values.length; i++) {
      expect(Math.round(matte.alpha[i] * 65535)).toBe(mattePng.values[i]);
    }
  });

  it("maps predict validation errors", async () => {
    const client = new ApiClient(
      "http://svc",
      stubFetch({
        "/api/v1/predict": () =>
          jsonResponse({ detail: [{ loc: ["body", "prompt"], msg: "prompt must contain at least one element" }] }, 422),
      }),
    );
    await expect(client.predictRaw("img-1", emptyPrompt())).rejects.toBeInstanceOf(ApiError);
  });

  it("health surfaces the checkpoint hash", async () => {
    const client = new ApiClient(
      "http://svc",
      stubFetch({ "/api/v1/health": () => jsonResponse({ status: "ok", checkpoint_hash: "ff00" }) }),
    );
    expect((await client.health()).checkpoint_hash).toBe("ff00");
  });

  it("base64ToBytes round-trips", () => {
    const bytes = base64ToBytes(mattePng.png_b64);
    expect(bytes.length).toBeGreaterThan(8);
    expect(bytes[0]).toBe(0x89);
  });
});

describe("LatestWins", () => {
  it("suppresses superseded results", async () => {
    const queue = new LatestWins();
    let releaseFirst!: (v: string) => void;
    const first = queue.run(
      () => new Promise<string>((resolve) => (releaseFirst = resolve)),
    );
    const second = queue.run(async () => "second");
    expect(await second).toBe("second");
    releaseFirst("first");
    expect(await first).toBeNull(); // arrived after a newer request
  });

  it("delivers the newest result", async () => {
    const queue = new LatestWins();
    expect(await queue.run(async () => 42)).toBe(42);
  });
});
