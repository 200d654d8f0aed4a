import { describe, expect, it } from "vitest";

import { ApiClient, SegmentRequestBody, SegmentResponseBody } from "../src/api.js";
import { PromptController } from "../src/controller.js";

const SIZE = 128;

function rleWithArea(area: number, offset = 100): string {
  const total = SIZE * SIZE;
  return `${SIZE}x${SIZE}\n${offset},${area},${total - offset - area}\n`;
}

function response(area: number): SegmentResponseBody {
  const rle = rleWithArea(area);
  return {
    v: 1,
    masks: { sam: rle, hq: rle, corrected: rle },
    areas: { sam: area, hq: area, corrected: area },
    iou_scores: [0.9, 0.1, 0.2, 0.3],
    selected: 0,
    biou_vs_gt: null,
    latency_ms: 5,
  };
}

interface Route {
  body: SegmentRequestBody;
  resolve: (r: SegmentResponseBody) => void;
  reject: (e: Error) => void;
}

function makeServer(opts: { manual?: boolean; failures?: number; area?: number } = {}) {
  const pending: Route[] = [];
  let failures = opts.failures ?? 0;
  const fetchImpl = async (url: string, init?: RequestInit): Promise<Response> => {
    if (!url.endsWith("/segment")) throw new Error(`unexpected url ${url}`);
    const body = JSON.parse(String(init?.body)) as SegmentRequestBody;
    if (failures > 0) {
      failures -= 1;
      throw new Error("connection reset");
    }
    const payload = await new Promise<SegmentResponseBody>((resolve, reject) => {
      init?.signal?.addEventListener("abort", () => reject(new Error("aborted")));
      const route = { body, resolve, reject };
      if (opts.manual) {
        pending.push(route);
      } else {
        resolve(response(opts.area ?? 7));
      }
    });
    return new Response(JSON.stringify(payload), { status: 200 });
  };
  return { pending, api: new ApiClient("http://svc", fetchImpl) };
}

describe("PromptController", () => {
  it("re-queries on each prompt change and validates areas", async () => {
    const { api } = makeServer({ area: 7 });
    const updates: SegmentResponseBody[] = [];
    const c = new PromptController(api, { onUpdate: (_o, r) => updates.push(r) });
    await c.loadImage("scene_00000");
    await c.addPoint(10, 20, "positive");
    await c.dragBox(90, 90, 10, 10);
    expect(c.requestLog.length).toBe(2);
    expect(c.requestLog[0].prompts.points).toEqual([{ x: 10, y: 20, label: "positive" }]);
    expect(c.requestLog[1].prompts.box).toEqual([10, 10, 90, 90]);
    expect(updates.length).toBe(2);
    expect(c.overlays.get("corrected")?.filledPixels).toBe(7);
  });

  it("ignores degenerate drags", async () => {
    const { api } = makeServer({});
    const c = new PromptController(api);
    await c.loadImage("img");
    await c.dragBox(50, 50, 51, 51);
    expect(c.requestLog.length).toBe(0);
  });

  it("latest action wins over an in-flight request", async () => {
    const { api, pending } = makeServer({ manual: true });
    const updates: SegmentResponseBody[] = [];
    const c = new PromptController(api, { onUpdate: (_o, r) => updates.push(r) });
    await c.loadImage("img");
    const first = c.addPoint(5, 5, "positive");
    const second = c.addPoint(9, 9, "negative");
    await Promise.resolve();
    // both reached the server, but the first was aborted by the second
    expect(pending.length).toBe(2);
    pending[1].resolve(response(3));
    await second;
    await first;
    expect(updates.length).toBe(1); // only the superseding request painted
    expect(c.requestLog.length).toBe(2);
    expect(c.requestLog[1].prompts.points?.length).toBe(2);
  });

  it("retries a failed request once, then rolls back with a toast", async () => {
    const errors: string[] = [];
    const fail = makeServer({ failures: 2 });
    const c = new PromptController(fail.api, { onError: (m) => errors.push(m) });
    await c.loadImage("img");
    await c.addPoint(4, 4, "positive");
    expect(errors.length).toBe(1);
    expect(c.store.state.points.length).toBe(0); // state unchanged after rollback

    const once = makeServer({ failures: 1, area: 5 });
    const c2 = new PromptController(once.api);
    await c2.loadImage("img");
    await c2.addPoint(4, 4, "positive");
    expect(c2.store.state.points.length).toBe(1); // retry succeeded
    expect(c2.overlays.get("corrected")?.filledPixels).toBe(5);
  });

  it("flags masks whose geometry does not match the model size", async () => {
    const errors: string[] = [];
    const fetchImpl = async (): Promise<Response> => {
      const bad = { ...response(3), masks: { corrected: "8x8\n60,4\n" }, areas: { corrected: 4 } };
      return new Response(JSON.stringify(bad), { status: 200 });
    };
    const c = new PromptController(new ApiClient("http://svc", fetchImpl), {
      onError: (m) => errors.push(m),
    });
    await c.loadImage("img");
    await c.addPoint(1, 1, "positive");
    expect(errors.length).toBe(1);
    expect(errors[0]).toContain("8x8");
  });

  it("undo re-issues the request for the restored prompt set", async () => {
    const { api } = makeServer({});
    const c = new PromptController(api);
    await c.loadImage("img");
    await c.addPoint(1, 1, "positive");
    await c.addPoint(2, 2, "positive");
    await c.undo();
    expect(c.requestLog.length).toBe(3);
    expect(c.requestLog[2].prompts.points).toEqual([{ x: 1, y: 1, label: "positive" }]);
    await c.undo(); // back to no prompts: overlays clear, no request
    expect(c.requestLog.length).toBe(3);
    expect(c.overlays.size).toBe(0);
  });

  it("supports the 10-positive + 5-negative protocol", async () => {
    const { api } = makeServer({});
    const c = new PromptController(api);
    await c.loadImage("img");
    for (let i = 0; i < 10; i++) await c.addPoint(i, i, "positive");
    for (let i = 0; i < 5; i++) await c.addPoint(100 + i, 100 + i, "negative");
    const last = c.requestLog[c.requestLog.length - 1];
    expect(last.prompts.points?.filter((p) => p.label === "positive").length).toBe(10);
    expect(last.prompts.points?.filter((p) => p.label === "negative").length).toBe(5);
  });
});
