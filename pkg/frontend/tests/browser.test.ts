// @vitest-environment jsdom
/** Scripted browser test against the real DOM wiring: load an image,
 * click a positive point, verify the POST /segment payload and that
 * the rendered overlay's decoded pixel count matches the reported
 * area; then a negative point supersedes, and a drag normalizes. */

import { beforeEach, describe, expect, it, vi } from "vitest";

import type { SegmentRequestBody, SegmentResponseBody } from "../src/api.js";
import { startApp } from "../src/main.js";
import { maskArea } from "../src/rle.js";
import { decodeRle } from "../src/rle.js";

const SIZE = 128;

function rleWithArea(area: number): string {
  return `${SIZE}x${SIZE}\n40,${area},${SIZE * SIZE - 40 - area}\n`;
}

function makeResponse(area: number): SegmentResponseBody {
  const rle = rleWithArea(area);
  return {
    v: 1,
    masks: { sam: rle, hq: rle, corrected: rle },
    areas: { sam: area, hq: area, corrected: area },
    iou_scores: [0.8, 0.1, 0.1, 0.1],
    selected: 0,
    biou_vs_gt: 0.9,
    latency_ms: 3,
  };
}

describe("prompt editor in a scripted browser", () => {
  const segmentBodies: SegmentRequestBody[] = [];

  beforeEach(() => {
    segmentBodies.length = 0;
    document.body.innerHTML = `
      <select id="image-picker"></select>
      <button id="undo">Undo</button>
      <input type="checkbox" id="toggle-sam" />
      <input type="checkbox" id="toggle-hq" />
      <input type="checkbox" id="toggle-corrected" checked />
      <canvas id="canvas" width="512" height="512"></canvas>
      <div id="panel"></div>
      <div id="toast"></div>
    `;
    const canvas = document.getElementById("canvas") as HTMLCanvasElement;
    canvas.getBoundingClientRect = () =>
      ({ left: 0, top: 0, right: 512, bottom: 512, width: 512, height: 512, x: 0, y: 0, toJSON: () => ({}) }) as DOMRect;

    vi.stubGlobal(
      "fetch",
      vi.fn(async (url: string, init?: RequestInit) => {
        if (url.endsWith("/health")) {
          return new Response(
            JSON.stringify({ ok: true, v: 1, model_config: { image_size: SIZE } }),
            { status: 200 },
          );
        }
        if (url.endsWith("/images")) {
          return new Response(JSON.stringify({ v: 1, images: ["scene_00000"] }), { status: 200 });
        }
        if (url.endsWith("/segment")) {
          const body = JSON.parse(String(init?.body)) as SegmentRequestBody;
          segmentBodies.push(body);
          return new Response(JSON.stringify(makeResponse(11)), { status: 200 });
        }
        throw new Error(`unexpected fetch ${url}`);
      }),
    );
  });

  function mouse(canvas: HTMLCanvasElement, type: string, x: number, y: number, opts: MouseEventInit = {}) {
    canvas.dispatchEvent(
      new MouseEvent(type, { clientX: x, clientY: y, bubbles: true, button: 0, ...opts }),
    );
  }

  async function settle() {
    for (let i = 0; i < 12; i++) await new Promise((r) => setTimeout(r, 0));
  }

  it("click -> one POST /segment with correct JSON, overlay area matches", async () => {
    const controller = startApp(document, "http://svc", {
      imageLoader: async () => {},
    });
    await settle();
    expect((document.getElementById("image-picker") as HTMLSelectElement).value).toBe("scene_00000");

    const canvas = document.getElementById("canvas") as HTMLCanvasElement;
    mouse(canvas, "mousedown", 100, 100);
    mouse(canvas, "mouseup", 100, 100);
    await settle();

    expect(segmentBodies.length).toBe(1);
    expect(segmentBodies[0]).toEqual({
      image_id: "scene_00000",
      prompts: { points: [{ x: 25, y: 25, label: "positive" }] },
      return: ["sam", "hq", "corrected"],
    });
    const overlay = controller.overlays.get("corrected");
    expect(overlay).toBeDefined();
    const decoded = decodeRle(makeResponse(11).masks.corrected);
    expect(overlay!.filledPixels).toBe(maskArea(decoded));
    expect(overlay!.filledPixels).toBe(11);

    // a negative point (shift-click) issues a superseding request with both points
    mouse(canvas, "mousedown", 200, 240);
    mouse(canvas, "mouseup", 200, 240, { shiftKey: true });
    await settle();
    expect(segmentBodies.length).toBe(2);
    expect(segmentBodies[1].prompts.points).toEqual([
      { x: 25, y: 25, label: "positive" },
      { x: 50, y: 60, label: "negative" },
    ]);
  });

  it("drag normalizes corner order into the box prompt", async () => {
    startApp(document, "http://svc", { imageLoader: async () => {} });
    await settle();
    const canvas = document.getElementById("canvas") as HTMLCanvasElement;
    mouse(canvas, "mousedown", 360, 360); // image (90, 90)
    mouse(canvas, "mouseup", 40, 40); // image (10, 10)
    await settle();
    expect(segmentBodies.length).toBe(1);
    expect(segmentBodies[0].prompts.box).toEqual([10, 10, 90, 90]);
  });

  it("undo button restores the prior prompt set and re-queries", async () => {
    const controller = startApp(document, "http://svc", { imageLoader: async () => {} });
    await settle();
    const canvas = document.getElementById("canvas") as HTMLCanvasElement;
    mouse(canvas, "mousedown", 100, 100);
    mouse(canvas, "mouseup", 100, 100);
    await settle();
    mouse(canvas, "mousedown", 200, 200);
    mouse(canvas, "mouseup", 200, 200);
    await settle();
    (document.getElementById("undo") as HTMLButtonElement).click();
    await settle();
    expect(segmentBodies.length).toBe(3);
    expect(segmentBodies[2].prompts.points?.length).toBe(1);
    expect(controller.store.state.points.length).toBe(1);
  });
});
