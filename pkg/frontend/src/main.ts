/** Browser entry: canvas, pointer handlers, overlay toggles, score panel.
 *
 * Left-click adds a positive point, right-click (or shift-click) a
 * negative one, dragging more than 3 px draws a box.  Every prompt
 * change re-queries the service; the server is the single source of
 * truth for masks.
 */

import { ApiClient, Branch, SegmentResponseBody } from "./api.js";
import { PromptController } from "./controller.js";
import { LetterboxTransform, canvasToImage, computeLetterbox, imageToCanvas } from "./letterbox.js";
import { OverlayBuffer } from "./overlay.js";

const BRANCHES: Branch[] = ["sam", "hq", "corrected"];

export interface AppOptions {
  /** Resolves when the picked image is displayable; injectable because
   * test DOMs do not load image resources. */
  imageLoader?: (el: HTMLImageElement, url: string) => Promise<void>;
}

function defaultImageLoader(el: HTMLImageElement, url: string): Promise<void> {
  return new Promise((resolve) => {
    el.onload = () => resolve();
    el.onerror = () => resolve();
    el.src = url;
  });
}

export function startApp(root: Document = document, baseUrl = "", opts: AppOptions = {}): PromptController {
  const loadImageEl = opts.imageLoader ?? defaultImageLoader;
  const api = new ApiClient(baseUrl);
  const canvas = root.getElementById("canvas") as HTMLCanvasElement;
  const picker = root.getElementById("image-picker") as HTMLSelectElement;
  const panel = root.getElementById("panel") as HTMLElement;
  const toast = root.getElementById("toast") as HTMLElement;
  const undoButton = root.getElementById("undo") as HTMLButtonElement;
  const ctx = canvas.getContext ? canvas.getContext("2d") : null;
  const image = new Image();
  let transform: LetterboxTransform | null = null;
  let modelSize = 128;

  const controller = new PromptController(api, {
    onUpdate: (overlays, response) => paint(overlays, response),
    onError: (message) => {
      toast.textContent = message;
      toast.classList.add("visible");
      setTimeout(() => toast.classList.remove("visible"), 4000);
    },
  });

  function paint(overlays: Map<Branch, OverlayBuffer>, response: SegmentResponseBody | null): void {
    if (!ctx || !transform) return;
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    const t = transform;
    ctx.drawImage(image, t.offsetX, t.offsetY, modelSize * t.scale, modelSize * t.scale);
    for (const branch of BRANCHES) {
      const buf = overlays.get(branch);
      if (!buf || !controller.store.state.overlays[branch]) continue;
      const off = root.createElement("canvas") as HTMLCanvasElement;
      off.width = buf.width;
      off.height = buf.height;
      const octx = off.getContext("2d");
      if (!octx) continue;
      octx.putImageData(new ImageData(new Uint8ClampedArray(buf.rgba), buf.width, buf.height), 0, 0);
      ctx.imageSmoothingEnabled = false;
      ctx.drawImage(off, t.offsetX, t.offsetY, modelSize * t.scale, modelSize * t.scale);
    }
    for (const p of controller.store.state.points) {
      const c = imageToCanvas(t, p.x, p.y);
      ctx.beginPath();
      ctx.arc(c.x, c.y, 5, 0, Math.PI * 2);
      ctx.fillStyle = p.label === "positive" ? "#2ecc40" : "#ff4136";
      ctx.fill();
      ctx.strokeStyle = "white";
      ctx.stroke();
    }
    const box = controller.store.state.box;
    if (box) {
      const a = imageToCanvas(t, box.x0, box.y0);
      const b = imageToCanvas(t, box.x1, box.y1);
      ctx.strokeStyle = "#ffdc00";
      ctx.lineWidth = 2;
      ctx.strokeRect(a.x, a.y, b.x - a.x, b.y - a.y);
    }
    if (response) {
      const scores = response.iou_scores.map((s) => s.toFixed(3)).join(", ");
      const areas = BRANCHES.filter((b) => response.areas[b] !== undefined)
        .map((b) => `${b}: ${response.areas[b]}px`)
        .join("  ");
      const biou = response.biou_vs_gt === null ? "n/a" : response.biou_vs_gt.toFixed(3);
      panel.textContent = `selected head ${response.selected}  iou [${scores}]  ${areas}  BIoU vs GT: ${biou}`;
    } else {
      panel.textContent = "";
    }
  }

  let dragStart: { x: number; y: number } | null = null;

  canvas.addEventListener("mousedown", (ev: MouseEvent) => {
    const rect = canvas.getBoundingClientRect();
    dragStart = { x: ev.clientX - rect.left, y: ev.clientY - rect.top };
  });

  canvas.addEventListener("mouseup", (ev: MouseEvent) => {
    if (!transform || !dragStart) return;
    const rect = canvas.getBoundingClientRect();
    const end = { x: ev.clientX - rect.left, y: ev.clientY - rect.top };
    const start = dragStart;
    dragStart = null;
    const dist = Math.hypot(end.x - start.x, end.y - start.y);
    const p0 = canvasToImage(transform, start.x, start.y);
    const p1 = canvasToImage(transform, end.x, end.y);
    if (dist > 3 && p0 && p1) {
      void controller.dragBox(p0.x, p0.y, p1.x, p1.y);
      return;
    }
    if (!p1) return;
    const negative = ev.button === 2 || ev.shiftKey;
    void controller.addPoint(p1.x, p1.y, negative ? "negative" : "positive");
  });

  canvas.addEventListener("contextmenu", (ev: Event) => ev.preventDefault());
  undoButton.addEventListener("click", () => void controller.undo());
  for (const branch of BRANCHES) {
    const checkbox = root.getElementById(`toggle-${branch}`) as HTMLInputElement | null;
    checkbox?.addEventListener("change", () => {
      controller.toggleOverlay(branch);
      paint(controller.overlays, controller.store.state.lastResponse);
    });
  }

  picker.addEventListener("change", () => {
    void (async () => {
      await controller.loadImage(picker.value);
      await loadImageEl(image, api.imageUrl(picker.value));
      transform = computeLetterbox(canvas.width, canvas.height, modelSize);
      paint(new Map(), null);
    })();
  });

  void (async () => {
    try {
      const health = await api.health();
      modelSize = health.model_config.image_size;
      const ids = await api.imageIds();
      for (const id of ids) {
        const opt = root.createElement("option") as HTMLOptionElement;
        opt.value = id;
        opt.textContent = id;
        picker.appendChild(opt);
      }
      if (ids.length) {
        picker.value = ids[0];
        picker.dispatchEvent(new Event("change"));
      }
    } catch (err) {
      toast.textContent = `cannot reach service: ${String(err)}`;
      toast.classList.add("visible");
    }
  })();

  return controller;
}

declare global {
  interface Window {
    promptsegController?: PromptController;
  }
}

if (typeof window !== "undefined" && typeof document !== "undefined" && document.getElementById("canvas")) {
  window.promptsegController = startApp();
}
