/** Wires user actions to the service: every prompt change re-queries,
 * a newer action supersedes any in-flight request (latest wins), a
 * failed request is retried once and then rolled back with a toast.
 */

import { ApiClient, Branch, SegmentRequestBody, SegmentResponseBody } from "./api.js";
import { BRANCH_COLORS, OverlayBuffer, maskToOverlay } from "./overlay.js";
import { decodeRle, maskArea } from "./rle.js";
import { SessionStore, normalizeDrag } from "./state.js";

export interface ControllerEvents {
  onUpdate?: (overlays: Map<Branch, OverlayBuffer>, response: SegmentResponseBody) => void;
  onError?: (message: string) => void;
}

const ALL_BRANCHES: Branch[] = ["sam", "hq", "corrected"];

export class PromptController {
  readonly store = new SessionStore();
  readonly requestLog: SegmentRequestBody[] = [];
  overlays = new Map<Branch, OverlayBuffer>();
  private seq = 0;
  private inflight: AbortController | null = null;

  constructor(
    private readonly api: ApiClient,
    private readonly events: ControllerEvents = {},
    readonly imageSize = 128,
  ) {}

  async loadImage(id: string): Promise<void> {
    this.store.apply({ type: "load-image", id });
    this.overlays = new Map();
  }

  async addPoint(x: number, y: number, label: "positive" | "negative"): Promise<void> {
    const changed = this.store.apply({ type: "add-point", x, y, label });
    if (changed) await this.issue(true);
  }

  async dragBox(x0: number, y0: number, x1: number, y1: number): Promise<void> {
    const box = normalizeDrag(x0, y0, x1, y1);
    if (!box) return; // degenerate drag ignored
    const changed = this.store.apply({ type: "set-box", box });
    if (changed) await this.issue(true);
  }

  async undo(): Promise<void> {
    const requery = this.store.apply({ type: "undo" });
    if (requery) {
      await this.issue(false);
    } else {
      this.overlays = new Map();
    }
  }

  toggleOverlay(branch: Branch): void {
    this.store.apply({ type: "toggle-overlay", branch });
  }

  buildRequest(): SegmentRequestBody {
    const s = this.store.state;
    if (!s.imageId) throw new Error("no image loaded");
    const prompts: SegmentRequestBody["prompts"] = {};
    if (s.points.length) prompts.points = s.points.map((p) => ({ ...p }));
    if (s.box) prompts.box = [s.box.x0, s.box.y0, s.box.x1, s.box.y1];
    return { image_id: s.imageId, prompts, return: ALL_BRANCHES };
  }

  /** Issue the query for the current prompt set; rollbackOnFail undoes
   * the optimistic prompt change if both the request and its single
   * retry fail. */
  private async issue(rollbackOnFail: boolean): Promise<void> {
    const mySeq = ++this.seq;
    this.inflight?.abort();
    const aborter = new AbortController();
    this.inflight = aborter;
    const body = this.buildRequest();
    this.requestLog.push(body);

    let response: SegmentResponseBody | null = null;
    let lastError: unknown = null;
    for (let attempt = 0; attempt < 2 && !response; attempt++) {
      try {
        response = await this.api.segment(body, aborter.signal);
      } catch (err) {
        lastError = err;
        if (aborter.signal.aborted) return; // superseded: stay silent
      }
    }
    if (mySeq !== this.seq) return; // a newer request took over
    if (!response) {
      if (rollbackOnFail) this.store.rollback();
      this.events.onError?.(`segmentation request failed: ${String(lastError)}`);
      return;
    }
    this.store.state.lastResponse = response;
    const overlays = new Map<Branch, OverlayBuffer>();
    for (const branch of ALL_BRANCHES) {
      const rle = response.masks[branch];
      if (rle === undefined) continue;
      let decoded;
      try {
        decoded = decodeRle(rle);
      } catch (err) {
        this.events.onError?.(`bad mask payload for ${branch}: ${String(err)}`);
        return;
      }
      if (decoded.width * decoded.height !== this.imageSize * this.imageSize) {
        this.events.onError?.(
          `mask for ${branch} decodes to ${decoded.width}x${decoded.height}, expected ${this.imageSize}`,
        );
        return;
      }
      const area = maskArea(decoded);
      if (response.areas[branch] !== undefined && response.areas[branch] !== area) {
        this.events.onError?.(`area mismatch for ${branch}: ${area} != ${response.areas[branch]}`);
        return;
      }
      overlays.set(branch, maskToOverlay(decoded, BRANCH_COLORS[branch]));
    }
    this.overlays = overlays;
    this.events.onUpdate?.(overlays, response);
  }
}
