/** Session state: prompts, overlay toggles, response, undo history.
 *
 * State transitions happen only through `apply(action)`; every action
 * is appended to an action log, so replaying the log against a fresh
 * store reproduces the exact same prompt snapshots (and therefore the
 * same request sequence).
 */

import type { Branch, BoxPrompt, PointPrompt, SegmentResponseBody } from "./api.js";

export const MAX_UNDO = 50;

export interface PromptSnapshot {
  imageId: string | null;
  points: PointPrompt[];
  box: BoxPrompt | null;
}

export interface SessionState extends PromptSnapshot {
  overlays: Record<Branch, boolean>;
  lastResponse: SegmentResponseBody | null;
}

export type UserAction =
  | { type: "load-image"; id: string }
  | { type: "add-point"; x: number; y: number; label: "positive" | "negative" }
  | { type: "set-box"; box: BoxPrompt }
  | { type: "clear-prompts" }
  | { type: "toggle-overlay"; branch: Branch }
  | { type: "undo" };

function snapshotOf(state: SessionState): PromptSnapshot {
  return {
    imageId: state.imageId,
    points: state.points.map((p) => ({ ...p })),
    box: state.box ? { ...state.box } : null,
  };
}

export class SessionStore {
  state: SessionState = {
    imageId: null,
    points: [],
    box: null,
    overlays: { sam: false, hq: false, corrected: true },
    lastResponse: null,
  };
  readonly actionLog: UserAction[] = [];
  private history: PromptSnapshot[] = [];

  get undoDepth(): number {
    return this.history.length;
  }

  /** Returns true when the action changed the prompt set (a re-query is due). */
  apply(action: UserAction): boolean {
    this.actionLog.push(action);
    switch (action.type) {
      case "load-image":
        this.pushHistory();
        this.state.imageId = action.id;
        this.state.points = [];
        this.state.box = null;
        this.state.lastResponse = null;
        return false; // nothing to query until a prompt exists
      case "add-point":
        this.pushHistory();
        this.state.points = [...this.state.points, { x: action.x, y: action.y, label: action.label }];
        return true;
      case "set-box":
        this.pushHistory();
        this.state.box = { ...action.box };
        return true;
      case "clear-prompts":
        this.pushHistory();
        this.state.points = [];
        this.state.box = null;
        return false;
      case "toggle-overlay":
        this.state.overlays = {
          ...this.state.overlays,
          [action.branch]: !this.state.overlays[action.branch],
        };
        return false;
      case "undo": {
        const prev = this.history.pop();
        if (!prev) return false;
        this.state.imageId = prev.imageId;
        this.state.points = prev.points.map((p) => ({ ...p }));
        this.state.box = prev.box ? { ...prev.box } : null;
        return this.hasPrompts();
      }
    }
  }

  /** Drop the latest prompt change without logging (failed-request rollback). */
  rollback(): void {
    const prev = this.history.pop();
    if (!prev) return;
    this.state.imageId = prev.imageId;
    this.state.points = prev.points.map((p) => ({ ...p }));
    this.state.box = prev.box ? { ...prev.box } : null;
  }

  hasPrompts(): boolean {
    return this.state.points.length > 0 || this.state.box !== null;
  }

  promptSnapshot(): PromptSnapshot {
    return snapshotOf(this.state);
  }

  private pushHistory(): void {
    this.history.push(snapshotOf(this.state));
    if (this.history.length > MAX_UNDO) this.history.shift();
  }
}

/** Normalize a drag into an ordered box; returns null for degenerate drags. */
export function normalizeDrag(
  x0: number,
  y0: number,
  x1: number,
  y1: number,
  minDragPx = 3,
): BoxPrompt | null {
  if (Math.hypot(x1 - x0, y1 - y0) <= minDragPx) return null;
  const box = {
    x0: Math.min(x0, x1),
    y0: Math.min(y0, y1),
    x1: Math.max(x0, x1),
    y1: Math.max(y0, y1),
  };
  if (box.x1 - box.x0 < 1 || box.y1 - box.y0 < 1) return null;
  return box;
}
