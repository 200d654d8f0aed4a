import { describe, expect, it } from "vitest";

import { MAX_UNDO, SessionStore, normalizeDrag } from "../src/state.js";

describe("SessionStore", () => {
  it("undo restores the exact prior prompt set", () => {
    const store = new SessionStore();
    store.apply({ type: "load-image", id: "scene_00000" });
    store.apply({ type: "add-point", x: 10, y: 12, label: "positive" });
    const snapshot = store.promptSnapshot();
    store.apply({ type: "add-point", x: 50, y: 60, label: "negative" });
    store.apply({ type: "undo" });
    expect(store.promptSnapshot()).toEqual(snapshot);
  });

  it("supports at least 20 undo levels", () => {
    const store = new SessionStore();
    store.apply({ type: "load-image", id: "img" });
    for (let i = 0; i < 25; i++) {
      store.apply({ type: "add-point", x: i, y: i, label: "positive" });
    }
    expect(MAX_UNDO).toBeGreaterThanOrEqual(20);
    for (let i = 0; i < 20; i++) store.apply({ type: "undo" });
    expect(store.state.points.length).toBe(5);
  });

  it("replaying the action log reproduces the same prompt snapshots", () => {
    const store = new SessionStore();
    const actions = [
      { type: "load-image", id: "a" } as const,
      { type: "add-point", x: 1, y: 2, label: "positive" } as const,
      { type: "set-box", box: { x0: 5, y0: 6, x1: 30, y1: 40 } } as const,
      { type: "add-point", x: 7, y: 8, label: "negative" } as const,
      { type: "undo" } as const,
    ];
    const snapshots: unknown[] = [];
    for (const a of actions) {
      store.apply(a);
      snapshots.push(store.promptSnapshot());
    }
    const replay = new SessionStore();
    const replaySnapshots: unknown[] = [];
    for (const a of store.actionLog) {
      replay.apply(a);
      replaySnapshots.push(replay.promptSnapshot());
    }
    expect(replaySnapshots).toEqual(snapshots);
  });

  it("box replaces any prior box", () => {
    const store = new SessionStore();
    store.apply({ type: "load-image", id: "a" });
    store.apply({ type: "set-box", box: { x0: 1, y0: 1, x1: 10, y1: 10 } });
    store.apply({ type: "set-box", box: { x0: 2, y0: 3, x1: 20, y1: 30 } });
    expect(store.state.box).toEqual({ x0: 2, y0: 3, x1: 20, y1: 30 });
  });

  it("rollback drops the latest prompt change without logging", () => {
    const store = new SessionStore();
    store.apply({ type: "load-image", id: "a" });
    store.apply({ type: "add-point", x: 1, y: 1, label: "positive" });
    const logLength = store.actionLog.length;
    store.rollback();
    expect(store.state.points.length).toBe(0);
    expect(store.actionLog.length).toBe(logLength);
  });
});

describe("normalizeDrag", () => {
  it("orders corners regardless of drag direction", () => {
    expect(normalizeDrag(90, 90, 10, 10)).toEqual({ x0: 10, y0: 10, x1: 90, y1: 90 });
  });

  it("ignores degenerate drags", () => {
    expect(normalizeDrag(50, 50, 51, 52)).toBeNull();
    expect(normalizeDrag(50, 50, 50, 50)).toBeNull();
  });
});
