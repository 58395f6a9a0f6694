import { describe, expect, it } from "vitest";

import type { TopicsPayload } from "../src/api.js";
import { WorkbenchState } from "../src/state.js";

function payload(generation: number, factors: Record<number, string[]>): TopicsPayload {
  return {
    generation,
    tc_history: [0.1, 0.5],
    tc_per_factor: [0.5],
    converged: true,
    iterations_run: 10,
    factors: Object.entries(factors).map(([id, terms]) => ({
      id: Number(id),
      anchors: [],
      empty: terms.length === 0,
      terms: terms.map((term, k) => ({
        term,
        weight: 1 - k * 0.1,
        sign: "+" as const,
        anchor: false,
      })),
    })),
  };
}

describe("generation monotonicity", () => {
  it("rejects payloads older than the displayed generation", () => {
    const state = new WorkbenchState();
    expect(state.applyTopics(payload(2, { 0: ["a"] }))).toBe(true);
    expect(state.applyTopics(payload(1, { 0: ["stale"] }))).toBe(false);
    expect(state.displayed?.generation).toBe(2);
    expect(state.displayed?.factors[0].terms[0].term).toBe("a");
  });

  it("accepts re-fetches of the same generation", () => {
    const state = new WorkbenchState();
    state.applyTopics(payload(1, { 0: ["a"] }));
    expect(state.applyTopics(payload(1, { 0: ["a"] }))).toBe(true);
  });

  it("keeps the previous generation for diffing", () => {
    const state = new WorkbenchState();
    state.applyTopics(payload(1, { 0: ["a"] }));
    state.applyTopics(payload(2, { 0: ["b"] }));
    expect(state.previous?.generation).toBe(1);
    expect(state.displayed?.generation).toBe(2);
  });
});

describe("topic diff", () => {
  it("is empty without two generations", () => {
    const state = new WorkbenchState();
    state.applyTopics(payload(1, { 0: ["a"] }));
    expect(state.diff()).toEqual([]);
  });

  it("reports entering and leaving terms per factor", () => {
    const state = new WorkbenchState();
    state.applyTopics(payload(1, { 0: ["a", "b"], 1: ["x"] }));
    state.applyTopics(payload(2, { 0: ["b", "c"], 1: ["x"] }));
    expect(state.diff()).toEqual([{ factor: 0, entering: ["c"], leaving: ["a"] }]);
  });

  it("handles a factor gaining its first terms", () => {
    const state = new WorkbenchState();
    state.applyTopics(payload(1, { 0: ["a"], 1: [] }));
    state.applyTopics(payload(2, { 0: ["a"], 1: ["z"] }));
    expect(state.diff()).toEqual([{ factor: 1, entering: ["z"], leaving: [] }]);
  });
});

describe("pending anchors", () => {
  function makeState(): WorkbenchState {
    const state = new WorkbenchState();
    state.factors = 3;
    state.vocabulary = new Set(["god", "jesus", "church"]);
    return state;
  }

  it("validates vocabulary membership", () => {
    const state = makeState();
    const result = state.addPendingAnchor("zeus", 0);
    expect(result.ok).toBe(false);
    expect(result.error).toContain("zeus");
    expect(state.pending).toEqual([]);
  });

  it("validates the factor range", () => {
    const state = makeState();
    expect(state.addPendingAnchor("god", 7).ok).toBe(false);
    expect(state.addPendingAnchor("god", -1).ok).toBe(false);
  });

  it("rejects duplicates but allows multi-factor anchoring", () => {
    const state = makeState();
    expect(state.addPendingAnchor("god", 0).ok).toBe(true);
    expect(state.addPendingAnchor("god", 0).ok).toBe(false);
    expect(state.addPendingAnchor("god", 1).ok).toBe(true);
  });

  it("removes chips", () => {
    const state = makeState();
    state.addPendingAnchor("god", 0);
    state.addPendingAnchor("jesus", 0);
    state.removePendingAnchor("god", 0);
    expect(state.pending).toEqual([{ term: "jesus", factor: 0, strength: undefined }]);
  });

  it("restores a snapshot into the pending buffer", () => {
    const state = makeState();
    state.addPendingAnchor("church", 2);
    state.restoreSnapshot({
      generation: 1,
      anchors: [{ term: "god", factor: 0 }, { term: "jesus", factor: 0 }],
      beta: 1,
      warm_start: false,
      seed: 3,
      timestamp: 0,
    });
    expect(state.pending).toEqual([
      { term: "god", factor: 0 },
      { term: "jesus", factor: 0 },
    ]);
  });
});
