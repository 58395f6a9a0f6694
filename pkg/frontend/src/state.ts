// Workbench state: displayed topics always belong to a completed fit
// generation, pending anchor edits live in their own buffer until a refit
// completes, and stale payloads can never overwrite newer ones.

import type { AnchorEntry, FactorTopic, HistorySnapshot, TopicsPayload } from "./api.js";

export interface TopicDiff {
  factor: number;
  entering: string[];
  leaving: string[];
}

export interface AnchorValidation {
  ok: boolean;
  error?: string;
}

export class WorkbenchState {
  sessionId: string | null = null;
  factors = 0;
  vocabulary: Set<string> = new Set();
  displayed: TopicsPayload | null = null;
  previous: TopicsPayload | null = null;
  pending: AnchorEntry[] = [];
  fitting = false;
  history: HistorySnapshot[] = [];

  /** Apply a topics payload; stale generations are rejected. */
  applyTopics(payload: TopicsPayload): boolean {
    if (this.displayed && payload.generation < this.displayed.generation) {
      return false;
    }
    if (this.displayed && payload.generation > this.displayed.generation) {
      this.previous = this.displayed;
    }
    this.displayed = payload;
    return true;
  }

  generation(): number {
    return this.displayed ? this.displayed.generation : 0;
  }

  /** Per-factor terms entering and leaving between the last two generations. */
  diff(): TopicDiff[] {
    if (!this.displayed || !this.previous) return [];
    const before = new Map<number, Set<string>>();
    for (const f of this.previous.factors) {
      before.set(f.id, new Set(f.terms.map((t) => t.term)));
    }
    const diffs: TopicDiff[] = [];
    for (const f of this.displayed.factors) {
      const old = before.get(f.id) ?? new Set<string>();
      const now = new Set(f.terms.map((t) => t.term));
      const entering = [...now].filter((t) => !old.has(t)).sort();
      const leaving = [...old].filter((t) => !now.has(t)).sort();
      if (entering.length || leaving.length) {
        diffs.push({ factor: f.id, entering, leaving });
      }
    }
    return diffs;
  }

  validateAnchor(term: string, factor: number): AnchorValidation {
    const cleaned = term.trim();
    if (!cleaned) return { ok: false, error: "empty term" };
    if (!this.vocabulary.has(cleaned)) {
      return { ok: false, error: `"${cleaned}" is not in the vocabulary` };
    }
    if (!Number.isInteger(factor) || factor < 0 || factor >= this.factors) {
      return { ok: false, error: `factor must be 0..${this.factors - 1}` };
    }
    if (this.pending.some((a) => a.term === cleaned && a.factor === factor)) {
      return { ok: false, error: "already pending" };
    }
    return { ok: true };
  }

  addPendingAnchor(term: string, factor: number, strength?: number): AnchorValidation {
    const check = this.validateAnchor(term, factor);
    if (!check.ok) return check;
    this.pending.push({ term: term.trim(), factor, strength });
    return { ok: true };
  }

  removePendingAnchor(term: string, factor: number): void {
    this.pending = this.pending.filter((a) => !(a.term === term && a.factor === factor));
  }

  /** Restore a history snapshot into the pending buffer (edits, not models). */
  restoreSnapshot(snapshot: HistorySnapshot): void {
    this.pending = snapshot.anchors.map((a) => ({ ...a }));
  }

  /** Anchors of the currently displayed fit, used to pre-seed edits. */
  displayedAnchors(): AnchorEntry[] {
    if (!this.displayed) return [];
    const entries: AnchorEntry[] = [];
    for (const f of this.displayed.factors) {
      for (const term of f.anchors) entries.push({ term, factor: f.id });
    }
    return entries;
  }
}

export function factorLabel(factor: FactorTopic): string {
  const head = factor.terms
    .slice(0, 3)
    .map((t) => t.term)
    .join(", ");
  return `topic ${factor.id}${head ? ": " + head : ""}`;
}
