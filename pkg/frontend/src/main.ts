// Workbench wiring: session creation, topic panel, pending anchors, refits
// with status polling, history timeline. Talks only to the documented
// service endpoints.

import { ApiError, Client } from "./api.js";
import { renderPendingAnchors, showServerAnchorError, wireAnchorForm } from "./anchors.js";
import { renderHistory } from "./history.js";
import { pollUntilGeneration } from "./poll.js";
import { WorkbenchState } from "./state.js";
import { renderSparkline, renderTopics } from "./topics.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const params = new URLSearchParams(location.search);
const apiBase = params.get("api") ?? "http://127.0.0.1:8765";
const client = new Client(apiBase);
const state = new WorkbenchState();

const statusBadge = el<HTMLSpanElement>("status-badge");
const topicPanel = el<HTMLDivElement>("topic-panel");
const sparkline = el<HTMLDivElement>("sparkline");
const historyPanel = el<HTMLDivElement>("history-panel");
const pendingPanel = el<HTMLDivElement>("pending-anchors");
const anchorError = el<HTMLSpanElement>("anchor-error");
const refitButton = el<HTMLButtonElement>("refit-button");
const warmToggle = el<HTMLInputElement>("warm-toggle");
const sessionForm = el<HTMLFormElement>("session-form");
const corpusInput = el<HTMLTextAreaElement>("corpus-input");
const factorsInput = el<HTMLInputElement>("factors-input");
const sessionInfo = el<HTMLSpanElement>("session-info");

function setStatus(text: string, kind: "idle" | "fitting" | "failed"): void {
  statusBadge.textContent = text;
  statusBadge.className = `status ${kind}`;
}

function refreshPending(): void {
  renderPendingAnchors(pendingPanel, state, { onChange: refreshPending });
  refitButton.disabled = state.fitting || state.sessionId === null;
}

function refreshTopics(): void {
  if (state.displayed) {
    renderTopics(topicPanel, state.displayed, state.diff());
    renderSparkline(sparkline, state.displayed.tc_history);
  }
}

async function refreshHistory(): Promise<void> {
  if (!state.sessionId) return;
  const { snapshots } = await client.history(state.sessionId);
  state.history = snapshots;
  renderHistory(historyPanel, snapshots, (snap) => {
    state.restoreSnapshot(snap);
    refreshPending();
  });
}

wireAnchorForm(
  el<HTMLFormElement>("anchor-form"),
  el<HTMLInputElement>("anchor-term"),
  el<HTMLInputElement>("anchor-factor"),
  anchorError,
  state,
  { onChange: refreshPending },
);

sessionForm.addEventListener("submit", async (event) => {
  event.preventDefault();
  const lines = corpusInput.value.split("\n").filter((ln) => ln.trim());
  let documents: unknown[];
  try {
    documents = lines.map((ln) => JSON.parse(ln));
  } catch (err) {
    sessionInfo.textContent = `corpus is not valid JSONL: ${err}`;
    return;
  }
  try {
    const info = await client.createSession(documents, {
      factors: Number(factorsInput.value) || 8,
      vocabulary: { min_token_length: 1 },
    });
    state.sessionId = info.session_id;
    state.factors = info.factors;
    const vocab = await client.vocabulary(info.session_id);
    state.vocabulary = new Set(vocab.terms);
    sessionInfo.textContent =
      `session ${info.session_id.slice(0, 8)}… · ${info.n_documents} docs · ` +
      `${info.vocabulary_size} terms · ${info.factors} factors`;
    setStatus("idle", "idle");
    refreshPending();
  } catch (err) {
    sessionInfo.textContent = err instanceof ApiError ? err.body.message : String(err);
  }
});

refitButton.addEventListener("click", async () => {
  if (!state.sessionId || state.fitting) return;
  state.fitting = true;
  refreshPending();
  setStatus("fitting…", "fitting");
  try {
    const job = await client.startFit(state.sessionId, state.pending, warmToggle.checked);
    await pollUntilGeneration(client, state.sessionId, job.generation);
    const topics = await client.topics(state.sessionId, 10);
    if (state.applyTopics(topics)) {
      refreshTopics();
    }
    setStatus(`generation ${state.generation()}`, "idle");
    await refreshHistory();
  } catch (err) {
    if (err instanceof ApiError && err.status === 422) {
      showServerAnchorError(anchorError, err.body.message);
      setStatus("idle", "idle");
    } else {
      setStatus(err instanceof Error ? err.message : String(err), "failed");
    }
  } finally {
    state.fitting = false;
    refreshPending();
  }
});

refreshPending();
setStatus("no session", "idle");
