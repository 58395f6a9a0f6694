// Thin typed client over the anchor-refinement service. The workbench holds
// no model math of its own: every number displayed comes from these bodies.

export interface TopicTerm {
  term: string;
  weight: number;
  sign: "+" | "-";
  anchor: boolean;
}

export interface FactorTopic {
  id: number;
  anchors: string[];
  empty: boolean;
  terms: TopicTerm[];
}

export interface TopicsPayload {
  generation: number;
  tc_history: number[];
  tc_per_factor: number[];
  converged: boolean;
  iterations_run: number;
  factors: FactorTopic[];
}

export interface StatusPayload {
  status: "idle" | "fitting" | "failed";
  error: string | null;
  generation_requested: number;
  generation_completed: number;
  iterations_run: number | null;
  converged: boolean | null;
}

export interface AnchorEntry {
  term: string;
  factor: number;
  strength?: number;
}

export interface HistorySnapshot {
  generation: number;
  anchors: AnchorEntry[];
  beta: number;
  warm_start: boolean;
  seed: number;
  timestamp: number;
}

export interface SessionInfo {
  session_id: string;
  n_documents: number;
  vocabulary_size: number;
  factors: number;
}

export interface ApiErrorBody {
  code: string;
  message: string;
  details?: unknown;
}

export class ApiError extends Error {
  constructor(public status: number, public body: ApiErrorBody) {
    super(body.message);
  }
}

async function parseError(resp: Response): Promise<never> {
  let body: ApiErrorBody = { code: "unknown", message: resp.statusText };
  try {
    const parsed = await resp.json();
    if (parsed && parsed.error) body = parsed.error;
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new ApiError(resp.status, body);
}

export class Client {
  constructor(private baseUrl: string) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const resp = await fetch(this.baseUrl + path, {
      method,
      headers: body === undefined ? {} : { "content-type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!resp.ok) await parseError(resp);
    if (resp.status === 204) return undefined as T;
    return (await resp.json()) as T;
  }

  createSession(documents: unknown[], config: Record<string, unknown>): Promise<SessionInfo> {
    return this.request("POST", "/sessions", { documents, config });
  }

  vocabulary(sessionId: string): Promise<{ terms: string[] }> {
    return this.request("GET", `/sessions/${sessionId}/vocabulary`);
  }

  startFit(
    sessionId: string,
    anchors: AnchorEntry[],
    warmStart: boolean,
    seed?: number,
  ): Promise<{ accepted: boolean; generation: number }> {
    const body: Record<string, unknown> = { anchors, warm_start: warmStart };
    if (seed !== undefined) body.seed = seed;
    return this.request("POST", `/sessions/${sessionId}/fit`, body);
  }

  status(sessionId: string): Promise<StatusPayload> {
    return this.request("GET", `/sessions/${sessionId}/status`);
  }

  topics(sessionId: string, top = 10): Promise<TopicsPayload> {
    return this.request("GET", `/sessions/${sessionId}/topics?top=${top}`);
  }

  docScores(sessionId: string, docId: string): Promise<{ doc_id: string; scores: number[] }> {
    return this.request("GET", `/sessions/${sessionId}/docs/${encodeURIComponent(docId)}/scores`);
  }

  history(sessionId: string): Promise<{ snapshots: HistorySnapshot[] }> {
    return this.request("GET", `/sessions/${sessionId}/history`);
  }

  deleteSession(sessionId: string): Promise<void> {
    return this.request("DELETE", `/sessions/${sessionId}`);
  }
}
