// Poll the fit status until the completed generation reaches a target.
// Returns the final status; throws when the fit fails or the budget runs out.

import type { Client, StatusPayload } from "./api.js";

const sleep = (ms: number) => new Promise<void>((resolve) => setTimeout(resolve, ms));

export async function pollUntilGeneration(
  client: Client,
  sessionId: string,
  targetGeneration: number,
  intervalMs = 250,
  timeoutMs = 120_000,
): Promise<StatusPayload> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    const status = await client.status(sessionId);
    if (status.status === "failed") {
      throw new Error(`fit failed: ${status.error ?? "unknown error"}`);
    }
    if (status.generation_completed >= targetGeneration && status.status === "idle") {
      return status;
    }
    await sleep(intervalMs);
  }
  throw new Error(`fit did not reach generation ${targetGeneration} in time`);
}
