// Anchor-history timeline. Restoring a snapshot copies its anchor set into
// the pending-edit buffer; it never touches fitted models.

import type { HistorySnapshot } from "./api.js";

export function renderHistory(
  container: HTMLElement,
  snapshots: HistorySnapshot[],
  onRestore: (snapshot: HistorySnapshot) => void,
): void {
  container.replaceChildren();
  if (snapshots.length === 0) {
    container.hidden = true;
    return;
  }
  container.hidden = false;
  const list = document.createElement("ol");
  list.className = "history-list";
  for (const snap of snapshots) {
    const item = document.createElement("li");
    const when = new Date(snap.timestamp * 1000).toLocaleTimeString();
    const anchors =
      snap.anchors.map((a) => `${a.term}:${a.factor}`).join(", ") || "(no anchors)";
    const text = document.createElement("span");
    text.textContent =
      `gen ${snap.generation} · ${anchors} · seed ${snap.seed}` +
      (snap.warm_start ? " · warm" : " · cold") +
      ` · ${when}`;
    const restore = document.createElement("button");
    restore.type = "button";
    restore.textContent = "restore";
    restore.addEventListener("click", () => onRestore(snap));
    item.append(text, restore);
    list.appendChild(item);
  }
  container.appendChild(list);
}
