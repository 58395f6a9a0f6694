// Pending-anchor chip editor with client-side validation against the
// session vocabulary; server 422s land inline next to the offending input.

import type { WorkbenchState } from "./state.js";

export interface AnchorEditorHooks {
  onChange: () => void;
}

export function renderPendingAnchors(
  container: HTMLElement,
  state: WorkbenchState,
  hooks: AnchorEditorHooks,
): void {
  container.replaceChildren();
  for (const anchor of state.pending) {
    const chip = document.createElement("span");
    chip.className = "anchor-chip";
    chip.textContent = `${anchor.term} → ${anchor.factor}`;
    const remove = document.createElement("button");
    remove.type = "button";
    remove.className = "chip-remove";
    remove.setAttribute("aria-label", `remove ${anchor.term}`);
    remove.textContent = "×";
    remove.addEventListener("click", () => {
      state.removePendingAnchor(anchor.term, anchor.factor);
      hooks.onChange();
    });
    chip.appendChild(remove);
    container.appendChild(chip);
  }
}

export function wireAnchorForm(
  form: HTMLFormElement,
  termInput: HTMLInputElement,
  factorInput: HTMLInputElement,
  errorEl: HTMLElement,
  state: WorkbenchState,
  hooks: AnchorEditorHooks,
): void {
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const factor = Number(factorInput.value);
    const result = state.addPendingAnchor(termInput.value, factor);
    if (!result.ok) {
      errorEl.textContent = result.error ?? "invalid anchor";
      return;
    }
    errorEl.textContent = "";
    termInput.value = "";
    hooks.onChange();
  });
}

export function showServerAnchorError(errorEl: HTMLElement, message: string): void {
  errorEl.textContent = message;
}
