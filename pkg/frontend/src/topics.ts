// Topic panel rendering: one card per factor, anchors first and starred,
// weight bars scaled within the card, +/- signs, and diff highlights for
// terms that entered or left in the latest refit.

import type { TopicsPayload } from "./api.js";
import type { TopicDiff } from "./state.js";

export function renderTopics(
  container: HTMLElement,
  payload: TopicsPayload,
  diffs: TopicDiff[] = [],
): void {
  container.replaceChildren();
  const diffByFactor = new Map(diffs.map((d) => [d.factor, d]));

  if (payload.factors.length === 0) {
    const empty = document.createElement("p");
    empty.className = "empty-state";
    empty.textContent = "No factors in this model.";
    container.appendChild(empty);
    return;
  }

  for (const factor of payload.factors) {
    const card = document.createElement("section");
    card.className = "topic-card";
    card.dataset.factor = String(factor.id);

    const heading = document.createElement("h3");
    heading.textContent = `topic ${factor.id}`;
    if (factor.anchors.length) {
      const badge = document.createElement("span");
      badge.className = "anchored-badge";
      badge.textContent = "anchored";
      heading.appendChild(badge);
    }
    card.appendChild(heading);

    if (factor.empty) {
      const badge = document.createElement("p");
      badge.className = "empty-badge";
      badge.textContent = "empty topic";
      card.appendChild(badge);
    }

    const diff = diffByFactor.get(factor.id);
    const maxWeight = Math.max(...factor.terms.map((t) => t.weight), 1e-12);
    const list = document.createElement("ul");
    list.className = "term-list";

    const ordered = [...factor.terms].sort(
      (a, b) => Number(b.anchor) - Number(a.anchor) || b.weight - a.weight,
    );
    for (const term of ordered) {
      const item = document.createElement("li");
      item.className = "term" + (term.anchor ? " anchor" : "");
      if (diff?.entering.includes(term.term)) item.classList.add("entering");

      const label = document.createElement("span");
      label.className = "term-label";
      label.textContent = term.term + (term.anchor ? "*" : "");
      const sign = document.createElement("span");
      sign.className = "term-sign " + (term.sign === "+" ? "pos" : "neg");
      sign.textContent = term.sign;
      const bar = document.createElement("span");
      bar.className = "weight-bar";
      bar.style.width = `${Math.max(2, (100 * term.weight) / maxWeight)}px`;
      bar.title = term.weight.toFixed(4);

      item.append(sign, label, bar);
      list.appendChild(item);
    }
    card.appendChild(list);

    if (diff && diff.leaving.length) {
      const gone = document.createElement("p");
      gone.className = "leaving";
      gone.textContent = "left: " + diff.leaving.join(", ");
      card.appendChild(gone);
    }
    container.appendChild(card);
  }
}

export function renderSparkline(el: HTMLElement, values: number[]): void {
  el.replaceChildren();
  if (values.length < 2) return;
  const w = 220;
  const h = 48;
  const min = Math.min(...values);
  const max = Math.max(...values);
  const span = max - min || 1;
  const points = values
    .map((v, k) => {
      const x = (k / (values.length - 1)) * (w - 4) + 2;
      const y = h - 4 - ((v - min) / span) * (h - 8);
      return `${x.toFixed(1)},${y.toFixed(1)}`;
    })
    .join(" ");
  const svg = document.createElementNS("http://www.w3.org/2000/svg", "svg");
  svg.setAttribute("viewBox", `0 0 ${w} ${h}`);
  svg.setAttribute("class", "sparkline");
  const line = document.createElementNS("http://www.w3.org/2000/svg", "polyline");
  line.setAttribute("points", points);
  line.setAttribute("fill", "none");
  line.setAttribute("stroke", "#4878a8");
  line.setAttribute("stroke-width", "1.5");
  svg.appendChild(line);
  const caption = document.createElement("span");
  caption.className = "sparkline-caption";
  caption.textContent = `objective ${values[values.length - 1].toFixed(4)} nats`;
  el.append(svg, caption);
}
