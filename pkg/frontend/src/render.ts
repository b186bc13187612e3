import type { SearchResponse } from "./api";
import type { PanelState } from "./panel";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderLatencyBadge(results: SearchResponse): HTMLElement {
  const badge = el("span", "latency-badge");
  badge.textContent = `${results.latency_ms.toFixed(2)} ms · ${results.backend} · ${results.workers}w`;
  return badge;
}

/** Hits are rendered strictly in API order; the UI never re-sorts them. */
export function renderResults(results: SearchResponse): HTMLTableElement {
  const table = el("table", "results");
  const head = table.createTHead().insertRow();
  for (const label of ["rank", "score", "id", "text"]) {
    head.appendChild(el("th", undefined, label));
  }
  const body = table.createTBody();
  results.hits.forEach((hit, i) => {
    const row = body.insertRow();
    row.insertCell().textContent = String(i + 1);
    row.insertCell().textContent = hit.score.toFixed(6);
    row.insertCell().textContent = hit.id;
    row.insertCell().textContent = hit.text ?? "";
  });
  return table;
}

export function renderError(message: string, onRetry: () => void): HTMLElement {
  const banner = el("div", "error-banner");
  banner.appendChild(el("span", undefined, message));
  const retry = el("button", "retry", "retry");
  retry.addEventListener("click", onRetry);
  banner.appendChild(retry);
  return banner;
}

export function renderPanel(
  container: HTMLElement,
  state: PanelState,
  onRetry: () => void,
): void {
  container.replaceChildren();
  container.appendChild(el("h3", undefined, state.backend));
  if (state.error) {
    container.appendChild(renderError(state.error, onRetry));
  }
  if (state.loading) {
    container.appendChild(el("p", "loading", "searching..."));
  }
  if (state.results) {
    container.appendChild(renderLatencyBadge(state.results));
    container.appendChild(renderResults(state.results));
  }
}

export function renderOverlap(container: HTMLElement, overlap: number | null): void {
  container.replaceChildren();
  if (overlap === null) return;
  container.appendChild(
    el("span", "overlap", `top-10 overlap: ${(overlap * 100).toFixed(0)}%`),
  );
}
