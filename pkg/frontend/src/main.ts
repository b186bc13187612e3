import { ApiClient } from "./api";
import { SearchPanel } from "./panel";
import { renderOverlap, renderPanel } from "./render";
import { topOverlap } from "./overlap";
import "./style.css";

const api = new ApiClient();

function must<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

const queryInput = must<HTMLInputElement>("query");
const topkInput = must<HTMLInputElement>("topk");
const compareToggle = must<HTMLInputElement>("compare");
const leftBackend = must<HTMLSelectElement>("backend-left");
const rightBackend = must<HTMLSelectElement>("backend-right");
const leftContainer = must<HTMLElement>("panel-left");
const rightContainer = must<HTMLElement>("panel-right");
const overlapContainer = must<HTMLElement>("overlap");
const healthLine = must<HTMLElement>("health");
const form = must<HTMLFormElement>("search-form");

const left = new SearchPanel(api, "exact", (state) =>
  renderPanel(leftContainer, state, resubmit),
);
const right = new SearchPanel(api, "pq", (state) =>
  renderPanel(rightContainer, state, resubmit),
);

function refreshOverlap(): void {
  const a = left.state.results;
  const b = right.state.results;
  const comparing = compareToggle.checked;
  renderOverlap(overlapContainer, comparing && a && b ? topOverlap(a.hits, b.hits) : null);
}

async function resubmit(): Promise<void> {
  const query = queryInput.value;
  const topk = Math.max(1, Number(topkInput.value) || 10);
  const jobs = [left.submit(query, topk)];
  if (compareToggle.checked) jobs.push(right.submit(query, topk));
  await Promise.all(jobs);
  refreshOverlap();
}

form.addEventListener("submit", (event) => {
  event.preventDefault();
  void resubmit();
});

leftBackend.addEventListener("change", () => left.setBackend(leftBackend.value));
rightBackend.addEventListener("change", () => right.setBackend(rightBackend.value));
compareToggle.addEventListener("change", () => {
  rightContainer.hidden = !compareToggle.checked;
  rightBackend.disabled = !compareToggle.checked;
  refreshOverlap();
});

async function loadHealth(): Promise<void> {
  try {
    const health = await api.health();
    healthLine.textContent = `${health.count} passages · dim ${health.dim} · backends: ${health.backends.join(", ")}`;
    for (const select of [leftBackend, rightBackend]) {
      select.replaceChildren();
      for (const backend of health.backends) {
        const option = document.createElement("option");
        option.value = backend;
        option.textContent = backend;
        select.appendChild(option);
      }
    }
    leftBackend.value = health.backends.includes("exact")
      ? "exact"
      : health.backends[0];
    left.setBackend(leftBackend.value);
    const alt = health.backends.find((b) => b !== leftBackend.value);
    if (alt) {
      rightBackend.value = alt;
      right.setBackend(alt);
    }
  } catch (err) {
    healthLine.textContent = `service unreachable: ${err instanceof Error ? err.message : err}`;
  }
}

rightContainer.hidden = !compareToggle.checked;
rightBackend.disabled = !compareToggle.checked;
void loadHealth();
