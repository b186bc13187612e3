import type { ApiClient, SearchResponse } from "./api";

export interface PanelState {
  backend: string;
  results: SearchResponse | null;
  error: string | null;
  loading: boolean;
}

/**
 * One search panel: a backend selection plus the latest response for it.
 *
 * A panel keeps at most one request in flight conceptually; late responses
 * from superseded submissions are discarded by sequence number, so rapid
 * resubmission can never paint stale hits over newer ones.
 */
export class SearchPanel {
  private seq = 0;
  state: PanelState;

  constructor(
    private readonly api: ApiClient,
    backend: string,
    private readonly onChange: (state: PanelState) => void = () => {},
  ) {
    this.state = { backend, results: null, error: null, loading: false };
  }

  setBackend(backend: string): void {
    this.update({ backend });
  }

  private update(patch: Partial<PanelState>): void {
    this.state = { ...this.state, ...patch };
    this.onChange(this.state);
  }

  async submit(query: string, topk: number): Promise<void> {
    if (!query.trim()) {
      this.update({ error: "query must not be empty" });
      return;
    }
    const ticket = ++this.seq;
    this.update({ loading: true, error: null });
    try {
      const results = await this.api.search({
        query,
        topk,
        backend: this.state.backend,
      });
      if (ticket !== this.seq) return; // superseded while in flight
      this.update({ results, loading: false });
    } catch (err) {
      if (ticket !== this.seq) return;
      this.update({
        error: err instanceof Error ? err.message : String(err),
        loading: false,
      });
    }
  }
}
