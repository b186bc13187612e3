/** Typed client for the search service HTTP API. */

export interface Hit {
  id: string;
  score: number;
  text?: string;
}

export interface SearchResponse {
  hits: Hit[];
  latency_ms: number;
  backend: string;
  workers: number;
}

export interface HealthResponse {
  status: string;
  count: number;
  dim: number;
  backends: string[];
}

export interface BackendStats {
  queries: number;
  mean_latency_ms: number;
}

export interface StatsResponse {
  backends: Record<string, BackendStats>;
}

export interface SearchParams {
  query: string | number[];
  topk?: number;
  backend?: string;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    detail: string,
  ) {
    super(detail);
    this.name = "ApiError";
  }
}

async function parseDetail(resp: Response): Promise<string> {
  try {
    const doc = await resp.json();
    if (doc && typeof doc.detail === "string") return doc.detail;
    return JSON.stringify(doc);
  } catch {
    return `${resp.status} ${resp.statusText}`;
  }
}

export class ApiClient {
  constructor(
    private readonly baseUrl = "",
    private readonly fetchFn: typeof fetch = (...args) => fetch(...args),
  ) {}

  async search(params: SearchParams): Promise<SearchResponse> {
    const resp = await this.fetchFn(`${this.baseUrl}/search`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(params),
    });
    if (!resp.ok) throw new ApiError(resp.status, await parseDetail(resp));
    return (await resp.json()) as SearchResponse;
  }

  async health(): Promise<HealthResponse> {
    const resp = await this.fetchFn(`${this.baseUrl}/health`);
    if (!resp.ok) throw new ApiError(resp.status, await parseDetail(resp));
    return (await resp.json()) as HealthResponse;
  }

  async stats(): Promise<StatsResponse> {
    const resp = await this.fetchFn(`${this.baseUrl}/stats`);
    if (!resp.ok) throw new ApiError(resp.status, await parseDetail(resp));
    return (await resp.json()) as StatsResponse;
  }
}
