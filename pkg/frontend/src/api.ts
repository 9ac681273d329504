/** Typed client for the session HTTP/JSON API. */

export interface FramePoint {
  id: number;
  x: number;
  y: number;
  predicted_class: number;
  probability: number;
  correct: boolean;
}

export interface Frame {
  mode: string;
  x_extent: [number, number];
  y_extent: [number, number];
  points: FramePoint[];
  meta: Record<string, unknown>;
}

export interface Density {
  cols: number;
  rows: number;
  counts: number[][];
  x_extent: [number, number];
  y_extent: [number, number];
  subset: string;
}

export interface Perf {
  accuracy_test: number;
  auc_weighted_test: number;
  accuracy_cv: number;
}

export interface PerfPanel {
  current: Perf;
  initial_auto: Perf;
  members: number[];
  initial_members: number[];
  member_specs: string[];
  cv_folds: number;
}

export interface FrameResponse {
  revision: number;
  frame: Frame;
  density: Density;
  density_errors: Density;
  perf_panel: PerfPanel;
}

export interface ModelPoint {
  model_id: number;
  spec_id: string;
  x: number;
  y: number;
  is_member: boolean;
}

export interface ModelSpaceResponse {
  revision: number;
  axis_x: string;
  axis_y: string;
  available: boolean;
  reason: string;
  points: ModelPoint[];
}

export interface SelectionResponse {
  revision: number;
  selection_size: number;
  selected_ids: number[];
  effective_size: number;
  errors_filter: boolean;
  empty_effective: boolean;
  local_accuracies: number[] | null;
  ensemble_local_accuracy?: number;
}

export interface ToggleResponse {
  revision: number;
  applied: boolean;
  model_id: number;
  action: "add" | "remove";
  guard: { mode: string; ok: boolean; delta: number };
  members: number[];
  perf: Perf;
}

export interface SessionInfo {
  session_id: string;
  revision: number;
  members: number[];
  perf: Perf;
  layout_mode: string;
  axis_x: string;
  axis_y: string;
}

export interface LibraryInfo {
  classes: string[];
  n_test: number;
  n_train: number;
  n_folds: number;
  n_models: number;
  attributes: Array<{ name: string; kind: string }>;
  metric_names: string[];
  models: Array<{ model_id: number; spec_id: string }>;
}

export interface RawRow {
  id: number;
  label: string;
  values: Record<string, string | number>;
}

export class ApiError extends Error {
  constructor(readonly status: number, detail: string) {
    super(detail);
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly base: string = "",
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method, headers: {} };
    if (body !== undefined) {
      init.headers = { "Content-Type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const resp = await this.fetchImpl(this.base + path, init);
    if (!resp.ok) {
      let detail = `${resp.status}`;
      try {
        const parsed = await resp.json();
        detail = parsed.detail ?? detail;
      } catch {
        /* non-JSON error body */
      }
      throw new ApiError(resp.status, detail);
    }
    return (await resp.json()) as T;
  }

  libraryInfo(): Promise<LibraryInfo> {
    return this.request("GET", "/library");
  }

  libraryRows(ids: number[]): Promise<{ rows: RawRow[] }> {
    return this.request("GET", `/library/rows?ids=${ids.join(",")}`);
  }

  createSession(params: Record<string, unknown> = {}): Promise<SessionInfo> {
    return this.request("POST", "/sessions", params);
  }

  frame(sid: string, mode?: string): Promise<FrameResponse> {
    const q = mode ? `?mode=${encodeURIComponent(mode)}` : "";
    return this.request("GET", `/sessions/${sid}/frame${q}`);
  }

  selectRect(sid: string, rect: { x0: number; x1: number; y0: number; y1: number }):
      Promise<SelectionResponse> {
    return this.request("POST", `/sessions/${sid}/selection`, { rect });
  }

  selectIds(sid: string, ids: number[]): Promise<SelectionResponse> {
    return this.request("POST", `/sessions/${sid}/selection`, { ids });
  }

  toggle(sid: string, modelId: number): Promise<ToggleResponse> {
    return this.request("POST", `/sessions/${sid}/models/${modelId}/toggle`);
  }

  errorsFilter(sid: string, on: boolean): Promise<SelectionResponse> {
    return this.request("POST", `/sessions/${sid}/errors-filter`, { on });
  }

  modelSpace(sid: string, x: string, y: string): Promise<ModelSpaceResponse> {
    return this.request(
      "GET",
      `/sessions/${sid}/model-space?x=${encodeURIComponent(x)}&y=${encodeURIComponent(y)}`,
    );
  }

  cv(sid: string): Promise<{ revision: number; folds: number; accuracy_cv: number }> {
    return this.request("POST", `/sessions/${sid}/cv`);
  }

  reset(sid: string): Promise<{ revision: number; members: number[]; perf: Perf }> {
    return this.request("POST", `/sessions/${sid}/reset`);
  }

  perf(sid: string): Promise<PerfPanel & { revision: number }> {
    return this.request("GET", `/sessions/${sid}/perf`);
  }
}

/** Resolve the API base url from the page's ?api=... query parameter. */
export function apiBaseFromLocation(search: string): string {
  const params = new URLSearchParams(search);
  const base = params.get("api") ?? "";
  return base.endsWith("/") ? base.slice(0, -1) : base;
}
