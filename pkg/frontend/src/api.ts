// Typed client for the pipeline server. Every number the viewer shows is
// fetched through here; the viewer itself never recomputes pipeline math.

export type Transport = (path: string, init?: RequestInit) => Promise<Response>;

export interface PipelineConfig {
  ghost_min_separation: number;
  track_threshold_anchors: [number, number][];
  reid_min_len_anchors: [number, number][];
  rbf_smoothing: number;
  smooth_all_joints: boolean;
  ground_quantile: number;
  ground_bins: number;
  ground_iterations: number;
  cut_threshold: number;
  roi_polygon: [number, number][] | null;
}

export interface StreamMeta {
  magic: string;
  version: number;
  frame_count: number;
  max_persons: number;
  joint_count: number;
  vertex_count: number;
  fps: number;
}

export interface RunStatus {
  state: "idle" | "running" | "failed";
  stage?: string;
  progress?: number;
  message?: string;
  manifest?: unknown;
}

export interface TrackSampleDoc {
  frame: number;
  pelvis: [number, number, number];
  kp3d: number[][];
  kp2d: number[][];
}

export interface TrackDoc {
  id: number;
  provenance: string;
  samples: TrackSampleDoc[];
}

export interface TracksDoc {
  version: number;
  fps: number;
  layout: { joint_count: number; pelvis_index: number; head_index: number };
  tracks: TrackDoc[];
}

export interface FieldError {
  field: string;
  message: string;
}

export type PutConfigResult =
  | { ok: true }
  | { ok: false; errors: FieldError[]; conflict?: boolean };

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
  ) {
    super(message);
  }
}

export class ApiClient {
  constructor(
    private base: string = "",
    private transport: Transport = (path, init) => fetch(path, init),
  ) {}

  private async request(path: string, init?: RequestInit): Promise<Response> {
    return this.transport(this.base + path, init);
  }

  private async json<T>(path: string): Promise<T> {
    const response = await this.request(path);
    if (!response.ok) {
      throw new ApiError(response.status, `${path}: HTTP ${response.status}`);
    }
    return (await response.json()) as T;
  }

  getConfig(): Promise<PipelineConfig> {
    return this.json<PipelineConfig>("/config");
  }

  async putConfig(config: PipelineConfig): Promise<PutConfigResult> {
    const response = await this.request("/config", {
      method: "PUT",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(config),
    });
    if (response.ok) return { ok: true };
    if (response.status === 422) {
      const body = (await response.json()) as { errors: FieldError[] };
      return { ok: false, errors: body.errors };
    }
    if (response.status === 409) {
      return {
        ok: false,
        conflict: true,
        errors: [{ field: "config", message: "a run is in flight; config is locked" }],
      };
    }
    throw new ApiError(response.status, `PUT /config: HTTP ${response.status}`);
  }

  async startRun(): Promise<{ accepted: boolean; message?: string }> {
    const response = await this.request("/run", { method: "POST" });
    if (response.status === 202) return { accepted: true };
    if (response.status === 409) {
      return { accepted: false, message: "a run is already in flight" };
    }
    throw new ApiError(response.status, `POST /run: HTTP ${response.status}`);
  }

  status(): Promise<RunStatus> {
    return this.json<RunStatus>("/status");
  }

  async tracks(): Promise<TracksDoc | null> {
    const response = await this.request("/tracks");
    if (response.status === 404) return null;
    if (!response.ok) throw new ApiError(response.status, `/tracks: HTTP ${response.status}`);
    return (await response.json()) as TracksDoc;
  }

  async streamMeta(): Promise<StreamMeta | null> {
    const response = await this.request("/stream/meta");
    if (response.status === 404) return null;
    if (!response.ok) {
      throw new ApiError(response.status, `/stream/meta: HTTP ${response.status}`);
    }
    return (await response.json()) as StreamMeta;
  }

  async frame(k: number): Promise<ArrayBuffer> {
    const response = await this.request(`/stream/frames/${k}`);
    if (!response.ok) {
      throw new ApiError(response.status, `/stream/frames/${k}: HTTP ${response.status}`);
    }
    return response.arrayBuffer();
  }
}
