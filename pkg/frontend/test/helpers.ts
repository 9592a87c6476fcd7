// Test doubles: a binary stream encoder mirroring the documented format
// and an in-memory mock of the pipeline server with byte accounting.

import type {
  PipelineConfig,
  StreamMeta,
  TracksDoc,
  Transport,
} from "../src/api.js";

export function defaultConfig(): PipelineConfig {
  return {
    ghost_min_separation: 0.4,
    track_threshold_anchors: [
      [30, 0.5],
      [100, 0.3],
    ],
    reid_min_len_anchors: [
      [25, 10],
      [100, 30],
    ],
    rbf_smoothing: 1e-3,
    smooth_all_joints: false,
    ground_quantile: 0.05,
    ground_bins: 50,
    ground_iterations: 3,
    cut_threshold: 0.3,
    roi_polygon: null,
  };
}

export interface EncodedStream {
  buffer: ArrayBuffer;
  offsets: number[]; // absolute byte offset of each frame payload
  meta: StreamMeta;
}

export interface FrameSpec {
  id: number;
  joints: number[]; // joint_count * 3
}

/** Encode frames into the stream binary (header, u64 seek index, payloads). */
export function encodeStream(fps: number, jointCount: number, frames: FrameSpec[][]): EncodedStream {
  const perPerson = 4 + jointCount * 12;
  const payloadSizes = frames.map((people) => 4 + people.length * perPerson);
  const headerSize = 32;
  const indexSize = 8 * frames.length;
  const total = headerSize + indexSize + payloadSizes.reduce((a, b) => a + b, 0);
  const buffer = new ArrayBuffer(total);
  const view = new DataView(buffer);
  const magic = "STGTRKS\0";
  for (let i = 0; i < 8; i++) view.setUint8(i, magic.charCodeAt(i));
  view.setUint32(8, 1, true); // version
  view.setUint32(12, frames.length, true);
  view.setUint32(16, Math.max(0, ...frames.map((f) => f.length)), true);
  view.setUint32(20, jointCount, true);
  view.setUint32(24, 0, true); // vertex_count
  view.setFloat32(28, fps, true);

  const offsets: number[] = [];
  let pos = headerSize + indexSize;
  frames.forEach((_, k) => {
    view.setBigUint64(headerSize + 8 * k, BigInt(pos), true);
    offsets.push(pos);
    pos += payloadSizes[k];
  });

  frames.forEach((people, k) => {
    let p = offsets[k];
    view.setUint32(p, people.length, true);
    p += 4;
    for (const person of people) {
      view.setInt32(p, person.id, true);
      p += 4;
      for (const value of person.joints) {
        view.setFloat32(p, value, true);
        p += 4;
      }
    }
  });

  return {
    buffer,
    offsets,
    meta: {
      magic: "STGTRKS",
      version: 1,
      frame_count: frames.length,
      max_persons: Math.max(0, ...frames.map((f) => f.length)),
      joint_count: jointCount,
      vertex_count: 0,
      fps,
    },
  };
}

/** A steadily moving synthetic scene: `persons` people, `jointCount` joints. */
export function syntheticStream(frameCount: number, persons = 2, jointCount = 7, fps = 100): EncodedStream {
  const frames: FrameSpec[][] = [];
  for (let k = 0; k < frameCount; k++) {
    const people: FrameSpec[] = [];
    for (let p = 0; p < persons; p++) {
      const joints: number[] = [];
      for (let j = 0; j < jointCount; j++) {
        joints.push(p * 2 + 0.01 * k, 0.9 + 0.1 * j, 5 + 0.005 * k);
      }
      people.push({ id: 100 + p, joints });
    }
    frames.push(people);
  }
  return encodeStream(fps, jointCount, frames);
}

export function tracksDoc(label: number): TracksDoc {
  const samples = (offset: number) =>
    Array.from({ length: 20 }, (_, f) => ({
      frame: f,
      pelvis: [offset + 0.01 * f + 0.001 * label, 0.9, 5 + 0.02 * f] as [number, number, number],
      kp3d: [[offset, 0.9, 5]],
      kp2d: [[100, 100]],
    }));
  return {
    version: 1,
    fps: 100,
    layout: { joint_count: 1, pelvis_index: 0, head_index: 0 },
    tracks: [
      { id: 100, provenance: "smoothed", samples: samples(0) },
      { id: 101, provenance: "smoothed", samples: samples(2) },
    ],
  };
}

const JSON_HEADERS = { "content-type": "application/json", "x-stagetracks-version": "0.1.0" };

export class MockServer {
  config = defaultConfig();
  state: "idle" | "running" | "failed" = "idle";
  manifest: unknown = null;
  pollsUntilDone = 3;
  private pollsLeft = 0;
  stream: EncodedStream;
  tracksVersions: TracksDoc[];
  currentTracks = 0;

  // accounting for the acceptance bounds
  frameBytesServed = 0;
  frameRequests = 0;
  wholeStreamRequests = 0;
  putBodies: PipelineConfig[] = [];
  runRequests = 0;

  constructor(stream: EncodedStream, tracksVersions: TracksDoc[] = [tracksDoc(1), tracksDoc(2)]) {
    this.stream = stream;
    this.tracksVersions = tracksVersions;
  }

  framePayload(k: number): ArrayBuffer {
    const start = this.stream.offsets[k];
    const end = k + 1 < this.stream.offsets.length ? this.stream.offsets[k + 1] : this.stream.buffer.byteLength;
    return this.stream.buffer.slice(start, end);
  }

  transport: Transport = async (path: string, init?: RequestInit) => {
    const method = init?.method ?? "GET";
    const url = path.replace(/^https?:\/\/[^/]+/, "");

    if (method === "PUT" && url === "/config") {
      if (this.state === "running") {
        return json(409, { error: "a run is in flight; config is locked" });
      }
      const body = JSON.parse(String(init?.body)) as PipelineConfig;
      if (!(body.ghost_min_separation > 0)) {
        return json(422, { errors: [{ field: "ghost_min_separation", message: "must be positive" }] });
      }
      this.putBodies.push(body);
      this.config = body;
      return json(200, body as unknown as Record<string, unknown>);
    }
    if (method === "POST" && url === "/run") {
      this.runRequests += 1;
      if (this.state === "running") return json(409, { error: "a run is already in flight" });
      this.state = "running";
      this.pollsLeft = this.pollsUntilDone;
      return json(202, { status_url: "/status" });
    }
    if (url === "/config") return json(200, this.config as unknown as Record<string, unknown>);
    if (url === "/status") {
      if (this.state === "running") {
        this.pollsLeft -= 1;
        if (this.pollsLeft <= 0) {
          this.state = "idle";
          this.manifest = { version: "0.1.0", config: this.config };
          this.currentTracks = Math.min(this.currentTracks + 1, this.tracksVersions.length - 1);
          return json(200, { state: "idle", manifest: this.manifest });
        }
        return json(200, { state: "running", stage: "smooth", progress: 0.5 });
      }
      return json(200, { state: this.state, manifest: this.manifest, message: "boom" });
    }
    if (url === "/tracks") {
      return json(200, this.tracksVersions[this.currentTracks] as unknown as Record<string, unknown>);
    }
    if (url === "/stream/meta") {
      return json(200, this.stream.meta as unknown as Record<string, unknown>);
    }
    const frameMatch = /^\/stream\/frames\/(\d+)$/.exec(url);
    if (frameMatch) {
      const k = Number(frameMatch[1]);
      if (k >= this.stream.meta.frame_count) return json(404, { error: "out of range" });
      const payload = this.framePayload(k);
      this.frameBytesServed += payload.byteLength;
      this.frameRequests += 1;
      return new Response(payload, {
        status: 200,
        headers: { "content-type": "application/octet-stream", "x-stagetracks-version": "0.1.0" },
      });
    }
    if (url === "/stream") {
      this.wholeStreamRequests += 1;
      return new Response(this.stream.buffer.slice(0), {
        status: 200,
        headers: { "content-type": "application/octet-stream", "x-stagetracks-version": "0.1.0" },
      });
    }
    return json(404, { error: `unknown path ${url}` });
  };
}

function json(status: number, body: Record<string, unknown>): Response {
  return new Response(JSON.stringify(body), { status, headers: JSON_HEADERS });
}

export const instantSleep = () => Promise.resolve();
