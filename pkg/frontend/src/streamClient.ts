// Incremental access to the stream binary: per-frame fetches through the
// server's seek index, an LRU cache with a fixed capacity so memory stays
// bounded no matter how long the stream is, and a byte counter so tests
// can prove the whole file is never transferred.

import type { ApiClient, StreamMeta } from "./api.js";

export interface FramePerson {
  id: number;
  joints: Float32Array; // joint_count * 3, world coordinates
  vertices?: Float32Array;
  normals?: Float32Array;
}

export function decodeFrame(meta: StreamMeta, buf: ArrayBuffer): FramePerson[] {
  const view = new DataView(buf);
  const count = view.getUint32(0, true);
  const people: FramePerson[] = [];
  let pos = 4;
  const j3 = meta.joint_count * 3;
  const v3 = meta.vertex_count * 3;
  for (let i = 0; i < count; i++) {
    const id = view.getInt32(pos, true);
    pos += 4;
    const joints = readF32(buf, pos, j3);
    pos += j3 * 4;
    const person: FramePerson = { id, joints };
    if (meta.vertex_count > 0) {
      person.vertices = readF32(buf, pos, v3);
      pos += v3 * 4;
      person.normals = readF32(buf, pos, v3);
      pos += v3 * 4;
    }
    people.push(person);
  }
  return people;
}

function readF32(buf: ArrayBuffer, offset: number, count: number): Float32Array {
  if (offset % 4 === 0) return new Float32Array(buf, offset, count);
  // unaligned payloads (odd person counts) need a copy
  const out = new Float32Array(count);
  const view = new DataView(buf);
  for (let i = 0; i < count; i++) out[i] = view.getFloat32(offset + i * 4, true);
  return out;
}

export class FrameCache {
  private map = new Map<number, FramePerson[]>();

  constructor(readonly capacity: number) {
    if (capacity < 1) throw new Error("cache capacity must be >= 1");
  }

  get(k: number): FramePerson[] | undefined {
    const hit = this.map.get(k);
    if (hit !== undefined) {
      this.map.delete(k); // refresh LRU position
      this.map.set(k, hit);
    }
    return hit;
  }

  set(k: number, frame: FramePerson[]): void {
    if (this.map.has(k)) this.map.delete(k);
    this.map.set(k, frame);
    while (this.map.size > this.capacity) {
      const oldest = this.map.keys().next().value as number;
      this.map.delete(oldest);
    }
  }

  get size(): number {
    return this.map.size;
  }
}

export class StreamClient {
  meta: StreamMeta | null = null;
  bytesFetched = 0;
  private cache: FrameCache;
  private inFlight = new Map<number, Promise<FramePerson[]>>();

  constructor(
    private api: ApiClient,
    cacheCapacity = 120,
  ) {
    this.cache = new FrameCache(cacheCapacity);
  }

  async init(): Promise<StreamMeta | null> {
    this.meta = await this.api.streamMeta();
    return this.meta;
  }

  /** Drop cached frames, e.g. after a re-run replaced the stream. */
  reset(): void {
    this.cache = new FrameCache(this.cache.capacity);
    this.inFlight.clear();
    this.bytesFetched = 0;
    this.meta = null;
  }

  frameCount(): number {
    return this.meta?.frame_count ?? 0;
  }

  async frame(k: number): Promise<FramePerson[]> {
    if (!this.meta) throw new Error("stream meta not loaded");
    if (k < 0 || k >= this.meta.frame_count) {
      throw new Error(`frame ${k} out of range`);
    }
    const cached = this.cache.get(k);
    if (cached !== undefined) return cached;
    const pending = this.inFlight.get(k);
    if (pending !== undefined) return pending;
    const promise = (async () => {
      const buf = await this.api.frame(k);
      this.bytesFetched += buf.byteLength;
      const decoded = decodeFrame(this.meta!, buf);
      this.cache.set(k, decoded);
      return decoded;
    })();
    this.inFlight.set(k, promise);
    try {
      return await promise;
    } finally {
      this.inFlight.delete(k);
    }
  }

  /** Fire-and-forget warmup of a frame likely to be displayed soon. */
  prefetch(k: number): void {
    if (!this.meta || k < 0 || k >= this.meta.frame_count) return;
    if (this.cache.get(k) !== undefined || this.inFlight.has(k)) return;
    void this.frame(k).catch(() => {
      /* prefetch failures surface on the real fetch */
    });
  }
}
