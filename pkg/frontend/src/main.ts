// Viewer entry point: wires the API client, stream playback, the 3D view
// and the refinement form to the DOM. Served statically; everything it
// shows comes from the pipeline server endpoints.

import { ApiClient, type PipelineConfig } from "./api.js";
import { validateConfig } from "./configForm.js";
import { PlaybackClock, playbackStep } from "./playback.js";
import { RefineController } from "./refine.js";
import { StreamClient } from "./streamClient.js";
import * as rendererModule from "./renderer.js";
import { Viewer3D } from "./renderer.js";
import { initialViewState, setFrame, setSpeed } from "./viewState.js";

const SERVER = (window as { STAGETRACKS_SERVER?: string }).STAGETRACKS_SERVER ?? "http://127.0.0.1:8008";

const api = new ApiClient(SERVER);
const stream = new StreamClient(api, 180);
const refine = new RefineController(api, { onStatus: renderStatus });
const state = initialViewState();

let clock: PlaybackClock | null = null;
let viewer: Viewer3D | null = null;
let layout = { joint_count: 0, pelvis_index: 0, head_index: 0 };

const el = <T extends HTMLElement>(id: string) => document.getElementById(id) as T;

function renderStatus(status: { state: string; stage?: string; progress?: number; message?: string }): void {
  const line = el<HTMLSpanElement>("status-line");
  if (status.state === "running") {
    line.textContent = `running: ${status.stage} (${Math.round((status.progress ?? 0) * 100)}%)`;
  } else if (status.state === "failed") {
    line.textContent = `failed: ${status.message}`;
  } else {
    line.textContent = "idle";
  }
}

async function reloadOutputs(): Promise<void> {
  stream.reset();
  const meta = await stream.init();
  if (refine.tracks === null) await refine.loadInitial();
  if (viewer) viewer.setTracks(refine.tracks, state.comparison);
  if (meta) {
    layout = refine.tracks?.layout ?? { joint_count: meta.joint_count, pelvis_index: 0, head_index: 0 };
    clock = new PlaybackClock(meta.fps, meta.frame_count, state.speed);
    const slider = el<HTMLInputElement>("frame-slider");
    slider.max = String(Math.max(0, meta.frame_count - 1));
    slider.disabled = meta.frame_count <= 1;
    el<HTMLButtonElement>("play-toggle").disabled = meta.frame_count <= 1;
    await showFrame(0);
  }
}

async function showFrame(k: number): Promise<void> {
  if (!clock || !viewer) return;
  clock.seek(k);
  setFrame(state, k, clock.frameCount);
  const people = await stream.frame(state.frame);
  viewer.setFrame(people, layout.joint_count, layout.pelvis_index);
  el<HTMLSpanElement>("frame-label").textContent = `${state.frame} / ${clock.frameCount - 1}`;
  el<HTMLInputElement>("frame-slider").value = String(state.frame);
}

function readConfigForm(base: PipelineConfig): PipelineConfig {
  return {
    ...base,
    ghost_min_separation: Number(el<HTMLInputElement>("cfg-ghost").value),
    rbf_smoothing: Number(el<HTMLInputElement>("cfg-lambda").value),
    smooth_all_joints: el<HTMLInputElement>("cfg-all-joints").checked,
    cut_threshold: Number(el<HTMLInputElement>("cfg-cut").value),
    roi_polygon: state.roiDraft.length >= 3 ? state.roiDraft : base.roi_polygon,
  };
}

function showFieldErrors(errors: { field: string; message: string }[]): void {
  const box = el<HTMLDivElement>("config-errors");
  box.textContent = errors.map((e) => `${e.field}: ${e.message}`).join("; ");
}

async function boot(): Promise<void> {
  viewer = new Viewer3D(el<HTMLCanvasElement>("view"));
  const resize = () => {
    const canvas = el<HTMLCanvasElement>("view");
    viewer!.resize(canvas.clientWidth, canvas.clientHeight);
  };
  window.addEventListener("resize", resize);
  resize();

  const config = await api.getConfig();
  el<HTMLInputElement>("cfg-ghost").value = String(config.ghost_min_separation);
  el<HTMLInputElement>("cfg-lambda").value = String(config.rbf_smoothing);
  el<HTMLInputElement>("cfg-all-joints").checked = config.smooth_all_joints;
  el<HTMLInputElement>("cfg-cut").value = String(config.cut_threshold);

  await refine.loadInitial();
  await reloadOutputs();

  el<HTMLButtonElement>("play-toggle").onclick = () => {
    if (!clock) return;
    if (clock.ended) clock.seek(0);
    clock.playing = !clock.playing;
    el<HTMLButtonElement>("play-toggle").textContent = clock.playing ? "pause" : "play";
  };
  el<HTMLSelectElement>("speed-select").onchange = (event) => {
    const speed = Number((event.target as HTMLSelectElement).value);
    setSpeed(state, speed);
    clock?.setSpeed(speed);
  };
  el<HTMLInputElement>("frame-slider").oninput = (event) => {
    void showFrame(Number((event.target as HTMLInputElement).value));
  };
  for (const layer of ["skeletons", "tracks", "meshes", "ground"] as const) {
    el<HTMLInputElement>(`layer-${layer}`).onchange = (event) => {
      state.layers[layer] = (event.target as HTMLInputElement).checked;
    };
  }
  el<HTMLInputElement>("top-view").onchange = (event) => {
    state.topView = (event.target as HTMLInputElement).checked;
  };

  el<HTMLButtonElement>("run-button").onclick = async () => {
    showFieldErrors([]);
    const edited = readConfigForm(await api.getConfig());
    const local = validateConfig(edited);
    if (local.length > 0) {
      showFieldErrors(local);
      return;
    }
    el<HTMLButtonElement>("run-button").disabled = true;
    try {
      const previous = refine.tracks;
      const outcome = await refine.refine(edited);
      if (!outcome.ok) {
        if (outcome.errors) showFieldErrors(outcome.errors);
        if (outcome.message) el<HTMLSpanElement>("status-line").textContent = outcome.message;
        return;
      }
      state.comparison = previous;
      await reloadOutputs();
    } finally {
      el<HTMLButtonElement>("run-button").disabled = false;
    }
  };

  el<HTMLInputElement>("draw-roi").onchange = (event) => {
    state.drawingRoi = (event.target as HTMLInputElement).checked;
    if (state.drawingRoi) {
      state.topView = true;
      el<HTMLInputElement>("top-view").checked = true;
      state.roiDraft = [];
      viewer!.setRoiDraft(state.roiDraft);
    }
  };
  el<HTMLButtonElement>("clear-roi").onclick = () => {
    state.roiDraft = [];
    viewer!.setRoiDraft(state.roiDraft);
  };

  // orbit: drag to rotate, wheel to zoom; in ROI mode clicks drop vertices
  const canvas = el<HTMLCanvasElement>("view");
  let dragging = false;
  let last: [number, number] = [0, 0];
  canvas.addEventListener("pointerdown", (event) => {
    if (state.drawingRoi && state.topView) {
      const rect = canvas.getBoundingClientRect();
      const ndcX = ((event.clientX - rect.left) / rect.width) * 2 - 1;
      const ndcY = -(((event.clientY - rect.top) / rect.height) * 2 - 1);
      const { screenToGround } = rendererModule;
      const point = screenToGround(viewer!.camera, ndcX, ndcY);
      if (point) {
        state.roiDraft.push(point);
        viewer!.setRoiDraft(state.roiDraft);
      }
      return;
    }
    dragging = true;
    last = [event.clientX, event.clientY];
  });
  window.addEventListener("pointerup", () => (dragging = false));
  window.addEventListener("pointermove", (event) => {
    if (!dragging) return;
    state.orbit.azimuth += (event.clientX - last[0]) * 0.008;
    state.orbit.elevation = Math.min(
      1.5,
      Math.max(-0.2, state.orbit.elevation + (event.clientY - last[1]) * 0.006),
    );
    last = [event.clientX, event.clientY];
  });
  canvas.addEventListener("wheel", (event) => {
    state.orbit.distance = Math.min(80, Math.max(2, state.orbit.distance * (event.deltaY > 0 ? 1.1 : 0.9)));
    event.preventDefault();
  });

  let lastTime = performance.now();
  const loop = async (now: number) => {
    const dt = Math.min(0.1, (now - lastTime) / 1000);
    lastTime = now;
    if (clock && clock.playing) {
      await playbackStep(clock, stream, dt, (frame, people) => {
        setFrame(state, frame, clock!.frameCount);
        viewer!.setFrame(people, layout.joint_count, layout.pelvis_index);
        el<HTMLSpanElement>("frame-label").textContent = `${frame} / ${clock!.frameCount - 1}`;
        el<HTMLInputElement>("frame-slider").value = String(frame);
      });
      if (clock.ended) el<HTMLButtonElement>("play-toggle").textContent = "play";
    }
    viewer!.render(state);
    requestAnimationFrame(loop);
  };
  requestAnimationFrame(loop);
}

void boot().catch((error) => {
  el<HTMLSpanElement>("status-line").textContent = `viewer failed to start: ${error}`;
});
