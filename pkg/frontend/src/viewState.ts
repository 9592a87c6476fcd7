// The single mutable UI state bag: what is visible, where the camera is,
// which frame is current, and the previous run's tracks kept for
// before/after comparison.

import type { PipelineConfig, TracksDoc } from "./api.js";

export interface Layers {
  skeletons: boolean;
  tracks: boolean;
  meshes: boolean;
  ground: boolean;
}

export interface OrbitState {
  azimuth: number;
  elevation: number;
  distance: number;
  target: [number, number, number];
}

export interface ViewState {
  frame: number;
  speed: number;
  playing: boolean;
  topView: boolean;
  drawingRoi: boolean;
  roiDraft: [number, number][];
  layers: Layers;
  orbit: OrbitState;
  pendingConfig: PipelineConfig | null;
  comparison: TracksDoc | null;
}

export function initialViewState(): ViewState {
  return {
    frame: 0,
    speed: 1.0,
    playing: false,
    topView: false,
    drawingRoi: false,
    roiDraft: [],
    layers: { skeletons: true, tracks: true, meshes: false, ground: true },
    orbit: { azimuth: 0.3, elevation: 0.35, distance: 14, target: [0, 1, 6] },
    pendingConfig: null,
    comparison: null,
  };
}

export function setSpeed(state: ViewState, speed: number): void {
  if (!(speed > 0)) throw new Error("speed must be > 0");
  state.speed = speed;
}

export function setFrame(state: ViewState, frame: number, frameCount: number): void {
  state.frame = Math.min(Math.max(0, frame), Math.max(0, frameCount - 1));
}

/** Move the current result into the comparison slot (after a re-run). */
export function swapComparison(state: ViewState, previous: TracksDoc | null): void {
  state.comparison = previous;
}
