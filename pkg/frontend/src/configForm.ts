// Client-side validation mirroring the server's config invariants, so
// obviously bad edits are rejected inline without a request.

import type { FieldError, PipelineConfig } from "./api.js";

export function validateConfig(config: PipelineConfig): FieldError[] {
  const errors: FieldError[] = [];
  const bad = (field: string, message: string) => errors.push({ field, message });

  if (!(config.ghost_min_separation > 0)) {
    bad("ghost_min_separation", "must be positive");
  }
  if (!(config.rbf_smoothing >= 0)) {
    bad("rbf_smoothing", "must be nonnegative");
  }
  if (!(config.ground_quantile > 0 && config.ground_quantile < 1)) {
    bad("ground_quantile", "must be in (0, 1)");
  }
  if (!(Number.isInteger(config.ground_bins) && config.ground_bins > 0)) {
    bad("ground_bins", "must be a positive integer");
  }
  if (!(Number.isInteger(config.ground_iterations) && config.ground_iterations > 0)) {
    bad("ground_iterations", "must be a positive integer");
  }
  if (!(config.cut_threshold >= 0)) {
    bad("cut_threshold", "must be nonnegative");
  }
  for (const name of ["track_threshold_anchors", "reid_min_len_anchors"] as const) {
    const anchors = config[name];
    if (!Array.isArray(anchors) || anchors.length === 0) {
      bad(name, "at least one anchor required");
      continue;
    }
    const fpsValues = anchors.map((a) => a[0]);
    const sorted = [...fpsValues].sort((a, b) => a - b);
    const distinct = new Set(fpsValues).size === fpsValues.length;
    if (!distinct || fpsValues.some((v, i) => v !== sorted[i])) {
      bad(name, "anchors must be sorted by fps with distinct fps");
    }
    if (anchors.some(([, v]) => !(v > 0))) {
      bad(name, "anchor values must be positive");
    }
  }
  if (config.roi_polygon !== null && config.roi_polygon.length < 3) {
    bad("roi_polygon", "needs at least 3 vertices");
  }
  return errors;
}
