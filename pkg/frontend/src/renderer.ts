// Scene-graph construction and the three.js view. Builders are pure
// (testable without a GL context); only Viewer3D touches WebGL, and it is
// the one swappable piece should an XR renderer be added later.

import * as THREE from "three";

import type { TracksDoc } from "./api.js";
import { idColor } from "./colors.js";
import type { FramePerson } from "./streamClient.js";
import type { OrbitState, ViewState } from "./viewState.js";

/** Star-linked skeleton segments: every joint connects to the pelvis anchor. */
export function skeletonSegments(
  people: FramePerson[],
  jointCount: number,
  pelvisIndex: number,
  opacity = 1.0,
): THREE.LineSegments {
  const positions: number[] = [];
  const colors: number[] = [];
  for (const person of people) {
    const [r, g, b] = idColor(person.id);
    const px = person.joints[pelvisIndex * 3];
    const py = person.joints[pelvisIndex * 3 + 1];
    const pz = person.joints[pelvisIndex * 3 + 2];
    for (let j = 0; j < jointCount; j++) {
      if (j === pelvisIndex) continue;
      positions.push(px, py, pz);
      positions.push(person.joints[j * 3], person.joints[j * 3 + 1], person.joints[j * 3 + 2]);
      for (let c = 0; c < 2; c++) colors.push(r, g, b);
    }
  }
  const geometry = new THREE.BufferGeometry();
  geometry.setAttribute("position", new THREE.Float32BufferAttribute(positions, 3));
  geometry.setAttribute("color", new THREE.Float32BufferAttribute(colors, 3));
  const material = new THREE.LineBasicMaterial({
    vertexColors: true,
    transparent: opacity < 1,
    opacity,
  });
  return new THREE.LineSegments(geometry, material);
}

/** One polyline per track, colored by id; ghosted for comparison sets. */
export function trackPolylines(tracks: TracksDoc, opacity = 1.0): THREE.Group {
  const group = new THREE.Group();
  for (const track of tracks.tracks) {
    if (track.samples.length < 2) continue;
    const positions = new Float32Array(track.samples.length * 3);
    track.samples.forEach((s, i) => {
      positions[i * 3] = s.pelvis[0];
      positions[i * 3 + 1] = s.pelvis[1];
      positions[i * 3 + 2] = s.pelvis[2];
    });
    const geometry = new THREE.BufferGeometry();
    geometry.setAttribute("position", new THREE.BufferAttribute(positions, 3));
    const [r, g, b] = idColor(track.id);
    const material = new THREE.LineBasicMaterial({
      color: new THREE.Color(r, g, b),
      transparent: opacity < 1,
      opacity,
    });
    const line = new THREE.Line(geometry, material);
    line.name = `track-${track.id}`;
    group.add(line);
  }
  return group;
}

export function groundGrid(size = 20, divisions = 20): THREE.GridHelper {
  const grid = new THREE.GridHelper(size, divisions, 0x335555, 0x223333);
  grid.position.set(0, 0, size / 4);
  return grid;
}

export function meshGroup(people: FramePerson[], opacity = 1.0): THREE.Group {
  const group = new THREE.Group();
  for (const person of people) {
    if (!person.vertices || !person.normals) continue;
    const geometry = new THREE.BufferGeometry();
    geometry.setAttribute("position", new THREE.BufferAttribute(person.vertices, 3));
    geometry.setAttribute("normal", new THREE.BufferAttribute(person.normals, 3));
    const [r, g, b] = idColor(person.id);
    const material = new THREE.MeshBasicMaterial({
      color: new THREE.Color(r, g, b),
      wireframe: true,
      transparent: opacity < 1,
      opacity,
    });
    group.add(new THREE.Mesh(geometry, material));
  }
  return group;
}

/** Intersect a screen ray with the stage plane (y = 0); null if it misses. */
export function screenToGround(
  camera: THREE.Camera,
  ndcX: number,
  ndcY: number,
): [number, number] | null {
  const raycaster = new THREE.Raycaster();
  raycaster.setFromCamera(new THREE.Vector2(ndcX, ndcY), camera);
  const plane = new THREE.Plane(new THREE.Vector3(0, 1, 0), 0);
  const hit = new THREE.Vector3();
  if (raycaster.ray.intersectPlane(plane, hit) === null) return null;
  return [hit.x, hit.z];
}

/** Closed outline of an ROI polygon draft, drawn on the stage plane. */
export function roiOutline(vertices: [number, number][]): THREE.Line {
  const points = vertices.map(([x, z]) => new THREE.Vector3(x, 0.02, z));
  if (points.length > 1) points.push(points[0].clone());
  const geometry = new THREE.BufferGeometry().setFromPoints(points);
  const material = new THREE.LineBasicMaterial({ color: 0xffcc66 });
  const line = new THREE.Line(geometry, material);
  line.name = "roi-outline";
  return line;
}

/** Camera position for the orbit state; top view looks straight down. */
export function cameraPose(orbit: OrbitState, topView: boolean): {
  position: THREE.Vector3;
  target: THREE.Vector3;
  up: THREE.Vector3;
} {
  const target = new THREE.Vector3(...orbit.target);
  if (topView) {
    return {
      position: new THREE.Vector3(target.x, orbit.distance, target.z),
      target,
      up: new THREE.Vector3(0, 0, -1),
    };
  }
  const y = orbit.distance * Math.sin(orbit.elevation);
  const planar = orbit.distance * Math.cos(orbit.elevation);
  return {
    position: new THREE.Vector3(
      target.x + planar * Math.sin(orbit.azimuth),
      target.y + y,
      target.z - planar * Math.cos(orbit.azimuth),
    ),
    target,
    up: new THREE.Vector3(0, 1, 0),
  };
}

export class Viewer3D {
  readonly scene = new THREE.Scene();
  readonly camera: THREE.PerspectiveCamera;
  private renderer: THREE.WebGLRenderer;
  private skeletonNode: THREE.Object3D | null = null;
  private meshNode: THREE.Object3D | null = null;
  private tracksNode: THREE.Object3D | null = null;
  private comparisonNode: THREE.Object3D | null = null;
  private roiNode: THREE.Object3D | null = null;
  private gridNode: THREE.Object3D;

  constructor(canvas: HTMLCanvasElement) {
    this.renderer = new THREE.WebGLRenderer({ canvas, antialias: true });
    this.camera = new THREE.PerspectiveCamera(50, 16 / 9, 0.05, 500);
    this.scene.background = new THREE.Color(0x10181c);
    this.gridNode = groundGrid();
    this.scene.add(this.gridNode);
  }

  resize(width: number, height: number): void {
    this.renderer.setSize(width, height, false);
    this.camera.aspect = width / height;
    this.camera.updateProjectionMatrix();
  }

  setFrame(people: FramePerson[], jointCount: number, pelvisIndex: number): void {
    if (this.skeletonNode) this.scene.remove(this.skeletonNode);
    if (this.meshNode) this.scene.remove(this.meshNode);
    this.skeletonNode = skeletonSegments(people, jointCount, pelvisIndex);
    this.meshNode = meshGroup(people);
    this.scene.add(this.skeletonNode);
    this.scene.add(this.meshNode);
  }

  setRoiDraft(vertices: [number, number][]): void {
    if (this.roiNode) this.scene.remove(this.roiNode);
    this.roiNode = vertices.length ? roiOutline(vertices) : null;
    if (this.roiNode) this.scene.add(this.roiNode);
  }

  setTracks(tracks: TracksDoc | null, comparison: TracksDoc | null): void {
    if (this.tracksNode) this.scene.remove(this.tracksNode);
    if (this.comparisonNode) this.scene.remove(this.comparisonNode);
    this.tracksNode = tracks ? trackPolylines(tracks) : null;
    this.comparisonNode = comparison ? trackPolylines(comparison, 0.25) : null;
    if (this.tracksNode) this.scene.add(this.tracksNode);
    if (this.comparisonNode) this.scene.add(this.comparisonNode);
  }

  render(state: ViewState): void {
    const pose = cameraPose(state.orbit, state.topView);
    this.camera.position.copy(pose.position);
    this.camera.up.copy(pose.up);
    this.camera.lookAt(pose.target);
    if (this.skeletonNode) this.skeletonNode.visible = state.layers.skeletons;
    if (this.meshNode) this.meshNode.visible = state.layers.meshes;
    if (this.tracksNode) this.tracksNode.visible = state.layers.tracks;
    if (this.comparisonNode) this.comparisonNode.visible = state.layers.tracks;
    this.gridNode.visible = state.layers.ground;
    this.renderer.render(this.scene, this.camera);
  }
}
