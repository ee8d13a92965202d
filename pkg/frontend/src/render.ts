// Double-view rendering: overhead (x-y) and side elevation (x-z).

import {
  COLOR_ACTUAL,
  COLOR_FIRST_STEP,
  COLOR_SECOND_STEP,
  type PlanView,
  type SceneModel,
} from "./scene.js";
import { type Viewport, worldToScreen } from "./drag.js";

export interface Polyline {
  color: string;
  width: number;
  points: [number, number][]; // world coordinates in the view plane
}

/** Pure extraction of the colored polylines for one view. */
export function planPolylines(
  plans: PlanView[],
  axis: "xy" | "xz",
): Polyline[] {
  const j = axis === "xy" ? 1 : 2;
  const lines: Polyline[] = [];
  for (const plan of plans) {
    lines.push({
      color: COLOR_FIRST_STEP,
      width: 2,
      points: plan.first.base.map((p) => [p[0], p[j]]),
    });
    lines.push({
      color: COLOR_SECOND_STEP,
      width: 1.5,
      points: plan.second.base.map((p) => [p[0], p[j]]),
    });
  }
  return lines;
}

export function actualPolyline(scene: SceneModel, axis: "xy" | "xz"): Polyline {
  const j = axis === "xy" ? 1 : 2;
  return {
    color: COLOR_ACTUAL,
    width: 2.5,
    points: scene.actual.map((s) => [s.base[0], s.base[j]]),
  };
}

function drawPolyline(
  ctx: CanvasRenderingContext2D,
  vp: Viewport,
  line: Polyline,
): void {
  if (line.points.length < 2) return;
  ctx.strokeStyle = line.color;
  ctx.lineWidth = line.width;
  ctx.beginPath();
  line.points.forEach(([x, y], i) => {
    const [sx, sy] = worldToScreen(vp, x, y);
    if (i === 0) ctx.moveTo(sx, sy);
    else ctx.lineTo(sx, sy);
  });
  ctx.stroke();
}

function drawTerrainOverhead(
  ctx: CanvasRenderingContext2D,
  vp: Viewport,
  scene: SceneModel,
  selected: string | null,
): void {
  if (!scene.terrain) return;
  for (const gap of scene.terrain.gaps) {
    const [x0, y0] = worldToScreen(vp, gap.bounds[0], gap.bounds[3]);
    const [x1, y1] = worldToScreen(vp, gap.bounds[1], gap.bounds[2]);
    ctx.fillStyle = "#22262e";
    ctx.fillRect(x0, y0, x1 - x0, y1 - y0);
  }
  for (const box of scene.terrain.boxes) {
    const [x0, y0] = worldToScreen(
      vp,
      box.center[0] - box.size[0] / 2,
      box.center[1] + box.size[1] / 2,
    );
    const [x1, y1] = worldToScreen(
      vp,
      box.center[0] + box.size[0] / 2,
      box.center[1] - box.size[1] / 2,
    );
    ctx.fillStyle = box.id === selected ? "#8a6d3b" : "#6b5a36";
    ctx.fillRect(x0, y0, x1 - x0, y1 - y0);
    ctx.strokeStyle = "#c9a85c";
    ctx.strokeRect(x0, y0, x1 - x0, y1 - y0);
  }
  for (const sphere of scene.terrain.spheres) {
    const [sx, sy] = worldToScreen(vp, sphere.center[0], sphere.center[1]);
    ctx.fillStyle = sphere.id === selected ? "#e3d96b" : "#c9c45c";
    ctx.beginPath();
    ctx.arc(sx, sy, sphere.radius * vp.scale, 0, 2 * Math.PI);
    ctx.fill();
  }
}

function drawTerrainSide(
  ctx: CanvasRenderingContext2D,
  vp: Viewport,
  scene: SceneModel,
): void {
  if (!scene.terrain) return;
  ctx.strokeStyle = "#555c68";
  ctx.lineWidth = 2;
  for (const plane of scene.terrain.planes) {
    const z = -plane.offset;
    const xLo = plane.bounds ? plane.bounds[0] : vp.centerX - 50;
    const xHi = plane.bounds ? plane.bounds[1] : vp.centerX + 50;
    const [x0, y0] = worldToScreen(vp, xLo, z);
    const [x1] = worldToScreen(vp, xHi, z);
    ctx.beginPath();
    ctx.moveTo(x0, y0);
    ctx.lineTo(x1, y0);
    ctx.stroke();
  }
  for (const box of scene.terrain.boxes) {
    const [x0, y0] = worldToScreen(
      vp,
      box.center[0] - box.size[0] / 2,
      box.height,
    );
    const [x1, y1] = worldToScreen(vp, box.center[0] + box.size[0] / 2, 0);
    ctx.fillStyle = "#6b5a36";
    ctx.fillRect(x0, y0, x1 - x0, y1 - y0);
  }
  for (const sphere of scene.terrain.spheres) {
    const [sx, sy] = worldToScreen(vp, sphere.center[0], sphere.center[2]);
    ctx.fillStyle = "#c9c45c";
    ctx.beginPath();
    ctx.arc(sx, sy, sphere.radius * vp.scale, 0, 2 * Math.PI);
    ctx.fill();
  }
}

function drawRobot(
  ctx: CanvasRenderingContext2D,
  vp: Viewport,
  scene: SceneModel,
  axis: "xy" | "xz",
): void {
  const state = scene.latestState();
  if (!state) return;
  const j = axis === "xy" ? 1 : 2;
  ctx.fillStyle = "#e8e8e8";
  const [bx, by] = worldToScreen(vp, state.base[0], state.base[j]);
  ctx.beginPath();
  ctx.arc(bx, by, 6, 0, 2 * Math.PI);
  ctx.fill();
  ctx.fillStyle = "#9ad0f0";
  for (const foot of state.feet) {
    const [fx, fy] = worldToScreen(vp, foot[0], foot[j]);
    ctx.beginPath();
    ctx.arc(fx, fy, 3.5, 0, 2 * Math.PI);
    ctx.fill();
  }
}

function drawReplanMarks(
  ctx: CanvasRenderingContext2D,
  vp: Viewport,
  scene: SceneModel,
  axis: "xy" | "xz",
): void {
  const j = axis === "xy" ? 1 : 2;
  ctx.fillStyle = "#f0e0a0";
  for (const mark of scene.replanMarks) {
    const [sx, sy] = worldToScreen(vp, mark.base[0], mark.base[j]);
    ctx.fillRect(sx - 2, sy - 2, 4, 4);
  }
}

export function drawView(
  ctx: CanvasRenderingContext2D,
  vp: Viewport,
  scene: SceneModel,
  axis: "xy" | "xz",
  selected: string | null = null,
): void {
  ctx.fillStyle = "#14171c";
  ctx.fillRect(0, 0, vp.width, vp.height);
  if (axis === "xy") drawTerrainOverhead(ctx, vp, scene, selected);
  else drawTerrainSide(ctx, vp, scene);
  for (const line of planPolylines(scene.renderablePlans(), axis)) {
    drawPolyline(ctx, vp, line);
  }
  drawPolyline(ctx, vp, actualPolyline(scene, axis));
  drawReplanMarks(ctx, vp, scene, axis);
  drawRobot(ctx, vp, scene, axis);
}
