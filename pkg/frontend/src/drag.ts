// Overhead-view coordinate transforms and obstacle drag sessions.
// Drags move obstacles on the ground plane; sphere height is set through
// the numeric field instead.

import type { TerrainView } from "./scene.js";

export interface Viewport {
  centerX: number; // world x at the canvas center
  centerY: number;
  scale: number; // pixels per meter
  width: number;
  height: number;
}

export function worldToScreen(
  vp: Viewport,
  x: number,
  y: number,
): [number, number] {
  // world x right, world y up (screen y flips)
  return [
    vp.width / 2 + (x - vp.centerX) * vp.scale,
    vp.height / 2 - (y - vp.centerY) * vp.scale,
  ];
}

export function screenToWorld(
  vp: Viewport,
  sx: number,
  sy: number,
): [number, number] {
  return [
    vp.centerX + (sx - vp.width / 2) / vp.scale,
    vp.centerY - (sy - vp.height / 2) / vp.scale,
  ];
}

export function hitTestObstacle(
  terrain: TerrainView,
  x: number,
  y: number,
): string | null {
  for (const sphere of terrain.spheres) {
    const dx = x - sphere.center[0];
    const dy = y - sphere.center[1];
    const pickRadius = Math.max(sphere.radius, 0.06);
    if (dx * dx + dy * dy <= pickRadius * pickRadius) return sphere.id;
  }
  for (const box of terrain.boxes) {
    if (
      Math.abs(x - box.center[0]) <= box.size[0] / 2 &&
      Math.abs(y - box.center[1]) <= box.size[1] / 2
    ) {
      return box.id;
    }
  }
  return null;
}

export class DragSession {
  readonly obstacleId: string;
  readonly startCenter: number[];
  current: number[];
  private grabOffset: [number, number];

  constructor(obstacleId: string, startCenter: number[], grabWorld: [number, number]) {
    this.obstacleId = obstacleId;
    this.startCenter = startCenter.slice();
    this.current = startCenter.slice();
    this.grabOffset = [
      startCenter[0] - grabWorld[0],
      startCenter[1] - grabWorld[1],
    ];
  }

  move(world: [number, number]): number[] {
    this.current = [
      world[0] + this.grabOffset[0],
      world[1] + this.grabOffset[1],
    ];
    return this.current.slice();
  }

  /** Final world-space center for the relocate command. */
  drop(): { id: string; center: number[] } {
    return { id: this.obstacleId, center: this.current.slice() };
  }
}
