// Scene state distilled from the record stream.
//
// Color convention: the tracked first-step plan is red, the discarded
// second-step plan blue, the actual trajectory green.

import type { LogRecord } from "./protocol.js";

export const COLOR_FIRST_STEP = "#d64545";
export const COLOR_SECOND_STEP = "#3a7bd5";
export const COLOR_ACTUAL = "#3ba55c";

export interface PlanSegment {
  t: number[];
  base: number[][]; // [x, y, z] per node
  feet: number[][][]; // [node][leg][xyz]
}

export interface PlanView {
  t: number; // replan timestamp (pairing key)
  tStart: number;
  activation: number;
  first: PlanSegment;
  second: PlanSegment;
}

export interface BoxView {
  id: string;
  center: number[];
  size: number[];
  height: number;
}

export interface SphereView {
  id: string;
  center: number[];
  radius: number;
}

export interface PlaneView {
  offset: number;
  bounds: number[] | null;
}

export interface TerrainView {
  planes: PlaneView[];
  boxes: BoxView[];
  spheres: SphereView[];
  gaps: { bounds: number[] }[];
}

interface PlanPair {
  plan?: Omit<PlanView, "t">;
  replan?: LogRecord;
}

export interface ActualSample {
  t: number;
  base: number[];
  feet: number[][];
}

export class SceneModel {
  terrain: TerrainView | null = null;
  scenarioName = "";
  actual: ActualSample[] = [];
  replanMarks: { t: number; base: number[] }[] = [];
  events: LogRecord[] = [];
  private pairs = new Map<number, PlanPair>();

  apply(record: LogRecord): void {
    switch (record.kind) {
      case "state": {
        this.actual.push({
          t: record.t,
          base: record["base"] as number[],
          feet: record["feet"] as number[][],
        });
        break;
      }
      case "plan": {
        const pair = this.pair(record.t);
        pair.plan = {
          tStart: record["t_start"] as number,
          activation: record["activation"] as number,
          first: record["first"] as PlanSegment,
          second: record["second"] as PlanSegment,
        };
        break;
      }
      case "replan": {
        const pair = this.pair(record.t);
        pair.replan = record;
        const latest = this.actual[this.actual.length - 1];
        this.replanMarks.push({
          t: record.t,
          base: latest ? latest.base.slice() : [0, 0, 0],
        });
        break;
      }
      case "event": {
        this.events.push(record);
        if (record["event"] === "scenario_start") {
          this.scenarioName = record["name"] as string;
          this.terrain = normalizeTerrain(
            record["terrain"] as Record<string, unknown>,
          );
          this.actual = [];
          this.replanMarks = [];
          this.pairs.clear();
        } else if (record["event"] === "relocate" && this.terrain) {
          this.moveObstacle(
            record["id"] as string,
            record["center"] as number[],
          );
        }
        break;
      }
      default:
        break;
    }
  }

  private pair(t: number): PlanPair {
    let pair = this.pairs.get(t);
    if (!pair) {
      pair = {};
      this.pairs.set(t, pair);
    }
    return pair;
  }

  /** Plans backed by a logged replan event; anything else stays invisible. */
  renderablePlans(): PlanView[] {
    const out: PlanView[] = [];
    for (const [t, pair] of this.pairs) {
      if (pair.plan && pair.replan) {
        out.push({ t, ...pair.plan });
      }
    }
    out.sort((a, b) => a.t - b.t);
    return out;
  }

  latestPlan(): PlanView | null {
    const plans = this.renderablePlans();
    return plans.length ? plans[plans.length - 1] : null;
  }

  latestState(): ActualSample | null {
    return this.actual.length ? this.actual[this.actual.length - 1] : null;
  }

  /** Optimistic local move; the authoritative position arrives as an event. */
  moveObstacle(id: string, center: number[]): boolean {
    if (!this.terrain) return false;
    for (const box of this.terrain.boxes) {
      if (box.id === id) {
        box.center = center.slice(0, 2);
        return true;
      }
    }
    for (const sphere of this.terrain.spheres) {
      if (sphere.id === id) {
        const z = center.length > 2 ? center[2] : sphere.center[2];
        sphere.center = [center[0], center[1], z];
        return true;
      }
    }
    return false;
  }

  obstaclePosition(id: string): number[] | null {
    if (!this.terrain) return null;
    for (const box of this.terrain.boxes) {
      if (box.id === id) return box.center.slice();
    }
    for (const sphere of this.terrain.spheres) {
      if (sphere.id === id) return sphere.center.slice();
    }
    return null;
  }
}

function normalizeTerrain(raw: Record<string, unknown>): TerrainView {
  const planes = ((raw["planes"] as Record<string, unknown>[]) ?? []).map(
    (p) => ({
      offset: (p["offset"] as number) ?? 0,
      bounds: (p["bounds"] as number[] | null) ?? null,
    }),
  );
  const boxes = ((raw["boxes"] as Record<string, unknown>[]) ?? []).map(
    (b) => ({
      id: b["id"] as string,
      center: b["center"] as number[],
      size: b["size"] as number[],
      height: b["height"] as number,
    }),
  );
  const spheres = ((raw["spheres"] as Record<string, unknown>[]) ?? []).map(
    (s) => ({
      id: s["id"] as string,
      center: s["center"] as number[],
      radius: s["radius"] as number,
    }),
  );
  const gaps = ((raw["gaps"] as Record<string, unknown>[]) ?? []).map((g) => ({
    bounds: g["bounds"] as number[],
  }));
  return { planes, boxes, spheres, gaps };
}
