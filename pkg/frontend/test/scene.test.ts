import { describe, expect, it } from "vitest";

import {
  COLOR_ACTUAL,
  COLOR_FIRST_STEP,
  COLOR_SECOND_STEP,
  SceneModel,
} from "../src/scene.js";
import { actualPolyline, planPolylines } from "../src/render.js";
import type { LogRecord } from "../src/protocol.js";

function startRecord(): LogRecord {
  return {
    kind: "event",
    t: 0,
    event: "scenario_start",
    name: "test",
    terrain: {
      planes: [{ normal: [0, 0, 1], offset: 0, bounds: null }],
      boxes: [{ id: "box", center: [2.0, 0.0], size: [0.6, 0.8], height: 0.15 }],
      spheres: [{ id: "ball", center: [1.0, 0.2, 0.0], radius: 0.05 }],
      gaps: [],
    },
  } as unknown as LogRecord;
}

function planRecord(t: number): LogRecord {
  const seg = (x0: number) => ({
    t: [t, t + 0.3],
    base: [
      [x0, 0, 0.45],
      [x0 + 0.1, 0, 0.45],
    ],
    feet: [
      [[x0, 0.2, 0], [x0, -0.2, 0], [x0 - 0.6, 0.2, 0], [x0 - 0.6, -0.2, 0]],
      [[x0 + 0.15, 0.2, 0.15], [x0, -0.2, 0], [x0 - 0.6, 0.2, 0], [x0 - 0.6, -0.2, 0]],
    ],
  });
  return {
    kind: "plan",
    t,
    t_start: t,
    activation: t + 0.06,
    first: seg(0.0),
    second: seg(0.1),
  } as unknown as LogRecord;
}

function replanRecord(t: number): LogRecord {
  return { kind: "replan", t, converged: true, iterations: 4 } as unknown as LogRecord;
}

describe("scene model", () => {
  it("builds terrain from the scenario start event", () => {
    const scene = new SceneModel();
    scene.apply(startRecord());
    expect(scene.terrain).not.toBeNull();
    expect(scene.terrain!.boxes[0].id).toBe("box");
    expect(scene.scenarioName).toBe("test");
  });

  it("pairs plan frames with replan events, no phantoms", () => {
    const scene = new SceneModel();
    scene.apply(startRecord());
    scene.apply(planRecord(0.6)); // plan without its replan: invisible
    expect(scene.renderablePlans()).toHaveLength(0);
    scene.apply(replanRecord(0.6));
    expect(scene.renderablePlans()).toHaveLength(1);
    scene.apply(replanRecord(1.2)); // replan whose plan never arrived
    expect(scene.renderablePlans()).toHaveLength(1);
  });

  it("applies relocate events to the terrain", () => {
    const scene = new SceneModel();
    scene.apply(startRecord());
    scene.apply({
      kind: "event",
      t: 1.0,
      event: "relocate",
      id: "box",
      center: [0.8, 0.1],
    } as unknown as LogRecord);
    expect(scene.obstaclePosition("box")).toEqual([0.8, 0.1]);
  });

  it("optimistic move and revert", () => {
    const scene = new SceneModel();
    scene.apply(startRecord());
    expect(scene.moveObstacle("box", [1.5, 0.3])).toBe(true);
    expect(scene.obstaclePosition("box")).toEqual([1.5, 0.3]);
    expect(scene.moveObstacle("ghost", [0, 0])).toBe(false);
  });

  it("sphere keeps its height unless overridden", () => {
    const scene = new SceneModel();
    scene.apply(startRecord());
    scene.moveObstacle("ball", [1.4, 0.0]);
    expect(scene.obstaclePosition("ball")).toEqual([1.4, 0.0, 0.0]);
    scene.moveObstacle("ball", [1.4, 0.0, 0.2]);
    expect(scene.obstaclePosition("ball")![2]).toBe(0.2);
  });
});

describe("render color convention", () => {
  it("first step red, second step blue, actual green", () => {
    const scene = new SceneModel();
    scene.apply(startRecord());
    scene.apply(planRecord(0.6));
    scene.apply(replanRecord(0.6));
    scene.apply({
      kind: "state",
      t: 0.62,
      base: [0.05, 0, 0.45],
      feet: [[0, 0.2, 0], [0, -0.2, 0], [-0.6, 0.2, 0], [-0.6, -0.2, 0]],
    } as unknown as LogRecord);
    const lines = planPolylines(scene.renderablePlans(), "xy");
    expect(lines).toHaveLength(2);
    expect(lines[0].color).toBe(COLOR_FIRST_STEP);
    expect(lines[1].color).toBe(COLOR_SECOND_STEP);
    expect(actualPolyline(scene, "xy").color).toBe(COLOR_ACTUAL);
  });

  it("empty plan stream leaves only the actual path", () => {
    const scene = new SceneModel();
    scene.apply(startRecord());
    scene.apply({
      kind: "state",
      t: 0.1,
      base: [0, 0, 0.45],
      feet: [[0, 0.2, 0], [0, -0.2, 0], [-0.6, 0.2, 0], [-0.6, -0.2, 0]],
    } as unknown as LogRecord);
    expect(planPolylines(scene.renderablePlans(), "xy")).toHaveLength(0);
    expect(actualPolyline(scene, "xy").points).toHaveLength(1);
  });
});
