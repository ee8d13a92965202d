// Console wiring: one socket, one scene, two canvas views, control strip.

import { CommandState } from "./commands.js";
import {
  DragSession,
  hitTestObstacle,
  screenToWorld,
  type Viewport,
} from "./drag.js";
import type { ServerFrame, SessionStatus } from "./protocol.js";
import { drawView } from "./render.js";
import { SceneModel } from "./scene.js";
import { ConsoleSocket } from "./socket.js";

const scene = new SceneModel();
const commands = new CommandState();
let status: SessionStatus | null = null;
let drag: DragSession | null = null;

const overhead = document.getElementById("overhead") as HTMLCanvasElement;
const side = document.getElementById("side") as HTMLCanvasElement;
const statusBar = document.getElementById("status") as HTMLElement;
const scenarioSelect = document.getElementById("scenario") as HTMLSelectElement;
const speedInput = document.getElementById("speed") as HTMLInputElement;
const headingInput = document.getElementById("heading") as HTMLInputElement;
const zInput = document.getElementById("obstacle-z") as HTMLInputElement;

function viewport(canvas: HTMLCanvasElement, centerY = 0): Viewport {
  const state = scene.latestState();
  return {
    centerX: state ? state.base[0] : 0.5,
    centerY,
    scale: 140,
    width: canvas.width,
    height: canvas.height,
  };
}

const socket = new ConsoleSocket(
  `ws://${location.host}/ws`,
  {
    onFrame(frame: ServerFrame): void {
      switch (frame.type) {
        case "hello":
          status = frame.status;
          populateScenarios(frame.status.scenarios);
          break;
        case "status":
          status = frame.status;
          break;
        case "record":
          scene.apply(frame.record);
          break;
        case "ack":
          commands.ack(frame.id, frame.ok);
          if (!frame.ok) flash(`rejected: ${frame.error ?? "unknown error"}`);
          break;
        case "error":
          flash(frame.message);
          break;
      }
    },
    onOpen(): void {
      commands.connected = true;
    },
    onClose(): void {
      commands.connected = false;
    },
  },
);

function populateScenarios(names: string[]): void {
  if (scenarioSelect.options.length > 0) return;
  for (const name of names) {
    const option = document.createElement("option");
    option.value = name;
    option.textContent = name;
    scenarioSelect.appendChild(option);
  }
}

function flash(message: string): void {
  statusBar.textContent = message;
  statusBar.classList.add("alert");
  setTimeout(() => statusBar.classList.remove("alert"), 1500);
}

function bindButton(id: string, handler: () => void): void {
  (document.getElementById(id) as HTMLButtonElement).onclick = handler;
}

bindButton("load", () => {
  const entry = commands.issue("load", { scenario: scenarioSelect.value });
  socket.send("load", entry.payload, entry.id);
});
bindButton("start", () => {
  const entry = commands.issue("start");
  socket.send("start", {}, entry.id);
});
bindButton("pause", () => {
  const entry = commands.issue("pause");
  socket.send("pause", {}, entry.id);
});
bindButton("resume", () => {
  const entry = commands.issue("resume");
  socket.send("resume", {}, entry.id);
});
speedInput.onchange = () => {
  const value = Number(speedInput.value);
  const entry = commands.issue("speed", { value });
  socket.send("speed", entry.payload, entry.id);
};
headingInput.onchange = () => {
  const degrees = Number(headingInput.value);
  const heading = [
    Math.cos((degrees * Math.PI) / 180),
    Math.sin((degrees * Math.PI) / 180),
  ];
  const entry = commands.issue("set_heading", { heading });
  socket.send("set_heading", entry.payload, entry.id);
};

overhead.onpointerdown = (ev) => {
  if (!scene.terrain) return;
  const rect = overhead.getBoundingClientRect();
  const world = screenToWorld(
    viewport(overhead),
    ev.clientX - rect.left,
    ev.clientY - rect.top,
  );
  const hit = hitTestObstacle(scene.terrain, world[0], world[1]);
  if (!hit || commands.hasInFlightDrag(hit)) return;
  const center = scene.obstaclePosition(hit);
  if (!center) return;
  commands.selectedObstacle = hit;
  drag = new DragSession(hit, center, world);
  overhead.setPointerCapture(ev.pointerId);
};

overhead.onpointermove = (ev) => {
  if (!drag) return;
  const rect = overhead.getBoundingClientRect();
  const world = screenToWorld(
    viewport(overhead),
    ev.clientX - rect.left,
    ev.clientY - rect.top,
  );
  scene.moveObstacle(drag.obstacleId, drag.move(world));
};

overhead.onpointerup = () => {
  if (!drag) return;
  const { id, center } = drag.drop();
  const zOverride = Number(zInput.value);
  const fullCenter =
    Number.isFinite(zOverride) && zInput.value !== ""
      ? [...center, zOverride]
      : center;
  const before = drag.startCenter.slice();
  const entry = commands.issueRelocate(id, fullCenter, () => {
    scene.moveObstacle(id, before); // rejection reverts the optimistic move
  });
  if (entry) socket.send("relocate", entry.payload, entry.id);
  drag = null;
};

function renderLoop(): void {
  const octx = overhead.getContext("2d")!;
  const sctx = side.getContext("2d")!;
  drawView(octx, viewport(overhead), scene, "xy", commands.selectedObstacle);
  drawView(sctx, viewport(side, 0.4), scene, "xz", commands.selectedObstacle);
  if (status) {
    const mode = status.paused ? "paused" : status.running ? "running" : "idle";
    statusBar.textContent =
      `${status.loaded ?? "no scenario"} | ${mode} | t=${status.t.toFixed(2)}s ` +
      `| step ${status.steps_done}/${status.steps_total} | x${status.speed}` +
      (commands.connected ? "" : " | DISCONNECTED");
  }
  requestAnimationFrame(renderLoop);
}

requestAnimationFrame(renderLoop);
