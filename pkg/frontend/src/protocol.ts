// Wire protocol shared with the simulation service: JSON frames over a
// websocket, every message stamped with protocol_version.

export const PROTOCOL_VERSION = 1;

export interface LogRecord {
  kind: "state" | "plan" | "replan" | "event" | "diagnostics";
  t: number;
  [key: string]: unknown;
}

export interface SessionStatus {
  loaded: string | null;
  running: boolean;
  paused: boolean;
  speed: number;
  t: number;
  steps_done: number;
  steps_total: number;
  finished: boolean;
  scenarios: string[];
}

export type ServerFrame =
  | { type: "hello"; status: SessionStatus }
  | { type: "record"; record: LogRecord }
  | { type: "status"; status: SessionStatus }
  | { type: "ack"; id: number; ok: boolean; result?: unknown; error?: string }
  | { type: "error"; message: string };

export type CommandName =
  | "load"
  | "start"
  | "pause"
  | "resume"
  | "speed"
  | "relocate"
  | "set_heading"
  | "status";

const FRAME_TYPES = new Set(["hello", "record", "status", "ack", "error"]);

export function parseFrame(raw: string): ServerFrame | null {
  let data: Record<string, unknown>;
  try {
    data = JSON.parse(raw);
  } catch {
    return null;
  }
  if (data["protocol_version"] !== PROTOCOL_VERSION) return null;
  const type = data["type"];
  if (typeof type !== "string" || !FRAME_TYPES.has(type)) return null;
  return data as unknown as ServerFrame;
}

export function encodeCommand(
  id: number,
  command: CommandName,
  args: Record<string, unknown> = {},
): string {
  return JSON.stringify({
    protocol_version: PROTOCOL_VERSION,
    type: "command",
    id,
    command,
    ...args,
  });
}
