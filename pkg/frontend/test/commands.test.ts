import { describe, expect, it } from "vitest";

import { CommandState } from "../src/commands.js";

describe("command lifecycle", () => {
  it("issues unique increasing ids", () => {
    const cs = new CommandState();
    const a = cs.issue("start");
    const b = cs.issue("pause");
    expect(b.id).toBeGreaterThan(a.id);
    expect(cs.pending.size).toBe(2);
  });

  it("ack resolves and is idempotent by id", () => {
    const cs = new CommandState();
    const cmd = cs.issue("start");
    expect(cs.ack(cmd.id, true)).toBeDefined();
    expect(cs.ack(cmd.id, true)).toBeUndefined(); // second ack: no-op
  });

  it("rejection triggers the revert hook", () => {
    const cs = new CommandState();
    let reverted = false;
    const cmd = cs.issue("relocate", { id_obstacle: "box" }, () => {
      reverted = true;
    });
    cs.ack(cmd.id, false);
    expect(reverted).toBe(true);
  });

  it("allows at most one in-flight drag per obstacle", () => {
    const cs = new CommandState();
    const first = cs.issueRelocate("box", [1, 0]);
    expect(first).not.toBeNull();
    expect(cs.issueRelocate("box", [2, 0])).toBeNull();
    expect(cs.issueRelocate("ball", [2, 0])).not.toBeNull(); // distinct id
    cs.ack(first!.id, true);
    expect(cs.issueRelocate("box", [2, 0])).not.toBeNull();
  });
});
