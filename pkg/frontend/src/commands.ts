// Pending-command bookkeeping: every command carries an id and resolves
// with an ack; optimistic effects are reverted on rejection.

export interface PendingCommand {
  id: number;
  command: string;
  payload: Record<string, unknown>;
  revert?: () => void;
}

export class CommandState {
  connected = false;
  speed = 1.0;
  selectedObstacle: string | null = null;
  pending = new Map<number, PendingCommand>();
  private nextId = 1;
  private dragInFlight = new Set<string>();

  issue(
    command: string,
    payload: Record<string, unknown> = {},
    revert?: () => void,
  ): PendingCommand {
    const entry: PendingCommand = {
      id: this.nextId++,
      command,
      payload,
      revert,
    };
    this.pending.set(entry.id, entry);
    return entry;
  }

  /** A relocate drag is exclusive per obstacle until its ack arrives. */
  issueRelocate(
    obstacleId: string,
    center: number[],
    revert?: () => void,
  ): PendingCommand | null {
    if (this.dragInFlight.has(obstacleId)) return null;
    this.dragInFlight.add(obstacleId);
    return this.issue(
      "relocate",
      { id_obstacle: obstacleId, center },
      revert,
    );
  }

  /** Resolve an ack; on rejection runs the revert hook. Idempotent by id. */
  ack(id: number, ok: boolean): PendingCommand | undefined {
    const entry = this.pending.get(id);
    if (!entry) return undefined;
    this.pending.delete(id);
    if (entry.command === "relocate") {
      this.dragInFlight.delete(entry.payload["id_obstacle"] as string);
    }
    if (!ok && entry.revert) entry.revert();
    return entry;
  }

  hasInFlightDrag(obstacleId: string): boolean {
    return this.dragInFlight.has(obstacleId);
  }
}
