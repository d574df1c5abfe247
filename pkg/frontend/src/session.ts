/**
 * Controller for one collaborative session tab: owns the view state, the
 * live channel, the two workspaces (individual and group), and the audit of
 * outgoing messages that enforces the lock discipline.
 */

import {
  Construction,
  EMPTY,
  MalformedConstruction,
  moveFreePoint,
  parseConstruction,
  serializeConstruction,
} from "./geometry.js";
import { ClientMessage, LiveChannel } from "./channel.js";
import {
  Envelope,
  ViewState,
  applyEnvelope,
  groupEditable,
  initialViewState,
} from "./view-state.js";

export class LockRequired extends Error {}

export const MOVE_COALESCE_MS = 100; // at most 10 move events per second

export interface Clock {
  nowMs(): number;
}

export class SessionController {
  state: ViewState;
  individual: Construction = EMPTY;
  group: Construction = EMPTY;
  /** Every message handed to the channel, for the lock-discipline audit. */
  readonly outgoingAudit: ClientMessage[] = [];
  onRedraw: ((which: "individual" | "group") => void) | null = null;
  private lastMoveSentMs = -Infinity;
  private pendingMove: { id: number; x: number; y: number } | null = null;

  constructor(
    private selfId: string,
    private channel: LiveChannel,
    private clock: Clock = { nowMs: () => Date.now() },
  ) {
    this.state = initialViewState("CollabMember");
    channel.onEnvelope = (env) => this.handleEnvelope(env);
  }

  handleEnvelope(env: Envelope): void {
    const before = this.state;
    this.state = applyEnvelope(before, env, this.selfId);
    if (env.type === "snapshot" &&
        this.state.lastSnapshotVersion > before.lastSnapshotVersion) {
      try {
        this.group = parseConstruction(this.state.groupPayload!);
        this.state = { ...this.state, statusNote: null };
        this.onRedraw?.("group");
      } catch (err) {
        if (!(err instanceof MalformedConstruction)) throw err;
        // keep the previous scene, surface a banner
        this.state = { ...this.state, statusNote: "malformed snapshot ignored" };
      }
    }
  }

  private sendAudited(msg: ClientMessage): void {
    if (msg.type === "export" && !groupEditable(this.state)) {
      throw new LockRequired("cannot export without holding the lock");
    }
    this.outgoingAudit.push(msg);
    this.channel.send(msg);
  }

  claimLock(): void {
    this.sendAudited({ type: "lock_claim" });
  }

  releaseLock(): void {
    this.sendAudited({ type: "lock_release" });
  }

  postChat(text: string): void {
    this.sendAudited({ type: "chat_post", text });
  }

  /** Push the individual workspace to the group (lock holder only). */
  exportToGroup(): void {
    this.sendAudited({
      type: "export",
      payload: serializeConstruction(this.individual),
    });
  }

  importFromGroup(): void {
    this.individual = this.group;
    this.onRedraw?.("individual");
  }

  setIndividual(c: Construction): void {
    this.individual = c;
    this.onRedraw?.("individual");
  }

  /**
   * Drag handling for a free point in the individual workspace: the local
   * echo updates every call, but at most one coalesced move per 100 ms is
   * reported as network-worthy.  Returns true when the move should be sent.
   */
  dragFreePoint(id: number, x: number, y: number): boolean {
    this.individual = moveFreePoint(this.individual, id, x, y);
    this.onRedraw?.("individual");
    const now = this.clock.nowMs();
    if (now - this.lastMoveSentMs >= MOVE_COALESCE_MS) {
      this.lastMoveSentMs = now;
      this.pendingMove = null;
      return true;
    }
    this.pendingMove = { id, x, y };
    return false;
  }

  /** The final position of a drag always goes out, coalesced or not. */
  endDrag(): { id: number; x: number; y: number } | null {
    const move = this.pendingMove;
    this.pendingMove = null;
    if (move !== null) this.lastMoveSentMs = this.clock.nowMs();
    return move;
  }
}
