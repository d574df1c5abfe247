/**
 * Live-channel connection: one websocket per tab, in-order envelope
 * dispatch, resumable with `resume_after` on reconnect.  The socket type is
 * injected so tests can run against a scripted fake.
 */

import { Envelope } from "./view-state.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onmessage: ((ev: { data: string }) => void) | null;
  onclose: ((ev: { code: number }) => void) | null;
  onopen: (() => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export type ClientMessage =
  | { type: "chat_post"; text: string; group_id?: string }
  | { type: "lock_claim" }
  | { type: "lock_release" }
  | { type: "export"; payload: string }
  | { type: "ping" };

export class LiveChannel {
  private socket: SocketLike | null = null;
  private lastSeq = 0;
  /** Outgoing messages queued until the socket opens. */
  private pending: ClientMessage[] = [];
  onEnvelope: ((env: Envelope) => void) | null = null;
  onClose: ((code: number) => void) | null = null;

  constructor(
    private baseUrl: string,
    private sessionId: string,
    private token: string,
    private factory: SocketFactory,
  ) {}

  connect(resume = false): void {
    const resumeQuery = resume ? `&resume_after=${this.lastSeq}` : "";
    const url = `${this.baseUrl}/api/sessions/${this.sessionId}/channel` +
      `?token=${this.token}${resumeQuery}`;
    const socket = this.factory(url);
    this.socket = socket;
    socket.onopen = () => {
      for (const msg of this.pending.splice(0)) {
        socket.send(JSON.stringify(msg));
      }
    };
    socket.onmessage = (ev) => {
      const env = JSON.parse(ev.data) as Envelope;
      if (env.seq <= this.lastSeq) return; // duplicate delivery after resume
      this.lastSeq = env.seq;
      this.onEnvelope?.(env);
    };
    socket.onclose = (ev) => {
      if (this.socket === socket) this.socket = null;
      this.onClose?.(ev.code);
    };
  }

  get connected(): boolean {
    return this.socket !== null;
  }

  get resumeSeq(): number {
    return this.lastSeq;
  }

  send(msg: ClientMessage): void {
    if (this.socket) {
      this.socket.send(JSON.stringify(msg));
    } else {
      this.pending.push(msg);
    }
  }

  disconnect(): void {
    const s = this.socket;
    this.socket = null;
    s?.close();
  }
}
