/**
 * Session view model: which workspace is active, who holds the group lock,
 * what the group canvas shows, and the chat scrollback.  A pure reducer
 * applies server envelopes so every transition is unit-testable.
 */

export type Mode = "StandAlone" | "CollabMember" | "TeacherObserve" | "TeacherReplay";
export type Workspace = "Individual" | "Group";
export type LockStatus =
  | { kind: "Unheld" }
  | { kind: "HeldByMe" }
  | { kind: "HeldBy"; holder: string };

export interface ChatEntry {
  messageId: number;
  authorId: string;
  ts: number;
  text: string;
}

export interface Envelope {
  type: string;
  seq: number;
  body: Record<string, unknown>;
}

export interface ViewState {
  mode: Mode;
  activeWorkspace: Workspace;
  lockStatus: LockStatus;
  lastSnapshotVersion: number;
  groupPayload: string | null;
  chat: ChatEntry[];
  sessionClosed: boolean;
  lastSeq: number;
  statusNote: string | null;
}

export function initialViewState(mode: Mode): ViewState {
  return {
    mode,
    activeWorkspace: "Individual",
    lockStatus: { kind: "Unheld" },
    lastSnapshotVersion: 0,
    groupPayload: null,
    chat: [],
    sessionClosed: false,
    lastSeq: 0,
    statusNote: null,
  };
}

/** Group workspace is editable only while this client holds the lock. */
export function groupEditable(s: ViewState): boolean {
  return s.lockStatus.kind === "HeldByMe" && !s.sessionClosed;
}

export function claimButtonEnabled(s: ViewState): boolean {
  return s.lockStatus.kind === "Unheld" && !s.sessionClosed;
}

export function releaseButtonEnabled(s: ViewState): boolean {
  return s.lockStatus.kind === "HeldByMe" && !s.sessionClosed;
}

export function exportButtonEnabled(s: ViewState): boolean {
  return groupEditable(s);
}

export function lockIndicator(s: ViewState): string {
  switch (s.lockStatus.kind) {
    case "Unheld": return "lock free";
    case "HeldByMe": return "you hold the lock";
    case "HeldBy": return `held by ${s.lockStatus.holder}`;
  }
}

export function applyEnvelope(
  s: ViewState,
  env: Envelope,
  selfId: string,
): ViewState {
  const next = { ...s, lastSeq: env.seq };
  switch (env.type) {
    case "snapshot": {
      const version = env.body.version as number;
      if (version <= s.lastSnapshotVersion) return next; // stale replays
      return {
        ...next,
        lastSnapshotVersion: version,
        groupPayload: env.body.payload as string,
      };
    }
    case "lock": {
      const holder = env.body.holder as string | null;
      if (holder === null) return { ...next, lockStatus: { kind: "Unheld" } };
      if (holder === selfId) return { ...next, lockStatus: { kind: "HeldByMe" } };
      return { ...next, lockStatus: { kind: "HeldBy", holder } };
    }
    case "chat": {
      const entry: ChatEntry = {
        messageId: env.body.message_id as number,
        authorId: env.body.author_id as string,
        ts: env.body.ts as number,
        text: env.body.text as string,
      };
      // server message_id order is authoritative even if frames arrive odd
      const chat = [...s.chat, entry].sort((a, b) => a.messageId - b.messageId);
      return { ...next, chat };
    }
    case "lock_denied":
      return {
        ...next,
        lockStatus: { kind: "HeldBy", holder: env.body.holder as string },
      };
    case "session_closed":
      return { ...next, sessionClosed: true, lockStatus: { kind: "Unheld" } };
    case "error":
      return { ...next, statusNote: String(env.body.detail ?? env.body.error) };
    default:
      return next; // pong, export_ack and future envelope types
  }
}
