/** Thin typed wrapper over the server's HTTP routes (one method per route). */

export type FetchLike = (
  url: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string },
) => Promise<{ status: number; json(): Promise<unknown>; text(): Promise<string> }>;

export class ApiError extends Error {
  constructor(
    public status: number,
    public error: string,
    public detail: string,
  ) {
    super(`${status} ${error}: ${detail}`);
  }
}

interface ErrorBody {
  error?: string;
  detail?: string;
  holder?: string;
}

export class ApiClient {
  token: string | null = null;

  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike = fetch as unknown as FetchLike,
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = { "Content-Type": "application/json" };
    if (this.token) headers.Authorization = `Bearer ${this.token}`;
    const res = await this.fetchImpl(this.baseUrl + path, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (res.status === 204) return undefined as T;
    const payload = (await res.json()) as T & ErrorBody;
    if (res.status >= 400) {
      throw new ApiError(res.status, payload.error ?? "Error", payload.detail ?? "");
    }
    return payload;
  }

  async login(username: string, password: string): Promise<{ token: string; user_id: string; role: string }> {
    const out = await this.request<{ token: string; user_id: string; role: string }>(
      "POST", "/api/login", { username, password });
    this.token = out.token;
    return out;
  }

  async loginAnonymous(): Promise<{ token: string; user_id: string }> {
    const out = await this.request<{ token: string; user_id: string }>(
      "POST", "/api/login/anonymous");
    this.token = out.token;
    return out;
  }

  logout(): Promise<void> {
    return this.request("POST", "/api/logout");
  }

  register(username: string, password: string): Promise<{ user_id: string; status: string }> {
    return this.request("POST", "/api/register", { username, password });
  }

  joinSession(sessionId: string): Promise<{
    group_id: string | null;
    snapshot?: { group_id: string; version: number; payload: string };
    snapshots?: Record<string, { version: number; payload: string }>;
  }> {
    return this.request("POST", `/api/sessions/${sessionId}/join`);
  }

  claimLock(sessionId: string): Promise<{ granted: boolean; holder: string }> {
    return this.request("POST", `/api/sessions/${sessionId}/lock`);
  }

  releaseLock(sessionId: string): Promise<void> {
    return this.request("DELETE", `/api/sessions/${sessionId}/lock`);
  }

  exportToGroup(sessionId: string, payload: string): Promise<{ version: number }> {
    return this.request(
      "PUT", `/api/sessions/${sessionId}/group-construction`, { payload });
  }

  importFromGroup(sessionId: string): Promise<{
    snapshot: { version: number; payload: string };
  }> {
    return this.request("POST", `/api/sessions/${sessionId}/import`);
  }

  saveIndividual(sessionId: string, payload: string): Promise<void> {
    return this.request("POST", `/api/sessions/${sessionId}/individual`, { payload });
  }

  saveScrapbook(sessionId: string): Promise<{ construction_id: string; title: string }> {
    return this.request("POST", `/api/sessions/${sessionId}/scrapbook`);
  }

  postChat(sessionId: string, text: string, groupId?: string): Promise<{ message_id: number }> {
    return this.request("POST", `/api/sessions/${sessionId}/chat`,
      groupId === undefined ? { text } : { text, group_id: groupId });
  }

  readChat(sessionId: string, after = 0, groupId?: string): Promise<{
    messages: { message_id: number; author_id: string; ts: number; text: string }[];
  }> {
    const group = groupId === undefined ? "" : `&group_id=${groupId}`;
    return this.request("GET", `/api/sessions/${sessionId}/chat?after=${after}${group}`);
  }

  pollSnapshot(sessionId: string, groupId: string, version: number): Promise<{
    version: number; payload: string;
  } | undefined> {
    return this.request(
      "GET",
      `/api/sessions/${sessionId}/group/${groupId}/snapshot?version=${version}`);
  }

  pollEvents(sessionId: string, after: number): Promise<{
    events: { type: string; seq: number; body: Record<string, unknown> }[];
  }> {
    return this.request("GET", `/api/sessions/${sessionId}/events?after=${after}`);
  }

  observeGroup(sessionId: string, groupId: string): Promise<{
    snapshot: { version: number; payload: string };
    individuals: Record<string, string>;
  }> {
    return this.request("GET", `/api/sessions/${sessionId}/observe/${groupId}`);
  }

  listLogs(studentId: string): Promise<{
    logs: { log_id: string; started_ts: number; finished: boolean; event_count: number }[];
  }> {
    return this.request("GET", `/api/logs?student=${studentId}`);
  }

  reconstruct(logId: string, index: number): Promise<{
    index: number;
    event_count: number;
    construction: string;
    values: Record<string, unknown>;
  }> {
    return this.request("GET", `/api/logs/${logId}/reconstruct?index=${index}`);
  }

  replaySchedule(logId: string, speed: number): Promise<{
    schedule: { delay_ms: number; index: number }[];
  }> {
    return this.request("GET", `/api/logs/${logId}/schedule?speed=${speed}`);
  }
}
