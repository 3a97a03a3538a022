/**
 * Session client: REST calls for create/abort/debrief plus the WebSocket
 * step stream.  Transports are injected so tests can drive the client
 * without a server; the browser entry point passes window.fetch and the
 * native WebSocket.
 */

import {
  buildAbortMessage,
  DebriefReport,
  parseServerMessage,
  ServerMessage,
  ServiceMetadata,
  SessionInfo,
  SessionMode,
} from "./protocol.js";

export interface HttpResponse {
  ok: boolean;
  status: number;
  json(): Promise<unknown>;
}

export type HttpFn = (url: string, init?: {
  method?: string;
  headers?: Record<string, string>;
  body?: string;
}) => Promise<HttpResponse>;

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onmessage: ((event: { data: string }) => void) | null;
  onclose: (() => void) | null;
  onerror: ((event: unknown) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface ClientOptions {
  baseUrl: string;
  http: HttpFn;
  socketFactory: SocketFactory;
}

export class SessionClient {
  private socket: SocketLike | null = null;
  private abortRequested = false;
  info: SessionInfo | null = null;

  onMessage: ((msg: ServerMessage) => void) | null = null;
  onDisconnect: (() => void) | null = null;

  constructor(private readonly options: ClientOptions) {}

  get connected(): boolean {
    return this.socket !== null;
  }

  /** Exactly-once guard for the abort button. */
  get abortPending(): boolean {
    return this.abortRequested;
  }

  async metadata(): Promise<ServiceMetadata> {
    const resp = await this.options.http(`${this.options.baseUrl}/api/metadata`);
    if (!resp.ok) throw new Error(`metadata failed: HTTP ${resp.status}`);
    return (await resp.json()) as ServiceMetadata;
  }

  async createSession(epsilon: number, mode: SessionMode, seed?: number): Promise<SessionInfo> {
    const body: Record<string, unknown> = { epsilon, mode };
    if (seed !== undefined) body.seed = seed;
    const resp = await this.options.http(`${this.options.baseUrl}/api/sessions`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!resp.ok) throw new Error(`create session failed: HTTP ${resp.status}`);
    this.info = (await resp.json()) as SessionInfo;
    this.abortRequested = false;
    return this.info;
  }

  openStream(): void {
    if (this.info === null) throw new Error("no session");
    const wsBase = this.options.baseUrl.replace(/^http/, "ws");
    this.socket = this.options.socketFactory(
      `${wsBase}/api/sessions/${this.info.session_id}/stream`,
    );
    this.socket.onmessage = (event) => {
      const msg = parseServerMessage(event.data);
      this.onMessage?.(msg);
    };
    this.socket.onclose = () => {
      this.socket = null;
      this.onDisconnect?.();
    };
    this.socket.onerror = () => {
      this.socket?.close();
    };
  }

  sendRaw(payload: string): void {
    if (this.socket === null) throw new Error("stream not open");
    this.socket.send(payload);
  }

  /**
   * Issue the abort exactly once, over the stream when open, otherwise via
   * REST.  Returns false when the abort was already requested.
   */
  requestAbort(): boolean {
    if (this.abortRequested || this.info === null) return false;
    this.abortRequested = true;
    if (this.socket !== null) {
      this.socket.send(buildAbortMessage());
    } else {
      void this.options.http(
        `${this.options.baseUrl}/api/sessions/${this.info.session_id}/abort`,
        { method: "POST" },
      );
    }
    return true;
  }

  async fetchDebrief(): Promise<DebriefReport> {
    if (this.info === null) throw new Error("no session");
    const resp = await this.options.http(
      `${this.options.baseUrl}/api/sessions/${this.info.session_id}/debrief`,
    );
    if (!resp.ok) throw new Error(`debrief failed: HTTP ${resp.status}`);
    return (await resp.json()) as DebriefReport;
  }

  close(): void {
    this.socket?.close();
    this.socket = null;
  }
}
