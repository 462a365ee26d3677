/**
 * Bridge client: hello handshake, message dispatch and input transmission
 * over any WebSocket-shaped transport (injectable for tests).
 */

import {
  ClientMessage,
  PROTOCOL_VERSION,
  ProtocolError,
  ServerMessage,
  decodeServer,
  encodeClient,
} from "./protocol.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
}

export interface ClientHooks {
  onMessage?: (msg: ServerMessage) => void;
  onProtocolError?: (err: ProtocolError) => void;
}

export class CockpitClient {
  private socket: SocketLike;
  private hooks: ClientHooks;
  private lastSent: { u1: number; u2: number } | null = null;

  constructor(socket: SocketLike, hooks: ClientHooks = {}) {
    this.socket = socket;
    this.hooks = hooks;
  }

  /** Call once the transport is open. */
  hello(): void {
    this.send({ type: "hello", version: PROTOCOL_VERSION });
  }

  startTrial(condition: string): void {
    this.send({ type: "start_trial", condition });
  }

  abort(): void {
    this.send({ type: "abort" });
  }

  switchCondition(condition: string): void {
    this.send({ type: "switch_condition", condition });
  }

  /** Transmit a stick sample; duplicate consecutive samples are skipped to
   * spare the wire (the bridge zero-order holds anyway). */
  sendInput(u1: number, u2: number): void {
    if (this.lastSent && this.lastSent.u1 === u1 && this.lastSent.u2 === u2) {
      return;
    }
    this.lastSent = { u1, u2 };
    this.send({ type: "input", u1, u2 });
  }

  send(msg: ClientMessage): void {
    this.socket.send(encodeClient(msg));
  }

  /** Feed raw transport data (may hold several newline-separated frames). */
  handleRaw(data: string): void {
    for (const line of data.split("\n")) {
      if (!line.trim()) {
        continue;
      }
      let msg: ServerMessage;
      try {
        msg = decodeServer(line);
      } catch (err) {
        if (err instanceof ProtocolError && this.hooks.onProtocolError) {
          this.hooks.onProtocolError(err);
          continue;
        }
        throw err;
      }
      this.hooks.onMessage?.(msg);
    }
  }
}

/** Build the bridge URL from the page's query parameters. */
export function bridgeUrl(search: string, defaults = { host: "127.0.0.1", port: 8765 }): string {
  const params = new URLSearchParams(search);
  const host = params.get("host") ?? defaults.host;
  const port = params.get("port") ?? String(defaults.port);
  const session = params.get("session") ?? "session";
  return `ws://${host}:${port}/${session}`;
}
