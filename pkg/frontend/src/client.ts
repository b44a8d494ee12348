// WebSocket client for the console gateway: parse, dispatch, reconnect
// with capped backoff. Rendering is driven by message arrival.

import { GatewayMsg } from "./protocol.js";

export interface ClientHooks {
  onMessage: (msg: GatewayMsg) => void;
  onStatus: (connected: boolean) => void;
}

export class GatewayClient {
  private ws: WebSocket | null = null;
  private retryMs = 500;
  private closed = false;

  constructor(private url: string, private hooks: ClientHooks) {}

  connect(): void {
    this.ws = new WebSocket(this.url);
    this.ws.onopen = () => {
      this.retryMs = 500;
      this.hooks.onStatus(true);
    };
    this.ws.onmessage = (event) => {
      let parsed: GatewayMsg;
      try {
        parsed = JSON.parse(String(event.data));
      } catch {
        return; // not ours
      }
      this.hooks.onMessage(parsed);
    };
    this.ws.onclose = () => {
      this.hooks.onStatus(false);
      if (!this.closed) {
        setTimeout(() => this.connect(), this.retryMs);
        this.retryMs = Math.min(this.retryMs * 2, 8000);
      }
    };
    this.ws.onerror = () => {
      // onclose handles the retry
    };
  }

  get connected(): boolean {
    return this.ws !== null && this.ws.readyState === WebSocket.OPEN;
  }

  send(payload: string): boolean {
    if (!this.connected || this.ws === null) return false;
    this.ws.send(payload);
    return true;
  }

  close(): void {
    this.closed = true;
    this.ws?.close();
  }
}
