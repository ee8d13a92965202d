// Websocket wrapper: frame parsing, command ids, reconnect.

import {
  type CommandName,
  type ServerFrame,
  encodeCommand,
  parseFrame,
} from "./protocol.js";

export interface SocketHandlers {
  onFrame: (frame: ServerFrame) => void;
  onOpen?: () => void;
  onClose?: () => void;
}

export class ConsoleSocket {
  private ws: WebSocket | null = null;
  private url: string;
  private handlers: SocketHandlers;
  private nextId = 1;

  constructor(url: string, handlers: SocketHandlers) {
    this.url = url;
    this.handlers = handlers;
    this.connect();
  }

  private connect(): void {
    this.ws = new WebSocket(this.url);
    this.ws.onopen = () => this.handlers.onOpen?.();
    this.ws.onclose = () => {
      this.handlers.onClose?.();
      setTimeout(() => this.connect(), 1000);
    };
    this.ws.onmessage = (ev) => {
      const frame = parseFrame(ev.data as string);
      if (frame) this.handlers.onFrame(frame);
    };
  }

  get ready(): boolean {
    return this.ws !== null && this.ws.readyState === WebSocket.OPEN;
  }

  send(command: CommandName, args: Record<string, unknown> = {}, id?: number): number {
    const cmdId = id ?? this.nextId++;
    if (this.ready) this.ws!.send(encodeCommand(cmdId, command, args));
    return cmdId;
  }
}
