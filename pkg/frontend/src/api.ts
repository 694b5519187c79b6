// Typed HTTP client for the placement service. Every failure becomes an
// ApiError carrying the server's structured reason so the UI can show it.

import type {
  CalibrationPayload,
  InstructPayload,
  PlacePayload,
  ReportPayload,
  ScenePayload,
} from "./types.js";

export class ApiError extends Error {
  readonly status: number;
  readonly payload: unknown;

  constructor(status: number, payload: unknown) {
    super(extractMessage(status, payload));
    this.status = status;
    this.payload = payload;
  }
}

function extractMessage(status: number, payload: unknown): string {
  if (payload && typeof payload === "object") {
    const p = payload as Record<string, unknown>;
    if (typeof p.message === "string") return p.message;
    if (typeof p.detail === "string") return p.detail;
    if (typeof p.error === "string") return p.error;
  }
  return `request failed with status ${status}`;
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class RelplaceClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method, headers: {} };
    if (body !== undefined) {
      init.headers = { "Content-Type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    const text = await response.text();
    const payload = text ? JSON.parse(text) : null;
    if (!response.ok) {
      throw new ApiError(response.status, payload);
    }
    return payload as T;
  }

  async createSession(): Promise<string> {
    const body = await this.request<{ session_id: string }>("POST", "/session");
    return body.session_id;
  }

  getScene(sid: string): Promise<ScenePayload> {
    return this.request("GET", `/session/${sid}/scene`);
  }

  getCatalog(sid: string): Promise<{ subjects: string[]; references: string[] }> {
    return this.request("GET", `/session/${sid}/catalog`);
  }

  addObject(sid: string, name: string, center: [number, number]): Promise<ScenePayload> {
    return this.request("POST", `/session/${sid}/scene/objects`, {
      action: "add",
      name,
      center,
    });
  }

  moveObject(sid: string, objectId: number, center: [number, number]): Promise<ScenePayload> {
    return this.request("POST", `/session/${sid}/scene/objects`, {
      action: "move",
      object_id: objectId,
      center,
    });
  }

  removeObject(sid: string, objectId: number): Promise<ScenePayload> {
    return this.request("POST", `/session/${sid}/scene/objects`, {
      action: "remove",
      object_id: objectId,
    });
  }

  setSubject(sid: string, catalogName: string): Promise<{ pending_subject: string }> {
    return this.request("POST", `/session/${sid}/subject`, { catalog_name: catalogName });
  }

  instruct(sid: string, text: string): Promise<InstructPayload> {
    return this.request("POST", `/session/${sid}/instruct`, { text });
  }

  place(sid: string, strategy: "argmax" | "sample", seed?: number): Promise<PlacePayload> {
    return this.request("POST", `/session/${sid}/place`, { strategy, seed });
  }

  rate(sid: string, likert: number, success: boolean): Promise<{ history_length: number }> {
    return this.request("POST", `/session/${sid}/rate`, { likert, success });
  }

  report(sid: string): Promise<ReportPayload> {
    return this.request("GET", `/session/${sid}/report`);
  }

  calibration(sid: string): Promise<CalibrationPayload> {
    return this.request("GET", `/session/${sid}/calibration`);
  }
}
