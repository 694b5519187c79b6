// View state with a tiny subscription store. All authoritative data lives on
// the server; this only tracks what the user is looking at right now.

import type { InstructPayload, ScenePayload } from "./types.js";

export type Tool = "move" | "add" | "subject-pick";

export interface OverlayState {
  relation: string;
  opacity: number;
}

export interface ViewState {
  sessionId: string | null;
  scene: ScenePayload | null;
  tool: Tool;
  addName: string;
  pendingSubject: string | null;
  instruct: InstructPayload | null;
  overlay: OverlayState | null;
  placement: [number, number] | null;
  ratingEnabled: boolean;
  banner: string | null;
}

export function initialState(): ViewState {
  return {
    sessionId: null,
    scene: null,
    tool: "move",
    addName: "box",
    pendingSubject: null,
    instruct: null,
    overlay: null,
    placement: null,
    ratingEnabled: false,
    banner: null,
  };
}

type Listener = (state: ViewState) => void;

export class Store {
  private state: ViewState = initialState();
  private listeners: Listener[] = [];

  get(): ViewState {
    return this.state;
  }

  update(patch: Partial<ViewState>): void {
    this.state = { ...this.state, ...patch };
    for (const fn of this.listeners) fn(this.state);
  }

  subscribe(fn: Listener): () => void {
    this.listeners.push(fn);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== fn);
    };
  }
}

/** Overlay may only be shown after a successful instruct; the rating widget
 * only after a placement. */
export function invariantsHold(state: ViewState): boolean {
  if (state.overlay && !state.instruct) return false;
  if (state.ratingEnabled && state.placement === null) return false;
  return true;
}
