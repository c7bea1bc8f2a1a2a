/**
 * Session flow state machine.
 *
 * The client is stateless beyond the session id (kept in the URL hash by
 * the app shell): every screen is rebuilt from server GETs, so a reload
 * or a second tab resumes exactly where the server says the session is.
 * At most one answer request is ever in flight.
 */

import {
  ApiError,
  ConflictReportSummary,
  MergeApi,
  SessionPayload,
} from "./api.js";

export type FlowState =
  | { kind: "idle" }
  | { kind: "loading" }
  | {
      kind: "prompt";
      sessionId: string;
      payload: Extract<SessionPayload, { done: false }>;
      pending: boolean;
      error?: string;
    }
  | {
      kind: "done";
      sessionId: string;
      branchA: string;
      order: string[];
      finalized: boolean;
      mergedRows?: number;
      epoch?: number;
      error?: string;
    }
  | { kind: "failed"; message: string };

export class SessionFlow {
  state: FlowState = { kind: "idle" };
  report: ConflictReportSummary | null = null;
  private listeners: Array<(s: FlowState) => void> = [];

  constructor(private readonly api: MergeApi) {}

  onChange(fn: (s: FlowState) => void): void {
    this.listeners.push(fn);
  }

  private set(state: FlowState): void {
    this.state = state;
    for (const fn of this.listeners) fn(state);
  }

  get sessionId(): string | null {
    const s = this.state;
    return s.kind === "prompt" || s.kind === "done" ? s.sessionId : null;
  }

  async start(branchA: string, branchB: string): Promise<void> {
    this.set({ kind: "loading" });
    try {
      const opened = await this.api.openMerge(branchA, branchB);
      this.report = opened.report;
      await this.resume(opened.session_id);
    } catch (err) {
      this.set({ kind: "failed", message: describe(err) });
    }
  }

  /** Rebuild the screen from the server; safe after reloads. */
  async resume(sessionId: string): Promise<void> {
    this.set({ kind: "loading" });
    try {
      this.apply(sessionId, await this.api.prompt(sessionId));
    } catch (err) {
      this.set({ kind: "failed", message: describe(err) });
    }
  }

  private apply(sessionId: string, payload: SessionPayload, finalized = false): void {
    if (payload.done) {
      this.set({
        kind: "done",
        sessionId,
        branchA: payload.branch_a,
        order: payload.order,
        finalized: finalized || Boolean(payload.finalized),
      });
    } else {
      this.set({ kind: "prompt", sessionId, payload, pending: false });
    }
  }

  async answer(side: "left" | "right"): Promise<void> {
    const s = this.state;
    if (s.kind !== "prompt" || s.pending) return;
    this.set({ ...s, pending: true, error: undefined });
    try {
      this.apply(s.sessionId, await this.api.answer(s.sessionId, side));
    } catch (err) {
      // keep the prompt; surface a retry banner without mutating anything
      this.set({ ...s, pending: false, error: describe(err) });
    }
  }

  async finalize(): Promise<void> {
    const s = this.state;
    if (s.kind !== "done" || s.finalized) return;
    try {
      const fin = await this.api.finalize(s.sessionId);
      this.set({
        ...s,
        finalized: true,
        mergedRows: fin.merged_rows,
        epoch: fin.epoch,
        error: undefined,
      });
    } catch (err) {
      this.set({ ...s, error: describe(err) });
    }
  }
}

function describe(err: unknown): string {
  if (err instanceof ApiError) {
    return err.status ? `${err.status}: ${err.message}` : err.message;
  }
  return err instanceof Error ? err.message : String(err);
}
