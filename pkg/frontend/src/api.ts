/**
 * Typed client for the merge service HTTP API.
 *
 * Every payload carries schema_version; the client rejects versions it
 * does not understand instead of rendering garbage.
 */

export interface BranchInfo {
  name: string;
  commits: number;
  merged: boolean;
  epoch: number;
}

export interface BranchesPayload {
  schema_version: number;
  branches: BranchInfo[];
  table: string;
  epoch: number;
}

export type CellValue = string | number | null;

export interface TablePayload {
  schema_version: number;
  branch: string;
  attrs: string[];
  total: number;
  offset: number;
  rows: Record<string, CellValue>[];
}

export interface SampleRow {
  rid: string;
  current: Record<string, CellValue> | null;
  left_first: Record<string, CellValue> | null;
  right_first: Record<string, CellValue> | null;
}

export interface PromptPayload {
  schema_version: number;
  done: false;
  branch_a: string;
  branch_b: string;
  left: { id: string; statement: string };
  right: { id: string; statement: string };
  kinds: string[];
  answered: number;
  bound: number;
  sample_rows: SampleRow[];
}

export interface DonePayload {
  schema_version: number;
  done: true;
  branch_a: string;
  branch_b: string;
  order: string[];
  answered?: number;
  finalized?: boolean;
}

export type SessionPayload = PromptPayload | DonePayload;

export interface ConflictReportSummary {
  auto_mergeable: boolean;
  conflict_rows: string[];
  pair_count: number;
}

export interface OpenMergePayload {
  schema_version: number;
  session_id: string;
  report: ConflictReportSummary;
}

export interface FinalizePayload {
  schema_version: number;
  merged_rows: number;
  epoch: number;
}

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

const SUPPORTED_SCHEMA = 1;

export class MergeApi {
  constructor(
    private readonly base: string = "",
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  private async request<T extends { schema_version: number }>(
    path: string,
    init?: RequestInit,
  ): Promise<T> {
    const resp = await this.fetchFn(this.base + path, init);
    if (!resp.ok) {
      let detail = resp.statusText;
      try {
        const body = (await resp.json()) as { detail?: string };
        if (body.detail) detail = body.detail;
      } catch {
        /* non-JSON error body */
      }
      throw new ApiError(resp.status, detail);
    }
    const data = (await resp.json()) as T;
    if (data.schema_version !== SUPPORTED_SCHEMA) {
      throw new ApiError(0, `unsupported schema_version ${data.schema_version}`);
    }
    return data;
  }

  branches(): Promise<BranchesPayload> {
    return this.request("/api/branches");
  }

  table(branch: string, limit = 50, offset = 0): Promise<TablePayload> {
    const q = `limit=${limit}&offset=${offset}`;
    return this.request(`/api/table/${encodeURIComponent(branch)}?${q}`);
  }

  openMerge(branchA: string, branchB: string): Promise<OpenMergePayload> {
    return this.request("/api/merge", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ branch_a: branchA, branch_b: branchB }),
    });
  }

  prompt(sessionId: string): Promise<SessionPayload> {
    return this.request(`/api/merge/${sessionId}/prompt`);
  }

  answer(sessionId: string, precedes: "left" | "right"): Promise<SessionPayload> {
    return this.request(`/api/merge/${sessionId}/answer`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ precedes }),
    });
  }

  finalize(sessionId: string): Promise<FinalizePayload> {
    return this.request(`/api/merge/${sessionId}/finalize`, { method: "POST" });
  }
}
