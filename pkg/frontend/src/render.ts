/**
 * DOM rendering: branch browser, conflict prompt, completion screen.
 *
 * Pure functions from server payloads to elements; no merge logic lives
 * here. The divergent cells in a prompt's sample rows are highlighted by
 * comparing the two outcome states the server computed.
 */

import {
  BranchInfo,
  CellValue,
  ConflictReportSummary,
  PromptPayload,
  SampleRow,
  TablePayload,
} from "./api.js";
import { FlowState } from "./state.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  cls?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (cls) node.className = cls;
  if (text !== undefined) node.textContent = text;
  return node;
}

function cellText(v: CellValue | undefined): string {
  if (v === null || v === undefined) return "—";
  return String(v);
}

export function renderBranchBrowser(
  branches: BranchInfo[],
  onStart: (a: string, b: string) => void,
): HTMLElement {
  const root = el("section", "branch-browser");
  root.appendChild(el("h2", undefined, "Branches"));
  const open = branches.filter((b) => !b.merged);
  const list = el("ul", "branches");
  for (const b of branches) {
    const item = el("li", b.merged ? "merged" : "open");
    item.textContent = `${b.name} — ${b.commits} commit(s)` + (b.merged ? " (merged)" : "");
    list.appendChild(item);
  }
  root.appendChild(list);

  const form = el("div", "merge-form");
  const selA = el("select", "branch-a");
  const selB = el("select", "branch-b");
  for (const b of open) {
    selA.appendChild(new Option(b.name, b.name));
    selB.appendChild(new Option(b.name, b.name));
  }
  if (open.length > 1) selB.selectedIndex = 1;
  const button = el("button", "start-merge", "Start merge");
  button.addEventListener("click", () => {
    if (selA.value && selB.value && selA.value !== selB.value) {
      onStart(selA.value, selB.value);
    }
  });
  form.append(selA, selB, button);
  root.appendChild(form);
  return root;
}

export function renderReport(report: ConflictReportSummary): HTMLElement {
  const box = el("div", "report");
  if (report.auto_mergeable) {
    box.appendChild(el("p", "ok", "Auto-mergeable: every order gives the same table."));
  } else {
    box.appendChild(
      el(
        "p",
        "conflicts",
        `${report.conflict_rows.length} row(s) end up order-dependent ` +
          `across ${report.pair_count} conflicting pair(s).`,
      ),
    );
    const sample = el("p", "conflict-sample", report.conflict_rows.slice(0, 8).join(", "));
    box.appendChild(sample);
  }
  return box;
}

function sampleTable(rows: SampleRow[]): HTMLElement {
  const attrs = new Set<string>();
  for (const r of rows) {
    for (const state of [r.current, r.left_first, r.right_first]) {
      if (state) Object.keys(state).forEach((a) => attrs.add(a));
    }
  }
  const cols = Array.from(attrs);
  const table = el("table", "sample-rows");
  const head = el("tr");
  head.append(el("th", undefined, "row"), el("th", undefined, "state"));
  for (const a of cols) head.appendChild(el("th", undefined, a));
  table.appendChild(head);

  for (const r of rows) {
    const variants: Array<[string, Record<string, CellValue> | null, string]> = [
      ["now", r.current, "current"],
      ["LEFT first", r.left_first, "left-outcome"],
      ["RIGHT first", r.right_first, "right-outcome"],
    ];
    for (const [label, state, cls] of variants) {
      const tr = el("tr", cls);
      tr.appendChild(el("td", "rid", label === "now" ? r.rid : ""));
      tr.appendChild(el("td", "variant", label));
      for (const a of cols) {
        const td = el("td", undefined, state ? cellText(state[a]) : "(absent)");
        const l = r.left_first ? r.left_first[a] : null;
        const rr = r.right_first ? r.right_first[a] : null;
        const differs =
          (r.left_first === null) !== (r.right_first === null) || cellText(l) !== cellText(rr);
        if (differs && label !== "now") td.classList.add("divergent");
        tr.appendChild(td);
      }
      table.appendChild(tr);
    }
  }
  return table;
}

export function renderPrompt(
  payload: PromptPayload,
  pending: boolean,
  error: string | undefined,
  onAnswer: (side: "left" | "right") => void,
): HTMLElement {
  const root = el("section", "prompt-screen");
  root.appendChild(el("h2", undefined, "Which change should apply first?"));
  root.appendChild(
    el("p", "progress", `answered ${payload.answered} of at most ${payload.bound}`),
  );
  if (error) {
    const banner = el("div", "error-banner", `Answer failed (${error}); retry.`);
    root.appendChild(banner);
  }
  const pair = el("div", "pair");
  pair.appendChild(el("pre", "stmt left", `${payload.left.id}\n${payload.left.statement}`));
  pair.appendChild(el("pre", "stmt right", `${payload.right.id}\n${payload.right.statement}`));
  root.appendChild(pair);
  root.appendChild(el("p", "kinds", `conflict kinds: ${payload.kinds.join(", ")}`));
  root.appendChild(sampleTable(payload.sample_rows));

  const buttons = el("div", "answers");
  const left = el("button", "answer-left", "apply LEFT first");
  const right = el("button", "answer-right", "apply RIGHT first");
  left.disabled = pending;
  right.disabled = pending;
  left.addEventListener("click", () => onAnswer("left"));
  right.addEventListener("click", () => onAnswer("right"));
  buttons.append(left, right);
  root.appendChild(buttons);
  return root;
}

export function renderTablePreview(payload: TablePayload): HTMLElement {
  const table = el("table", "merged-table");
  const head = el("tr");
  head.appendChild(el("th", undefined, "_rid"));
  for (const a of payload.attrs) head.appendChild(el("th", undefined, a));
  table.appendChild(head);
  for (const row of payload.rows) {
    const tr = el("tr");
    tr.appendChild(el("td", "rid", String(row["_rid"])));
    for (const a of payload.attrs) tr.appendChild(el("td", undefined, cellText(row[a])));
    table.appendChild(tr);
  }
  return table;
}

export function renderDone(
  state: Extract<FlowState, { kind: "done" }>,
  onFinalize: () => void,
): HTMLElement {
  const root = el("section", "completion-screen");
  root.appendChild(el("h2", undefined, "Order complete"));
  const timeline = el("ol", "order-timeline");
  for (const id of state.order) timeline.appendChild(el("li", undefined, id));
  root.appendChild(timeline);
  if (state.error) root.appendChild(el("div", "error-banner", state.error));
  if (state.finalized) {
    const msg =
      state.mergedRows !== undefined
        ? `Merged: ${state.mergedRows} visible rows at epoch ${state.epoch}.`
        : "Merged.";
    root.appendChild(el("p", "finalized", msg));
  } else {
    const button = el("button", "finalize", "Finalize merge");
    button.addEventListener("click", onFinalize);
    root.appendChild(button);
  }
  const preview = el("div", "table-preview");
  preview.id = "table-preview";
  root.appendChild(preview);
  return root;
}
