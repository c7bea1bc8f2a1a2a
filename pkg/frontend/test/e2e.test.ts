/**
 * End-to-end console test against a live merge service.
 *
 * Builds the four-city fixture repository with the real CLI, starts the
 * real server, then drives the console's DOM in jsdom like a scripted
 * browser session: two precedence answers, finalize, check the rendered
 * merged table, and verify a mid-session reload resumes at the same
 * prompt.
 */

import { execFileSync, spawn, ChildProcess } from "node:child_process";
import { mkdtempSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { MergeApi } from "../src/api.js";
import { ConsoleApp } from "../src/main.js";

const PORT = 8771;
const BASE = `http://127.0.0.1:${PORT}`;

const CSV = `City,State,Population,Electricity
Los Angles,CA,3.2,43
Seattle,D.C.,0.6,8709
Burbank,CA,0.1,0
San Jose,CA,1.0,0
`;

const A = [
  "UPDATE db SET Electricity = Electricity * 1000 WHERE State = 'CA'",
  "DELETE FROM db WHERE Population <= 0.2",
];
const B = [
  "UPDATE db SET Electricity = 9 WHERE City = 'San Jose'",
  "UPDATE db SET Electricity = 0.4 WHERE City = 'Burbank'",
  "DELETE FROM db WHERE Electricity / Population < 10",
];

let workdir: string;
let server: ChildProcess | null = null;

async function waitForServer(): Promise<void> {
  for (let i = 0; i < 100; i++) {
    try {
      const resp = await fetch(`${BASE}/api/branches`);
      if (resp.ok) return;
    } catch {
      /* not up yet */
    }
    await new Promise((r) => setTimeout(r, 150));
  }
  throw new Error("service did not come up");
}

async function waitFor<T>(probe: () => T | null, what: string, ms = 8000): Promise<T> {
  const deadline = Date.now() + ms;
  for (;;) {
    const got = probe();
    if (got !== null) return got;
    if (Date.now() > deadline) throw new Error(`timed out waiting for ${what}`);
    await new Promise((r) => setTimeout(r, 25));
  }
}

function promptIds(root: HTMLElement): { left: string; right: string } | null {
  const stmts = root.querySelectorAll(".pair .stmt");
  if (stmts.length !== 2) return null;
  return {
    left: (stmts[0].textContent ?? "").split("\n")[0],
    right: (stmts[1].textContent ?? "").split("\n")[0],
  };
}

beforeAll(async () => {
  workdir = mkdtempSync(join(tmpdir(), "console-e2e-"));
  const repo = join(workdir, "repo");
  writeFileSync(join(workdir, "data.csv"), CSV);
  execFileSync("mp", ["init", join(workdir, "data.csv"), "--repo", repo]);
  for (const stmt of A) execFileSync("mp", ["commit", stmt, "--repo", repo, "--branch", "alvarez"]);
  for (const stmt of B) execFileSync("mp", ["commit", stmt, "--repo", repo, "--branch", "bano"]);
  server = spawn("mp", ["serve", "--repo", repo, "--listen", `127.0.0.1:${PORT}`], {
    stdio: "ignore",
  });
  await waitForServer();
}, 60_000);

afterAll(() => {
  server?.kill();
  rmSync(workdir, { recursive: true, force: true });
});

describe("console against a live service", () => {
  it("answers two prompts, survives a reload, finalizes the good merge", async () => {
    const root = document.createElement("div");
    document.body.appendChild(root);
    const app = new ConsoleApp(new MergeApi(BASE), root, () => undefined);
    await app.boot(null);

    // branch browser -> start the merge
    await waitFor(() => root.querySelector<HTMLButtonElement>(".start-merge"), "browser");
    const selA = root.querySelector<HTMLSelectElement>(".branch-a")!;
    const selB = root.querySelector<HTMLSelectElement>(".branch-b")!;
    selA.value = "alvarez";
    selB.value = "bano";
    root.querySelector<HTMLButtonElement>(".start-merge")!.click();

    // first prompt shows the first conflicting pair with both outcomes
    await waitFor(
      () => (promptIds(root)?.left === "alvarez:1" ? true : null),
      "first prompt",
    );
    expect(promptIds(root)).toEqual({ left: "alvarez:1", right: "bano:1" });
    const divergent = Array.from(root.querySelectorAll("td.divergent")).map(
      (td) => td.textContent,
    );
    expect(divergent).toContain("9");
    expect(divergent).toContain("9000");

    // answer 1: the other branch's fix lands first
    root.querySelector<HTMLButtonElement>(".answer-right")!.click();
    await waitFor(
      () => (promptIds(root)?.right === "bano:2" ? true : null),
      "second prompt",
    );

    // mid-session reload: a fresh app over the same session resumes here
    const sid = app.flow.sessionId!;
    const root2 = document.createElement("div");
    document.body.appendChild(root2);
    const app2 = new ConsoleApp(new MergeApi(BASE), root2, () => undefined);
    await app2.boot(sid);
    await waitFor(() => promptIds(root2), "resumed prompt");
    expect(promptIds(root2)).toEqual(promptIds(root));

    // answer 2 on the resumed session, then finalize
    root2.querySelector<HTMLButtonElement>(".answer-left")!.click();
    await waitFor(
      () => root2.querySelector<HTMLButtonElement>(".finalize"),
      "completion screen",
    );
    const order = Array.from(root2.querySelectorAll(".order-timeline li")).map(
      (li) => li.textContent,
    );
    expect(order).toEqual(["bano:1", "alvarez:1", "alvarez:2", "bano:2", "bano:3"]);

    root2.querySelector<HTMLButtonElement>(".finalize")!.click();
    await waitFor(() => root2.querySelector(".finalized"), "finalize ack");

    // rendered merged table: the reconciled state, with the per-capita
    // cleanup preserved (San Jose at 9000) and the suburb gone
    const table = await waitFor(
      () => root2.querySelector<HTMLTableElement>(".merged-table"),
      "merged table",
    );
    const text = table.textContent ?? "";
    expect(text).toContain("San Jose");
    expect(text).toContain("9000");
    expect(text).toContain("43000");
    expect(text).toContain("8709");
    expect(text).not.toContain("Burbank");
    const rows = table.querySelectorAll("tr").length - 1;
    expect(rows).toBe(3);
  }, 60_000);
});
