/**
 * App shell: wires the flow state machine to the DOM and keeps the
 * session id in the URL hash so a reload resumes from the server.
 */

import { MergeApi } from "./api.js";
import {
  renderBranchBrowser,
  renderDone,
  renderPrompt,
  renderReport,
  renderTablePreview,
} from "./render.js";
import { FlowState, SessionFlow } from "./state.js";

function sessionFromHash(): string | null {
  const m = window.location.hash.match(/session=([0-9a-f]+)/);
  return m ? m[1] : null;
}

export class ConsoleApp {
  readonly flow: SessionFlow;

  constructor(
    private readonly api: MergeApi,
    private readonly root: HTMLElement,
    private readonly setHash: (sid: string) => void = (sid) => {
      window.location.hash = `session=${sid}`;
    },
  ) {
    this.flow = new SessionFlow(api);
    this.flow.onChange((s) => this.render(s));
  }

  async boot(existingSession: string | null): Promise<void> {
    if (existingSession) {
      await this.flow.resume(existingSession);
      return;
    }
    const data = await this.api.branches();
    this.root.replaceChildren(
      renderBranchBrowser(data.branches, (a, b) => {
        void this.flow.start(a, b).then(() => {
          const sid = this.flow.sessionId;
          if (sid) this.setHash(sid);
        });
      }),
    );
  }

  private render(state: FlowState): void {
    if (state.kind === "loading") {
      this.root.replaceChildren(
        Object.assign(document.createElement("p"), { textContent: "loading…" }),
      );
      return;
    }
    if (state.kind === "failed") {
      const p = document.createElement("p");
      p.className = "error-banner";
      p.textContent = state.message;
      this.root.replaceChildren(p);
      return;
    }
    if (state.kind === "prompt") {
      const screen = renderPrompt(state.payload, state.pending, state.error, (side) =>
        void this.flow.answer(side),
      );
      if (this.flow.report) screen.prepend(renderReport(this.flow.report));
      this.root.replaceChildren(screen);
      return;
    }
    if (state.kind === "done") {
      const screen = renderDone(state, () => void this.flow.finalize());
      this.root.replaceChildren(screen);
      if (state.finalized) {
        void this.api.table(state.branchA).then((t) => {
          const preview = this.root.querySelector("#table-preview");
          if (preview) preview.replaceChildren(renderTablePreview(t));
        });
      }
    }
  }
}

export function boot(): void {
  const api = new MergeApi("");
  const rootEl = document.getElementById("app");
  if (!rootEl) throw new Error("missing #app element");
  const app = new ConsoleApp(api, rootEl);
  void app.boot(sessionFromHash());
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  boot();
}
