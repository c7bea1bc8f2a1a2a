"""HTTP facade over detection and merge sessions.

Single-repository server. Sessions are persisted under .sessions/ inside
the repository, so a restarted process resumes every open session; the
console polls GET prompt (no push channel). Answers are serialized per
session: a second simultaneous answer gets 409.
"""

from __future__ import annotations

import json
import secrets
import threading
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse, JSONResponse
from pydantic import BaseModel

from .detect import detect
from .mods import Interleaving, _value_to_json
from .resolve import MergeSession, restore_session, session_state, start_session
from .sqltext import print_modification
from .store import Repository, RepoError

SCHEMA_VERSION = 1


class MergeRequest(BaseModel):
    branch_a: str
    branch_b: str


class AnswerRequest(BaseModel):
    precedes: str  # "left" | "right"


def _payload(**fields) -> dict:
    return {"schema_version": SCHEMA_VERSION, **fields}


class _Sessions:
    """Session store: JSON files plus per-session answer locks."""

    def __init__(self, root: Path):
        self.dir = root / ".sessions"
        self.dir.mkdir(exist_ok=True)
        self._locks: dict[str, threading.Lock] = {}
        self._guard = threading.Lock()

    def lock_for(self, sid: str) -> threading.Lock:
        with self._guard:
            return self._locks.setdefault(sid, threading.Lock())

    def path(self, sid: str) -> Path:
        return self.dir / f"{sid}.json"

    def load(self, sid: str) -> dict:
        p = self.path(sid)
        if not p.exists():
            raise HTTPException(404, "unknown session")
        return json.loads(p.read_text())

    def save(self, doc: dict) -> None:
        self.path(doc["id"]).write_text(json.dumps(doc))

    def active_pair(self, a: str, b: str) -> str | None:
        pair = tuple(sorted((a, b)))
        for p in self.dir.glob("*.json"):
            doc = json.loads(p.read_text())
            if not doc.get("finalized") and tuple(sorted((doc["branch_a"], doc["branch_b"]))) == pair:
                return doc["id"]
        return None


def _prompt_json(session: MergeSession, table: str, doc: dict) -> dict:
    p = session.prompt
    return {
        "done": False,
        "branch_a": doc["branch_a"],
        "branch_b": doc["branch_b"],
        "left": {"id": str(p.left.id), "statement": print_modification(p.left, table)},
        "right": {"id": str(p.right.id), "statement": print_modification(p.right, table)},
        "kinds": sorted(p.pair_kinds),
        "answered": session.questions,
        "bound": session._bound,
        "sample_rows": [
            {
                "rid": str(r.rid),
                "current": r.values,
                "left_first": r.left_first,
                "right_first": r.right_first,
            }
            for r in p.sample_rows
        ],
    }


def create_app(repo_root, token: str | None = None, console_dir=None) -> FastAPI:
    repo = Repository(Path(repo_root))
    sessions = _Sessions(repo.root)
    app = FastAPI(title="mergetab merge service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    if token:

        @app.middleware("http")
        async def _auth(request: Request, call_next):
            if request.method != "OPTIONS" and request.url.path.startswith("/api/"):
                got = request.headers.get("authorization", "")
                if got != f"Bearer {token}":
                    return JSONResponse({"detail": "unauthorized"}, status_code=401)
            return await call_next(request)

    def _rebuild(doc: dict) -> MergeSession:
        if doc["epoch"] != repo.epoch:
            raise HTTPException(409, "repository epoch moved past this session")
        d0 = repo.base()
        h1 = repo.history(doc["branch_a"])
        h2 = repo.history(doc["branch_b"])
        return restore_session(d0, h1, h2, doc["state"])

    @app.get("/api/branches")
    def branches():
        out = []
        for name in repo.branches():
            meta = repo.branch_meta(name)
            out.append(
                {
                    "name": name,
                    "commits": len(repo.history(name)),
                    "merged": bool(meta.get("merged")),
                    "epoch": meta["epoch"],
                }
            )
        return _payload(branches=out, table=repo.table_name, epoch=repo.epoch)

    @app.get("/api/table/{branch}")
    def table(branch: str, limit: int = 50, offset: int = 0):
        try:
            snap = repo.branch_snapshot(branch)
        except RepoError:
            raise HTTPException(404, f"unknown branch {branch!r}")
        rows = []
        visible = [i for i in range(len(snap.rids)) if not snap.dead.vals[i]]
        for i in visible[offset : offset + max(0, limit)]:
            rows.append(
                {
                    "_rid": str(snap.rids[i]),
                    **{
                        a: _value_to_json(col.vals[i])
                        for a, col in zip(snap.schema.attrs, snap._cols)
                    },
                }
            )
        return _payload(
            branch=branch,
            attrs=list(snap.schema.attrs),
            total=len(visible),
            offset=offset,
            rows=rows,
        )

    @app.post("/api/merge")
    def open_merge(req: MergeRequest):
        for b in (req.branch_a, req.branch_b):
            if b not in repo.branches():
                raise HTTPException(404, f"unknown branch {b!r}")
        existing = sessions.active_pair(req.branch_a, req.branch_b)
        if existing:
            raise HTTPException(409, f"session {existing} already open for this pair")
        d0 = repo.base()
        h1 = repo.history(req.branch_a)
        h2 = repo.history(req.branch_b)
        report = detect(d0, h1, h2)
        session = start_session(d0, h1, h2)
        sid = secrets.token_hex(16)
        doc = {
            "id": sid,
            "branch_a": req.branch_a,
            "branch_b": req.branch_b,
            "epoch": repo.epoch,
            "state": session_state(session),
            "finalized": False,
        }
        sessions.save(doc)
        return _payload(session_id=sid, report=report.to_json())

    @app.get("/api/merge/{sid}/prompt")
    def prompt(sid: str):
        doc = sessions.load(sid)
        session = _rebuild(doc)
        if session.done:
            return _payload(
                done=True,
                branch_a=doc["branch_a"],
                branch_b=doc["branch_b"],
                order=[str(m.id) for m in session.result()],
                answered=session.questions,
                finalized=doc.get("finalized", False),
            )
        return _payload(**_prompt_json(session, repo.table_name, doc))

    @app.post("/api/merge/{sid}/answer")
    def answer(sid: str, req: AnswerRequest):
        if req.precedes not in ("left", "right"):
            raise HTTPException(422, "precedes must be 'left' or 'right'")
        lock = sessions.lock_for(sid)
        if not lock.acquire(blocking=False):
            raise HTTPException(409, "another answer is in flight for this session")
        try:
            doc = sessions.load(sid)
            session = _rebuild(doc)
            if session.done:
                raise HTTPException(409, "session is already complete")
            session.answer(req.precedes + "_first")
            doc["state"] = session_state(session)
            sessions.save(doc)
            if session.done:
                return _payload(
                    done=True,
                    branch_a=doc["branch_a"],
                    branch_b=doc["branch_b"],
                    order=[str(m.id) for m in session.result()],
                    finalized=False,
                )
            return _payload(**_prompt_json(session, repo.table_name, doc))
        finally:
            lock.release()

    @app.post("/api/merge/{sid}/finalize")
    def finalize(sid: str):
        lock = sessions.lock_for(sid)
        if not lock.acquire(blocking=False):
            raise HTTPException(409, "session is busy")
        try:
            doc = sessions.load(sid)
            if doc.get("finalized"):
                raise HTTPException(409, "session already finalized")
            session = _rebuild(doc)
            if not session.done:
                raise HTTPException(409, "session is not complete")
            with repo.lock():
                merged = repo.merge_finalize(
                    Interleaving(session.result()), doc["branch_a"]
                )
            doc["finalized"] = True
            sessions.save(doc)
            return _payload(merged_rows=merged.n_visible(), epoch=repo.epoch)
        finally:
            lock.release()

    if console_dir:
        console = Path(console_dir)

        @app.get("/")
        def index():
            return FileResponse(console / "index.html")

        @app.get("/{asset_path:path}")
        def asset(asset_path: str):
            p = (console / asset_path).resolve()
            if not str(p).startswith(str(console.resolve())) or not p.is_file():
                raise HTTPException(404, "not found")
            return FileResponse(p)

    return app
