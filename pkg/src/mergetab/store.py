"""On-disk repository: base snapshot, branch logs, merges, epochs.

Plain files, trivially clonable by copy:

    repo.json                     table name, schema, current epoch
    base.csv                      epoch-0 snapshot (internal CSV, keeps tombstones)
    epochs/<n>.csv                snapshots created by merges
    branches/<name>/history.jsonl one JSON record per modification
    branches/<name>/meta.json     fork epoch, merged flag
    merges/<n>.json               finalized interleaving with provenance
    .lock                         single-writer guard

Histories are append-only; pushes are fast-forward only, so every
divergence funnels through a merge session.
"""

from __future__ import annotations

import json
import os
import shutil
from pathlib import Path

from .csvio import read_plain_csv, read_snapshot, write_snapshot
from .mods import History, Interleaving, ModId, Modification, apply_history, mod_from_record, mod_to_record
from .schema import Schema
from .sqltext import parse_statement
from .table import TableSnapshot

SCHEMA_VERSION = 1
DEFAULT_BRANCH = "main"


class RepoError(Exception):
    pass


class RepoLockedError(RepoError):
    pass


class _Lock:
    def __init__(self, path: Path):
        self.path = path
        self.fd = None

    def __enter__(self):
        try:
            self.fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise RepoLockedError(f"repository is locked ({self.path})") from None
        os.write(self.fd, str(os.getpid()).encode())
        return self

    def __exit__(self, *exc):
        os.close(self.fd)
        self.path.unlink(missing_ok=True)


def _write_text(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text)
    tmp.replace(path)


class Repository:
    def __init__(self, root: Path):
        self.root = Path(root)
        meta_path = self.root / "repo.json"
        if not meta_path.exists():
            raise RepoError(f"not a repository: {self.root}")
        meta = json.loads(meta_path.read_text())
        self.table_name: str = meta["table"]
        self.schema: Schema = Schema.from_json(meta["schema"])
        self.epoch: int = int(meta["epoch"])
        self._snapshot_cache: dict[int, TableSnapshot] = {}

    # -- lifecycle -----------------------------------------------------

    @classmethod
    def init(cls, root, csv_text: str, table: str = "db", schema: Schema | None = None) -> "Repository":
        root = Path(root)
        if root.exists() and any(root.iterdir()):
            raise RepoError(f"path {root} is not empty")
        snap = read_plain_csv(csv_text, schema)
        root.mkdir(parents=True, exist_ok=True)
        (root / "branches").mkdir()
        (root / "merges").mkdir()
        (root / "epochs").mkdir()
        with open(root / "base.csv", "w", newline="") as f:
            write_snapshot(snap, f, internal=True)
        _write_text(
            root / "repo.json",
            json.dumps(
                {
                    "schema_version": SCHEMA_VERSION,
                    "table": table,
                    "schema": snap.schema.to_json(),
                    "epoch": 0,
                },
                indent=2,
            ),
        )
        return cls(root)

    @classmethod
    def clone(cls, src, dst) -> "Repository":
        src, dst = Path(src), Path(dst)
        if not (src / "repo.json").exists():
            raise RepoError(f"not a repository: {src}")
        if dst.exists() and any(dst.iterdir()):
            raise RepoError(f"path {dst} is not empty")
        shutil.copytree(src, dst, dirs_exist_ok=True)
        (dst / ".lock").unlink(missing_ok=True)
        return cls(dst)

    def lock(self) -> _Lock:
        return _Lock(self.root / ".lock")

    def _save_meta(self) -> None:
        _write_text(
            self.root / "repo.json",
            json.dumps(
                {
                    "schema_version": SCHEMA_VERSION,
                    "table": self.table_name,
                    "schema": self.schema.to_json(),
                    "epoch": self.epoch,
                },
                indent=2,
            ),
        )

    # -- snapshots -------------------------------------------------------

    def snapshot_at(self, epoch: int) -> TableSnapshot:
        if epoch not in self._snapshot_cache:
            path = self.root / ("base.csv" if epoch == 0 else f"epochs/{epoch}.csv")
            if not path.exists():
                raise RepoError(f"missing snapshot for epoch {epoch}")
            self._snapshot_cache[epoch] = read_snapshot(path.read_text(), self.schema)
        return self._snapshot_cache[epoch]

    def base(self) -> TableSnapshot:
        """Snapshot of the current epoch (the merge base for all branches)."""
        return self.snapshot_at(self.epoch)

    def branch_snapshot(self, branch: str) -> TableSnapshot:
        """Branch state: its history replayed over its fork epoch.

        A merged branch's history is already folded into the current
        epoch, so its state is simply the current base.
        """
        meta = self.branch_meta(branch)
        if meta.get("merged"):
            return self.base()
        return apply_history(self.snapshot_at(meta["epoch"]), self.history(branch))

    # -- branches ----------------------------------------------------------

    def branches(self) -> list[str]:
        bdir = self.root / "branches"
        return sorted(p.name for p in bdir.iterdir() if p.is_dir())

    def _branch_dir(self, branch: str, create: bool = False) -> Path:
        if not branch or "/" in branch or branch.startswith("."):
            raise RepoError(f"invalid branch name {branch!r}")
        d = self.root / "branches" / branch
        if not d.exists():
            if not create:
                raise RepoError(f"unknown branch {branch!r}")
            d.mkdir(parents=True)
            _write_text(d / "meta.json", json.dumps({"epoch": self.epoch, "merged": False}))
            (d / "history.jsonl").touch()
        return d

    def branch_meta(self, branch: str) -> dict:
        return json.loads((self._branch_dir(branch) / "meta.json").read_text())

    def history(self, branch: str) -> History:
        d = self._branch_dir(branch)
        mods = []
        for line in (d / "history.jsonl").read_text().splitlines():
            if line.strip():
                mods.append(mod_from_record(json.loads(line), self.schema))
        return History(branch, mods)

    def commit(self, branch: str, statement: str) -> Modification:
        """Parse, validate and append one statement to a branch log."""
        stmt = parse_statement(statement)
        if stmt.table != self.table_name:
            raise RepoError(
                f"statement addresses table {stmt.table!r}; this repository's "
                f"single table is {self.table_name!r}"
            )
        d = self._branch_dir(branch, create=True)
        meta = self.branch_meta(branch)
        if meta.get("merged"):
            raise RepoError(f"branch {branch!r} is already merged")
        if meta["epoch"] != self.epoch:
            raise RepoError(
                f"branch {branch!r} forked from epoch {meta['epoch']}, "
                f"repository is at {self.epoch}"
            )
        prior = self.history(branch)
        seq = prior.mods[-1].id.seq + 1 if prior.mods else 1
        mod = stmt.lower(self.schema, ModId(branch, seq))
        with open(d / "history.jsonl", "a") as f:
            f.write(json.dumps(mod_to_record(mod)) + "\n")
        return mod

    def push(self, remote: "Repository", branch: str) -> int:
        """Fast-forward the remote branch; divergence demands a merge."""
        local_hist = self.history(branch)
        try:
            remote_hist = remote.history(branch)
        except RepoError:
            remote._branch_dir(branch, create=True)
            remote_hist = History(branch, [])
        n = len(remote_hist.mods)
        if local_hist.mods[:n] != remote_hist.mods:
            raise RepoError(
                f"branch {branch!r} has diverged from the remote; a merge must occur"
            )
        new = local_hist.mods[n:]
        d = remote._branch_dir(branch)
        with open(d / "history.jsonl", "a") as f:
            for m in new:
                f.write(json.dumps(mod_to_record(m)) + "\n")
        return len(new)

    # -- merges --------------------------------------------------------

    def merge_finalize(self, interleaving: Interleaving, target_branch: str) -> TableSnapshot:
        """Persist a finalized order as the next epoch snapshot."""
        branches = sorted({m.id.branch for m in interleaving.mods})
        for b in branches:
            hist = self.history(b)
            ours = [m for m in interleaving.mods if m.id.branch == b]
            if ours != list(hist.mods):
                raise RepoError(
                    f"interleaving does not cover branch {b!r} exactly"
                )
        merged = apply_history(self.base(), interleaving)
        new_epoch = self.epoch + 1
        with open(self.root / "epochs" / f"{new_epoch}.csv", "w", newline="") as f:
            write_snapshot(merged, f, internal=True)
        _write_text(
            self.root / "merges" / f"{new_epoch}.json",
            json.dumps(
                {
                    "epoch": new_epoch,
                    "branches": branches,
                    "target": target_branch,
                    "order": [mod_to_record(m) for m in interleaving.mods],
                },
                indent=2,
            ),
        )
        for b in branches:
            d = self._branch_dir(b)
            meta = self.branch_meta(b)
            meta["merged"] = True
            _write_text(d / "meta.json", json.dumps(meta))
        self.epoch = new_epoch
        self._save_meta()
        return merged

    def merge_records(self) -> list[dict]:
        out = []
        for p in sorted((self.root / "merges").glob("*.json"), key=lambda p: int(p.stem)):
            out.append(json.loads(p.read_text()))
        return out
