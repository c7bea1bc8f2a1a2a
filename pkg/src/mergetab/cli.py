"""Command-line surface: repo lifecycle, detection, merges, bench, service.

Exit codes: 0 success (and `detect` with no conflicts), 2 usage/parse
errors with caret diagnostics, 3 `detect` found conflicts.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click

from .detect import detect as run_detect
from .mods import Interleaving
from .resolve import start_session
from .schema import Schema
from .sqltext import ParseError, print_modification
from .store import DEFAULT_BRANCH, RepoError, Repository

EXIT_USAGE = 2
EXIT_CONFLICTS = 3


def _repo_root(explicit: str | None) -> Path:
    root = explicit or os.environ.get("MP_REPO") or "."
    return Path(root)


def _open_repo(explicit: str | None) -> Repository:
    try:
        return Repository(_repo_root(explicit))
    except RepoError as exc:
        raise click.ClickException(str(exc))


def _parse_schema_option(text: str | None) -> Schema | None:
    if not text:
        return None
    cols = []
    for part in text.split(","):
        name, _, typ = part.partition(":")
        cols.append((name.strip(), typ.strip()))
    return Schema(cols)


@click.group()
def main():
    """Offline version control and merging for a single-table dataset."""


@main.command()
@click.argument("csv_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--repo", help="repository root (default: MP_REPO or cwd)")
@click.option("--table", default="db", show_default=True, help="table name for statements")
@click.option("--schema", "schema_text", help="explicit column types, e.g. 'City:str,Pop:dec'")
def init(csv_path, repo, table, schema_text):
    """Create a repository from a CSV snapshot."""
    try:
        r = Repository.init(
            _repo_root(repo), Path(csv_path).read_text(), table, _parse_schema_option(schema_text)
        )
    except (RepoError, ValueError) as exc:
        raise click.ClickException(str(exc))
    click.echo(f"initialized {r.root} with {len(r.base())} rows")


@main.command()
@click.argument("src", type=click.Path(exists=True, file_okay=False))
@click.argument("dst")
def clone(src, dst):
    """Copy a repository, histories included."""
    try:
        r = Repository.clone(src, dst)
    except RepoError as exc:
        raise click.ClickException(str(exc))
    click.echo(f"cloned into {r.root}")


@main.command()
@click.argument("statement")
@click.option("--repo", help="repository root")
@click.option("--branch", default=DEFAULT_BRANCH, show_default=True)
def commit(statement, repo, branch):
    """Append one UPDATE/INSERT/DELETE statement to a branch."""
    r = _open_repo(repo)
    try:
        with r.lock():
            mod = r.commit(branch, statement)
    except ParseError as exc:
        click.echo(exc.pretty(), err=True)
        sys.exit(EXIT_USAGE)
    except (RepoError, ValueError, KeyError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_USAGE)
    click.echo(f"committed {mod.id}")


@main.command()
@click.argument("remote", type=click.Path(exists=True, file_okay=False))
@click.option("--repo", help="repository root")
@click.option("--branch", default=DEFAULT_BRANCH, show_default=True)
def push(remote, repo, branch):
    """Fast-forward a branch onto another repository."""
    r = _open_repo(repo)
    try:
        target = Repository(Path(remote))
        with target.lock():
            n = r.push(target, branch)
    except RepoError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    click.echo(f"pushed {n} commits")


@main.command("detect")
@click.argument("branch_a")
@click.argument("branch_b")
@click.option("--repo", help="repository root")
@click.option("--json", "as_json", is_flag=True, help="machine-readable report")
def detect_cmd(branch_a, branch_b, repo, as_json):
    """Scan two branches for order-dependent rows (exit 3 when found)."""
    r = _open_repo(repo)
    try:
        rep = run_detect(r.base(), r.history(branch_a), r.history(branch_b))
    except RepoError as exc:
        raise click.ClickException(str(exc))
    if as_json:
        click.echo(json.dumps(rep.to_json(), indent=2))
    else:
        if rep.auto_mergeable:
            click.echo("auto-mergeable: every interleaving yields the same state")
        else:
            click.echo(f"conflicts on {len(rep.conflict_set)} row(s):")
            for rid in sorted(rep.conflict_set):
                click.echo(f"  {rid}")
            for p in rep.pairs:
                kinds = ",".join(sorted(p.kinds))
                click.echo(f"  pair ({p.i},{p.j}) [{kinds}] -> {len(p.rows)} row(s)")
    sys.exit(0 if rep.auto_mergeable else EXIT_CONFLICTS)


@main.command("oracle")
@click.argument("branch_a")
@click.argument("branch_b")
@click.option("--repo", help="repository root")
@click.option("--threshold", default=10**6, show_default=True, help="DP state budget")
def oracle_cmd(branch_a, branch_b, repo, threshold):
    """Ground-truth conflict set via the per-tuple DP (small repos)."""
    from .oracles import StateExplosion, oracle_conflicts

    r = _open_repo(repo)
    try:
        rows = oracle_conflicts(r.base(), r.history(branch_a), r.history(branch_b), threshold)
    except StateExplosion:
        click.echo("error: state budget exceeded; raise --threshold", err=True)
        sys.exit(1)
    for rid in sorted(rows):
        click.echo(str(rid))
    click.echo(f"{len(rows)} conflicting row(s)")


@main.command("merge")
@click.argument("branch_a")
@click.argument("branch_b")
@click.option("--repo", help="repository root")
@click.option("--answers", help="scripted answers, e.g. 'right,left' (for automation)")
@click.option("--no-finalize", is_flag=True, help="print the order without persisting")
def merge_cmd(branch_a, branch_b, repo, answers, no_finalize):
    """Interactively reconcile two branches and persist the merge."""
    r = _open_repo(repo)
    session = start_session(r.base(), r.history(branch_a), r.history(branch_b))
    scripted = [a.strip() for a in answers.split(",")] if answers else None
    consumed = 0
    while not session.done:
        p = session.prompt
        if scripted is None:
            click.echo("\nThese modifications conflict; which should apply first?")
            click.echo(f"  LEFT  {p.left.id}:  {print_modification(p.left, r.table_name)}")
            click.echo(f"  RIGHT {p.right.id}: {print_modification(p.right, r.table_name)}")
            for row in p.sample_rows[:5]:
                click.echo(
                    f"    row {row.rid}: now={row.values} left-first={row.left_first} "
                    f"right-first={row.right_first}"
                )
            choice = click.prompt("apply", type=click.Choice(["left", "right"]))
        else:
            if consumed >= len(scripted):
                raise click.ClickException("scripted answers exhausted")
            choice = scripted[consumed]
            consumed += 1
        session.answer(choice + "_first")
    order = Interleaving(session.result())
    click.echo("merged order: " + " ".join(str(m.id) for m in order.mods))
    if not no_finalize:
        try:
            with r.lock():
                merged = r.merge_finalize(order, branch_a)
        except RepoError as exc:
            raise click.ClickException(str(exc))
        click.echo(f"epoch {r.epoch}: {merged.n_visible()} visible rows")


@main.command("table")
@click.argument("branch")
@click.option("--repo", help="repository root")
@click.option("--limit", default=20, show_default=True)
@click.option("--offset", default=0, show_default=True)
def table_cmd(branch, repo, limit, offset):
    """Print a branch's visible rows after replay (CSV export format)."""
    import io

    from .csvio import write_snapshot

    r = _open_repo(repo)
    try:
        snap = r.branch_snapshot(branch)
    except RepoError as exc:
        raise click.ClickException(str(exc))
    buf = io.StringIO()
    write_snapshot(snap, buf, internal=False)
    lines = buf.getvalue().splitlines()
    click.echo(lines[0])
    for line in lines[1 + offset : 1 + offset + limit]:
        click.echo(line)


@main.command("serve")
@click.option("--repo", help="repository root")
@click.option("--listen", default="127.0.0.1:8077", show_default=True)
@click.option("--token", help="require this bearer token on /api/")
@click.option("--console", "console_dir", type=click.Path(file_okay=False), help="static console bundle")
def serve_cmd(repo, listen, token, console_dir):
    """Serve the merge HTTP API (and the browser console, when built)."""
    import uvicorn

    from .service import create_app

    root = _repo_root(repo)
    if console_dir is None:
        guess = Path(__file__).resolve().parent.parent.parent / "frontend" / "dist"
        console_dir = str(guess) if (guess / "index.html").exists() else None
    app = create_app(root, token=token, console_dir=console_dir)
    host, _, port = listen.rpartition(":")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port))


@main.command("bench")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", type=click.Path(dir_okay=False), help="write CSV rows here")
@click.option("--seeds", default=1, show_default=True, help="number of seeds to run")
@click.option("--threshold", default=10**8, show_default=True, help="oracle state budget")
@click.option("--kernels", is_flag=True, help="compare compiled vs pure-Python kernels instead")
def bench_cmd(config_path, out_path, seeds, threshold, kernels):
    """Accuracy/runtime measurements on seeded synthetic workloads."""
    from .bench import WorkloadConfig, run_suite, suite_csv_rows

    if kernels:
        from .kernel_bench import run_kernel_bench

        for line in run_kernel_bench():
            click.echo(line)
        return
    cfg = WorkloadConfig()
    if config_path:
        cfg = WorkloadConfig.from_json(json.loads(Path(config_path).read_text()))
    results = []
    for k in range(seeds):
        from dataclasses import replace

        res = run_suite(replace(cfg, seed=cfg.seed + k), state_threshold=threshold)
        results.append(res)
        click.echo(json.dumps(res.to_json()))
    if out_path:
        Path(out_path).write_text("\n".join(suite_csv_rows(results)) + "\n")
        click.echo(f"wrote {out_path}")


if __name__ == "__main__":
    main()
