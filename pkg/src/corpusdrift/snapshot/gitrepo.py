"""Resolve repositories to their state at a cutoff date.

All date comparisons use the committer timestamp in UTC, inclusive of the
cutoff day, so "repositories as of October 2024" means the latest commit
on the default branch committed at or before 2024-10-31T23:59:59Z.
"""

from __future__ import annotations

import datetime as dt
import subprocess
from pathlib import Path

from ..errors import EmptyHistoryError, GitError

__all__ = ["clone", "default_branch", "resolve_commit", "checkout", "ensure_worktree"]


def _git(args: list[str], cwd: Path | None = None) -> str:
    proc = subprocess.run(
        ["git", *args], cwd=cwd, capture_output=True, text=True)
    if proc.returncode != 0:
        where = f" in {cwd}" if cwd else ""
        raise GitError(f"git {' '.join(args)}{where} failed: {proc.stderr.strip()}")
    return proc.stdout


def clone(url: str, dest: Path) -> Path:
    """Clone url into dest unless dest is already a git checkout."""
    dest = Path(dest)
    if (dest / ".git").exists():
        return dest
    dest.parent.mkdir(parents=True, exist_ok=True)
    _git(["clone", "--quiet", str(url), str(dest)])
    return dest


def default_branch(repo_dir: Path) -> str:
    """Name of the default branch of the clone's origin (falls back to HEAD)."""
    try:
        ref = _git(["symbolic-ref", "refs/remotes/origin/HEAD"], cwd=repo_dir).strip()
        return ref.rsplit("/", 1)[-1]
    except GitError:
        return _git(["rev-parse", "--abbrev-ref", "HEAD"], cwd=repo_dir).strip()


def _cutoff_epoch(cutoff: dt.date) -> int:
    end = dt.datetime(cutoff.year, cutoff.month, cutoff.day, 23, 59, 59,
                      tzinfo=dt.timezone.utc)
    return int(end.timestamp())


def resolve_commit(repo_dir: Path, cutoff: dt.date, branch: str | None = None) -> str:
    """Hash of the latest commit with committer time <= cutoff end-of-day.

    "Latest" is by committer timestamp; equal timestamps resolve to the
    commit listed first by git log (the topologically newer one), keeping
    resolution deterministic.
    """
    branch = branch or default_branch(repo_dir)
    log = _git(["log", "--format=%H %ct", branch], cwd=repo_dir)
    limit = _cutoff_epoch(cutoff)
    best_hash = ""
    best_time = -1
    for line in log.splitlines():
        commit, epoch = line.split()
        epoch = int(epoch)
        if epoch <= limit and epoch > best_time:
            best_hash, best_time = commit, epoch
    if not best_hash:
        raise EmptyHistoryError(
            f"no commit on {branch} at or before {cutoff.isoformat()} in {repo_dir}")
    return best_hash


def checkout(repo_dir: Path, commit: str) -> None:
    _git(["-c", "advice.detachedHead=false", "checkout", "--force", "--quiet",
          commit], cwd=repo_dir)


def ensure_worktree(url: str, dest: Path, commit: str) -> Path:
    """Clone (if needed) and check out the given commit; returns the worktree."""
    repo_dir = clone(url, dest)
    checkout(repo_dir, commit)
    return repo_dir
