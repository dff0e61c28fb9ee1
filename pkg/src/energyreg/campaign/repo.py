"""Commit collection from a git repository or a JSON manifest.

A manifest repository is a JSON list of
``{id, date, message, tags, build_ok, test_ok}`` objects (``branches`` is an
optional extra list used by branch granularity). Git repositories are cloned
into the work directory and walked along the first-parent line.
"""

from __future__ import annotations

import json
import logging
import subprocess
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

from ..errors import EmptyHistory, RepoError
from ..model import CommitRef, parse_ts

log = logging.getLogger(__name__)


@dataclass
class ManifestRepo:
    path: str
    commits: list[CommitRef]
    build_ok: dict[str, bool] = field(default_factory=dict)
    test_ok: dict[str, bool] = field(default_factory=dict)
    branch_heads: set[str] = field(default_factory=set)

    @classmethod
    def load(cls, path: str) -> "ManifestRepo":
        try:
            entries = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise RepoError(f"cannot read manifest {path}: {exc}") from exc
        if not isinstance(entries, list):
            raise RepoError(f"manifest {path} must be a JSON list")
        commits, build_ok, test_ok, heads = [], {}, {}, set()
        for entry in entries:
            try:
                ref = CommitRef.make(str(entry["id"]), parse_ts(entry["date"]),
                                     entry.get("message", ""), tags=tuple(entry.get("tags", ())))
            except (KeyError, ValueError, TypeError) as exc:
                raise RepoError(f"bad manifest entry {entry!r}: {exc}") from exc
            commits.append(ref)
            build_ok[ref.id] = bool(entry.get("build_ok", True))
            test_ok[ref.id] = bool(entry.get("test_ok", True))
            if entry.get("branches"):
                heads.add(ref.id)
        commits.sort(key=lambda c: c.author_date)
        prev = None
        linked = []
        for c in commits:
            linked.append(CommitRef(c.id, c.short_id, c.author_date, c.message, prev, c.tags))
            prev = c.id
        return cls(path, linked, build_ok, test_ok, heads)


def _git(args: Sequence[str], cwd: str | Path | None = None) -> str:
    try:
        proc = subprocess.run(["git", *args], cwd=cwd, capture_output=True, text=True)
    except FileNotFoundError as exc:
        raise RepoError("git executable not found") from exc
    if proc.returncode != 0:
        raise RepoError(f"git {' '.join(args)} failed: {proc.stderr.strip()}")
    return proc.stdout


@dataclass
class GitRepo:
    source: str
    path: Path
    merge_trees: dict[str, tuple[str, str]] = field(default_factory=dict)

    @classmethod
    def open(cls, source: str, workdir: str | Path) -> "GitRepo":
        """Clone ``source`` into ``workdir/repo`` (or fetch if already present)."""
        dest = Path(workdir) / "repo"
        if (dest / ".git").exists():
            _git(["fetch", "--tags", "origin"], cwd=dest)
        else:
            dest.parent.mkdir(parents=True, exist_ok=True)
            _git(["clone", "--quiet", source, str(dest)])
        return cls(source, dest)

    def resolve(self, ref: str) -> str:
        for candidate in (ref, f"origin/{ref}"):
            try:
                return _git(["rev-parse", "--verify", "--quiet", f"{candidate}^{{commit}}"],
                            cwd=self.path).strip()
            except RepoError:
                continue
        raise RepoError(f"cannot resolve ref {ref!r}")

    def first_parent_log(self, head: str) -> list[tuple[CommitRef, list[str], str]]:
        out = _git(["log", "--first-parent", "--reverse",
                    "--format=%H%x1f%P%x1f%aI%x1f%T%x1f%B%x1e", head], cwd=self.path)
        rows = []
        for record in out.split("\x1e"):
            record = record.strip("\n")
            if not record:
                continue
            sha, parents, date, tree, body = record.split("\x1f", 4)
            plist = parents.split()
            ref = CommitRef.make(sha, parse_ts(date), body.strip(),
                                 parent_id=plist[0] if plist else None)
            rows.append((ref, plist, tree))
        return rows

    def tags_by_commit(self) -> dict[str, list[str]]:
        out = _git(["for-each-ref", "refs/tags",
                    "--format=%(objectname)%00%(*objectname)%00%(refname:short)"], cwd=self.path)
        tags: dict[str, list[str]] = {}
        for line in out.splitlines():
            obj, deref, name = line.split("\x00")
            tags.setdefault(deref or obj, []).append(name)
        return tags

    def branch_heads(self) -> set[str]:
        out = _git(["for-each-ref", "refs/heads", "refs/remotes", "--format=%(objectname)"],
                   cwd=self.path)
        return set(out.split())

    def add_worktree(self, commit_id: str, dest: Path) -> Path:
        if not (dest / ".git").exists():
            dest.parent.mkdir(parents=True, exist_ok=True)
            _git(["worktree", "add", "--detach", "--force", str(dest), commit_id], cwd=self.path)
        return dest


def drop_noop_merges(rows):
    """Drop merge commits whose tree equals their first parent's tree."""
    tree_of = {ref.id: tree for ref, _, tree in rows}
    kept = []
    for ref, parents, tree in rows:
        if len(parents) > 1 and tree_of.get(parents[0]) == tree:
            log.debug("dropping no-op merge %s", ref.short_id)
            continue
        kept.append((ref, parents, tree))
    return kept


def _apply_range(commits: list[CommitRef], commit_range, match: Callable[[str, CommitRef], bool]):
    if commit_range is None:
        return commits
    if isinstance(commit_range, int):
        return commits[-commit_range:]
    old, new = commit_range.split("..", 1)

    def find(ref: str) -> int:
        for i, c in enumerate(commits):
            if match(ref, c):
                return i
        raise RepoError(f"ref {ref!r} not on the selected history")

    lo = find(old) if old else 0
    hi = find(new) if new else len(commits) - 1
    if lo > hi:
        raise RepoError(f"range {commit_range!r} is reversed")
    return commits[lo:hi + 1]


def collect_commits(source, cfg) -> list[CommitRef]:
    """Chronological (oldest first) commits selected by range and granularity.

    ``source`` is a :class:`ManifestRepo` or :class:`GitRepo`. Ranges
    ``old..new`` are inclusive at both ends; an integer range keeps the
    newest N commits.

    Raises:
        RepoError: a ref cannot be resolved.
        EmptyHistory: nothing is left after filtering.
    """
    if isinstance(source, ManifestRepo):
        commits = list(source.commits)
        heads = source.branch_heads

        def match(ref, c):
            return c.id == ref or c.short_id == ref or ref in c.tags
    else:
        head = source.resolve(cfg.branch or "HEAD")
        rows = drop_noop_merges(source.first_parent_log(head))
        tags = source.tags_by_commit()
        commits = [CommitRef(r.id, r.short_id, r.author_date, r.message, r.parent_id,
                             tuple(sorted(tags.get(r.id, ())))) for r, _, _ in rows]
        heads = source.branch_heads() if cfg.granularity == "branch" else set()
        resolved: dict[str, Optional[str]] = {}

        def match(ref, c):
            if ref not in resolved:
                try:
                    resolved[ref] = source.resolve(ref)
                except RepoError:
                    resolved[ref] = None
            return c.id == resolved[ref]

    commits = _apply_range(commits, cfg.commit_range, match)
    if cfg.granularity == "tag":
        commits = [c for c in commits if c.tags]
    elif cfg.granularity == "branch":
        commits = [c for c in commits if c.id in heads]
    if not commits:
        raise EmptyHistory("no commits selected")
    return commits


def open_repo(cfg):
    if cfg.repo_manifest is not None:
        return ManifestRepo.load(cfg.repo_manifest)
    return GitRepo.open(cfg.repo_source, Path(cfg.workdir or ".energyreg-work"))
