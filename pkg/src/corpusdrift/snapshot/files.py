"""File enumeration under a configurable inclusion policy."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

__all__ = ["FilePolicy", "enumerate_files"]

DEFAULT_EXTENSIONS = frozenset({
    # documentation
    "md", "mdx", "markdown", "rst", "txt",
    # notebooks
    "ipynb",
    # code
    "py", "js", "jsx", "ts", "tsx", "java", "go", "rb", "rs", "c", "h",
    "cc", "cpp", "hpp", "cs", "php", "scala", "kt", "swift", "sh",
    "yaml", "yml", "toml",
})

DEFAULT_EXCLUDED_DIRS = frozenset({
    ".git", ".hg", ".svn", ".idea", ".vscode", "__pycache__",
    "node_modules", "dist", "build", ".venv", "venv", ".tox", "vendor",
})


@dataclass(frozen=True)
class FilePolicy:
    """Extension allowlist plus directory denylist, with a binary sniff."""

    include_ext: frozenset[str] = DEFAULT_EXTENSIONS
    exclude_dirs: frozenset[str] = DEFAULT_EXCLUDED_DIRS
    max_bytes: int = 2_000_000

    def admits(self, rel_path: Path, full_path: Path) -> bool:
        if any(part in self.exclude_dirs for part in rel_path.parts[:-1]):
            return False
        ext = rel_path.suffix.lstrip(".").lower()
        if ext not in self.include_ext:
            return False
        if full_path.stat().st_size > self.max_bytes:
            return False
        with full_path.open("rb") as fh:
            head = fh.read(8192)
        return b"\x00" not in head


DEFAULT_POLICY = FilePolicy()


def enumerate_files(worktree: str | Path, policy: FilePolicy = DEFAULT_POLICY) -> list[str]:
    """Repository-relative POSIX paths admitted by the policy, sorted.

    Deterministic for a given checkout: ordering is a plain string sort of
    the relative paths.
    """
    root = Path(worktree)
    if not root.is_dir():
        raise NotADirectoryError(f"worktree not readable: {root}")
    admitted = []
    for full in root.rglob("*"):
        if not full.is_file() or full.is_symlink():
            continue
        rel = full.relative_to(root)
        if policy.admits(rel, full):
            admitted.append(rel.as_posix())
    admitted.sort()
    return admitted
