"""Shared fixtures: Go source trees written into tmp_path."""

import textwrap
from pathlib import Path
from typing import Callable

import pytest

from src.config import load_run_config
from src.pipeline import ScopeResult, build_scope

MODULE_PATH = "example.com/chain"


def write_tree(root: Path, files: dict[str, str], module: str | None = MODULE_PATH) -> Path:
    root.mkdir(parents=True, exist_ok=True)
    if module is not None:
        (root / "go.mod").write_text(f"module {module}\n\ngo 1.21\n", encoding="utf-8")
    for rel_path, source in files.items():
        path = root / rel_path
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(textwrap.dedent(source).lstrip("\n"), encoding="utf-8")
    return root


@pytest.fixture
def go_tree(tmp_path: Path) -> Callable[..., Path]:
    """Write `{relative path: Go source}` under a fresh module root."""
    def write(files: dict[str, str], module: str | None = MODULE_PATH) -> Path:
        return write_tree(tmp_path, files, module)
    return write


@pytest.fixture
def scoped(go_tree) -> Callable[..., ScopeResult]:
    """Parse, bind, graph and scope a tree with default configuration."""
    def build(files: dict[str, str], overrides: dict[str, str] | None = None) -> ScopeResult:
        root = go_tree(files)
        return build_scope(load_run_config(root, overrides))
    return build
