"""Shared codegen types."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional


class BackendError(Exception):
    """Bad backend registration or emit configuration."""


@dataclass(frozen=True)
class SourceFile:
    relative_path: str
    contents: str


@dataclass
class EmitConfig:
    backend: str
    container_kind: Optional[str] = None  # None: echo the program's plan
    split_files: bool = False
    debug_trace: bool = False  # baked default; --debug still works at runtime
    output_dir: Optional[str] = None


class _Writer:
    """Indented line buffer."""

    def __init__(self, indent_unit: str):
        self.lines = []
        self.level = 0
        self.indent_unit = indent_unit

    def w(self, line: str = "") -> None:
        if line:
            self.lines.append(self.indent_unit * self.level + line)
        else:
            self.lines.append("")

    def text(self) -> str:
        return "\n".join(self.lines) + "\n"
