"""Source emission for lowered programs, behind a pluggable backend registry.

A backend is any object with an ``emit(program, cfg) -> list[SourceFile]``
method. Two full backends ship registered out of the box: "c" (C99) and "go".
Third parties can register either a backend object or a plain dict of
per-construct format strings, which gets wrapped in a TemplateBackend.

``emit`` is pure: it returns file contents and never touches the filesystem.
"""

from __future__ import annotations

from typing import Dict, List, Optional, Union

from .. import astgen
from .base import BackendError, EmitConfig, SourceFile

# Every backend has to say how these constructs are rendered.
REQUIRED_TEMPLATE_KEYS = ("new", "insert", "remove", "contains", "if", "loop", "call")


class TemplateBackend:
    """Backend driven by per-construct format strings.

    Templates are ``str.format`` strings keyed by construct name:

      new                      -> {slot}
      insert, remove, contains -> {slot} {value}
      if                       -> {bit} {cond} {then} {orelse}
      loop                     -> {trips} {cond} {body}
      call                     -> {callee} {args}

    Block placeholders receive already-rendered text with statements joined
    by spaces. The output is a single file, ``program.<extension>``, with one
    line per function: ``f<id>: <rendered body>``.
    """

    def __init__(self, templates: Dict[str, str], extension: str = "txt"):
        missing = [key for key in REQUIRED_TEMPLATE_KEYS if key not in templates]
        if missing:
            raise BackendError(
                "backend template table is missing: %s" % ", ".join(missing)
            )
        self.templates = dict(templates)
        self.extension = extension

    def _render_block(self, stmts, trip_count: int) -> str:
        return " ".join(self._render_stmt(st, trip_count) for st in stmts)

    def _render_stmt(self, st, trip_count: int) -> str:
        t = self.templates
        if isinstance(st, astgen.New):
            return t["new"].format(slot=st.slot)
        if isinstance(st, astgen.Insert):
            return t["insert"].format(slot=st.slot, value=st.value)
        if isinstance(st, astgen.Remove):
            return t["remove"].format(slot=st.slot, value=st.value)
        if isinstance(st, astgen.Contains):
            return t["contains"].format(slot=st.slot, value=st.value)
        if isinstance(st, astgen.If):
            return t["if"].format(
                bit=st.bit_index,
                cond=self._render_block(st.cond, trip_count),
                then=self._render_block(st.then, trip_count),
                orelse=self._render_block(st.orelse or [], trip_count),
            )
        if isinstance(st, astgen.Loop):
            return t["loop"].format(
                trips=trip_count,
                cond=self._render_block(st.cond, trip_count),
                body=self._render_block(st.body, trip_count),
            )
        if isinstance(st, astgen.Call):
            return t["call"].format(
                callee=st.callee_id,
                args=",".join(str(s) for s in st.available_slots),
            )
        raise BackendError("unknown statement type: %r" % (st,))

    def emit(self, program: astgen.Program, cfg: EmitConfig) -> List[SourceFile]:
        trip = program.plan.trip_count
        lines = [
            "f%d: %s" % (fn.id, self._render_block(fn.body, trip))
            for fn in program.functions
        ]
        name = "program.%s" % self.extension
        return [SourceFile(name, "\n".join(lines) + "\n")]


_REGISTRY: Dict[str, object] = {}


def register_backend(backend_id: str, backend: Union[object, Dict[str, str]]) -> None:
    """Register a backend object or a template dict under a new id."""
    if backend_id in _REGISTRY:
        raise BackendError("backend id already registered: %r" % backend_id)
    if isinstance(backend, dict):
        backend = TemplateBackend(backend)
    if not callable(getattr(backend, "emit", None)):
        raise BackendError("backend %r has no emit(program, cfg) method" % backend_id)
    _REGISTRY[backend_id] = backend


def get_backend(backend_id: str):
    try:
        return _REGISTRY[backend_id]
    except KeyError:
        raise BackendError(
            "unknown backend %r (registered: %s)"
            % (backend_id, ", ".join(sorted(_REGISTRY)))
        ) from None


def registered_backends() -> List[str]:
    return sorted(_REGISTRY)


def emit(program: astgen.Program, cfg: EmitConfig) -> List[SourceFile]:
    """Render a program to source files with the configured backend."""
    if cfg.container_kind is not None and cfg.container_kind != program.plan.container_kind:
        raise BackendError(
            "config container %r does not match the planned container %r"
            % (cfg.container_kind, program.plan.container_kind)
        )
    return get_backend(cfg.backend).emit(program, cfg)


from .c import CBackend  # noqa: E402
from .go import GoBackend  # noqa: E402

register_backend("c", CBackend())
register_backend("go", GoBackend())

__all__ = [
    "BackendError",
    "CBackend",
    "EmitConfig",
    "GoBackend",
    "REQUIRED_TEMPLATE_KEYS",
    "SourceFile",
    "TemplateBackend",
    "emit",
    "get_backend",
    "register_backend",
    "registered_backends",
]
