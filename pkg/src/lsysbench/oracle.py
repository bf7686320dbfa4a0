"""Reference interpreter: executes a planned program under a given PATH.

Produces the trace, checksum, and allocation statistics every backend's
emitted program must reproduce bit for bit.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .astgen import (
    Call,
    Contains,
    If,
    Insert,
    Loop,
    New,
    OperandPlan,
    Program,
    Remove,
)

_MASK64 = (1 << 64) - 1

CHECKSUM_OFFSET = 14695981039346656037
CHECKSUM_PRIME = 1099511628211
OPCODES = {"new": 1, "insert": 2, "remove": 3, "contains": 4}


class OracleInvariantError(RuntimeError):
    """Interpreter state violated an internal invariant: generator bug."""


@dataclass
class ExecConfig:
    path: int = 0
    plan: Optional[OperandPlan] = None  # defaults to the program's own plan
    debug_trace: bool = False


@dataclass
class HeapObject:
    id: int
    refc: int
    payload: List[int]


@dataclass(frozen=True)
class TraceEvent:
    op: str
    var: int
    val: int
    res: int


@dataclass
class RunStats:
    op_counts: Dict[str, int] = field(default_factory=dict)
    max_live: int = 0
    live_at_exit: int = 0
    checksum: int = CHECKSUM_OFFSET


def checksum_update(cs: int, op: str, var: int, val: int, res: int) -> int:
    event = (
        (OPCODES[op] << 48)
        | ((var & 0xFFFF) << 32)
        | ((val & 0xFFFF) << 16)
        | (res & 0xFFFF)
    )
    return ((cs * CHECKSUM_PRIME) & _MASK64) ^ event


def format_trace_event(event: TraceEvent) -> str:
    return f"OP kind={event.op} var={event.var} val={event.val} res={event.res}"


class _Heap:
    def __init__(self):
        self.next_id = 1
        self.live: Dict[int, HeapObject] = {}
        self.max_live = 0

    def alloc(self, payload) -> HeapObject:
        obj = HeapObject(id=self.next_id, refc=1, payload=payload)
        self.next_id += 1
        self.live[obj.id] = obj
        self.max_live = max(self.max_live, len(self.live))
        return obj

    def check_live(self, obj: HeapObject) -> None:
        if obj.id not in self.live:
            raise OracleInvariantError(f"use of freed object {obj.id}")

    def incref(self, obj: HeapObject) -> None:
        self.check_live(obj)
        obj.refc += 1

    def decref(self, obj: HeapObject) -> None:
        self.check_live(obj)
        obj.refc -= 1
        if obj.refc == 0:
            del self.live[obj.id]
        elif obj.refc < 0:
            raise OracleInvariantError(f"negative refC on object {obj.id}")


class _Frame:
    __slots__ = ("slots", "params", "consumed", "saved")

    def __init__(self, slot_count: int, params: List[HeapObject]):
        self.slots: List[Optional[HeapObject]] = [None] * slot_count
        self.params = params
        self.consumed = 0
        self.saved: List[Optional[HeapObject]] = []  # shadowed bindings


def interpret(
    program: Program,
    cfg: Optional[ExecConfig] = None,
    verify_refcounts: bool = False,
) -> Tuple[List[TraceEvent], RunStats]:
    """Run the entry function; returns (trace, stats).

    The trace list is populated only when cfg.debug_trace is set; the
    checksum and statistics are always computed. If with bit b runs its cond
    block first, then takes the then-branch iff (path >> b) & 1 is 1. Loop
    runs cond then body exactly trip_count times. Call passes the objects
    bound to the visible slots (one refC increment each); inside the callee
    every New consumes the next unconsumed passed reference as an alias
    while one remains, else allocates fresh. Slots bound by a block are
    released when that block exits, so loop-iteration locals are freed every
    iteration; the callee releases unconsumed parameters on exit.

    Scalar mode has no heap: slots are plain integer variables, parameters
    are passed by value and consumed as copies, and the trace's var field is
    the per-function slot ordinal instead of an allocation id.
    """
    cfg = cfg or ExecConfig()
    plan = cfg.plan or program.plan
    kind = plan.container_kind
    scalar = kind == "scalar"
    path = cfg.path & _MASK64
    heap = _Heap()
    trace: List[TraceEvent] = []
    op_counts = {op: 0 for op in OPCODES}
    cs = CHECKSUM_OFFSET
    frames: List[_Frame] = []

    def emit(op: str, var: int, val: int, res: int) -> None:
        nonlocal cs
        cs = checksum_update(cs, op, var, val, res)
        op_counts[op] += 1
        if cfg.debug_trace:
            trace.append(TraceEvent(op, var, val, res))
        if verify_refcounts and not scalar:
            _check_refcount_conservation(heap, frames)

    def do_insert(obj: HeapObject, value: int) -> int:
        if kind == "array":
            obj.payload.append(value)
        else:
            bisect.insort(obj.payload, value)
        return len(obj.payload)

    def do_remove(obj: HeapObject, value: int) -> int:
        if kind == "array":
            try:
                obj.payload.remove(value)
                return 1
            except ValueError:
                return 0
        i = bisect.bisect_left(obj.payload, value)
        if i < len(obj.payload) and obj.payload[i] == value:
            del obj.payload[i]
            return 1
        return 0

    def do_contains(obj: HeapObject, value: int) -> int:
        if kind == "array":
            return 1 if value in obj.payload else 0
        i = bisect.bisect_left(obj.payload, value)
        return 1 if i < len(obj.payload) and obj.payload[i] == value else 0

    def slot_get(frame: _Frame, slot: int):
        bound_value = frame.slots[slot]
        if bound_value is None:
            raise OracleInvariantError(f"use of unbound slot {slot}")
        if not scalar:
            heap.check_live(bound_value)
        return bound_value

    def exec_block(frame: _Frame, stmts) -> None:
        bound: List[int] = []  # slots first bound in this block, in order

        def bind(slot: int, value) -> None:
            if slot not in bound:
                bound.append(slot)
                frame.saved.append(frame.slots[slot])
            # else: same-block rebinding overwrites the binding; for
            # containers the old reference is dropped without a release (a
            # leak). The generator never emits this; hand-built programs can.
            frame.slots[slot] = value

        for st in stmts:
            if isinstance(st, New):
                if frame.consumed < len(frame.params):
                    taken = frame.params[frame.consumed]
                    frame.consumed += 1
                    res = 0  # consumed parameter: alias (value copy in scalar)
                else:
                    taken = 0 if scalar else heap.alloc([])
                    res = 1
                bind(st.slot, taken)
                emit("new", st.slot if scalar else taken.id, 0, res)
            elif isinstance(st, Insert):
                if scalar:
                    v = slot_get(frame, st.slot) + 1
                    frame.slots[st.slot] = v
                    emit("insert", st.slot, st.value, v)
                else:
                    obj = slot_get(frame, st.slot)
                    emit("insert", obj.id, st.value, do_insert(obj, st.value))
            elif isinstance(st, Remove):
                if scalar:
                    v = slot_get(frame, st.slot)
                    frame.slots[st.slot] = v - 1
                    emit("remove", st.slot, st.value, 1 if v != 0 else 0)
                else:
                    obj = slot_get(frame, st.slot)
                    emit("remove", obj.id, st.value, do_remove(obj, st.value))
            elif isinstance(st, Contains):
                if scalar:
                    res = 1 if slot_get(frame, st.slot) == 0 else 0
                    emit("contains", st.slot, st.value, res)
                else:
                    obj = slot_get(frame, st.slot)
                    emit("contains", obj.id, st.value, do_contains(obj, st.value))
            elif isinstance(st, If):
                exec_block(frame, st.cond)
                if (path >> st.bit_index) & 1:
                    exec_block(frame, st.then)
                elif st.orelse is not None:
                    exec_block(frame, st.orelse)
            elif isinstance(st, Loop):
                for _ in range(plan.trip_count):
                    exec_block(frame, st.cond)
                    exec_block(frame, st.body)
            elif isinstance(st, Call):
                args = [slot_get(frame, s) for s in st.available_slots]
                if not scalar:
                    for arg in args:
                        heap.incref(arg)
                run_function(program.functions[st.callee_id], args)
            else:
                raise OracleInvariantError(f"unknown statement {st!r}")
        for slot in reversed(bound):
            if not scalar:
                heap.decref(frame.slots[slot])
            frame.slots[slot] = frame.saved.pop()

    def run_function(fn, params: list) -> None:
        frame = _Frame(fn.slot_count, params)
        frames.append(frame)
        exec_block(frame, fn.body)
        if not scalar:
            for obj in frame.params[frame.consumed:]:
                heap.decref(obj)
        frames.pop()

    run_function(program.functions[program.entry_id], [])
    stats = RunStats(
        op_counts=op_counts,
        max_live=heap.max_live,
        live_at_exit=len(heap.live),
        checksum=cs,
    )
    return trace, stats


def _check_refcount_conservation(heap: _Heap, frames: List[_Frame]) -> None:
    held = 0
    for frame in frames:
        held += sum(1 for obj in frame.slots if obj is not None)
        held += sum(1 for obj in frame.saved if obj is not None)
        held += len(frame.params) - frame.consumed
    total = sum(obj.refc for obj in heap.live.values())
    if total != held:
        raise OracleInvariantError(
            f"refcount conservation broken: sum refC {total} != {held} held references"
        )


def verify_no_leaks(stats: RunStats) -> bool:
    return stats.live_at_exit == 0


def run_to_text(program: Program, cfg: Optional[ExecConfig] = None) -> str:
    """Exactly what a compiled backend binary prints for this run."""
    cfg = cfg or ExecConfig()
    trace, stats = interpret(program, cfg)
    lines = [format_trace_event(e) + "\n" for e in trace]
    lines.append(f"CHECKSUM {stats.checksum}\n")
    return "".join(lines)
