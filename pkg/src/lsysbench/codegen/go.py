"""Go backend: emits Go sources that replay a program's trace and checksum.

Layout:
  single file mode -> main.go
  split file mode  -> main.go (runtime + entry + main), f<id>.go per callee

All files belong to `package main`. Reference-count bookkeeping is emitted to
keep traces aligned with the other backends, but freeing is left to the
garbage collector. Scalar mode pins each slot with `_ = v<k>` because unused
locals are compile errors in Go.
"""

from __future__ import annotations

from typing import List

from .. import astgen
from .base import BackendError, EmitConfig, SourceFile, _Writer

_BANNER = "// Generated benchmark program: {n} function(s), {kind} container."

_STRUCTS = {
    "array": """\
type lsObj struct {
	id   uint64
	refc uint64
	vals []int64
}

type lsParams struct {
	items    []*lsObj
	consumed int
}
""",
    "sortedList": """\
type lsNode struct {
	val  int64
	next *lsNode
}

type lsObj struct {
	id   uint64
	refc uint64
	head *lsNode
	size int
}

type lsParams struct {
	items    []*lsObj
	consumed int
}
""",
    "scalar": """\
type lsParams struct {
	items    []int64
	consumed int
}
""",
}

_IMPL_COMMON = """\
func lsRngNext() uint64 {
	lsRngState = lsRngState*6364136228273018565 + 1442695040888963407
	return lsRngState >> 33
}

func lsLog(opcode uint64, kind string, varID uint64, val int64, res int64) {
	event := opcode<<48 | (varID&0xFFFF)<<32 | (uint64(val)&0xFFFF)<<16 | uint64(res)&0xFFFF
	lsChecksum = lsChecksum*1099511628211 ^ event
	if lsDebug {
		fmt.Printf("OP kind=%s var=%d val=%d res=%d\\n", kind, varID, val, res)
	}
}
"""

_IMPL_PARAMS_HEAP = """\
func lsMakeParams(items []*lsObj) lsParams {
	for _, obj := range items {
		lsRetain(obj)
	}
	return lsParams{items: items}
}

func lsRetain(obj *lsObj) {
	obj.refc++
}

func lsRelease(obj *lsObj) {
	obj.refc--
}

func lsNew(data *lsParams) *lsObj {
	if data.consumed < len(data.items) {
		obj := data.items[data.consumed]
		data.consumed++
		lsLog(1, "new", obj.id, 0, 0)
		return obj
	}
	obj := &lsObj{id: lsNextID, refc: 1}
	lsNextID++
	lsLog(1, "new", obj.id, 0, 1)
	return obj
}
"""

_IMPL_ARRAY = """\
func lsInsert(obj *lsObj, val int64) {
	obj.vals = append(obj.vals, val)
	lsLog(2, "insert", obj.id, val, int64(len(obj.vals)))
}

func lsRemove(obj *lsObj, val int64) {
	for i, v := range obj.vals {
		if v == val {
			obj.vals = append(obj.vals[:i], obj.vals[i+1:]...)
			lsLog(3, "remove", obj.id, val, 1)
			return
		}
	}
	lsLog(3, "remove", obj.id, val, 0)
}

func lsContains(obj *lsObj, val int64) {
	for _, v := range obj.vals {
		if v == val {
			lsLog(4, "contains", obj.id, val, 1)
			return
		}
	}
	lsLog(4, "contains", obj.id, val, 0)
}
"""

_IMPL_SORTED = """\
func lsInsert(obj *lsObj, val int64) {
	link := &obj.head
	for *link != nil && (*link).val < val {
		link = &(*link).next
	}
	*link = &lsNode{val: val, next: *link}
	obj.size++
	lsLog(2, "insert", obj.id, val, int64(obj.size))
}

func lsRemove(obj *lsObj, val int64) {
	link := &obj.head
	for *link != nil && (*link).val < val {
		link = &(*link).next
	}
	if *link != nil && (*link).val == val {
		*link = (*link).next
		obj.size--
		lsLog(3, "remove", obj.id, val, 1)
		return
	}
	lsLog(3, "remove", obj.id, val, 0)
}

func lsContains(obj *lsObj, val int64) {
	node := obj.head
	for node != nil && node.val < val {
		node = node.next
	}
	res := int64(0)
	if node != nil && node.val == val {
		res = 1
	}
	lsLog(4, "contains", obj.id, val, res)
}
"""

_IMPL_SCALAR = """\
func lsMakeParams(items []int64) lsParams {
	return lsParams{items: items}
}

func lsNew(data *lsParams, slot uint64) int64 {
	if data.consumed < len(data.items) {
		v := data.items[data.consumed]
		data.consumed++
		lsLog(1, "new", slot, 0, 0)
		return v
	}
	lsLog(1, "new", slot, 0, 1)
	return 0
}

func lsInsert(v *int64, slot uint64, val int64) {
	*v += 1
	lsLog(2, "insert", slot, val, *v)
}

func lsRemove(v *int64, slot uint64, val int64) {
	res := int64(0)
	if *v != 0 {
		res = 1
	}
	*v -= 1
	lsLog(3, "remove", slot, val, res)
}

func lsContains(v int64, slot uint64, val int64) {
	res := int64(0)
	if v == 0 {
		res = 1
	}
	lsLog(4, "contains", slot, val, res)
}
"""


def _globals_block(seed: int, debug_trace: bool) -> str:
    return (
        "var lsDebug = %s\n" % ("true" if debug_trace else "false")
        + "var lsChecksum = uint64(14695981039346656037)\n"
        + "var lsNextID = uint64(1)\n"
        + "var lsRngState = uint64(%d)\n" % seed
    )


def _runtime_impl(kind: str) -> str:
    if kind == "scalar":
        return "\n".join([_IMPL_COMMON, _IMPL_SCALAR])
    body = _IMPL_ARRAY if kind == "array" else _IMPL_SORTED
    return "\n".join([_IMPL_COMMON, _IMPL_PARAMS_HEAP, body])


def _emit_function(fn: astgen.FunctionDef, kind: str, trip_count: int) -> str:
    scalar = kind == "scalar"
    wr = _Writer("\t")
    counters = {"loop": 0}

    def emit_block(stmts: List[object]) -> None:
        bound = []
        for st in stmts:
            if isinstance(st, astgen.New):
                if scalar:
                    wr.w("v%d := lsNew(&data, %d)" % (st.slot, st.slot))
                    wr.w("_ = v%d" % st.slot)
                else:
                    wr.w("v%d := lsNew(&data)" % st.slot)
                    bound.append(st.slot)
            elif isinstance(st, astgen.Insert):
                if scalar:
                    wr.w("lsInsert(&v%d, %d, %d)" % (st.slot, st.slot, st.value))
                else:
                    wr.w("lsInsert(v%d, %d)" % (st.slot, st.value))
            elif isinstance(st, astgen.Remove):
                if scalar:
                    wr.w("lsRemove(&v%d, %d, %d)" % (st.slot, st.slot, st.value))
                else:
                    wr.w("lsRemove(v%d, %d)" % (st.slot, st.value))
            elif isinstance(st, astgen.Contains):
                if scalar:
                    wr.w("lsContains(v%d, %d, %d)" % (st.slot, st.slot, st.value))
                else:
                    wr.w("lsContains(v%d, %d)" % (st.slot, st.value))
            elif isinstance(st, astgen.If):
                if st.cond:
                    wr.w("{")
                    wr.level += 1
                    emit_block(st.cond)
                    wr.level -= 1
                    wr.w("}")
                wr.w("if (path>>%d)&1 == 1 {" % st.bit_index)
                wr.level += 1
                emit_block(st.then)
                wr.level -= 1
                if st.orelse is not None:
                    wr.w("} else {")
                    wr.level += 1
                    emit_block(st.orelse)
                    wr.level -= 1
                wr.w("}")
            elif isinstance(st, astgen.Loop):
                k = counters["loop"]
                counters["loop"] += 1
                wr.w("for lsI%d := uint64(0); lsI%d < %d; lsI%d++ {" % (k, k, trip_count, k))
                wr.level += 1
                for block in (st.cond, st.body):
                    if block:
                        wr.w("{")
                        wr.level += 1
                        emit_block(block)
                        wr.level -= 1
                        wr.w("}")
                wr.level -= 1
                wr.w("}")
            elif isinstance(st, astgen.Call):
                slots = st.available_slots
                elem = "[]int64" if scalar else "[]*lsObj"
                if slots:
                    args = "%s{%s}" % (elem, ", ".join("v%d" % s for s in slots))
                else:
                    args = "nil"
                wr.w("f%d(lsMakeParams(%s), path)" % (st.callee_id, args))
            else:
                raise BackendError("unknown statement type: %r" % (st,))
        if not scalar:
            for slot in reversed(bound):
                wr.w("lsRelease(v%d)" % slot)

    wr.w("func f%d(data lsParams, path uint64) {" % fn.id)
    wr.level += 1
    emit_block(fn.body)
    if not scalar:
        wr.w("for lsP := data.consumed; lsP < len(data.items); lsP++ {")
        wr.level += 1
        wr.w("lsRelease(data.items[lsP])")
        wr.level -= 1
        wr.w("}")
    wr.level -= 1
    wr.w("}")
    return wr.text()


def _emit_main(entry_id: int) -> str:
    return (
        "func main() {\n"
        "\tpath := uint64(0)\n"
        "\tgotPath := false\n"
        "\tfor _, arg := range os.Args[1:] {\n"
        "\t\tif arg == \"--debug\" {\n"
        "\t\t\tlsDebug = true\n"
        "\t\t} else if !gotPath {\n"
        "\t\t\tif v, err := strconv.ParseUint(arg, 10, 64); err == nil {\n"
        "\t\t\t\tpath = v\n"
        "\t\t\t}\n"
        "\t\t\tgotPath = true\n"
        "\t\t}\n"
        "\t}\n"
        "\tf%d(lsMakeParams(nil), path)\n"
        "\tfmt.Printf(\"CHECKSUM %%d\\n\", lsChecksum)\n"
        "}\n" % entry_id
    )


_MAIN_IMPORTS = """\
package main

import (
	"fmt"
	"os"
	"strconv"
)
"""


class GoBackend:
    """Generates Go sources (single package main)."""

    id = "go"

    def emit(self, program: astgen.Program, cfg: EmitConfig) -> List[SourceFile]:
        kind = program.plan.container_kind
        trip = program.plan.trip_count
        banner = _BANNER.format(n=len(program.functions), kind=kind)

        main_parts = [
            banner,
            _MAIN_IMPORTS,
            _globals_block(program.plan.seed, cfg.debug_trace),
            _STRUCTS[kind],
            _runtime_impl(kind),
        ]
        files = []
        if cfg.split_files:
            main_parts.append(_emit_function(program.entry, kind, trip))
            main_parts.append(_emit_main(program.entry_id))
            files.append(SourceFile("main.go", "\n".join(main_parts)))
            for fn in program.functions:
                if fn.id == program.entry_id:
                    continue
                text = "\n".join([
                    banner,
                    "package main\n",
                    _emit_function(fn, kind, trip),
                ])
                files.append(SourceFile("f%d.go" % fn.id, text))
        else:
            for fn in program.functions:
                main_parts.append(_emit_function(fn, kind, trip))
            main_parts.append(_emit_main(program.entry_id))
            files.append(SourceFile("main.go", "\n".join(main_parts)))
        return files
