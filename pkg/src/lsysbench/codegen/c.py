"""C backend: emits C99 sources that replay a program's trace and checksum.

Layout:
  single file mode -> runtime.h, main.c
  split file mode  -> runtime.h, main.c (runtime + entry + main), f<id>.c per callee

The runtime functions do the logging themselves, so each statement in a
generated function is a single call. Sources compile warning-free under
`-std=c99 -pedantic -Wall -Wextra -Werror`.
"""

from __future__ import annotations

from typing import List

from .. import astgen
from .base import BackendError, EmitConfig, SourceFile, _Writer

_BANNER = "/* Generated benchmark program: {n} function(s), {kind} container. */"

_HEADER_COMMON = """\
#ifndef LS_RUNTIME_H
#define LS_RUNTIME_H

#include <stddef.h>
#include <stdint.h>
"""

_HEADER_STRUCTS = {
    "array": """\
typedef struct {
    uint64_t id;
    uint64_t refc;
    int64_t *vals;
    size_t len;
    size_t cap;
} ls_obj;

typedef struct {
    ls_obj **items;
    size_t len;
    size_t consumed;
} ls_params;
""",
    "sortedList": """\
typedef struct ls_node {
    int64_t val;
    struct ls_node *next;
} ls_node;

typedef struct {
    uint64_t id;
    uint64_t refc;
    ls_node *head;
    size_t len;
} ls_obj;

typedef struct {
    ls_obj **items;
    size_t len;
    size_t consumed;
} ls_params;
""",
    "scalar": """\
typedef struct {
    int64_t *items;
    size_t len;
    size_t consumed;
} ls_params;
""",
}

_HEADER_PROTOS_HEAP = """\
extern int ls_debug;
extern uint64_t ls_checksum;
extern uint64_t ls_next_id;
extern uint64_t ls_rng_state;

uint64_t ls_rng_next(void);
void ls_log(int opcode, const char *kind, uint64_t var, int64_t val, int64_t res);
ls_params ls_make_params(ls_obj **items, size_t len);
ls_obj *ls_new(ls_params *data);
void ls_retain(ls_obj *obj);
void ls_release(ls_obj *obj);
void ls_insert(ls_obj *obj, int64_t val);
void ls_remove(ls_obj *obj, int64_t val);
void ls_contains(ls_obj *obj, int64_t val);
"""

_HEADER_PROTOS_SCALAR = """\
extern int ls_debug;
extern uint64_t ls_checksum;
extern uint64_t ls_next_id;
extern uint64_t ls_rng_state;

uint64_t ls_rng_next(void);
void ls_log(int opcode, const char *kind, uint64_t var, int64_t val, int64_t res);
ls_params ls_make_params(int64_t *items, size_t len);
int64_t ls_new(ls_params *data, uint64_t slot);
void ls_insert(int64_t *var, uint64_t slot, int64_t val);
void ls_remove(int64_t *var, uint64_t slot, int64_t val);
void ls_contains(int64_t var, uint64_t slot, int64_t val);
"""

_IMPL_COMMON = """\
uint64_t ls_rng_next(void)
{
    ls_rng_state = ls_rng_state * UINT64_C(6364136228273018565)
        + UINT64_C(1442695040888963407);
    return ls_rng_state >> 33;
}

void ls_log(int opcode, const char *kind, uint64_t var, int64_t val, int64_t res)
{
    uint64_t event = ((uint64_t)opcode << 48) | ((var & UINT64_C(0xFFFF)) << 32)
        | (((uint64_t)val & UINT64_C(0xFFFF)) << 16) | ((uint64_t)res & UINT64_C(0xFFFF));
    ls_checksum = (ls_checksum * UINT64_C(1099511628211)) ^ event;
    if (ls_debug) {
        printf("OP kind=%s var=%" PRIu64 " val=%" PRId64 " res=%" PRId64 "\\n",
               kind, var, val, res);
    }
}
"""

_IMPL_PARAMS_HEAP = """\
ls_params ls_make_params(ls_obj **items, size_t len)
{
    ls_params params;
    size_t i;
    params.items = items;
    params.len = len;
    params.consumed = 0;
    for (i = 0; i < len; i++) {
        ls_retain(items[i]);
    }
    return params;
}

void ls_retain(ls_obj *obj)
{
    obj->refc++;
}
"""

_IMPL_ARRAY = """\
static void ls_grow(ls_obj *obj)
{
    if (obj->len == obj->cap) {
        obj->cap = obj->cap ? obj->cap * 2 : 8;
        obj->vals = (int64_t *)realloc(obj->vals, obj->cap * sizeof(int64_t));
        if (!obj->vals) {
            abort();
        }
    }
}

ls_obj *ls_new(ls_params *data)
{
    ls_obj *obj;
    if (data->consumed < data->len) {
        obj = data->items[data->consumed];
        data->consumed++;
        ls_log(1, "new", obj->id, 0, 0);
        return obj;
    }
    obj = (ls_obj *)malloc(sizeof(ls_obj));
    if (!obj) {
        abort();
    }
    obj->id = ls_next_id++;
    obj->refc = 1;
    obj->vals = NULL;
    obj->len = 0;
    obj->cap = 0;
    ls_log(1, "new", obj->id, 0, 1);
    return obj;
}

void ls_release(ls_obj *obj)
{
    obj->refc--;
    if (obj->refc == 0) {
        free(obj->vals);
        free(obj);
    }
}

void ls_insert(ls_obj *obj, int64_t val)
{
    ls_grow(obj);
    obj->vals[obj->len] = val;
    obj->len++;
    ls_log(2, "insert", obj->id, val, (int64_t)obj->len);
}

void ls_remove(ls_obj *obj, int64_t val)
{
    size_t i;
    for (i = 0; i < obj->len; i++) {
        if (obj->vals[i] == val) {
            memmove(obj->vals + i, obj->vals + i + 1,
                    (obj->len - i - 1) * sizeof(int64_t));
            obj->len--;
            ls_log(3, "remove", obj->id, val, 1);
            return;
        }
    }
    ls_log(3, "remove", obj->id, val, 0);
}

void ls_contains(ls_obj *obj, int64_t val)
{
    size_t i;
    for (i = 0; i < obj->len; i++) {
        if (obj->vals[i] == val) {
            ls_log(4, "contains", obj->id, val, 1);
            return;
        }
    }
    ls_log(4, "contains", obj->id, val, 0);
}
"""

_IMPL_SORTED = """\
ls_obj *ls_new(ls_params *data)
{
    ls_obj *obj;
    if (data->consumed < data->len) {
        obj = data->items[data->consumed];
        data->consumed++;
        ls_log(1, "new", obj->id, 0, 0);
        return obj;
    }
    obj = (ls_obj *)malloc(sizeof(ls_obj));
    if (!obj) {
        abort();
    }
    obj->id = ls_next_id++;
    obj->refc = 1;
    obj->head = NULL;
    obj->len = 0;
    ls_log(1, "new", obj->id, 0, 1);
    return obj;
}

void ls_release(ls_obj *obj)
{
    obj->refc--;
    if (obj->refc == 0) {
        ls_node *node = obj->head;
        while (node) {
            ls_node *next = node->next;
            free(node);
            node = next;
        }
        free(obj);
    }
}

void ls_insert(ls_obj *obj, int64_t val)
{
    ls_node *node = (ls_node *)malloc(sizeof(ls_node));
    ls_node **link = &obj->head;
    if (!node) {
        abort();
    }
    node->val = val;
    while (*link && (*link)->val < val) {
        link = &(*link)->next;
    }
    node->next = *link;
    *link = node;
    obj->len++;
    ls_log(2, "insert", obj->id, val, (int64_t)obj->len);
}

void ls_remove(ls_obj *obj, int64_t val)
{
    ls_node **link = &obj->head;
    while (*link && (*link)->val < val) {
        link = &(*link)->next;
    }
    if (*link && (*link)->val == val) {
        ls_node *hit = *link;
        *link = hit->next;
        free(hit);
        obj->len--;
        ls_log(3, "remove", obj->id, val, 1);
        return;
    }
    ls_log(3, "remove", obj->id, val, 0);
}

void ls_contains(ls_obj *obj, int64_t val)
{
    const ls_node *node = obj->head;
    while (node && node->val < val) {
        node = node->next;
    }
    ls_log(4, "contains", obj->id, val, (node && node->val == val) ? 1 : 0);
}
"""

_IMPL_SCALAR = """\
ls_params ls_make_params(int64_t *items, size_t len)
{
    ls_params params;
    params.items = items;
    params.len = len;
    params.consumed = 0;
    return params;
}

int64_t ls_new(ls_params *data, uint64_t slot)
{
    int64_t v = 0;
    int64_t res = 1;
    if (data->consumed < data->len) {
        v = data->items[data->consumed];
        data->consumed++;
        res = 0;
    }
    ls_log(1, "new", slot, 0, res);
    return v;
}

void ls_insert(int64_t *var, uint64_t slot, int64_t val)
{
    *var += 1;
    ls_log(2, "insert", slot, val, *var);
}

void ls_remove(int64_t *var, uint64_t slot, int64_t val)
{
    ls_log(3, "remove", slot, val, (*var != 0) ? 1 : 0);
    *var -= 1;
}

void ls_contains(int64_t var, uint64_t slot, int64_t val)
{
    ls_log(4, "contains", slot, val, (var == 0) ? 1 : 0);
}
"""


def _runtime_header(program: astgen.Program, kind: str) -> str:
    parts = [
        _BANNER.format(n=len(program.functions), kind=kind),
        _HEADER_COMMON,
        _HEADER_STRUCTS[kind],
        _HEADER_PROTOS_SCALAR if kind == "scalar" else _HEADER_PROTOS_HEAP,
    ]
    protos = "".join(
        "void f%d(ls_params data, uint64_t path);\n" % fn.id for fn in program.functions
    )
    parts.append(protos)
    parts.append("#endif /* LS_RUNTIME_H */\n")
    return "\n".join(parts)


def _globals_block(seed: int, debug_trace: bool) -> str:
    return (
        "int ls_debug = %d;\n" % (1 if debug_trace else 0)
        + "uint64_t ls_checksum = UINT64_C(14695981039346656037);\n"
        + "uint64_t ls_next_id = UINT64_C(1);\n"
        + "uint64_t ls_rng_state = UINT64_C(%d);\n" % seed
    )


def _runtime_impl(kind: str) -> str:
    if kind == "scalar":
        return "\n".join([_IMPL_COMMON, _IMPL_SCALAR])
    body = _IMPL_ARRAY if kind == "array" else _IMPL_SORTED
    return "\n".join([_IMPL_COMMON, _IMPL_PARAMS_HEAP, body])


def _emit_function(fn: astgen.FunctionDef, kind: str, trip_count: int) -> str:
    scalar = kind == "scalar"
    wr = _Writer("    ")
    counters = {"loop": 0, "args": 0}

    def emit_block(stmts: List[object]) -> None:
        bound = []
        for st in stmts:
            if isinstance(st, astgen.New):
                if scalar:
                    wr.w("int64_t v%d = ls_new(&data, UINT64_C(%d));" % (st.slot, st.slot))
                    wr.w("(void)v%d;" % st.slot)
                else:
                    wr.w("ls_obj *v%d = ls_new(&data);" % st.slot)
                    bound.append(st.slot)
            elif isinstance(st, astgen.Insert):
                if scalar:
                    wr.w("ls_insert(&v%d, UINT64_C(%d), INT64_C(%d));"
                         % (st.slot, st.slot, st.value))
                else:
                    wr.w("ls_insert(v%d, INT64_C(%d));" % (st.slot, st.value))
            elif isinstance(st, astgen.Remove):
                if scalar:
                    wr.w("ls_remove(&v%d, UINT64_C(%d), INT64_C(%d));"
                         % (st.slot, st.slot, st.value))
                else:
                    wr.w("ls_remove(v%d, INT64_C(%d));" % (st.slot, st.value))
            elif isinstance(st, astgen.Contains):
                if scalar:
                    wr.w("ls_contains(v%d, UINT64_C(%d), INT64_C(%d));"
                         % (st.slot, st.slot, st.value))
                else:
                    wr.w("ls_contains(v%d, INT64_C(%d));" % (st.slot, st.value))
            elif isinstance(st, astgen.If):
                if st.cond:
                    wr.w("{")
                    wr.level += 1
                    emit_block(st.cond)
                    wr.level -= 1
                    wr.w("}")
                wr.w("if ((path >> %d) & 1) {" % st.bit_index)
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
                wr.w("for (uint64_t ls_i%d = 0; ls_i%d < UINT64_C(%d); ls_i%d++) {"
                     % (k, k, trip_count, k))
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
                if slots:
                    k = counters["args"]
                    counters["args"] += 1
                    elem = "int64_t" if scalar else "ls_obj *"
                    wr.w("{")
                    wr.level += 1
                    wr.w("%sls_args%d[] = { %s };"
                         % (elem + " " if scalar else elem, k,
                            ", ".join("v%d" % s for s in slots)))
                    wr.w("f%d(ls_make_params(ls_args%d, %d), path);"
                         % (st.callee_id, k, len(slots)))
                    wr.level -= 1
                    wr.w("}")
                else:
                    wr.w("f%d(ls_make_params(NULL, 0), path);" % st.callee_id)
            else:
                raise BackendError("unknown statement type: %r" % (st,))
        if not scalar:
            for slot in reversed(bound):
                wr.w("ls_release(v%d);" % slot)

    wr.w("void f%d(ls_params data, uint64_t path)" % fn.id)
    wr.w("{")
    wr.level += 1
    wr.w("(void)data;")
    wr.w("(void)path;")
    emit_block(fn.body)
    if not scalar:
        wr.w("{")
        wr.level += 1
        wr.w("size_t ls_p;")
        wr.w("for (ls_p = data.consumed; ls_p < data.len; ls_p++) {")
        wr.level += 1
        wr.w("ls_release(data.items[ls_p]);")
        wr.level -= 1
        wr.w("}")
        wr.level -= 1
        wr.w("}")
    wr.level -= 1
    wr.w("}")
    return wr.text()


def _emit_main(entry_id: int) -> str:
    return (
        "int main(int argc, char **argv)\n"
        "{\n"
        "    uint64_t path = 0;\n"
        "    int got_path = 0;\n"
        "    int i;\n"
        "    for (i = 1; i < argc; i++) {\n"
        "        if (strcmp(argv[i], \"--debug\") == 0) {\n"
        "            ls_debug = 1;\n"
        "        } else if (!got_path) {\n"
        "            path = strtoull(argv[i], NULL, 10);\n"
        "            got_path = 1;\n"
        "        }\n"
        "    }\n"
        "    f%d(ls_make_params(NULL, 0), path);\n"
        "    printf(\"CHECKSUM %%\" PRIu64 \"\\n\", ls_checksum);\n"
        "    return 0;\n"
        "}\n" % entry_id
    )


_MAIN_INCLUDES = """\
#include <inttypes.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "runtime.h"
"""


class CBackend:
    """Generates C99 sources."""

    id = "c"

    def emit(self, program: astgen.Program, cfg: EmitConfig) -> List[SourceFile]:
        kind = program.plan.container_kind
        trip = program.plan.trip_count
        banner = _BANNER.format(n=len(program.functions), kind=kind)
        files = [SourceFile("runtime.h", _runtime_header(program, kind))]

        main_parts = [
            banner,
            _MAIN_INCLUDES,
            _globals_block(program.plan.seed, cfg.debug_trace),
            _runtime_impl(kind),
        ]
        if cfg.split_files:
            main_parts.append(_emit_function(program.entry, kind, trip))
            main_parts.append(_emit_main(program.entry_id))
            files.append(SourceFile("main.c", "\n".join(main_parts)))
            for fn in program.functions:
                if fn.id == program.entry_id:
                    continue
                text = "\n".join([
                    banner,
                    "#include \"runtime.h\"\n",
                    _emit_function(fn, kind, trip),
                ])
                files.append(SourceFile("f%d.c" % fn.id, text))
        else:
            for fn in program.functions:
                main_parts.append(_emit_function(fn, kind, trip))
            main_parts.append(_emit_main(program.entry_id))
            files.append(SourceFile("main.c", "\n".join(main_parts)))
        return files
