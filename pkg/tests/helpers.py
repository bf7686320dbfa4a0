"""Shared fixtures: reference grammars, a random program generator, bit
assignment property checks, and toolchain helpers."""

import os
import random
import shutil
import subprocess

from lsysbench.astgen import If, Loop, iter_statements
from lsysbench.grammar import Construct, ItemSeq, Terminal

# Container-stress grammar: alternates object creation with insert/contains
# pairs under branching loops. Used for control-flow heavy programs.
CONTAINER_STRESS_SPEC = """\
A = new B B
B = IF(LOOP(insert A contains), LOOP(insert A contains))
"""

# Initialization gadget: three fan-out-8 layers over a two-insert leaf,
# 8^3 * 2 = 1024 inserts once fully expanded (generation 3 onward).
FAN_OUT_INIT_SPEC = """\
A0 = A1 A1 A1 A1 A1 A1 A1 A1;
A1 = A2 A2 A2 A2 A2 A2 A2 A2;
A2 = A3 A3 A3 A3 A3 A3 A3 A3;
A3 = insert insert;
"""

# Init gadget feeding a recursive CALL template: populates the container,
# then grows call-heavy churn around a fixed operation mix.
CALL_CHURN_SPEC = """\
AXIOM = A0 B
A0 = A1 A1 A1 A1 A1 A1 A1 A1;
A1 = A2 A2 A2 A2 A2 A2 A2 A2;
A2 = A3 A3 A3 A3 A3 A3 A3 A3;
A3 = insert insert;
B = LOOP(CALL(B) C);
C = B insert remove contains B;
"""

TERMINAL_POOL = ("new", "insert", "remove", "contains")


def random_seq(rng: random.Random, depth: int, max_len: int = 5) -> ItemSeq:
    """Random pruned item sequence with nested constructs down to `depth`."""
    items = []
    for _ in range(rng.randint(0, max_len)):
        roll = rng.random()
        if depth > 0 and roll < 0.45:
            kind = rng.choice(("IF", "LOOP", "CALL"))
            if kind == "IF":
                n_blocks = rng.choice((2, 3))
            elif kind == "LOOP":
                n_blocks = rng.choice((1, 2))
            else:
                n_blocks = 1
            blocks = tuple(random_seq(rng, depth - 1, max_len) for _ in range(n_blocks))
            items.append(Construct(kind, blocks))
        else:
            items.append(Terminal(rng.choice(TERMINAL_POOL)))
    return ItemSeq(tuple(items))


def random_seq_nonempty(rng: random.Random, depth: int, max_len: int = 5) -> ItemSeq:
    for _ in range(50):
        seq = random_seq(rng, depth, max_len)
        if seq.items:
            return seq
    return ItemSeq((Terminal("insert"),))


# ---------------------------------------------------------------------------
# bit assignment property checks


def all_ifs(stmts):
    return [st for st in iter_statements(stmts) if isinstance(st, If)]


def subtree_raw_bits(if_stmt: If) -> set:
    bits = set()
    for st in iter_statements([if_stmt]):
        if isinstance(st, If):
            bits.add(st.bit_index_raw)
    return bits


def assert_bitpath_properties(stmts):
    """Nested chains strictly increase; an If after a sibling's join never
    reuses any raw bit from that sibling's subtree."""
    prev_ifs = []
    for st in stmts:
        if isinstance(st, If):
            for earlier in prev_ifs:
                earlier_bits = subtree_raw_bits(earlier)
                assert not (subtree_raw_bits(st) & earlier_bits)
            for branch in (st.then, st.orelse or []):
                for nested in all_ifs(branch):
                    assert nested.bit_index_raw > st.bit_index_raw
            assert_bitpath_properties(st.cond)
            assert_bitpath_properties(st.then)
            if st.orelse is not None:
                assert_bitpath_properties(st.orelse)
            prev_ifs.append(st)
        elif isinstance(st, Loop):
            assert_bitpath_properties(st.cond)
            assert_bitpath_properties(st.body)


# ---------------------------------------------------------------------------
# toolchain helpers

STRICT_C_FLAGS = ["-std=c99", "-pedantic", "-Wall", "-Wextra", "-Werror"]


def find_c_compiler():
    for candidate in ("gcc", "cc", "clang"):
        if shutil.which(candidate):
            return candidate
    return None


def find_go_compiler():
    return shutil.which("go")


def write_files(files, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    for f in files:
        with open(os.path.join(out_dir, f.relative_path), "w", encoding="utf-8") as fh:
            fh.write(f.contents)


def compile_c(src_dir, src_files, binary, compiler, extra_flags=()):
    argv = [compiler] + STRICT_C_FLAGS + list(extra_flags) + list(src_files) + ["-o", binary]
    return subprocess.run(argv, cwd=src_dir, capture_output=True, text=True)


def run_binary(binary, path, debug=True):
    argv = [binary, str(path)] + (["--debug"] if debug else [])
    return subprocess.run(argv, capture_output=True, text=True)
