"""Shared test utilities: a classical reference interpreter and random
program/chain generators.

The reference interpreter implements ordinary if/while semantics with
plain comparisons; it shares no code with the package's guard machinery,
so agreement between the two on zero-uncertainty programs is a real check.
"""

from __future__ import annotations

import random

from niflang.guards import CmpOp
from niflang.lang import (
    Assign,
    BinOp,
    Const,
    Guard,
    Nif,
    Nwhile,
    Seq,
    Skip,
    Stmt,
    UnOp,
    VarRef,
)

# --- classical reference interpreter ------------------------------------


def ref_eval(e, store):
    if isinstance(e, Const):
        return e.value
    if isinstance(e, VarRef):
        return store[e.name]
    if isinstance(e, BinOp):
        a = ref_eval(e.left, store)
        b = ref_eval(e.right, store)
        return {"+": a + b, "-": a - b, "*": a * b, "/": a / b if b else None}[e.op]
    if isinstance(e, UnOp):
        return -ref_eval(e.operand, store)
    raise TypeError(e)


_CLASSICAL = {
    CmpOp.GT: lambda x, a: x > a,
    CmpOp.GE: lambda x, a: x >= a,
    CmpOp.LT: lambda x, a: x < a,
    CmpOp.LE: lambda x, a: x <= a,
}


def ref_exec(s, store):
    if isinstance(s, Skip):
        return store
    if isinstance(s, Assign):
        store[s.name] = ref_eval(s.expr, store)
        return store
    if isinstance(s, Seq):
        ref_exec(s.first, store)
        return ref_exec(s.second, store)
    if isinstance(s, Nif):
        assert ref_eval(s.sigma2, store) == 0.0
        if _CLASSICAL[s.guard.op](store[s.guard.var], ref_eval(s.guard.rhs, store)):
            return ref_exec(s.then, store)
        return ref_exec(s.orelse, store)
    if isinstance(s, Nwhile):
        assert ref_eval(s.sigma2, store) == 0.0
        while _CLASSICAL[s.guard.op](store[s.guard.var], ref_eval(s.guard.rhs, store)):
            ref_exec(s.body, store)
        return store
    raise TypeError(s)


# --- random program generator (all guards at sigma^2 = 0) ----------------

_VARS = ("a", "b", "c", "d")
_OPS = ("+", "-", "*")


def gen_expr(rnd: random.Random, names, depth: int = 0):
    roll = rnd.random()
    if depth >= 3 or roll < 0.35:
        return Const(float(rnd.randint(0, 5)))
    if roll < 0.6:
        return VarRef(rnd.choice(names))
    if roll < 0.7:
        return UnOp("neg", gen_expr(rnd, names, depth + 1))
    return BinOp(
        rnd.choice(_OPS),
        gen_expr(rnd, names, depth + 1),
        gen_expr(rnd, names, depth + 1),
    )


def _gen_block(rnd, names, counters, depth):
    stmts = [_gen_stmt(rnd, names, counters, depth) for _ in range(rnd.randint(1, 3))]
    out = stmts[-1]
    for s in reversed(stmts[:-1]):
        out = Seq(s, out)
    return out


def _gen_stmt(rnd, names, counters, depth) -> Stmt:
    roll = rnd.random()
    if depth >= 2 or roll < 0.45:
        return Assign(rnd.choice(names), gen_expr(rnd, names))
    if roll < 0.5:
        return Skip()
    if roll < 0.8:
        guard = Guard(rnd.choice(names), rnd.choice(list(CmpOp)), gen_expr(rnd, names))
        return Nif(
            guard,
            Const(0.0),
            _gen_block(rnd, names, counters, depth + 1),
            _gen_block(rnd, names, counters, depth + 1) if rnd.random() < 0.6 else Skip(),
        )
    # terminating loop: a dedicated counter no other statement assigns
    ct = f"ct{counters[0]}"
    counters[0] += 1
    loop = Nwhile(
        Guard(ct, CmpOp.LE, Const(float(rnd.randint(0, 3)))),
        Const(0.0),
        Seq(
            Assign(ct, BinOp("+", VarRef(ct), Const(1.0))),
            _gen_block(rnd, names, counters, depth + 1),
        ),
    )
    return Seq(Assign(ct, Const(0.0)), loop)


def gen_program(rnd: random.Random) -> Stmt:
    """Random program over a fixed variable pool; every guard has
    sigma^2 = 0 and every loop provably terminates."""
    counters = [0]
    stmts = []
    for name in _VARS:
        value = rnd.randint(-3, 3)
        expr = Const(float(abs(value)))
        if value < 0:
            expr = UnOp("neg", expr)  # literals are unsigned in the syntax
        stmts.append(Assign(name, expr))
    stmts.append(_gen_block(rnd, _VARS, counters, 0))
    out = stmts[-1]
    for s in reversed(stmts[:-1]):
        out = Seq(s, out)  # right-fold, matching the parser's shape
    return out
