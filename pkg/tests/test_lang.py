"""Language front end and interpreter."""

import math
import random

import pytest

from helpers import gen_program, ref_exec
from niflang.guards import CmpOp
from niflang.lang import (
    Assign,
    BinOp,
    BudgetExhausted,
    Const,
    Env,
    Guard,
    HostCall,
    Nif,
    Nwhile,
    ParseError,
    RunError,
    Seq,
    Skip,
    UnOp,
    VarRef,
    bind_host,
    eval_expr,
    execute,
    parse,
    run_program,
    to_source,
)
from niflang.rng import RngStream

FIVE_BLOCK_SKELETON = """
nwhile(currentDistance < targetLocation1, sigma1){
    moving();
    currentDistance = getPose();
    }
updateTargetLocations();
nwhile(currentAngle < targetLocation2,    sigma2){
    turning();
    currentAngle = getAngle();
    }
updateTargetLocations();
nwhile(currentDistance < targetLocation3, sigma3){
    moving();
    currentDistance = getPose();
    }
updateTargetLocations();
nwhile(currentAngle < targetLocation4,    sigma4){
    turning();
    currentAngle = getAngle();
    }
updateTargetLocations();
nwhile(currentDistance < targetLocation5, sigma5){
    moving();
    currentDistance = getPose();
    }
"""


# --- parsing -------------------------------------------------------------


def test_parse_skip():
    assert parse("skip") == Skip()


def test_parse_assign_and_nif_structure():
    stmt = parse("x := 1; nif (x >= 2, 0.16) { y := 1 } else { y := 2 }")
    assert stmt == Seq(
        Assign("x", Const(1.0)),
        Nif(
            Guard("x", CmpOp.GE, Const(2.0)),
            Const(0.16),
            Assign("y", Const(1.0)),
            Assign("y", Const(2.0)),
        ),
    )


def test_parse_five_block_skeleton():
    stmt = parse(FIVE_BLOCK_SKELETON)
    loops, hosts = [], []

    def walk(s):
        if isinstance(s, Seq):
            walk(s.first)
            walk(s.second)
        elif isinstance(s, Nwhile):
            loops.append(s)
            walk(s.body)
        elif isinstance(s, HostCall):
            hosts.append(s)

    walk(stmt)
    assert len(loops) == 5
    assert [h.name for h in hosts if h.result is None].count("updateTargetLocations") == 4
    assert all(loop.guard.op is CmpOp.LT for loop in loops)
    assert loops[0].guard.var == "currentDistance"
    assert loops[0].sigma2 == VarRef("sigma1")
    # loop bodies: a pure host call plus a host call bound to a variable
    first_body = loops[0].body
    assert first_body == Seq(
        HostCall("moving", (), None), HostCall("getPose", (), "currentDistance")
    )


def test_parse_bundled_seven_block_program():
    from niflang import data_path

    stmt = parse(data_path("parking.np").read_text())
    count = [0]

    def walk(s):
        if isinstance(s, Seq):
            walk(s.first)
            walk(s.second)
        elif isinstance(s, Nwhile):
            count[0] += 1

    walk(stmt)
    assert count[0] == 7


def test_parse_optional_else_defaults_to_skip():
    stmt = parse("nif (x >= 1, 0) { y := 1 }")
    assert stmt == Nif(Guard("x", CmpOp.GE, Const(1.0)), Const(0.0), Assign("y", Const(1.0)), Skip())


def test_parse_expression_grammar():
    stmt = parse("x := -(a + 2) * b / 4")
    assert stmt == Assign(
        "x",
        BinOp(
            "/",
            BinOp("*", UnOp("neg", BinOp("+", VarRef("a"), Const(2.0))), VarRef("b")),
            Const(4.0),
        ),
    )


def test_parse_error_reports_position():
    with pytest.raises(ParseError) as err:
        parse("x := 1;\nnif (x >> 2, 0) { skip }")
    assert err.value.line == 2
    assert err.value.col > 0


def test_parse_error_on_guard_without_variable():
    with pytest.raises(ParseError):
        parse("nif (1 >= x, 0) { skip }")


def test_parse_error_on_unknown_character():
    with pytest.raises(ParseError):
        parse("x := 1 % 2")


def test_print_parse_round_trip_on_random_programs():
    rnd = random.Random(424242)
    for _ in range(200):
        normalized = parse(to_source(gen_program(rnd)))
        assert parse(to_source(normalized)) == normalized


# --- expressions ---------------------------------------------------------


def test_eval_expr_basics():
    env = Env()
    env.store["x"] = 2.0
    assert eval_expr(Const(3.5), env) == 3.5
    assert eval_expr(BinOp("+", VarRef("x"), Const(1.0)), env) == 3.0
    assert eval_expr(UnOp("neg", Const(2.0)), env) == -2.0


def test_eval_expr_unbound_variable():
    with pytest.raises(RunError, match="unbound variable"):
        eval_expr(VarRef("nope"), Env())


def test_eval_expr_division_by_zero():
    with pytest.raises(RunError, match="division by zero"):
        eval_expr(BinOp("/", Const(1.0), Const(0.0)), Env())


# --- execution -----------------------------------------------------------


def test_exec_nif_without_uncertainty_is_if():
    for _ in range(5):
        env = run_program("x := 5; nif (x >= 1, 0) { y := 1 } else { y := 2 }")
        assert env.store["y"] == 1.0


def test_exec_nwhile_without_uncertainty_is_while():
    env = run_program("i := 0; nwhile (i <= 2, 0) { i := i + 1 }")
    assert env.store["i"] == 3.0


def test_exec_single_nif_frequency_matches_probit():
    # margin 1 at sigma = 0.4: first branch should fire with p = 0.994
    program = parse("x := 1; nif (x >= 0, 0.16) { y := 1 } else { y := 2 }")
    n = 100_000
    root = RngStream(2718)
    hits = 0
    for i in range(n):
        env = Env(rng=root.split(i))
        execute(program, env)
        hits += env.store["y"] == 1.0
    p = 0.9937903346742238
    assert abs(hits / n - p) < 3.0 * math.sqrt(p * (1 - p) / n)


def test_exec_budget_exhaustion():
    with pytest.raises(BudgetExhausted):
        run_program("x := 0; nwhile (x <= 1, 0) { skip }", budget=10_000)


def test_exec_negative_sigma2_is_runtime_error():
    with pytest.raises(RunError, match="< 0"):
        run_program("s := 0 - 1; x := 0; nif (x >= 0, s) { skip }")


def test_exec_deterministic_trace_and_store():
    source = """
        x := 0;
        nwhile (x <= 6, 0.5) { x := x + 1 }
        nif (x >= 5, 2.0) { y := 1 } else { y := 0 }
    """
    runs = []
    for _ in range(2):
        env = Env(rng=RngStream(99), trace=True)
        execute(parse(source), env)
        runs.append((dict(env.store), [t.tsv() for t in env.trace]))
    assert runs[0] == runs[1]
    assert len(runs[0][1]) >= 2


def test_trace_log_format():
    env = Env(rng=RngStream(1), trace=True)
    execute(parse("x := 1; nif (x >= 0, 0.25) { skip } nif (x >= 100, 0) { skip }"), env)
    assert len(env.trace) == 2
    fields = env.trace[0].tsv().split("\t")
    assert len(fields) == 8
    assert fields[0] == "1"  # guard ids follow source order
    assert env.trace[1].tsv().split("\t")[0] == "2"
    # Dirac miss serializes tagged interval endpoints, not infinities
    assert env.trace[1].tsv().split("\t")[4] == "empty"


def test_host_binding_and_result_capture():
    env = Env()
    bind_host(env, "getPose", lambda: 0.7)
    execute(parse("d := getPose()"), env)
    assert env.store["d"] == 0.7


def test_host_binding_duplicate_rejected():
    env = Env()
    bind_host(env, "f", lambda: 0.0)
    with pytest.raises(ValueError, match="already bound"):
        bind_host(env, "f", lambda: 1.0)


def test_host_call_unbound_is_runtime_error():
    with pytest.raises(RunError, match="unbound host function"):
        run_program("foo()")


def test_host_call_with_args_and_arity_error():
    env = Env()
    bind_host(env, "add", lambda a, b: a + b)
    execute(parse("z := add(2, 3)"), env)
    assert env.store["z"] == 5.0
    env2 = Env()
    bind_host(env2, "add", lambda a, b: a + b)
    with pytest.raises(RunError):
        execute(parse("z := add(2)"), env2)


# --- semantic invariants ---------------------------------------------------


def test_degenerate_programs_match_reference_interpreter():
    rnd = random.Random(777)
    for _ in range(80):
        program = gen_program(rnd)
        env = Env(rng=RngStream(1), budget=10_000_000)
        execute(program, env)
        assert ref_exec(program, {}) == env.store


def test_single_nif_mixture_law():
    # final stores distribute as p * branch1 + (1-p) * branch2
    program = parse("x := 0.3; nif (x >= 0, 1.44) { y := 1 } else { y := 2 }")
    from niflang.guards import branch_prob

    p = branch_prob(0.3, 1.44)
    n = 100_000
    root = RngStream(5150)
    ones = 0
    for i in range(n):
        env = Env(rng=root.split(i))
        execute(program, env)
        ones += env.store["y"] == 1.0
    expected_ones = n * p
    chi2 = (ones - expected_ones) ** 2 / expected_ones + (
        (n - ones) - n * (1 - p)
    ) ** 2 / (n * (1 - p))
    assert chi2 < 10.83  # 0.001 significance, 1 dof


def test_nwhile_equals_unrolled_nif():
    loop_src = "i := 0; nwhile (i <= 3, 0.04) { i := i + 1 }"
    unrolled_src = (
        "i := 0; nif (i <= 3, 0.04) { i := i + 1; nwhile (i <= 3, 0.04) { i := i + 1 } }"
    )
    for seed in range(300):
        a = Env(rng=RngStream(seed))
        execute(parse(loop_src), a)
        b = Env(rng=RngStream(seed))
        execute(parse(unrolled_src), b)
        assert a.store == b.store
