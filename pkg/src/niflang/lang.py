"""Parser, AST and interpreter for the smooth imperative language.

Grammar (EBNF, also documented in the README):

    program   = { stmt } ;
    stmt      = "skip"
              | IDENT ( ":=" | "=" ) rhs
              | IDENT "(" [ expr { "," expr } ] ")"
              | "nif" guard block [ "else" block ]
              | "nwhile" guard block ;
    guard     = "(" IDENT cmp expr "," expr ")" ;        (* rhs , sigma^2 *)
    block     = "{" { stmt } "}" ;
    rhs       = IDENT "(" [ expr { "," expr } ] ")" | expr ;
    cmp       = ">" | ">=" | "<" | "<=" ;
    expr      = term { ("+" | "-") term } ;
    term      = factor { ("*" | "/") factor } ;
    factor    = "-" factor | NUMBER | IDENT | "(" expr ")" ;

Statements may be separated by `;` (optional after a `}`); `//` starts a
line comment; numeric literals are unsigned, negation is syntax.  The left
side of a guard comparison is restricted to a variable; the right side and
the uncertainty sigma^2 are full expressions, re-evaluated at every guard
evaluation.

Execution is classical structural recursion: an `nif` runs exactly one
branch chosen by a smooth guard check, an `nwhile` re-checks its guard
before every iteration, and with sigma^2 == 0 both collapse to ordinary
if/while.  Host functions (bound with `bind_host`) are the language's only
I/O; a host call may capture its return value into a variable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

from .guards import CmpOp, GuardResult, check, diff
from .gauss import Interval
from .rng import RngStream

DEFAULT_STEP_BUDGET = 1_000_000


class LangError(Exception):
    """Base class for language-level failures."""


class ParseError(LangError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col


class RunError(LangError):
    """Runtime failure: unbound name, bad arithmetic, host trouble."""


class BudgetExhausted(RunError):
    """The statement budget ran out (a diverging nwhile, most likely)."""


# --- AST ---------------------------------------------------------------


@dataclass(frozen=True)
class Expr:
    pass


@dataclass(frozen=True)
class VarRef(Expr):
    name: str


@dataclass(frozen=True)
class Const(Expr):
    value: float


@dataclass(frozen=True)
class BinOp(Expr):
    op: str  # one of + - * /
    left: Expr
    right: Expr


@dataclass(frozen=True)
class UnOp(Expr):
    op: str  # "neg"
    operand: Expr


@dataclass(frozen=True)
class Guard:
    var: str
    op: CmpOp
    rhs: Expr


@dataclass(frozen=True)
class Stmt:
    pass


@dataclass(frozen=True)
class Skip(Stmt):
    pass


@dataclass(frozen=True)
class Assign(Stmt):
    name: str
    expr: Expr


@dataclass(frozen=True)
class Seq(Stmt):
    first: Stmt
    second: Stmt


@dataclass(frozen=True)
class HostCall(Stmt):
    name: str
    args: tuple[Expr, ...] = ()
    result: Optional[str] = None


@dataclass(frozen=True)
class Nif(Stmt):
    guard: Guard
    sigma2: Expr
    then: Stmt
    orelse: Stmt
    sid: int = field(default=0, compare=False)  # guard id for trace logs


@dataclass(frozen=True)
class Nwhile(Stmt):
    guard: Guard
    sigma2: Expr
    body: Stmt
    sid: int = field(default=0, compare=False)


# --- Lexer -------------------------------------------------------------

_KEYWORDS = {"skip", "nif", "nwhile", "else"}
_PUNCT = {"(", ")", "{", "}", ",", ";", "+", "-", "*", "/"}


@dataclass(frozen=True)
class _Token:
    kind: str  # IDENT NUMBER OP PUNCT ASSIGN EOF
    text: str
    line: int
    col: int
    value: float = 0.0


def _tokenize(source: str) -> list[_Token]:
    toks: list[_Token] = []
    i = 0
    line = 1
    col = 1
    n = len(source)

    def error(msg):
        raise ParseError(msg, line, col)

    while i < n:
        c = source[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c.isspace():
            i += 1
            col += 1
            continue
        if source.startswith("//", i):
            while i < n and source[i] != "\n":
                i += 1
            continue
        start_col = col
        if c.isalpha() or c == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            toks.append(_Token("IDENT", source[i:j], line, start_col))
            col += j - i
            i = j
            continue
        if c.isdigit() or (c == "." and i + 1 < n and source[i + 1].isdigit()):
            j = i
            while j < n and (source[j].isdigit() or source[j] == "."):
                j += 1
            if j < n and source[j] in "eE":
                k = j + 1
                if k < n and source[k] in "+-":
                    k += 1
                if k < n and source[k].isdigit():
                    j = k
                    while j < n and source[j].isdigit():
                        j += 1
            text = source[i:j]
            try:
                value = float(text)
            except ValueError:
                error(f"bad numeric literal {text!r}")
            toks.append(_Token("NUMBER", text, line, start_col, value))
            col += j - i
            i = j
            continue
        two = source[i : i + 2]
        if two == ":=":
            toks.append(_Token("ASSIGN", ":=", line, start_col))
            i += 2
            col += 2
            continue
        if two in (">=", "<="):
            toks.append(_Token("OP", two, line, start_col))
            i += 2
            col += 2
            continue
        if c in "<>":
            toks.append(_Token("OP", c, line, start_col))
            i += 1
            col += 1
            continue
        if c == "=":
            toks.append(_Token("ASSIGN", "=", line, start_col))
            i += 1
            col += 1
            continue
        if c in _PUNCT:
            toks.append(_Token("PUNCT", c, line, start_col))
            i += 1
            col += 1
            continue
        error(f"unexpected character {c!r}")
    toks.append(_Token("EOF", "", line, col))
    return toks


# --- Parser ------------------------------------------------------------


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self._toks = tokens
        self._pos = 0
        self._guard_count = 0

    def _peek(self, ahead: int = 0) -> _Token:
        return self._toks[min(self._pos + ahead, len(self._toks) - 1)]

    def _advance(self) -> _Token:
        tok = self._toks[self._pos]
        if tok.kind != "EOF":
            self._pos += 1
        return tok

    def _error(self, message: str, tok: Optional[_Token] = None):
        tok = tok or self._peek()
        raise ParseError(message, tok.line, tok.col)

    def _expect_punct(self, text: str) -> _Token:
        tok = self._peek()
        if tok.kind != "PUNCT" or tok.text != text:
            self._error(f"expected {text!r}, found {tok.text or 'end of input'!r}")
        return self._advance()

    def _at_punct(self, text: str) -> bool:
        tok = self._peek()
        return tok.kind == "PUNCT" and tok.text == text

    def parse_program(self) -> Stmt:
        stmts = self._stmt_list(("EOF",))
        if self._peek().kind != "EOF":
            self._error(f"unexpected {self._peek().text!r} after program")
        return _fold(stmts)

    def _stmt_list(self, stop: tuple[str, ...]) -> list[Stmt]:
        stmts: list[Stmt] = []
        while True:
            while self._at_punct(";"):
                self._advance()
            tok = self._peek()
            if tok.kind in stop or (tok.kind == "PUNCT" and tok.text in stop):
                return stmts
            stmts.append(self._stmt())

    def _block(self) -> Stmt:
        self._expect_punct("{")
        stmts = self._stmt_list(("}",))
        self._expect_punct("}")
        return _fold(stmts)

    def _stmt(self) -> Stmt:
        tok = self._peek()
        if tok.kind == "IDENT" and tok.text == "skip":
            self._advance()
            return Skip()
        if tok.kind == "IDENT" and tok.text == "nif":
            return self._nif()
        if tok.kind == "IDENT" and tok.text == "nwhile":
            return self._nwhile()
        if tok.kind == "IDENT":
            if tok.text in _KEYWORDS:
                self._error(f"keyword {tok.text!r} cannot start a statement here")
            name = self._advance().text
            nxt = self._peek()
            if nxt.kind == "ASSIGN":
                self._advance()
                return self._assign_rhs(name)
            if nxt.kind == "PUNCT" and nxt.text == "(":
                return self._host_call(name, result=None)
            self._error(
                f"expected ':=', '=' or '(' after {name!r}, found {nxt.text!r}", nxt
            )
        self._error(f"expected a statement, found {tok.text or 'end of input'!r}")

    def _assign_rhs(self, name: str) -> Stmt:
        tok = self._peek()
        if (
            tok.kind == "IDENT"
            and tok.text not in _KEYWORDS
            and self._peek(1).kind == "PUNCT"
            and self._peek(1).text == "("
        ):
            fn = self._advance().text
            return self._host_call(fn, result=name)
        return Assign(name, self._expr())

    def _host_call(self, fn: str, result: Optional[str]) -> HostCall:
        self._expect_punct("(")
        args: list[Expr] = []
        if not self._at_punct(")"):
            args.append(self._expr())
            while self._at_punct(","):
                self._advance()
                args.append(self._expr())
        self._expect_punct(")")
        return HostCall(fn, tuple(args), result)

    def _guard_head(self) -> tuple[Guard, Expr]:
        self._expect_punct("(")
        var_tok = self._peek()
        if var_tok.kind != "IDENT" or var_tok.text in _KEYWORDS:
            self._error("guard comparisons take a variable on the left")
        var = self._advance().text
        op_tok = self._peek()
        if op_tok.kind != "OP":
            self._error(f"expected a comparison operator, found {op_tok.text!r}")
        op = CmpOp(self._advance().text)
        rhs = self._expr()
        self._expect_punct(",")
        sigma2 = self._expr()
        self._expect_punct(")")
        return Guard(var, op, rhs), sigma2

    def _nif(self) -> Nif:
        self._advance()  # 'nif'
        self._guard_count += 1
        sid = self._guard_count
        guard, sigma2 = self._guard_head()
        then = self._block()
        orelse: Stmt = Skip()
        tok = self._peek()
        if tok.kind == "IDENT" and tok.text == "else":
            self._advance()
            orelse = self._block()
        return Nif(guard, sigma2, then, orelse, sid=sid)

    def _nwhile(self) -> Nwhile:
        self._advance()  # 'nwhile'
        self._guard_count += 1
        sid = self._guard_count
        guard, sigma2 = self._guard_head()
        body = self._block()
        return Nwhile(guard, sigma2, body, sid=sid)

    def _expr(self) -> Expr:
        left = self._term()
        while self._at_punct("+") or self._at_punct("-"):
            op = self._advance().text
            left = BinOp(op, left, self._term())
        return left

    def _term(self) -> Expr:
        left = self._factor()
        while self._at_punct("*") or self._at_punct("/"):
            op = self._advance().text
            left = BinOp(op, left, self._factor())
        return left

    def _factor(self) -> Expr:
        tok = self._peek()
        if self._at_punct("-"):
            self._advance()
            return UnOp("neg", self._factor())
        if self._at_punct("("):
            self._advance()
            inner = self._expr()
            self._expect_punct(")")
            return inner
        if tok.kind == "NUMBER":
            self._advance()
            return Const(tok.value)
        if tok.kind == "IDENT" and tok.text not in _KEYWORDS:
            self._advance()
            return VarRef(tok.text)
        self._error(f"expected an expression, found {tok.text or 'end of input'!r}")


def _fold(stmts: list[Stmt]) -> Stmt:
    if not stmts:
        return Skip()
    out = stmts[-1]
    for s in reversed(stmts[:-1]):
        out = Seq(s, out)
    return out


def parse(source: str) -> Stmt:
    """Parse a program; raises ParseError with a line:col diagnostic."""
    return _Parser(_tokenize(source)).parse_program()


# --- Printer -----------------------------------------------------------


def _expr_source(e: Expr) -> str:
    match e:
        case Const(v):
            return repr(v)
        case VarRef(n):
            return n
        case BinOp(op, left, right):
            return f"({_expr_source(left)} {op} {_expr_source(right)})"
        case UnOp("neg", operand):
            return f"(-{_expr_source(operand)})"
    raise TypeError(f"not an expression: {e!r}")


def to_source(s: Stmt, indent: int = 0) -> str:
    """Canonical concrete syntax; parse(to_source(t)) == t for parser-shaped
    trees (numeric literals in t must be nonnegative, negation a UnOp)."""
    pad = "    " * indent
    match s:
        case Skip():
            return f"{pad}skip"
        case Assign(name, expr):
            return f"{pad}{name} := {_expr_source(expr)}"
        case HostCall(name, args, result):
            call = f"{name}({', '.join(_expr_source(a) for a in args)})"
            if result is None:
                return f"{pad}{call}"
            return f"{pad}{result} := {call}"
        case Seq(first, second):
            return f"{to_source(first, indent)};\n{to_source(second, indent)}"
        case Nif(guard, sigma2, then, orelse):
            head = (
                f"{pad}nif ({guard.var} {guard.op.value} {_expr_source(guard.rhs)}, "
                f"{_expr_source(sigma2)}) {{\n{to_source(then, indent + 1)}\n{pad}}}"
            )
            if orelse == Skip():
                return head
            return f"{head} else {{\n{to_source(orelse, indent + 1)}\n{pad}}}"
        case Nwhile(guard, sigma2, body):
            return (
                f"{pad}nwhile ({guard.var} {guard.op.value} {_expr_source(guard.rhs)}, "
                f"{_expr_source(sigma2)}) {{\n{to_source(body, indent + 1)}\n{pad}}}"
            )
    raise TypeError(f"not a statement: {s!r}")


# --- Interpreter -------------------------------------------------------


@dataclass
class GuardTrace:
    """One guard evaluation, as logged when tracing is on."""

    sid: int
    diff: float
    sigma2: float
    prob: float
    interval: Interval
    sample: float
    taken: bool

    def tsv(self) -> str:
        q1, q2 = self.interval.endpoint_text()
        return "\t".join(
            [
                str(self.sid),
                f"{self.diff:.9g}",
                f"{self.sigma2:.9g}",
                f"{self.prob:.9g}",
                q1,
                q2,
                f"{self.sample:.9g}",
                "1" if self.taken else "0",
            ]
        )


TRACE_COLUMNS = ("stmt-id", "diff", "sigma2", "prob", "q1", "q2", "sample", "taken")


class Env:
    """Interpreter state: variable store, host table, rng and step budget.

    Single-threaded by design; run independent Envs (with independent
    RngStreams) for parallel experiments.
    """

    def __init__(
        self,
        rng: Optional[RngStream] = None,
        budget: int = DEFAULT_STEP_BUDGET,
        trace: bool = False,
    ):
        self.store: dict[str, float] = {}
        self.hosts: dict[str, Callable[..., Optional[float]]] = {}
        self.rng = rng if rng is not None else RngStream(0)
        self.budget = budget
        self.trace: Optional[list[GuardTrace]] = [] if trace else None

    def lookup(self, name: str) -> float:
        try:
            return self.store[name]
        except KeyError:
            raise RunError(f"unbound variable {name!r}") from None


def bind_host(env: Env, name: str, fn: Callable[..., Optional[float]]) -> Env:
    """Register a host function; HostCall(name, ...) dispatches to it."""
    if name in env.hosts:
        raise ValueError(f"host function {name!r} is already bound")
    env.hosts[name] = fn
    return env


def eval_expr(e: Expr, env: Env) -> float:
    match e:
        case Const(v):
            return v
        case VarRef(n):
            return env.lookup(n)
        case BinOp(op, left, right):
            a = eval_expr(left, env)
            b = eval_expr(right, env)
            if op == "+":
                return a + b
            if op == "-":
                return a - b
            if op == "*":
                return a * b
            if op == "/":
                if b == 0.0:
                    raise RunError("division by zero")
                return a / b
            raise RunError(f"unknown operator {op!r}")
        case UnOp("neg", operand):
            return -eval_expr(operand, env)
    raise RunError(f"not an expression: {e!r}")


def _eval_guard(node, env: Env) -> GuardResult:
    x = env.lookup(node.guard.var)
    a = eval_expr(node.guard.rhs, env)
    sigma2 = eval_expr(node.sigma2, env)
    if sigma2 < 0.0:
        raise RunError(f"guard uncertainty evaluated to {sigma2!r} (< 0)")
    result = check(x, a, sigma2, node.guard.op, env.rng)
    if env.trace is not None:
        env.trace.append(
            GuardTrace(
                sid=node.sid,
                diff=diff(x, a, node.guard.op),
                sigma2=sigma2,
                prob=result.prob,
                interval=result.interval,
                sample=result.drawn_sample,
                taken=result.taken,
            )
        )
    return result


def _spend(env: Env):
    env.budget -= 1
    if env.budget < 0:
        raise BudgetExhausted("statement budget exhausted")


def execute(s: Stmt, env: Env) -> Env:
    """Run a statement against env (mutated in place and returned)."""
    while True:
        _spend(env)
        match s:
            case Skip():
                return env
            case Assign(name, expr):
                env.store[name] = eval_expr(expr, env)
                return env
            case Seq(first, second):
                execute(first, env)
                s = second  # iterate: right-folded tails stay flat
                continue
            case HostCall(name, args, result):
                _run_host(name, args, result, env)
                return env
            case Nif(_, _, then, orelse):
                taken = _eval_guard(s, env).taken
                s = then if taken else orelse
                continue
            case Nwhile(_, _, body):
                if not _eval_guard(s, env).taken:
                    return env
                execute(body, env)
                continue
        raise RunError(f"not a statement: {s!r}")


def _run_host(name: str, args: tuple[Expr, ...], result: Optional[str], env: Env):
    fn = env.hosts.get(name)
    if fn is None:
        raise RunError(f"call to unbound host function {name!r}")
    vals = [eval_expr(a, env) for a in args]
    try:
        out = fn(*vals)
    except TypeError as exc:
        raise RunError(f"host function {name!r}: {exc}") from exc
    if result is not None:
        if out is None:
            raise RunError(f"host function {name!r} returned no value to bind")
        env.store[result] = float(out)


def run_program(source: str, env: Optional[Env] = None, **env_kwargs) -> Env:
    """Parse and execute in one go; returns the final Env."""
    if env is None:
        env = Env(**env_kwargs)
    return execute(parse(source), env)
