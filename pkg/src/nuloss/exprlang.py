"""Minimal arithmetic expression language for coefficient profiles.

Expressions are parsed from strings like ``"2+sin(log(1/t))"`` and support
exact symbolic differentiation, so second derivatives of a time coefficient
can be evaluated without finite differences.  Trees are immutable and safe
to share between threads; parsing, evaluation and differentiation are pure.

Grammar (no implicit multiplication, ``^`` right-associative):

    expr    := term (("+" | "-") term)*
    term    := factor (("*" | "/") factor)*
    factor  := "-" factor | power
    power   := atom ("^" factor)?
    atom    := number | name | name "(" expr ")" | "(" expr ")"
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt", "abs", "floor")


class ExprError(Exception):
    """Base class for all expression-language errors."""


class ParseError(ExprError):
    def __init__(self, message: str, source: str, pos: int):
        # byte offset, not codepoint index, so editors can jump to it
        self.offset = len(source[:pos].encode("utf-8"))
        self.expected = message
        super().__init__(f"syntax error at byte {self.offset}: {message}")


class UnknownFunctionError(ExprError):
    pass


class UnboundVariableError(ExprError):
    pass


class DomainError(ExprError):
    """Evaluation left the real domain (log/sqrt of non-positive, x/0, ...)."""


class NonDifferentiableError(ExprError):
    pass


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"


Expr = Union[Num, Var, Neg, BinOp, Call]


# --- tokenizer -------------------------------------------------------------

_OPS = set("+-*/^()")


def _tokenize(source: str):
    """Yield (kind, text, pos) triples; kind in {num, name, op, end}."""
    tokens = []
    i, n = 0, len(source)
    while i < n:
        c = source[i]
        if c.isspace():
            i += 1
            continue
        if c in _OPS:
            tokens.append(("op", c, i))
            i += 1
            continue
        if c.isdigit() or (c == "." and i + 1 < n and source[i + 1].isdigit()):
            j = i
            while j < n and (source[j].isdigit() or source[j] == "."):
                j += 1
            # optional exponent part: 1e-3, 2.5E+10
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
                float(text)
            except ValueError:
                raise ParseError(f"malformed number {text!r}", source, i)
            tokens.append(("num", text, i))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            tokens.append(("name", source[i:j], i))
            i = j
            continue
        raise ParseError(f"unexpected character {c!r}", source, i)
    tokens.append(("end", "", n))
    return tokens


# --- parser ----------------------------------------------------------------


class _Parser:
    def __init__(self, source: str):
        self.source = source
        self.tokens = _tokenize(source)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect_op(self, op: str):
        kind, text, pos = self.peek()
        if kind != "op" or text != op:
            raise ParseError(f"expected {op!r}", self.source, pos)
        return self.advance()

    def parse(self) -> Expr:
        e = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ParseError(
                f"expected operator or end of input, found {text!r}", self.source, pos
            )
        return e

    def expr(self) -> Expr:
        e = self.term()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in "+-":
                self.advance()
                e = BinOp(text, e, self.term())
            else:
                return e

    def term(self) -> Expr:
        e = self.factor()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in "*/":
                self.advance()
                e = BinOp(text, e, self.factor())
            else:
                return e

    def factor(self) -> Expr:
        kind, text, _ = self.peek()
        if kind == "op" and text == "-":
            self.advance()
            return Neg(self.factor())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        kind, text, _ = self.peek()
        if kind == "op" and text == "^":
            self.advance()
            return BinOp("^", base, self.factor())  # right-associative
        return base

    def atom(self) -> Expr:
        kind, text, pos = self.advance()
        if kind == "num":
            return Num(float(text))
        if kind == "name":
            nkind, ntext, _ = self.peek()
            if nkind == "op" and ntext == "(":
                if text not in FUNCTIONS:
                    raise UnknownFunctionError(
                        f"unknown function {text!r} (supported: {', '.join(FUNCTIONS)})"
                    )
                self.advance()
                arg = self.expr()
                self.expect_op(")")
                return Call(text, arg)
            return Var(text)
        if kind == "op" and text == "(":
            e = self.expr()
            self.expect_op(")")
            return e
        raise ParseError(
            f"expected number, name or '(', found {text!r}" if text else "unexpected end of input",
            self.source,
            pos,
        )


def parse(source: str) -> Expr:
    if not source or not source.strip():
        raise ParseError("empty expression", source, 0)
    return _Parser(source).parse()


# --- printing --------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


def _print(e: Expr, parent_prec: int) -> str:
    if isinstance(e, Num):
        return repr(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        s = f"-{_print(e.arg, _PREC['neg'])}"
        return f"({s})" if parent_prec > _PREC["neg"] else s
    if isinstance(e, Call):
        return f"{e.func}({_print(e.arg, 0)})"
    prec = _PREC[e.op]
    # - and / are left-associative, ^ right-associative: bump the precedence
    # demanded of the child on the non-associating side
    if e.op == "^":
        lhs, rhs = _print(e.left, prec + 1), _print(e.right, prec)
    else:
        lhs, rhs = _print(e.left, prec), _print(e.right, prec + 1)
    s = f"{lhs}{e.op}{rhs}"
    return f"({s})" if parent_prec > prec else s


def to_source(e: Expr) -> str:
    """Print a tree so that ``parse(to_source(e))`` is structurally equal.

    Holds for trees whose numeric literals are non-negative (negation is the
    Neg node); all public constructors here keep that form.
    """
    return _print(e, 0)


def free_vars(e: Expr) -> set:
    if isinstance(e, Num):
        return set()
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Neg):
        return free_vars(e.arg)
    if isinstance(e, Call):
        return free_vars(e.arg)
    return free_vars(e.left) | free_vars(e.right)


# --- evaluation ------------------------------------------------------------


def _pow(base: float, expo: float) -> float:
    if base == 0.0 and expo < 0:
        raise DomainError("zero base with negative exponent")
    if base < 0 and expo != round(expo):
        raise DomainError(f"negative base {base!r} with non-integer exponent {expo!r}")
    try:
        return float(base**expo)
    except OverflowError as exc:
        raise DomainError(f"overflow in {base!r}^{expo!r}") from exc


_SAFE_FUNCS: dict[str, Callable[[float], float]] = {
    "sin": math.sin,
    "cos": math.cos,
    "exp": math.exp,
    "abs": abs,
    "floor": math.floor,
}


def _log(x: float) -> float:
    if x <= 0.0:
        raise DomainError(f"log of non-positive value {x!r}")
    return math.log(x)


def _sqrt(x: float) -> float:
    if x < 0.0:
        raise DomainError(f"sqrt of negative value {x!r}")
    return math.sqrt(x)


def evaluate(e: Expr, bindings: dict) -> float:
    """Evaluate with all free variables bound; domain errors raise, never NaN."""
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        try:
            return float(bindings[e.name])
        except KeyError:
            raise UnboundVariableError(f"unbound variable {e.name!r}") from None
    if isinstance(e, Neg):
        return -evaluate(e.arg, bindings)
    if isinstance(e, Call):
        x = evaluate(e.arg, bindings)
        if e.func == "log":
            return _log(x)
        if e.func == "sqrt":
            return _sqrt(x)
        return _SAFE_FUNCS[e.func](x)
    a = evaluate(e.left, bindings)
    b = evaluate(e.right, bindings)
    if e.op == "+":
        return a + b
    if e.op == "-":
        return a - b
    if e.op == "*":
        return a * b
    if e.op == "/":
        if b == 0.0:
            raise DomainError("division by zero")
        return a / b
    if e.op == "^":
        return _pow(a, b)
    raise AssertionError(e.op)


def compile1(e: Expr, var: str) -> Callable[[float], float]:
    """Compile a single-variable expression to a fast scalar callable.

    Used on hot paths (ODE right-hand sides); raises the same domain errors
    as :func:`evaluate`.
    """
    extra = free_vars(e) - {var}
    if extra:
        raise UnboundVariableError(f"unbound variables {sorted(extra)!r}")

    if isinstance(e, Num):
        v = e.value
        return lambda t: v
    if isinstance(e, Var):
        return lambda t: t
    if isinstance(e, Neg):
        f = compile1(e.arg, var)
        return lambda t: -f(t)
    if isinstance(e, Call):
        f = compile1(e.arg, var)
        if e.func == "log":
            return lambda t: _log(f(t))
        if e.func == "sqrt":
            return lambda t: _sqrt(f(t))
        g = _SAFE_FUNCS[e.func]
        return lambda t: g(f(t))
    fa = compile1(e.left, var)
    fb = compile1(e.right, var)
    if e.op == "+":
        return lambda t: fa(t) + fb(t)
    if e.op == "-":
        return lambda t: fa(t) - fb(t)
    if e.op == "*":
        return lambda t: fa(t) * fb(t)
    if e.op == "/":

        def div(t):
            d = fb(t)
            if d == 0.0:
                raise DomainError("division by zero")
            return fa(t) / d

        return div
    if e.op == "^":
        return lambda t: _pow(fa(t), fb(t))
    raise AssertionError(e.op)


def compile_np(e: Expr, var: str) -> Callable:
    """Compile to a numpy-vectorized callable (array in, array out).

    Domain violations anywhere in the input array raise DomainError.
    """
    import numpy as np

    extra = free_vars(e) - {var}
    if extra:
        raise UnboundVariableError(f"unbound variables {sorted(extra)!r}")

    if isinstance(e, Num):
        v = e.value
        return lambda t: np.full_like(np.asarray(t, dtype=float), v)
    if isinstance(e, Var):
        return lambda t: np.asarray(t, dtype=float)
    if isinstance(e, Neg):
        f = compile_np(e.arg, var)
        return lambda t: -f(t)
    if isinstance(e, Call):
        f = compile_np(e.arg, var)
        if e.func == "log":

            def vlog(t):
                x = f(t)
                if np.any(x <= 0.0):
                    raise DomainError("log of non-positive value")
                return np.log(x)

            return vlog
        if e.func == "sqrt":

            def vsqrt(t):
                x = f(t)
                if np.any(x < 0.0):
                    raise DomainError("sqrt of negative value")
                return np.sqrt(x)

            return vsqrt
        g = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "abs": np.abs,
             "floor": np.floor}[e.func]
        return lambda t: g(f(t))
    fa = compile_np(e.left, var)
    fb = compile_np(e.right, var)
    if e.op == "+":
        return lambda t: fa(t) + fb(t)
    if e.op == "-":
        return lambda t: fa(t) - fb(t)
    if e.op == "*":
        return lambda t: fa(t) * fb(t)
    if e.op == "/":

        def vdiv(t):
            d = fb(t)
            if np.any(d == 0.0):
                raise DomainError("division by zero")
            return fa(t) / d

        return vdiv
    if e.op == "^":

        def vpow(t):
            a = fa(t)
            b = fb(t)
            if np.any((a < 0) & (b != np.round(b))):
                raise DomainError("negative base with non-integer exponent")
            if np.any((a == 0) & (b < 0)):
                raise DomainError("zero base with negative exponent")
            return a**b

        return vpow
    raise AssertionError(e.op)


# --- differentiation -------------------------------------------------------


def _num(v: float) -> Expr:
    return Neg(Num(-v)) if v < 0 else Num(v)


def _is_zero(e: Expr) -> bool:
    return isinstance(e, Num) and e.value == 0.0


def _is_one(e: Expr) -> bool:
    return isinstance(e, Num) and e.value == 1.0


def _add(a: Expr, b: Expr) -> Expr:
    if _is_zero(a):
        return b
    if _is_zero(b):
        return a
    return BinOp("+", a, b)


def _sub(a: Expr, b: Expr) -> Expr:
    if _is_zero(b):
        return a
    if _is_zero(a):
        return Neg(b)
    return BinOp("-", a, b)


def _mul(a: Expr, b: Expr) -> Expr:
    if _is_zero(a) or _is_zero(b):
        return Num(0.0)
    if _is_one(a):
        return b
    if _is_one(b):
        return a
    return BinOp("*", a, b)


def _div(a: Expr, b: Expr) -> Expr:
    if _is_zero(a):
        return Num(0.0)
    if _is_one(b):
        return a
    return BinOp("/", a, b)


def differentiate(e: Expr, var: str) -> Expr:
    """Exact symbolic derivative; apply twice for a second derivative.

    Trees containing ``floor`` are rejected.  ``abs`` differentiates to
    arg/abs(arg) * arg', valid away from zeros of the argument.
    """
    if isinstance(e, Num):
        return Num(0.0)
    if isinstance(e, Var):
        return Num(1.0) if e.name == var else Num(0.0)
    if isinstance(e, Neg):
        da = differentiate(e.arg, var)
        return Num(0.0) if _is_zero(da) else Neg(da)
    if isinstance(e, Call):
        if e.func == "floor":
            raise NonDifferentiableError("floor is not differentiable")
        u = e.arg
        du = differentiate(u, var)
        if _is_zero(du):
            return Num(0.0)
        if e.func == "sin":
            return _mul(Call("cos", u), du)
        if e.func == "cos":
            return Neg(_mul(Call("sin", u), du))
        if e.func == "exp":
            return _mul(Call("exp", u), du)
        if e.func == "log":
            return _div(du, u)
        if e.func == "sqrt":
            return _div(du, _mul(_num(2.0), Call("sqrt", u)))
        if e.func == "abs":
            return _mul(_div(u, Call("abs", u)), du)
        raise AssertionError(e.func)
    da = differentiate(e.left, var)
    db = differentiate(e.right, var)
    if e.op == "+":
        return _add(da, db)
    if e.op == "-":
        return _sub(da, db)
    if e.op == "*":
        return _add(_mul(da, e.right), _mul(e.left, db))
    if e.op == "/":
        return _div(_sub(_mul(da, e.right), _mul(e.left, db)), BinOp("^", e.right, _num(2.0)))
    if e.op == "^":
        f, g = e.left, e.right
        if _is_zero(db):
            # constant exponent: g * f^(g-1) * f'
            if isinstance(g, Num):
                gm1 = _num(g.value - 1.0)
            else:
                gm1 = _sub(g, Num(1.0))
            return _mul(_mul(g, BinOp("^", f, gm1)), da)
        # general case: f^g * (g' log f + g f'/f)
        return _mul(
            BinOp("^", f, g),
            _add(_mul(db, Call("log", f)), _mul(g, _div(da, f))),
        )
    raise AssertionError(e.op)
