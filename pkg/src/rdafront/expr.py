"""Arithmetic expressions over (x, y, z, u, t): parsing, evaluation,
exact symbolic differentiation, printing, and Python-source emission.

Coefficients and boundary data enter the solvers as quoted strings in
config files; this module turns them into small ASTs that can be
evaluated on scalars or numpy arrays and differentiated exactly (the
first-order corrections need derivative fields such as dA/dx on whole
grids, where finite differencing would add a step-size knob for no
benefit).

Grammar (EBNF)::

    expr     = term , { ("+" | "-") , term } ;
    term     = unary , { ("*" | "/") , unary } ;
    unary    = "-" , unary | power ;
    power    = atom , { "^" , exponent } ;
    exponent = "-" , exponent | atom ;
    atom     = NUMBER | "pi" | VARIABLE | FUNCTION , "(" , expr , ")"
             | "(" , expr , ")" ;
    VARIABLE = "x" | "y" | "z" | "u" | "t" ;
    FUNCTION = "sin" | "cos" | "tan" | "tanh" | "exp" | "log"
             | "sqrt" | "abs" | "neg" ;

Binary operators of equal precedence associate left (including "^", so
a^b^c parses as (a^b)^c). "^" binds tighter than unary minus: -u^2 is
-(u^2). Beyond constant folding no simplification is attempted;
derivative trees may grow, which is acceptable at the grid sizes used.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import (
    ExprDomainError,
    ExprSyntaxError,
    UnboundVariableError,
    UnknownIdentifierError,
)

VARIABLES = ("x", "y", "z", "u", "t")

FUNCTIONS = ("sin", "cos", "tan", "tanh", "exp", "log", "sqrt", "abs", "neg")

_NP_FUNCS = {
    "sin": np.sin, "cos": np.cos, "tan": np.tan, "tanh": np.tanh,
    "exp": np.exp, "log": np.log, "sqrt": np.sqrt, "abs": np.abs,
    "neg": np.negative,
}


# ---------------------------------------------------------------------------
# AST nodes

class Expr:
    """Base expression node. Immutable; all operations are pure."""

    __slots__ = ()

    def eval(self, bindings):
        """Evaluate with a {variable: scalar-or-array} mapping."""
        try:
            with np.errstate(divide="raise", invalid="raise"):
                return self._ev(bindings)
        except FloatingPointError as exc:
            raise ExprDomainError(
                f"evaluation left the real domain: {exc}", operation="eval"
            ) from None

    def diff(self, var):
        """Exact symbolic partial derivative with respect to `var`."""
        if var not in VARIABLES:
            raise UnboundVariableError(var)
        return self._d(var)

    def variables(self):
        """Set of variable names appearing in the tree."""
        out = set()
        self._vars(out)
        return out

    def __repr__(self):
        return f"{type(self).__name__}({self.text()})"


class Const(Expr):
    __slots__ = ("value",)

    def __init__(self, value):
        self.value = float(value)

    def _ev(self, bindings):
        return self.value

    def _d(self, var):
        return Const(0.0)

    def _vars(self, out):
        pass

    def text(self, prec=0):
        if self.value < 0:
            s = repr(self.value)
            return f"({s})" if prec > 0 else s
        return repr(self.value)

    def source(self):
        return repr(self.value)


class Var(Expr):
    __slots__ = ("name",)

    def __init__(self, name):
        self.name = name

    def _ev(self, bindings):
        try:
            return bindings[self.name]
        except KeyError:
            raise UnboundVariableError(self.name) from None

    def _d(self, var):
        return Const(1.0 if var == self.name else 0.0)

    def _vars(self, out):
        out.add(self.name)

    def text(self, prec=0):
        return self.name

    def source(self):
        return self.name


class Call(Expr):
    __slots__ = ("fn", "arg")

    def __init__(self, fn, arg):
        self.fn = fn
        self.arg = arg

    def _ev(self, bindings):
        return _NP_FUNCS[self.fn](self.arg._ev(bindings))

    def _d(self, var):
        u = self.arg
        du = u._d(var)
        if isinstance(du, Const) and du.value == 0.0:
            return Const(0.0)
        fn = self.fn
        if fn == "sin":
            outer = Call("cos", u)
        elif fn == "cos":
            outer = neg(Call("sin", u))
        elif fn == "tan":
            outer = div(Const(1.0), mul(Call("cos", u), Call("cos", u)))
        elif fn == "tanh":
            outer = sub(Const(1.0), mul(Call("tanh", u), Call("tanh", u)))
        elif fn == "exp":
            outer = Call("exp", u)
        elif fn == "log":
            outer = div(Const(1.0), u)
        elif fn == "sqrt":
            outer = div(Const(0.5), Call("sqrt", u))
        elif fn == "abs":
            # u/|u|; undefined at u = 0, like the derivative itself
            outer = div(u, Call("abs", u))
        elif fn == "neg":
            outer = Const(-1.0)
        else:  # pragma: no cover - parser admits only the names above
            raise AssertionError(fn)
        return mul(outer, du)

    def _vars(self, out):
        self.arg._vars(out)

    def text(self, prec=0):
        return f"{self.fn}({self.arg.text()})"

    def source(self):
        if self.fn == "neg":
            return f"(-({self.arg.source()}))"
        return f"{self.fn}({self.arg.source()})"


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}
_NEG_PREC = 3  # unary minus sits between mul and pow


class Neg(Expr):
    __slots__ = ("arg",)

    def __init__(self, arg):
        self.arg = arg

    def _ev(self, bindings):
        return np.negative(self.arg._ev(bindings))

    def _d(self, var):
        return neg(self.arg._d(var))

    def _vars(self, out):
        self.arg._vars(out)

    def text(self, prec=0):
        inner = self.arg.text(_NEG_PREC)
        s = f"-{inner}"
        return f"({s})" if prec > _NEG_PREC else s

    def source(self):
        return f"(-({self.arg.source()}))"


class Binary(Expr):
    __slots__ = ("op", "left", "right")

    def __init__(self, op, left, right):
        self.op = op
        self.left = left
        self.right = right

    def _ev(self, bindings):
        a = self.left._ev(bindings)
        b = self.right._ev(bindings)
        op = self.op
        if op == "+":
            return np.add(a, b)
        if op == "-":
            return np.subtract(a, b)
        if op == "*":
            return np.multiply(a, b)
        if op == "/":
            return np.divide(a, b)
        return np.power(a, b)

    def _d(self, var):
        op = self.op
        u, v = self.left, self.right
        du, dv = u._d(var), v._d(var)
        if op == "+":
            return add(du, dv)
        if op == "-":
            return sub(du, dv)
        if op == "*":
            return add(mul(du, v), mul(u, dv))
        if op == "/":
            return div(sub(mul(du, v), mul(u, dv)), mul(v, v))
        # power
        if isinstance(v, Const):
            c = v.value
            if c == 0.0:
                return Const(0.0)
            return mul(mul(Const(c), powr(u, Const(c - 1.0))), du)
        # general u^v = exp(v log u)
        return mul(powr(u, v),
                   add(mul(dv, Call("log", u)), mul(v, div(du, u))))

    def _vars(self, out):
        self.left._vars(out)
        self.right._vars(out)

    def text(self, prec=0):
        p = _PREC[self.op]
        # left-associative: right child needs parens at equal precedence
        s = f"{self.left.text(p)} {self.op} {self.right.text(p + 1)}"
        return f"({s})" if prec > p else s

    def source(self):
        a, b = self.left.source(), self.right.source()
        if self.op == "^":
            return f"(({a})**({b}))"
        return f"(({a}) {self.op} ({b}))"


# ---------------------------------------------------------------------------
# folding constructors

def _const(node):
    return isinstance(node, Const)


def add(a, b):
    if _const(a) and _const(b):
        return Const(a.value + b.value)
    if _const(a) and a.value == 0.0:
        return b
    if _const(b) and b.value == 0.0:
        return a
    return Binary("+", a, b)


def sub(a, b):
    if _const(a) and _const(b):
        return Const(a.value - b.value)
    if _const(b) and b.value == 0.0:
        return a
    if _const(a) and a.value == 0.0:
        return neg(b)
    return Binary("-", a, b)


def mul(a, b):
    if _const(a) and _const(b):
        return Const(a.value * b.value)
    if _const(a):
        if a.value == 0.0:
            return Const(0.0)
        if a.value == 1.0:
            return b
    if _const(b):
        if b.value == 0.0:
            return Const(0.0)
        if b.value == 1.0:
            return a
    return Binary("*", a, b)


def div(a, b):
    if _const(a) and _const(b) and b.value != 0.0:
        return Const(a.value / b.value)
    if _const(a) and a.value == 0.0 and not (_const(b) and b.value == 0.0):
        return Const(0.0)
    if _const(b) and b.value == 1.0:
        return a
    return Binary("/", a, b)


def powr(a, b):
    if _const(b):
        if b.value == 1.0:
            return a
        if b.value == 0.0:
            return Const(1.0)
        if _const(a):
            return Const(a.value ** b.value)
    return Binary("^", a, b)


def neg(a):
    if _const(a):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


# ---------------------------------------------------------------------------
# tokenizer / parser

class _Tok:
    __slots__ = ("kind", "value", "pos")

    def __init__(self, kind, value, pos):
        self.kind = kind
        self.value = value
        self.pos = pos


def _tokenize(text):
    toks = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if c in "+-*/^()":
            toks.append(_Tok(c, c, i))
            i += 1
            continue
        if c.isdigit() or (c == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            while j < n and (text[j].isdigit() or text[j] == "."):
                j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    j = k
                    while j < n and text[j].isdigit():
                        j += 1
            lit = text[i:j]
            try:
                value = float(lit)
            except ValueError:
                raise ExprSyntaxError(f"bad number literal '{lit}'", i)
            toks.append(_Tok("num", value, i))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            toks.append(_Tok("ident", text[i:j], i))
            i = j
            continue
        raise ExprSyntaxError(f"unexpected character '{c}'", i)
    toks.append(_Tok("end", None, n))
    return toks


class _Parser:
    def __init__(self, text):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, kind):
        tok = self.take()
        if tok.kind != kind:
            raise ExprSyntaxError(f"expected '{kind}', got '{tok.value}'",
                                  tok.pos)
        return tok

    def parse(self):
        node = self.expr()
        tok = self.peek()
        if tok.kind != "end":
            raise ExprSyntaxError(f"trailing input '{tok.value}'", tok.pos)
        return node

    def expr(self):
        node = self.term()
        while self.peek().kind in ("+", "-"):
            op = self.take().kind
            rhs = self.term()
            node = add(node, rhs) if op == "+" else sub(node, rhs)
        return node

    def term(self):
        node = self.unary()
        while self.peek().kind in ("*", "/"):
            op = self.take().kind
            rhs = self.unary()
            node = mul(node, rhs) if op == "*" else div(node, rhs)
        return node

    def unary(self):
        if self.peek().kind == "-":
            self.take()
            return neg(self.unary())
        return self.power()

    def power(self):
        node = self.atom()
        while self.peek().kind == "^":
            self.take()
            node = powr(node, self.exponent())
        return node

    def exponent(self):
        if self.peek().kind == "-":
            self.take()
            return neg(self.exponent())
        return self.atom()

    def atom(self):
        tok = self.take()
        if tok.kind == "num":
            return Const(tok.value)
        if tok.kind == "(":
            node = self.expr()
            self.expect(")")
            return node
        if tok.kind == "ident":
            name = tok.value
            if self.peek().kind == "(":
                if name not in FUNCTIONS:
                    raise UnknownIdentifierError(name, tok.pos)
                self.take()
                arg = self.expr()
                self.expect(")")
                return Call(name, arg)
            if name == "pi":
                return Const(math.pi)
            if name in VARIABLES:
                return Var(name)
            raise UnknownIdentifierError(name, tok.pos)
        raise ExprSyntaxError(f"unexpected token '{tok.value}'", tok.pos)


# ---------------------------------------------------------------------------
# public api

def parse(text: str) -> Expr:
    """Parse expression text into an AST."""
    if not text or not text.strip():
        raise ExprSyntaxError("empty expression", 0)
    return _Parser(text).parse()


def evaluate(ast: Expr, bindings: dict):
    """Evaluate `ast` under `bindings` (values may be scalars or arrays)."""
    return ast.eval(bindings)


def differentiate(ast: Expr, var: str) -> Expr:
    """Exact symbolic partial derivative of `ast` with respect to `var`."""
    return ast.diff(var)


def to_text(ast: Expr) -> str:
    """Serialize to text that `parse` reads back with identical semantics."""
    return ast.text()


def py_source(ast: Expr) -> str:
    """Emit a Python expression string for code generation.

    The string references only the names in FUNCTIONS (plus the variable
    names); callers exec it with math- or numpy-backed namespaces.
    """
    return ast.source()


def rename_variables(ast: Expr, mapping: dict) -> Expr:
    """Copy of `ast` with variable leaves renamed (targets must be valid)."""
    for target in mapping.values():
        if target not in VARIABLES:
            raise UnboundVariableError(target)
    if isinstance(ast, Var):
        return Var(mapping.get(ast.name, ast.name))
    if isinstance(ast, Const):
        return ast
    if isinstance(ast, Neg):
        return Neg(rename_variables(ast.arg, mapping))
    if isinstance(ast, Call):
        return Call(ast.fn, rename_variables(ast.arg, mapping))
    return Binary(ast.op, rename_variables(ast.left, mapping),
                  rename_variables(ast.right, mapping))


def codegen_namespace():
    """Scalar (math-module) namespace for exec'ing emitted sources."""
    ns = {name: getattr(math, name) for name in
          ("sin", "cos", "tan", "tanh", "exp", "log", "sqrt")}
    ns["abs"] = abs
    return ns
