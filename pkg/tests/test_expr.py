import math

import numpy as np
import pytest

from rdafront import expr as ex
from rdafront.errors import (
    ExprDomainError,
    ExprSyntaxError,
    UnboundVariableError,
    UnknownIdentifierError,
)


def test_parse_eval_basics():
    assert ex.parse("cos(pi*x/4)").eval({"x": 0.0}) == pytest.approx(1.0)
    assert ex.parse("sin(pi*x)").eval({"x": 0.5}) == pytest.approx(1.0)
    assert ex.parse("-u").eval({"u": -6.0}) == pytest.approx(6.0)


def test_eval_source_function_values():
    f = ex.parse("cos(pi*x/4)*cos(pi*y/4)*cos(pi*z/4)")
    assert f.eval({"x": 0.0, "y": 0.0, "z": 0.0}) == pytest.approx(1.0)
    assert f.eval({"x": 2.0, "y": 0.0, "z": 0.0}) == pytest.approx(0.0,
                                                                   abs=1e-15)
    assert ex.parse("sin(pi*x)").eval({"x": 1.0}) == pytest.approx(0.0,
                                                                   abs=1e-15)


def test_precedence_and_associativity():
    # ^ binds tighter than unary minus; equal-precedence binaries go left
    assert ex.parse("-u^2").eval({"u": 3.0}) == -9.0
    assert ex.parse("2^3^2").eval({}) == 64.0
    assert ex.parse("8/4/2").eval({}) == 1.0
    assert ex.parse("2^-1").eval({}) == 0.5
    assert ex.parse("1 - 2 - 3").eval({}) == -4.0


def test_parse_errors_carry_offsets():
    with pytest.raises(ExprSyntaxError) as err:
        ex.parse("1 + * 2")
    assert err.value.offset == 4
    with pytest.raises(UnknownIdentifierError) as err:
        ex.parse("foo(x)")
    assert err.value.name == "foo"
    with pytest.raises(UnknownIdentifierError):
        ex.parse("q + 1")
    with pytest.raises(ExprSyntaxError):
        ex.parse("")
    with pytest.raises(ExprSyntaxError):
        ex.parse("(1 + 2")


def test_eval_errors():
    with pytest.raises(UnboundVariableError):
        ex.parse("x + y").eval({"x": 1.0})
    with pytest.raises(ExprDomainError):
        ex.parse("log(x)").eval({"x": -1.0})
    with pytest.raises(ExprDomainError):
        ex.parse("1/x").eval({"x": 0.0})


def test_differentiate_basics():
    d = ex.parse("sin(pi*x)").diff("x")
    assert d.eval({"x": 0.0}) == pytest.approx(math.pi)
    assert ex.parse("cos(pi*x/4)").diff("y").eval({}) == 0.0
    assert ex.parse("u^2/2").diff("u").eval({"u": -6.0}) == pytest.approx(-6.0)


@pytest.mark.parametrize("text", [
    "sin(pi*x)", "cos(pi*x/4)*cos(pi*y/4)*cos(pi*z/4)", "tanh(x*y - z)",
    "exp(-x^2) + sqrt(1 + y^2)", "u^3 - u/(1 + t^2)", "log(2 + x^2)",
    "tan(x/3)", "abs(1 + x^2)",
])
@pytest.mark.parametrize("var", ["x", "y", "z", "u", "t"])
def test_derivative_matches_finite_differences(text, var):
    ast = ex.parse(text)
    dast = ast.diff(var)
    rng = np.random.default_rng(42)
    step = 1e-6
    for _ in range(20):
        point = {v: rng.uniform(-0.9, 0.9) for v in ex.VARIABLES}
        hi = dict(point)
        lo = dict(point)
        hi[var] += step
        lo[var] -= step
        fd = (ast.eval(hi) - ast.eval(lo)) / (2 * step)
        sym = dast.eval(point)
        assert abs(sym - fd) <= 1e-6 * (1.0 + abs(fd))


def test_roundtrip_print_parse():
    rng = np.random.default_rng(7)
    texts = ["x + -2*(y - z)^2", "sin(pi*x)*cos(y)/(2 + u^2)",
             "-x^2 + tanh(t)*sqrt(1 + z^2)", "neg(x) + abs(y - 1)"]
    for text in texts:
        ast = ex.parse(text)
        back = ex.parse(ex.to_text(ast))
        for _ in range(100):
            binding = {v: rng.uniform(-2, 2) for v in ex.VARIABLES}
            assert ast.eval(binding) == pytest.approx(back.eval(binding),
                                                      rel=0, abs=0)


def test_vectorized_eval_matches_scalar():
    ast = ex.parse("sin(pi*x)*z + u^2")
    xs = np.linspace(-1, 1, 11)
    arr = ast.eval({"x": xs, "z": 2.0, "u": -1.0})
    for xv, got in zip(xs, arr):
        assert got == pytest.approx(ast.eval({"x": xv, "z": 2.0, "u": -1.0}))


def test_rename_variables():
    ast = ex.parse("sin(x) + y*z")
    renamed = ex.rename_variables(ast, {"x": "y", "y": "z", "z": "u"})
    assert renamed.eval({"y": 0.3, "z": 2.0, "u": 5.0}) == pytest.approx(
        ast.eval({"x": 0.3, "y": 2.0, "z": 5.0}))


def test_py_source_matches_eval():
    ast = ex.parse("cos(pi*x/4)*cos(pi*y/4) - u*exp(z)")
    src = ex.py_source(ast)
    ns = ex.codegen_namespace()
    fn = eval(f"lambda x, y, z, u, t: {src}", ns)
    rng = np.random.default_rng(3)
    for _ in range(50):
        vals = rng.uniform(-1, 1, size=5)
        binding = dict(zip(ex.VARIABLES, vals))
        assert fn(*vals) == pytest.approx(ast.eval(binding), rel=1e-15)
