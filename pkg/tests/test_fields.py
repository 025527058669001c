"""Expression parser and coefficient-field behavior."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from galbrun.errors import FieldSyntaxError, MissingDerivative
from galbrun.fields import (ScalarField, VectorField, ast_poly_degree,
                            ast_to_text, parse_expression, parse_field)


def pts(*coords):
    arr = np.zeros((len(coords), 3))
    for i, c in enumerate(coords):
        arr[i, : len(c)] = c
    return arr


class TestParser:
    def test_arithmetic(self):
        f = ScalarField.expression("2*x + 3*y^2 - z/2")
        got = f(pts((1.0, 2.0, 4.0)))
        assert got[0] == pytest.approx(2 + 12 - 2)

    def test_precedence_and_unary_minus(self):
        f = ScalarField.expression("-x^2")
        assert f(pts((3.0,)))[0] == -9.0
        g = ScalarField.expression("2 - -3")
        assert g(pts(()))[0] == 5.0

    def test_functions(self):
        f = ScalarField.expression("sin(x)*exp(y) + tanh(z)")
        p = pts((0.5, 0.25, -1.0))
        assert f(p)[0] == pytest.approx(
            np.sin(0.5) * np.exp(0.25) + np.tanh(-1.0))

    @pytest.mark.parametrize("bad", [
        "2 +", "x**2", "sin(x", "unknownfunc(x)", "w + 1", "1 2", "()",
    ])
    def test_syntax_errors(self, bad):
        with pytest.raises(FieldSyntaxError):
            parse_expression(bad)

    def test_error_carries_position(self):
        with pytest.raises(FieldSyntaxError) as exc:
            parse_expression("1 + & 2")
        assert "position" in str(exc.value) or "char" in str(exc.value)

    def test_round_trip_through_text(self):
        src = "1 + 0.5*x*y - sin(3*z)^2"
        ast = parse_expression(src)
        again = parse_expression(ast_to_text(ast))
        p = pts((0.3, 0.7, 0.1), (1.0, -1.0, 2.0))
        f1 = ScalarField("expression", ast, source=src)
        f2 = ScalarField("expression", again, source=src)
        np.testing.assert_allclose(f1(p), f2(p), rtol=0, atol=0)


# A tiny polynomial AST generator: the parser must agree with direct
# numpy evaluation on anything the grammar can produce.
_coef = st.floats(min_value=-4, max_value=4,
                  allow_nan=False, allow_infinity=False)


@st.composite
def poly_text(draw, depth=0):
    if depth >= 3 or draw(st.booleans()):
        leaf = draw(st.sampled_from(["x", "y", "z", "num"]))
        if leaf == "num":
            return repr(draw(_coef))
        return leaf
    op = draw(st.sampled_from(["+", "-", "*"]))
    a = draw(poly_text(depth=depth + 1))
    b = draw(poly_text(depth=depth + 1))
    return "(%s %s %s)" % (a, op, b)


@given(poly_text())
@settings(max_examples=60, deadline=None)
def test_parser_matches_python_eval(src):
    f = ScalarField.expression(src)
    p = pts((0.3, -0.8, 1.5), (0.0, 0.25, -2.0))
    expected = [eval(src.replace("^", "**"),
                     {"x": q[0], "y": q[1], "z": q[2]}) for q in p]
    np.testing.assert_allclose(f(p), expected, rtol=1e-12, atol=1e-12)


class TestPolyDegree:
    @pytest.mark.parametrize("src,deg", [
        ("3.5", (0, 0, 0)),
        ("x", (1, 0, 0)),
        ("x*y^2", (1, 2, 0)),
        ("(1+x)^3 - z", (3, 0, 1)),
        ("x^2*(1-x)^2*y^2*(1-y)^2", (4, 4, 0)),
    ])
    def test_polynomial_degrees(self, src, deg):
        assert ast_poly_degree(parse_expression(src)) == deg

    def test_non_polynomial_is_none(self):
        assert ast_poly_degree(parse_expression("sin(x)")) is None
        assert ast_poly_degree(parse_expression("1/x")) is None

    def test_field_poly_degree(self):
        assert ScalarField.constant(2.0).poly_degree() == (0, 0, 0)
        assert ScalarField.expression("x*y").poly_degree() == (1, 1, 0)
        assert ScalarField.expression("exp(x)").poly_degree() is None
        v = VectorField(["x^2", "y", "0"])
        assert v.poly_degree() == (2, 1, 0)


class TestScalarField:
    def test_constant_broadcast(self):
        f = ScalarField.constant(2.5)
        assert f(pts((0, 0, 0), (1, 1, 1))).tolist() == [2.5, 2.5]

    def test_missing_derivative_raises(self):
        f = ScalarField.expression("x^2")
        with pytest.raises(MissingDerivative):
            f.grad
        with pytest.raises(MissingDerivative):
            f.hess

    def test_declared_derivatives_are_returned(self):
        g = VectorField(["2*x", "0", "0"])
        h = tuple(ScalarField.constant(v) for v in (2, 0, 0, 0, 0, 0))
        f = ScalarField.expression("x^2", grad=g, hess=h)
        p = pts((1.5,))
        assert f.grad(p)[0, 0] == 3.0
        H = f.hess_at(p)
        assert H.shape == (1, 3, 3)
        assert H[0, 0, 0] == 2.0 and H[0, 1, 1] == 0.0

    def test_hess_symmetric_layout(self):
        # order (xx, yy, zz, xy, xz, yz) must land symmetrically
        h = tuple(ScalarField.constant(v) for v in (1, 2, 3, 4, 5, 6))
        f = ScalarField.constant(0.0, grad=VectorField.constant([0, 0, 0]),
                                 hess=h)
        H = f.hess_at(pts((0.0,)))[0]
        np.testing.assert_array_equal(H, H.T)
        assert H[0, 1] == 4 and H[0, 2] == 5 and H[1, 2] == 6

    def test_grid_sample_matches_linear_function(self):
        ax = np.linspace(0, 1, 6)
        xx, yy = np.meshgrid(ax, ax, indexing="ij")
        f = ScalarField.grid_sample((ax, ax), 2 * xx + 3 * yy)
        p = pts((0.33, 0.71), (0.5, 0.5))
        np.testing.assert_allclose(f(p), [2 * 0.33 + 3 * 0.71, 2.5],
                                   rtol=1e-12)
        assert f.poly_degree() is None

    def test_text_is_reparsable(self):
        f = ScalarField.expression("1 + 0.5*x - sin(y)^2")
        g = ScalarField.expression(f.text())
        p = pts((0.3, 0.7), (1.5, -0.2))
        np.testing.assert_array_equal(f(p), g(p))


class TestVectorField:
    def test_shape_and_padding(self):
        v = VectorField(["x", "y"])  # third component defaults to zero
        out = v(pts((2.0, 3.0, 9.0)))
        assert out.shape == (1, 3)
        np.testing.assert_array_equal(out[0], [2.0, 3.0, 0.0])

    def test_constant(self):
        v = VectorField.constant([1.0, 2.0, 3.0])
        np.testing.assert_array_equal(v(pts((0, 0), (1, 1)))[1], [1, 2, 3])

    def test_parse_field_dispatch(self):
        assert isinstance(parse_field("x"), ScalarField)
        assert isinstance(parse_field(["x", "y"]), VectorField)
        with pytest.raises(FieldSyntaxError):
            parse_field(["x", "y", "z", "x"])
