"""Coefficient fields and the expression language they are written in.

A field is a real-valued function of position evaluated in batches: the
argument is an (n, 3) array of points (unused trailing coordinates are zero
for 1D/2D problems) and the result is an (n,) array (scalar) or (n, 3) array
(vector).  Three kinds exist: constants, parsed expressions, and grid samples
with multilinear interpolation.

Expression grammar::

    expr   := ['+'|'-'] term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := base ('^' ['-'] integer)?
    base   := number | ident | '(' expr ')' | func '(' expr (',' expr)* ')'
    ident  in {x, y, z};  func in {sin, cos, exp, log, sqrt, abs, tanh}

Numbers are IEEE doubles in decimal or scientific notation.  The leading
sign in ``expr`` (also after '(' and ',') is an extension of the bare EBNF;
without it ordinary inputs like ``exp(-x^2)`` would not parse.
"""

import re

import numpy as np

from .errors import FieldSyntaxError, MissingDerivative

_FUNCS = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "abs": np.abs,
    "tanh": np.tanh,
}

_IDENTS = {"x": 0, "y": 1, "z": 2}

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            # skip over whitespace-only tails
            rest = text[pos:]
            if rest.strip() == "":
                break
            raise FieldSyntaxError("unexpected character %r" % rest.strip()[0], pos)
        if m.group("num") is not None:
            tokens.append(("num", float(m.group("num")), m.start("num")))
        elif m.group("name") is not None:
            tokens.append(("name", m.group("name"), m.start("name")))
        else:
            tokens.append(("op", m.group("op"), m.start("op")))
        pos = m.end()
    tokens.append(("end", None, len(text)))
    return tokens


# ---------------------------------------------------------------------------
# AST nodes.  Plain tuples keep construction cheap: ("num", v), ("var", axis),
# ("neg", a), ("add"/"sub"/"mul"/"div", a, b), ("pow", a, n), ("call", fn, a).


class _Parser:
    def __init__(self, text):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op):
        kind, val, pos = self.peek()
        if kind != "op" or val != op:
            raise FieldSyntaxError("expected %r" % op, pos)
        return self.advance()

    def parse(self):
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise FieldSyntaxError("trailing input %r" % str(val), pos)
        return node

    def expr(self):
        node = self.term()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.advance()
                rhs = self.term()
                node = ("add" if val == "+" else "sub", node, rhs)
            else:
                return node

    def term(self):
        node = self.factor()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "*/":
                self.advance()
                rhs = self.factor()
                node = ("mul" if val == "*" else "div", node, rhs)
            else:
                return node

    def factor(self):
        kind, val, _ = self.peek()
        if kind == "op" and val in "+-":
            # unary sign: binds looser than ^ so -x^2 means -(x^2)
            self.advance()
            node = self.factor()
            return ("neg", node) if val == "-" else node
        node = self.base()
        kind, val, _ = self.peek()
        if kind == "op" and val == "^":
            self.advance()
            sign = 1
            kind, val, pos = self.peek()
            if kind == "op" and val == "-":
                self.advance()
                sign = -1
            kind, val, pos = self.peek()
            if kind != "num" or val != int(val):
                raise FieldSyntaxError("exponent must be an integer", pos)
            self.advance()
            node = ("pow", node, sign * int(val))
        return node

    def base(self):
        kind, val, pos = self.advance()
        if kind == "num":
            return ("num", val)
        if kind == "name":
            if val in _IDENTS:
                return ("var", _IDENTS[val])
            if val in _FUNCS:
                self.expect_op("(")
                args = [self.expr()]
                while True:
                    k, v, _ = self.peek()
                    if k == "op" and v == ",":
                        self.advance()
                        args.append(self.expr())
                    else:
                        break
                self.expect_op(")")
                if len(args) != 1:
                    raise FieldSyntaxError(
                        "%s takes one argument, got %d" % (val, len(args)), pos
                    )
                return ("call", val, args[0])
            raise FieldSyntaxError("unknown identifier %r" % val, pos)
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        raise FieldSyntaxError("unexpected token %r" % str(val), pos)


def parse_expression(text):
    """Parse an expression string into an AST tuple tree."""
    if not isinstance(text, str):
        raise FieldSyntaxError("expression must be a string, got %r" % type(text))
    return _Parser(text).parse()


def eval_ast(node, pts):
    """Evaluate an AST on an (n, 3) point array; returns an (n,) array."""
    op = node[0]
    if op == "num":
        return np.full(pts.shape[0], node[1])
    if op == "var":
        return pts[:, node[1]].astype(float, copy=True)
    if op == "neg":
        return -eval_ast(node[1], pts)
    if op == "add":
        return eval_ast(node[1], pts) + eval_ast(node[2], pts)
    if op == "sub":
        return eval_ast(node[1], pts) - eval_ast(node[2], pts)
    if op == "mul":
        return eval_ast(node[1], pts) * eval_ast(node[2], pts)
    if op == "div":
        with np.errstate(all="ignore"):
            return eval_ast(node[1], pts) / eval_ast(node[2], pts)
    if op == "pow":
        with np.errstate(all="ignore"):
            return eval_ast(node[1], pts) ** node[2]
    if op == "call":
        with np.errstate(all="ignore"):
            return _FUNCS[node[1]](eval_ast(node[2], pts))
    raise ValueError("corrupt AST node %r" % (node,))


def ast_to_text(node):
    """Print an AST back to source, fully parenthesized (round-trip stable)."""
    op = node[0]
    if op == "num":
        return repr(node[1])
    if op == "var":
        return "xyz"[node[1]]
    if op == "neg":
        return "(-%s)" % ast_to_text(node[1])
    if op in ("add", "sub", "mul", "div"):
        sym = {"add": "+", "sub": "-", "mul": "*", "div": "/"}[op]
        return "(%s %s %s)" % (ast_to_text(node[1]), sym, ast_to_text(node[2]))
    if op == "pow":
        return "(%s^%d)" % (ast_to_text(node[1]), node[2])
    if op == "call":
        return "%s(%s)" % (node[1], ast_to_text(node[2]))
    raise ValueError("corrupt AST node %r" % (node,))


def ast_is_polynomial(node):
    """True if the AST uses only +, -, * and nonnegative integer powers."""
    op = node[0]
    if op in ("num", "var"):
        return True
    if op == "neg":
        return ast_is_polynomial(node[1])
    if op in ("add", "sub", "mul"):
        return ast_is_polynomial(node[1]) and ast_is_polynomial(node[2])
    if op == "pow":
        return node[2] >= 0 and ast_is_polynomial(node[1])
    return False


def ast_poly_degree(node):
    """Per-axis polynomial degrees (dx, dy, dz), or None if not polynomial.

    Per-axis degrees are what tensor quadrature exactness is measured
    against; the bound is exact for sums/products of monomials.
    """
    op = node[0]
    if op == "num":
        return (0, 0, 0)
    if op == "var":
        return tuple(1 if i == node[1] else 0 for i in range(3))
    if op == "neg":
        return ast_poly_degree(node[1])
    if op in ("add", "sub"):
        a = ast_poly_degree(node[1])
        b = ast_poly_degree(node[2])
        if a is None or b is None:
            return None
        return tuple(max(x, y) for x, y in zip(a, b))
    if op == "mul":
        a = ast_poly_degree(node[1])
        b = ast_poly_degree(node[2])
        if a is None or b is None:
            return None
        return tuple(x + y for x, y in zip(a, b))
    if op == "pow":
        if node[2] < 0:
            return None
        a = ast_poly_degree(node[1])
        if a is None:
            return None
        return tuple(x * node[2] for x in a)
    return None


def _as_points(pts):
    pts = np.asarray(pts, dtype=float)
    if pts.ndim == 1:
        pts = pts[None, :]
    if pts.shape[1] != 3:
        padded = np.zeros((pts.shape[0], 3))
        padded[:, : pts.shape[1]] = pts
        pts = padded
    return pts


class ScalarField:
    """A real scalar coefficient field.

    Parameters
    ----------
    kind : str
        One of ``"constant"``, ``"expression"``, ``"grid-sample"``.
    payload :
        The constant value, the AST, or an interpolator closure.
    source : str, optional
        Original expression text (kept for reports and hashing).
    grad : VectorField, optional
        Declared gradient; requesting it when absent raises MissingDerivative.
    hess : tuple of six ScalarField, optional
        Declared second derivatives in the order (xx, yy, zz, xy, xz, yz).
    """

    def __init__(self, kind, payload, source=None, grad=None, hess=None):
        self.kind = kind
        self.payload = payload
        self.source = source
        self._grad = grad
        self._hess = hess

    # -- constructors -------------------------------------------------------

    @classmethod
    def constant(cls, value, grad=None, hess=None):
        return cls("constant", float(value), source=repr(float(value)),
                   grad=grad, hess=hess)

    @classmethod
    def expression(cls, text, grad=None, hess=None):
        ast = parse_expression(text)
        return cls("expression", ast, source=text, grad=grad, hess=hess)

    @classmethod
    def grid_sample(cls, axes, values, grad=None, hess=None):
        """Multilinear interpolation of samples on a tensor grid.

        ``axes`` is a tuple of up to three strictly increasing 1D arrays and
        ``values`` the sample array with matching shape.  Evaluation clamps
        points to the grid's bounding box so it is total on the closure.
        """
        from scipy.interpolate import RegularGridInterpolator

        axes = tuple(np.asarray(a, dtype=float) for a in axes)
        values = np.asarray(values, dtype=float)
        interp = RegularGridInterpolator(axes, values, method="linear",
                                         bounds_error=False, fill_value=None)
        lo = np.array([a[0] for a in axes])
        hi = np.array([a[-1] for a in axes])

        def payload(pts):
            clamped = np.clip(pts[:, : len(axes)], lo, hi)
            return interp(clamped)

        return cls("grid-sample", payload, grad=grad, hess=hess)

    # -- evaluation ---------------------------------------------------------

    def __call__(self, pts):
        pts = _as_points(pts)
        if self.kind == "constant":
            return np.full(pts.shape[0], self.payload)
        if self.kind == "expression":
            return eval_ast(self.payload, pts)
        return np.asarray(self.payload(pts), dtype=float)

    # -- declared derivatives ------------------------------------------------

    @property
    def grad(self):
        if self._grad is None:
            raise MissingDerivative("field has no declared gradient")
        return self._grad

    @property
    def hess(self):
        if self._hess is None:
            raise MissingDerivative("field has no declared Hessian")
        return self._hess

    @property
    def has_grad(self):
        return self._grad is not None

    @property
    def has_hess(self):
        return self._hess is not None

    def hess_at(self, pts):
        """Evaluate the declared Hessian as an (n, 3, 3) symmetric array."""
        pts = _as_points(pts)
        xx, yy, zz, xy, xz, yz = [f(pts) for f in self.hess]
        out = np.empty((pts.shape[0], 3, 3))
        out[:, 0, 0] = xx
        out[:, 1, 1] = yy
        out[:, 2, 2] = zz
        out[:, 0, 1] = out[:, 1, 0] = xy
        out[:, 0, 2] = out[:, 2, 0] = xz
        out[:, 1, 2] = out[:, 2, 1] = yz
        return out

    @property
    def is_polynomial(self):
        if self.kind == "constant":
            return True
        if self.kind == "expression":
            return ast_is_polynomial(self.payload)
        return False

    def poly_degree(self):
        """Per-axis polynomial degrees, or None for non-polynomial fields."""
        if self.kind == "constant":
            return (0, 0, 0)
        if self.kind == "expression":
            return ast_poly_degree(self.payload)
        return None

    def text(self):
        """Source text (canonical print for expressions)."""
        if self.kind == "expression":
            return ast_to_text(self.payload)
        if self.kind == "constant":
            return repr(self.payload)
        return "<grid-sample>"

    def __repr__(self):
        return "ScalarField(%s, %s)" % (self.kind, self.text())


class VectorField:
    """A real 3-vector field built from three scalar components."""

    def __init__(self, components):
        comps = []
        for comp in components:
            if isinstance(comp, ScalarField):
                comps.append(comp)
            elif isinstance(comp, str):
                comps.append(ScalarField.expression(comp))
            else:
                comps.append(ScalarField.constant(comp))
        while len(comps) < 3:
            comps.append(ScalarField.constant(0.0))
        if len(comps) != 3:
            raise FieldSyntaxError("vector field needs at most 3 components")
        self.components = tuple(comps)
        self.kind = "vector"

    @classmethod
    def constant(cls, values):
        return cls([float(v) for v in values])

    def __call__(self, pts):
        pts = _as_points(pts)
        out = np.empty((pts.shape[0], 3))
        for c in range(3):
            out[:, c] = self.components[c](pts)
        return out

    @property
    def is_polynomial(self):
        return all(c.is_polynomial for c in self.components)

    def poly_degree(self):
        """Per-axis max over components, or None if any is non-polynomial."""
        degs = [c.poly_degree() for c in self.components]
        if any(d is None for d in degs):
            return None
        return tuple(max(d[i] for d in degs) for i in range(3))

    def text(self):
        return "(%s, %s, %s)" % tuple(c.text() for c in self.components)

    def __repr__(self):
        return "VectorField%s" % self.text()


def parse_field(text):
    """Parse expression source into a field.

    A single string yields a :class:`ScalarField`; a sequence of up to three
    strings yields a :class:`VectorField`.  Raises FieldSyntaxError (with
    position) for malformed input, unknown identifiers, or arity mismatches.
    """
    if isinstance(text, str):
        return ScalarField.expression(text)
    return VectorField(list(text))
