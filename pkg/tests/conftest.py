"""Shared configuration builders for the test suite."""

import numpy as np
import pytest

from galbrun.fields import ScalarField, VectorField
from galbrun.meshing import build_interval_mesh, build_rect_mesh
from galbrun.problem import ProblemConfig, validate_config

ZERO_GRAD = VectorField.constant([0.0, 0.0, 0.0])


def zero_hess():
    return tuple(ScalarField.constant(0.0) for _ in range(6))


def const_scalar(v):
    return ScalarField.constant(float(v))


def base_config(omega=1.0, gamma=0.5, angvel=(0.0, 0.0, 0.0), rhs=None,
                grav_const=1.0):
    """Constant-coefficient, no-flow configuration (the simplest valid one)."""
    return ProblemConfig(
        omega=omega, angvel=angvel, grav_const=grav_const,
        rho=const_scalar(1.0), c=const_scalar(1.0), gamma=const_scalar(gamma),
        p=ScalarField.constant(1.0, grad=ZERO_GRAD, hess=zero_hess()),
        phi=ScalarField.constant(0.0, grad=ZERO_GRAD, hess=zero_hess()),
        b=VectorField.constant([0.0, 0.0, 0.0]),
        divrhob=const_scalar(0.0),
        bounds={"rho": (0.5, 2.0), "c": (0.5, 2.0), "gamma": (0.0, 1.0)},
        flags={}, rhs=rhs)


def curved_config(omega=1.1, angvel=(0.0, 0.0, 0.3)):
    """Smooth nonconstant p and phi with hand-declared derivatives, b = 0."""
    return ProblemConfig(
        omega=omega, angvel=angvel, grav_const=1.0,
        rho=ScalarField.expression("1 + 0.25*x"),
        c=ScalarField.expression("1 + 0.1*y"),
        gamma=const_scalar(0.4),
        p=ScalarField.expression(
            "1 + 0.05*x^2 + 0.03*y^2",
            grad=VectorField(["0.1*x", "0.06*y", "0"]),
            hess=(const_scalar(0.1), const_scalar(0.06), const_scalar(0.0),
                  const_scalar(0.0), const_scalar(0.0), const_scalar(0.0))),
        phi=ScalarField.expression(
            "0.02*x*y",
            grad=VectorField(["0.02*y", "0.02*x", "0"]),
            hess=(const_scalar(0.0), const_scalar(0.0), const_scalar(0.0),
                  const_scalar(0.02), const_scalar(0.0), const_scalar(0.0))),
        b=VectorField.constant([0.0, 0.0, 0.0]),
        divrhob=const_scalar(0.0),
        bounds={"rho": (0.5, 2.0), "c": (0.5, 2.0), "gamma": (0.0, 1.0)},
        flags={})


def divfree_flow_config(s0=1.0, s1=0.0, s2=0.0, rho_slope=0.5, omega=1.3,
                        angvel=(0.0, 0.0, 0.4)):
    """Divergence-free flow on the unit square: rho*b = curl(psi) with
    psi = x^2 (1-x)^2 y^2 (1-y)^2 (s0 + s1 x + s2 y), so div(rho b) = 0
    holds identically and the declared divrhob = 0 is exact."""
    s = "(%r + %r*x + %r*y)" % (s0, s1, s2)
    wx, wy = "x^2*(1-x)^2", "y^2*(1-y)^2"
    dwx = "(2*x*(1-x)^2 - 2*x^2*(1-x))"
    dwy = "(2*y*(1-y)^2 - 2*y^2*(1-y))"
    psi_y = "%s*(%s*%s + %s*%r)" % (wx, dwy, s, wy, s2)
    psi_x = "%s*(%s*%s + %s*%r)" % (wy, dwx, s, wx, s1)
    rho = "1 + %r*x*y" % rho_slope
    return ProblemConfig(
        omega=omega, angvel=angvel, grav_const=1.0,
        rho=ScalarField.expression(rho),
        c=const_scalar(1.0), gamma=const_scalar(0.5),
        p=ScalarField.constant(1.0, grad=ZERO_GRAD, hess=zero_hess()),
        phi=ScalarField.constant(0.0, grad=ZERO_GRAD, hess=zero_hess()),
        b=VectorField(["(%s)/(%s)" % (psi_y, rho),
                       "-(%s)/(%s)" % (psi_x, rho), "0"]),
        divrhob=const_scalar(0.0),
        bounds={"rho": (0.5, 2.0), "c": (0.5, 2.0), "gamma": (0.0, 1.0)},
        flags={})


_PLATEAU = "0.25*(1 + tanh(160*(x - 0.125)))*(1 - tanh(160*(x - 0.875)))"
_PLATEAU_DX = ("40*(1 - tanh(160*(x - 0.125))^2)*(1 - tanh(160*(x - 0.875)))"
               " - 40*(1 + tanh(160*(x - 0.125)))"
               "*(1 - tanh(160*(x - 0.875))^2)")


def plateau_flow_config(bmax, c=2.0, omega=1.0, flags=None):
    """1D tangential flow with |b| = bmax exactly on the plateau [1/4, 3/4].

    The tanh edge factors saturate to exactly 1.0 in double precision away
    from the transition layers, so bnorm_inf = bmax and mach_inf = bmax/c
    come out bit-exact and margins can be checked against hand arithmetic.
    The flow is genuinely compressible (div(rho b) = bmax * plateau'), which
    admissibility does not care about; the declared divrhob is consistent.
    """
    return ProblemConfig(
        omega=omega, angvel=(0.0, 0.0, 0.0), grav_const=1.0,
        rho=const_scalar(1.0), c=const_scalar(c), gamma=const_scalar(0.0),
        p=ScalarField.constant(1.0, grad=ZERO_GRAD, hess=zero_hess()),
        phi=ScalarField.constant(0.0, grad=ZERO_GRAD, hess=zero_hess()),
        b=VectorField(["%r*(%s)" % (bmax, _PLATEAU), "0", "0"]),
        divrhob=ScalarField.expression("%r*(%s)" % (bmax, _PLATEAU_DX)),
        bounds={"rho": (1.0, 1.0), "c": (c, c), "gamma": (0.0, 0.0)},
        flags=dict(flags or {}))


def stratified_config(omega=1.0):
    """No-flow profile whose pressure curvature pushes the coefficient
    matrix left of the imaginary axis: M_xx = i*omega - (0.5 - 0.25 x^2),
    so the sector angle is atan(sup|0.5 - 0.25 x^2| / omega) > 0."""
    return ProblemConfig(
        omega=omega, angvel=(0.0, 0.0, 0.0), grav_const=1.0,
        rho=const_scalar(1.0), c=const_scalar(1.0), gamma=const_scalar(1.0),
        p=ScalarField.expression(
            "1 + 0.25*x^2",
            grad=VectorField(["0.5*x", "0", "0"]),
            hess=(const_scalar(0.5), const_scalar(0.0), const_scalar(0.0),
                  const_scalar(0.0), const_scalar(0.0), const_scalar(0.0))),
        phi=ScalarField.constant(0.0, grad=ZERO_GRAD, hess=zero_hess()),
        b=VectorField.constant([0.0, 0.0, 0.0]),
        divrhob=const_scalar(0.0),
        bounds={"rho": (1.0, 1.0), "c": (1.0, 1.0), "gamma": (1.0, 1.0)},
        flags={})


@pytest.fixture
def interval_mesh():
    return build_interval_mesh(0.0, 1.0, 8)


@pytest.fixture
def square_mesh():
    return build_rect_mesh((0.0, 1.0), (0.0, 1.0), 5, 5)


@pytest.fixture
def validated_square(square_mesh):
    return validate_config(curved_config(), square_mesh)
