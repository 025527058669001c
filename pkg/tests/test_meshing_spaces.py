"""Tensor meshes, element spaces, quadrature, and transfer operators."""

import numpy as np
import pytest

from galbrun.errors import (ConstraintViolation, InvalidRange,
                            UnsupportedDegree)
from galbrun.fields import ScalarField, VectorField
from galbrun.meshing import Mesh, build_interval_mesh, build_rect_mesh
from galbrun.spaces import (Quadrature, build_space, interpolate,
                            prolongation)


class TestMesh:
    def test_interval_basics(self):
        m = build_interval_mesh(0.0, 2.0, 4)
        assert m.dimension == 1
        assert m.num_cells == 4
        np.testing.assert_allclose(m.axes[0], [0, 0.5, 1, 1.5, 2])
        assert m.domain_measure() == pytest.approx(2.0)

    def test_rect_basics(self):
        m = build_rect_mesh((0, 1), (0, 2), 2, 4)
        assert m.dimension == 2
        assert m.num_cells == 8
        assert m.domain_measure() == pytest.approx(2.0)

    def test_invalid_range(self):
        with pytest.raises(InvalidRange):
            build_interval_mesh(1.0, 0.0, 4)
        with pytest.raises(InvalidRange):
            build_interval_mesh(0.0, 1.0, 0)

    def test_boundary_normals_are_outward_units(self):
        m = build_rect_mesh((0, 1), (0, 1), 3, 3)
        for facet in m.boundary_facets:
            n = facet["normal"]
            assert np.linalg.norm(n) == pytest.approx(1.0)

    def test_refine_keeps_parent_nodes_bitwise(self):
        m = build_interval_mesh(0.0, 1.0, 3)  # thirds: not dyadic
        f = m.refine()
        assert f.num_cells == 6
        # every coarse node appears in the fine axis exactly
        assert set(m.axes[0]).issubset(set(f.axes[0]))
        assert f.level == m.level + 1

    def test_refine_midpoints(self):
        m = build_interval_mesh(0.0, 1.0, 2)
        f = m.refine()
        np.testing.assert_array_equal(f.axes[0], [0, 0.25, 0.5, 0.75, 1.0])


class TestQuadrature:
    @pytest.mark.parametrize("npts", [2, 3, 4, 5])
    def test_polynomial_exactness(self, npts):
        # Gauss rule with n points integrates degree 2n-1 on [0,1]
        q = Quadrature(npts, 1)
        for deg in range(2 * npts):
            val = float(np.sum(q.weights * q.points[:, 0] ** deg))
            assert val == pytest.approx(1.0 / (deg + 1), rel=1e-13)

    def test_tensor_weights_sum_to_one(self):
        q = Quadrature(3, 2)
        assert q.n_points == 9
        assert float(np.sum(q.weights)) == pytest.approx(1.0)


class TestSpaces:
    def test_dof_counts_1d(self):
        m = build_interval_mesh(0.0, 1.0, 4)
        s = build_space(m, 1, "scalar")
        assert s.n_dofs == 5
        v = build_space(m, 1, "vector-with-normal-constraint")
        assert v.n_dofs == 3  # endpoints constrained
        vf = build_space(m, 1, "vector-free")
        assert vf.n_dofs == 5
        d = build_space(m, 1, "scalar", dirichlet=True)
        assert d.n_dofs == 3

    def test_dof_counts_2d_quadratic(self):
        m = build_rect_mesh((0, 1), (0, 1), 2, 2)
        s = build_space(m, 2, "scalar")
        assert s.n_dofs == 25
        v = build_space(m, 2, "vector-with-normal-constraint")
        # 12 edge nodes constrain one component, 4 corners constrain both
        assert v.n_dofs == 2 * 25 - 20

    def test_unsupported_degree(self):
        m = build_interval_mesh(0.0, 1.0, 2)
        with pytest.raises(UnsupportedDegree):
            build_space(m, 3, "scalar")

    def test_partition_of_unity(self):
        m = build_rect_mesh((0, 1), (0, 1), 2, 2)
        s = build_space(m, 2, "scalar")
        ref = np.array([[0.1, 0.7], [0.5, 0.5], [0.9, 0.3]])
        vals, grads = s.tabulate(ref)
        np.testing.assert_allclose(vals.sum(axis=1), 1.0, atol=1e-14)
        np.testing.assert_allclose(grads.sum(axis=1), 0.0, atol=1e-13)

    def test_quad_points_cover_domain_measure(self):
        m = build_rect_mesh((0, 2), (0, 3), 3, 2)
        s = build_space(m, 1, "scalar")
        pts, w = s.quad_points(Quadrature(3, 2))
        assert pts.shape[-1] == 3
        assert float(w.sum()) == pytest.approx(6.0)

    def test_embed_restrict_roundtrip(self):
        m = build_rect_mesh((0, 1), (0, 1), 3, 3)
        v = build_space(m, 1, "vector-with-normal-constraint")
        x = np.arange(v.n_dofs, dtype=float) + 1.0
        assert np.array_equal(v.restrict(v.embed(x)), x)


class TestInterpolate:
    def test_exact_for_space_degree(self):
        m = build_rect_mesh((0, 1), (0, 1), 3, 3)
        s = build_space(m, 2, "scalar")
        f = ScalarField.expression("1 + x*y + x^2")
        u = interpolate(f, s)
        # check at the nodes themselves
        vals = f(s.node_coords3())
        np.testing.assert_allclose(u.real, vals, atol=1e-14)

    def test_normal_constraint_violation(self):
        m = build_rect_mesh((0, 1), (0, 1), 3, 3)
        v = build_space(m, 1, "vector-with-normal-constraint")
        bad = VectorField(["1", "0", "0"])  # nonzero normal flow at x=0,1
        with pytest.raises(ConstraintViolation):
            interpolate(bad, v)
        ok = VectorField(["x*(1-x)", "sin(3.141592653589793*y)", "0"])
        u = interpolate(ok, v)
        assert u.shape == (v.n_dofs,)

    def test_1d_vector_field(self):
        m = build_interval_mesh(0.0, 1.0, 8)
        v = build_space(m, 1, "vector-with-normal-constraint")
        u = interpolate(VectorField(["x*(1-x)", "0", "0"]), v)
        assert u.shape == (v.n_dofs,)
        assert np.max(np.abs(u)) == pytest.approx(0.25, rel=1e-12)


class TestProlongation:
    @pytest.mark.parametrize("kind,degree,field", [
        ("scalar", 1, "1 + x"),
        ("scalar", 2, "1 + x*y + y^2"),
        ("vector-free", 1, ("1 + x", "2 - y", "0")),
        ("vector-with-normal-constraint", 2,
         ("x*(1-x)*y", "y*(1-y)*x^2", "0")),
    ])
    def test_nested_spaces_reproduce_coarse_functions(self, kind, degree,
                                                      field):
        # the probe fields lie in the coarse space, so nodal interpolation
        # on both levels is exact and prolongation must connect them
        m = build_rect_mesh((0, 1), (0, 1), 2, 3)
        mf = m.refine()
        coarse = build_space(m, degree, kind)
        fine = build_space(mf, degree, kind)
        P = prolongation(coarse, fine)
        assert P.shape == (fine.n_dofs, coarse.n_dofs)
        f = (ScalarField.expression(field) if isinstance(field, str)
             else VectorField(list(field)))
        uc = interpolate(f, coarse)
        uf = interpolate(f, fine)
        np.testing.assert_allclose(P @ uc, uf, atol=1e-13)

    def test_1d_quadratic_chain(self):
        m = build_interval_mesh(0.0, 1.0, 4)
        s0 = build_space(m, 2, "scalar")
        s1 = build_space(m.refine(), 2, "scalar")
        P = prolongation(s0, s1)
        f = ScalarField.expression("2 - x + 0.5*x^2")
        np.testing.assert_allclose(P @ interpolate(f, s0),
                                   interpolate(f, s1), atol=1e-13)
