"""Quadratic-form identities, inf-sup probes, creg estimates, sonic sweep."""

import numpy as np
import pytest

from conftest import (base_config, const_scalar, curved_config,
                      divfree_flow_config, zero_hess, ZERO_GRAD)
from galbrun.assembly import assemble_blocks, assemble_cowling
from galbrun.diagnostics import (estimate_creg, estimate_creg_level,
                                 imag_identity_residual, inf_sup,
                                 representation_identity_residual,
                                 selfadjointness_residual, sonic_sweep,
                                 whitened_singulars)
from galbrun.errors import (EmptySubspace, PreconditionViolated,
                            SolverBreakdown)
from galbrun.fields import ScalarField, VectorField
from galbrun.meshing import build_interval_mesh, build_rect_mesh
from galbrun.problem import ProblemConfig, validate_config
from galbrun.spaces import build_space


def compressible_config():
    """Honestly declared flow with div(rho b) = 1 - 2x != 0."""
    return ProblemConfig(
        omega=1.2, angvel=(0.0, 0.0, 0.0), grav_const=1.0,
        rho=const_scalar(1.0), c=const_scalar(1.0), gamma=const_scalar(0.5),
        p=ScalarField.constant(1.0, grad=ZERO_GRAD, hess=zero_hess()),
        phi=ScalarField.constant(0.0, grad=ZERO_GRAD, hess=zero_hess()),
        b=VectorField(["x*(1 - x)", "0", "0"]),
        divrhob=ScalarField.expression("1 - 2*x"),
        bounds={"rho": (0.5, 2.0), "c": (0.5, 2.0), "gamma": (0.0, 1.0)},
        flags={})


def _flow_blocks():
    mesh = build_rect_mesh((0.0, 1.0), (0.0, 1.0), 4, 4)
    vp = validate_config(divfree_flow_config(), mesh)
    space = build_space(mesh, 1, "vector-with-normal-constraint")
    return assemble_blocks(vp, space)


def _compressible_blocks():
    mesh = build_interval_mesh(0.0, 1.0, 16)
    vp = validate_config(compressible_config(), mesh)
    space = build_space(mesh, 1, "vector-with-normal-constraint")
    return assemble_blocks(vp, space)


class TestImagIdentity:
    def test_holds_for_divergence_free_flow(self):
        out = imag_identity_residual(_flow_blocks(), trials=50)
        assert out["max_rel_residual"] < 1e-12
        assert out["trials"] == 50
        assert out["omega"] == pytest.approx(1.3)
        assert out["dofs"] == 30

    def test_violated_by_compression(self):
        out = imag_identity_residual(_compressible_blocks(), trials=50)
        assert out["max_rel_residual"] > 1e-4

    def test_deterministic_in_seed(self):
        blocks = _flow_blocks()
        a = imag_identity_residual(blocks, trials=10, seed=3)
        b = imag_identity_residual(blocks, trials=10, seed=3)
        assert a == b


class TestSelfadjointness:
    def test_transport_hermitian_for_divergence_free_flow(self):
        out = selfadjointness_residual(_flow_blocks())
        assert out["norm"] > 0.0
        assert out["residual"] < 1e-12

    def test_violated_by_compression(self):
        out = selfadjointness_residual(_compressible_blocks())
        assert out["residual"] > 1e-3

    def test_no_flow_reports_zero(self, square_mesh):
        vp = validate_config(base_config(), square_mesh)
        space = build_space(square_mesh, 1, "vector-with-normal-constraint")
        out = selfadjointness_residual(assemble_blocks(vp, space))
        assert out == {"residual": 0.0, "norm": 0.0}


class TestRepresentationIdentity:
    def test_constant_coefficients(self, square_mesh):
        vp = validate_config(base_config(), square_mesh)
        space = build_space(square_mesh, 1, "vector-with-normal-constraint")
        out = representation_identity_residual(vp, space)
        assert out["residual"] < 1e-13
        assert out["dofs"] == space.n_dofs

    def test_smooth_stratification(self, validated_square):
        space = build_space(validated_square.mesh, 1,
                            "vector-with-normal-constraint")
        out = representation_identity_residual(validated_square, space)
        assert out["residual"] < 1e-10

    def test_raw_config_accepted(self, square_mesh):
        space = build_space(square_mesh, 1, "vector-with-normal-constraint")
        out = representation_identity_residual(base_config(), space)
        assert out["residual"] < 1e-13

    def test_flow_rejected(self):
        mesh = build_rect_mesh((0.0, 1.0), (0.0, 1.0), 4, 4)
        vp = validate_config(divfree_flow_config(), mesh)
        space = build_space(mesh, 1, "vector-with-normal-constraint")
        with pytest.raises(PreconditionViolated):
            representation_identity_residual(vp, space)


class TestInfSup:
    def test_whitening_the_gram_itself(self):
        blocks = _flow_blocks()
        s = whitened_singulars(blocks.GRAMX, blocks.GRAMX)
        np.testing.assert_allclose(s, 1.0, atol=1e-12)
        rep = inf_sup(blocks.GRAMX, blocks.GRAMX)
        assert rep.beta == pytest.approx(1.0, abs=1e-12)
        assert rep.method == "dense"
        assert rep.premultiplied is False
        assert rep.to_dict() == {"beta": rep.beta, "dofs": 30,
                                 "method": "dense", "premultiplied": False}

    def test_iterative_matches_dense(self):
        blocks = _flow_blocks()
        A = assemble_cowling(blocks)
        dense = inf_sup(A, blocks.GRAMX)
        iterative = inf_sup(A, blocks.GRAMX, size_limit=10)
        assert iterative.method == "iterative"
        assert iterative.beta == pytest.approx(dense.beta, rel=1e-6)

    def test_premultiplied_has_same_singular_values(self, curved_decomp):
        blocks, decomp = curved_decomp
        A = assemble_cowling(blocks)
        plain = inf_sup(A, blocks.GRAMX)
        pre = inf_sup(A, blocks.GRAMX, decomp=decomp)
        assert pre.premultiplied is True
        # T is a graph isometry, so the whitened spectrum is unchanged
        assert pre.beta == pytest.approx(plain.beta, rel=1e-9)

    def test_premultiplied_needs_dense_path(self, curved_decomp):
        blocks, decomp = curved_decomp
        A = assemble_cowling(blocks)
        with pytest.raises(SolverBreakdown):
            inf_sup(A, blocks.GRAMX, decomp=decomp, size_limit=10)

    def test_static_form_on_free_space_is_singular(self):
        # omega = 0, b = 0: the reduced form is the pure div-div energy,
        # whose kernel on the unconstrained space contains the constants
        mesh = build_interval_mesh(0.0, 1.0, 30)
        vp = validate_config(base_config(omega=0.0, gamma=0.0), mesh)
        space = build_space(mesh, 1, "vector-free")
        blocks = assemble_blocks(vp, space)
        A = assemble_cowling(blocks)
        assert inf_sup(A, blocks.GRAMX).beta < 1e-12

    def test_iterative_breaks_down_on_singular_matrix(self):
        import scipy.sparse as sp

        # a structural zero pivot makes the factorization fail outright
        A = sp.diags([0.0] + [1.0] * 19, format="csc", dtype=complex)
        G = sp.identity(20, format="csc")
        with pytest.raises(SolverBreakdown):
            inf_sup(A, G, size_limit=10)


@pytest.fixture(scope="module")
def curved_decomp():
    from galbrun.assembly import assemble_B, assemble_R
    from galbrun.decomposition import build_decomposition

    mesh = build_rect_mesh((0.0, 1.0), (0.0, 1.0), 5, 5)
    vp = validate_config(curved_config(), mesh)
    space = build_space(mesh, 1, "vector-with-normal-constraint")
    blocks = assemble_blocks(vp, space)
    R = assemble_R(vp, space, blocks.scalar_space)
    B = assemble_B(vp, blocks.scalar_space)
    return blocks, build_decomposition(R, B, blocks.GRAMX, blocks.GRAMH1)


class TestCregEstimate:
    def test_interval_estimate_is_one(self):
        # in 1D the divergence IS the full gradient, so the Rayleigh
        # quotient over the (full) complement space equals 1 identically
        mesh = build_interval_mesh(0.0, 1.0, 8)
        vp = validate_config(base_config(), mesh)
        rep = estimate_creg(vp, levels=3)
        assert rep.degree == 1
        assert rep.monotone
        assert [r["level"] for r in rep.rows] == [1, 2, 3]
        assert [r["dofs"] for r in rep.rows] == [7, 15, 31]
        for row in rep.rows:
            assert abs(row["estimate"] - 1.0) < 1e-12
            assert row["dim_V"] == row["dofs"]

    def test_square_estimates_decay_monotonically(self):
        mesh = build_rect_mesh((0.0, 1.0), (0.0, 1.0), 4, 4)
        vp = validate_config(base_config(), mesh)
        rep = estimate_creg(vp, levels=2)
        ests = [r["estimate"] for r in rep.rows]
        assert rep.monotone
        assert ests[1] < ests[0]
        # equal-order spaces: the constant decays towards zero under
        # refinement; regression-pinned values guard the whole pipeline
        assert ests[0] == pytest.approx(0.23661192037081175, abs=1e-8)
        assert ests[1] == pytest.approx(0.11881486806629848, abs=1e-8)

    def test_empty_complement_raises(self):
        # a single square cell constrains every vector dof away
        mesh = build_rect_mesh((0.0, 1.0), (0.0, 1.0), 1, 1)
        vp = validate_config(base_config(), mesh)
        space = build_space(mesh, 1, "vector-with-normal-constraint")
        assert space.n_dofs == 0
        with pytest.raises(EmptySubspace):
            estimate_creg_level(vp, space)

    def test_report_dict(self):
        mesh = build_interval_mesh(0.0, 1.0, 4)
        vp = validate_config(base_config(), mesh)
        d = estimate_creg(vp, levels=1).to_dict()
        assert set(d) == {"rows", "monotone", "degree"}


@pytest.fixture(scope="module")
def sweep_report():
    return sonic_sweep(machs=(1.0, 0.5, 1.5), levels=2, base_cells=8)


class TestSonicSweep:
    def test_rows_sorted_and_shaped(self, sweep_report):
        keys = [(r["mach"], r["level"]) for r in sweep_report.rows]
        assert keys == sorted(keys)
        assert len(sweep_report.rows) == 6
        for r in sweep_report.rows:
            assert r["dofs"] == r["cells"] - 1

    def test_subsonic_rows(self, sweep_report):
        rows = [r for r in sweep_report.rows if r["mach"] == 0.5]
        for r in rows:
            assert r["count"] == 0
            assert r["beta"] > 0.1
            # c^2 - b^2 = 1 - 1/4 exactly on the plateau
            assert r["principal_min"] == 0.75

    def test_sonic_rows_grow_a_kernel(self, sweep_report):
        rows = [r for r in sweep_report.rows if r["mach"] == 1.0]
        counts = [r["count"] for r in rows]
        assert counts[0] >= 1
        assert counts[1] > counts[0]
        for r in rows:
            assert r["beta"] < 1e-12
            assert r["principal_min"] == 0.0  # degenerate, not negative

    def test_supersonic_rows_flip_sign(self, sweep_report):
        rows = [r for r in sweep_report.rows if r["mach"] == 1.5]
        for r in rows:
            assert r["principal_min"] == -1.25
            assert r["beta"] > 0.0

    def test_template_record(self, sweep_report):
        d = sweep_report.to_dict()
        assert d["threshold"] == 1e-6
        t = d["template"]
        assert t["domain"] == [-1.0, 1.0]
        assert t["omega"] == 0.0
        assert t["base_cells"] == 8
        assert "tanh" in t["bump"] and "tanh" in t["bump_dx"]
