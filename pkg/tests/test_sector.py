"""Numerical-range angles and the sufficient-condition table."""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import base_config, plateau_flow_config, stratified_config
from galbrun.errors import MissingCreg, PreconditionViolated
from galbrun.meshing import build_interval_mesh
from galbrun.problem import validate_config
from galbrun.sector import (CONDITION_NAMES, admissibility_conditions,
                            check_admissibility, compute_theta, sector_angle)


def _unitary(rng, n):
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    q, _ = np.linalg.qr(z)
    return q


def _mc_angle(m, n_samples, rng):
    """Monte-Carlo lower bound for sup |arg W(m)| from random unit vectors."""
    n = m.shape[0]
    z = rng.standard_normal((n_samples, n)) + 1j * rng.standard_normal(
        (n_samples, n))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    w = np.einsum("si,ij,sj->s", z.conj(), m, z)
    return float(np.max(np.abs(np.angle(w))))


class TestSectorAngle:
    @pytest.mark.parametrize("mat, expected", [
        (np.eye(2), 0.0),
        (np.zeros((3, 3)), 0.0),
        (np.diag([0.0, 1.0]), 0.0),
        (1j * np.eye(2), np.pi / 2),
        (np.diag([-1j, 1j]), np.pi / 2),
        ((-1.0 + 1j) * np.eye(2), 0.75 * np.pi),
        (np.diag([0.0, 1j, -1.0 + 1j]), 0.75 * np.pi),
        (np.diag([1.0, -1.0]), np.pi),
        (np.array([[-2j]]), np.pi / 2),
        (np.array([[0.0]]), 0.0),
    ])
    def test_hand_values(self, mat, expected):
        assert sector_angle(np.asarray(mat, dtype=complex)) == pytest.approx(
            expected, abs=1e-9)

    def test_damped_diagonal_example(self):
        # i*omega*gamma*rho - k on the diagonal with every factor 1:
        # the single numerical-range point -1 + i sits at angle 3*pi/4.
        m = np.diag([1j * 1.0 * 1.0 * 1.0 - 1.0] * 3)
        assert sector_angle(m) == pytest.approx(0.75 * np.pi, abs=1e-9)

    @pytest.mark.parametrize("seed", range(8))
    def test_normal_matrix_hull_right_half_plane(self, seed):
        # For a normal matrix W(M) is the convex hull of the eigenvalues;
        # arg is monotone along segments with Re > 0, so the sup over the
        # hull is the sup over the eigenvalues themselves.
        rng = np.random.default_rng(300 + seed)
        n = int(rng.integers(2, 6))
        lam = rng.uniform(0.1, 2.0, n) + 1j * rng.uniform(-2.0, 2.0, n)
        u = _unitary(rng, n)
        m = (u * lam) @ u.conj().T
        expected = float(np.max(np.abs(np.angle(lam))))
        assert sector_angle(m) == pytest.approx(expected, abs=1e-8)

    @pytest.mark.parametrize("seed", range(8))
    def test_normal_matrix_hull_left_of_axis(self, seed):
        # Same identity with eigenvalues pushed across the imaginary axis
        # (hull kept in the upper half-plane so the arg stays single-valued).
        rng = np.random.default_rng(700 + seed)
        n = int(rng.integers(2, 5))
        lam = rng.uniform(-2.0, 2.0, n) + 1j * rng.uniform(0.3, 2.0, n)
        lam[0] = rng.uniform(-2.0, -0.5) + 1j * rng.uniform(0.3, 2.0)
        u = _unitary(rng, n)
        m = (u * lam) @ u.conj().T
        expected = float(np.max(np.abs(np.angle(lam))))
        assert sector_angle(m) == pytest.approx(expected, abs=1e-8)

    @pytest.mark.parametrize("seed", range(3))
    def test_monte_carlo_cross_check(self, seed):
        rng = np.random.default_rng(4000 + seed)
        m = (rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
             + 2.0 * np.eye(3))
        ang = sector_angle(m)
        mc = _mc_angle(m, 400_000, rng)
        assert mc <= ang + 1e-9          # samples never exceed the sup
        assert ang - mc <= 5e-3          # and get close to it

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 10 ** 6),
           scale=st.floats(0.01, 100.0, allow_nan=False))
    def test_invariances(self, seed, scale):
        rng = np.random.default_rng(seed)
        m = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        ang = sector_angle(m)
        assert 0.0 <= ang <= np.pi
        u = _unitary(rng, 3)
        assert sector_angle(u @ m @ u.conj().T) == pytest.approx(
            ang, abs=1e-6)
        assert sector_angle(scale * m) == pytest.approx(ang, abs=1e-6)
        assert sector_angle(m.conj().T) == pytest.approx(ang, abs=1e-6)


class TestComputeTheta:
    def test_zero_for_constant_coefficients(self, square_mesh):
        vp = validate_config(base_config(), square_mesh)
        rep = compute_theta(vp)
        assert rep.theta == 0.0
        assert rep.n_samples == len(vp.sample_points)
        # the only numerical-range point is i*omega*gamma*rho: angle pi/2
        assert rep.worst_angle == pytest.approx(np.pi / 2, abs=1e-9)
        assert rep.per_point_angles is None
        d = rep.to_dict()
        assert set(d) == {"theta", "worst_point", "worst_angle", "n_samples"}
        json.dumps(d)

    def test_per_point_angles_constant(self, square_mesh):
        vp = validate_config(base_config(), square_mesh)
        rep = compute_theta(vp, per_point=True)
        assert rep.per_point_angles.shape == (rep.n_samples,)
        np.testing.assert_allclose(rep.per_point_angles, np.pi / 2,
                                   atol=1e-9)

    def test_matches_support_formula_on_stratified_profile(self):
        mesh = build_interval_mesh(0.0, 1.0, 8)
        vp = validate_config(stratified_config(1.0), mesh)
        rep = compute_theta(vp)
        x = vp.sample_points[:, 0]
        depth = 0.5 - 0.25 * x ** 2      # -Re M_xx, positive on [0, 1)
        assert rep.theta == pytest.approx(np.arctan(np.max(depth)), abs=1e-8)
        assert rep.worst_point[0] == pytest.approx(float(np.min(x)))
        rep2 = compute_theta(vp, per_point=True)
        np.testing.assert_allclose(rep2.per_point_angles - np.pi / 2,
                                   np.arctan(depth), atol=1e-7)

    def test_explicit_sample_points(self):
        mesh = build_interval_mesh(0.0, 1.0, 4)
        vp = validate_config(stratified_config(2.0), mesh)
        rep = compute_theta(vp, sample_points=np.array([[0.0, 0.0, 0.0]]))
        assert rep.n_samples == 1
        assert rep.theta == pytest.approx(np.arctan(0.5 / 2.0), abs=1e-8)

    def test_angle_shrinks_with_frequency(self):
        mesh = build_interval_mesh(0.0, 1.0, 8)
        t1 = compute_theta(validate_config(stratified_config(1.0), mesh)).theta
        t8 = compute_theta(validate_config(stratified_config(8.0), mesh)).theta
        assert 0.0 < t8 < 0.25 * t1


class TestAdmissibilityTable:
    def test_condition_table_values(self):
        sec2 = 1.0 / np.cos(np.pi / 6) ** 2
        rows = admissibility_conditions(
            {"rho": (1.0, 2.0), "c": (0.5, 3.0)}, mach_inf=0.4,
            bnorm_inf=0.2, theta=np.pi / 6, flags={"c_w1inf": True})
        assert [r["name"] for r in rows] == list(CONDITION_NAMES)
        by = {r["name"]: r for r in rows}
        assert by["Thm3.10"]["lhs"] == pytest.approx(0.16)
        assert by["Thm3.10"]["threshold"] == pytest.approx(0.75)
        assert by["App-b"]["lhs"] == pytest.approx(sec2 * 2.0 * 0.04)
        assert by["App-b"]["threshold"] == pytest.approx(0.25)
        assert by["App-c"]["lhs"] == pytest.approx(sec2 * 2.0 * 0.16)
        assert by["App-c"]["applicable"]
        assert not by["App-a"]["applicable"]   # no creg supplied
        assert not by["Thm3.5"]["applicable"]  # p, phi not flagged constant
        assert not by["App-d"]["applicable"]
        assert not by["App-e"]["applicable"]
        for r in rows:
            assert r["margin"] == pytest.approx(
                r["threshold"] - r["lhs"], abs=0.0)
            assert r["passed"] == (r["applicable"] and r["margin"] > 0.0)


class TestCheckAdmissibility:
    def _validated(self, bmax, flags=None):
        mesh = build_interval_mesh(0.0, 1.0, 8)
        return validate_config(plateau_flow_config(bmax, flags=flags), mesh)

    def test_flow_extrema_are_exact(self):
        vp = self._validated(0.5)
        assert vp.bnorm_inf == 0.5
        assert vp.mach_inf == 0.25

    def test_golden_margins_half_flow(self):
        vp = self._validated(0.5, flags={"c_w1inf": True, "rho_w1inf": True})
        theta = compute_theta(vp).theta
        assert theta == 0.0
        rep = check_admissibility(vp, theta, creg=0.8)
        expected = {
            "Thm3.5": 1.0 - 0.0625,
            "Thm3.10": 1.0 - 0.0625,
            "Thm3.11": 1.0 - 0.0625,
            "App-a": 0.8 ** 2 * 4.0 - 0.25,
            "App-b": 4.0 - 0.25,
            "App-c": 1.0 - 0.0625,
            "App-d": 4.0 - 0.25,
            "App-e": 1.0 - 0.0625,
        }
        for name, margin in expected.items():
            row = rep.row(name)
            assert row["applicable"], name
            assert row["margin"] == pytest.approx(margin, abs=1e-12), name
            assert row["passed"], name
        assert rep.overall
        assert rep.satisfied == list(CONDITION_NAMES)

    def test_golden_margins_unit_flow(self):
        vp = self._validated(1.0, flags={"c_w1inf": True, "rho_w1inf": True})
        rep = check_admissibility(vp, 0.0, creg=0.8)
        expected = {
            "Thm3.5": 0.75,
            "App-a": 0.8 ** 2 * 4.0 - 1.0,
            "App-b": 3.0,
            "App-c": 0.75,
            "App-d": 3.0,
            "App-e": 0.75,
        }
        for name, margin in expected.items():
            assert rep.row(name)["margin"] == pytest.approx(
                margin, abs=1e-12), name

    def test_margins_decrease_with_flow(self):
        margins = {"Thm3.10": [], "App-b": []}
        for bmax in (0.25, 0.5, 0.75, 1.0):
            rep = check_admissibility(self._validated(bmax), 0.0)
            for name in margins:
                margins[name].append(rep.row(name)["margin"])
        for name, seq in margins.items():
            assert all(a > b for a, b in zip(seq, seq[1:])), name

    def test_flag_gating(self):
        rep = check_admissibility(self._validated(0.5), 0.0)
        for name in ("App-a", "App-c", "App-d", "App-e"):
            assert not rep.row(name)["applicable"], name
            assert not rep.row(name)["passed"], name
        assert rep.satisfied == ["Thm3.5", "Thm3.10", "Thm3.11", "App-b"]

    def test_nonconstant_p_disables_flat_background_row(self, validated_square):
        rep = check_admissibility(validated_square, 0.1)
        assert not rep.row("Thm3.5")["applicable"]
        assert rep.row("Thm3.10")["passed"]  # b = 0: every bound is slack
        assert rep.overall

    def test_larger_theta_shrinks_every_margin(self):
        vp = self._validated(0.5, flags={"c_w1inf": True, "rho_w1inf": True})
        flat = check_admissibility(vp, 0.0, creg=0.8)
        tilted = check_admissibility(vp, 0.3, creg=0.8)
        for name in CONDITION_NAMES:
            if name == "Thm3.5":
                continue  # the no-stratification bound does not see theta
            assert tilted.row(name)["margin"] < flat.row(name)["margin"], name

    def test_require_unknown_name(self):
        with pytest.raises(PreconditionViolated):
            check_admissibility(self._validated(0.5), 0.0,
                                require=["Thm9.9"])

    def test_require_creg_condition_without_creg(self):
        with pytest.raises(MissingCreg):
            check_admissibility(self._validated(0.5), 0.0,
                                require=["App-a"])

    def test_require_inapplicable_condition(self):
        with pytest.raises(PreconditionViolated):
            check_admissibility(self._validated(0.5), 0.0,
                                require=["App-c"])  # c_w1inf not set

    def test_require_satisfiable(self):
        rep = check_admissibility(self._validated(0.5), 0.0, creg=0.8,
                                  require=["App-a", "App-b"])
        assert rep.row("App-a")["passed"]

    def test_row_lookup_unknown_name(self):
        rep = check_admissibility(self._validated(0.5), 0.0)
        with pytest.raises(KeyError):
            rep.row("Thm0.0")

    def test_to_dict_round_trips_through_json(self):
        rep = check_admissibility(self._validated(0.5), 0.0, creg=0.8)
        d = json.loads(json.dumps(rep.to_dict()))
        assert d["creg_used"] == 0.8
        assert d["mach_inf"] == 0.25
        assert [r["name"] for r in d["conditions"]] == list(CONDITION_NAMES)
        assert d["overall"] is True
        assert d["satisfied"] == rep.satisfied
