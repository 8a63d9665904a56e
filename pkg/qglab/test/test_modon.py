import numpy as np
import pytest

from qglab.model import spectral
from qglab.shared.exceptions import ParameterException, RootNotFoundException, ToleranceException
from qglab.solutions import (
    ModonSpec, modon_from_matrices, lr_barotropic_solve, shared_basis_solve, modon_newton, assemble_modon,
)
from qglab.solutions.modon import MATCH_RTOL, relative_matching_residual, shared_basis_equation, modon_summary
from qglab.verify import interface_check

E9 = 1e-9


def _trace_identity(model, spec: ModonSpec, nus):
    assert sum(spec.inner.B) == pytest.approx(float(np.sum(model.F.diag)) - float(np.sum(nus)), rel=1e-10)


class TestBarotropicModon:
    def test_radius_from_both_rhos(self, model):
        spec = lr_barotropic_solve(model, rho_tilde=1.5e-9, rho_hat=3.0e-10)
        assert spec.r0 == pytest.approx(104428.31, rel=1e-4)
        assert spec.barotropic
        assert spec.inner.alphas[2] == pytest.approx(-34727.0, rel=2e-3)
        assert spec.outer.alphas[2] == pytest.approx(-79682.0, rel=2e-3)
        assert spec.inner.alphas[:2] == [0.0, 0.0]
        assert relative_matching_residual(model, spec) <= MATCH_RTOL

    def test_outer_rho_from_radius(self, model):
        spec = lr_barotropic_solve(model, r0=1.25e5, rho_tilde=1.3e-9)
        assert spec.rho_hat == pytest.approx(2.3876e-9, rel=1e-3)
        assert spec.inner.alphas[2] == pytest.approx(-17054.0, rel=2e-3)
        assert spec.outer.alphas[2] == pytest.approx(-1.8105e6, rel=2e-3)

    def test_inner_rho_from_radius(self, model):
        spec = lr_barotropic_solve(model, r0=104428.31, rho_hat=3.0e-10)
        assert spec.rho_tilde == pytest.approx(1.5e-9, rel=1e-4)

    def test_flows(self, model):
        spec = lr_barotropic_solve(model, rho_tilde=1.5e-9, rho_hat=3.0e-10)
        np.testing.assert_allclose(spec.inner.flow, model.beta / 1.5e-9, rtol=1e-10)
        np.testing.assert_allclose(spec.outer.flow, -model.beta / 3.0e-10, rtol=1e-10)

    def test_parameter_checks(self, model):
        with pytest.raises(ParameterException):
            lr_barotropic_solve(model, r0=1.0e5)
        with pytest.raises(ParameterException):
            lr_barotropic_solve(model, r0=1.0e5, rho_tilde=1.5e-9, rho_hat=3.0e-10)
        with pytest.raises(ParameterException):
            lr_barotropic_solve(model, rho_tilde=1.0e-10, rho_hat=3.0e-10)
        with pytest.raises(ParameterException):
            lr_barotropic_solve(model, rho_tilde=1.5e-9, rho_hat=-1.0)

    def test_assembled_interface(self, model):
        spec = lr_barotropic_solve(model, rho_tilde=1.5e-9, rho_hat=3.0e-10)
        report = interface_check(assemble_modon(model, spec))
        assert report.passed
        assert max(report.layer_spread) <= 1e-8 * report.peak


class TestSharedBasisModon:
    def test_case_a(self, model):
        spec = shared_basis_solve(model, 1.7e5, 4.5 * E9, assignment=(0, 2, 1))
        nus = np.array([7.68155e-10, 2.04225e-9, 3.79363e-9])
        np.testing.assert_allclose(spec.inner.eigenvalues, nus, rtol=1e-4)
        np.testing.assert_allclose(spec.inner.B, np.array([-1.70519, -4.26407, -2.23001]) * E9, rtol=1e-4)
        np.testing.assert_allclose(np.asarray(spec.outer.B) - np.asarray(spec.inner.B), 4.5 * E9, rtol=1e-12)
        _trace_identity(model, spec, spec.inner.eigenvalues)
        assert relative_matching_residual(model, spec) <= MATCH_RTOL

    def test_case_b_uses_smallest_roots(self, model):
        spec = shared_basis_solve(model, 1.5e5, 8.0 * E9, assignment=(1, 0, 2))
        np.testing.assert_allclose(spec.inner.eigenvalues, np.array([1.01255, 2.70354, 5.09011]) * E9, rtol=1e-4)
        np.testing.assert_allclose(spec.inner.B, np.array([-3.33826, -1.81697, -5.24620]) * E9, rtol=1e-4)
        _trace_identity(model, spec, spec.inner.eigenvalues)

    def test_roots_solve_scalar_equation(self, model):
        spec = shared_basis_solve(model, 1.7e5, 4.5 * E9, assignment=(0, 2, 1))
        values = shared_basis_equation(np.asarray(spec.inner.eigenvalues), 1.7e5, 4.5 * E9)
        assert np.max(np.abs(values)) <= 1e-6

    def test_any_assignment_reproduces_spectrum(self, model):
        spec = shared_basis_solve(model, 1.7e5, 4.5 * E9)
        shifted = spectral(model.F.shift(spec.inner.B))
        np.testing.assert_allclose(shifted.lambdas, [7.68155e-10, 2.04225e-9, 3.79363e-9], rtol=1e-4)

    def test_outer_eigenvalues_are_shifted(self, model):
        spec = shared_basis_solve(model, 1.7e5, 4.5 * E9, assignment=(0, 2, 1))
        np.testing.assert_allclose(spec.outer.eigenvalues, np.asarray(spec.inner.eigenvalues) - 4.5 * E9,
                                   rtol=1e-8)

    def test_no_roots(self, model):
        with pytest.raises(RootNotFoundException):
            shared_basis_solve(model, 1.0e4, 1.0e-10)

    def test_bad_assignment(self, model):
        with pytest.raises(ParameterException):
            shared_basis_solve(model, 1.7e5, 4.5 * E9, assignment=(0, 0, 1))

    def test_assembled_interface(self, model):
        spec = shared_basis_solve(model, 1.7e5, 4.5 * E9, assignment=(0, 2, 1))
        modon = assemble_modon(model, spec)
        report = interface_check(modon)
        assert report.passed
        assert modon.tags["superposable"] is False


class TestMatching:
    def test_inner_side_must_oscillate(self, model):
        with pytest.raises(ParameterException):
            modon_from_matrices(model, 1.0e5, [1.0e-9] * 3, [3.0e-10] * 3)
        with pytest.raises(ParameterException):
            modon_from_matrices(model, -1.0, [-1.5e-9] * 3, [3.0e-10] * 3)

    def test_unmatched_matrices_are_rejected(self, model):
        spec = modon_from_matrices(model, 1.0e5, [-1.5e-9] * 3, [3.0e-10] * 3)
        assert relative_matching_residual(model, spec) > MATCH_RTOL
        with pytest.raises(ToleranceException):
            assemble_modon(model, spec)

    def test_newton_recovers_perturbed_modon(self, model):
        exact = lr_barotropic_solve(model, rho_tilde=1.5e-9, rho_hat=3.0e-10)
        start = modon_from_matrices(model, exact.r0 * 1.001, exact.inner.B, exact.outer.B)
        solved = modon_newton(model, start, ["Btilde[0]", "Btilde[1]", "Btilde[2]"])
        assert relative_matching_residual(model, solved) <= MATCH_RTOL
        assert solved.r0 == start.r0
        assert solved.outer.B == start.outer.B

    def test_newton_rejects_bad_unknowns(self, model):
        exact = lr_barotropic_solve(model, rho_tilde=1.5e-9, rho_hat=3.0e-10)
        with pytest.raises(ParameterException):
            modon_newton(model, exact, ["r0", "Btilde[0]"])
        with pytest.raises(ParameterException):
            modon_newton(model, exact, ["r0", "r0", "Bhat[0]"])
        with pytest.raises(ParameterException):
            modon_newton(model, exact, ["r0", "Bhat[0]", "gamma"])

    def test_json_file(self, tmp_path, model):
        spec = shared_basis_solve(model, 1.7e5, 4.5 * E9, assignment=(0, 2, 1))
        path = tmp_path / "modon.json"
        spec.to_json(path)
        loaded = ModonSpec.from_json(path)
        assert loaded.model_dump() == spec.model_dump()

    def test_summary(self, model):
        spec = lr_barotropic_solve(model, rho_tilde=1.5e-9, rho_hat=3.0e-10)
        summary = modon_summary(model, spec)
        assert summary["rho_tilde"] == 1.5e-9
        assert summary["matching_residual"] <= MATCH_RTOL
