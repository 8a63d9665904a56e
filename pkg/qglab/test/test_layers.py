import numpy as np
import pytest
from numpy.polynomial import Polynomial

from qglab.model import (
    LayerStack, CouplingMatrix, ModelParameters, build_coupling, symmetrize, spectral, uniform_spectrum,
    pseudo_inverse, weighted_inner, char_poly, gershgorin_bound, moore_penrose_check,
)
from qglab.shared.exceptions import ParameterException, NumericalException

E10 = 1e-10


def _random_stack(rng, m: int) -> LayerStack:
    return LayerStack(H=rng.uniform(100.0, 3000.0, m), gprime=rng.uniform(0.005, 0.05, m - 1), f0=1e-4,
                      beta=1.6e-11)


class TestBuildCoupling:
    def test_reference_values(self, model):
        F = model.F
        assert F.sup[0] == pytest.approx(8.3333e-10, rel=1e-4)
        assert F.sub[0] == pytest.approx(3.5714e-10, rel=1e-4)
        assert F.sup[1] == pytest.approx(2.3810e-10, rel=1e-4)
        assert F.sub[1] == pytest.approx(1.6667e-10, rel=1e-4)

    def test_unit_two_layer(self):
        F = build_coupling(LayerStack(H=[1.0, 1.0], gprime=[1.0], f0=1.0, beta=1.0))
        assert F.sub.tolist() == [1.0]
        assert F.sup.tolist() == [1.0]
        assert F.diag.tolist() == [-1.0, -1.0]

    def test_row_sums_vanish(self, rng):
        for m in range(2, 9):
            F = build_coupling(_random_stack(rng, m))
            assert np.max(np.abs(F.dense() @ np.ones(m))) <= 1e-14 * F.scale

    def test_thickness_identity(self, stack, model):
        F = model.F
        np.testing.assert_allclose(stack.H[:-1] * F.sup, stack.H[1:] * F.sub, rtol=1e-15)

    def test_rejects_invalid_stacks(self):
        with pytest.raises(ParameterException):
            LayerStack(H=[100.0], gprime=[], f0=1e-4, beta=1e-11)
        with pytest.raises(ParameterException):
            LayerStack(H=[100.0, 200.0], gprime=[0.01, 0.02], f0=1e-4, beta=1e-11)
        with pytest.raises(ParameterException):
            LayerStack(H=[100.0, -200.0], gprime=[0.01], f0=1e-4, beta=1e-11)
        with pytest.raises(ParameterException):
            LayerStack(H=[100.0, 200.0], gprime=[0.01], f0=1e-4, beta=0.0)

    def test_from_dict_checks_layer_count(self):
        with pytest.raises(ParameterException):
            LayerStack.from_dict({"m": 4, "H": [1.0, 2.0, 3.0], "gprime": [0.1, 0.1], "f0": 1.0, "beta": 1.0})

    def test_json_file(self, tmp_path, stack):
        path = tmp_path / "stack.json"
        stack.to_json(path)
        loaded = LayerStack.from_json(path)
        assert loaded.to_dict() == stack.to_dict()

    def test_dimensional_weights(self, stack):
        np.testing.assert_allclose(stack.dimensional_weights(), [1.0, 1400.0 / 600.0, 2000.0 / 600.0])


class TestSymmetrize:
    def test_reference_scaling(self, model):
        d, S = symmetrize(model.F)
        np.testing.assert_allclose(d, [1.0, 0.65465, 0.54772], atol=5e-5)
        D = np.diag(d)
        sym = np.linalg.inv(D) @ model.F.dense() @ D
        assert np.linalg.norm(sym - S.dense()) <= 1e-12 * np.linalg.norm(S.dense())

    def test_symmetric_input_unchanged(self):
        F = CouplingMatrix.from_offdiagonals([1.0, 2.0], [1.0, 2.0])
        d, S = symmetrize(F)
        np.testing.assert_allclose(d, 1.0)
        np.testing.assert_allclose(S.dense(), F.dense())

    def test_random_tridiagonal(self, rng):
        T = CouplingMatrix(sub=rng.uniform(0.1, 2.0, 4), sup=rng.uniform(0.1, 2.0, 4), diag=rng.normal(size=5))
        d, S = symmetrize(T)
        D = np.diag(d)
        sym = np.linalg.inv(D) @ T.dense() @ D
        assert np.linalg.norm(sym - S.dense()) / np.linalg.norm(S.dense()) < 1e-12

    def test_rejects_zero_coupling(self):
        T = CouplingMatrix(sub=np.array([0.0]), sup=np.array([1.0]), diag=np.array([-1.0, 0.0]))
        with pytest.raises(ParameterException):
            symmetrize(T)


class TestSpectral:
    def test_reference_eigenvalues(self, spectrum):
        np.testing.assert_allclose(spectrum.lambdas[:2], [-12.868 * E10, -3.083 * E10], rtol=1e-3)
        assert spectrum.lambdas[2] == 0.0
        assert spectrum.physical

    def test_reference_eigenvectors(self, spectrum):
        e1 = spectrum.vector(0)
        assert e1[0] > 0
        assert e1[1] / e1[0] == pytest.approx(-0.544, abs=2e-3)
        assert e1[2] / e1[0] == pytest.approx(0.081, abs=2e-3)
        np.testing.assert_array_equal(spectrum.vector(2), np.ones(3))
        assert spectrum.norm(e1) == pytest.approx(1.0, rel=1e-12)

    def test_w_orthogonality(self, spectrum):
        for i in range(3):
            for j in range(i + 1, 3):
                u, v = spectrum.vector(i), spectrum.vector(j)
                assert abs(spectrum.inner(u, v)) <= 1e-10 * spectrum.norm(u) * spectrum.norm(v)

    def test_weights(self, spectrum):
        np.testing.assert_allclose(spectrum.weights, [1.0, 2.3333, 3.3333], rtol=1e-4)
        b, c = np.array([1.0, 2.0, 3.0]), np.array([0.5, -1.0, 2.0])
        expected = b[0] * c[0] + (7.0 / 3.0) * b[1] * c[1] + (10.0 / 3.0) * b[2] * c[2]
        assert weighted_inner(b, c, spectrum) == pytest.approx(expected, rel=1e-12)

    def test_shifted_plane_wave_spectrum(self, model):
        shifted = spectral(model.F.shift(np.array([-7.0, 4.0, -1.0]) * E10))
        np.testing.assert_allclose(shifted.lambdas, np.array([-12.859, -0.759, 1.668]) * E10, rtol=2e-3)
        assert not shifted.physical

    def test_uniform_layers_match_closed_form(self):
        F = build_coupling(LayerStack(H=[500.0] * 4, gprime=[0.02] * 3, f0=1e-4, beta=1.6e-11))
        f12 = F.sup[0]
        spec = spectral(F)
        lambdas, vectors = uniform_spectrum(4, f12)
        np.testing.assert_allclose(spec.lambdas, np.sort(lambdas), rtol=1e-10, atol=1e-10 * f12)
        order = np.argsort(lambdas)
        for k, i in enumerate(order):
            ours = spec.vector(k) / spec.vector(k)[0]
            ref = vectors[:, i] / vectors[0, i]
            np.testing.assert_allclose(ours, ref, rtol=1e-9, atol=1e-9)

    def test_rejects_non_positive_couplings(self):
        T = CouplingMatrix(sub=np.array([-1.0]), sup=np.array([1.0]), diag=np.array([0.0, 0.0]))
        with pytest.raises(ParameterException):
            spectral(T)

    def test_rejects_degenerate_spectrum(self):
        T = CouplingMatrix(sub=np.array([1e-20]), sup=np.array([1e-20]), diag=np.array([1.0, 1.0]))
        with pytest.raises(NumericalException):
            spectral(T)

    def test_to_csv(self, tmp_path, spectrum):
        path = tmp_path / "spectrum.csv"
        spectrum.to_csv(path)
        lines = path.read_text(encoding="utf-8").strip().splitlines()
        assert lines[0] == "lambda,e_1,e_2,e_3"
        assert len(lines) == 4


class TestUniformSpectrum:
    def test_two_layers(self):
        lambdas, vectors = uniform_spectrum(2, 1.0)
        np.testing.assert_allclose(lambdas, [-2.0, 0.0], atol=1e-15)

    def test_three_layers(self):
        lambdas, vectors = uniform_spectrum(3, 1.0)
        np.testing.assert_allclose(lambdas, [-3.0, -1.0, 0.0], atol=1e-14)
        np.testing.assert_allclose(vectors[:, 2], 1.0)

    def test_rejects_bad_input(self):
        with pytest.raises(ParameterException):
            uniform_spectrum(1, 1.0)


class TestPseudoInverse:
    def test_annihilates_barotropic_mode(self, spectrum):
        assert np.max(np.abs(spectrum.pinv @ np.ones(3))) <= 1e-10 * np.max(np.abs(spectrum.pinv))

    def test_penrose_identity(self, model, spectrum):
        F = model.F.dense()
        P = pseudo_inverse(spectrum)
        assert np.linalg.norm(F @ P @ F - F) <= 1e-10 * np.linalg.norm(F)
        assert np.linalg.norm(P @ F @ P - P) <= 1e-10 * np.linalg.norm(P)

    def test_invertible_shift(self, model):
        T = model.F.shift(np.array([-7.0, 4.0, -1.0]) * E10)
        spec = spectral(T)
        exact = np.linalg.inv(T.dense())
        np.testing.assert_allclose(spec.pinv, exact, rtol=1e-10, atol=1e-10 * np.max(np.abs(exact)))

    def test_moore_penrose_check(self, model, spectrum):
        residuals = moore_penrose_check(model.F, spectrum.pinv, spectrum.weights)
        assert set(residuals) == {"A_P_A", "P_A_P", "AP_selfadjoint", "PA_selfadjoint"}
        assert max(residuals.values()) <= 1e-10


class TestCharPoly:
    def test_two_layer_by_hand(self):
        coef = char_poly(CouplingMatrix.from_offdiagonals([1.0], [1.0]))
        np.testing.assert_allclose(coef, [0.0, 2.0, 1.0], atol=1e-14)

    def test_roots_match_spectrum(self, model, spectrum):
        roots = np.sort(Polynomial(char_poly(model.F)).roots().real)
        np.testing.assert_allclose(roots, spectrum.lambdas, rtol=1e-8, atol=1e-8 * abs(spectrum.lambdas[0]))

    def test_sign_pattern_random_stacks(self, rng):
        for _ in range(200):
            m = int(rng.integers(2, 9))
            coef = char_poly(build_coupling(_random_stack(rng, m)))
            assert coef[0] == 0.0
            assert np.all(coef[1:] > 0)


class TestGershgorin:
    def test_uniform(self):
        F = CouplingMatrix.from_offdiagonals([1.0, 1.0], [1.0, 1.0])
        assert gershgorin_bound(F) == pytest.approx(4.0)
        assert abs(spectral(F).lambdas[0]) == pytest.approx(3.0)

    def test_reference_bounds(self, model, spectrum):
        R = gershgorin_bound(model.F)
        lam1 = spectrum.lambdas[0]
        row = np.concatenate([[0.0], model.F.sub]) + np.concatenate([model.F.sup, [0.0]])
        assert -R <= lam1 < -np.max(row)


class TestModelParameters:
    def test_signature_and_dict(self, model):
        assert model.m == 3
        assert model.signature()[-1] == 1.6e-11
        assert model.to_dict()["beta"] == 1.6e-11

    def test_rejects_non_positive_beta(self, model):
        with pytest.raises(ParameterException):
            ModelParameters(F=model.F, beta=-1.0)
