import numpy as np
import pytest

from qglab.model import ModelParameters, spectral
from qglab.shared.exceptions import (
    ParameterException, IncompatibleFieldsException, ToleranceException,
)
from qglab.solutions import (
    ModeAtom, PlaneAtom, RadialAtom, HerglotzSpec, BoostSpec, BBMWaveSpec, CoupledShiftSpec, affine_stationary,
    herglotz_solution, background_flow, superpose, boost, kg_barotropic_mode, bbm_dispersion_roots, bbm_wave,
    coupled_shift_solution, coupled_shift_degenerate, coupled_eigen_modes, coupled_eigen_solution,
    linear_shear_solution, velocity_only_t_solution,
)
from qglab.verify import GridSpec, residual

E10 = 1e-10
PLANE_B = (-7.0 * E10, 4.0 * E10, -1.0 * E10)
HETON_B = (-10.0 * E10, -8.0 * E10, -5.0 * E10)
SUPER_B = (-8.0 * E10, 3.0 * E10, -2.0 * E10)


@pytest.fixture
def grid() -> GridSpec:
    return GridSpec.square(1.0e5, 17)


def assert_exact(model, field_, spec):
    report = residual(model, field_, spec, method="jet")
    assert report.passed, report.failure()
    return report


class TestBackgroundFlow:
    def test_plane_wave_case(self, model):
        np.testing.assert_allclose(background_flow(model, PLANE_B), [0.2757, 0.0633, -0.0817], atol=2e-4)

    def test_heton_case(self, model):
        np.testing.assert_allclose(background_flow(model, HETON_B), [0.0086, 0.0175, 0.0393], atol=1e-4)

    def test_superposition_case(self, model):
        np.testing.assert_allclose(background_flow(model, SUPER_B), [-0.2128, 0.0107, 0.4266], atol=2e-4)
        nu = spectral(model.F.shift(SUPER_B)).lambdas
        assert nu[2] == pytest.approx(2.668 * E10, rel=1e-3)


class TestHerglotz:
    def test_plane_wave_is_exact(self, model, grid):
        spec = HerglotzSpec(B=PLANE_B, plane_atoms=(PlaneAtom(mode=2, amplitude=1.0e4, angle=0.3),))
        field_ = herglotz_solution(model, spec)
        assert field_.tags["family"] == "herglotz"
        np.testing.assert_allclose(field_.background_flow, background_flow(model, PLANE_B))
        assert_exact(model, field_, grid)

    def test_eddy_center_value(self, model, grid):
        psi0 = 5.0e3
        spec = HerglotzSpec(B=SUPER_B, radial_atoms=(RadialAtom.uniform(2, psi0),))
        field_ = herglotz_solution(model, spec)
        shifted = spectral(model.F.shift(SUPER_B))
        center = field_.without_background().eval(0.0, 0.0, 0.0)
        np.testing.assert_allclose(center, psi0 * shifted.vector(2), rtol=1e-12)
        assert_exact(model, field_, grid)

    def test_rotated_radial_harmonic(self, model, grid):
        spec = HerglotzSpec(B=PLANE_B, radial_atoms=(RadialAtom(mode=2, amplitude=1.0e3 + 5.0e2j, order=2,
                                                                center=(2.0e4, -1.0e4)),),
                            plane_atoms=(PlaneAtom(mode=2, amplitude=2.0e3j, angle=1.1),))
        assert_exact(model, herglotz_solution(model, spec), grid)

    def test_rejects_negative_nu_mode(self, model):
        spec = HerglotzSpec(B=PLANE_B, plane_atoms=(PlaneAtom(mode=0, amplitude=1.0),))
        with pytest.raises(ParameterException):
            herglotz_solution(model, spec)

    def test_without_background_drops_shear(self, model):
        field_ = herglotz_solution(model, HerglotzSpec(B=PLANE_B))
        assert np.allclose(field_.without_background().eval(0.0, 1.0e4, 3.0e4), 0.0)
        np.testing.assert_allclose(field_.eval(0.0, 0.0, 1.0e4), -1.0e4 * background_flow(model, PLANE_B))

    def test_no_background_flag(self, model):
        field_ = herglotz_solution(model, HerglotzSpec(B=PLANE_B, include_background=False))
        assert np.allclose(field_.eval(0.0, 0.0, 1.0e4), 0.0)


class TestAffineStationary:
    def test_exponential_and_bessel_atoms(self, model, grid):
        atoms = [ModeAtom(mode=0, kind="exp", amplitude=10.0, angle=0.4),
                 ModeAtom(mode=1, kind="radial", bessel="I", order=1, amplitude=50.0),
                 ModeAtom(mode=2, kind="radial", bessel="J", order=3, amplitude=2.0e3),
                 ModeAtom(mode=2, kind="plane", amplitude=1.0e3, angle=-0.5)]
        assert_exact(model, affine_stationary(model, PLANE_B, atoms), grid)

    def test_singular_atoms_need_exclusion_radius(self, model):
        with pytest.raises(ParameterException):
            affine_stationary(model, PLANE_B, [ModeAtom(mode=2, kind="radial", bessel="Y")])
        field_ = affine_stationary(model, PLANE_B, [ModeAtom(mode=0, kind="radial", bessel="K", r_min=1.0e4,
                                                             amplitude=1.0e3)])
        assert not field_.domain.contains(0.0, np.array([0.0]), np.array([0.0]))[0]

    def test_atom_kind_must_match_sign(self, model):
        with pytest.raises(ParameterException):
            affine_stationary(model, PLANE_B, [ModeAtom(mode=0, kind="plane")])
        with pytest.raises(ParameterException):
            affine_stationary(model, PLANE_B, [ModeAtom(mode=2, kind="exp")])
        with pytest.raises(ParameterException):
            affine_stationary(model, PLANE_B, [ModeAtom(mode=2, kind="harmonic", order=2)])
        with pytest.raises(ParameterException):
            affine_stationary(model, PLANE_B, [ModeAtom(mode=2, kind="spiral")])

    def test_degenerate_shift(self, model, spectrum, grid):
        lam1 = float(spectrum.lambdas[0])
        atoms = [ModeAtom(mode=0, kind="harmonic", order=2, amplitude=1.0e-6),
                 ModeAtom(mode=2, kind="plane", amplitude=1.0e4)]
        field_ = affine_stationary(model, [lam1] * 3, atoms, sigma=(1.0e-2, 0.5), gamma=1.0e-8)
        assert field_.background_flow is None
        assert_exact(model, field_, grid)

    def test_sigma_requires_degenerate_shift(self, model):
        with pytest.raises(ParameterException):
            affine_stationary(model, PLANE_B, sigma=(1.0, 0.0))


class TestSuperposeAndBoost:
    def test_same_family_superposes(self, model, grid):
        a = herglotz_solution(model, HerglotzSpec(B=SUPER_B, radial_atoms=(RadialAtom.uniform(2, 4.0e3),)))
        b = herglotz_solution(model, HerglotzSpec(B=SUPER_B, radial_atoms=(
            RadialAtom.uniform(2, -4.0e3, center=(6.0e4, 0.0)),)))
        both = superpose([a, b])
        np.testing.assert_allclose(both.background_flow, background_flow(model, SUPER_B))
        point = (0.0, 1.0e4, 2.0e4)
        expected = a.eval(*point) + b.without_background().eval(*point)
        np.testing.assert_allclose(both.eval(*point), expected, rtol=1e-12)
        assert_exact(model, both, grid)

    def test_different_shifts_do_not_superpose(self, model):
        a = herglotz_solution(model, HerglotzSpec(B=SUPER_B))
        b = herglotz_solution(model, HerglotzSpec(B=PLANE_B))
        with pytest.raises(IncompatibleFieldsException):
            superpose([a, b])

    def test_nonlinear_family_does_not_superpose(self, model, spectrum):
        s = linear_shear_solution(model, spectrum.vector(0), spectrum.vector(1))
        with pytest.raises(IncompatibleFieldsException):
            superpose([s, s])

    def test_uniform_boost(self, model, grid):
        gamma = 0.3
        base = herglotz_solution(model, HerglotzSpec(B=PLANE_B, plane_atoms=(PlaneAtom(mode=2, amplitude=1.0e4),)))
        moved = boost(base, BoostSpec(gamma=gamma))
        t, x, y = 7200.0, 3.0e4, -2.0e4
        expected = base.eval(t, x - gamma * t, y) - gamma * y
        np.testing.assert_allclose(moved.eval(t, x, y), expected, rtol=1e-12)
        np.testing.assert_allclose(moved.background_flow, base.background_flow + gamma)
        assert_exact(model, moved, grid.at_time(t))

    def test_polynomial_boost_is_exact(self, model, grid):
        base = herglotz_solution(model, HerglotzSpec(B=PLANE_B, plane_atoms=(PlaneAtom(mode=2, amplitude=1.0e3),)))
        moved = boost(base, BoostSpec(h=(0.0, 0.1, 1.0e-6)))
        assert moved.background_flow is None
        assert_exact(model, moved, grid.at_time(1800.0))

    def test_zero_boost_is_identity(self, model):
        base = herglotz_solution(model, HerglotzSpec(B=PLANE_B, plane_atoms=(PlaneAtom(mode=2, amplitude=1.0e4),)))
        moved = boost(base, BoostSpec())
        np.testing.assert_allclose(moved.eval(0.0, 1.0e4, 2.0e4), base.eval(0.0, 1.0e4, 2.0e4))

    def test_boost_rejects_both_forms(self):
        with pytest.raises(ParameterException):
            BoostSpec(h=(0.0, 1.0), gamma=1.0).polynomial()


class TestWaves:
    def test_klein_gordon_mode(self, model, grid):
        field_ = kg_barotropic_mode(model, chi=0.5, k=2.0e-5, amplitude=1.0e3, phase=0.2)
        assert_exact(model, field_, grid.at_time(3600.0))
        with pytest.raises(ParameterException):
            kg_barotropic_mode(model, chi=0.0, k=0.0)

    def test_dispersion_single_root(self, spectrum):
        cubic = bbm_dispersion_roots(0.7, spectrum.lambdas[0], 1.2e-4, 4.0e-6, 1.6e-11)
        assert len(cubic.roots) == 1
        assert cubic.roots[0] == pytest.approx(0.033331, rel=1e-4)
        assert cubic.discriminant < 0

    def test_dispersion_second_mode(self, spectrum):
        cubic = bbm_dispersion_roots(0.7, spectrum.lambdas[1], 1.5e-4, 3.0e-6, 1.6e-11)
        assert max(cubic.roots, key=abs) == pytest.approx(0.019997, rel=1e-4)

    def test_dispersion_barotropic_mode(self):
        cubic = bbm_dispersion_roots(0.7, 0.0, 1.4e-4, 3.5e-6, 1.6e-11)
        assert len(cubic.roots) == 3
        assert cubic.discriminant > 0
        assert cubic.roots[0] == pytest.approx(0.0, abs=1e-15)
        assert cubic.roots[1] == pytest.approx(3.06e-6, rel=2e-2)
        assert cubic.roots[2] == pytest.approx(0.024997, rel=1e-4)

    def test_dispersion_rejects_negative_alpha(self):
        with pytest.raises(ParameterException):
            bbm_dispersion_roots(0.7, 0.0, -1.0, 1.0e-6, 1.6e-11)

    def test_bbm_wave_is_exact(self, model):
        small = GridSpec.square(500.0, 17, t=60.0)
        wave = bbm_wave(model, BBMWaveSpec(chi=0.7, mode=0, alpha=1.2e-4, delta=4.0e-6, amplitude=1.0, phase=0.3))
        assert wave.tags["r"] == pytest.approx(0.033331, rel=1e-4)
        assert_exact(model, wave, small)
        barotropic = bbm_wave(model, BBMWaveSpec(chi=0.7, mode=2, alpha=1.4e-4, delta=3.5e-6))
        assert barotropic.tags["r"] == pytest.approx(0.024997, rel=1e-4)
        assert_exact(model, barotropic, small)

    def test_bbm_wave_rejects_wrong_root(self, model):
        with pytest.raises(ToleranceException):
            bbm_wave(model, BBMWaveSpec(chi=0.7, mode=0, alpha=1.2e-4, delta=4.0e-6, root=0.03))


class TestCoupledFamilies:
    C = (0.1, 0.05, -0.02)

    def test_matrix_exponential_family(self, model):
        spec = CoupledShiftSpec(c=self.C, mu=1.0e-5, chi=0.5, A=(1.0e3, -5.0e2j, 2.0e2))
        field_ = coupled_shift_solution(model, spec)
        np.testing.assert_allclose(field_.background_flow, -np.asarray(self.C))
        assert_exact(model, field_, GridSpec.square(5.0e4, 17, t=1800.0))

    def test_rejects_barotropic_shear(self, model):
        with pytest.raises(ParameterException):
            coupled_shift_solution(model, CoupledShiftSpec(c=(0.1, 0.1, 0.1), mu=1.0e-5, chi=0.0, A=(1.0, 0.0, 0.0)))

    def test_singular_shift_needs_degenerate_form(self, model):
        spec = CoupledShiftSpec(c=self.C, mu=0.0, chi=0.0, A=(1.0, 2.0, 3.0))
        with pytest.raises(ParameterException):
            coupled_shift_solution(model, spec)
        field_ = coupled_shift_degenerate(model, spec, gauge=(0.0, 1.0e-3))
        assert field_.tags["mode"] == 2
        # μ = 0 时 q_t = g′F e_i 只剩舍入噪声
        grid = GridSpec.square(5.0e4, 17, t=600.0)
        assert assert_exact(model, field_, grid).exact
        report = residual(model, field_, grid, levels=3)
        assert report.passed, report.failure()
        assert report.exact

    def test_degenerate_form_requires_singular_shift(self, model):
        spec = CoupledShiftSpec(c=self.C, mu=1.0e-5, chi=0.5, A=(1.0, 0.0, 0.0))
        with pytest.raises(ParameterException):
            coupled_shift_degenerate(model, spec)

    def test_eigen_form(self, model):
        modes = coupled_eigen_modes(model, self.C, chi=0.3, mu=1.0e-6j)
        assert len(modes) == 9
        idx = min(range(len(modes)), key=lambda i: abs(modes[i].kappa.real))
        field_ = coupled_eigen_solution(model, self.C, chi=0.3, mu=1.0e-6j, nu=0.0, amplitudes={idx: 1.0e2})
        assert_exact(model, field_, GridSpec.square(2.0e4, 17, t=300.0))


class TestAffineInSpace:
    def test_linear_shear_family(self, model, spectrum):
        field_ = linear_shear_solution(model, 0.2 * spectrum.vector(0), 0.1 * spectrum.vector(1),
                                       chi=(0.0, 1.0e-5, 1.0e-10), g=(0.0, 1.0))
        for t in (0.0, 3600.0):
            assert_exact(model, field_, GridSpec.square(5.0e4, 17, t=t))

    def test_linear_shear_rejects_barotropic_component(self, model, spectrum):
        with pytest.raises(ParameterException):
            linear_shear_solution(model, np.ones(3), spectrum.vector(1))

    def test_velocity_only_in_time(self, model, spectrum):
        field_ = velocity_only_t_solution(model, 0.1 * spectrum.vector(1), (0.3, -0.1, 0.2), zeta=(0.0, 0.5),
                                          g=(1.0, 2.0), shift=(1.0, 2.0, 3.0))
        assert_exact(model, field_, GridSpec.square(5.0e4, 17, t=1200.0))
        with pytest.raises(ParameterException):
            velocity_only_t_solution(model, np.ones(3), (0.0, 0.0, 0.0))


def test_other_model_breaks_exactness(model, grid):
    field_ = herglotz_solution(model, HerglotzSpec(B=PLANE_B, plane_atoms=(PlaneAtom(mode=2, amplitude=1.0e4),)))
    wrong = ModelParameters(F=model.F, beta=model.beta * 1.01)
    assert not residual(wrong, field_, grid, method="jet").passed
