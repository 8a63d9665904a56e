import numpy as np
import pytest

from qglab.model import ModelParameters
from qglab.shared.exceptions import ParameterException, ToleranceException
from qglab.solutions import HerglotzSpec, PlaneAtom, RadialAtom, PolyTerm, herglotz_solution
from qglab.symmetry import (
    EquivalenceTransform, PointSymmetry, time_shift, x_shift, y_shift, layer_shift, gauge_shift, involution_tx,
    involution_ypsi, scaling, apply_equivalence, apply_point_symmetry, P_t, P_x, P_y, J, Z, bracket,
    commutator_check, characteristic, infinitesimal_check,
)
from qglab.verify import GridSpec, residual

E10 = 1e-10
PLANE_B = (-7.0 * E10, 4.0 * E10, -1.0 * E10)
SUPER_B = (-8.0 * E10, 3.0 * E10, -2.0 * E10)


@pytest.fixture
def wave(model):
    return herglotz_solution(model, HerglotzSpec(B=PLANE_B, plane_atoms=(PlaneAtom(mode=2, amplitude=1.0e4,
                                                                                   angle=0.7),)))


@pytest.fixture
def eddy(model):
    return herglotz_solution(model, HerglotzSpec(B=SUPER_B, radial_atoms=(RadialAtom.uniform(2, 4.0e3),)))


def _points(rng, n=5):
    return (rng.uniform(-1e3, 1e3, n), rng.uniform(-1e5, 1e5, n), rng.uniform(-1e5, 1e5, n),
            rng.normal(size=(n, 3)) * 1e3)


class TestBrackets:
    def test_nonzero_brackets(self):
        c = bracket(P_t(), P_x([0.0, 0.0, 1.0]))
        assert c.to_dict() == {"kind": "Px", "payload": [0.0, 2.0]}
        assert bracket(P_x([0.0, 1.0]), P_y()).to_dict() == {"kind": "Z", "payload": [1.0]}
        assert bracket(P_y(), P_x([0.0, 1.0])).to_dict() == {"kind": "Z", "payload": [-1.0]}
        assert bracket(Z([0.0, 0.0, 3.0]), P_t()).to_dict() == {"kind": "Z", "payload": [-0.0, -6.0]}

    def test_vanishing_brackets(self):
        assert bracket(P_x(1.0), P_y()) is None
        assert bracket(J(3, 1), Z(1.0)) is None
        assert bracket(P_t(), P_y()) is None
        assert bracket(P_x([0.0, 1.0]), P_x([0.0, 0.0, 1.0])) is None

    def test_layer_generator_checks_index(self):
        with pytest.raises(ParameterException):
            J(3, 3)


class TestCommutators:
    def test_time_and_polynomial_shift(self, rng):
        t, x, y, psi = _points(rng)
        defects = [commutator_check(P_t(), P_x([0.0, 0.0, 1.0]), eps, t, x, y, psi)["defect"]
                   for eps in (1e-2, 5e-3)]
        assert defects[0] == pytest.approx(1e-6, rel=1e-3)
        assert defects[0] / defects[1] == pytest.approx(8.0, rel=1e-2)

    def test_shift_and_translation_close_exactly(self, rng):
        t, x, y, psi = _points(rng)
        out = commutator_check(P_x([0.0, 1.0]), P_y(), 1e-3, t, x, y, psi)
        assert out["bracket"] == {"kind": "Z", "payload": [1.0]}
        assert out["defect"] <= 1e-10

    def test_commuting_pair(self, rng):
        t, x, y, psi = _points(rng)
        out = commutator_check(J(3, 0), Z([1.0, 2.0]), 0.5, t, x, y, psi)
        assert out["bracket"] is None
        assert out["defect"] <= 1e-10


class TestTransformAlgebra:
    E = EquivalenceTransform(T1=2.0, X1=0.5, eps=-1, T0=3.0, Y0=1.0, h=[0.0, 1.0, 0.5], g=[1.0, 2.0],
                             Psi=(1.0, 2.0, 3.0))
    G = EquivalenceTransform(T1=0.5, X1=3.0, eps=1, T0=-1.0, Y0=2.0, h=[1.0, 0.0, 0.25], g=[0.0, 0.0, 1.0])

    def test_composition_matches_sequence(self, rng):
        p = _points(rng)
        step = self.G.apply_point(*self.E.apply_point(*p))
        both = self.E.then(self.G).apply_point(*p)
        for a, b in zip(step, both):
            np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-8)

    def test_inverse(self, rng):
        p = _points(rng)
        back = self.E.then(self.E.inverse()).apply_point(*p)
        for a, b in zip(back, p):
            np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-8)

    def test_point_symmetry_group(self, rng):
        s = involution_tx().then(x_shift([0.0, 0.3])).then(y_shift(5.0))
        p = _points(rng)
        back = s.then(s.inverse()).apply_point(*p)
        for a, b in zip(back, p):
            np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-8)

    def test_involutions(self, rng):
        p = _points(rng)
        for s in (involution_tx(), involution_ypsi()):
            twice = s.then(s)
            assert twice.eps1 == 1 and twice.eps2 == 1
            np.testing.assert_allclose(s.apply_point(*s.apply_point(*p))[3], p[3])

    def test_parameter_map(self, model):
        new = scaling(2.0, 0.5).map_parameters(model)
        assert new.beta == pytest.approx(model.beta)
        np.testing.assert_allclose(new.F.sup, model.F.sup * 4.0)
        with pytest.raises(ParameterException):
            scaling(-1.0, 1.0).map_parameters(model)

    def test_invalid_parameters(self):
        with pytest.raises(ParameterException):
            EquivalenceTransform(T1=0.0)
        with pytest.raises(ParameterException):
            PointSymmetry(eps1=2)
        with pytest.raises(ParameterException):
            x_shift([0.0] * 8 + [1.0])
        with pytest.raises(ParameterException):
            layer_shift(3, 4, 1.0)

    def test_only_unit_scalings_are_point_symmetries(self):
        with pytest.raises(ParameterException):
            PointSymmetry.from_equivalence(scaling(2.0, 2.0))


class TestTransformedSolutions:
    def test_identity_returns_same_field(self, wave):
        assert apply_point_symmetry(wave, PointSymmetry()) is wave

    def test_point_symmetries_keep_exactness(self, model, wave):
        grid = GridSpec.square(1.0e5, 17, t=1800.0)
        for s in (time_shift(600.0), x_shift([0.0, 0.2, 1.0e-5]), y_shift(3.0e4), layer_shift(3, 1, 50.0),
                  gauge_shift([1.0, 0.01]), involution_tx(), involution_ypsi(),
                  involution_tx().then(x_shift([0.0, 0.1])).then(layer_shift(3, 0, -20.0))):
            moved = apply_point_symmetry(wave, s)
            assert moved.tags["superposable"] is False
            report = residual(model, moved, grid, method="jet")
            assert report.passed, (s.to_dict(), report.failure())

    def test_point_values(self, wave):
        s = x_shift([0.0, 0.2])
        moved = apply_point_symmetry(wave, s)
        t, x, y = 100.0, 1.0e4, -2.0e4
        np.testing.assert_allclose(moved.eval(t, x + 0.2 * t, y), wave.eval(t, x, y) - 0.2 * y, rtol=1e-12)

    def test_equivalence_maps_model_and_field(self, model, eddy):
        e = EquivalenceTransform(T1=2.0, X1=0.5, eps=-1, T0=100.0, Y0=1.0e3, h=[0.0, 0.1], g=[0.0, 1.0])
        new_model, moved = apply_equivalence(model, eddy, e)
        assert new_model.beta == pytest.approx(model.beta)
        np.testing.assert_allclose(new_model.F.dense(), model.F.dense() * 4.0)
        assert residual(new_model, moved, GridSpec.square(5.0e4, 17, t=300.0), method="jet").passed
        assert not residual(model, moved, GridSpec.square(5.0e4, 17, t=300.0), method="jet").passed


class TestInfinitesimal:
    def test_trivial_generators_are_exact(self, model, eddy, eddy_grid):
        for gen in (J(3, 1), Z([0.0, 1.0]), P_t()):
            report = infinitesimal_check(model, eddy, gen, eddy_grid)
            assert report.exact, report.direction

    def test_translation_stays_in_affine_family(self, model, eddy, eddy_grid):
        # ψ − εψ_y 仍满足 q = Bψ + 常数，扰动后仍是精确解
        for gen in (P_y(), P_x(1.0)):
            report = infinitesimal_check(model, eddy, gen, eddy_grid)
            assert report.exact, report.defects
            assert report.order == float("inf")

    def test_boost_is_second_order(self, model, eddy):
        # Q = −y1̄ − tψ_x，二次项 J(Q, (Δ+F)Q) = −t·Bψ_xx 不为零
        grid = GridSpec.square(2.0e5, 33, t=1.0e6)
        report = infinitesimal_check(model, eddy, P_x([0.0, 1.0]), grid)
        assert not report.exact
        assert 1.8 < report.order < 2.2

    def test_arbitrary_direction_is_first_order(self, model, eddy, eddy_grid):
        report = infinitesimal_check(model, eddy, PolyTerm.monomial(0, 2, 0, [1.0, 0.0, 0.0]), eddy_grid)
        assert report.order == pytest.approx(1.0, abs=0.05)

    def test_characteristic_of_translation(self, eddy):
        x, y = np.array([1.0e4, -3.0e4]), np.array([2.0e4, 5.0e3])
        jet = eddy.jet(0.0, x, y, 1)
        np.testing.assert_allclose(characteristic(P_y(), eddy, 0.0, x, y), -jet[(0, 0, 1)])

    def test_requires_exact_base(self, model, eddy, eddy_grid):
        wrong = ModelParameters(F=model.F, beta=model.beta * 1.01)
        with pytest.raises(ToleranceException):
            infinitesimal_check(wrong, eddy, P_y(), eddy_grid)

    def test_requires_wide_eps_range(self, model, eddy, eddy_grid):
        with pytest.raises(ParameterException):
            infinitesimal_check(model, eddy, P_y(), eddy_grid, eps_factors=(1e-2, 5e-3))
