import numpy as np
import pytest

from qglab.model import ModelParameters, CouplingMatrix
from qglab.shared.exceptions import ParameterException, NumericalException
from qglab.solutions import HerglotzSpec, RadialAtom, herglotz_solution, kg_barotropic_mode, lr_barotropic_solve
from qglab.solutions import assemble_modon, linear_shear_solution
from qglab.verify import GridSpec, GridField, sample_field, residual, conserved, potential_vorticity
from qglab.verify.residual import BAND_CELLS, fd_derivative, potential_vorticity_grid

E10 = 1e-10
SUPER_B = (-8.0 * E10, 3.0 * E10, -2.0 * E10)


@pytest.fixture
def eddy(model):
    return herglotz_solution(model, HerglotzSpec(B=SUPER_B, radial_atoms=(RadialAtom.uniform(2, 1.0e4),)))


@pytest.fixture
def fd_grid() -> GridSpec:
    return GridSpec.square(1.5e5, 33)


class TestResidual:
    def test_exact_eddy_converges(self, model, eddy, fd_grid):
        report = residual(model, eddy, fd_grid, levels=3)
        assert report.passed, report.failure()
        assert report.fitted_order >= 3.5
        assert len(report.grids) == 3
        assert report.grids[0] == pytest.approx(2 * report.grids[1])
        assert report.excluded_band is None

    def test_wrong_beta_plateaus(self, model, eddy, fd_grid):
        wrong = ModelParameters(F=model.F, beta=model.beta * 1.01)
        report = residual(wrong, eddy, fd_grid, levels=3)
        assert not report.passed
        assert report.fitted_order < 1.0
        assert "残差平台" in report.failure()

    def test_jet_method(self, model, eddy, fd_grid):
        report = residual(model, eddy, fd_grid, method="jet")
        assert report.passed
        assert report.max_norm <= 1e-12
        assert report.failure() is None
        wrong = ModelParameters(F=model.F, beta=model.beta * 1.01)
        failed = residual(wrong, eddy, fd_grid, method="jet")
        assert not failed.passed
        assert failed.max_norm > 1e-9

    def test_pure_barotropic_shear_is_exact(self, model, fd_grid):
        # b = c = 0 且 χ 线性：ψ = (t − y²/2)1̄，各项都只剩舍入噪声
        shear = linear_shear_solution(model, (0.0, 0.0, 0.0), (0.0, 0.0, 0.0), chi=(0.0, 1.0), g=(0.0, 1.0))
        for method in ("fd", "jet"):
            report = residual(model, shear, fd_grid, method=method)
            assert report.passed, report.failure()
            assert report.exact
            assert report.max_norm <= max(report.floor, report.rounding)
            assert report.scale > 0
        assert residual(model, shear, fd_grid).fitted_order == float("inf")

    def test_rounding_bound_does_not_hide_wrong_model(self, model, eddy, fd_grid):
        wrong = ModelParameters(F=model.F, beta=model.beta * 1.01)
        for method in ("fd", "jet"):
            report = residual(wrong, eddy, fd_grid, method=method)
            assert not report.exact
            assert report.rounding < 1e-6

    def test_two_levels_cannot_fit_order(self, model, eddy, fd_grid):
        wrong = ModelParameters(F=model.F, beta=model.beta * 1.01)
        report = residual(wrong, eddy, fd_grid, levels=2)
        assert report.fitted_order is None
        assert not report.passed

    def test_layer_count_must_match(self, eddy, fd_grid):
        two = ModelParameters(F=CouplingMatrix.from_offdiagonals([1e-10], [1e-10]), beta=1.6e-11)
        with pytest.raises(ParameterException):
            residual(two, eddy, fd_grid)

    def test_modon_outside_interface_band(self, model):
        spec = lr_barotropic_solve(model, rho_tilde=1.5e-9, rho_hat=3.0e-10)
        modon = assemble_modon(model, spec)
        grid = GridSpec.square(1.6e5, 33)
        assert residual(model, modon, grid, method="jet").passed
        report = residual(model, modon, grid, levels=3, min_order=3.0)
        assert report.passed, report.failure()
        assert report.excluded_band == pytest.approx(BAND_CELLS * report.grids[-1])


class TestPotentialVorticity:
    def test_grid_matches_analytic(self, model, eddy):
        grid = GridSpec.square(5.0e4, 65)
        sampled = sample_field(eddy, grid)
        q_grid, one_sided = potential_vorticity_grid(model, sampled)
        X, Y = grid.mesh()
        q = potential_vorticity(model, eddy, 0.0, X, Y)
        assert one_sided
        inner = (slice(2, -2), slice(2, -2))
        np.testing.assert_allclose(q_grid[inner], q[inner], rtol=1e-6, atol=1e-6 * np.max(np.abs(q)))

    def test_fd_derivative_is_fourth_order(self):
        x = np.linspace(0.0, 1.0, 41)
        a = np.sin(3.0 * x)[:, None, None] * np.ones((1, 16, 1))
        coarse = np.max(np.abs(fd_derivative(a, x[1] - x[0], 0, 1)[:, 0, 0] - 3.0 * np.cos(3.0 * x)))
        x2 = np.linspace(0.0, 1.0, 81)
        a2 = np.sin(3.0 * x2)[:, None, None] * np.ones((1, 16, 1))
        fine = np.max(np.abs(fd_derivative(a2, x2[1] - x2[0], 0, 1)[:, 0, 0] - 3.0 * np.cos(3.0 * x2)))
        assert coarse / fine > 12.0

    def test_fd_derivative_needs_points(self):
        with pytest.raises(ParameterException):
            fd_derivative(np.zeros((5, 16, 1)), 1.0, 0, 2)


class TestConserved:
    K = 2.0e-5
    AMP = 1.0e3

    def _box(self, t: float = 0.0) -> GridSpec:
        return GridSpec(x0=0.0, y0=-5.0e4, Lx=2 * np.pi / self.K, Ly=1.0e5, Nx=64, Ny=16, t=t, periodic=True)

    def test_energy_of_barotropic_wave(self, model, stack):
        wave = kg_barotropic_mode(model, chi=0.0, k=self.K, amplitude=self.AMP)
        box = self._box()
        expected = 0.5 * (1.0 + 7.0 / 3.0 + 10.0 / 3.0) * self.AMP ** 2 * self.K ** 2 * box.Lx * box.Ly / 2.0
        first = conserved(model, wave, "energy", box)
        later = conserved(model, wave, "energy", self._box(5.0e4))
        assert first.value == pytest.approx(expected, rel=1e-10)
        assert later.value == pytest.approx(first.value, rel=1e-12)
        assert later.t == 5.0e4
        dimensional = conserved(model, wave, "energy", box, dimensional=True, stack=stack)
        assert dimensional.value == pytest.approx(first.value * 1000.0 * 600.0, rel=1e-10)

    def test_energy_from_grid(self, model):
        wave = kg_barotropic_mode(model, chi=0.0, k=self.K, amplitude=self.AMP)
        box = self._box()
        exact = conserved(model, wave, "energy", box)
        from_grid = conserved(model, sample_field(wave, box), "energy")
        assert from_grid.one_sided
        assert from_grid.value == pytest.approx(exact.value, rel=5e-3)

    def test_circulation_and_casimir_are_constant(self, model):
        wave = kg_barotropic_mode(model, chi=0.0, k=self.K, amplitude=self.AMP)
        for quantity, kwargs in (("circulation", {"weight": [1.0]}), ("casimir", {"casimir": "square"}),
                                 ("casimir", {"casimir": "identity", "layer": 1}), ("momentum", {})):
            a = conserved(model, wave, quantity, self._box(), **kwargs)
            b = conserved(model, wave, quantity, self._box(3.0e4), **kwargs)
            assert b.value == pytest.approx(a.value, rel=1e-10, abs=1e-12 * max(abs(a.value), 1.0))

    def test_time_weight(self, model):
        wave = kg_barotropic_mode(model, chi=0.0, k=self.K, amplitude=self.AMP)
        plain = conserved(model, wave, "circulation", self._box(10.0))
        weighted = conserved(model, wave, "circulation", self._box(10.0), weight=[0.0, 1.0])
        assert weighted.value == pytest.approx(10.0 * plain.value, rel=1e-12)
        assert weighted.weight == [0.0, 1.0]

    def test_argument_checks(self, model, eddy, fd_grid):
        with pytest.raises(ParameterException):
            conserved(model, eddy, "energy")
        with pytest.raises(ParameterException):
            conserved(model, eddy, "energy", fd_grid, dimensional=True)
        with pytest.raises(ParameterException):
            conserved(model, eddy, "casimir", fd_grid, layer=3)
        with pytest.raises(ValueError):
            conserved(model, eddy, "helicity", fd_grid)


class TestGridIO:
    def test_csv(self, tmp_path, eddy):
        grid = GridSpec.square(1.0e4, 16)
        path = tmp_path / "psi.csv"
        sample_field(eddy, grid).to_csv(path)
        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines[0] == "x,y,psi_1,psi_2,psi_3"
        assert len(lines) == 16 * 16 + 1
        first = [float(v) for v in lines[1].split(",")]
        np.testing.assert_allclose(first[2:], eddy.eval(0.0, -1.0e4, -1.0e4), rtol=1e-12)

    def test_binary(self, tmp_path, eddy):
        grid = GridSpec.square(1.0e4, 17, t=60.0)
        sampled = sample_field(eddy, grid)
        sidecar = sampled.to_bin(tmp_path / "psi.bin")
        assert sidecar.name == "psi.json"
        loaded = GridField.from_bin(tmp_path / "psi.bin")
        np.testing.assert_array_equal(loaded.data, sampled.data)
        assert loaded.spec.t == 60.0
        assert (tmp_path / "psi.bin").stat().st_size == 17 * 17 * 3 * 8

    def test_threads_do_not_change_values(self, eddy):
        grid = GridSpec.square(1.0e4, 16)
        np.testing.assert_array_equal(sample_field(eddy, grid, threads=1).data,
                                      sample_field(eddy, grid, threads=4).data)

    def test_rejects_non_finite(self):
        grid = GridSpec.square(1.0, 16)
        data = np.zeros((16, 16, 2))
        data[3, 4, 1] = np.nan
        with pytest.raises(NumericalException) as exc:
            GridField(grid, data)
        assert exc.value.details["layer"] == 1

    def test_rejects_bad_shapes(self):
        with pytest.raises(ParameterException):
            GridField(GridSpec.square(1.0, 16), np.zeros((16, 15, 2)))
        with pytest.raises(ParameterException):
            GridSpec.square(1.0, 8)
        with pytest.raises(ParameterException):
            GridSpec(x0=0.0, y0=0.0, Lx=-1.0, Ly=1.0, Nx=16, Ny=16)
