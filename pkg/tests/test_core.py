import numpy as np
import pytest

from bvflow.core import (
    Grid,
    JumpDatum,
    SpaceTimeField,
    VelocityField,
    Weights,
    constant_velocity,
    energy,
    fidelity,
    full_objective,
    gradient,
    velocity_jacobian,
)


def field_1d(values, dt=1.0, dx=1.0, boundary=None):
    values = np.asarray(values, dtype=float)
    grid = Grid(1, values.shape[0], (values.shape[1],), dt, dx, boundary)
    return SpaceTimeField(grid, values)


class TestWeights:
    def test_validation(self):
        with pytest.raises(ValueError):
            Weights(-1.0, 1.0, 1.0)
        with pytest.raises(ValueError):
            Weights(1.0, 0.0, 1.0)
        with pytest.raises(ValueError):
            Weights(1.0, 1.0, 1.0, M=0.0)
        with pytest.raises(ValueError):
            Weights(1.0, 1.0, 1.0, p=0.5)

    def test_fidelity_exponent_range(self):
        Weights(1.0, 1.0, 1.0, p=1.4).check_fidelity_exponent(2)
        with pytest.raises(ValueError):
            Weights(1.0, 1.0, 1.0, p=1.5).check_fidelity_exponent(2)
        with pytest.raises(ValueError):
            Weights(1.0, 1.0, 1.0, p=2.0).check_fidelity_exponent(1)


class TestGrid:
    def test_validation(self):
        with pytest.raises(ValueError):
            Grid(1, 1, (8,))
        with pytest.raises(ValueError):
            Grid(1, 4, (1,))
        with pytest.raises(ValueError):
            Grid(1, 4, (8,), dt=0.0)
        with pytest.raises(ValueError):
            Grid(1, 4, (8,), boundary=("weird", "neumann"))

    def test_cell_volume(self):
        g = Grid(2, 4, (8, 8), dt=0.5, dx=0.25)
        assert g.cell_volume == pytest.approx(0.5 * 0.25 ** 2)


class TestJumpDatum:
    def test_normal_must_be_unit(self):
        with pytest.raises(ValueError):
            JumpDatum(1.0, 0.0, [1.0], [0.0], [1.0, 1.0])

    def test_derived_quantities(self):
        j = JumpDatum(2.0, 0.5, [1.0, 0.0], [0.0, 1.0], [0.0, 0.0, 1.0])
        assert j.d == 2
        assert j.jump_u == pytest.approx(1.5)
        assert np.allclose(j.jump_v, [1.0, -1.0])
        assert np.allclose(j.w_plus, [1.0, 1.0, 0.0])


class TestGradient:
    def test_constant_field_zero(self):
        f = field_1d(np.full((4, 6), 3.7))
        assert np.all(gradient(f) == 0.0)

    def test_linear_in_space(self):
        vals = np.tile(np.arange(6.0), (4, 1))
        g = gradient(field_1d(vals))
        assert np.all(g[..., 0] == 0.0)
        assert np.all(g[:, :-1, 1] == 1.0)
        assert np.all(g[:, -1, 1] == 0.0)  # Neumann: outermost difference zero

    def test_checkerboard_hand_evaluated(self):
        # u(t, x) = (t + x) mod 2 on a 4x4 grid: every forward difference at
        # nodes with a neighbor flips sign, so all components are +-1
        t, x = np.meshgrid(np.arange(4), np.arange(4), indexing="ij")
        vals = ((t + x) % 2).astype(float)
        g = gradient(field_1d(vals))
        interior_t = g[:-1, :, 0]
        interior_x = g[:, :-1, 1]
        assert set(np.unique(interior_t)) == {-1.0, 1.0}
        assert set(np.unique(interior_x)) == {-1.0, 1.0}

    def test_periodic_wraps(self):
        vals = np.tile(np.arange(4.0), (3, 1))
        f = field_1d(vals, boundary=("neumann", "periodic"))
        g = gradient(f)
        assert np.all(g[:, :-1, 1] == 1.0)
        assert np.all(g[:, -1, 1] == -3.0)  # wrap from 3 back to 0

    def test_scaling_by_steps(self):
        vals = np.tile(np.arange(6.0), (4, 1)) * 0.5
        g = gradient(field_1d(vals, dt=0.5, dx=0.25))
        assert np.allclose(g[:, :-1, 1], 0.5 / 0.25)


class TestEnergy:
    def test_constants_give_zero(self):
        w = Weights(1.0, 1.0, 1.0)
        u = field_1d(np.full((4, 8), 2.0))
        v = constant_velocity(u.grid, [0.3])
        terms = energy(u, v, w)
        assert terms.total == 0.0

    def test_linear_profile_value(self):
        # u(t,x) = x, v = c: per node with an x-neighbor the integrand is
        # alpha_F |c| + alpha_u; there are nt * (nx - 1) of them
        w = Weights(2.0, 1.0, 3.0)
        nt, nx, c = 4, 7, 0.25
        u = field_1d(np.tile(np.arange(float(nx)), (nt, 1)))
        v = constant_velocity(u.grid, [c])
        terms = energy(u, v, w)
        count = nt * (nx - 1)
        assert terms.transport == pytest.approx(count * 2.0 * c)
        assert terms.intensity_tv == pytest.approx(count * 3.0)
        assert terms.flow_tv == 0.0

    def test_brightness_constancy_kills_transport(self):
        # u(t,x) = x - c t with v = c: the residual vanishes wherever both
        # forward differences have neighbors; only the one-sided Neumann
        # slices contribute
        w = Weights(1.0, 1.0, 1.0)
        nt, nx, c = 5, 9, 0.5
        t, x = np.meshgrid(np.arange(nt), np.arange(nx), indexing="ij")
        u = field_1d((x - c * t).astype(float))
        v = constant_velocity(u.grid, [c])
        du = gradient(u)
        residual = du[..., 0] + c * du[..., 1]
        assert np.all(residual[:-1, :-1] == 0.0)
        terms = energy(u, v, w)
        assert terms.transport == pytest.approx(c * ((nt - 1) + (nx - 1)))
        interior = (nt - 1) * (nx - 1)
        expected = interior * np.sqrt(1 + c ** 2) + (nt - 1) * c + (nx - 1) * 1.0
        assert terms.intensity_tv == pytest.approx(expected)

    def test_velocity_bound_rejected(self):
        w = Weights(1.0, 1.0, 1.0, M=0.5)
        u = field_1d(np.zeros((3, 6)))
        v = constant_velocity(u.grid, [0.6])
        with pytest.raises(ValueError, match="velocity bound"):
            energy(u, v, w)

    def test_grid_mismatch_rejected(self):
        w = Weights(1.0, 1.0, 1.0)
        u = field_1d(np.zeros((3, 6)))
        v = constant_velocity(Grid(1, 3, (7,)), [0.0])
        with pytest.raises(ValueError, match="grids"):
            energy(u, v, w)

    def test_per_term_homogeneity(self):
        rng = np.random.default_rng(3)
        w = Weights(1.3, 0.7, 1.1, M=10.0)
        u = field_1d(rng.normal(size=(4, 8)))
        vvals = rng.normal(size=(4, 8, 1)) * 0.5
        v = VelocityField(u.grid, vvals)
        lam = 2.5
        base = energy(u, v, w)
        scaled_u = energy(SpaceTimeField(u.grid, lam * u.values), v, w)
        assert scaled_u.transport == pytest.approx(lam * base.transport)
        assert scaled_u.intensity_tv == pytest.approx(lam * base.intensity_tv)
        assert scaled_u.flow_tv == pytest.approx(base.flow_tv)
        scaled_v = energy(u, VelocityField(u.grid, lam * vvals), w)
        assert scaled_v.flow_tv == pytest.approx(lam * base.flow_tv)
        assert scaled_v.intensity_tv == pytest.approx(base.intensity_tv)

    def test_translation_invariance_periodic(self):
        rng = np.random.default_rng(5)
        w = Weights(1.0, 1.0, 1.0, M=10.0)
        grid = Grid(1, 4, (8,), boundary=("periodic", "periodic"))
        uv = rng.normal(size=(4, 8))
        vv = rng.normal(size=(4, 8, 1)) * 0.3
        e0 = energy(SpaceTimeField(grid, uv), VelocityField(grid, vv), w)
        e1 = energy(
            SpaceTimeField(grid, np.roll(uv, 3, axis=1)),
            VelocityField(grid, np.roll(vv, 3, axis=1)),
            w,
        )
        assert e0.total == e1.total  # bitwise: reductions are sorted

    def test_jacobian_shape_and_values(self):
        grid = Grid(2, 3, (4, 5))
        vals = np.zeros(grid.full_shape + (2,))
        vals[..., 0] = np.arange(5.0)[None, None, :]
        jac = velocity_jacobian(VelocityField(grid, vals))
        assert jac.shape == grid.full_shape + (2, 3)
        assert np.all(jac[:, :, :-1, 0, 2] == 1.0)


class TestFullObjective:
    def test_zero_at_data(self):
        w = Weights(1.0, 1.0, 1.0)
        u = field_1d(np.full((3, 6), 0.5))
        v = constant_velocity(u.grid, [0.1])
        assert full_objective(u, v, u, w).total == 0.0

    def test_pure_fidelity(self):
        w = Weights(1.0, 1.0, 1.0, p=1.0)
        u0 = field_1d(np.zeros((3, 6)))
        u = field_1d(np.ones((3, 6)))
        v = constant_velocity(u0.grid, [0.0])
        terms = full_objective(u, v, u0, w)
        assert terms.fidelity == pytest.approx(18.0)  # volume 1 per cell
        assert terms.total == pytest.approx(18.0)

    def test_objective_dominates_energy(self):
        rng = np.random.default_rng(11)
        w = Weights(0.7, 0.4, 0.9, M=10.0)
        u0 = field_1d(rng.normal(size=(4, 8)))
        u = field_1d(rng.normal(size=(4, 8)))
        v = VelocityField(u0.grid, rng.normal(size=(4, 8, 1)))
        full = full_objective(u, v, u0, w)
        assert full.total >= energy(u, v, w).total >= 0.0

    def test_fidelity_exponent_checked(self):
        w = Weights(1.0, 1.0, 1.0, p=2.0)
        u = field_1d(np.zeros((3, 6)))
        with pytest.raises(ValueError, match="exponent"):
            fidelity(u, u, w)
