import math

import numpy as np
import pytest

from services.errors import CFLViolationError, NonFiniteFieldError
from services.grid import make_grid
from services.wave import (
    ScalarField,
    SolverConfig,
    SoundSpeed,
    WaveSnapshot,
    energy,
    propagate,
    propagate_history,
    spectral_gradient,
    spectral_laplacian,
    time_reverse,
)


def _gaussian(grid, sigma, center=(0.0, 0.0)):
    X1, X2 = grid.coordinates()
    r2 = (X1 - center[0]) ** 2 + (X2 - center[1]) ** 2
    return ScalarField(np.exp(-r2 / (2 * sigma ** 2)), grid)


def _mode(grid, m1, m2):
    X1, X2 = grid.coordinates()
    k1, k2 = np.pi * m1 / grid.a, np.pi * m2 / grid.a
    return ScalarField(np.cos(k1 * X1 + k2 * X2), grid), math.hypot(k1, k2)


def _rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


class TestScalarField:
    def test_rejects_shape_mismatch(self, small_grid):
        with pytest.raises(ValueError, match="shape"):
            ScalarField(np.zeros((4, 4)), small_grid)

    def test_rejects_non_finite(self, small_grid):
        values = np.zeros(small_grid.shape)
        values[3, 3] = np.nan
        with pytest.raises(ValueError, match="non-finite"):
            ScalarField(values, small_grid)

    def test_arithmetic(self, small_grid):
        f = ScalarField(np.ones(small_grid.shape), small_grid)
        np.testing.assert_array_equal((2 * f - f).values, f.values)
        np.testing.assert_array_equal((-f + f).values, 0.0)


class TestSoundSpeed:
    def test_rejects_non_positive(self, small_grid):
        values = np.ones(small_grid.shape)
        values[0, 0] = 0.0
        with pytest.raises(ValueError, match="positive"):
            SoundSpeed.from_values(values, small_grid)

    def test_rejects_exterior_not_one(self, small_grid, small_domain):
        values = np.ones(small_grid.shape)
        values[0, 0] = 1.1
        with pytest.raises(ValueError, match="exterior"):
            SoundSpeed.from_values(values, small_grid, small_domain)

    def test_c_max(self, small_grid):
        values = np.ones(small_grid.shape)
        values[16, 16] = 1.3
        assert SoundSpeed.from_values(values, small_grid).c_max == 1.3


class TestSolverConfig:
    def test_time_step_snapping(self):
        grid = make_grid(3.25, 128)
        cfg = SolverConfig.build(2.0, grid, c_max=1.0, cfl=0.3)
        assert cfg.n_steps == math.ceil(2.0 / (0.3 * grid.h))
        assert cfg.dt * cfg.n_steps == pytest.approx(2.0, rel=1e-15)
        assert cfg.courant <= 0.3

    @pytest.mark.parametrize("kwargs", [{"T": 0.0}, {"T": 1.0, "cfl": 0.0}, {"T": 1.0, "c_max": -1.0}])
    def test_rejects_bad_parameters(self, small_grid, kwargs):
        params = {"c_max": 1.0, **kwargs}
        with pytest.raises(ValueError):
            SolverConfig.build(grid=small_grid, **params)


class TestSpectralLaplacian:
    def test_constant_is_annihilated(self, small_grid):
        cfg = SolverConfig.build(1.0, small_grid, 1.0)
        u = ScalarField(np.full(small_grid.shape, 3.0), small_grid)
        np.testing.assert_allclose(spectral_laplacian(u, cfg).values, 0.0, atol=1e-12)

    def test_fourier_mode_without_correction(self):
        grid = make_grid(2.0, 32)
        u, k = _mode(grid, 3, -2)
        cfg = SolverConfig(T=1.0, dt=0.1, n_steps=10, h=grid.h, kspace_correction=False)
        np.testing.assert_allclose(spectral_laplacian(u, cfg).values, -k ** 2 * u.values, atol=1e-10)

    def test_fourier_mode_with_correction(self):
        grid = make_grid(2.0, 32)
        u, k = _mode(grid, 1, 0)
        cfg = SolverConfig(T=1.0, dt=0.1, n_steps=10, h=grid.h, c_ref=1.0)
        x = k * 0.05
        expected = -k ** 2 * (math.sin(x) / x) ** 2 * u.values
        np.testing.assert_allclose(spectral_laplacian(u, cfg).values, expected, atol=1e-12)

    def test_rejects_mismatched_grid(self, small_grid):
        cfg = SolverConfig.build(1.0, small_grid, 1.0)
        other = make_grid(2.25, 16)
        c = SoundSpeed.constant(small_grid)
        with pytest.raises(ValueError):
            propagate(ScalarField.zeros(other), c, cfg)


class TestPropagate:
    def test_zero_in_zero_out(self, small_grid):
        cfg = SolverConfig.build(1.0, small_grid, 1.0)
        snap = propagate(ScalarField.zeros(small_grid), SoundSpeed.constant(small_grid), cfg)
        assert not snap.pressure.values.any()
        assert not snap.velocity.values.any()

    def test_single_mode_is_exact_at_reference_speed(self):
        grid = make_grid(3.25, 64)
        f, k = _mode(grid, 2, 1)
        cfg = SolverConfig.build(2.0, grid, 1.0)
        snap = propagate(f, SoundSpeed.constant(grid), cfg)
        assert _rel(snap.pressure.values, math.cos(k * 2.0) * f.values) <= 1e-10
        assert _rel(snap.velocity.values, -k * math.sin(k * 2.0) * f.values) <= 1e-10

    def test_time_reverse_shares_the_forward_path(self, small_grid, rng):
        h = ScalarField(rng.standard_normal(small_grid.shape), small_grid)
        c = SoundSpeed.constant(small_grid)
        cfg = SolverConfig.build(1.0, small_grid, 1.0)
        np.testing.assert_array_equal(time_reverse(h, c, cfg).values, propagate(h, c, cfg).pressure.values)

    def test_time_reversal_alone_is_not_the_inverse(self):
        grid = make_grid(3.25, 64)
        f = _gaussian(grid, 0.2)
        c = SoundSpeed.constant(grid)
        cfg = SolverConfig.build(2.5, grid, 1.0)
        back = time_reverse(propagate(f, c, cfg).pressure, c, cfg)
        assert np.abs(back.values).max() > 1e-3
        assert _rel(back.values, f.values) > 0.1

    def test_linearity(self, small_variable_pipeline, rng):
        cfg = small_variable_pipeline
        f = ScalarField(rng.standard_normal(cfg.grid.shape), cfg.grid)
        g = ScalarField(rng.standard_normal(cfg.grid.shape), cfg.grid)
        combined = propagate(2.0 * f + g * -3.0, cfg.c, cfg.solver).pressure.values
        separate = (2.0 * propagate(f, cfg.c, cfg.solver).pressure
                    - 3.0 * propagate(g, cfg.c, cfg.solver).pressure).values
        assert _rel(combined, separate) <= 1e-12

    def test_speed_above_reference_is_rejected(self, small_grid):
        cfg = SolverConfig.build(1.0, small_grid, 1.0)
        c = SoundSpeed.constant(small_grid, 2.0)
        with pytest.raises(CFLViolationError):
            propagate(ScalarField.zeros(small_grid), c, cfg)

    def test_oversized_time_step_is_rejected(self, small_grid):
        cfg = SolverConfig(T=1.0, dt=0.5, n_steps=2, h=small_grid.h)
        with pytest.raises(CFLViolationError, match="Courant"):
            propagate(ScalarField.zeros(small_grid), SoundSpeed.constant(small_grid), cfg)

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_blow_up_reports_the_step(self, small_grid, rng):
        # cfl raised so validation passes; the uncorrected scheme is unstable at this dt
        cfg = SolverConfig(T=300.0, dt=1.0, n_steps=300, h=small_grid.h, cfl=100.0,
                           kspace_correction=False)
        f = ScalarField(rng.standard_normal(small_grid.shape), small_grid)
        with pytest.raises(NonFiniteFieldError) as exc:
            propagate(f, SoundSpeed.constant(small_grid), cfg)
        assert exc.value.step % 50 == 0 or exc.value.step == 300

    def test_wave_stays_inside_the_light_cone(self):
        grid = make_grid(3.25, 128)
        f = _gaussian(grid, 0.12)
        cfg = SolverConfig.build(2.0, grid, 1.0)
        p = propagate(f, SoundSpeed.constant(grid), cfg).pressure.values
        X1, X2 = grid.coordinates()
        outside = np.hypot(X1, X2) > 3.0
        assert np.abs(p[outside]).max() <= 1e-10


def _fd_reference(f0: np.ndarray, h: float, T: float, cfl: float = 0.3) -> np.ndarray:
    """Second-order periodic finite-difference leapfrog at unit speed."""
    n_steps = math.ceil(T / (cfl * h))
    dt = T / n_steps

    def lap(u):
        return (np.roll(u, 1, 0) + np.roll(u, -1, 0) + np.roll(u, 1, 1) + np.roll(u, -1, 1) - 4 * u) / h ** 2

    prev, cur = f0, f0 + 0.5 * dt ** 2 * lap(f0)
    for _ in range(n_steps - 1):
        prev, cur = cur, 2 * cur - prev + dt ** 2 * lap(cur)
    return cur


def test_matches_finite_difference_reference_on_finer_grid():
    coarse = make_grid(2.25, 64)
    fine = make_grid(2.25, 256)
    cfg = SolverConfig.build(1.0, coarse, 1.0)
    p = propagate(_gaussian(coarse, 0.5), SoundSpeed.constant(coarse), cfg).pressure.values
    ref = _fd_reference(_gaussian(fine, 0.5).values, fine.h, 1.0)[::4, ::4]
    assert _rel(p, ref) <= 1e-3


class TestEnergy:
    def test_zero_snapshot(self, small_grid):
        snap = WaveSnapshot.at_rest(ScalarField.zeros(small_grid))
        assert energy(snap, SoundSpeed.constant(small_grid)) == 0.0

    def test_static_field_is_gradient_energy(self, small_grid):
        f = _gaussian(small_grid, 0.4)
        d1, d2 = spectral_gradient(f)
        expected = small_grid.h ** 2 * np.sum(d1.values ** 2 + d2.values ** 2)
        assert energy(WaveSnapshot.at_rest(f), SoundSpeed.constant(small_grid)) == pytest.approx(expected)

    def test_conserved_at_constant_speed(self):
        grid = make_grid(3.25, 64)
        f = _gaussian(grid, 0.3)
        c = SoundSpeed.constant(grid)
        e0 = energy(WaveSnapshot.at_rest(f), c)
        e1 = energy(propagate(f, c, SolverConfig.build(2.0, grid, 1.0)), c)
        assert abs(e1 - e0) / e0 <= 1e-3

    def test_history_endpoints(self, small_grid):
        f = _gaussian(small_grid, 0.4)
        c = SoundSpeed.constant(small_grid)
        cfg = SolverConfig.build(1.0, small_grid, 1.0)
        history = propagate_history(f, c, cfg, every=5)
        assert history[0][0] == 0.0
        assert history[-1][0] == pytest.approx(1.0)
        np.testing.assert_array_equal(history[-1][1].values, propagate(f, c, cfg).pressure.values)


def test_spectral_gradient_of_a_mode():
    grid = make_grid(2.0, 32)
    X1, X2 = grid.coordinates()
    k = np.pi * 3 / grid.a
    u = ScalarField(np.sin(k * X1), grid)
    d1, d2 = spectral_gradient(u)
    np.testing.assert_allclose(d1.values, k * np.cos(k * X1), atol=1e-10)
    np.testing.assert_allclose(d2.values, 0.0, atol=1e-10)

