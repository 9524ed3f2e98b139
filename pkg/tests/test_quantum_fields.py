import numpy as np
import pytest

from varq import hydrodynamics as hy
from varq import mechanics as mech
from varq import quantum_fields as qf
from varq.errors import InvalidArgumentError, InvalidSpecError, NumericalFailureError
from varq.numerics import build_grid


def harmonic_field_spec(k=1.0, eta=1.0, f=1.0):
    return qf.QFieldSpec(eta=eta, potential=lambda q: 0.5 * k * np.square(q), f=f)


@pytest.fixture(scope="module")
def harmonic_vacuum():
    spec = harmonic_field_spec()
    grid = build_grid(-8.0, 8.0, 801)
    return spec, grid, qf.vacuum_spectrum(spec, grid, 8)


class TestVacuumSpectrum:
    def test_harmonic_levels(self):
        spec = harmonic_field_spec()
        grid = build_grid(-10, 10, 2000)
        vac = qf.vacuum_spectrum(spec, grid, 3)
        assert np.max(np.abs(vac.w - [0.5, 1.5, 2.5])) < 1e-4

    def test_scaling_with_stiffness_and_metric(self):
        # w_r = f sqrt(k/eta) (r + 1/2)
        k, eta, f = 2.0, 0.5, 0.7
        spec = harmonic_field_spec(k=k, eta=eta, f=f)
        grid = build_grid(-8, 8, 1600)
        vac = qf.vacuum_spectrum(spec, grid, 3)
        expected = f * np.sqrt(k / eta) * (np.arange(3) + 0.5)
        assert np.max(np.abs(vac.w - expected)) < 1e-4

    def test_constant_shift(self):
        spec = harmonic_field_spec()
        shifted = qf.QFieldSpec(eta=1.0, potential=lambda q: 0.5 * np.square(q) + 0.75, f=1.0)
        grid = build_grid(-10, 10, 1200)
        w1 = qf.vacuum_spectrum(spec, grid, 3).w
        w2 = qf.vacuum_spectrum(shifted, grid, 3).w
        assert np.max(np.abs(w2 - (w1 + 0.75))) < 1e-9

    def test_quartic_against_dense_diagonalisation(self):
        spec = qf.QFieldSpec(eta=1.0, potential=lambda q: np.power(q, 4), f=1.0)
        grid = build_grid(-6, 6, 900)
        vac = qf.vacuum_spectrum(spec, grid, 1)
        from varq.quantum_fields import _operator

        dense = _operator(spec, grid).dense()
        w_dense = np.linalg.eigvalsh(dense)[0]
        assert abs(vac.w[0] - w_dense) < 1e-6

    def test_unresolved_grid_rejected(self):
        spec = harmonic_field_spec()
        grid = build_grid(-3, 3, 200)  # psi_7 does not fit in [-3, 3]
        with pytest.raises(NumericalFailureError):
            qf.vacuum_spectrum(spec, grid, 8)

    def test_nonconfining_potential_rejected(self):
        spec = qf.QFieldSpec(eta=1.0, potential=lambda q: np.zeros_like(np.asarray(q, dtype=float)), f=1.0)
        grid = build_grid(-5, 5, 200)
        with pytest.raises(InvalidSpecError):
            spec.validate_on(grid)

    def test_ground_state_positive_interior(self, harmonic_vacuum):
        _, grid, vac = harmonic_vacuum
        assert np.all(vac.psi[1:-1, 0] > 0)


class TestInvariantStateTensor:
    def test_fundamental_vacuum(self):
        t = qf.invariant_state_tensor(0.5)
        assert np.array_equal(t, 0.5 * np.eye(2))

    def test_zero_energy(self):
        assert np.array_equal(qf.invariant_state_tensor(0.0), np.zeros((2, 2)))

    def test_trace_counts_dimensions(self):
        for dim in (2, 4):
            assert np.trace(qf.invariant_state_tensor(0.3, dim=dim)) == pytest.approx(0.3 * dim)

    def test_negative_energy_rejected(self):
        with pytest.raises(InvalidArgumentError):
            qf.invariant_state_tensor(-1.0)


class TestFluctuations:
    def test_harmonic_variance(self):
        spec = harmonic_field_spec()
        grid = build_grid(-10, 10, 2000)
        vac = qf.vacuum_spectrum(spec, grid, 1)
        mean, var = qf.field_fluctuations(vac)
        assert abs(mean) < 1e-8
        assert var == pytest.approx(0.5, abs=1e-4)

    def test_variance_scales_linearly_with_f(self):
        grid = build_grid(-10, 10, 2000)
        var = {}
        for f in (1.0, 0.5):
            vac = qf.vacuum_spectrum(harmonic_field_spec(f=f), grid, 1)
            var[f] = qf.field_fluctuations(vac)[1]
        assert var[0.5] == pytest.approx(0.5 * var[1.0], rel=1e-3)


class TestSpaceIndependent:
    def test_eigenstate_energy_density_is_flat(self, harmonic_vacuum):
        spec, grid, vac = harmonic_vacuum
        r = 1
        res = qf.space_independent_evolve(spec, grid, vac.psi[:, r].astype(complex), 2e-3, 400,
                                          store_every=100)
        for k in range(len(res.times)):
            dev = np.abs(res.energy_density[k][res.mask[k]] - vac.w[r])
            assert np.max(dev) < 1e-4

    def test_superposition_mean_energy_constant(self, harmonic_vacuum):
        spec, grid, vac = harmonic_vacuum
        psi0 = (vac.psi[:, 0] + vac.psi[:, 1]) / np.sqrt(2.0)
        res = qf.space_independent_evolve(spec, grid, psi0.astype(complex), 2e-3, 1500,
                                          store_every=50)
        drift = np.max(np.abs(res.mean_energy - res.mean_energy[0])) / abs(res.mean_energy[0])
        assert drift <= 1e-8
        assert res.mean_energy[0] == pytest.approx(0.5 * (vac.w[0] + vac.w[1]), abs=1e-8)
        # pointwise density oscillates even though the mean is constant
        iq = np.argmin(np.abs(grid.nodes - 0.5))
        assert np.ptp(res.energy_density[:, iq]) > 0.05

    def test_momentum_density_vanishes(self, harmonic_vacuum):
        spec, grid, vac = harmonic_vacuum
        rho = vac.psi[:, 0] ** 2
        eps, P, mask = qf.random_energy_density(spec, grid, rho, np.zeros(grid.n),
                                                np.zeros((3, grid.n)))
        assert np.array_equal(P, np.zeros((3, grid.n)))


class TestRandomEnergyDensity:
    def test_invariant_state_reads_eigenvalue(self, harmonic_vacuum):
        spec, grid, vac = harmonic_vacuum
        eps, _, mask = qf.random_energy_density(spec, grid, vac.psi[:, 0] ** 2, np.zeros(grid.n))
        assert np.max(np.abs(eps[mask] - vac.w[0])) < 1e-7

    def test_excited_state_away_from_node(self, harmonic_vacuum):
        # sqrt(rho) has a kink at the node, so the identity holds on cells
        # at least two nodes away from the zero crossing
        spec, grid, vac = harmonic_vacuum
        psi1 = vac.psi[:, 1]
        eps, _, mask = qf.random_energy_density(spec, grid, psi1**2, np.zeros(grid.n))
        crossings = np.flatnonzero(np.sign(psi1[:-1]) * np.sign(psi1[1:]) < 0)
        keep = mask.copy()
        for c in crossings:
            keep[max(c - 2, 0) : c + 4] = False
        assert np.max(np.abs(eps[keep] - vac.w[1])) < 1e-5

    def test_flat_time_multiplier_kills_momentum(self, harmonic_vacuum):
        spec, grid, vac = harmonic_vacuum
        rng = np.random.default_rng(0)
        lam_m = rng.normal(size=(2, grid.n))
        _, P, mask = qf.random_energy_density(spec, grid, vac.psi[:, 0] ** 2,
                                              np.full(grid.n, 3.0), lam_m)
        assert np.array_equal(P[:, mask], np.zeros_like(P[:, mask]))


class TestConfinedSolve:
    def test_pure_vacuum_is_exact_fixed_point(self, harmonic_vacuum):
        spec, grid, vac = harmonic_vacuum
        res = qf.confined_solve(spec, vac, [1.0], r_min=0.5, r_max=30.0, tol=1e-8)
        assert res.iterations == 0
        assert res.converged
        assert np.max(np.abs(res.pair.phi - vac.psi[:, 0][:, None])) == 0.0
        assert np.max(np.abs(res.pair.phi_tilde - vac.psi[:, 0][:, None])) == 0.0

    def test_tail_decay_rate(self, harmonic_vacuum):
        spec, grid, vac = harmonic_vacuum
        res = qf.confined_solve(spec, vac, [1.0, 0.1], r_min=0.5, r_max=30.0, tol=1e-8)
        rep = qf.confinement_report(res.pair, vac, spec.f, window=(10.0, 25.0))
        expected = (vac.w[1] - vac.w[0]) / spec.f
        assert rep.fitted_rate == pytest.approx(expected, rel=0.02)
        assert rep.radius == pytest.approx(spec.f / (vac.w[1] - vac.w[0]))

    def test_first_correction_matches_large_r_series(self, harmonic_vacuum):
        # coefficient of (1/r) exp(-(w1-w0) r / f) in the first sweep
        spec, grid, vac = harmonic_vacuum
        c1 = 0.1
        res = qf.confined_solve(spec, vac, [1.0, c1], r_min=0.5, r_max=30.0, tol=1e-8)
        A0, _ = res.mode_history[0]
        A1, _ = res.mode_history[1]
        r = res.pair.r
        dw = vac.w[1] - vac.w[0]
        d1 = A1[1] - A0[1]
        sel = (r >= 10.0) & (r <= 20.0)
        y = d1[sel] * np.exp(dw * r[sel] / spec.f)
        X = np.column_stack([r[sel] ** (-k) for k in (1, 2, 3)])
        coef = np.linalg.lstsq(X, y, rcond=None)[0]
        assert coef[0] == pytest.approx(c1 * spec.f / dw, rel=0.05)

    def test_second_mode_sets_decay_when_first_absent(self, harmonic_vacuum):
        spec, grid, vac = harmonic_vacuum
        res = qf.confined_solve(spec, vac, [1.0, 0.0, 0.1], r_min=0.5, r_max=30.0, tol=1e-8)
        rep = qf.confinement_report(res.pair, vac, spec.f, window=(6.0, 13.0))
        assert rep.fitted_rate == pytest.approx((vac.w[2] - vac.w[0]) / spec.f, rel=0.02)

    def test_radius_doubles_with_f_at_fixed_gap(self):
        # radius = f / (w1 - w0); holding the level gap fixed (stiffness
        # k -> k/4 compensates f -> 2f) the radius scales linearly with f
        reports = {}
        for f, k in ((1.0, 1.0), (2.0, 0.25)):
            half_width = 8.0 * np.sqrt(f / np.sqrt(k))
            grid = build_grid(-half_width, half_width, 1201)
            spec = harmonic_field_spec(k=k, f=f)
            vac = qf.vacuum_spectrum(spec, grid, 6)
            dw = vac.w[1] - vac.w[0]
            res = qf.confined_solve(spec, vac, [1.0, 0.1], r_min=0.5 * f / dw,
                                    r_max=30.0 * f / dw, tol=1e-8)
            reports[f] = qf.confinement_report(
                res.pair, vac, f, window=(10.0 * f / dw, 25.0 * f / dw)
            )
        assert reports[2.0].radius == pytest.approx(2 * reports[1.0].radius, rel=1e-4)

    def test_rho_stays_nonnegative_on_claimed_region(self, harmonic_vacuum):
        spec, grid, vac = harmonic_vacuum
        res = qf.confined_solve(spec, vac, [1.0, 0.1], r_min=0.5, r_max=30.0, tol=1e-8)
        psi0 = vac.psi[:, 0]
        qmask = np.abs(psi0) > 1e-6 * np.max(np.abs(psi0))
        assert np.min(res.pair.rho[qmask, :]) >= 0.0

    def test_positivity_loss_reported(self, harmonic_vacuum):
        spec, grid, vac = harmonic_vacuum
        with pytest.raises(NumericalFailureError) as err:
            qf.confined_solve(spec, vac, [1.0, 5.0], r_min=0.5, r_max=30.0, tol=1e-8)
        assert "positivity" in str(err.value)

    def test_bad_normalisation_rejected(self, harmonic_vacuum):
        spec, grid, vac = harmonic_vacuum
        with pytest.raises(InvalidArgumentError):
            qf.confined_solve(spec, vac, [0.5, 0.1], r_min=0.5, r_max=30.0)

    def test_residual_history_decreasing_above_tol(self, harmonic_vacuum):
        spec, grid, vac = harmonic_vacuum
        res = qf.confined_solve(spec, vac, [1.0, 0.1], r_min=0.5, r_max=30.0, tol=1e-8)
        hist = np.asarray(res.residual_history)
        above = hist[hist > 1e-8]
        if above.size > 1:
            assert np.all(np.diff(above) <= 0)
        assert hist[-1] < 1e-8

    def test_fit_window_empty_raises(self, harmonic_vacuum):
        spec, grid, vac = harmonic_vacuum
        res = qf.confined_solve(spec, vac, [1.0], r_min=0.5, r_max=30.0, tol=1e-8)
        # pure vacuum has an identically zero tail: no window can be fit
        with pytest.raises(NumericalFailureError):
            qf.confinement_report(res.pair, vac, spec.f)


class TestSpaceTimeInversion:
    def test_residuals_invariant_under_inversion(self, harmonic_vacuum):
        # map x0 -> -x0, lam -> -lam, rho -> rho on the stored
        # space-independent solution; equation residuals keep their size
        spec, grid, vac = harmonic_vacuum
        psi0 = (vac.psi[:, 0] + vac.psi[:, 1]) / np.sqrt(2.0)
        res = qf.space_independent_evolve(spec, grid, psi0.astype(complex), 1e-3, 60,
                                          store_every=10)
        from varq import wavefunction as wv

        rho_series, lam_series = [], []
        for snap in res.psi:
            wf = wv.WaveFunction(grid, snap, spec.f)
            rho, lam, _ = wv.canonical_map_forward(wf)
            rho_series.append(rho)
            lam_series.append(lam)
        rho_series = np.asarray(rho_series)
        lam_series = np.asarray(lam_series)
        mspec = mech.NaturalSystemSpec(
            mass=lambda q: spec.eta if np.isscalar(q) else np.full(np.shape(q), spec.eta),
            potential=spec.potential,
        )
        dspec = hy.DiffusionSpec(a=spec.f)
        fwd, masks = hy.multiplier_residual_series(
            grid, mspec, dspec, rho_series, lam_series, res.times
        )
        bwd, masks_b = hy.multiplier_residual_series(
            grid, mspec, dspec, rho_series[::-1], -lam_series[::-1], -res.times[::-1]
        )
        sel = masks & masks_b[::-1]
        assert np.allclose(np.abs(bwd[::-1][sel]), np.abs(fwd[sel]), atol=1e-10)
        cf = mech.continuity_residual_series(grid, mspec, rho_series, lam_series, res.times)
        cb = mech.continuity_residual_series(
            grid, mspec, rho_series[::-1], -lam_series[::-1], -res.times[::-1]
        )
        assert np.allclose(np.abs(cb[::-1]), np.abs(cf), atol=1e-10)
