import numpy as np
import pytest

from varq import hydrodynamics as hy
from varq import mechanics as mech
from varq import wavefunction as wv
from varq.errors import InvalidSpecError, StepRejectedError
from varq.numerics import build_grid, eigensolve_lowest, embed_interior


def ground_state_density(spec, grid, a=1.0):
    op = wv.schrodinger_operator(spec, grid, a)
    w, vecs = eigensolve_lowest(op, 1, grid.h)
    psi0 = embed_interior(grid, vecs[:, 0])
    return w[0], psi0**2


class TestDiffusionSpec:
    def test_requires_positive_a(self):
        with pytest.raises(InvalidSpecError):
            hy.DiffusionSpec(a=0.0)

    def test_g_must_be_finite_at_zero(self):
        with pytest.raises(InvalidSpecError):
            hy.DiffusionSpec(a=1.0, g=lambda r: 1.0 / r)

    def test_pole_branch_at_zero_coupling(self):
        d = hy.DiffusionSpec(a=2.0)
        assert np.allclose(d.rho_d(np.array([0.0, 0.5, 3.0])), 1.0)


class TestDiffusionCurrent:
    def test_flat_density_no_current(self, unit_mass_harmonic):
        grid = build_grid(-1, 1, 101)
        dspec = hy.DiffusionSpec(a=1.0)
        rho = np.full(grid.n, 0.5)
        cur = hy.diffusion_current(unit_mass_harmonic, dspec, grid, rho)
        assert np.allclose(cur, 0.0, atol=1e-14)

    def test_classical_mode_identically_zero(self, unit_mass_harmonic):
        grid = build_grid(-4, 4, 301)
        dspec = hy.DiffusionSpec(a=1.0, mode="classical")
        rho = np.exp(-grid.nodes**2)
        assert np.array_equal(
            hy.diffusion_current(unit_mass_harmonic, dspec, grid, rho), np.zeros(grid.n)
        )

    def test_pole_closed_form_at_zero_g(self, unit_mass_harmonic):
        # with g = 0 the regular combination is exactly a/2
        grid = build_grid(-4, 4, 401)
        a = 1.6
        dspec = hy.DiffusionSpec(a=a)
        rho = np.exp(-grid.nodes**2)
        cur = hy.diffusion_current(unit_mass_harmonic, dspec, grid, rho)
        from varq.numerics import grad_central

        expected = 0.5 * a * grad_central(rho, grid.h)
        assert np.allclose(cur, expected, atol=1e-12)


class TestEffectiveHamiltonian:
    def test_classical_flat_multiplier_free_potential(self, free_particle):
        grid = build_grid(-4, 4, 301)
        dspec = hy.DiffusionSpec(a=1.0, mode="classical")
        rho = mech.normalize_density(grid, np.exp(-grid.nodes**2))
        state = hy.HydroState(grid, rho, np.full(grid.n, 2.0))
        he = hy.effective_hamiltonian_density(free_particle, dspec, state)
        assert np.allclose(he, 0.0, atol=1e-12)

    def test_classical_density_linearity(self, unit_mass_harmonic):
        # with a flat multiplier the classical density only enters linearly
        grid = build_grid(-4, 4, 301)
        dspec = hy.DiffusionSpec(a=1.0, mode="classical")
        rho = mech.normalize_density(grid, np.exp(-grid.nodes**2))
        state = hy.HydroState(grid, rho, np.zeros(grid.n))
        he = hy.effective_hamiltonian_density(unit_mass_harmonic, dspec, state)
        assert np.allclose(he, rho * unit_mass_harmonic.potential_at(grid.nodes), atol=1e-14)

    def test_ground_state_energy(self, unit_mass_harmonic):
        grid = build_grid(-10, 10, 2000)
        w0, rho0 = ground_state_density(unit_mass_harmonic, grid)
        dspec = hy.DiffusionSpec(a=1.0)
        state = hy.HydroState(grid, rho0, np.zeros(grid.n))
        he = hy.effective_hamiltonian_density(unit_mass_harmonic, dspec, state)
        assert grid.h * np.sum(he) == pytest.approx(w0, abs=1e-4)


class TestMadelungStep:
    def test_stationary_pair(self, unit_mass_harmonic):
        grid = build_grid(-10, 10, 1200)
        w0, rho0 = ground_state_density(unit_mass_harmonic, grid)
        dspec = hy.DiffusionSpec(a=1.0)
        state = hy.HydroState(grid, rho0, np.zeros(grid.n))
        dt = 1e-4
        out = hy.madelung_step(unit_mass_harmonic, dspec, state, dt)
        assert np.max(np.abs(out.rho - state.rho)) < 1e-14
        mask = state.rho > 1e-12 * state.rho.max()
        lam_rate = (out.lam[mask] - state.lam[mask]) / dt
        assert np.max(np.abs(lam_rate + w0)) < 1e-6

    def test_classical_mode_matches_transport(self, unit_mass_harmonic):
        grid = build_grid(-4, 4, 501)
        rho = mech.normalize_density(grid, np.exp(-grid.nodes**2))
        lam = 0.3 * grid.nodes
        dspec = hy.DiffusionSpec(a=1.0, mode="classical")
        state = hy.HydroState(grid, rho, lam)
        ens = mech.ClassicalEnsemble(grid, rho, lam)
        dt = 1e-3
        out_h = hy.madelung_step(unit_mass_harmonic, dspec, state, dt)
        out_m = mech.transport_density(ens, unit_mass_harmonic, dt)
        assert np.max(np.abs(out_h.rho - out_m.rho)) <= 1e-12
        assert np.max(np.abs(out_h.lam - out_m.S)) <= 1e-12

    def test_coherent_centroid_oscillates_with_classical_period(self, unit_mass_harmonic):
        # half a period is enough to pin the oscillation against d cos(t)
        grid = build_grid(-7, 7, 601)
        q = grid.nodes
        d = 0.3
        rho = mech.normalize_density(grid, np.exp(-((q - d) ** 2)))
        dspec = hy.DiffusionSpec(a=1.0)
        state = hy.HydroState(grid, rho, np.zeros(grid.n))
        dt = 0.25 * grid.h**2
        ts, cens = [], []

        def obs(t, s):
            ts.append(t)
            cens.append(grid.h * np.sum(s.rho * q))

        hy.madelung_run(unit_mass_harmonic, dspec, state, np.pi, dt, observer=obs)
        cens = np.asarray(cens)
        ts = np.asarray(ts)
        assert np.max(np.abs(cens - d * np.cos(ts))) < 0.02 * d

    def test_node_formation_rejected(self, unit_mass_harmonic):
        grid = build_grid(-6, 6, 601)
        q = grid.nodes
        rho = np.exp(-(q**2))
        rho[295:305] = 1e-15  # interior hole below the relative floor
        rho = mech.normalize_density(grid, rho)
        dspec = hy.DiffusionSpec(a=1.0)
        state = hy.HydroState(grid, rho, np.zeros(grid.n))
        with pytest.raises(StepRejectedError) as err:
            hy.madelung_step(unit_mass_harmonic, dspec, state, 1e-5)
        assert err.value.location is not None

    def test_cfl_rejection(self, unit_mass_harmonic):
        grid = build_grid(-6, 6, 601)
        rho = mech.normalize_density(grid, np.exp(-grid.nodes**2))
        dspec = hy.DiffusionSpec(a=1.0)
        state = hy.HydroState(grid, rho, 50.0 * grid.nodes)
        with pytest.raises(StepRejectedError):
            hy.madelung_step(unit_mass_harmonic, dspec, state, 0.5)

    def test_probability_conserved_all_modes(self, unit_mass_harmonic):
        grid = build_grid(-8, 8, 401)
        rho = mech.normalize_density(grid, np.exp(-grid.nodes**2))
        for dspec in (hy.DiffusionSpec(a=1.0), hy.DiffusionSpec(a=1.0, mode="classical"),
                      hy.DiffusionSpec(a=1.0, g=lambda r: 0.05 * r, g_grad=lambda r: 0.05)):
            state = hy.HydroState(grid, rho, 0.1 * grid.nodes)
            for _ in range(20):
                state = hy.madelung_step(unit_mass_harmonic, dspec, state, 0.2 * grid.h**2)
                assert abs(grid.h * np.sum(state.rho) - 1.0) < 1e-9

    def test_small_g_continuity(self, unit_mass_harmonic):
        # the g(rho) coupling enters smoothly: a tiny g stays near g = 0
        grid = build_grid(-8, 8, 401)
        rho = mech.normalize_density(grid, np.exp(-grid.nodes**2))
        lam = 0.1 * grid.nodes
        eps = 1e-6
        s0 = hy.HydroState(grid, rho, lam)
        sg = hy.HydroState(grid, rho, lam)
        d0 = hy.DiffusionSpec(a=1.0)
        dg = hy.DiffusionSpec(a=1.0, g=lambda r: eps * r, g_grad=lambda r: eps)
        dt = 0.2 * grid.h**2
        for _ in range(50):
            s0 = hy.madelung_step(unit_mass_harmonic, d0, s0, dt)
            sg = hy.madelung_step(unit_mass_harmonic, dg, sg, dt)
        assert np.max(np.abs(s0.rho - sg.rho)) < 1e-6
        mask = s0.rho > 1e-12 * s0.rho.max()
        assert np.max(np.abs(s0.lam[mask] - sg.lam[mask])) < 1e-4


class TestQuantumClassicalContrast:
    def test_quantum_multiplier_update_differs_from_classical(self, unit_mass_harmonic):
        # same snapshot, same coupling: the quantum balance produces a
        # different multiplier update (the coupling is no longer inert)
        grid = build_grid(-6, 6, 601)
        rho = mech.normalize_density(grid, np.exp(-grid.nodes**2))
        lam = 0.2 * grid.nodes
        dt = 1e-5
        q_state = hy.HydroState(grid, rho, lam)
        out_q = hy.madelung_step(unit_mass_harmonic, hy.DiffusionSpec(a=1.0), q_state, dt)
        out_c = hy.madelung_step(
            unit_mass_harmonic, hy.DiffusionSpec(a=1.0, mode="classical"), q_state, dt
        )
        mask = rho > 1e-6 * rho.max()
        assert np.max(np.abs(out_q.lam[mask] - out_c.lam[mask])) > 1e-7


class TestReversal:
    def test_residuals_invariant_under_time_reversal(self, unit_mass_harmonic):
        grid = build_grid(-8, 8, 501)
        rho = mech.normalize_density(grid, np.exp(-((grid.nodes - 0.2) ** 2)))
        dspec = hy.DiffusionSpec(a=1.0)
        state = hy.HydroState(grid, rho, np.zeros(grid.n))
        dt = 0.2 * grid.h**2
        rhos, lams, times = [state.rho], [state.lam], [0.0]
        for k in range(6):
            state = hy.madelung_step(unit_mass_harmonic, dspec, state, dt)
            rhos.append(state.rho)
            lams.append(state.lam)
            times.append((k + 1) * dt)
        rhos, lams, times = np.array(rhos), np.array(lams), np.array(times)
        res, masks = hy.multiplier_residual_series(grid, unit_mass_harmonic, dspec, rhos, lams, times)
        res_m, masks_m = hy.multiplier_residual_series(
            grid, unit_mass_harmonic, dspec, rhos[::-1], -lams[::-1], -times[::-1]
        )
        sel = masks & masks_m[::-1]
        assert np.allclose(np.abs(res_m[::-1][sel]), np.abs(res[sel]), atol=1e-9)
        rc = mech.continuity_residual_series(grid, unit_mass_harmonic, rhos, lams, times)
        rc_m = mech.continuity_residual_series(
            grid, unit_mass_harmonic, rhos[::-1], -lams[::-1], -times[::-1]
        )
        assert np.allclose(np.abs(rc_m[::-1]), np.abs(rc), atol=1e-11)
