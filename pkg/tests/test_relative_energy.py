"""Relative energy: components, identity residual, coercivity, Gronwall."""

import math

import numpy as np
import pytest

from rieszlab import GridFunction, OperatorParams, ThetaQuadrature, make_grid
from rieszlab.operators import interaction_stress, interaction_tensor
from rieszlab.relative_energy import (
    coercivity_estimate,
    functional_derivative,
    gronwall_fit,
    identity_residuals,
    potential_energy,
    relative_energy,
    relative_internal_energy,
    relative_tensor,
    restrict_state,
    sample_pairs_on_grid,
    smooth_pair_sampler,
)
from rieszlab.simulation import SimConfig, init_state, simulate


def pair_runs(n, t_end=0.04, du=0.02, drho=0.05, kappa=0.5):
    """Perturbed run at resolution n against a background computed at 2n
    and restricted; output cadence scales with the grid."""
    dt_out = t_end / 8 * (64 / n)
    cfg = SimConfig(
        dim=1, n=n, t_end=t_end, output_interval=dt_out,
        kappa=kappa, rho_amplitude=0.3 + drho, u_amplitude=0.1 + du,
    )
    cfg_bar = SimConfig(
        dim=1, n=2 * n, t_end=t_end, output_interval=dt_out,
        kappa=kappa, rho_amplitude=0.3, u_amplitude=0.1,
    )
    traj = simulate(cfg)
    traj_bar = [restrict_state(s) for s in simulate(cfg_bar)]
    return traj, traj_bar


class TestRelativeInternalEnergy:
    def test_equal_densities(self):
        g = make_grid(1, 32, 0.5)
        rho = GridFunction(g, 1 + 0.2 * np.cos(2 * np.pi * g.axis_centers()), nonneg_hint=True)
        rel = relative_internal_energy(rho, rho, 2.0)
        assert np.abs(rel.values).max() == 0.0

    def test_quadratic_case_closed_form(self):
        g = make_grid(1, 16, 0.5)
        rho = GridFunction(g, np.full(16, 2.0), nonneg_hint=True)
        bar = GridFunction(g, np.ones(16), nonneg_hint=True)
        rel = relative_internal_energy(rho, bar, 2.0)
        np.testing.assert_allclose(rel.values, 1.0, rtol=1e-14)

    def test_gamma_53_oracle(self):
        g = make_grid(1, 16, 0.5)
        rho = GridFunction(g, np.full(16, 2.0), nonneg_hint=True)
        bar = GridFunction(g, np.ones(16), nonneg_hint=True)

        def h(r):
            return 1.5 * r ** (5 / 3)

        expected = h(2.0) - h(1.0) - 2.5 * 1.0 ** (2 / 3) * 1.0
        rel = relative_internal_energy(rho, bar, 5 / 3)
        np.testing.assert_allclose(rel.values, expected, rtol=1e-12)

    def test_nonnegative_random(self):
        rng = np.random.default_rng(0)
        g = make_grid(1, 64, 0.5)
        for gamma in (1.4, 2.0, 3.0):
            rho = GridFunction(g, rng.random(64) * 2, nonneg_hint=True)
            bar = GridFunction(g, 0.5 + rng.random(64), nonneg_hint=True)
            assert relative_internal_energy(rho, bar, gamma).values.min() >= 0.0

    def test_vacuum_background_rejected(self):
        g = make_grid(1, 16, 0.5)
        rho = GridFunction(g, np.ones(16), nonneg_hint=True)
        bar = GridFunction(g, np.zeros(16), nonneg_hint=True)
        with pytest.raises(ValueError, match="vacuum"):
            relative_internal_energy(rho, bar, 2.0)


class TestFunctionalDerivative:
    def test_no_interaction_quadratic(self):
        g = make_grid(1, 32, 0.5)
        rho = GridFunction(g, 1 + 0.1 * np.sin(2 * np.pi * g.axis_centers()), nonneg_hint=True)
        fd = functional_derivative(rho, 0.5, 2.0, 0.0)
        np.testing.assert_allclose(fd.values, 2.0 * rho.values, rtol=1e-14)

    def test_gateaux_limit_second_order(self):
        # central difference of the energy matches the pairing, with the
        # second-order error shrinking like delta^2
        rng = np.random.default_rng(1)
        g = make_grid(1, 64, 0.5)
        rho = GridFunction(g, 1 + 0.3 * rng.random(64), nonneg_hint=True)
        phi_vals = 0.5 + 0.3 * np.sin(2 * np.pi * g.axis_centers())
        phi = GridFunction(g, phi_vals)
        fd = functional_derivative(rho, 0.5, 3.0, 0.7)
        pairing = float(np.sum(fd.values * phi.values)) * g.cell_volume
        errs = []
        for delta in (1e-3, 1e-4):
            ep = potential_energy(GridFunction(g, rho.values + delta * phi_vals), 0.5, 3.0, 0.7)
            em = potential_energy(GridFunction(g, rho.values - delta * phi_vals), 0.5, 3.0, 0.7)
            errs.append(abs((ep - em) / (2 * delta) - pairing))
        assert errs[1] <= errs[0] * 0.02 + 1e-12

    def test_constant_density_constant_field(self):
        # h'(c) + kappa c int K over the cube: constant in space
        g = make_grid(1, 64, 0.5)
        rho = GridFunction(g, np.full(64, 1.3), nonneg_hint=True)
        fd = functional_derivative(rho, 0.5, 2.0, 0.8)
        assert np.abs(fd.values - fd.values[0]).max() <= 1e-12
        from rieszlab.operators import interaction_potential

        pot = interaction_potential(rho, OperatorParams(alpha=0.5, dim=1))
        expected = 2.0 * 1.3 + 0.8 * pot.values[0]
        assert fd.values[0] == pytest.approx(expected, rel=1e-13)


class TestRelativeTensor:
    def test_equal_states_zero(self):
        g = make_grid(1, 32, 0.5)
        rho = GridFunction(g, 1 + 0.2 * np.cos(2 * np.pi * g.axis_centers()), nonneg_hint=True)
        R = relative_tensor(rho, rho, 0.5, 2.0, 0.7)
        assert np.abs(R.entries).max() <= 1e-14

    def test_no_interaction_pressure_only(self):
        g = make_grid(1, 32, 0.5)
        rng = np.random.default_rng(2)
        rho = GridFunction(g, 1 + 0.3 * rng.random(32), nonneg_hint=True)
        bar = GridFunction(g, 1 + 0.1 * rng.random(32), nonneg_hint=True)
        R = relative_tensor(rho, bar, 0.5, 2.0, 0.0)
        p_rel = relative_internal_energy(rho, bar, 2.0).values  # gamma - 1 = 1
        np.testing.assert_allclose(R.entries[0], p_rel, rtol=1e-13)

    def test_quadratic_stress_identity(self):
        # S(rho) - S(bar) - DS(bar)[rho - bar] equals S(rho - bar)
        rng = np.random.default_rng(3)
        g = make_grid(1, 48, 0.5)
        p = OperatorParams(alpha=0.5, dim=1)
        tq = ThetaQuadrature.gauss_legendre(8)
        rho = GridFunction(g, 1 + 0.4 * rng.random(48), nonneg_hint=True)
        bar = GridFunction(g, 1 + 0.2 * rng.random(48), nonneg_hint=True)
        diff = GridFunction(g, rho.values - bar.values)
        frechet = 0.5 * (
            interaction_tensor(bar, diff, p, tq).entries
            + interaction_tensor(diff, bar, p, tq).entries
        )
        lhs = (
            interaction_stress(rho, p, tq).entries
            - interaction_stress(bar, p, tq).entries
            - frechet
        )
        rhs = interaction_stress(diff, p, tq).entries
        np.testing.assert_allclose(lhs, rhs, rtol=0, atol=1e-10)

    def test_trace_consistency(self):
        rng = np.random.default_rng(4)
        g = make_grid(1, 32, 0.5)
        rho = GridFunction(g, 1 + 0.3 * rng.random(32), nonneg_hint=True)
        bar = GridFunction(g, 1 + 0.1 * rng.random(32), nonneg_hint=True)
        tq = ThetaQuadrature.gauss_legendre(8)
        R = relative_tensor(rho, bar, 0.5, 2.0, 0.7, tq)
        p_rel = relative_internal_energy(rho, bar, 2.0).values
        diff = GridFunction(g, rho.values - bar.values)
        s_tr = interaction_stress(diff, OperatorParams(alpha=0.5, dim=1), tq).trace().values
        np.testing.assert_allclose(R.trace().values, p_rel + 0.7 * s_tr, rtol=0, atol=1e-12)


class TestRelativeEnergy:
    def test_identical_states_zero(self):
        s = init_state(SimConfig(dim=1, n=64, kappa=0.5))
        sample = relative_energy(s, s)
        assert sample.psi == 0.0

    def test_no_interaction_equal_velocity(self):
        s = init_state(SimConfig(dim=1, n=64, kappa=0.0, rho_amplitude=0.4))
        sb = init_state(SimConfig(dim=1, n=64, kappa=0.0, rho_amplitude=0.3))
        sample = relative_energy(s, sb)
        assert sample.interaction_rel == 0.0
        assert sample.psi >= 0.0

    def test_components_match_manual_recomputation(self):
        s = init_state(SimConfig(dim=1, n=64, kappa=0.5, rho_amplitude=0.4, u_amplitude=0.15))
        sb = init_state(SimConfig(dim=1, n=64, kappa=0.5))
        sample = relative_energy(s, sb)
        vol = s.grid.cell_volume
        du = s.momentum[0] / s.rho - sb.momentum[0] / sb.rho
        kin = 0.5 * float(np.sum(s.rho * du**2)) * vol
        assert sample.kinetic_rel == pytest.approx(kin, rel=1e-12)
        gap = relative_internal_energy(s.density_field, sb.density_field, s.gamma)
        assert sample.internal_rel == pytest.approx(gap.integral(), rel=1e-12)
        from rieszlab.operators import interaction_potential

        diff = GridFunction(s.grid, s.rho - sb.rho)
        pot = interaction_potential(diff, s.params())
        inter = 0.5 * 0.5 * float(np.sum(diff.values * pot.values)) * vol
        assert sample.interaction_rel == pytest.approx(inter, rel=1e-12)

    def test_quadratic_amplitude_scaling(self):
        base = dict(dim=1, n=128, kappa=0.5)
        s_bar = init_state(SimConfig(**base, rho_amplitude=0.3, u_amplitude=0.1))
        eps_list = (1e-1, 3e-2, 1e-2, 3e-3, 1e-3)
        psis = [
            relative_energy(
                init_state(SimConfig(**base, rho_amplitude=0.3 + e, u_amplitude=0.1 + e)), s_bar
            ).psi
            for e in eps_list
        ]
        slope = np.polyfit(np.log(eps_list), np.log(psis), 1)[0]
        assert slope == pytest.approx(2.0, abs=0.1)


class TestIdentityResiduals:
    def test_same_trajectory_zero(self):
        traj = simulate(SimConfig(dim=1, n=64, t_end=0.02, output_interval=0.005, kappa=0.5))
        times, res = identity_residuals(traj, traj)
        assert np.abs(res).max() <= 1e-12

    def test_residual_refines(self):
        maxres = {}
        for n in (64, 128):
            traj, traj_bar = pair_runs(n)
            _, res = identity_residuals(traj, traj_bar)
            maxres[n] = np.abs(res[1:-1]).max()
        assert maxres[64] / maxres[128] >= 3.5

    def test_mismatched_sampling_rejected(self):
        traj = simulate(SimConfig(dim=1, n=64, t_end=0.02, output_interval=0.005))
        with pytest.raises(ValueError):
            identity_residuals(traj, traj[:-1])


class TestCoercivity:
    def test_estimate_stable_under_refinement(self):
        est = coercivity_estimate(
            sample_pairs_on_grid(smooth_pair_sampler(seed=7), make_grid(1, 128, 0.5), 60),
            0.5,
            2.0,
        )
        est2 = coercivity_estimate(
            sample_pairs_on_grid(smooth_pair_sampler(seed=7), make_grid(1, 256, 0.5), 60),
            0.5,
            2.0,
        )
        assert est.c_star > 0
        assert abs(est2.c_star / est.c_star - 1.0) <= 0.2
        assert not est.out_of_hypothesis

    def test_degenerate_pairs_skipped(self):
        g = make_grid(1, 32, 0.5)
        rho = GridFunction(g, np.ones(32), nonneg_hint=True)
        with pytest.raises(ValueError, match="non-degenerate"):
            coercivity_estimate([(rho, rho)], 0.5, 2.0)

    def test_out_of_hypothesis_flagged(self):
        pairs = sample_pairs_on_grid(smooth_pair_sampler(seed=1), make_grid(1, 64, 0.5), 10)
        est = coercivity_estimate(pairs, 0.5, 1.2)  # below 2 - alpha/d = 1.5
        assert est.out_of_hypothesis

    def test_lambda_window(self):
        pairs = sample_pairs_on_grid(smooth_pair_sampler(seed=2), make_grid(1, 64, 0.5), 20)
        est = coercivity_estimate(pairs, 0.5, 2.0)
        kappa = 0.9 * est.coupling_window()
        assert est.lambda_for(kappa) > 0
        # psi >= lambda * internal gap + kinetic on the sampled pairs
        for rho, bar in pairs[:5]:
            gap = relative_internal_energy(rho, bar, 2.0).integral()
            diff = GridFunction(rho.grid, rho.values - bar.values)
            from rieszlab.operators import interaction_potential

            pot = interaction_potential(diff, OperatorParams(alpha=0.5, dim=1))
            inter = 0.5 * kappa * float(np.sum(diff.values * pot.values)) * rho.grid.cell_volume
            psi_pot = gap + inter
            assert psi_pot >= est.lambda_for(kappa) * gap - 1e-12


class TestGronwallFit:
    def test_identical_trajectories_zero_branch(self):
        rep = gronwall_fit([0.0, 0.1, 0.2], [0.0, 0.0, 0.0])
        assert rep.zero_initial
        assert not rep.identity_violation
        assert math.isnan(rep.c_fit)

    def test_zero_initial_with_growth_flags_violation(self):
        rep = gronwall_fit([0.0, 0.1], [0.0, 1.0])
        assert rep.identity_violation

    def test_envelope_touches_argmax(self):
        times = np.linspace(0.0, 1.0, 11)
        psis = 2.0 * np.exp(0.3 * times)
        rep = gronwall_fit(times, psis)
        assert rep.c_fit == pytest.approx(0.3, rel=1e-10)
        assert rep.envelope_ok

    def test_invariant_under_series_scaling(self):
        # the fit uses ratios to the start, so a quadratic amplitude
        # rescaling of the series leaves the rate untouched
        times = np.linspace(0.0, 1.0, 9)
        psis = 3.0 * np.exp(0.2 * times) * (1 + 0.01 * np.sin(7 * times))
        full = gronwall_fit(times, psis)
        half = gronwall_fit(times, 0.25 * psis)
        assert half.c_fit == pytest.approx(full.c_fit, rel=1e-12)

    def test_trajectory_pair_envelope(self):
        # a computed pair stays nonnegative under its fitted envelope
        # (rate stability under amplitude halving needs finer grids and is
        # exercised by the acceptance suite)
        traj, traj_bar = pair_runs(64, t_end=0.05)
        times = [s.time for s in traj]
        psis = [relative_energy(s, sb).psi for s, sb in zip(traj, traj_bar)]
        assert min(psis) >= 0.0
        rep = gronwall_fit(times, psis)
        assert rep.envelope_ok
        assert np.isfinite(rep.c_fit)


class TestRestrictState:
    def test_mass_preserved(self):
        s = init_state(SimConfig(dim=1, n=128, rho_amplitude=0.4))
        r = restrict_state(s)
        assert r.grid.n == 64
        assert r.mass() == pytest.approx(s.mass(), rel=1e-14)

    def test_2d_restriction(self):
        s = init_state(SimConfig(dim=2, n=32, alpha=1.0))
        r = restrict_state(s)
        assert r.grid.n == 16
        assert r.mass() == pytest.approx(s.mass(), rel=1e-14)
