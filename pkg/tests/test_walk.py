"""Walk simulators: holding laws, jump chains, clocks, and file round-trips."""

import math

import numpy as np
import pytest
from scipy import stats

from rcmlab.environment import (ConductanceLaw, Environment, periodize,
                                restrict_to_box, site_open, total_rate)
from rcmlab.errors import ResourceLimitError
from rcmlab.walk import (Trajectory, discretize, first_holding_times,
                         load_trajectory, rescale, save_trajectory,
                         simulate_csrw, simulate_on_graph, simulate_vsrw,
                         step_distribution, time_change, walk_ensemble)


class TestStepDistribution:
    def test_lattice_is_uniform_over_four_neighbors(self, lattice_env):
        d = step_distribution(lattice_env, (0, 0))
        assert d.total == 4.0
        assert d.probabilities == (0.25, 0.25, 0.25, 0.25)
        assert sorted(d.targets) == [(-1, 0), (0, -1), (0, 1), (1, 0)]

    def test_probabilities_are_conductance_fractions(self, disordered_env):
        d = step_distribution(disordered_env, (0, 0))
        assert len(d.targets) == 2 * disordered_env.dim
        assert math.isclose(sum(d.probabilities), 1.0, rel_tol=1e-15)
        for prob, cond in zip(d.probabilities, d.conductances):
            assert prob == cond / d.total
            assert cond >= 1.0

    def test_targets_are_open_sites(self, disordered_env):
        d = step_distribution(disordered_env, (0, 0))
        for y in d.targets:
            assert site_open(disordered_env, y)


class TestHoldingTimes:
    def test_vsrw_holds_are_exponential_at_site_rate(self, disordered_env):
        rate = total_rate(disordered_env, (0, 0))
        holds = first_holding_times(disordered_env, (0, 0), 4000, run_seed=3)
        res = stats.kstest(holds, stats.expon(scale=1.0 / rate).cdf)
        assert res.pvalue > 1e-3

    def test_csrw_holds_are_unit_exponential(self, disordered_env):
        holds = first_holding_times(disordered_env, (0, 0), 4000, run_seed=3,
                                    csrw=True)
        res = stats.kstest(holds, stats.expon().cdf)
        assert res.pvalue > 1e-3

    def test_matches_simulated_first_hold(self, disordered_env):
        # same stream positions the simulator consumes, walk by walk
        holds = first_holding_times(disordered_env, (0, 0), 5, run_seed=12)
        for w in range(5):
            traj = simulate_vsrw(disordered_env, (0, 0), 5.0, 12, walk_index=w)
            assert traj.times[1] == holds[w]

    def test_deterministic(self, disordered_env):
        a = first_holding_times(disordered_env, (0, 0), 100, run_seed=8)
        b = first_holding_times(disordered_env, (0, 0), 100, run_seed=8)
        assert np.array_equal(a, b)


class TestTrajectory:
    def test_position_at_is_right_continuous(self, lattice_env):
        traj = simulate_vsrw(lattice_env, (0, 0), 10.0, run_seed=1)
        t1 = traj.times[1]
        assert tuple(traj.position_at(t1)) == tuple(traj.positions[1])
        assert tuple(traj.position_at(np.nextafter(t1, 0))) == (0, 0)

    def test_position_at_vector_query(self, lattice_env):
        traj = simulate_vsrw(lattice_env, (0, 0), 10.0, run_seed=1)
        out = traj.position_at(np.linspace(0, 10, 7))
        assert out.shape == (7, 2)
        assert tuple(out[0]) == (0, 0)

    def test_position_at_rejects_times_outside_horizon(self, lattice_env):
        traj = simulate_vsrw(lattice_env, (0, 0), 10.0, run_seed=1)
        with pytest.raises(ValueError):
            traj.position_at(-0.1)
        with pytest.raises(ValueError):
            traj.position_at(10.5)

    def test_lattice_clock_has_slope_four(self, lattice_env):
        # mu = 4 at every site, so A(t) = 4t to rounding
        traj = simulate_vsrw(lattice_env, (0, 0), 25.0, run_seed=2)
        assert np.allclose(traj.conductance_clock(), 4.0 * traj.times,
                           rtol=1e-12, atol=0)
        for t in (0.0, 1.7, 24.9, 25.0):
            assert math.isclose(traj.clock_at(t), 4.0 * t,
                                rel_tol=1e-12, abs_tol=1e-12)

    def test_clock_at_rejects_times_outside_horizon(self, lattice_env):
        traj = simulate_vsrw(lattice_env, (0, 0), 10.0, run_seed=2)
        with pytest.raises(ValueError):
            traj.clock_at(10.001)

    def test_counts_and_dim(self, lattice_env):
        traj = simulate_vsrw(lattice_env, (0, 0), 10.0, run_seed=1)
        assert traj.n_jumps == len(traj.times) - 1
        assert traj.dim == 2
        assert traj.positions.shape == (traj.n_jumps + 1, 2)

    def test_validation_rejects_bad_arrays(self, lattice_env):
        traj = simulate_vsrw(lattice_env, (0, 0), 5.0, run_seed=1)
        with pytest.raises(ValueError, match="kind"):
            Trajectory("srw", traj.times, traj.positions, traj.rates,
                       5.0, lattice_env, 1, 0)
        with pytest.raises(ValueError, match="ragged"):
            Trajectory("vsrw", traj.times[:-1], traj.positions, traj.rates,
                       5.0, lattice_env, 1, 0)
        with pytest.raises(ValueError, match="nondecreasing"):
            Trajectory("vsrw", traj.times[::-1].copy(), traj.positions,
                       traj.rates, 5.0, lattice_env, 1, 0)

    def test_rejects_negative_horizon(self, lattice_env):
        with pytest.raises(ValueError):
            simulate_vsrw(lattice_env, (0, 0), -1.0, run_seed=1)

    def test_event_cap_raises(self, lattice_env):
        with pytest.raises(ResourceLimitError, match="exceeded"):
            simulate_vsrw(lattice_env, (0, 0), 50.0, run_seed=1, max_events=10)


def test_vsrw_and_csrw_share_the_jump_chain(disordered_env):
    # hold and jump draws come from separate channels, so changing the
    # holding law must not perturb where the walk goes
    v = simulate_vsrw(disordered_env, (0, 0), 30.0, run_seed=7)
    c = simulate_csrw(disordered_env, (0, 0), 30.0, run_seed=7)
    k = min(len(v.times), len(c.times))
    assert k > 10
    assert np.array_equal(v.positions[:k], c.positions[:k])
    assert not np.array_equal(v.times[:k], c.times[:k])


class TestTimeChange:
    def test_reparametrizes_by_the_conductance_clock(self, disordered_env):
        traj = simulate_vsrw(disordered_env, (0, 0), 20.0, run_seed=4)
        changed = time_change(traj)
        assert changed.kind == "csrw"
        assert changed.origin == "time-change"
        assert np.array_equal(changed.positions, traj.positions)
        assert np.array_equal(changed.times, traj.conductance_clock())
        assert math.isclose(changed.horizon, traj.clock_at(traj.horizon),
                            rel_tol=1e-12)

    def test_lattice_times_scale_by_four(self, lattice_env):
        traj = simulate_vsrw(lattice_env, (0, 0), 20.0, run_seed=4)
        changed = time_change(traj)
        assert np.allclose(changed.times, 4.0 * traj.times, rtol=1e-12)

    def test_rejects_csrw_input(self, lattice_env):
        traj = simulate_csrw(lattice_env, (0, 0), 5.0, run_seed=4)
        with pytest.raises(ValueError):
            time_change(traj)

    def test_time_changed_holds_are_unit_exponential(self, disordered_env):
        # the defining property: the clock turns Exp(mu) holds into Exp(1)
        holds = []
        for w in range(200):
            traj = simulate_vsrw(disordered_env, (0, 0), 4.0, run_seed=6,
                                 walk_index=w)
            holds.append(np.diff(time_change(traj).times))
        pooled = np.concatenate(holds)
        assert pooled.size > 2000
        res = stats.kstest(pooled, stats.expon().cdf)
        assert res.pvalue > 1e-3


class TestRescaleDiscretize:
    def test_rescale_samples_the_diffusive_scaling(self, lattice_env):
        traj = simulate_vsrw(lattice_env, (0, 0), 100.0, run_seed=5)
        s, y = rescale(traj, eps=0.1, n_points=11)
        assert s.shape == (11,) and y.shape == (11, 2)
        assert np.array_equal(y[0], [0.0, 0.0])
        assert np.allclose(y[-1], 0.1 * traj.position_at(100.0))
        mid = 0.1 * traj.position_at(0.5 / 0.01)
        assert np.allclose(y[5], mid)

    def test_rescale_validation(self, lattice_env):
        traj = simulate_vsrw(lattice_env, (0, 0), 100.0, run_seed=5)
        with pytest.raises(ValueError):
            rescale(traj, eps=0.0)
        with pytest.raises(ValueError, match="too short"):
            rescale(traj, eps=0.05)

    def test_discretize_matches_integer_queries(self, lattice_env):
        traj = simulate_vsrw(lattice_env, (0, 0), 30.0, run_seed=5)
        pos = discretize(traj, 30)
        assert pos.shape == (31, 2)
        assert np.array_equal(pos[17], traj.position_at(17.0))
        with pytest.raises(ValueError):
            discretize(traj, 31)


class TestEnsemble:
    def test_deterministic(self, disordered_env):
        grid = np.array([1.0, 5.0, 10.0])
        a = walk_ensemble(disordered_env, 8, grid, run_seed=2)
        b = walk_ensemble(disordered_env, 8, grid, run_seed=2)
        assert np.array_equal(a.positions, b.positions)
        assert np.array_equal(a.clock, b.clock)
        assert np.array_equal(a.events, b.events)

    def test_matches_single_walk_paths(self, disordered_env):
        # the grid sampler and the path recorder must be the same process
        grid = np.array([0.5, 2.0, 7.0])
        ens = walk_ensemble(disordered_env, 4, grid, run_seed=9)
        for w in range(4):
            traj = simulate_vsrw(disordered_env, (0, 0), 7.0, 9, walk_index=w)
            assert np.array_equal(ens.positions[w], traj.position_at(grid))
            clock = [traj.clock_at(t) for t in grid]
            assert np.allclose(ens.clock[w], clock, rtol=1e-12)

    def test_fresh_env_reseeds_per_walk(self, disordered_env):
        grid = np.array([2.0, 6.0])
        ens = walk_ensemble(disordered_env, 3, grid, run_seed=9,
                            fresh_env_per_walk=True)
        for w in range(3):
            env_w = Environment(dim=2, p=0.7, law=ConductanceLaw.pareto(3.0),
                                seed=disordered_env.seed + w)
            traj = simulate_vsrw(env_w, (0, 0), 6.0, 9, walk_index=w)
            assert np.array_equal(ens.positions[w], traj.position_at(grid))

    def test_lattice_clock_and_msd(self, lattice_env):
        grid = np.array([5.0, 10.0, 20.0])
        ens = walk_ensemble(lattice_env, 2000, grid, run_seed=1)
        assert np.allclose(ens.clock, 4.0 * grid[None, :], rtol=1e-9)
        # E|X_t|^2 = 4t; |X_t|^2 has std ~ 4t, so 2000 walks give ~9% at 4 s.e.
        assert np.allclose(ens.msd(), 4.0 * grid, rtol=0.12)

    def test_displacements_slice(self, lattice_env):
        grid = np.array([2.0, 8.0])
        ens = walk_ensemble(lattice_env, 5, grid, run_seed=1)
        assert np.array_equal(ens.displacements(), ens.positions[:, -1, :])
        assert ens.displacements(0).dtype == np.float64

    def test_grid_validation(self, lattice_env):
        with pytest.raises(ValueError):
            walk_ensemble(lattice_env, 2, [], run_seed=0)
        with pytest.raises(ValueError):
            walk_ensemble(lattice_env, 2, [1.0, 1.0], run_seed=0)

    def test_event_cap_names_the_walk(self, lattice_env):
        with pytest.raises(ResourceLimitError, match=r"walk \d+ exceeded"):
            walk_ensemble(lattice_env, 3, [50.0], run_seed=1, max_events=10)


class TestGraphWalk:
    def test_box_displacements_track_vertex_moves(self, lattice_env):
        box = restrict_to_box(lattice_env, (0, 0), 6)
        gw = simulate_on_graph(box, box.index[(0, 0)], 8.0, run_seed=3)
        assert gw.vertex_indices.max() < box.n_vertices
        walked = box.vertices[gw.vertex_indices] - np.array([0, 0])
        assert np.array_equal(walked, gw.displacements)

    def test_torus_winding_unfolds_the_period(self):
        env = Environment(dim=1, p=1.0, law=ConductanceLaw.constant(1.0),
                          seed=0)
        ring = periodize(env, radius=3)
        gw = simulate_on_graph(ring, ring.index[(0,)], 400.0, run_seed=11)
        vd = ring.vertices[gw.vertex_indices] - ring.vertices[gw.vertex_indices[0]]
        assert np.all((vd - gw.displacements) % 7 == 0)
        # unfolded coordinate leaves the fundamental domain
        assert np.abs(gw.displacements).max() > 3

    def test_jump_frequencies_match_conductances(self):
        env = Environment(dim=1, p=1.0, law=ConductanceLaw.pareto(3.0), seed=4)
        tor = periodize(env, radius=2)
        gw = simulate_on_graph(tor, 0, 2500.0, run_seed=5)
        src, dst = gw.vertex_indices[:-1], gw.vertex_indices[1:]
        v = int(np.bincount(src).argmax())
        rate = tor.full_rates()[v]
        observed, expected = [], []
        for nbr, cond, _ in tor.half_edges(v):
            n = int(np.sum((src == v) & (dst == nbr)))
            observed.append(n)
            expected.append(cond / rate)
        total = sum(observed)
        assert total > 500
        res = stats.chisquare(observed, [q * total for q in expected])
        assert res.pvalue > 1e-3

    def test_vsrw_holds_scale_with_vertex_rates(self):
        env = Environment(dim=1, p=1.0, law=ConductanceLaw.pareto(3.0), seed=4)
        tor = periodize(env, radius=2)
        gw = simulate_on_graph(tor, 0, 1500.0, run_seed=6)
        holds = np.diff(gw.times)
        # scaling each hold by its source rate collapses them onto Exp(1)
        scaled = holds * gw.rates[:-1]
        res = stats.kstest(scaled, stats.expon().cdf)
        assert res.pvalue > 1e-3

    def test_csrw_holds_are_unit_exponential(self):
        env = Environment(dim=1, p=1.0, law=ConductanceLaw.pareto(3.0), seed=4)
        tor = periodize(env, radius=2)
        gw = simulate_on_graph(tor, 0, 1500.0, run_seed=6, csrw=True)
        res = stats.kstest(np.diff(gw.times), stats.expon().cdf)
        assert res.pvalue > 1e-3

    def test_event_cap(self, lattice_env):
        box = restrict_to_box(lattice_env, (0, 0), 4)
        with pytest.raises(ValueError, match="exceeded"):
            simulate_on_graph(box, 0, 100.0, run_seed=1, max_events=10)


class TestSaveLoad:
    def test_roundtrip(self, disordered_env, tmp_path):
        traj = simulate_vsrw(disordered_env, (1, 0), 12.0, run_seed=7,
                             walk_index=3)
        save_trajectory(traj, tmp_path / "traj.npz")
        back = load_trajectory(tmp_path / "traj.npz")
        assert back.kind == "vsrw"
        assert np.array_equal(back.times, traj.times)
        assert np.array_equal(back.positions, traj.positions)
        assert np.array_equal(back.rates, traj.rates)
        assert back.horizon == traj.horizon
        assert back.run_seed == 7 and back.walk_index == 3
        assert back.env.to_json() == disordered_env.to_json()

    def test_roundtrip_preserves_time_change_origin(self, lattice_env,
                                                    tmp_path):
        changed = time_change(simulate_vsrw(lattice_env, (0, 0), 5.0, 1))
        save_trajectory(changed, tmp_path / "tc")
        back = load_trajectory(tmp_path / "tc")
        assert back.origin == "time-change"
        assert back.kind == "csrw"
        assert np.array_equal(back.times, changed.times)
