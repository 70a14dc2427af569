import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uavrelay.errors import ConfigError
from uavrelay.mobility import RelayState, enumerate_control_sequences, step_relay
from uavrelay.planner import (
    COM,
    HYBRID,
    MIDPOINT,
    NEAREST,
    SINGLE,
    Forecast,
    PlannerConfig,
    build_forecast,
    objective_midpoint,
    objective_nearest_point,
    objective_single_hop,
    partition_far,
    plan,
    rollout_tree,
)

RC = 1000.0
ORACLE = {SINGLE: objective_single_hop, NEAREST: objective_nearest_point, MIDPOINT: objective_midpoint}


def cfg(**kw):
    base = dict(comm_range=RC, step_dt=2.0, k_uncertainty=1.0, epsilon=1e-2)
    base.update(kw)
    return PlannerConfig(**base)


def stationary_forecast(centers, radius, F):
    c = np.asarray(centers, dtype=float)
    return Forecast(np.repeat(c[None], F, axis=0), np.full((F, len(c)), float(radius)), c.copy())


def candidate_paths(state, c):
    out = []
    for seq in enumerate_control_sequences(c.speed_set, c.delta_set, c.effective_horizon):
        s, path = state, []
        for u in seq:
            s = step_relay(s, u, c.step_dt)
            path.append(s.position)
        out.append((seq, path))
    return out


def oracle_values(algorithm, state, forecast, c):
    disks = [forecast.disks(j) for j in range(len(forecast.centers))]
    f = ORACLE[algorithm]
    kw = {} if algorithm == SINGLE else {"partition_centers": forecast.current}
    return np.array([f(path, disks, c, **kw) for _, path in candidate_paths(state, c)])


LAYOUT = [(700.0, 150.0), (-200.0, 800.0), (300.0, -900.0)]
START = RelayState((0.0, 0.0), 0.3, 30.0)


class TestConfig:
    @pytest.mark.parametrize(
        "kw,field",
        [
            ({"algorithm": "greedy"}, "algorithm"),
            ({"horizon_steps": -1}, "horizon_steps"),
            ({"horizon_steps": 1.5}, "horizon_steps"),
            ({"epsilon": 1.0}, "epsilon"),
            ({"speed_set": ()}, "speed_set"),
            ({"comm_range": 0.0}, "comm_range"),
        ],
    )
    def test_rejects(self, kw, field):
        with pytest.raises(ConfigError) as err:
            PlannerConfig(**kw)
        assert err.value.field == field

    def test_zero_horizon_looks_one_step(self):
        assert PlannerConfig(horizon_steps=0).effective_horizon == 1
        assert PlannerConfig(horizon_steps=4).n_candidates == 6561

    def test_candidate_cap(self):
        c = cfg(horizon_steps=7)
        with pytest.raises(ConfigError) as err:
            plan(SINGLE, stationary_forecast(LAYOUT, 50, 7), START, c)
        assert err.value.field == "horizon_steps"


class TestForecast:
    def test_constant_velocity(self):
        c = cfg(horizon_steps=3, k_uncertainty=0.5)
        means = np.array([[0, 0, 0, 10, 0, 0], [100, 50, 0, 0, -5, 0]], dtype=float)
        fc = build_forecast(means, [0.0, 4.0], c)
        np.testing.assert_allclose(fc.centers[:, 0], [[20, 0], [40, 0], [60, 0]])
        np.testing.assert_allclose(fc.centers[2, 1], [100, 20])
        np.testing.assert_allclose(fc.radii[:, 0], [10, 20, 30])
        np.testing.assert_allclose(fc.radii[:, 1], [15, 20, 25])

    def test_floor(self):
        fc = build_forecast(np.zeros((2, 6)), [0.0, 0.0], cfg(r_min=3.0))
        np.testing.assert_allclose(fc.radii, 3.0)


class TestPartition:
    def test_far_one(self):
        assert partition_far(np.array([[0, 0], [1, 0], [10, 0]])) == (2, [0, 1])

    def test_tie_lowest_index(self):
        assert partition_far(np.array([[0, 0], [2, 0]])) == (0, [1])

    def test_single(self):
        assert partition_far(np.array([[5, 5]])) == (0, [])


class TestRollout:
    @pytest.mark.parametrize("F", [1, 2, 3])
    def test_leaves_match_sequential_steps(self, F):
        c = cfg(horizon_steps=F)
        levels = rollout_tree(START, c)
        paths = candidate_paths(START, c)
        assert [len(lv) for lv in levels] == [9**j for j in range(1, F + 1)]
        for i, (_, path) in enumerate(paths):
            np.testing.assert_allclose(levels[-1][i], path[-1], atol=1e-9)
            for j in range(F):
                np.testing.assert_allclose(levels[j][i // 9 ** (F - 1 - j)], path[j], atol=1e-9)


class TestObjectiveOracles:
    @pytest.mark.parametrize("algorithm", [SINGLE, NEAREST, MIDPOINT])
    @pytest.mark.parametrize("F", [1, 2])
    def test_vectorized_matches_direct(self, algorithm, F):
        c = cfg(horizon_steps=F)
        fc = stationary_forecast(LAYOUT, 80.0, F)
        fc.centers[-1] += 15.0  # terminal targets differ from the current estimates
        got = plan(algorithm, fc, START, c)
        want = oracle_values(algorithm, START, fc, c)
        np.testing.assert_allclose(got.lagrange_terms + got.mayer_terms, want, atol=1e-9)
        assert got.index == int(np.argmax(want))
        assert got.objective == pytest.approx(want.max(), abs=1e-9)

    def test_exhaustive_optimality(self):
        c = cfg(horizon_steps=2)
        fc = stationary_forecast([(900.0, 0.0), (-600.0, 300.0), (0.0, -1100.0)], 120.0, 2)
        got = plan(MIDPOINT, fc, START, c)
        want = oracle_values(MIDPOINT, START, fc, c)
        assert np.all(got.objective >= want - 1e-12)
        seq, _ = candidate_paths(START, c)[got.index]
        assert got.controls == seq


class TestDecisions:
    def test_tie_goes_to_first(self):
        # target straight behind: both hard turns are equally good
        fc = stationary_forecast([(-5000.0, 0.0)], 1.0, 1)
        d = plan(COM, fc, RelayState((0.0, 0.0), 0.0, 30.0), cfg())
        totals = d.lagrange_terms + d.mayer_terms
        assert totals[0] == totals[2] == totals.max()
        assert d.index == 0

    def test_all_out_of_range_tie_broken_by_distance(self):
        fc = stationary_forecast([(1e5, 0.0), (1e5, 10.0)], 1.0, 1)
        d = plan(SINGLE, fc, RelayState((0.0, 0.0), 0.0, 30.0), cfg())
        assert d.lagrange == 0.0
        assert d.first.speed == 40.0 and d.first.heading_delta == 0.0

    def test_center_of_mass_nearest_leaf(self):
        c = cfg(horizon_steps=2)
        fc = stationary_forecast(LAYOUT, 50.0, 2)
        d = plan(COM, fc, START, c)
        leaves = rollout_tree(START, c)[-1]
        target = np.mean(LAYOUT, axis=0)
        assert d.index == int(np.argmin(np.hypot(*(leaves - target).T)))

    def test_hybrid_takes_single_hop_when_every_link_is_possible(self):
        fc = stationary_forecast([(300.0, 0.0), (0.0, 300.0), (-300.0, 0.0)], 50.0, 2)
        c = cfg(horizon_steps=2)
        d = plan(HYBRID, fc, START, c)
        assert d.branch == SINGLE
        assert d.controls == plan(SINGLE, fc, START, c).controls

    def test_hybrid_falls_back_to_midpoint(self):
        fc = stationary_forecast([(0.0, 0.0), (800.0, 0.0), (2600.0, 0.0)], 50.0, 2)
        c = cfg(horizon_steps=2)
        d = plan(HYBRID, fc, START, c)
        assert d.branch == MIDPOINT
        assert d.controls == plan(MIDPOINT, fc, START, c).controls

    def test_deterministic(self):
        c = cfg(horizon_steps=2)
        a = plan(HYBRID, stationary_forecast(LAYOUT, 80.0, 2), START, c)
        b = plan(HYBRID, stationary_forecast(LAYOUT, 80.0, 2), START, c)
        assert (a.index, a.objective, a.controls) == (b.index, b.objective, b.controls)

    def test_lookahead_beats_repeated_greedy(self):
        # stationary trackers: the 4-step search cannot score below the path
        # that four one-step decisions produce, since that path is a candidate
        layout = [(900.0, 200.0), (-300.0, 950.0), (200.0, -1000.0)]
        state = RelayState((-900.0, -600.0), 2.5, 30.0)
        for algorithm in (SINGLE, MIDPOINT):
            s, path = state, []
            for _ in range(4):
                u = plan(algorithm, stationary_forecast(layout, 100.0, 1), s, cfg()).first
                s = step_relay(s, u, 2.0)
                path.append(s.position)
            c4 = cfg(horizon_steps=4)
            fc4 = stationary_forecast(layout, 100.0, 4)
            disks = [fc4.disks(j) for j in range(4)]
            kw = {} if algorithm == SINGLE else {"partition_centers": fc4.current}
            greedy = ORACLE[algorithm](path, disks, c4, **kw)
            assert plan(algorithm, fc4, state, c4).objective >= greedy - 1e-12


tracker_xy = st.tuples(st.floats(-2500, 2500), st.floats(-2500, 2500))


class TestProperties:
    @settings(max_examples=40)
    @given(
        st.lists(tracker_xy, min_size=1, max_size=4),
        st.floats(1.0, 400.0),
        st.floats(-math.pi, math.pi),
        st.sampled_from([SINGLE, NEAREST, MIDPOINT, HYBRID, COM]),
    )
    def test_constraints_and_mayer_bound(self, layout, radius, heading, algorithm):
        c = cfg(horizon_steps=2)
        fc = stationary_forecast(layout, radius, 2)
        d = plan(algorithm, fc, RelayState((0.0, 0.0), heading, 30.0), c)
        for u in d.controls:
            assert u.speed in c.speed_set and u.heading_delta in c.delta_set
        assert len(d.controls) == 2
        if algorithm != COM:
            assert np.all(d.mayer_terms <= 0.0)
            spread = d.mayer_terms.max() - d.mayer_terms.min()
            # the terminal term only breaks near-ties of the connectivity sum
            assert d.lagrange >= d.lagrange_terms.max() - spread - 1e-12
            assert 0.0 <= d.lagrange <= 2.0 + 1e-12
