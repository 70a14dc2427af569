import copy
import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from uavrelay.errors import ConfigError
from uavrelay.mobility import wrap_angle
from uavrelay.scenario import (
    dump_config,
    from_dict,
    load_config,
    materialize,
    paper_preset,
    random_plan,
    seed_streams,
    to_dict,
)


def preset_dict(**top):
    d = to_dict(paper_preset())
    d.update(top)
    return d


class TestPreset:
    def test_values(self):
        cfg = paper_preset()
        assert cfg.n_steps == 5130
        assert cfg.refresh_every == 15
        assert cfg.n_trackers == 3
        assert cfg.planner_config().comm_range == 1e5
        assert cfg.planner_config().delta_set == pytest.approx((-math.pi / 6, 0.0, math.pi / 6))

    def test_filter_config(self):
        f = paper_preset().filter_config()
        assert f.dt == 2.0
        np.testing.assert_array_equal(f.sigma_gps, [3.0, 3.0, 0.0])


class TestSchema:
    def test_round_trip(self):
        cfg = paper_preset(seed=7, comm_range_m=5e4, algorithm="midpoint", horizon_steps=4)
        assert from_dict(json.loads(dump_config(cfg))) == cfg

    def test_load(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(dump_config(paper_preset(seed=3)))
        assert load_config(path) == paper_preset(seed=3)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "none.json")

    def test_bad_json(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text("{")
        with pytest.raises(ConfigError):
            load_config(path)

    @pytest.mark.parametrize(
        "mutate,field",
        [
            (lambda d: d.update(color="red"), "color"),
            (lambda d: d["planner"].update(beam=1), "planner.beam"),
            (lambda d: d["noise"].pop("sigma_gps_m"), "noise.sigma_gps_m"),
            (lambda d: d.pop("seed"), "seed"),
            (lambda d: d.update(seed=-1), "seed"),
            (lambda d: d.update(seed=1.5), "seed"),
            (lambda d: d.update(n_trackers=2), "initial_positions_m"),
            (lambda d: d.update(n_trackers=6, initial_positions_m=[[0, 0]] * 6), "n_trackers"),
            (lambda d: d.update(speed_class="warp"), "speed_class"),
            (lambda d: d.update(estimate_period_s=31.0), "estimate_period_s"),
            (lambda d: d.update(sim_duration_s=101.0), "sim_duration_s"),
            (lambda d: d.update(comm_range_m=0), "comm_range_m"),
            (lambda d: d.update(maneuver_turn_max_deg=181), "maneuver_turn_max_deg"),
            (lambda d: d["planner"].update(algorithm="greedy"), "planner.algorithm"),
            (lambda d: d["planner"].update(horizon_steps=-2), "planner.horizon_steps"),
            (lambda d: d["planner"].update(epsilon=2.0), "planner.epsilon"),
            (lambda d: d["planner"].update(replan_at_refresh_only="yes"), "planner.replan_at_refresh_only"),
            (lambda d: d["noise"].update(sigma_gps_m=[-1.0]), "noise"),
        ],
    )
    def test_rejects_with_field(self, mutate, field):
        d = copy.deepcopy(preset_dict())
        mutate(d)
        with pytest.raises(ConfigError) as err:
            from_dict(d)
        assert err.value.field == field

    def test_replace_routes_planner_keys(self):
        cfg = paper_preset().replace(algorithm="single_hop", horizon_steps=4, seed=9)
        assert cfg.planner.algorithm == "single_hop"
        assert cfg.planner.horizon_steps == 4
        assert cfg.seed == 9

    def test_frozen(self):
        with pytest.raises(AttributeError):
            paper_preset().seed = 3


class TestMaterialize:
    def test_deterministic(self):
        a, b = materialize(paper_preset(seed=11)), materialize(paper_preset(seed=11))
        assert a == b

    def test_seeds_differ(self):
        assert materialize(paper_preset(seed=1)).plans != materialize(paper_preset(seed=2)).plans

    def test_plans_independent_of_planner(self):
        a = materialize(paper_preset(seed=4))
        b = materialize(paper_preset(seed=4, algorithm="single_hop", horizon_steps=4))
        assert a.plans == b.plans

    def test_relay_starts_at_centroid(self):
        s = materialize(paper_preset())
        assert s.relay_initial.position == pytest.approx((500.0, 500.0 / 3))
        assert s.relay_initial.speed == 30.0

    def test_plans_cover_duration(self):
        s = materialize(paper_preset())
        for plan, start in zip(s.plans, s.config.initial_positions_m):
            assert plan.start == start
            assert plan.t_end == s.config.sim_duration_s
            assert all(seg.speed in (25.0, 30.0, 35.0) for seg in plan.segments)

    def test_streams_independent(self):
        a, b = seed_streams(5)
        assert a.random() != b.random()


class TestManeuverLaw:
    def headings(self, turn, seed=0, duration=3e5):
        rng = np.random.default_rng(seed)
        plan = random_plan((0.0, 0.0), (30.0,), duration, 300.0, rng, turn)
        return np.array([s.heading for s in plan.segments]), plan

    @given(st.floats(0.0, 180.0), st.integers(0, 1000))
    def test_turns_bounded(self, turn, seed):
        h, _ = self.headings(turn, seed, duration=2e4)
        steps = [abs(wrap_angle(b - a)) for a, b in zip(h, h[1:])]
        assert all(s <= math.radians(turn) + 1e-12 for s in steps)

    def test_zero_turn_keeps_heading(self):
        h, _ = self.headings(0.0)
        assert np.all(h == h[0])

    def test_uniform_when_unbounded(self):
        # chi-square on 12 heading bins; 99.9% critical value for 11 dof is 31.3
        h, _ = self.headings(180.0, duration=3e6)
        counts, _ = np.histogram(h, bins=12, range=(-math.pi, math.pi))
        expected = len(h) / 12
        assert np.sum((counts - expected) ** 2 / expected) < 31.3

    def test_period_jitter(self):
        _, plan = self.headings(45.0)
        gaps = np.diff([s.t_start for s in plan.segments])
        assert gaps.min() >= 270.0 and gaps.max() <= 330.0
        assert gaps.mean() == pytest.approx(300.0, rel=0.01)
