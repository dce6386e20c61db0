import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from bftqcd import _rng
from bftqcd.adversary import AttackerSpec, ImmediateAlarm, Silent
from bftqcd.analytics import theorem1_delay_upper
from bftqcd.cusum import ConfigurationError, StoppingRecord, bridge_minimum, run_to_stop
from bftqcd.fusion import (Centralized, FusionRule, GroupWise, KthAlarm, assign_groups, fuse,
                           kth_index, kth_order_statistic)
from bftqcd.signal_models import ContinuousModel, DiscreteModel
from bftqcd.simulate import Scenario, simulate, simulate_trial


def test_order_statistic_examples():
    assert kth_order_statistic([3, 1, 2], 2) == 2
    assert kth_order_statistic([0, 5, 7, math.inf], 2) == 5
    assert kth_order_statistic([0, math.inf, math.inf], 2) == math.inf


def test_rank_out_of_range():
    with pytest.raises(ConfigurationError):
        kth_order_statistic([1, 2], 3)
    with pytest.raises(ConfigurationError):
        kth_order_statistic([1, 2], 0)


def test_ties_go_to_lower_index():
    assert kth_index([4, 2, 2, 1], 2) == 1
    assert kth_index([4, 2, 2, 1], 3) == 2


@given(st.lists(st.floats(0, 1e6) | st.just(math.inf), min_size=1, max_size=20), st.data())
def test_order_statistic_matches_sorting(times, data):
    k = data.draw(st.integers(1, len(times)))
    assert kth_order_statistic(times, k) == sorted(times)[k - 1]


@pytest.mark.parametrize("n, sizes", [(9, [3, 3, 3]), (3, [1, 1, 1]), (10, [4, 3, 3])])
def test_assign_groups(n, sizes):
    groups = assign_groups(n)
    assert [len(g) for g in groups] == sizes
    assert np.array_equal(np.concatenate(groups), np.arange(n))


def test_fuse_examples():
    gw = FusionRule(GroupWise(), 1.0)
    assert fuse(gw, [4.0, 9.0, 6.5]).stop_time == 6.5
    assert fuse(gw, [math.inf, 2.0, 7.0]).stop_time == 7.0
    k2 = FusionRule(KthAlarm(2), 1.0)
    assert fuse(k2, [0.0, 5.0, 3.0, 8.0]).stop_time == 3.0
    with pytest.raises(ConfigurationError):
        fuse(gw, [1.0, 2.0])
    rec = StoppingRecord(True, 2.5, 0.1)
    assert fuse(FusionRule(Centralized(), 1.0), [rec]) is rec


def test_fuse_propagates_censoring():
    recs = [StoppingRecord(True, 1.0), StoppingRecord(False, math.inf, censored=True),
            StoppingRecord(False, math.inf, censored=True)]
    out = fuse(FusionRule(GroupWise(), 1.0), recs)
    assert not out.stopped and out.censored


def test_rule_validation():
    with pytest.raises(ConfigurationError):
        FusionRule(KthAlarm(3), 1.0).validate_for(9, n_max=1)
    with pytest.raises(ConfigurationError):
        FusionRule(KthAlarm(10), 1.0).validate_for(9)
    with pytest.raises(ConfigurationError):
        FusionRule(GroupWise(3, 4), 1.0).validate_for(9)


CONT = ContinuousModel(1.0, 0.01, 0.0)


def _all_detector_times(model, n, h, seed, trials):
    """Every sensor's local alarm time: KthAlarm(N) only stops after all of them."""
    sc = Scenario(model, n, FusionRule(KthAlarm(n), h))
    return simulate(sc, seed, trials).detector_times


def test_second_alarm_equals_second_order_statistic():
    times = _all_detector_times(CONT, 9, 3.0, 7, 80)
    fused = simulate(Scenario(CONT, 9, FusionRule(KthAlarm(2), 3.0)), 7, 80).stop_times
    assert np.array_equal(fused, np.sort(times, axis=1)[:, 1])


def test_immediate_alarm_reduces_to_first_honest_alarm():
    times = _all_detector_times(CONT, 9, 3.0, 8, 80)
    sc = Scenario(CONT, 9, FusionRule(KthAlarm(2), 3.0), AttackerSpec(ImmediateAlarm()))
    assert np.array_equal(simulate(sc, 8, 80).stop_times, times[:, :8].min(axis=1))


def test_silent_reduces_to_second_honest_alarm():
    times = _all_detector_times(CONT, 9, 3.0, 9, 80)
    sc = Scenario(CONT, 9, FusionRule(KthAlarm(2), 3.0), AttackerSpec(Silent()))
    assert np.array_equal(simulate(sc, 9, 80).stop_times, np.sort(times[:, :8], axis=1)[:, 1])


def test_group_silent_attacker_gives_max_of_other_groups():
    rule = FusionRule(GroupWise(3, 3), 3.0)
    all_groups = simulate(Scenario(CONT, 9, rule), 10, 60).detector_times
    sc = Scenario(CONT, 9, FusionRule(GroupWise(), 3.0), AttackerSpec(Silent(), compromised=(0,)))
    assert np.array_equal(simulate(sc, 10, 60).stop_times, all_groups[:, 1:].max(axis=1))


def _oracle_sensor_times(seed, trial, n, h, dt, rows):
    """Per-sensor CUSUM driven straight from the keyed streams, one sensor at a time."""
    g = _rng.stream(seed, trial, _rng.SIGNAL).standard_normal((rows, n))
    uni = _rng.stream(seed, trial, _rng.BRIDGE).random((rows, n, 2))
    out = []
    for c in range(n):
        du = math.sqrt(dt) * g[:, c] + 0.5 * dt  # post-change drift mu*dt minus mu^2*dt/2
        bmin = bridge_minimum(du, dt, 1.0 - uni[:, c, 0])
        rec = run_to_stop(iter([(du, bmin, uni[:, c, 1])]), h, rows, dt=dt, bridge_var=dt)
        out.append(rec.stop_time)
    return np.array(out)


def test_kth_alarm_matches_brute_force_oracle():
    n, h, dt = 5, 2.5, 0.01
    sc = Scenario(CONT, n, FusionRule(KthAlarm(2), h))
    for trial in range(10):
        oracle = _oracle_sensor_times(17, trial, n, h, dt, rows=20000)
        out = simulate_trial(sc, 17, trial)
        assert out.stop_time == pytest.approx(np.sort(oracle)[1], abs=1e-12)


@given(st.floats(1.0, 3.0), st.floats(0.0, 1.5))
def test_fused_time_monotone_in_threshold(h, extra):
    model = ContinuousModel(1.0, 0.01, 0.0)
    lo = simulate(Scenario(model, 9, FusionRule(KthAlarm(2), h)), 21, 8).stop_times
    hi = simulate(Scenario(model, 9, FusionRule(KthAlarm(2), h + extra)), 21, 8).stop_times
    assert np.all(hi >= lo)


def test_groupwise_single_group_is_centralized_discrete():
    m = DiscreteModel(change_time=0)
    a = simulate(Scenario(m, 9, FusionRule(Centralized(), 4.0)), 2, 64)
    b = simulate(Scenario(m, 9, FusionRule(GroupWise(1, 1), 4.0)), 2, 64)
    assert np.array_equal(a.stop_times, b.stop_times)


def test_exchangeability_of_compromised_index():
    model = ContinuousModel(1.0, 0.01, 0.0)
    rule = FusionRule(KthAlarm(2), 3.0)
    a = simulate(Scenario(model, 9, rule, AttackerSpec(Silent(), compromised=(8,))), 30, 1500)
    b = simulate(Scenario(model, 9, rule, AttackerSpec(Silent(), compromised=(0,))), 31, 1500)
    assert stats.ks_2samp(a.stop_times, b.stop_times).pvalue > 0.001


def test_second_alarm_honest_delay_below_order_statistic_bound():
    h = 3.0
    t = simulate(Scenario(CONT, 9, FusionRule(KthAlarm(2), h)), 40, 2000).stop_times
    assert t.mean() <= theorem1_delay_upper(h)
