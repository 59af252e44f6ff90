import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blindbeam import baselines as B
from blindbeam import env as E
from blindbeam import rf


def make_env(n_bs=3, n_ue=2, n=4):
    return E.BeamEnv(E.four_junction_layout(n_bs), rf.UpaGeometry.half_wavelength(n, n, 28e9), n_ue)


def los_search_by_hand(env):
    """Loop over every assignment, scoring it with the environment's own SINR."""
    theta, phi = env.los_angles()
    ue = np.arange(env.n_ue)
    best = (-1.0, None)
    for assign in itertools.product(range(env.n_bs), repeat=env.n_ue):
        a = np.array(assign)
        act = E.ResolvedAction(a, theta[ue, a], phi[ue, a])
        rate = rf.mean_rate(env.sinr_of(act))
        if rate > best[0]:
            best = (rate, a)
    return best


def test_sweep_duty_factor_exact():
    cfg = B.SweepConfig()
    assert cfg.beam_count == 37
    assert abs(cfg.duty_factor - (10 - 37 * 0.2) / 10) < 1e-12
    assert abs(cfg.duty_factor - 0.26) < 1e-12


def test_sweep_grid_spans_half_plane():
    az = np.rad2deg(B.SweepConfig(beam_step_deg=7).azimuths_rad)
    assert az[0] == -90 and az[-1] == 90
    assert np.all(np.diff(az) > 0)
    with pytest.raises(ValueError, match="sweep exceeds frame"):
        _ = B.SweepConfig(beam_step_deg=1).duty_factor


def test_enumerate_assignments_count():
    cands = B.enumerate_assignments(2, 2)
    assert cands.shape == (4, 2)
    assert len({tuple(c) for c in cands}) == 4


@pytest.mark.parametrize("seed", range(10))
def test_los_oracle_matches_loop_over_assignments(seed):
    env = make_env()
    env.reset(seed)
    act, rate = B.env_los_oracle(env)
    want_rate, want_assign = los_search_by_hand(env)
    assert rate == pytest.approx(want_rate, rel=1e-12)
    np.testing.assert_array_equal(act.bs_index, want_assign)
    assert rf.mean_rate(env.sinr_of(act)) == pytest.approx(rate, rel=1e-12)


def test_single_link_oracle_rate_is_aligned_snr():
    env = make_env(n_bs=1, n_ue=1)
    env.reset(0)
    g2 = abs(env.link_gain[0, 0]) ** 2
    expect = math.log2(1 + env.radio.ptx_w * 16 * g2 / env.radio.noise_w)
    assert B.env_los_oracle(env)[1] == pytest.approx(expect, rel=1e-10)
    assert B.env_oracle(env)[1] == pytest.approx(expect, rel=1e-10)


@pytest.mark.parametrize("seed", range(10))
def test_full_oracle_improves_on_los_pointing(seed):
    env = make_env()
    env.reset(100 + seed)
    act, rate = B.env_oracle(env)
    act.validate(env.n_bs)
    assert rate >= B.env_los_oracle(env)[1] - 1e-12
    assert rf.mean_rate(env.sinr_of(act)) == pytest.approx(rate, rel=1e-10)


def test_greedy_fallback_is_valid_and_not_better_than_exhaustive(monkeypatch):
    env = make_env(n_bs=4, n_ue=3)
    rates = []
    for seed in range(5):
        env.reset(seed)
        exhaustive = B.env_los_oracle(env)[1]
        monkeypatch.setattr(B, "EXHAUSTIVE_LIMIT", 0)
        act, greedy = B.env_los_oracle(env)
        monkeypatch.setattr(B, "EXHAUSTIVE_LIMIT", 100_000)
        act.validate(env.n_bs)
        assert greedy <= exhaustive + 1e-12
        assert rf.mean_rate(env.sinr_of(act)) == pytest.approx(greedy, rel=1e-12)
        rates.append(greedy)
    assert min(rates) > 0


def test_sweep_picks_strongest_codeword_by_loop():
    env = make_env()
    env.reset(4)
    cfg = B.SweepConfig()
    act, duty = B.bs_sweep_policy(env.channels, cfg, env.geom)
    assert duty == cfg.duty_factor
    for i in range(env.n_ue):
        best, arg = -1.0, None
        for k in range(env.n_bs):
            for az in cfg.azimuths_rad:
                p = abs(env.channels[i, k] @ rf.array_response(az, cfg.sweep_elevation_rad, env.geom)) ** 2
                if p > best:
                    best, arg = p, (k, az)
        assert act.bs_index[i] == arg[0]
        assert act.azimuth_rad[i] == pytest.approx(arg[1])
    act.validate(env.n_bs)


def test_random_policy_ranges_and_reproducibility():
    a = B.random_policy(50, 4, np.random.default_rng(1))
    b = B.random_policy(50, 4, np.random.default_rng(1))
    np.testing.assert_array_equal(a.bs_index, b.bs_index)
    a.validate(4)
    assert set(a.bs_index) == {0, 1, 2, 3}


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_oracle_dominates_random_and_sweep(seed):
    env = make_env()
    env.reset(seed)
    _, best = B.env_oracle(env)
    rng = np.random.default_rng(seed)
    for _ in range(20):
        assert rf.mean_rate(env.sinr_of(B.random_policy(env.n_ue, env.n_bs, rng))) <= best + 1e-12
    assert rf.mean_rate(env.sinr_of(B.bs_sweep_policy(env.channels, B.SweepConfig(), env.geom)[0])) <= best + 1e-12
