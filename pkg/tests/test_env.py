import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blindbeam import env as E
from blindbeam import rf


def small_env(n_bs=3, n_ue=2, sigma=3.1):
    return E.BeamEnv(E.four_junction_layout(n_bs), rf.UpaGeometry.half_wavelength(4, 4, 28e9), n_ue,
                     pathloss=rf.PathLossParams(shadow_sigma_db=sigma))


def on_road(xy, segments, tol=1e-9):
    for (x0, y0), (x1, y1) in segments:
        if min(x0, x1) - tol <= xy[0] <= max(x0, x1) + tol and min(y0, y1) - tol <= xy[1] <= max(y0, y1) + tol:
            return True
    return False


def test_layout_shape():
    lay = E.four_junction_layout()
    assert lay.n_bs == 10
    assert len(lay.road_segments) == 12
    lo, hi = lay.bounding_box
    np.testing.assert_array_equal(lo, [0, 0])
    np.testing.assert_array_equal(hi, [400, 400])
    assert np.all(lay.bs_positions[:, 2] == 10.0)
    with pytest.raises(ValueError):
        E.four_junction_layout(11)
    with pytest.raises(ValueError):
        E.ScenarioLayout(np.zeros((1, 3)), (((0, 0), (1, 1)),))


def test_aod_angles_known_geometry():
    theta, phi, d = E.aod_angles([0, 0, 10], [3, 4, 10 - 5])
    assert d == pytest.approx(math.sqrt(50))
    assert theta == pytest.approx(math.acos(-5 / math.sqrt(50)))
    assert phi == pytest.approx(math.atan2(4, 3))
    with pytest.raises(ValueError, match="coincident"):
        E.aod_angles([1, 1, 1], [1, 1, 1])


@given(st.floats(-math.pi, math.pi), st.floats(math.pi / 2, math.pi))
def test_folding_keeps_response_and_range(phi, theta):
    geom = rf.UpaGeometry.half_wavelength(4, 4, 28e9)
    folded = float(E.fold_azimuth(phi))
    assert -math.pi / 2 - 1e-12 <= folded <= math.pi / 2 + 1e-12
    np.testing.assert_allclose(rf.array_response(folded, theta, geom), rf.array_response(phi, theta, geom),
                               atol=1e-12)


def test_resolved_action_validation():
    ok = E.ResolvedAction([0, 1], [math.pi / 2, math.pi], [-math.pi / 2, math.pi / 2])
    ok.validate(2)
    for bad in (E.ResolvedAction([2], [2.0], [0.0]), E.ResolvedAction([0], [1.0], [0.0]),
                E.ResolvedAction([0], [2.0], [2.0])):
        with pytest.raises(ValueError):
            bad.validate(2)


def test_build_state_layout_and_scaling():
    fp = np.array([[-60.0, -90.0], [-120.0, -180.0]])
    sinr = np.array([1.0, 3.0])
    raw = E.build_state(fp, sinr, None)
    np.testing.assert_array_equal(raw, [-60, -90, 1, -120, -180, 3])
    scaled = E.build_state(fp, sinr)
    np.testing.assert_allclose(scaled, [1.0, 0.5, 0.1, 0.0, -1.0, 0.2])
    with pytest.raises(ValueError):
        E.build_state(fp, [1.0])


def test_rf_signature_without_shadowing_is_link_budget():
    lay = E.four_junction_layout(3)
    ue = np.array([150.0, 100.0, 1.5])
    sig = E.compute_rf_signature(ue, lay, rf.PathLossParams(shadow_sigma_db=0), 28e9, 0.0, np.random.default_rng(0))
    d = np.linalg.norm(lay.bs_positions - ue, axis=1)
    np.testing.assert_allclose(sig, [-rf.path_loss_db(28e9, x, rf.PathLossParams()) for x in d])


def test_los_path_power_follows_path_loss():
    p = E.los_path([0, 0, 10], [30, 40, 10], rf.PathLossParams(shadow_sigma_db=0), 28e9, np.random.default_rng(1))
    assert abs(p.gain) ** 2 == pytest.approx(10 ** (-rf.path_loss_db(28e9, 50.0, rf.PathLossParams()) / 10))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.001, 5.0))
def test_walker_stays_on_roads_and_moves_at_speed(seed, dt):
    lay = E.four_junction_layout()
    walker = E.RoadWalker(lay.road_segments)
    rng = np.random.default_rng(seed)
    walker.place(4, rng)
    for _ in range(20):
        before = walker.positions_xy()
        walker.advance(dt, rng)
        after = walker.positions_xy()
        for p in after:
            assert on_road(p, lay.road_segments)
        # travelled path length is speed * dt, so the displacement cannot exceed it
        assert np.all(np.abs(after - before).sum(axis=1) <= walker.speed * dt + 1e-9)


def test_walker_turns_at_dead_end():
    walker = E.RoadWalker([((0.0, 0.0), (10.0, 0.0))])
    walker.place(1, np.random.default_rng(0), speed_range=(1.0, 1.0))
    walker.offset[:] = 9.5
    walker.direction[:] = 1
    walker.advance(1.0, np.random.default_rng(0))
    np.testing.assert_allclose(walker.positions_xy(), [[9.5, 0.0]])
    assert walker.direction[0] == -1
    with pytest.raises(ValueError):
        walker.advance(0.0, np.random.default_rng(0))


def test_channels_match_scalar_assembly():
    env = small_env()
    env.reset(3)
    theta, phi, _ = E.aod_angles(env.layout.bs_positions[None], env.ue_positions[:, None])
    for i in range(env.n_ue):
        for k in range(env.n_bs):
            path = rf.PropagationPath(complex(env.link_gain[i, k]), float(phi[i, k]), float(theta[i, k]))
            np.testing.assert_allclose(env.channels[i, k], rf.assemble_channel([path], env.geom)[0], atol=1e-20)


def test_unshadowed_link_gain_matches_path_loss():
    env = small_env(sigma=0.0)
    env.reset(0)
    d = np.linalg.norm(env.ue_positions[:, None] - env.layout.bs_positions[None], axis=2)
    np.testing.assert_allclose(np.abs(env.link_gain) ** 2, 10 ** (-rf.path_loss_db(28e9, d, env.pathloss) / 10))


def test_reset_is_deterministic_and_state_has_documented_width():
    a, b = small_env(), small_env()
    s1, s2 = a.reset(11), b.reset(11)
    assert s1.shape == (a.state_dim,) == (2 * 4,)
    np.testing.assert_array_equal(s1, s2)
    act = E.ResolvedAction([0, 1], [2.5, 2.5], [0.1, -0.1])
    for _ in range(5):
        (n1, r1), (n2, r2) = a.step(act), b.step(act)
        np.testing.assert_array_equal(n1, n2)
        assert r1 == r2
    assert not np.array_equal(small_env().reset(12), s1)


def test_step_reward_is_mean_rate_of_current_channels():
    env = small_env()
    env.reset(5)
    act = E.ResolvedAction([0, 2], [2.4, 2.6], [0.3, -0.7])
    expect = rf.mean_rate(env.sinr_of(act))
    state, reward = env.step(act)
    assert reward == pytest.approx(expect)
    np.testing.assert_allclose(state.reshape(2, 4)[:, -1], np.log2(1 + env.sinr) / 10)
    assert reward >= 0


def test_step_rejects_invalid_action():
    env = small_env()
    env.reset(0)
    with pytest.raises(ValueError):
        env.step(E.ResolvedAction([0, 5], [2.0, 2.0], [0.0, 0.0]))


def test_los_angles_are_folded_into_action_range():
    env = small_env(n_bs=10, n_ue=5)
    env.reset(2)
    theta, phi = env.los_angles()
    assert theta.shape == phi.shape == (5, 10)
    assert np.all((theta > math.pi / 2) & (theta <= math.pi))
    assert np.all(np.abs(phi) <= math.pi / 2)
