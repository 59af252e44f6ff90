"""Reference policies that do not learn."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import rf
from .env import BeamEnv, ResolvedAction

EXHAUSTIVE_LIMIT = 100_000


@dataclass(frozen=True)
class SweepConfig:
    beam_step_deg: float = 5.0
    frame_period_s: float = 10e-3
    scan_period_s: float = 200e-6
    sweep_elevation_rad: float = 3 * np.pi / 4

    @property
    def azimuths_rad(self) -> np.ndarray:
        """Beam azimuths from -90 deg in ``beam_step_deg`` steps; a short last step clamps at +90."""
        n = int(np.ceil(180.0 / self.beam_step_deg - 1e-9)) + 1
        deg = np.minimum(-90.0 + self.beam_step_deg * np.arange(n), 90.0)
        return np.deg2rad(deg)

    @property
    def beam_count(self) -> int:
        return len(self.azimuths_rad)

    @property
    def duty_factor(self) -> float:
        # exact rational arithmetic on the decimal config values
        frame = Fraction(str(self.frame_period_s))
        busy = self.beam_count * Fraction(str(self.scan_period_s))
        if busy >= frame:
            raise ValueError("sweep exceeds frame")
        return float((frame - busy) / frame)


def random_policy(n_ue: int, n_bs: int, rng: np.random.Generator) -> ResolvedAction:
    """Blind uniform choice of BS, elevation and azimuth for every UE."""
    return ResolvedAction(rng.integers(n_bs, size=n_ue),
                          rng.uniform(np.pi / 2, np.pi, n_ue),
                          rng.uniform(-np.pi / 2, np.pi / 2, n_ue))


def enumerate_assignments(n_ue: int, n_bs: int) -> np.ndarray:
    return np.array(list(itertools.product(range(n_bs), repeat=n_ue)), dtype=int).reshape(-1, n_ue)


def pointing_gains(channels: np.ndarray, theta: np.ndarray, phi: np.ndarray, geom: rf.UpaGeometry) -> np.ndarray:
    """``G[i, k, j] = |H_{i,k} a(AoD_{j,k})|^2``: power at UE i from BS k pointing at UE j."""
    beams = rf.array_response(phi, theta, geom)  # (UE j, BS k, N_T)
    return np.abs(np.einsum("ikt,jkt->ikj", channels, beams)) ** 2


def assignment_rates(gains: np.ndarray, assignments: np.ndarray, ptx_w: float, noise_w: float) -> np.ndarray:
    """Mean rate of each candidate assignment under LOS pointing, interference included."""
    n_ue = gains.shape[0]
    ue = np.arange(n_ue)
    # rx[a, i, j]: power at UE i of the beam BS assignments[a, j] aims at UE j
    rx = ptx_w * gains[ue[None, :, None], assignments[:, None, :], ue[None, None, :]]
    signal = rx[:, ue, ue]
    interference = rx.sum(axis=2) - signal
    return np.log2(1.0 + signal / (interference + noise_w)).mean(axis=1)


def _greedy_assignment(gains, ptx_w, noise_w) -> np.ndarray:
    n_ue, n_bs, _ = gains.shape
    ue = np.arange(n_ue)
    best_link = gains[ue, :, ue].max(axis=1)
    order = np.argsort(-best_link, kind="stable")
    chosen = {}
    for i in order:
        best, best_rate = 0, -np.inf
        for k in range(n_bs):
            trial = {**chosen, int(i): k}
            idx = np.array(sorted(trial))
            sub = gains[np.ix_(idx, range(n_bs), idx)]
            rate = assignment_rates(sub, np.array([[trial[j] for j in idx]]), ptx_w, noise_w)[0]
            if rate > best_rate:
                best, best_rate = k, rate
        chosen[int(i)] = best
    return np.array([chosen[i] for i in range(n_ue)])


def los_oracle_policy(channels: np.ndarray, theta: np.ndarray, phi: np.ndarray, geom: rf.UpaGeometry,
                      ptx_w: float, noise_w: float) -> tuple[ResolvedAction, float]:
    """Best BS assignment with every beam pointed along its link's LOS departure direction.

    Exhaustive over all ``N_BS ** N_UE`` assignments up to 1e5 of them,
    otherwise greedy in descending order of each UE's best link gain.
    Returns the action and its mean rate.
    """
    n_ue, n_bs = theta.shape
    gains = pointing_gains(channels, theta, phi, geom)
    if n_bs**n_ue <= EXHAUSTIVE_LIMIT:
        cands = _assignments_cached(n_ue, n_bs)
        rates = assignment_rates(gains, cands, ptx_w, noise_w)
        best = int(np.argmax(rates))
        assign, rate = cands[best], float(rates[best])
    else:
        assign = _greedy_assignment(gains, ptx_w, noise_w)
        rate = float(assignment_rates(gains, assign[None, :], ptx_w, noise_w)[0])
    ue = np.arange(n_ue)
    return ResolvedAction(assign, theta[ue, assign], phi[ue, assign]), rate


_ASSIGNMENTS: dict = {}


def _assignments_cached(n_ue: int, n_bs: int) -> np.ndarray:
    key = (n_ue, n_bs)
    if key not in _ASSIGNMENTS:
        _ASSIGNMENTS[key] = enumerate_assignments(n_ue, n_bs)
    return _ASSIGNMENTS[key]


@dataclass(frozen=True)
class OracleSearch:
    """Beam search settings for :func:`oracle_policy`."""

    n_elevation: int = 16
    n_azimuth: int = 33
    max_sweeps: int = 8
    refine_halvings: int = 10

    def grid(self) -> tuple[np.ndarray, np.ndarray]:
        th, ph = np.meshgrid(np.linspace(np.pi / 2, np.pi, self.n_elevation),
                             np.linspace(-np.pi / 2, np.pi / 2, self.n_azimuth), indexing="ij")
        return th.ravel(), ph.ravel()


def _mean_rate_matrix(rx: np.ndarray, noise_w: float) -> float:
    signal = np.diag(rx)
    return float(np.mean(np.log2(1.0 + signal / (rx.sum(axis=1) - signal + noise_w))))


def _column_rates(rx: np.ndarray, j: int, cols: np.ndarray, noise_w: float) -> np.ndarray:
    """Mean rate for each candidate replacement ``cols[c]`` of beam ``j``'s received powers."""
    total = rx.sum(axis=1) - rx[:, j]  # (U,) from the other beams
    total = total[None, :] + cols  # (C, U)
    signal = np.broadcast_to(np.diag(rx), cols.shape).copy()
    signal[:, j] = cols[:, j]
    return np.mean(np.log2(1.0 + signal / (total - signal + noise_w)), axis=1)


def oracle_policy(channels: np.ndarray, theta: np.ndarray, phi: np.ndarray, geom: rf.UpaGeometry,
                  ptx_w: float, noise_w: float, search: OracleSearch = OracleSearch()) -> tuple[ResolvedAction, float]:
    """Genie policy with full channel knowledge.

    Starts from :func:`los_oracle_policy`, then improves one UE at a time
    over every (BS, beam) pair drawn from an angle grid plus the LOS
    directions, and finally polishes each beam's angles by pattern search.
    Every move is accepted only if the mean rate (interference included)
    goes up, so the result is never worse than LOS pointing.
    """
    n_ue, n_bs = theta.shape
    start, _ = los_oracle_policy(channels, theta, phi, geom, ptx_w, noise_w)
    bs = start.bs_index.copy()
    el, az = start.elevation_rad.astype(float).copy(), start.azimuth_rad.astype(float).copy()

    g_th, g_ph = search.grid()
    grid_pow = ptx_w * np.abs(np.einsum("ikt,bt->ikb", channels, rf.array_response(g_ph, g_th, geom))) ** 2
    los_pow = ptx_w * pointing_gains(channels, theta, phi, geom)  # (i, k, j)
    ue = np.arange(n_ue)

    def received(bs, el, az):
        beams = rf.array_response(az, el, geom)
        return ptx_w * np.abs(np.einsum("jt,ijt->ij", beams, channels[:, bs, :])) ** 2

    rx = received(bs, el, az)
    best = _mean_rate_matrix(rx, noise_w)
    n_grid = len(g_th)
    for _ in range(search.max_sweeps):
        improved = False
        for j in range(n_ue):
            # candidates: (k, grid beam) for all k, then (k, LOS towards UE j)
            cols = np.concatenate([grid_pow.transpose(1, 2, 0).reshape(n_bs * n_grid, n_ue),
                                   los_pow[:, :, j].T], axis=0)
            rates = _column_rates(rx, j, cols, noise_w)
            c = int(np.argmax(rates))
            if rates[c] > best + 1e-12:
                if c < n_bs * n_grid:
                    k, b = divmod(c, n_grid)
                    bs[j], el[j], az[j] = k, g_th[b], g_ph[b]
                else:
                    k = c - n_bs * n_grid
                    bs[j], el[j], az[j] = k, theta[j, k], phi[j, k]
                rx[:, j] = cols[c]
                best = float(rates[c])
                improved = True
        if not improved:
            break

    # local polish of each beam's angles with a shrinking compass search
    steps = np.array([np.pi / 2 / max(search.n_elevation - 1, 1), np.pi / max(search.n_azimuth - 1, 1)])
    moves = np.array([[1, 0], [-1, 0], [0, 1], [0, -1]], dtype=float)
    for j in range(n_ue):
        h = channels[:, bs[j], :]
        step = steps.copy()
        for _ in range(search.refine_halvings):
            trial = np.array([el[j], az[j]]) + moves * step
            trial[:, 0] = np.clip(trial[:, 0], np.pi / 2, np.pi)
            trial[:, 1] = np.clip(trial[:, 1], -np.pi / 2, np.pi / 2)
            beams = rf.array_response(trial[:, 1], trial[:, 0], geom)  # (4, N_T)
            cols = ptx_w * np.abs(h @ beams.T).T ** 2  # (4, U)
            rates = _column_rates(rx, j, cols, noise_w)
            c = int(np.argmax(rates))
            if rates[c] > best + 1e-12:
                el[j], az[j] = trial[c]
                rx[:, j] = cols[c]
                best = float(rates[c])
            else:
                step = step / 2
    return ResolvedAction(bs, el, az), best


def env_oracle(env: BeamEnv, search: OracleSearch = OracleSearch()) -> tuple[ResolvedAction, float]:
    theta, phi = env.los_angles()
    return oracle_policy(env.channels, theta, phi, env.geom, env.radio.ptx_w, env.radio.noise_w, search)


def env_los_oracle(env: BeamEnv) -> tuple[ResolvedAction, float]:
    theta, phi = env.los_angles()
    return los_oracle_policy(env.channels, theta, phi, env.geom, env.radio.ptx_w, env.radio.noise_w)


def bs_sweep_policy(channels: np.ndarray, cfg: SweepConfig, geom: rf.UpaGeometry) -> tuple[ResolvedAction, float]:
    """Exhaustive azimuth sweep at every BS; each UE takes its strongest (BS, beam) pair.

    Returns the action and the fraction of the frame left for data.
    """
    duty = cfg.duty_factor
    az = cfg.azimuths_rad
    codebook = rf.array_response(az, np.full_like(az, cfg.sweep_elevation_rad), geom)  # (B, N_T)
    power = np.abs(np.einsum("ikt,bt->ikb", channels, codebook)) ** 2
    n_ue, n_bs, n_beams = power.shape
    flat = power.reshape(n_ue, -1).argmax(axis=1)
    bs, beam = np.divmod(flat, n_beams)
    return ResolvedAction(bs, np.full(n_ue, cfg.sweep_elevation_rad), az[beam]), duty
