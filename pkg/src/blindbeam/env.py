"""Four-junction street scenario with mobile UEs and the MDP interface.

The agent observes, per UE, the beacon power received at every BS (the RF
fingerprint) plus the SINR of the last downlink transmission. An action
picks a serving BS and an (elevation, azimuth) beam for every UE; the
reward is the mean Shannon rate of that transmission.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import rf

# 400 m x 400 m block, roads at x, y in {100, 300}; BSs sit 5 m off the road
# centre line. The first four cover the inner square.
DEFAULT_BS_XY = (
    (200.0, 95.0), (200.0, 305.0), (95.0, 200.0), (305.0, 200.0),
    (40.0, 105.0), (360.0, 95.0), (105.0, 360.0), (95.0, 40.0),
    (305.0, 360.0), (360.0, 305.0),
)


@dataclass(frozen=True)
class ScenarioLayout:
    bs_positions: np.ndarray  # (N_BS, 3)
    road_segments: tuple  # ((x0, y0), (x1, y1)) axis-aligned
    bs_height_m: float = 10.0
    ue_height_m: float = 1.5
    cell_radius_m: float = 100.0

    def __post_init__(self):
        pos = np.asarray(self.bs_positions, dtype=float)
        if pos.ndim != 2 or pos.shape[1] != 3 or len(pos) == 0:
            raise ValueError("bs_positions must be a non-empty (N_BS, 3) array")
        if not self.bs_height_m > self.ue_height_m > 0:
            raise ValueError("need bs_height_m > ue_height_m > 0")
        for (x0, y0), (x1, y1) in self.road_segments:
            if x0 != x1 and y0 != y1:
                raise ValueError(f"road segment {(x0, y0)}-{(x1, y1)} is not axis-aligned")
        object.__setattr__(self, "bs_positions", pos)

    @property
    def n_bs(self) -> int:
        return len(self.bs_positions)

    @property
    def bounding_box(self):
        pts = np.array([p for seg in self.road_segments for p in seg])
        return pts.min(axis=0), pts.max(axis=0)


def four_junction_layout(n_bs: int = 10, size_m: float = 400.0, bs_height_m: float = 10.0,
                         ue_height_m: float = 1.5) -> ScenarioLayout:
    if not 1 <= n_bs <= len(DEFAULT_BS_XY):
        raise ValueError(f"four-junction layout supports 1..{len(DEFAULT_BS_XY)} BSs")
    lo, hi = size_m / 4.0, 3.0 * size_m / 4.0
    cuts = (0.0, lo, hi, size_m)
    segs = []
    for c in (lo, hi):
        for a, b in zip(cuts[:-1], cuts[1:]):
            segs.append(((a, c), (b, c)))  # horizontal road y = c
            segs.append(((c, a), (c, b)))  # vertical road x = c
    scale = size_m / 400.0
    xy = np.array(DEFAULT_BS_XY[:n_bs]) * scale
    bs = np.column_stack([xy, np.full(n_bs, bs_height_m)])
    return ScenarioLayout(bs, tuple(segs), bs_height_m, ue_height_m)


@dataclass(frozen=True)
class ResolvedAction:
    bs_index: np.ndarray
    elevation_rad: np.ndarray
    azimuth_rad: np.ndarray

    def __post_init__(self):
        for name in ("bs_index", "elevation_rad", "azimuth_rad"):
            object.__setattr__(self, name, np.atleast_1d(np.asarray(getattr(self, name))))
        object.__setattr__(self, "bs_index", self.bs_index.astype(int))

    def validate(self, n_bs: int) -> None:
        tol = 1e-12
        if np.any(self.bs_index < 0) or np.any(self.bs_index >= n_bs):
            raise ValueError(f"bs_index outside [0, {n_bs})")
        th, ph = self.elevation_rad, self.azimuth_rad
        if np.any(th < np.pi / 2 - tol) or np.any(th > np.pi + tol):
            raise ValueError("elevation outside [pi/2, pi]")
        if np.any(np.abs(ph) > np.pi / 2 + tol):
            raise ValueError("azimuth outside [-pi/2, pi/2]")


def fold_azimuth(phi):
    """Map azimuth into [-pi/2, pi/2] without changing the yz-plane array response.

    The steering vector depends on azimuth only through sin(phi), so
    phi and pi - phi are indistinguishable to the array.
    """
    phi = np.asarray(phi, dtype=float)
    out = np.where(phi > np.pi / 2, np.pi - phi, phi)
    return np.where(out < -np.pi / 2, -np.pi - out, out)


def aod_angles(bs_position, ue_position):
    """Geometric departure angles (elevation from +z, azimuth from +x) and distance."""
    delta = np.asarray(ue_position, dtype=float) - np.asarray(bs_position, dtype=float)
    dist = np.linalg.norm(delta, axis=-1)
    if np.any(dist == 0):
        raise ValueError("coincident BS and UE positions")
    theta = np.arccos(np.clip(delta[..., 2] / dist, -1.0, 1.0))
    phi = np.arctan2(delta[..., 1], delta[..., 0])
    return theta, phi, dist


def los_path(bs_position, ue_position, pathloss: rf.PathLossParams, freq_hz: float,
             rng: np.random.Generator) -> rf.PropagationPath:
    """Single LOS ray with |alpha|^2 = 10^(-PL/10) (shadowed) and a uniform phase."""
    theta, phi, dist = aod_angles(bs_position, ue_position)
    shadow = rng.normal(0.0, pathloss.shadow_sigma_db)
    pl = rf.path_loss_db(freq_hz, dist, pathloss, shadow)
    gain = 10.0 ** (-pl / 20.0) * np.exp(1j * rng.uniform(0.0, 2.0 * np.pi))
    return rf.PropagationPath(complex(gain), float(phi), float(theta))


def compute_rf_signature(ue_position, layout: ScenarioLayout, pathloss: rf.PathLossParams,
                         freq_hz: float, beacon_power_dbm: float, rng: np.random.Generator) -> np.ndarray:
    """Beacon power (dBm) received at each BS from one UE, shadowed per BS."""
    dist = np.linalg.norm(layout.bs_positions - np.asarray(ue_position, dtype=float), axis=1)
    shadow = rng.normal(0.0, pathloss.shadow_sigma_db, layout.n_bs)
    return beacon_power_dbm - rf.path_loss_db(freq_hz, dist, pathloss, shadow)


@dataclass(frozen=True)
class StateScaling:
    fp_offset_dbm: float = 120.0
    fp_scale_db: float = 60.0
    rate_scale: float = 10.0


def build_state(fingerprints, sinrs, scaling: StateScaling | None = StateScaling()) -> np.ndarray:
    """Pack per-UE ``[fingerprint..., sinr]`` blocks into one vector.

    With ``scaling`` set, fingerprints map through ``(x + offset) / scale``
    and SINRs through ``log2(1 + sinr) / rate_scale``.
    """
    fp = np.atleast_2d(np.asarray(fingerprints, dtype=float))
    sinrs = np.asarray(sinrs, dtype=float).reshape(-1)
    if fp.shape[0] != sinrs.shape[0]:
        raise ValueError(f"{fp.shape[0]} fingerprints but {sinrs.shape[0]} SINR values")
    if scaling is not None:
        fp = (fp + scaling.fp_offset_dbm) / scaling.fp_scale_db
        sinrs = np.log2(1.0 + sinrs) / scaling.rate_scale
    return np.column_stack([fp, sinrs]).reshape(-1)


class RoadWalker:
    """Random-waypoint motion restricted to a network of road segments."""

    def __init__(self, segments):
        self.segments = [(np.asarray(a, float), np.asarray(b, float)) for a, b in segments]
        self.lengths = np.array([np.linalg.norm(b - a) for a, b in self.segments])
        self._starts = np.array([a for a, _ in self.segments])
        self._dirs = np.array([b - a for a, b in self.segments])
        nodes: list[tuple] = []
        self.seg_nodes = []
        for a, b in self.segments:
            ends = []
            for p in (tuple(a), tuple(b)):
                if p not in nodes:
                    nodes.append(p)
                ends.append(nodes.index(p))
            self.seg_nodes.append(tuple(ends))
        self.incident = {n: [s for s, ends in enumerate(self.seg_nodes) if n in ends]
                         for n in range(len(nodes))}
        # per-UE state
        self.seg = np.zeros(0, int)
        self.offset = np.zeros(0)
        self.direction = np.zeros(0, int)
        self.speed = np.zeros(0)

    def place(self, n_ue: int, rng: np.random.Generator, speed_range=(1.0, 15.0)) -> None:
        p = self.lengths / self.lengths.sum()
        self.seg = rng.choice(len(self.segments), n_ue, p=p)
        self.offset = rng.uniform(0.0, 1.0, n_ue) * self.lengths[self.seg]
        self.direction = rng.choice([-1, 1], n_ue)
        self.speed = rng.uniform(*speed_range, n_ue)

    def positions_xy(self) -> np.ndarray:
        start = self._starts[self.seg]
        return start + self._dirs[self.seg] * (self.offset / self.lengths[self.seg])[:, None]

    def advance(self, dt_s: float, rng: np.random.Generator) -> None:
        if dt_s <= 0:
            raise ValueError("dt_s must be positive")
        for i in range(len(self.seg)):
            remaining = self.speed[i] * dt_s
            while True:
                s, d = self.seg[i], self.direction[i]
                to_node = self.lengths[s] - self.offset[i] if d > 0 else self.offset[i]
                if remaining < to_node:
                    self.offset[i] += d * remaining
                    break
                remaining -= to_node
                node = self.seg_nodes[s][1 if d > 0 else 0]
                options = [x for x in self.incident[node] if x != s]
                if not options:
                    # dead end: turn around
                    self.offset[i] = self.lengths[s] if d > 0 else 0.0
                    self.direction[i] = -d
                    continue
                nxt = options[rng.integers(len(options))]
                self.seg[i] = nxt
                if self.seg_nodes[nxt][0] == node:
                    self.offset[i], self.direction[i] = 0.0, 1
                else:
                    self.offset[i], self.direction[i] = self.lengths[nxt], -1


@dataclass
class RadioParams:
    freq_hz: float = 28e9
    bandwidth_hz: float = 5e6
    ptx_dbm: float = 30.0
    noise_figure_db: float = 7.0
    beacon_dbm: float = 0.0

    @property
    def ptx_w(self) -> float:
        return float(rf.dbm_to_w(self.ptx_dbm))

    @property
    def noise_w(self) -> float:
        return rf.noise_power_w(self.bandwidth_hz, self.noise_figure_db)


@dataclass
class BeamEnv:
    """Multi-BS, multi-UE downlink with LOS channels (one ray per link)."""

    layout: ScenarioLayout
    geom: rf.UpaGeometry
    n_ue: int
    radio: RadioParams = field(default_factory=RadioParams)
    pathloss: rf.PathLossParams = field(default_factory=rf.PathLossParams)
    dt_s: float = 0.01
    speed_range: tuple = (1.0, 15.0)
    scaling: StateScaling | None = field(default_factory=StateScaling)

    def __post_init__(self):
        self.walker = RoadWalker(self.layout.road_segments)
        self.rng = np.random.default_rng(0)
        self.channels = None
        self.sinr = np.zeros(self.n_ue)
        self.fingerprints = None

    @property
    def n_bs(self) -> int:
        return self.layout.n_bs

    @property
    def state_dim(self) -> int:
        return self.n_ue * (self.n_bs + 1)

    @property
    def ue_positions(self) -> np.ndarray:
        xy = self.walker.positions_xy()
        return np.column_stack([xy, np.full(len(xy), self.layout.ue_height_m)])

    def reset(self, seed: int) -> np.ndarray:
        self.rng = np.random.default_rng(seed)
        self.walker.place(self.n_ue, self.rng, self.speed_range)
        self._draw_channels()
        probe = ResolvedAction(self.rng.integers(self.n_bs, size=self.n_ue),
                               self.rng.uniform(np.pi / 2, np.pi, self.n_ue),
                               self.rng.uniform(-np.pi / 2, np.pi / 2, self.n_ue))
        self.sinr = self.sinr_of(probe)
        self._measure()
        return self.state()

    def step(self, action: ResolvedAction) -> tuple[np.ndarray, float]:
        action.validate(self.n_bs)
        self.sinr = self.sinr_of(action)
        reward = rf.mean_rate(self.sinr)
        self.move_ues(self.dt_s)
        self._measure()
        return self.state(), reward

    def move_ues(self, dt_s: float) -> np.ndarray:
        self.walker.advance(dt_s, self.rng)
        self._draw_channels()
        return self.ue_positions

    def state(self) -> np.ndarray:
        return build_state(self.fingerprints, self.sinr, self.scaling)

    def sinr_of(self, action: ResolvedAction) -> np.ndarray:
        beams = rf.array_response(action.azimuth_rad, action.elevation_rad, self.geom)
        return rf.sinr_vector(self.channels, action.bs_index, beams, self.radio.ptx_w, self.radio.noise_w)

    def los_angles(self) -> tuple[np.ndarray, np.ndarray]:
        """Folded LOS departure angles, each of shape (N_UE, N_BS)."""
        theta, phi, _ = aod_angles(self.layout.bs_positions[None, :, :], self.ue_positions[:, None, :])
        return theta, fold_azimuth(phi)

    def _draw_channels(self) -> None:
        # los_path + rf.assemble_channel, vectorised over all (UE, BS) links
        theta, phi, dist = aod_angles(self.layout.bs_positions[None, :, :], self.ue_positions[:, None, :])
        shadow = self.rng.normal(0.0, self.pathloss.shadow_sigma_db, dist.shape)
        pl = rf.path_loss_db(self.radio.freq_hz, dist, self.pathloss, shadow)
        gain = 10.0 ** (-pl / 20.0) * np.exp(1j * self.rng.uniform(0.0, 2.0 * np.pi, dist.shape))
        self.link_gain = gain
        a = rf.array_response(phi, theta, self.geom)
        self.channels = np.sqrt(self.geom.n_elements) * gain[..., None] * np.conj(a)

    def _measure(self) -> None:
        # compute_rf_signature for every UE in one draw
        ue = self.ue_positions
        dist = np.linalg.norm(ue[:, None, :] - self.layout.bs_positions[None, :, :], axis=2)
        shadow = self.rng.normal(0.0, self.pathloss.shadow_sigma_db, dist.shape)
        self.fingerprints = self.radio.beacon_dbm - rf.path_loss_db(self.radio.freq_hz, dist, self.pathloss, shadow)
