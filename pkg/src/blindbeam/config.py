"""Run configuration: TOML file -> validated :class:`RunConfig`.

Keys are grouped in sections (``[train]``, ``[radio]``, ...) or written as
dotted keys (``train.gamma = 0.6``). Absent keys take their defaults;
unknown keys and invariant violations are reported together, each with
its key path.
"""

from __future__ import annotations

import dataclasses
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .agent import ExplorationSchedule, TrainConfig
from .baselines import SweepConfig
from .rf import PathLossParams

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SQUARE_ARRAYS = (4, 8, 16)


class ConfigError(ValueError):
    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n" + "\n".join(f"  - {p}" for p in self.problems))


@dataclass
class ScenarioConfig:
    n_bs: int = 10
    n_ue: int = 3
    layout: str = "four_junction"


@dataclass
class AntennaConfig:
    n_th: int = 4
    n_tv: int = 4


@dataclass
class RadioConfig:
    fc_hz: float = 28e9
    bandwidth_hz: float = 5e6
    ptx_dbm: float = 30.0
    noise_figure_db: float = 7.0
    beacon_dbm: float = 0.0


@dataclass
class PathlossConfig:
    exponent: float = 1.98
    freq_dep: float = 0.0
    ref_freq_hz: float = 1e9
    shadow_sigma_db: float = 3.1


@dataclass
class MobilityConfig:
    dt_s: float = 0.01
    speed_min: float = 1.0
    speed_max: float = 15.0


@dataclass
class ExploreConfig:
    eps_bs_init: float = 1.0
    eps_bs_decay_rate: float = 1e-6
    sigma_theta_init: float = 0.5
    sigma_theta_final: float = 0.01
    # 0 means half of all training steps
    sigma_theta_steps: int = 0


@dataclass
class EvalConfig:
    n_observations: int = 10_000
    steps_per_episode: int = 1000


@dataclass
class RunConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    antenna: AntennaConfig = field(default_factory=AntennaConfig)
    radio: RadioConfig = field(default_factory=RadioConfig)
    pathloss: PathlossConfig = field(default_factory=PathlossConfig)
    mobility: MobilityConfig = field(default_factory=MobilityConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    explore: ExploreConfig = field(default_factory=ExploreConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    seeds: tuple = (0, 1, 2, 3, 4)
    out_dir: str = "runs"

    def schedule(self) -> ExplorationSchedule:
        e = self.explore
        steps = e.sigma_theta_steps or (self.train.episodes * self.train.steps_per_episode) // 2
        return ExplorationSchedule(e.eps_bs_init, e.eps_bs_decay_rate, e.sigma_theta_init,
                                   e.sigma_theta_final, steps)

    def pathloss_params(self) -> PathLossParams:
        p = self.pathloss
        return PathLossParams(p.exponent, p.freq_dep, p.ref_freq_hz, p.shadow_sigma_db)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


SECTIONS = {f.name: f for f in dataclasses.fields(RunConfig) if f.name not in ("seeds", "out_dir")}


def _coerce(path: str, value, default, problems: list[str]):
    if isinstance(default, bool) or isinstance(value, bool):
        problems.append(f"{path}: booleans are not accepted")
        return default
    if isinstance(default, int):
        if isinstance(value, int) or (isinstance(value, float) and value.is_integer()):
            return int(value)
        problems.append(f"{path}: expected an integer, got {value!r}")
        return default
    if isinstance(default, float):
        if isinstance(value, (int, float)):
            return float(value)
        problems.append(f"{path}: expected a number, got {value!r}")
        return default
    if isinstance(default, tuple):
        if isinstance(value, list):
            return tuple(value)
        problems.append(f"{path}: expected a list, got {value!r}")
        return default
    if isinstance(default, str):
        if isinstance(value, str):
            return value
        problems.append(f"{path}: expected a string, got {value!r}")
        return default
    return value


def from_dict(doc: dict) -> RunConfig:
    problems: list[str] = []
    cfg = RunConfig()
    for key, value in doc.items():
        if key in ("seeds", "out_dir"):
            setattr(cfg, key, _coerce(key, value, getattr(cfg, key), problems))
            continue
        if key not in SECTIONS:
            names = [f"{key}.{sub}" for sub in value] if isinstance(value, dict) and value else [key]
            problems += [f"{n}: unknown key" for n in names]
            continue
        if not isinstance(value, dict):
            problems.append(f"{key}: expected a table of settings")
            continue
        section = getattr(cfg, key)
        known = {f.name for f in dataclasses.fields(section)}
        updates = {}
        for sub, v in value.items():
            path = f"{key}.{sub}"
            if sub not in known:
                problems.append(f"{path}: unknown key")
                continue
            updates[sub] = _coerce(path, v, getattr(section, sub), problems)
        try:
            setattr(cfg, key, dataclasses.replace(section, **updates))
        except ValueError as exc:  # dataclass-level invariants, e.g. SweepConfig
            problems.append(f"{key}: {exc}")
    problems += validate(cfg)
    if problems:
        raise ConfigError(problems)
    return cfg


def validate(cfg: RunConfig) -> list[str]:
    p: list[str] = []

    def need(ok: bool, msg: str):
        if not ok:
            p.append(msg)

    s, a, r, pl, m = cfg.scenario, cfg.antenna, cfg.radio, cfg.pathloss, cfg.mobility
    t, e, sw, ev = cfg.train, cfg.explore, cfg.sweep, cfg.eval
    need(s.layout == "four_junction", "scenario.layout: only 'four_junction' is available")
    need(1 <= s.n_bs <= 10, "scenario.n_bs: four_junction layout holds 1..10 BSs")
    need(s.n_ue >= 1, "scenario.n_ue: need at least one UE")
    need(a.n_th == a.n_tv and a.n_th in SQUARE_ARRAYS, "antenna: n_th = n_tv ∈ {4, 8, 16} (square UPA)")
    need(r.fc_hz > 0, "radio.fc_hz: must be positive")
    need(r.bandwidth_hz > 0, "radio.bandwidth_hz: must be positive")
    need(pl.exponent > 0, "pathloss.exponent: must be positive")
    need(pl.ref_freq_hz > 0, "pathloss.ref_freq_hz: must be positive")
    need(pl.shadow_sigma_db >= 0, "pathloss.shadow_sigma_db: must be ≥ 0")
    need(m.dt_s > 0, "mobility.dt_s: must be positive")
    need(0 < m.speed_min <= m.speed_max, "mobility: need 0 < speed_min ≤ speed_max")
    need(0.0 <= t.gamma <= 1.0, "train.gamma: gamma ∈ [0,1]")
    need(0.0 < t.soft_lambda <= 1.0, "train.soft_lambda: soft_lambda ∈ (0,1]")
    need(t.eta_a >= 0 and t.eta_c >= 0, "train.eta_a/eta_c: learning rates must be ≥ 0")
    need(t.batch_n >= 1, "train.batch_n: batch_n ≥ 1")
    need(t.episodes >= 1 and t.steps_per_episode >= 1, "train.episodes/steps_per_episode: must be ≥ 1")
    need(t.buffer_size >= t.batch_n, "train.buffer_size: must be ≥ batch_n")
    need(len(t.hidden) >= 1 and all(h >= 1 for h in t.hidden), "train.hidden: need positive layer widths")
    need(0.0 <= e.eps_bs_init <= 1.0, "explore.eps_bs_init: probability ∈ [0,1]")
    need(e.eps_bs_decay_rate >= 0, "explore.eps_bs_decay_rate: must be ≥ 0")
    need(0 <= e.sigma_theta_final <= e.sigma_theta_init, "explore: need 0 ≤ sigma_theta_final ≤ sigma_theta_init")
    need(e.sigma_theta_steps >= 0, "explore.sigma_theta_steps: must be ≥ 0")
    need(sw.beam_step_deg > 0, "sweep.beam_step_deg: must be positive")
    need(sw.scan_period_s > 0 and sw.frame_period_s > 0, "sweep: periods must be positive")
    if sw.beam_step_deg > 0:
        need(sw.beam_count * sw.scan_period_s < sw.frame_period_s, "sweep: sweep exceeds frame")
    need(math.pi / 2 <= sw.sweep_elevation_rad <= math.pi, "sweep.sweep_elevation_rad: must lie in [pi/2, pi]")
    need(ev.n_observations >= 1 and ev.steps_per_episode >= 1, "eval: n_observations and steps_per_episode ≥ 1")
    need(len(cfg.seeds) >= 1 and all(isinstance(x, int) for x in cfg.seeds), "seeds: need a list of integers")
    return p


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        doc = tomllib.loads(path.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([f"{path}: parse error: {exc}"]) from exc
    return from_dict(doc)
