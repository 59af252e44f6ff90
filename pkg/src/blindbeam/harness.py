"""Training and evaluation orchestration with CSV/checkpoint output.

All randomness flows from ``(seed, stream, index)`` triples through
``numpy.random.SeedSequence``, so any episode of any run can be replayed
in isolation and two runs of the same config write identical bytes.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import rf
from .agent import VARIANTS, DDPGAgent, Genie
from .baselines import bs_sweep_policy, env_los_oracle, env_oracle, random_policy
from .config import RunConfig
from .env import BeamEnv, RadioParams, ResolvedAction, four_junction_layout

log = logging.getLogger(__name__)

BASELINES = ("random", "oracle", "los_oracle", "sweep")
# stream tags for seed derivation
_TRAIN, _EVAL, _AGENT, _POLICY = 1, 2, 3, 4


def derive_seed(*words: int) -> int:
    return int(np.random.SeedSequence([int(w) for w in words]).generate_state(1)[0])


def canonical_variant(name: str) -> str:
    v = name.replace("-", "_")
    if v not in VARIANTS:
        raise ValueError(f"unknown variant {name!r}; expected one of {', '.join(VARIANTS)}")
    return v


def make_env(cfg: RunConfig) -> BeamEnv:
    r, a, m = cfg.radio, cfg.antenna, cfg.mobility
    return BeamEnv(
        layout=four_junction_layout(cfg.scenario.n_bs),
        geom=rf.UpaGeometry.half_wavelength(a.n_th, a.n_tv, r.fc_hz),
        n_ue=cfg.scenario.n_ue,
        radio=RadioParams(r.fc_hz, r.bandwidth_hz, r.ptx_dbm, r.noise_figure_db, r.beacon_dbm),
        pathloss=cfg.pathloss_params(),
        dt_s=m.dt_s,
        speed_range=(m.speed_min, m.speed_max),
    )


def make_genie(env: BeamEnv, with_best_bs: bool = True) -> Genie:
    theta, phi = env.los_angles()
    best = env_los_oracle(env)[0].bs_index if with_best_bs else np.zeros(env.n_ue, dtype=int)
    return Genie(best, theta, phi)


def make_agent(cfg: RunConfig, variant: str, seed: int) -> DDPGAgent:
    return DDPGAgent(canonical_variant(variant), cfg.scenario.n_ue, cfg.scenario.n_bs,
                     cfg.train, cfg.schedule(), derive_seed(seed, _AGENT))


def _genie_for(agent: DDPGAgent, env: BeamEnv) -> Genie | None:
    if not agent.needs_genie:
        return None
    return make_genie(env, with_best_bs=agent.kind == "bs_oracle")


def train_agent(cfg: RunConfig, variant: str, seed: int,
                progress: Callable[[int, float], None] | None = None) -> tuple[DDPGAgent, np.ndarray]:
    """Run the episodic DDPG loop for one seed; returns the agent and per-episode mean rates."""
    env = make_env(cfg)
    agent = make_agent(cfg, variant, seed)
    steps = cfg.train.steps_per_episode
    curve = np.empty(cfg.train.episodes)
    for ep in range(cfg.train.episodes):
        state = env.reset(derive_seed(seed, _TRAIN, ep))
        genie = _genie_for(agent, env)
        obs = agent.observe(state, genie)
        total = 0.0
        for _ in range(steps):
            flat, action = agent.act(obs, genie, explore=True)
            state, reward = env.step(action)
            genie = _genie_for(agent, env)
            next_obs = agent.observe(state, genie)
            agent.remember(obs, flat, reward, next_obs)
            agent.update()
            obs = next_obs
            total += reward
        curve[ep] = total / steps
        if progress is not None:
            progress(ep, curve[ep])
    return agent, curve


def _fmt(x: float) -> str:
    return repr(float(x))


def write_rate_evolution(path, curve) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["episode", "mean_rate"])
        for ep, v in enumerate(curve):
            w.writerow([ep, _fmt(v)])


def read_rate_evolution(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return np.array([float(r["mean_rate"]) for r in rows])


@dataclass
class TrainingResult:
    variant: str
    curves: dict = field(default_factory=dict)  # seed -> per-episode mean rates
    checkpoints: dict = field(default_factory=dict)  # seed -> path
    agents: dict = field(default_factory=dict)
    mean_curve: np.ndarray | None = None
    csv_paths: list = field(default_factory=list)


def run_training(cfg: RunConfig, variant: str, seeds=None, out_dir=None) -> TrainingResult:
    """Train ``variant`` for every seed, writing per-seed and seed-averaged
    ``episode,mean_rate`` CSVs and one checkpoint per seed."""
    variant = canonical_variant(variant)
    seeds = list(cfg.seeds if seeds is None else seeds)
    out = Path(out_dir or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    res = TrainingResult(variant)
    for seed in seeds:
        def progress(ep, rate, seed=seed):
            if (ep + 1) % max(1, cfg.train.episodes // 10) == 0:
                log.info("%s seed %d episode %d/%d mean rate %.3f", variant, seed, ep + 1, cfg.train.episodes, rate)
        agent, curve = train_agent(cfg, variant, seed, progress)
        csv_path = out / f"rate_evolution_{variant}_seed{seed}.csv"
        write_rate_evolution(csv_path, curve)
        ckpt = out / f"{variant}_seed{seed}.npz"
        agent.save(ckpt)
        res.curves[seed], res.checkpoints[seed], res.agents[seed] = curve, ckpt, agent
        res.csv_paths.append(csv_path)
    res.mean_curve = np.mean(np.stack([res.curves[s] for s in seeds]), axis=0)
    mean_path = out / f"rate_evolution_{variant}_mean.csv"
    write_rate_evolution(mean_path, res.mean_curve)
    res.csv_paths.append(mean_path)
    return res


# evaluation policies: callables env -> (action, rate multiplier)

class AgentPolicy:
    def __init__(self, agent: DDPGAgent, label: str | None = None):
        self.agent = agent
        self.label = label or agent.kind

    def check(self, env: BeamEnv) -> None:
        if (self.agent.n_ue, self.agent.n_bs) != (env.n_ue, env.n_bs):
            raise ValueError(f"checkpoint is for N_UE={self.agent.n_ue}, N_BS={self.agent.n_bs} "
                             f"but the scenario has N_UE={env.n_ue}, N_BS={env.n_bs}")

    def __call__(self, env: BeamEnv) -> tuple[ResolvedAction, float]:
        genie = _genie_for(self.agent, env)
        _, action = self.agent.act(self.agent.observe(env.state(), genie), genie, explore=False)
        return action, 1.0


class RandomPolicy:
    label = "random"

    def __init__(self, seed: int):
        self.rng = np.random.default_rng(derive_seed(seed, _POLICY))

    def __call__(self, env):
        return random_policy(env.n_ue, env.n_bs, self.rng), 1.0


class OraclePolicy:
    label = "oracle"

    def __call__(self, env):
        return env_oracle(env)[0], 1.0


class LosOraclePolicy:
    label = "los_oracle"

    def __call__(self, env):
        return env_los_oracle(env)[0], 1.0


class SweepPolicy:
    label = "sweep"

    def __init__(self, sweep_cfg):
        self.sweep_cfg = sweep_cfg

    def __call__(self, env):
        return bs_sweep_policy(env.channels, self.sweep_cfg, env.geom)


def resolve_policy(source, cfg: RunConfig, seed: int):
    """Baseline name, checkpoint path, or an already-built policy/agent."""
    if isinstance(source, DDPGAgent):
        return AgentPolicy(source)
    if callable(source):
        return source
    name = str(source)
    if name == "random":
        return RandomPolicy(seed)
    if name == "oracle":
        return OraclePolicy()
    if name == "los_oracle":
        return LosOraclePolicy()
    if name == "sweep":
        return SweepPolicy(cfg.sweep)
    path = Path(name)
    if not path.is_file():
        raise FileNotFoundError(f"no such checkpoint: {path} (or use one of {', '.join(BASELINES)})")
    return AgentPolicy(DDPGAgent.load(path), label=path.stem)


def evaluate(policy, cfg: RunConfig, n_observations: int | None = None, seed: int | None = None) -> np.ndarray:
    """Per-step rates of a frozen policy over ``n_observations`` steps.

    Episodes are ``cfg.eval.steps_per_episode`` long; for a given seed
    every policy sees the same UE trajectories and channels.
    """
    n_obs = n_observations or cfg.eval.n_observations
    seed = cfg.seeds[0] if seed is None else seed
    policy = resolve_policy(policy, cfg, seed)
    env = make_env(cfg)
    if hasattr(policy, "check"):
        policy.check(env)
    per_ep = cfg.eval.steps_per_episode
    rates = np.empty(n_obs)
    done, ep = 0, 0
    while done < n_obs:
        env.reset(derive_seed(seed, _EVAL, ep))
        for _ in range(min(per_ep, n_obs - done)):
            action, weight = policy(env)
            _, reward = env.step(action)
            rates[done] = reward * weight
            done += 1
        ep += 1
    return rates


def empirical_cdf(rates) -> tuple[np.ndarray, np.ndarray]:
    x = np.sort(np.asarray(rates, dtype=float))
    return x, np.arange(1, len(x) + 1) / len(x)


def write_cdf(path, rates) -> None:
    x, p = empirical_cdf(rates)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rate", "cdf"])
        for a, b in zip(x, p):
            w.writerow([_fmt(a), _fmt(b)])


@dataclass
class EvalSummary:
    label: str
    seed: int
    mean_rate: float
    csv_path: Path | None

    def line(self) -> str:
        return f"{self.label} seed={self.seed} mean_rate={self.mean_rate:.4f} bits/s/Hz"


def run_eval(policy, cfg: RunConfig, n_observations: int | None = None, out_dir=None,
             seed: int | None = None, label: str | None = None) -> EvalSummary:
    """Evaluate and write ``rate_cdf_<label>[_seed<S>].csv``."""
    seed = cfg.seeds[0] if seed is None else seed
    pol = resolve_policy(policy, cfg, seed)
    rates = evaluate(pol, cfg, n_observations, seed)
    label = label or getattr(pol, "label", "policy")
    path = None
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        path = out / f"rate_cdf_{label}_seed{seed}.csv"
        write_cdf(path, rates)
    return EvalSummary(label, seed, float(rates.mean()), path)


def compare(cfg: RunConfig, out_dir=None, variants=VARIANTS, seeds=None,
            baselines=BASELINES) -> list[EvalSummary]:
    """Train every variant per seed, evaluate them and the given baselines on
    that seed's evaluation episodes, and write ``summary.csv``."""
    out = Path(out_dir or cfg.out_dir)
    seeds = list(cfg.seeds if seeds is None else seeds)
    results = []
    trained = {v: run_training(cfg, v, seeds, out) for v in variants}
    for seed in seeds:
        for v in variants:
            results.append(run_eval(trained[v].agents[seed], cfg, out_dir=out, seed=seed, label=v))
        for b in baselines:
            results.append(run_eval(b, cfg, out_dir=out, seed=seed, label=b))
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["policy", "seed", "mean_rate"])
        for r in results:
            w.writerow([r.label, r.seed, _fmt(r.mean_rate)])
    return results


def summary_table(results: list[EvalSummary]) -> str:
    labels = list(dict.fromkeys(r.label for r in results))
    seeds = list(dict.fromkeys(r.seed for r in results))
    by = {(r.label, r.seed): r.mean_rate for r in results}
    head = f"{'policy':<14}" + "".join(f"{'seed ' + str(s):>10}" for s in seeds) + f"{'mean':>10}"
    lines = [head]
    for lab in labels:
        vals = [by.get((lab, s), np.nan) for s in seeds]
        lines.append(f"{lab:<14}" + "".join(f"{v:>10.3f}" for v in vals) + f"{np.nanmean(vals):>10.3f}")
    return "\n".join(lines)
