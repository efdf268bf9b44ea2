"""Closed-loop Monte-Carlo simulation of the quantized networked loop.

Each run draws its noise, channel and dictionary streams from seeds mixed
out of (master_seed, run_index, stream tag), so a quantized run and the
unquantized baseline with the same run index see identical disturbances
and dropouts.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import stats
from .dictionary import Family, build_dictionary, codewords_per_section, make_rng
from .encoder import EncoderWorkspace
from .errors import ConfigInvalid
from .network import IIDDropout, TwoStateDropout, simulate_channel
from .plant import build_augmented
from .synth import CostWeights, Plant, synthesize

NOISE, CHANNEL, DICTIONARY = 0, 1, 2


def derive_seed(master_seed: int, run_index: int, tag: int, sub: int = 0) -> int:
    """64-bit seed for one stream of one run."""
    ss = np.random.SeedSequence([int(master_seed) & 0xFFFFFFFFFFFFFFFF, run_index, tag, sub])
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass
class DictionarySpec:
    family: str
    rate: float
    scale: float = 1.0
    M: int = 2
    iid_variance: float = 25.0
    regenerate: bool = True

    def __post_init__(self):
        self.family = Family[self.family.upper()].name if isinstance(self.family, str) else Family(self.family).name
        if not self.rate > 0 or not self.scale > 0 or self.M < 1:
            raise ConfigInvalid("dictionary rate, scale and M must be positive")


@dataclass
class SimulationConfig:
    plant: Plant
    weights: CostWeights
    channel: IIDDropout | TwoStateDropout
    dictionary: DictionarySpec | None = None
    steps: int = 50_000
    runs: int = 1
    master_seed: int = 0
    x0: np.ndarray | None = None
    divergence_threshold: float = 1e9
    baseline: bool = False
    burn_in: int = 0
    channel_start: int | None = None

    def __post_init__(self):
        if self.steps < 1 or self.runs < 1:
            raise ConfigInvalid("steps and runs must be positive")
        if not self.divergence_threshold > 0:
            raise ConfigInvalid("divergence threshold must be positive")
        if not 0 <= self.burn_in < self.steps:
            raise ConfigInvalid("burn_in must lie in [0, steps)")
        if self.dictionary is None and not self.baseline:
            raise ConfigInvalid("a quantized run needs a dictionary spec")
        if self.x0 is not None:
            self.x0 = np.asarray(self.x0, dtype=float).reshape(-1)
            if self.x0.shape != (self.plant.p,):
                raise ConfigInvalid("x0 has the wrong dimension")


@dataclass
class RunRecord:
    mse: float
    stable: bool
    dropout_count: int
    state_occupancy: tuple
    seed: int
    achieved_rate: float
    run_index: int = 0
    trajectory: np.ndarray | None = field(default=None, repr=False)

    @property
    def mse_db(self) -> float:
        if not self.stable:
            return math.nan
        return 10.0 * math.log10(self.mse) if self.mse > 0 else -math.inf


@dataclass
class CellSummary:
    mse_linear: float
    stable: bool
    runs: int
    n_stable: int

    @property
    def mse_db(self) -> float:
        if not self.mse_linear > 0 or math.isnan(self.mse_linear):
            return math.nan if math.isnan(self.mse_linear) else -math.inf
        return 10.0 * math.log10(self.mse_linear)


class Design:
    """Controller, aggregated model and stationary statistics for one configuration."""

    def __init__(self, plant: Plant, weights: CostWeights, channel):
        self.plant = plant
        self.weights = weights
        self.channel = channel
        self.synthesis = synthesize(plant, weights)
        self.model = build_augmented(plant, self.synthesis.K, weights.N)
        self._qu = {}

    @property
    def K(self):
        return self.synthesis.K

    def single_state_qu(self, p_d: float) -> np.ndarray:
        key = ("single", float(p_d))
        if key not in self._qu:
            self._qu[key] = stats.single_state_stats(self.model, self.K, p_d, self.plant.sigma2_w).Q_u
        return self._qu[key]

    def two_state_qu(self) -> np.ndarray:
        if not isinstance(self.channel, TwoStateDropout):
            raise ConfigInvalid("GR2/GSR2 dictionaries need a two-state channel")
        key = ("two",)
        if key not in self._qu:
            self._qu[key] = stats.two_state_stats(self.model, self.K, self.channel,
                                                  self.plant.sigma2_w).Q_u
        return self._qu[key]

    def dictionaries(self, spec: DictionarySpec, master_seed: int, run_index: int):
        """One dictionary, or a (good, bad) pair for state-switched encoding."""
        N = self.weights.N
        L = codewords_per_section(N, spec.M, spec.rate)
        family = Family[spec.family]
        r = run_index if spec.regenerate else 0
        seed = derive_seed(master_seed, r, DICTIONARY)
        if family is Family.IID:
            return (build_dictionary(family, N, spec.M, L, spec.iid_variance, spec.scale, seed),)
        if family in (Family.GR2, Family.GSR2):
            return (build_dictionary(family, N, spec.M, L, self.two_state_qu(), spec.scale, seed),)
        if isinstance(self.channel, IIDDropout):
            Qu = self.single_state_qu(self.channel.p_d)
            return (build_dictionary(family, N, spec.M, L, Qu, spec.scale, seed),)
        return tuple(
            build_dictionary(family, N, spec.M, L, self.single_state_qu(pd), spec.scale,
                             derive_seed(master_seed, r, DICTIONARY, j + 1))
            for j, pd in enumerate(self.channel.p_d))


def _draw_streams(config: SimulationConfig, run_index: int):
    noise_rng = make_rng(derive_seed(config.master_seed, run_index, NOISE))
    w = math.sqrt(config.plant.sigma2_w) * noise_rng.standard_normal(config.steps)
    chan_rng = make_rng(derive_seed(config.master_seed, run_index, CHANNEL))
    xi, d = simulate_channel(config.channel, config.steps, chan_rng, config.channel_start)
    return w, xi, d


def _loop(config: SimulationConfig, design: Design, run_index: int, encoders, record_trajectory):
    plant, weights = config.plant, config.weights
    A, B1, B2 = plant.A, plant.B1, plant.B2
    Q, R = weights.Q, weights.R
    N = weights.N
    K = design.K
    w, xi, d = _draw_streams(config, run_index)
    x = np.zeros(plant.p) if config.x0 is None else config.x0.copy()
    b = np.zeros(N)
    costs = np.zeros(config.steps)
    traj = np.zeros((config.steps, plant.p + N)) if record_trajectory else None
    thresh = config.divergence_threshold
    stable = True
    for k in range(config.steps):
        if np.max(np.abs(x)) > thresh or not np.all(np.isfinite(x)):
            stable = False
            break
        if traj is not None:
            traj[k, :plant.p] = x
            traj[k, plant.p:] = b
        if encoders is None:
            u_bar = -(K @ x)
        else:
            ws = encoders[xi[k] - 1] if len(encoders) == 2 else encoders[0]
            u_bar = ws.encode(x)[1]
        if d[k]:
            b[:-1] = b[1:]
            b[-1] = 0.0
        else:
            b = u_bar
        u = b[0]
        costs[k] = x @ Q @ x + R * u * u
        x = A @ x + B1 * u + B2 * w[k]
    if stable:
        mse = math.fsum(costs[config.burn_in:]) / (config.steps - config.burn_in)
    else:
        mse = math.inf
    occupancy = (float(np.mean(xi == 1)), float(np.mean(xi == 2)))
    return mse, stable, int(d.sum()), occupancy, traj, costs


def run_closed_loop(config: SimulationConfig, run_index: int = 0, design: Design | None = None,
                    record_trajectory: bool = False) -> RunRecord:
    """One quantized (or, with ``config.baseline``, unquantized) run."""
    design = design or Design(config.plant, config.weights, config.channel)
    if config.baseline:
        encoders, rate = None, math.inf
    else:
        dicts = design.dictionaries(config.dictionary, config.master_seed, run_index)
        encoders = [EncoderWorkspace(D, design.synthesis.W, design.synthesis.F) for D in dicts]
        rate = dicts[0].rate
    mse, stable, drops, occ, traj, _ = _loop(config, design, run_index, encoders, record_trajectory)
    return RunRecord(mse=mse, stable=stable, dropout_count=drops, state_occupancy=occ,
                     seed=config.master_seed, achieved_rate=rate, run_index=run_index,
                     trajectory=traj)


def run_unquantized(config: SimulationConfig, run_index: int = 0, design: Design | None = None,
                    record_trajectory: bool = False) -> RunRecord:
    """Baseline with u = -Kx on the same noise and channel streams as the quantized run."""
    cfg = SimulationConfig(**{**config.__dict__, "baseline": True})
    return run_closed_loop(cfg, run_index, design, record_trajectory)


def run_many(config: SimulationConfig, design: Design | None = None) -> list[RunRecord]:
    design = design or Design(config.plant, config.weights, config.channel)
    return [run_closed_loop(config, r, design) for r in range(config.runs)]


def aggregate_runs(records) -> CellSummary:
    """Mean linear MSE over stable runs; one unstable run marks the whole cell unstable."""
    records = list(records)
    if not records:
        raise ValueError("need at least one record")
    good = [r.mse for r in records if r.stable]
    mean = math.fsum(good) / len(good) if good else math.nan
    return CellSummary(mse_linear=mean, stable=len(good) == len(records), runs=len(records),
                       n_stable=len(good))


def running_mean_settled(costs, tail_fraction: float = 0.2, tol: float = 0.01) -> bool:
    """True if the running mean moves less than ``tol`` (relative) over the final stretch."""
    costs = np.asarray(costs, dtype=float)
    running = np.cumsum(costs) / np.arange(1, len(costs) + 1)
    start = int(len(costs) * (1 - tail_fraction))
    tail = running[start:]
    return bool((tail.max() - tail.min()) / abs(running[-1]) < tol)
