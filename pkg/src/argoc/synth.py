"""Seeded synthetic panels with known structure for tests and demos."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .clustering import ClusterPartition
from .timeseries import WeeklyPanel, WeekStamp, inverse_logit_array

START = WeekStamp(2004, 2)      # week ending Saturday 2004-01-10


@dataclass(frozen=True)
class SynthConfig:
    n_weeks: int = 700
    n_groups: int = 10
    group_size: int = 3
    active_groups: tuple[int, ...] = (0, 1)
    ar: tuple[float, float] = (1.3, -0.4)
    level_percent: float = 2.5
    factor_ar: float = 0.7
    # loadings of the active groups in each regime (cycled in order)
    regimes: tuple[tuple[float, ...], ...] = ((0.25, 0.12), (0.10, 0.30), (0.22, 0.22))
    regime_length: int = 175
    level_shift: float = 0.15
    term_noise: float = 0.25
    noise: float = 0.05
    volume_scale: float = 2000.0
    volume_loading: float = 0.5
    start: WeekStamp = START


@dataclass(frozen=True)
class SynthPanel:
    panel: WeeklyPanel
    partition: ClusterPartition        # generating groups
    logit_target: np.ndarray
    factors: np.ndarray                # weeks x groups
    regime: np.ndarray                 # regime index per week
    config: SynthConfig = field(repr=False, default=None)


def term_names(n_groups: int, group_size: int) -> list[str]:
    return [f"g{k + 1:02d}_t{j + 1}" for k in range(n_groups) for j in range(group_size)]


def make_panel(cfg: SynthConfig = SynthConfig(), seed: int = 0) -> SynthPanel:
    """AR(2) logit target driven by grouped latent search factors.

    Every term is its group's latent factor plus idiosyncratic noise, exposed
    as a nonnegative volume ``scale * exp(loading * x)``.  Only
    ``active_groups`` enter the target, with loadings that switch every
    ``regime_length`` weeks together with a level shift.
    """
    rng = np.random.default_rng(seed)
    n, K, g = cfg.n_weeks, cfg.n_groups, cfg.group_size
    burn = 200
    T = n + burn
    F = np.zeros((T, K))
    innov = rng.normal(size=(T, K)) * np.sqrt(1 - cfg.factor_ar ** 2)
    for t in range(1, T):
        F[t] = cfg.factor_ar * F[t - 1] + innov[t]
    regime = np.zeros(T, dtype=int)
    regime[burn:] = (np.arange(n) // cfg.regime_length) % len(cfg.regimes)
    mu = np.log(cfg.level_percent / (100 - cfg.level_percent))
    phi1, phi2 = cfg.ar
    y = np.full(T, mu)
    eps = rng.normal(scale=cfg.noise, size=T)
    for t in range(2, T):
        theta = cfg.regimes[regime[t]]
        level = mu + cfg.level_shift * regime[t]
        exo = sum(theta[i] * F[t, k] for i, k in enumerate(cfg.active_groups))
        y[t] = (level * (1 - phi1 - phi2) + phi1 * y[t - 1] + phi2 * y[t - 2]
                + exo + eps[t])
    X = np.repeat(F, g, axis=1) + cfg.term_noise * rng.normal(size=(T, K * g))
    volumes = cfg.volume_scale * np.exp(cfg.volume_loading * X)
    y, volumes, F, regime = y[burn:], volumes[burn:], F[burn:], regime[burn:]
    weeks = [cfg.start.shift(i) for i in range(n)]
    names = term_names(K, g)
    panel = WeeklyPanel(weeks, inverse_logit_array(y), volumes, names)
    part = ClusterPartition(tuple(k + 1 for k in range(K) for _ in range(g)), tuple(names))
    return SynthPanel(panel, part, y, F, regime, cfg)


def demo_block_panel(n_weeks: int = 200, seed: int = 0) -> SynthPanel:
    """Six terms in three strongly correlated pairs."""
    return make_panel(SynthConfig(n_weeks=n_weeks, n_groups=3, group_size=2,
                                  active_groups=(0,), regimes=((0.3,),), term_noise=0.15), seed)


@dataclass(frozen=True)
class MultiResFixture:
    weeks: tuple[WeekStamp, ...]
    truth: np.ndarray          # weeks x R, logit
    raw: np.ndarray            # weeks x R, logit raw estimates
    national: np.ndarray       # weeks, logit national estimate


def make_multires(n_weeks: int = 700, R: int = 10, seed: int = 0,
                  raw_noise=(0.08, 0.25), national_noise: float = 0.03) -> MultiResFixture:
    """Jointly Gaussian regional truths with noisy raw estimates.

    Regional truth = shared AR(1) national factor + regional AR(1) deviation.
    Raw estimates are truth plus iid noise whose scale varies by region.
    """
    rng = np.random.default_rng(seed)
    T = n_weeks + 100
    common = np.zeros(T)
    dev = np.zeros((T, R))
    for t in range(1, T):
        common[t] = 0.95 * common[t - 1] + rng.normal(scale=0.15)
        dev[t] = 0.8 * dev[t - 1] + rng.normal(scale=0.08, size=R)
    base = np.log(0.02 / 0.98) + rng.normal(scale=0.2, size=R)
    truth = (base + common[:, None] + dev)[100:]
    scales = np.linspace(raw_noise[0], raw_noise[1], R)
    raw = truth + rng.normal(size=truth.shape) * scales
    national = truth.mean(axis=1) + rng.normal(scale=national_noise, size=n_weeks)
    weeks = tuple(START.shift(i) for i in range(n_weeks))
    return MultiResFixture(weeks, truth, raw, national)
