"""Experiment configuration, result-row containers, and interval helpers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from ..errors import DomainError

DEFAULT_EPS_STEP = 0.05
DEFAULT_DELTA = 0.25
DEFAULT_RHO = 0.25
DEFAULT_GAMMA = 0.1


def default_eps_grid() -> tuple[float, ...]:
    # 0.0, 0.05, ..., 1.0; the linear-term range used by the tail fits
    return tuple(np.arange(0.0, 1.0 + DEFAULT_EPS_STEP / 2, DEFAULT_EPS_STEP))


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment run: sizes, trial budget, seed, grids, thresholds.

    ``d`` and ``m`` stay None until resolved (weight defaults to n/2 and
    needs even n; row count defaults to n). Optional thresholds are filled
    by each runner with its own defaults.
    """

    experiment: str
    n: int
    trials: int = 1000
    seed: int = 0
    d: Optional[int] = None
    m: Optional[int] = None
    eps_grid: tuple[float, ...] = field(default_factory=default_eps_grid)
    delta: float = DEFAULT_DELTA
    rho: float = DEFAULT_RHO
    alpha: Optional[float] = None
    gamma: Optional[float] = None
    horizon: float = 1e6
    constants: dict = field(default_factory=dict)
    threads: int = 1
    out: Optional[str] = None
    fmt: str = "csv"

    def __post_init__(self):
        if self.n < 2:
            raise DomainError(f"n must be at least 2, got {self.n}")
        if self.trials < 1:
            raise DomainError(f"trials must be at least 1, got {self.trials}")
        if self.threads < 1:
            raise DomainError(f"threads must be at least 1, got {self.threads}")
        grid = tuple(float(e) for e in self.eps_grid)
        if any(b < a for a, b in zip(grid, grid[1:])):
            raise DomainError("eps grid must be sorted ascending")
        if any(e < 0 for e in grid):
            raise DomainError("eps grid entries must be nonnegative")
        if self.fmt not in ("csv", "json"):
            raise DomainError(f"format must be csv or json, got {self.fmt!r}")
        object.__setattr__(self, "eps_grid", grid)

    def resolved_d(self) -> int:
        if self.d is not None:
            if not (1 <= self.d <= self.n):
                raise DomainError(f"d must satisfy 1 <= d <= n, got d={self.d}")
            return self.d
        if self.n % 2 != 0:
            raise DomainError(f"n must be even when d is unspecified, got n={self.n}")
        return self.n // 2

    def resolved_m(self) -> int:
        if self.m is not None:
            if self.m < 1:
                raise DomainError(f"m must be positive, got {self.m}")
            return self.m
        return self.n

    def as_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "n": self.n,
            "d": self.d,
            "m": self.m,
            "trials": self.trials,
            "seed": self.seed,
            "eps_grid": list(self.eps_grid),
            "delta": self.delta,
            "rho": self.rho,
            "alpha": self.alpha,
            "gamma": self.gamma,
            "horizon": self.horizon,
            "constants": dict(self.constants),
            "threads": self.threads,
            "out": self.out,
            "format": self.fmt,
        }


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    statistic: str
    value: Union[float, str]
    flag: str = ""


@dataclass(frozen=True)
class SummaryRow:
    experiment: str
    n: int
    eps: Union[float, str]
    estimate: float
    ci_low: Optional[float]
    ci_high: Optional[float]
    trials: int


def wilson_ci(successes: int, trials: int, z: float = 1.96) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise DomainError("trials must be positive")
    if not (0 <= successes <= trials):
        raise DomainError(f"need 0 <= successes <= trials, got {successes}/{trials}")
    p = successes / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    center = (p + z2 / (2.0 * trials)) / denom
    half = z * math.sqrt(p * (1.0 - p) / trials + z2 / (4.0 * trials * trials)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def proportion_row(
    experiment: str, n: int, eps: Union[float, str], successes: int, trials: int
) -> SummaryRow:
    low, high = wilson_ci(successes, trials)
    return SummaryRow(experiment, n, eps, successes / trials, low, high, trials)
