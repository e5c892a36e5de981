"""Self-adaptive global-best harmony search over a closed scalar interval.

The scheduler uses this to pick the per-round local-accuracy target, but the
optimizer is generic: it minimizes any finite scalar function on [lo, hi].

Per improvisation, the memory-consideration and pitch-adjustment rates are
drawn from normal distributions whose means adapt every `lp` improvisations
to the average of the draws that actually improved the memory; the pitch
bandwidth decays linearly to bw_min over the first half of the budget.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class SghsParams:
    hms: int = 10               # harmony memory size
    hmcr_mean: float = 0.98     # memory consideration rate (initial mean)
    hmcr_stddev: float = 0.01
    par_mean: float = 0.9       # pitch adjustment rate (initial mean)
    par_stddev: float = 0.05
    bw_max: float | None = None  # None -> (hi - lo) / 20
    bw_min: float = 5e-4
    ni: int = 200               # improvisation budget
    lp: int = 50                # learning period for rate adaptation

    def __post_init__(self):
        if self.hms < 2:
            raise ValueError("hms must be at least 2")
        if self.ni and self.ni < self.hms:
            raise ValueError("ni must be at least hms (or 0 to disable)")
        if not (0 <= self.hmcr_mean <= 1 and 0 <= self.par_mean <= 1):
            raise ValueError("hmcr_mean and par_mean must lie in [0, 1]")
        if self.hmcr_stddev < 0 or self.par_stddev < 0:
            raise ValueError("rate stddevs must be non-negative")
        if self.bw_max is not None and self.bw_max < self.bw_min:
            raise ValueError("bw_max must be >= bw_min")
        if self.lp < 1:
            raise ValueError("lp must be positive")


@dataclass
class HarmonyMemory:
    values: np.ndarray      # candidate positions
    objectives: np.ndarray

    @property
    def best_index(self) -> int:
        return int(np.argmin(self.objectives))

    @property
    def worst_index(self) -> int:
        return int(np.argmax(self.objectives))

    @property
    def best(self) -> tuple[float, float]:
        i = self.best_index
        return float(self.values[i]), float(self.objectives[i])


@dataclass
class _GenerationStats:
    """Per-improvisation schedule state: current bandwidth and rate means."""
    bandwidth: float
    hmcr_mean: float
    par_mean: float
    improving_hmcr: list = field(default_factory=list)
    improving_par: list = field(default_factory=list)


def _bandwidth(step: int, ni: int, bw_max: float, bw_min: float) -> float:
    # Linear decay over the first half of the budget, then hold at bw_min.
    half = ni / 2.0
    if half <= 0 or step >= half:
        return bw_min
    return bw_max - (bw_max - bw_min) * step / half


def improvise(memory: HarmonyMemory, bounds: tuple[float, float],
              params: SghsParams, stats: _GenerationStats,
              rng: np.random.Generator) -> tuple[float, float, float]:
    """Produce one candidate; returns (candidate, hmcr_draw, par_draw)."""
    lo, hi = bounds
    hmcr = min(1.0, max(0.0, rng.normal(stats.hmcr_mean, params.hmcr_stddev)))
    par = min(1.0, max(0.0, rng.normal(stats.par_mean, params.par_stddev)))
    if rng.random() < hmcr:
        x = float(memory.values[rng.integers(len(memory.values))])
        if rng.random() < par:
            # Global-best pitch adjustment: probe the neighborhood of the
            # best harmony, shrinking with the bandwidth schedule.
            x = memory.best[0] + rng.uniform(-stats.bandwidth,
                                             stats.bandwidth)
    else:
        x = rng.uniform(lo, hi)
    return min(hi, max(lo, x)), hmcr, par


def adapt_parameters(improving_hmcr: list[float], improving_par: list[float],
                     current: tuple[float, float]) -> tuple[float, float]:
    """New (hmcr_mean, par_mean): mean of draws that improved the memory in
    the last learning period; unchanged components if none did."""
    hmcr_mean, par_mean = current
    if improving_hmcr:
        hmcr_mean = float(np.mean(improving_hmcr))
    if improving_par:
        par_mean = float(np.mean(improving_par))
    return hmcr_mean, par_mean


def minimize(objective, bounds: tuple[float, float], params: SghsParams,
             rng: np.random.Generator) -> tuple[float, float]:
    """Minimize `objective` on [lo, hi] with exactly hms + ni evaluations.

    Raises if any probe evaluates to a non-finite value (usually a sign that
    the bounds include a singularity of the objective).
    """
    lo, hi = bounds
    if not lo < hi:
        raise ValueError("bounds must satisfy lo < hi")

    def probe(x: float) -> float:
        f = float(objective(x))
        if not np.isfinite(f):
            raise ValueError(f"objective returned non-finite value {f} at {x}")
        return f

    values = rng.uniform(lo, hi, size=params.hms)
    memory = HarmonyMemory(values=values,
                           objectives=np.array([probe(x) for x in values]))
    best_x, best_f = memory.best

    bw_max = params.bw_max if params.bw_max is not None else (hi - lo) / 20.0
    stats = _GenerationStats(bandwidth=bw_max, hmcr_mean=params.hmcr_mean,
                             par_mean=params.par_mean)
    for step in range(params.ni):
        stats.bandwidth = _bandwidth(step, params.ni, bw_max, params.bw_min)
        x, hmcr, par = improvise(memory, bounds, params, stats, rng)
        f = probe(x)
        worst = memory.worst_index
        if f < memory.objectives[worst]:
            memory.values[worst] = x
            memory.objectives[worst] = f
            stats.improving_hmcr.append(hmcr)
            stats.improving_par.append(par)
        if f < best_f:
            best_x, best_f = x, f
        if (step + 1) % params.lp == 0:
            stats.hmcr_mean, stats.par_mean = adapt_parameters(
                stats.improving_hmcr, stats.improving_par,
                (stats.hmcr_mean, stats.par_mean))
            stats.improving_hmcr.clear()
            stats.improving_par.clear()
    return best_x, best_f
