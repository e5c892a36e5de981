"""Closed-form per-round cost model: data rate, communication and computation
time/energy, the weighted round cost, the recommendation surcharge, and the
per-iteration compute-time feasibility test.

All functions here are pure and operate on scalars; the scheduler keeps its
own vectorized fast path which the test suite checks against these.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from .network import ClientProfile

# Both ends of the local-accuracy interval are singular (1/(1-theta) and
# ln(1/theta)); everything clamps to this closed interval.
THETA_MIN = 0.01
THETA_MAX = 0.99


class InfeasibleLinkError(RuntimeError):
    """A selected client has zero uplink rate and cannot upload its model."""


def clamp_theta(theta: float) -> float:
    return min(max(theta, THETA_MIN), THETA_MAX)


@dataclass
class CostParams:
    """Static parameters of the cost model and the per-round problem."""

    bandwidth: float = 0.2e6          # Hz
    noise_density: float = 10 ** (-20.4)  # W/Hz (-174 dBm/Hz)
    theta: float = 0.5                # default local-accuracy target
    sigma: float = 1.0                # recommendation-cost preference
    c0: float = 0.05                  # base recommendation cost
    v: float = 10.0                   # penalty weight in the per-round problem
    t_max_cmp: float = 0.1            # s, per-iteration compute cap
    t_max_com: float = 0.5            # s, upload-time cap (deep-fade outage)
    clients_per_round: int = 14       # L
    delta: float = field(default=0.0) # target participation rate; 0 -> derive

    def __post_init__(self):
        if self.bandwidth <= 0 or self.noise_density <= 0:
            raise ValueError("bandwidth and noise_density must be positive")
        if not THETA_MIN <= self.theta <= THETA_MAX:
            raise ValueError(f"theta must lie in [{THETA_MIN}, {THETA_MAX}]")
        if self.sigma < 0 or self.c0 <= 0 or self.v < 0:
            raise ValueError("sigma >= 0, c0 > 0, v >= 0 required")
        if self.t_max_cmp <= 0 or self.t_max_com <= 0 or self.clients_per_round < 0:
            raise ValueError("t_max_cmp > 0, t_max_com > 0 and "
                             "clients_per_round >= 0 required")
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError("delta must lie in [0, 1]")

    def with_derived_delta(self, num_clients: int) -> "CostParams":
        """Return a copy with delta = L / N."""
        return CostParams(
            bandwidth=self.bandwidth, noise_density=self.noise_density,
            theta=self.theta, sigma=self.sigma, c0=self.c0, v=self.v,
            t_max_cmp=self.t_max_cmp, t_max_com=self.t_max_com,
            clients_per_round=self.clients_per_round,
            delta=self.clients_per_round / num_clients,
        )


@dataclass
class CostBreakdown:
    """All cost quantities for one (FC, client) pair in one round."""

    rate: float           # bits/s
    t_com: float          # s
    e_com: float          # J
    t_cmp_iter: float     # s
    e_cmp_iter: float     # J
    t_round: float        # s
    e_round: float        # J
    wset: float           # weighted time+energy cost
    total: float          # wset plus any recommendation surcharge


def data_rate(selected: bool, bandwidth: float, channel_gain: float,
              power: float, noise_density: float) -> float:
    """Shannon uplink rate in bits/s; zero for an unselected client."""
    if not selected:
        return 0.0
    snr = channel_gain * power / (noise_density * bandwidth)
    return bandwidth * math.log2(1.0 + snr)


def comm_cost(profile: "ClientProfile", rate: float) -> tuple[float, float]:
    """Upload time and energy for one round's model transfer."""
    if profile.model_bits == 0:
        return 0.0, 0.0
    if rate <= 0:
        raise InfeasibleLinkError(
            f"client {profile.id}: selected with zero uplink rate")
    t_com = profile.model_bits / rate
    return t_com, profile.power_w * t_com


def cmp_cost_per_iter(profile: "ClientProfile") -> tuple[float, float]:
    """Time and energy of one local training iteration over the full shard."""
    cycles = profile.num_samples * profile.cycles_per_sample
    t_cmp = cycles / profile.cpu_hz
    e_cmp = profile.capacitance_coeff * cycles * profile.cpu_hz ** (profile.zeta - 1.0)
    return t_cmp, e_cmp


def round_cost(theta: float, t_com: float, e_com: float,
               t_cmp: float, e_cmp: float) -> tuple[float, float]:
    """Whole-round time and energy at local-accuracy target theta.

    The iteration count scales as ln(1/theta) and the round multiplier as
    1/(1-theta); both diverge at the interval endpoints, which is why theta
    is restricted to (THETA_MIN, THETA_MAX).
    """
    if not THETA_MIN <= theta <= THETA_MAX:
        raise ValueError(f"theta={theta} outside [{THETA_MIN}, {THETA_MAX}]")
    iters = math.log(1.0 / theta)
    mult = 1.0 / (1.0 - theta)
    return mult * (iters * t_cmp + t_com), mult * (iters * e_cmp + e_com)


def total_cost(profile: "ClientProfile", fc_id: int, client_id: int,
               t_round: float, e_round: float, sigma: float, c0: float) -> float:
    """Weighted cost plus the recommendation surcharge for non-self picks."""
    wset = profile.weight_time * t_round + profile.weight_energy * e_round
    if client_id != fc_id:
        wset += sigma * c0
    return wset


def is_feasible(profile: "ClientProfile", t_max_cmp: float) -> bool:
    """Straggler test: one local iteration must fit within t_max_cmp."""
    t_cmp, _ = cmp_cost_per_iter(profile)
    return t_cmp <= t_max_cmp


def client_cost_breakdown(profile: "ClientProfile", channel_gain: float,
                          fc_id: int, theta: float,
                          params: CostParams) -> CostBreakdown:
    """Full cost breakdown for a selected client recommended by fc_id."""
    rate = data_rate(True, params.bandwidth, channel_gain, profile.power_w,
                     params.noise_density)
    t_com, e_com = comm_cost(profile, rate)
    t_cmp, e_cmp = cmp_cost_per_iter(profile)
    t_round, e_round = round_cost(theta, t_com, e_com, t_cmp, e_cmp)
    wset = profile.weight_time * t_round + profile.weight_energy * e_round
    total = total_cost(profile, fc_id, profile.id, t_round, e_round,
                       params.sigma, params.c0)
    return CostBreakdown(rate=rate, t_com=t_com, e_com=e_com,
                         t_cmp_iter=t_cmp, e_cmp_iter=e_cmp,
                         t_round=t_round, e_round=e_round,
                         wset=wset, total=total)
