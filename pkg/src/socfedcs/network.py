"""Population generation, FC-SC trust graph, Gauss-Markov mobility, coverage,
availability, and the wireless channel.

Client indexing convention: clients 0..M-1 are first-order clients (FCs),
clients M..M+K-1 are second-order clients (SCs); SC k has global id M + k.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

POWER_POOL_W = (0.1, 0.2, 0.3, 0.4, 0.5)
CPU_POOL_HZ = tuple(float(f) for f in range(20_000_000, 200_000_001, 10_000_000))


class Tier(Enum):
    FIRST_ORDER = "fc"
    SECOND_ORDER = "sc"


@dataclass(frozen=True)
class ClientProfile:
    """Static per-client resources, data volume, and cost weights."""

    id: int
    tier: Tier
    power_w: float            # uplink transmit power
    cpu_hz: float             # CPU frequency, cycles/s
    cycles_per_sample: float
    num_samples: int
    model_bits: float
    capacitance_coeff: float  # effective switched capacitance
    zeta: float               # compute-energy exponent, >= 2
    weight_time: float
    weight_energy: float

    def __post_init__(self):
        if min(self.power_w, self.cpu_hz, self.cycles_per_sample,
               self.num_samples, self.capacitance_coeff) <= 0:
            raise ValueError(f"client {self.id}: resource fields must be positive")
        if self.model_bits < 0:
            raise ValueError(f"client {self.id}: model_bits must be >= 0")
        if self.zeta < 2.0:
            raise ValueError(f"client {self.id}: zeta must be >= 2")
        if not math.isclose(self.weight_time + self.weight_energy, 1.0,
                            rel_tol=0.0, abs_tol=1e-12):
            raise ValueError(f"client {self.id}: time/energy weights must sum to 1")


@dataclass(frozen=True)
class TrustGraph:
    """Weighted FC->SC trust matrix; a zero entry means no edge."""

    weights: np.ndarray  # (M, K), entries in [0, 1]

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 2:
            raise ValueError("trust weights must be an M x K matrix")
        if (w < 0).any() or (w > 1).any():
            raise ValueError("trust weights must lie in [0, 1]")
        object.__setattr__(self, "weights", w)

    @property
    def num_fc(self) -> int:
        return self.weights.shape[0]

    @property
    def num_sc(self) -> int:
        return self.weights.shape[1]

    @property
    def num_clients(self) -> int:
        return self.num_fc + self.num_sc

    def trusted_sc(self, m: int) -> np.ndarray:
        """SC indices (0-based, local) trusted by FC m."""
        return np.nonzero(self.weights[m] > 0)[0]

    def candidates(self, m: int) -> np.ndarray:
        """Global client ids of FC m's candidate pool: m itself plus its
        trusted SCs, ascending (the FC id always sorts first)."""
        return np.concatenate(([m], self.trusted_sc(m) + self.num_fc))


@dataclass(frozen=True)
class MobilityState:
    position: tuple[float, float]
    speed: float
    direction: float          # radians
    gm_memory: float          # in [0, 1]
    mean_speed: float
    mean_direction: float
    speed_stddev: float
    direction_stddev: float
    home_radius: float = 100.0  # beyond this, the mean direction points home


@dataclass(frozen=True)
class NetworkSnapshot:
    """Dynamic per-round state over all N clients."""

    round: int
    channel_gains: np.ndarray   # (N,) power gains; 0 outside coverage
    available: np.ndarray       # (N,) bool
    in_coverage: np.ndarray     # (N,) bool
    distances: np.ndarray       # (N,) metres from the server


@dataclass(frozen=True)
class ChannelParams:
    """Log-distance path loss with unit-mean Rayleigh (exponential) fading."""

    path_loss_exp: float = 3.76
    ref_distance: float = 1.0
    ref_gain: float = 1.0

    @staticmethod
    def calibrated(bandwidth: float, noise_density: float, *,
                   target_snr_db: float = 20.0, cal_distance: float = 50.0,
                   cal_power: float = 0.3, path_loss_exp: float = 3.76,
                   ref_distance: float = 1.0) -> "ChannelParams":
        """Pick ref_gain so the median SNR at cal_distance with cal_power
        equals target_snr_db (the exponential fading term has median ln 2)."""
        snr = 10.0 ** (target_snr_db / 10.0)
        gain = (snr * noise_density * bandwidth *
                (cal_distance / ref_distance) ** path_loss_exp /
                (math.log(2.0) * cal_power))
        return ChannelParams(path_loss_exp=path_loss_exp,
                             ref_distance=ref_distance, ref_gain=gain)


def path_loss(distance: float, channel: ChannelParams) -> float:
    """Deterministic path-loss gain; distances below ref_distance clamp."""
    d = max(distance, channel.ref_distance)
    return channel.ref_gain * (d / channel.ref_distance) ** (-channel.path_loss_exp)


def channel_gain(distance: float, rng: np.random.Generator,
                 channel: ChannelParams) -> float:
    """One block-fading realization of the channel power gain."""
    return path_loss(distance, channel) * rng.exponential()


def generate_population(num_fc: int, num_sc: int, rng: np.random.Generator, *,
                        data_samples_min: int = 200, data_samples_max: int = 500,
                        cycles_per_sample_min: float = 5e3,
                        cycles_per_sample_max: float = 1.5e4,
                        model_bits: float = 1e5,
                        capacitance_coeff: float = 1e-28, zeta: float = 2.0,
                        weight_time: float = 0.5) -> list[ClientProfile]:
    """Draw the N = num_fc + num_sc client profiles.

    Transmit power and CPU frequency are drawn uniformly from their discrete
    pools; data volume and per-sample cycles are drawn uniformly from their
    configured ranges.
    """
    if num_fc <= 0:
        raise ValueError("num_fc must be positive")
    if num_sc < num_fc:
        raise ValueError("num_sc must be at least num_fc")
    n = num_fc + num_sc
    powers = rng.choice(POWER_POOL_W, size=n)
    cpus = rng.choice(CPU_POOL_HZ, size=n)
    samples = rng.integers(data_samples_min, data_samples_max + 1, size=n)
    cycles = rng.uniform(cycles_per_sample_min, cycles_per_sample_max, size=n)
    profiles = []
    for i in range(n):
        tier = Tier.FIRST_ORDER if i < num_fc else Tier.SECOND_ORDER
        profiles.append(ClientProfile(
            id=i, tier=tier, power_w=float(powers[i]), cpu_hz=float(cpus[i]),
            cycles_per_sample=float(cycles[i]), num_samples=int(samples[i]),
            model_bits=model_bits, capacitance_coeff=capacitance_coeff,
            zeta=zeta, weight_time=weight_time, weight_energy=1.0 - weight_time))
    return profiles


def generate_trust_graph(num_fc: int, num_sc: int, edge_prob: float,
                         rng: np.random.Generator) -> TrustGraph:
    """Erdos-Renyi bipartite trust graph with Uniform(0, 1] edge weights."""
    if not 0.0 <= edge_prob <= 1.0:
        raise ValueError("edge_prob must lie in [0, 1]")
    edges = rng.random((num_fc, num_sc)) < edge_prob
    # 1 - U gives a weight in (0, 1], so present edges are never weight-zero.
    weights = np.where(edges, 1.0 - rng.random((num_fc, num_sc)), 0.0)
    return TrustGraph(weights=weights)


def init_mobility(rng: np.random.Generator, *, spawn_radius: float = 100.0,
                  gm_memory: float = 0.75, mean_speed: float = 1.5,
                  speed_stddev: float = 0.5,
                  direction_stddev: float = 0.3) -> MobilityState:
    """Spawn a client uniformly inside the coverage disk."""
    r = spawn_radius * math.sqrt(rng.random())
    phi = rng.uniform(0.0, 2.0 * math.pi)
    direction = rng.uniform(0.0, 2.0 * math.pi)
    speed = max(0.0, mean_speed + speed_stddev * rng.standard_normal())
    return MobilityState(position=(r * math.cos(phi), r * math.sin(phi)),
                         speed=speed, direction=direction, gm_memory=gm_memory,
                         mean_speed=mean_speed, mean_direction=direction,
                         speed_stddev=speed_stddev,
                         direction_stddev=direction_stddev)


def step_mobility(state: MobilityState, dt: float, rng: np.random.Generator, *,
                  bound: float = 300.0) -> MobilityState:
    """One Gauss-Markov update of speed and direction, then a position step.

    Clients that stray past their home radius have their mean direction
    re-aimed at the server, so excursions out of coverage happen but do not
    become permanent; a [-bound, bound]^2 box reflects outliers as a backstop.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    g = state.gm_memory
    noise_scale = math.sqrt(max(0.0, 1.0 - g * g))
    speed = (g * state.speed + (1.0 - g) * state.mean_speed
             + noise_scale * state.speed_stddev * rng.standard_normal())
    speed = max(0.0, speed)
    mean_direction = state.mean_direction
    # Revert toward the mean along the shorter arc so e.g. headings of +3 and
    # -3 rad (nearly identical bearings) do not produce a spurious turn.
    turn = math.remainder(mean_direction - state.direction, 2.0 * math.pi)
    direction = (state.direction + (1.0 - g) * turn
                 + noise_scale * state.direction_stddev * rng.standard_normal())
    x = state.position[0] + speed * dt * math.cos(direction)
    y = state.position[1] + speed * dt * math.sin(direction)
    if abs(x) > bound:
        x = math.copysign(2.0 * bound, x) - x
        direction = math.pi - direction
    if abs(y) > bound:
        y = math.copysign(2.0 * bound, y) - y
        direction = -direction
    if math.hypot(x, y) > state.home_radius:
        mean_direction = math.atan2(-y, -x)
    return replace(state, position=(x, y), speed=speed, direction=direction,
                   mean_direction=mean_direction)


def build_snapshot(profiles: list[ClientProfile],
                   mobility_states: list[MobilityState], round_idx: int,
                   rng: np.random.Generator, *, channel: ChannelParams,
                   coverage_radius: float = 100.0,
                   availability: float = 0.6) -> NetworkSnapshot:
    """Coverage, Bernoulli availability, and block-fading gains for one round.

    Draw order is fixed (availability first, then fading) so snapshots are
    reproducible for a given generator state.
    """
    n = len(profiles)
    dist = np.array([math.hypot(*s.position) for s in mobility_states])
    in_coverage = dist <= coverage_radius
    available = (rng.random(n) < availability) & in_coverage
    fading = rng.exponential(size=n)
    pl = np.array([path_loss(d, channel) for d in dist])
    gains = np.where(in_coverage, pl * fading, 0.0)
    return NetworkSnapshot(round=round_idx, channel_gains=gains,
                           available=available, in_coverage=in_coverage,
                           distances=dist)


def topology_to_json(profiles: list[ClientProfile], trust: TrustGraph) -> str:
    """Serialize a pinned topology (clients + trust matrix) to JSON."""
    doc = {
        "clients": [{
            "id": p.id, "tier": p.tier.value, "power_w": p.power_w,
            "cpu_hz": p.cpu_hz, "cycles_per_sample": p.cycles_per_sample,
            "num_samples": p.num_samples, "model_bits": p.model_bits,
            "capacitance_coeff": p.capacitance_coeff, "zeta": p.zeta,
            "weight_time": p.weight_time, "weight_energy": p.weight_energy,
        } for p in profiles],
        "trust": {"m": trust.num_fc, "k": trust.num_sc,
                  "weights": trust.weights.tolist()},
    }
    return json.dumps(doc, indent=2)


def topology_from_json(text: str) -> tuple[list[ClientProfile], TrustGraph]:
    doc = json.loads(text)
    profiles = [ClientProfile(
        id=c["id"], tier=Tier(c["tier"]), power_w=c["power_w"],
        cpu_hz=c["cpu_hz"], cycles_per_sample=c["cycles_per_sample"],
        num_samples=c["num_samples"], model_bits=c["model_bits"],
        capacitance_coeff=c["capacitance_coeff"], zeta=c["zeta"],
        weight_time=c["weight_time"], weight_energy=c["weight_energy"],
    ) for c in doc["clients"]]
    trust = TrustGraph(weights=np.asarray(doc["trust"]["weights"], dtype=float))
    if trust.num_fc != doc["trust"]["m"] or trust.num_sc != doc["trust"]["k"]:
        raise ValueError("trust matrix shape disagrees with declared m, k")
    return profiles, trust
