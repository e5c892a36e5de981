"""Two-stage drift-plus-penalty client selection with virtual queues.

Each FC ranks its candidate pool (itself plus trusted SCs) by the penalty
score v * cost - backlog and recommends its best member; the server keeps the
top-L recommendations, resolving duplicate-SC conflicts in favour of the
lower score. Per-FC virtual queues encode the deficit against the target
participation rate; their backlog feeds back into the score so starved FCs
win slots eventually. The per-round local-accuracy target is tuned by
alternating the selection step with a harmony-search minimization of the
round objective.

A brute-force enumerator over the per-FC choice space is provided as an
exact oracle for small instances.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import sghs
from .costs import (THETA_MAX, THETA_MIN, CostBreakdown, CostParams,
                    client_cost_breakdown, clamp_theta)
from .network import ClientProfile, NetworkSnapshot, TrustGraph


class InvariantViolation(AssertionError):
    """A selection decision broke one of the hard constraints."""


class InstanceTooLargeError(RuntimeError):
    """Brute-force enumeration would exceed the state cap."""


@dataclass
class VirtualQueues:
    """Per-FC participation-deficit backlog; entries never go negative."""

    z: np.ndarray

    @classmethod
    def zeros(cls, num_fc: int) -> "VirtualQueues":
        return cls(z=np.zeros(num_fc))

    def lyapunov(self) -> float:
        return 0.5 * float(np.sum(self.z ** 2))


@dataclass
class SelectionDecision:
    """One round's assignment: selected (fc, client) pairs, the chosen
    local-accuracy target, per-pair cost breakdowns, and the value of the
    per-round objective."""

    pairs: list[tuple[int, int]]
    theta: float
    per_client_costs: dict[tuple[int, int], CostBreakdown]
    objective: float

    @property
    def max_cost(self) -> float:
        if not self.pairs:
            return 0.0
        return max(c.total for c in self.per_client_costs.values())

    def selected_fcs(self) -> set[int]:
        return {m for m, _ in self.pairs}


class RoundContext:
    """Per-round cost cache over the whole population.

    Precomputes the per-client coefficients of the round cost as a function
    of the accuracy target t: wset(t) = (u * ln(1/t) + v) / (1 - t), so that
    candidate scoring and the accuracy-target search are vectorized.
    """

    def __init__(self, profiles: list[ClientProfile], trust: TrustGraph,
                 snapshot: NetworkSnapshot, params: CostParams):
        self.profiles = profiles
        self.trust = trust
        self.snapshot = snapshot
        self.params = params
        n = len(profiles)

        power = np.array([p.power_w for p in profiles])
        cycles = np.array([p.num_samples * p.cycles_per_sample for p in profiles])
        cpu = np.array([p.cpu_hz for p in profiles])
        rho = np.array([p.capacitance_coeff for p in profiles])
        zeta = np.array([p.zeta for p in profiles])
        lam_t = np.array([p.weight_time for p in profiles])
        lam_e = np.array([p.weight_energy for p in profiles])
        bits = np.array([p.model_bits for p in profiles])

        self.t_cmp = cycles / cpu
        self.e_cmp = rho * cycles * cpu ** (zeta - 1.0)
        snr = snapshot.channel_gains * power / (params.noise_density * params.bandwidth)
        rate = params.bandwidth * np.log2(1.0 + snr)
        with np.errstate(divide="ignore"):
            self.t_com = np.where(rate > 0, bits / np.maximum(rate, 1e-300), np.inf)
        self.e_com = power * self.t_com
        self.u = lam_t * self.t_cmp + lam_e * self.e_cmp
        self.v = lam_t * self.t_com + lam_e * self.e_com
        self.eligible = (snapshot.available & snapshot.in_coverage
                         & (self.t_cmp <= params.t_max_cmp)
                         & (self.t_com <= params.t_max_com))
        self._wset_cache: dict[float, np.ndarray] = {}
        self._candidates = [trust.candidates(m) for m in range(trust.num_fc)]

    def candidates(self, m: int) -> np.ndarray:
        return self._candidates[m]

    def wset(self, theta: float) -> np.ndarray:
        cached = self._wset_cache.get(theta)
        if cached is None:
            cached = (self.u * math.log(1.0 / theta) + self.v) / (1.0 - theta)
            if len(self._wset_cache) > 64:
                self._wset_cache.clear()
            self._wset_cache[theta] = cached
        return cached

    def cost(self, m: int, i: int, theta: float) -> float:
        """Round cost of client i when recommended by FC m (fast path)."""
        g = float(self.wset(theta)[i])
        if i != m:
            g += self.params.sigma * self.params.c0
        return g

    def breakdown(self, m: int, i: int, theta: float) -> CostBreakdown:
        """Scalar-path cost breakdown, used for emitted decisions."""
        return client_cost_breakdown(self.profiles[i],
                                     float(self.snapshot.channel_gains[i]),
                                     m, theta, self.params)


def score(m: int, i: int, theta: float, ctx: RoundContext,
          queues: VirtualQueues, params: CostParams) -> float:
    """Drift-plus-penalty score of candidate i under FC m; lower is better.

    Selecting a candidate under m reduces the global queue term by exactly
    z_m, so each candidate's marginal score is v * cost - z_m.
    """
    if not ctx.eligible[i]:
        raise ValueError(f"client {i} is not eligible this round")
    if i not in ctx.candidates(m):
        raise ValueError(f"client {i} is not in FC {m}'s candidate pool")
    return params.v * ctx.cost(m, i, theta) - float(queues.z[m])


def fc_recommend(m: int, theta: float, ctx: RoundContext,
                 queues: VirtualQueues,
                 params: CostParams) -> tuple[int, int, float] | None:
    """FC m's recommendation: its lowest-scoring eligible candidate, ties
    broken by lowest client id; None if no candidate is eligible."""
    cands = ctx.candidates(m)
    mask = ctx.eligible[cands]
    if not mask.any():
        return None
    cands = cands[mask]
    g = ctx.wset(theta)[cands] + np.where(cands != m,
                                          params.sigma * params.c0, 0.0)
    scores = params.v * g - float(queues.z[m])
    best = int(np.argmin(scores))  # first minimum; cands are id-ascending
    return m, int(cands[best]), float(scores[best])


def server_select(recommendations: list[tuple[int, int, float]], theta: float,
                  ctx: RoundContext, queues: VirtualQueues,
                  params: CostParams,
                  max_selected: int | None = None) -> SelectionDecision:
    """Keep the top-L recommendations by ascending score.

    Candidate pools overlap, so two FCs may recommend the same SC; only the
    lower-scoring pair is kept and the losing FC sits the round out.
    """
    if max_selected is None:
        max_selected = params.clients_per_round
    by_client: dict[int, tuple[float, int, int]] = {}
    for m, i, s in recommendations:
        key = (s, i, m)
        if i not in by_client or key < by_client[i]:
            by_client[i] = key
    ranked = sorted(by_client.values())
    chosen = ranked[:max_selected]
    pairs = [(m, i) for _, i, m in chosen]
    costs = {(m, i): ctx.breakdown(m, i, theta) for m, i in pairs}
    decision = SelectionDecision(pairs=pairs, theta=theta,
                                 per_client_costs=costs, objective=0.0)
    decision.objective = round_objective(decision, queues, params.delta, params.v)
    return decision


def round_objective(decision: SelectionDecision, queues: VirtualQueues,
                    delta: float, v: float) -> float:
    """Per-round objective: v times the worst selected cost plus the queue
    pressure term sum_m z_m * (delta - selected_m)."""
    penalty = v * decision.max_cost
    selected = decision.selected_fcs()
    queue_term = float(np.sum(queues.z)) * delta
    queue_term -= sum(float(queues.z[m]) for m in selected)
    return penalty + queue_term


def update_queues(queues: VirtualQueues, decision: SelectionDecision,
                  delta: float) -> VirtualQueues:
    """Backlog grows by delta for idle FCs and drains by one for served FCs."""
    served = np.zeros(len(queues.z))
    for m in decision.selected_fcs():
        served[m] = 1.0
    z = np.maximum(0.0, queues.z + delta * (served == 0) - served)
    return VirtualQueues(z=z)


def drift_bound(num_fc: int, delta: float) -> float:
    """Constant bounding the quadratic part of the one-step Lyapunov drift."""
    if num_fc < 1:
        raise ValueError("num_fc must be at least 1")
    return num_fc * (1.0 + delta ** 2) / 2.0


def check_drift_inequality(before: VirtualQueues, after: VirtualQueues,
                           decision: SelectionDecision, delta: float,
                           tol: float = 1e-9) -> None:
    """Assert the deterministic one-step drift bound; raises on violation."""
    drift = after.lyapunov() - before.lyapunov()
    selected = decision.selected_fcs()
    bound = drift_bound(len(before.z), delta)
    bound += float(np.sum(before.z)) * delta
    bound -= sum(float(before.z[m]) for m in selected)
    if drift > bound + tol:
        raise InvariantViolation(
            f"one-step drift {drift} exceeds its bound {bound}")


def select_at_theta(theta: float, ctx: RoundContext, queues: VirtualQueues,
                    params: CostParams) -> SelectionDecision:
    """Two-stage selection with iterated polling.

    Costs depend on the recommended client alone, so overlapping candidate
    pools make many FCs recommend the same globally cheap SC; with a single
    poll the duplicate-dedup collapses the round to a handful of selections
    and the virtual queues can never stabilize. The server therefore accepts
    the best pending recommendation one at a time, and an FC whose candidate
    was claimed re-recommends its next-best unclaimed one; with disjoint
    pools this reduces exactly to the single-poll top-L rule.
    """
    import heapq

    wset = ctx.wset(theta)
    surcharge = params.sigma * params.c0
    heap: list[tuple[float, int, int, int]] = []
    ranked: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    for m in range(ctx.trust.num_fc):
        cands = ctx.candidates(m)
        cands = cands[ctx.eligible[cands]]
        if len(cands) == 0:
            continue
        g = wset[cands] + np.where(cands != m, surcharge, 0.0)
        order = np.argsort(g, kind="stable")  # ties -> lowest client id
        cands, g = cands[order], g[order]
        ranked[m] = (cands, g)
        score = params.v * float(g[0]) - float(queues.z[m])
        heapq.heappush(heap, (score, int(cands[0]), m, 0))
    used: set[int] = set()
    pairs: list[tuple[int, int]] = []
    while heap and len(pairs) < params.clients_per_round:
        score, i, m, ptr = heapq.heappop(heap)
        if i in used:
            cands, g = ranked[m]
            ptr += 1
            while ptr < len(cands) and int(cands[ptr]) in used:
                ptr += 1
            if ptr < len(cands):
                next_score = params.v * float(g[ptr]) - float(queues.z[m])
                heapq.heappush(heap, (next_score, int(cands[ptr]), m, ptr))
            continue
        pairs.append((m, i))
        used.add(i)
    costs = {(m, i): ctx.breakdown(m, i, theta) for m, i in pairs}
    decision = SelectionDecision(pairs=pairs, theta=theta,
                                 per_client_costs=costs, objective=0.0)
    decision.objective = round_objective(decision, queues, params.delta,
                                         params.v)
    return decision


def alternating_optimize(ctx: RoundContext, queues: VirtualQueues,
                         params: CostParams, sghs_params: sghs.SghsParams,
                         rng: np.random.Generator, *, theta_init: float = 0.5,
                         max_alternations: int = 10,
                         tolerance: float = 1e-6) -> SelectionDecision:
    """Alternate the selection step with a harmony-search pass over the
    accuracy target until the objective stalls; returns the best decision
    seen. A zero improvisation budget degenerates to one-shot selection at
    theta_init."""
    theta = clamp_theta(theta_init)
    best: SelectionDecision | None = None
    prev = math.inf
    for _ in range(max_alternations):
        decision = select_at_theta(theta, ctx, queues, params)
        if best is None or decision.objective < best.objective:
            best = decision
        if prev - decision.objective < tolerance or sghs_params.ni == 0:
            break
        prev = decision.objective
        theta = _optimize_theta(decision, ctx, queues, params, sghs_params, rng)
    return best


def _optimize_theta(decision: SelectionDecision, ctx: RoundContext,
                    queues: VirtualQueues, params: CostParams,
                    sghs_params: sghs.SghsParams,
                    rng: np.random.Generator) -> float:
    """Minimize the round objective over the accuracy target with the
    selection held fixed; the queue term is constant, so only the worst
    selected cost matters."""
    if not decision.pairs:
        return decision.theta
    idx = np.array([i for _, i in decision.pairs])
    surcharge = np.where(idx != np.array([m for m, _ in decision.pairs]),
                         params.sigma * params.c0, 0.0)
    u, v = ctx.u[idx], ctx.v[idx]

    def objective(theta: float) -> float:
        wset = (u * math.log(1.0 / theta) + v) / (1.0 - theta)
        return params.v * float(np.max(wset + surcharge))

    theta, _ = sghs.minimize(objective, (THETA_MIN, THETA_MAX), sghs_params, rng)
    return theta


def brute_force_select(ctx: RoundContext, queues: VirtualQueues, theta: float,
                       params: CostParams, *,
                       max_states: int = 10 ** 6) -> SelectionDecision:
    """Exact minimizer of the round objective by enumerating every per-FC
    choice (idle or one eligible candidate); small instances only."""
    num_fc = ctx.trust.num_fc
    options: list[list[int | None]] = []
    states = 1
    for m in range(num_fc):
        cands = [int(i) for i in ctx.candidates(m) if ctx.eligible[i]]
        options.append([None] + cands)
        states *= 1 + len(cands)
    if states > max_states:
        raise InstanceTooLargeError(
            f"{states} assignments exceed the cap of {max_states}")

    pair_cost = {(m, i): ctx.breakdown(m, i, theta).total
                 for m in range(num_fc) for i in options[m] if i is not None}
    base_queue = float(np.sum(queues.z)) * params.delta
    best_obj = math.inf
    best_pairs: list[tuple[int, int]] = []

    def recurse(m: int, used: set[int], pairs: list[tuple[int, int]]):
        nonlocal best_obj, best_pairs
        if m == num_fc:
            penalty = params.v * max(
                (pair_cost[p] for p in pairs), default=0.0)
            obj = penalty + base_queue - sum(float(queues.z[fm])
                                             for fm, _ in pairs)
            if obj < best_obj:
                best_obj = obj
                best_pairs = list(pairs)
            return
        for i in options[m]:
            if i is None:
                recurse(m + 1, used, pairs)
            elif i not in used and len(pairs) < params.clients_per_round:
                pairs.append((m, i))
                used.add(i)
                recurse(m + 1, used, pairs)
                used.remove(i)
                pairs.pop()

    recurse(0, set(), [])
    costs = {(m, i): ctx.breakdown(m, i, theta) for m, i in best_pairs}
    return SelectionDecision(pairs=best_pairs, theta=theta,
                             per_client_costs=costs, objective=best_obj)


def validate_decision(decision: SelectionDecision, ctx: RoundContext,
                      params: CostParams, *, max_selected: int | None = None,
                      fc_only: bool = False) -> None:
    """Independent constraint check for any selector's output; raises
    InvariantViolation on the first broken constraint."""
    if max_selected is not None and len(decision.pairs) > max_selected:
        raise InvariantViolation(
            f"{len(decision.pairs)} selections exceed the cap {max_selected}")
    fcs: set[int] = set()
    clients: set[int] = set()
    for m, i in decision.pairs:
        if m in fcs:
            raise InvariantViolation(f"FC {m} selected more than one client")
        if i in clients:
            raise InvariantViolation(f"client {i} selected under two FCs")
        fcs.add(m)
        clients.add(i)
        if fc_only and i != m:
            raise InvariantViolation(
                f"baseline selected non-FC pair ({m}, {i})")
        if i not in ctx.candidates(m):
            raise InvariantViolation(f"client {i} not in FC {m}'s pool")
        if not ctx.snapshot.available[i] or not ctx.snapshot.in_coverage[i]:
            raise InvariantViolation(f"client {i} unavailable or out of coverage")
        if ctx.t_cmp[i] > params.t_max_cmp:
            raise InvariantViolation(f"client {i} violates the straggler cap")
        if ctx.t_com[i] > params.t_max_com:
            raise InvariantViolation(f"client {i} violates the upload-time cap")
