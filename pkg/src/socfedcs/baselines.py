"""Comparison selectors, all restricted to the FC tier: Random, Greedy,
PowCS (power-of-choice by local loss), FedCS (deadline-bounded), and an
Oort-style utility selector. They emit the same decision type as the
scheduler and are checked by the same constraint validator.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .costs import CostParams
from .scheduler import RoundContext, SelectionDecision
from .training import Dataset, ClientShard, GlobalModel, sample_losses


class BackendMissingError(RuntimeError):
    """The selector needs the training backend but none is attached."""


def _eligible_fcs(ctx: RoundContext) -> np.ndarray:
    m = ctx.trust.num_fc
    return np.nonzero(ctx.eligible[:m])[0]


def _decision(ctx: RoundContext, fcs: list[int],
              theta: float) -> SelectionDecision:
    pairs = [(int(m), int(m)) for m in fcs]
    costs = {(m, i): ctx.breakdown(m, i, theta) for m, i in pairs}
    decision = SelectionDecision(pairs=pairs, theta=theta,
                                 per_client_costs=costs, objective=0.0)
    decision.objective = ctx.params.v * decision.max_cost
    return decision


def select_random(ctx: RoundContext, clients_per_round: int,
                  rng: np.random.Generator,
                  theta: float = 0.5) -> SelectionDecision:
    """Uniform sample without replacement from the eligible FCs."""
    fcs = _eligible_fcs(ctx)
    take = min(clients_per_round, len(fcs))
    chosen = sorted(rng.choice(fcs, size=take, replace=False)) if take else []
    return _decision(ctx, [int(m) for m in chosen], theta)


def select_greedy(ctx: RoundContext, clients_per_round: int,
                  theta: float = 0.5) -> SelectionDecision:
    """Lowest own-cost FCs first; ties broken by id."""
    fcs = _eligible_fcs(ctx)
    ranked = sorted(fcs, key=lambda m: (ctx.cost(int(m), int(m), theta), int(m)))
    return _decision(ctx, [int(m) for m in ranked[:clients_per_round]], theta)


def select_powcs(ctx: RoundContext, clients_per_round: int,
                 candidate_set_size: int, model: GlobalModel | None,
                 dataset: Dataset | None, shards: list[ClientShard] | None,
                 rng: np.random.Generator,
                 theta: float = 0.5) -> SelectionDecision:
    """Power-of-choice: sample a candidate set of FCs, keep the L with the
    highest local squared-error loss against the current global model."""
    if model is None or dataset is None or shards is None:
        raise BackendMissingError("powcs needs the training backend attached")
    fcs = _eligible_fcs(ctx)
    size = min(candidate_set_size, len(fcs))
    sampled = sorted(int(m) for m in
                     rng.choice(fcs, size=size, replace=False)) if size else []
    losses = {m: _squared_error_loss(model, dataset, shards[m]) for m in sampled}
    # Highest loss first; ties broken by lowest id.
    ranked = sorted(sampled, key=lambda m: (-losses[m], m))
    return _decision(ctx, sorted(ranked[:clients_per_round]), theta)


def _squared_error_loss(model: GlobalModel, dataset: Dataset,
                        shard: ClientShard) -> float:
    if len(shard.indices) == 0:
        return 0.0
    x = dataset.features[shard.indices]
    y = np.eye(model.weights.shape[1])[shard.labels]
    scores = x @ model.weights + model.bias
    return 0.5 * float(np.sum((y - scores) ** 2)) / len(shard.indices)


def select_fedcs(ctx: RoundContext, deadline_s: float,
                 theta: float = 0.5) -> SelectionDecision:
    """Accumulate FCs in ascending round time while the schedule fits the
    deadline. Uploads are parallel (one OFDMA subchannel each), so the
    deadline binds the slowest selected client, not the sum; there is no cap
    on the number selected."""
    if deadline_s <= 0:
        raise ValueError("deadline must be positive")
    fcs = _eligible_fcs(ctx)
    times = {int(m): ctx.breakdown(int(m), int(m), theta).t_round for m in fcs}
    chosen = []
    for m in sorted(fcs, key=lambda m: (times[int(m)], int(m))):
        if times[int(m)] > deadline_s:
            break
        chosen.append(int(m))
    return _decision(ctx, sorted(chosen), theta)


@dataclass
class OortSelector:
    """Utility-driven exploit/explore selector over the FC tier.

    Utility is statistical value (shard size times root-mean-square sample
    loss) discounted when the client's round time exceeds the preference;
    utilities refresh after each observed participation. Unexplored FCs are
    drawn uniformly for the exploration slots.
    """

    num_fc: int
    exploit_fraction: float = 0.8
    t_pref_s: float = 1.0
    utilities: dict[int, float] = field(default_factory=dict)
    explored: set[int] = field(default_factory=set)

    def observe(self, m: int, shard_size: int, mean_sq_loss: float,
                round_time: float) -> None:
        stat = shard_size * math.sqrt(max(mean_sq_loss, 0.0))
        util = stat
        if round_time > self.t_pref_s:
            util *= self.t_pref_s / round_time
        self.utilities[m] = util
        self.explored.add(m)

    def observe_losses(self, m: int, model: GlobalModel, dataset: Dataset,
                       shard: ClientShard, round_time: float) -> None:
        losses = sample_losses(model, dataset.features[shard.indices],
                               shard.labels)
        mean_sq = float(np.mean(losses ** 2)) if len(losses) else 0.0
        self.observe(m, len(shard.indices), mean_sq, round_time)

    def select(self, ctx: RoundContext, clients_per_round: int,
               rng: np.random.Generator,
               theta: float = 0.5) -> SelectionDecision:
        fcs = [int(m) for m in _eligible_fcs(ctx)]
        take = min(clients_per_round, len(fcs))
        n_exploit = math.ceil(self.exploit_fraction * take)
        known = [m for m in fcs if m in self.explored]
        # Highest utility first, ties by lowest id.
        known.sort(key=lambda m: (-self.utilities.get(m, 0.0), m))
        chosen = known[:n_exploit]
        unexplored = [m for m in fcs if m not in self.explored]
        n_explore = take - len(chosen)
        if n_explore > 0 and unexplored:
            picks = rng.choice(np.array(unexplored),
                               size=min(n_explore, len(unexplored)),
                               replace=False)
            chosen.extend(int(m) for m in picks)
        # Backfill from remaining known FCs if exploration ran dry.
        for m in known[n_exploit:]:
            if len(chosen) >= take:
                break
            if m not in chosen:
                chosen.append(m)
        return _decision(ctx, sorted(chosen), theta)
