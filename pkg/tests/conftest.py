"""Shared builders for hand-made selection instances with exact per-client
round costs (pure compute time, zero model bits, clean unit channel)."""
import math

import numpy as np

from socfedcs.costs import CostBreakdown, CostParams
from socfedcs.network import (ClientProfile, NetworkSnapshot, Tier,
                              TrustGraph)
from socfedcs.scheduler import RoundContext

THETA = 0.5


def wset_to_tcmp(wset, theta=THETA):
    # wset = t_cmp * ln(1/theta) / (1 - theta) when only compute time counts
    return wset * (1.0 - theta) / math.log(1.0 / theta)


def make_ctx(trust_weights, client_wsets, params, available=None):
    """Instance whose per-client round cost at theta equals client_wsets[i]
    exactly."""
    w = np.asarray(trust_weights, dtype=float)
    num_fc, num_sc = w.shape
    n = num_fc + num_sc
    assert len(client_wsets) == n
    profiles = [ClientProfile(
        id=i, tier=Tier.FIRST_ORDER if i < num_fc else Tier.SECOND_ORDER,
        power_w=0.1, cpu_hz=1.0, cycles_per_sample=wset_to_tcmp(client_wsets[i]),
        num_samples=1, model_bits=0.0, capacitance_coeff=1e-300, zeta=2.0,
        weight_time=1.0, weight_energy=0.0) for i in range(n)]
    avail = (np.ones(n, dtype=bool) if available is None
             else np.asarray(available, dtype=bool))
    snap = NetworkSnapshot(round=0, channel_gains=np.ones(n), available=avail,
                           in_coverage=np.ones(n, dtype=bool),
                           distances=np.zeros(n))
    return RoundContext(profiles, TrustGraph(weights=w), snap, params)


def fake_breakdown(total):
    return CostBreakdown(rate=1.0, t_com=0.0, e_com=0.0, t_cmp_iter=0.0,
                         e_cmp_iter=0.0, t_round=total, e_round=0.0,
                         wset=total, total=total)


def loose_params(**kw):
    base = dict(theta=THETA, sigma=1.0, c0=0.05, v=10.0, t_max_cmp=10.0,
                t_max_com=10.0, clients_per_round=2, delta=0.25)
    base.update(kw)
    return CostParams(**base)
