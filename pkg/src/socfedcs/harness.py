"""Experiment orchestration: configuration, seeding, the round loop
(mobility -> snapshot -> select -> train -> aggregate -> metrics), and
persistence of per-round metrics and run summaries.

All randomness flows from one root seed per run; child generators are
derived per (stream, round) so every selector sees the identical environment
(mobility, fading, availability, data) for a given seed.
"""
from __future__ import annotations

import copy
import csv
import json
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import baselines, network, scheduler, sghs, training
from .costs import CostParams

SCHEMA_VERSION = "socfedcs-metrics-v1"
SUMMARY_SCHEMA = "socfedcs-summary-v1"

METRIC_COLUMNS = [SCHEMA_VERSION, "round", "selector", "max_cost",
                  "time_avg_cost", "theta", "objective", "queue_l1",
                  "n_selected", "selected_pairs", "test_accuracy"]

SELECTORS = ("socfedcs", "random", "greedy", "powcs", "fedcs", "oort")

_STREAMS = {"population": 0, "trust": 1, "mobility_init": 2, "mobility": 3,
            "snapshot": 4, "selector": 5, "data": 6, "training": 7}


class ConfigError(ValueError):
    """Invalid experiment configuration."""


DEFAULT_CONFIG: dict = {
    "rounds": 2000,
    "seeds": [0],
    "selector": "socfedcs",
    "population": {
        "num_fc": 40, "num_sc": 80,
        "data_samples_min": 200, "data_samples_max": 500,
        "cycles_per_sample_min": 5e3, "cycles_per_sample_max": 1.5e4,
        "model_bits": 5e4, "capacitance_coeff": 1e-28, "zeta": 2.0,
        "weight_time": 0.5,
    },
    "trust": {"edge_prob": 0.7},
    "mobility": {"memory": 0.75, "mean_speed": 1.5, "speed_stddev": 0.5,
                 "direction_stddev": 0.3, "dt": 1.0, "bound": 300.0},
    "channel": {"path_loss_exp": 3.76, "ref_distance": 1.0,
                "target_snr_db": 30.0, "cal_distance": 50.0,
                "cal_power": 0.3},
    "network": {"coverage_radius": 100.0, "availability": 0.6},
    "cost": {"bandwidth": 0.2e6, "noise_density_dbm_hz": -174.0,
             "theta": 0.5, "sigma": 1.0, "c0": 0.01, "v": 10.0,
             "t_max_cmp": 0.1, "t_max_com": 0.5, "clients_per_round": 14},
    "scheduler": {"theta_init": 0.5, "max_alternations": 10,
                  "tolerance": 1e-6},
    "sghs": {"hms": 10, "hmcr_mean": 0.98, "hmcr_stddev": 0.01,
             "par_mean": 0.9, "par_stddev": 0.05, "bw_min": 5e-4,
             "ni": 100, "lp": 50},
    "baselines": {"theta": 0.5, "powcs_candidates": 20,
                  "fedcs_deadline_s": 2.0, "oort_exploit_fraction": 0.8,
                  "oort_t_pref_s": 1.0},
    "training": {
        "enabled": False, "scenario": 1, "heterogeneity": 0.3,
        "noise_scale": 0.8, "literal_noise": False, "lr": 0.1,
        "batch_size": 32, "nu": 5.0, "eval_every": 10,
        "dataset": {"kind": "synthetic", "classes": 5, "dim": 16,
                    "samples": 9600, "separation": 2.5,
                    "test_samples": 2000,
                    "train_images": "", "train_labels": "",
                    "test_images": "", "test_labels": ""},
    },
}


def _validate(node, default, path: str) -> None:
    if isinstance(default, dict):
        if not isinstance(node, dict):
            raise ConfigError(f"{path or '<root>'}: expected a mapping")
        for key, value in node.items():
            child = f"{path}.{key}" if path else key
            if key not in default:
                raise ConfigError(f"unknown config key: {child}")
            _validate(value, default[key], child)
    elif isinstance(default, bool):
        if not isinstance(node, bool):
            raise ConfigError(f"{path}: expected a boolean")
    elif isinstance(default, (int, float)):
        if isinstance(node, bool) or not isinstance(node, (int, float)):
            raise ConfigError(f"{path}: expected a number")
    elif isinstance(default, str):
        if not isinstance(node, str):
            raise ConfigError(f"{path}: expected a string")
    elif isinstance(default, list):
        if not isinstance(node, list):
            raise ConfigError(f"{path}: expected a list")


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def make_config(overrides: dict | None = None) -> dict:
    """Full config from defaults plus overrides; rejects unknown keys."""
    overrides = overrides or {}
    _validate(overrides, DEFAULT_CONFIG, "")
    cfg = _merge(DEFAULT_CONFIG, overrides)
    if cfg["rounds"] < 0:
        raise ConfigError("rounds: must be non-negative")
    if cfg["selector"] not in SELECTORS:
        raise ConfigError(f"selector: unknown selector {cfg['selector']!r}")
    if cfg["training"]["dataset"]["kind"] not in ("synthetic", "idx"):
        raise ConfigError("training.dataset.kind: must be 'synthetic' or 'idx'")
    return cfg


def load_config(path: str, overrides: dict | None = None) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from exc
    if overrides:
        doc = _merge(doc, overrides)
    return make_config(doc)


def apply_set_overrides(config_doc: dict, assignments: list[str]) -> dict:
    """Apply `--set dotted.key=value` overrides (values parsed as JSON when
    possible, kept as strings otherwise)."""
    doc = copy.deepcopy(config_doc)
    for item in assignments:
        if "=" not in item:
            raise ConfigError(f"--set needs key=value, got {item!r}")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = doc
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"--set {key}: {part} is not a mapping")
        node[parts[-1]] = value
    return doc


def _stream_rng(seed: int, stream: str, *key: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=(_STREAMS[stream], *key)))


def _cost_params(cfg: dict) -> CostParams:
    cost = cfg["cost"]
    n = cfg["population"]["num_fc"] + cfg["population"]["num_sc"]
    noise = 10.0 ** (cost["noise_density_dbm_hz"] / 10.0) * 1e-3  # W/Hz
    return CostParams(bandwidth=cost["bandwidth"], noise_density=noise,
                      theta=cost["theta"], sigma=cost["sigma"], c0=cost["c0"],
                      v=cost["v"], t_max_cmp=cost["t_max_cmp"],
                      t_max_com=cost["t_max_com"],
                      clients_per_round=cost["clients_per_round"],
                      delta=cost["clients_per_round"] / n)


@dataclass
class RunSummary:
    selector: str
    seed: int
    rounds: int
    time_avg_cost: float | None
    final_accuracy: float | None
    min_participation_rate: float | None
    max_queue_over_rounds: float | None

    def to_dict(self) -> dict:
        return self.__dict__.copy()


class _TrainingBackend:
    """Dataset, shards, and the evolving global model for one run."""

    def __init__(self, cfg: dict, trust: network.TrustGraph, seed: int):
        tcfg = cfg["training"]
        dcfg = tcfg["dataset"]
        rng = _stream_rng(seed, "data")
        if dcfg["kind"] == "synthetic":
            full = training.generate_synthetic(
                dcfg["classes"], dcfg["dim"],
                dcfg["samples"] + dcfg["test_samples"], dcfg["separation"], rng)
            split = dcfg["samples"]
            self.train = training.Dataset(features=full.features[:split],
                                          labels=full.labels[:split],
                                          classes=full.classes)
            self.test = training.Dataset(features=full.features[split:],
                                         labels=full.labels[split:],
                                         classes=full.classes)
        else:
            self.train = training.load_idx(dcfg["train_images"],
                                           dcfg["train_labels"])
            self.test = training.load_idx(dcfg["test_images"],
                                          dcfg["test_labels"])
        if tcfg["scenario"] == 1:
            self.shards = training.partition_scenario1(
                self.train, trust, rng, noise_scale=tcfg["noise_scale"],
                literal_noise=tcfg["literal_noise"])
        else:
            self.shards = training.partition_scenario2(
                self.train, trust, tcfg["heterogeneity"], rng,
                noise_scale=tcfg["noise_scale"],
                literal_noise=tcfg["literal_noise"])
        dim = self.train.features.shape[1]
        self.model = training.GlobalModel.zeros(dim, self.train.classes)


class Simulation:
    """One (config, selector, seed) run over the full round budget."""

    def __init__(self, cfg: dict, selector: str, seed: int):
        if selector not in SELECTORS:
            raise ConfigError(f"unknown selector {selector!r}")
        self.cfg = cfg
        self.selector = selector
        self.seed = seed
        pop = cfg["population"]
        self.params = _cost_params(cfg)
        self.profiles = network.generate_population(
            pop["num_fc"], pop["num_sc"], _stream_rng(seed, "population"),
            data_samples_min=pop["data_samples_min"],
            data_samples_max=pop["data_samples_max"],
            cycles_per_sample_min=pop["cycles_per_sample_min"],
            cycles_per_sample_max=pop["cycles_per_sample_max"],
            model_bits=pop["model_bits"],
            capacitance_coeff=pop["capacitance_coeff"],
            zeta=pop["zeta"], weight_time=pop["weight_time"])
        self.trust = network.generate_trust_graph(
            pop["num_fc"], pop["num_sc"], cfg["trust"]["edge_prob"],
            _stream_rng(seed, "trust"))
        mob = cfg["mobility"]
        init_rng = _stream_rng(seed, "mobility_init")
        self.mobility = [network.init_mobility(
            init_rng, spawn_radius=cfg["network"]["coverage_radius"],
            gm_memory=mob["memory"], mean_speed=mob["mean_speed"],
            speed_stddev=mob["speed_stddev"],
            direction_stddev=mob["direction_stddev"])
            for _ in self.profiles]
        chan = cfg["channel"]
        self.channel = network.ChannelParams.calibrated(
            self.params.bandwidth, self.params.noise_density,
            target_snr_db=chan["target_snr_db"],
            cal_distance=chan["cal_distance"], cal_power=chan["cal_power"],
            path_loss_exp=chan["path_loss_exp"],
            ref_distance=chan["ref_distance"])
        self.queues = scheduler.VirtualQueues.zeros(self.trust.num_fc)
        self.sghs_params = sghs.SghsParams(**cfg["sghs"])
        self.oort = baselines.OortSelector(
            num_fc=self.trust.num_fc,
            exploit_fraction=cfg["baselines"]["oort_exploit_fraction"],
            t_pref_s=cfg["baselines"]["oort_t_pref_s"])
        self.backend = (_TrainingBackend(cfg, self.trust, seed)
                        if cfg["training"]["enabled"] else None)
        if selector in ("powcs",) and self.backend is None:
            raise ConfigError(
                f"selector {selector!r} requires training.enabled=true")
        self.participation = np.zeros(self.trust.num_fc, dtype=np.int64)
        self.cost_sum = 0.0
        self.max_queue_seen = 0.0
        self.last_accuracy: float | None = None

    def _select(self, ctx: scheduler.RoundContext, round_idx: int,
                rng: np.random.Generator) -> scheduler.SelectionDecision:
        cfg = self.cfg
        theta_b = cfg["baselines"]["theta"]
        ell = self.params.clients_per_round
        if self.selector == "socfedcs":
            return scheduler.alternating_optimize(
                ctx, self.queues, self.params, self.sghs_params, rng,
                theta_init=cfg["scheduler"]["theta_init"],
                max_alternations=cfg["scheduler"]["max_alternations"],
                tolerance=cfg["scheduler"]["tolerance"])
        if self.selector == "random":
            return baselines.select_random(ctx, ell, rng, theta_b)
        if self.selector == "greedy":
            return baselines.select_greedy(ctx, ell, theta_b)
        if self.selector == "powcs":
            return baselines.select_powcs(
                ctx, ell, cfg["baselines"]["powcs_candidates"],
                self.backend.model if self.backend else None,
                self.backend.train if self.backend else None,
                self.backend.shards if self.backend else None, rng, theta_b)
        if self.selector == "fedcs":
            return baselines.select_fedcs(
                ctx, cfg["baselines"]["fedcs_deadline_s"], theta_b)
        return self.oort.select(ctx, ell, rng, theta_b)

    def _train(self, ctx: scheduler.RoundContext,
               decision: scheduler.SelectionDecision, round_idx: int) -> None:
        backend = self.backend
        tcfg = self.cfg["training"]
        rng = _stream_rng(self.seed, "training", round_idx)
        updates = []
        for m, i in decision.pairs:
            shard = backend.shards[i]
            local = training.local_train(
                backend.model, backend.train, shard, decision.theta,
                tcfg["lr"], rng, nu=tcfg["nu"], batch_size=tcfg["batch_size"])
            updates.append((local, len(shard.indices)))
            if self.selector == "oort":
                self.oort.observe_losses(
                    m, local, backend.train, shard,
                    decision.per_client_costs[(m, i)].t_round)
        backend.model = training.aggregate(updates, backend.model)

    def run_rounds(self, emit_row) -> RunSummary:
        cfg = self.cfg
        rounds = cfg["rounds"]
        mob = cfg["mobility"]
        net = cfg["network"]
        eval_every = cfg["training"]["eval_every"]
        sel_id = SELECTORS.index(self.selector)
        for t in range(rounds):
            mob_rng = _stream_rng(self.seed, "mobility", t)
            self.mobility = [network.step_mobility(s, mob["dt"], mob_rng,
                                                   bound=mob["bound"])
                             for s in self.mobility]
            snapshot = network.build_snapshot(
                self.profiles, self.mobility, t,
                _stream_rng(self.seed, "snapshot", t), channel=self.channel,
                coverage_radius=net["coverage_radius"],
                availability=net["availability"])
            ctx = scheduler.RoundContext(self.profiles, self.trust, snapshot,
                                         self.params)
            sel_rng = _stream_rng(self.seed, "selector", sel_id, t)
            decision = self._select(ctx, t, sel_rng)
            scheduler.validate_decision(
                decision, ctx, self.params,
                max_selected=None if self.selector == "fedcs" else
                self.params.clients_per_round,
                fc_only=self.selector != "socfedcs")
            if self.selector == "socfedcs":
                before = self.queues
                self.queues = scheduler.update_queues(self.queues, decision,
                                                      self.params.delta)
                scheduler.check_drift_inequality(before, self.queues, decision,
                                                 self.params.delta)
            for m in decision.selected_fcs():
                self.participation[m] += 1
            if self.backend is not None:
                self._train(ctx, decision, t)
            self.cost_sum += decision.max_cost
            accuracy = None
            if self.backend is not None and (
                    (t + 1) % eval_every == 0 or t == rounds - 1):
                accuracy = training.evaluate(self.backend.model,
                                             self.backend.test)
                self.last_accuracy = accuracy
            self.max_queue_seen = max(self.max_queue_seen,
                                      float(self.queues.z.max())
                                      if len(self.queues.z) else 0.0)
            emit_row({
                "round": t, "selector": self.selector,
                "max_cost": decision.max_cost,
                "time_avg_cost": self.cost_sum / (t + 1),
                "theta": decision.theta, "objective": decision.objective,
                "queue_l1": float(np.sum(self.queues.z)),
                "n_selected": len(decision.pairs),
                "selected_pairs": "|".join(f"{m}:{i}"
                                           for m, i in decision.pairs),
                "test_accuracy": accuracy,
            })
        if rounds == 0:
            return RunSummary(self.selector, self.seed, 0, None, None, None,
                              None)
        return RunSummary(
            selector=self.selector, seed=self.seed, rounds=rounds,
            time_avg_cost=self.cost_sum / rounds,
            final_accuracy=self.last_accuracy,
            min_participation_rate=float(self.participation.min()) / rounds,
            max_queue_over_rounds=float(self.queues.z.max()) / rounds
            if len(self.queues.z) else None)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


def run_single(cfg: dict, selector: str, seed: int,
               out_dir: Path) -> RunSummary:
    """Execute one run and write its metrics CSV; returns the summary."""
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"metrics_{selector}_{seed}.csv"
    sim = Simulation(cfg, selector, seed)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(METRIC_COLUMNS)

        def emit(row: dict) -> None:
            writer.writerow([SCHEMA_VERSION] +
                            [_fmt(row[c]) for c in METRIC_COLUMNS[1:]])

        summary = sim.run_rounds(emit)
    return summary


def run(cfg: dict, out_dir: str | Path, selectors: list[str] | None = None,
        seeds: list[int] | None = None) -> dict:
    """Run every (selector, seed) combination and write summary.json."""
    out_dir = Path(out_dir)
    selectors = selectors or [cfg["selector"]]
    seeds = seeds if seeds is not None else list(cfg["seeds"])
    summaries = []
    for selector in selectors:
        for seed in seeds:
            summaries.append(run_single(cfg, selector, seed, out_dir))
    doc = {"schema": SUMMARY_SCHEMA,
           "runs": [s.to_dict() for s in summaries]}
    with open(out_dir / "summary.json", "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    return doc


def compare(cfg: dict, selectors: list[str], out_dir: str | Path,
            seeds: list[int] | None = None,
            scenarios: list[int] | None = None) -> list[dict]:
    """Summary row per selector: cost and (when training) accuracy per
    scenario, mean and stddev over seeds; writes comparison.csv and a text
    table."""
    if len(selectors) < 2:
        raise ConfigError("compare needs at least two selectors")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    seeds = seeds if seeds is not None else list(cfg["seeds"])
    if scenarios is None:
        scenarios = [cfg["training"]["scenario"]] if cfg["training"]["enabled"] else []
    rows = []
    for selector in selectors:
        costs, acc = [], {s: [] for s in scenarios}
        for seed in seeds:
            base_cfg = cfg
            if not scenarios:
                summary = run_single(base_cfg, selector, seed, out_dir)
                costs.append(summary.time_avg_cost)
                continue
            for scen in scenarios:
                scen_cfg = make_config(_merge(
                    base_cfg, {"training": {"scenario": scen}}))
                summary = run_single(scen_cfg, selector, seed,
                                     out_dir / f"s{scen}")
                if scen == scenarios[0]:
                    costs.append(summary.time_avg_cost)
                acc[scen].append(summary.final_accuracy)
        row = {"selector": selector,
               "cost_mean": float(np.mean(costs)) if costs else None,
               "cost_std": float(np.std(costs)) if costs else None}
        for scen in (1, 2):
            vals = [a for a in acc.get(scen, []) if a is not None]
            row[f"acc_s{scen}_mean"] = float(np.mean(vals)) if vals else None
            row[f"acc_s{scen}_std"] = float(np.std(vals)) if vals else None
        rows.append(row)
    columns = ["selector", "cost_mean", "cost_std", "acc_s1_mean",
               "acc_s1_std", "acc_s2_mean", "acc_s2_std"]
    with open(out_dir / "comparison.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in columns])
    with open(out_dir / "comparison.txt", "w") as fh:
        fh.write(render_table(rows, columns))
    return rows


def render_table(rows: list[dict], columns: list[str]) -> str:
    cells = [[_fmt(r[c]) or "-" for c in columns] for r in rows]
    widths = [max(len(c), *(len(row[i]) for row in cells)) if cells else len(c)
              for i, c in enumerate(columns)]
    def line(parts):
        return "  ".join(p.ljust(w) for p, w in zip(parts, widths)).rstrip()
    out = [line(columns), line(["-" * w for w in widths])]
    out.extend(line(row) for row in cells)
    return "\n".join(out) + "\n"


def output_dir(explicit: str | None) -> Path:
    """CLI output directory: flag wins, then SOCFEDCS_OUT, then ./results."""
    if explicit:
        return Path(explicit)
    return Path(os.environ.get("SOCFEDCS_OUT", "results"))
