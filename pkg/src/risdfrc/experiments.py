"""Baselines, fair power budgets, Monte-Carlo sweeps and aggregation.

All comparison schemes draw bit-identical channel realizations per
(sweep point, trial) from seed substreams, and the total consumed power is
equalized across schemes before a sweep: a passive surface re-spends the
amplifier budget at the transmitter, the no-surface scheme re-spends all
of it.  Rows append incrementally (crash-safe); finished sweeps rewrite
the canonical sorted CSV plus a JSON aggregate with embedded provenance.
"""

import csv
import dataclasses
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import driver
from .scenario import (ConfigError, ScenarioConfig, channel_fingerprint,
                       dbm_to_watt, generate_channels, parse_config_text,
                       substream)
from .sysmodel import beampattern

SCHEMES = driver.MODES

SWEEP_KEYS = ("p_bs_w", "n_elements", "gamma_r_db", "eta_db", "user_pos")


def total_power_budget(cfg: ScenarioConfig) -> float:
    """Total consumed power of the active-surface scheme (the fairness anchor)."""
    per_element = dbm_to_watt(cfg.p_sw_dbm) + dbm_to_watt(cfg.p_dc_dbm)
    return float(cfg.p_bs_w + cfg.p_ris_w + cfg.n_elements * per_element)


def fair_power_budgets(cfg: ScenarioConfig, scheme: str) -> ScenarioConfig:
    """Reallocate the common total power budget for a comparison scheme."""
    if scheme not in SCHEMES:
        raise ConfigError(f"unknown scheme {scheme!r}")
    total = total_power_budget(cfg)
    if scheme == driver.ACTIVE:
        return cfg
    if scheme == driver.PASSIVE:
        p_bs = total - cfg.n_elements * dbm_to_watt(cfg.p_sw_dbm)
        out = dataclasses.replace(cfg, p_bs_w=p_bs, eta_db=(0.0,))
    else:
        out = dataclasses.replace(cfg, p_bs_w=total)
    if out.p_bs_w <= 0:
        raise ConfigError(f"scheme {scheme!r} leaves no transmit power")
    return out


def run_scheme(ch, cfg, scheme, rng_seed=None) -> driver.AoResult:
    """One full optimization under the given scheme (budgets already set)."""
    return driver.run(ch, cfg, rng_seed=rng_seed, mode=scheme)


def run_passive_baseline(ch, cfg, rng_seed=None) -> driver.AoResult:
    """Unit-modulus surface, no amplifier noise, no surface power constraint."""
    return driver.run(ch, cfg, rng_seed=rng_seed, mode=driver.PASSIVE)


def run_no_ris_baseline(ch, cfg, rng_seed=None) -> driver.AoResult:
    """No surface and no sensing constraint: plain secrecy beamforming."""
    return driver.run(ch, cfg, rng_seed=rng_seed, mode=driver.NRNS)


@dataclass
class ExperimentSpec:
    """One sweep of one scheme over a grid of a single config field."""

    base: ScenarioConfig
    scheme: str = driver.ACTIVE
    sweep_key: str = "p_bs_w"
    sweep_values: tuple = (1.0,)
    trials: int = 50
    out: str = "sweep"
    jobs: int = 1

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        if self.sweep_key not in SWEEP_KEYS:
            raise ConfigError(f"unknown sweep key {self.sweep_key!r}")
        if self.trials < 1 or not self.sweep_values:
            raise ConfigError("need at least one trial and one sweep value")

    def config_at(self, sweep_value) -> ScenarioConfig:
        if self.sweep_key == "n_elements":
            value = int(sweep_value)
        elif self.sweep_key in ("eta_db",):
            value = (float(sweep_value),) if np.isscalar(sweep_value) \
                else tuple(sweep_value)
        elif self.sweep_key == "user_pos":
            value = tuple(sweep_value)
        else:
            value = float(sweep_value)
        return dataclasses.replace(self.base, **{self.sweep_key: value})


@dataclass
class ResultRow:
    scheme: str
    sweep_key: str
    sweep_value: str
    sweep_index: int
    trial: int
    seed: int
    secrecy_rate: float
    radar_sinr_db: float
    radar_sinr_init_db: float
    converged: bool
    sensing_ok: bool
    outer_iterations: int
    wall_time_s: float
    channel_hash: str
    error: str = ""


ROW_FIELDS = [f.name for f in dataclasses.fields(ResultRow)]


def _sweep_label(value):
    if isinstance(value, (tuple, list)):
        return ";".join(f"{float(x):g}" for x in value)
    return f"{float(value):g}"


def run_single_trial(spec: ExperimentSpec, sweep_index: int,
                     trial: int) -> ResultRow:
    """Worker body: one (sweep point, trial) under the spec's scheme."""
    value = spec.sweep_values[sweep_index]
    cfg = spec.config_at(value)
    rng = substream(spec.base.seed, sweep_index, trial)
    ch = generate_channels(cfg, rng)
    label = _sweep_label(value)
    fingerprint = channel_fingerprint(ch)
    t0 = time.perf_counter()
    try:
        run_cfg = fair_power_budgets(cfg, spec.scheme)
        result = driver.run(ch, run_cfg, rng_seed=spec.base.seed * 1_000_003
                            + sweep_index * 1009 + trial, mode=spec.scheme)
        return ResultRow(
            scheme=spec.scheme, sweep_key=spec.sweep_key, sweep_value=label,
            sweep_index=sweep_index, trial=trial, seed=spec.base.seed,
            secrecy_rate=result.secrecy_rate,
            radar_sinr_db=driver._dbsafe(result.radar_sinr),
            radar_sinr_init_db=driver._dbsafe(result.initial_radar_sinr),
            converged=result.reason == "converged",
            sensing_ok=result.sensing_ok,
            outer_iterations=result.outer_iterations,
            wall_time_s=time.perf_counter() - t0,
            channel_hash=fingerprint)
    except Exception as exc:   # a failed trial must never abort the sweep
        return ResultRow(
            scheme=spec.scheme, sweep_key=spec.sweep_key, sweep_value=label,
            sweep_index=sweep_index, trial=trial, seed=spec.base.seed,
            secrecy_rate=float("nan"), radar_sinr_db=float("nan"),
            radar_sinr_init_db=float("nan"), converged=False,
            sensing_ok=False, outer_iterations=0,
            wall_time_s=time.perf_counter() - t0,
            channel_hash=fingerprint, error=repr(exc))


def _write_rows(path, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=ROW_FIELDS)
        writer.writeheader()
        for row in rows:
            writer.writerow(dataclasses.asdict(row))


def read_rows(path):
    out = []
    with open(path, "r", newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            rec["sweep_index"] = int(rec["sweep_index"])
            rec["trial"] = int(rec["trial"])
            rec["seed"] = int(rec["seed"])
            rec["outer_iterations"] = int(rec["outer_iterations"])
            for key in ("secrecy_rate", "radar_sinr_db", "radar_sinr_init_db",
                        "wall_time_s"):
                rec[key] = float(rec[key])
            for key in ("converged", "sensing_ok"):
                rec[key] = rec[key] == "True"
            out.append(ResultRow(**rec))
    return out


def empirical_cdf(values):
    """Sorted sample values with cumulative probabilities in (0, 1]."""
    vals = np.sort(np.asarray([v for v in values if math.isfinite(v)]))
    if vals.size == 0:
        return {"values": [], "probs": []}
    probs = np.arange(1, vals.size + 1) / vals.size
    return {"values": vals.tolist(), "probs": probs.tolist()}


def aggregate_rows(rows):
    """Pure fold of raw rows into per-(scheme, sweep value) summaries."""
    groups = {}
    for row in rows:
        groups.setdefault((row.scheme, row.sweep_index, row.sweep_value),
                          []).append(row)
    out = []
    for (scheme, idx, label), grp in sorted(groups.items(),
                                            key=lambda kv: kv[0][:2]):
        sr = [r.secrecy_rate for r in grp if math.isfinite(r.secrecy_rate)]
        sinr = [r.radar_sinr_db for r in grp if math.isfinite(r.radar_sinr_db)]
        out.append({
            "scheme": scheme,
            "sweep_index": idx,
            "sweep_value": label,
            "trials": len(grp),
            "converged": sum(r.converged for r in grp),
            "sensing_ok": sum(r.sensing_ok for r in grp),
            "mean_secrecy_rate": float(np.mean(sr)) if sr else float("nan"),
            "secrecy_percentiles": {
                str(q): float(np.percentile(sr, q)) if sr else float("nan")
                for q in (10, 25, 50, 75, 90)},
            "mean_radar_sinr_db": float(np.mean(sinr)) if sinr else float("nan"),
            "cdf_radar_sinr_init_db": empirical_cdf(
                r.radar_sinr_init_db for r in grp),
            "cdf_radar_sinr_opt_db": empirical_cdf(
                r.radar_sinr_db for r in grp),
        })
    return out


def monte_carlo(spec: ExperimentSpec, csv_path=None, json_path=None):
    """Run the sweep; returns (rows, aggregates) and writes both files.

    Rows stream to ``<out>.partial.csv`` as they finish; the sorted
    canonical CSV and the aggregate JSON are written at the end.
    """
    csv_path = csv_path or f"{spec.out}.csv"
    json_path = json_path or f"{spec.out}.json"
    partial = f"{spec.out}.partial.csv"

    tasks = [(i, t) for i in range(len(spec.sweep_values))
             for t in range(spec.trials)]
    rows = []
    with open(partial, "w", newline="", encoding="utf-8") as stream:
        writer = csv.DictWriter(stream, fieldnames=ROW_FIELDS)
        writer.writeheader()

        def record(row):
            rows.append(row)
            writer.writerow(dataclasses.asdict(row))
            stream.flush()

        if spec.jobs > 1:
            with ProcessPoolExecutor(max_workers=spec.jobs) as pool:
                futures = [pool.submit(run_single_trial, spec, i, t)
                           for i, t in tasks]
                for fut in futures:
                    record(fut.result())
        else:
            for i, t in tasks:
                record(run_single_trial(spec, i, t))

    rows.sort(key=lambda r: (r.scheme, r.sweep_index, r.trial))
    _write_rows(csv_path, rows)
    aggregates = {
        "spec": {
            "scheme": spec.scheme,
            "sweep_key": spec.sweep_key,
            "sweep_values": [_sweep_label(v) for v in spec.sweep_values],
            "trials": spec.trials,
        },
        "config_digest": spec.base.digest(),
        "seed": spec.base.seed,
        "groups": aggregate_rows(rows),
    }
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(aggregates, fh, indent=1, sort_keys=True)
    return rows, aggregates


# --- experiment spec files ---------------------------------------------------

_SPEC_KEYS = ("scheme", "sweep", "values", "trials", "out", "jobs")


def parse_experiment_text(text) -> ExperimentSpec:
    """Experiment file: base-config keys plus scheme/sweep/values/trials/out."""
    base, extras = parse_config_text(text, extra_keys=_SPEC_KEYS)
    kwargs = {"base": base}
    if "scheme" in extras:
        kwargs["scheme"] = extras["scheme"]
    if "sweep" in extras:
        kwargs["sweep_key"] = extras["sweep"]
    if "values" in extras:
        raw = extras["values"]
        key = kwargs.get("sweep_key", "p_bs_w")
        if key == "user_pos":
            vals = tuple(tuple(float(x) for x in part.split(","))
                         for part in raw.split(";") if part.strip())
        else:
            vals = tuple(float(x) for x in raw.replace(";", ",").split(",")
                         if x.strip())
        kwargs["sweep_values"] = vals
    if "trials" in extras:
        kwargs["trials"] = int(extras["trials"])
    if "out" in extras:
        kwargs["out"] = extras["out"]
    if "jobs" in extras:
        kwargs["jobs"] = int(extras["jobs"])
    return ExperimentSpec(**kwargs)


def load_experiment(path) -> ExperimentSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_experiment_text(fh.read())


# --- beampattern -------------------------------------------------------------


@dataclass
class BeampatternReport:
    theta_deg: np.ndarray
    normalized_db: np.ndarray
    peak_deg: float
    marks: dict = field(default_factory=dict)   # name -> (aod_deg, value_db)


def beampattern_report(p, v, ch, cfg, n_points=721) -> BeampatternReport:
    """Normalized reflected-power profile with user/eavesdropper/target marks."""
    theta_deg = np.linspace(-90.0, 90.0, n_points)
    pattern = beampattern(p, v, ch, np.deg2rad(theta_deg), cfg.spacing_ratio)
    peak = float(np.max(pattern))
    norm_db = 10.0 * np.log10(np.maximum(pattern, 1e-300) / max(peak, 1e-300))
    marks = {}
    for name, angle in ch.angles.items():
        aod = float(np.rad2deg(angle))
        marks[name] = (aod, float(norm_db[np.argmin(np.abs(theta_deg - aod))]))
    return BeampatternReport(theta_deg=theta_deg, normalized_db=norm_db,
                             peak_deg=float(theta_deg[np.argmax(pattern)]),
                             marks=marks)


def write_beampattern_csv(report: BeampatternReport, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["theta_deg", "normalized_db"])
        for t, v in zip(report.theta_deg, report.normalized_db):
            writer.writerow([f"{t:.4f}", f"{v:.6f}"])
