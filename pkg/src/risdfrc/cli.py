"""Command-line surface: simulate, sweep, beampattern, convergence, validate.

Exit codes: 0 on success, 1 for configuration errors, 2 for numerical
failures or failed validation.
"""

import argparse
import dataclasses
import json
import sys

import numpy as np

from . import conic, driver, experiments, validation
from .scenario import (ConfigError, ScenarioConfig, generate_channels,
                       load_config, parse_config_text)
from .sysmodel import Precoder, RisCoeffs


def _load_cfg(args):
    if getattr(args, "config", None):
        cfg, _ = load_config(args.config)
    else:
        cfg = ScenarioConfig()
    if getattr(args, "seed", None) is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    return cfg


def _save_solution(path, cfg, result):
    doc = {
        "config": cfg.to_text(),
        "config_digest": cfg.digest(),
        "seed": cfg.seed,
        "mode": result.mode,
        "reason": result.reason,
        "secrecy_rate": result.secrecy_rate,
        "radar_sinr_db": driver._dbsafe(result.radar_sinr),
        "w_re": result.precoder.w.real.tolist(),
        "w_im": result.precoder.w.imag.tolist(),
        "phi_re": result.ris.phi.real.tolist(),
        "phi_im": result.ris.phi.imag.tolist(),
        "eta": result.ris.eta.tolist(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)


def _load_solution(path):
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    cfg, _ = parse_config_text(doc["config"])
    p = Precoder(np.array(doc["w_re"]) + 1j * np.array(doc["w_im"]))
    v = RisCoeffs(phi=np.array(doc["phi_re"]) + 1j * np.array(doc["phi_im"]),
                  eta=np.array(doc["eta"]))
    return cfg, p, v


def cmd_simulate(args):
    cfg = _load_cfg(args)
    ch = generate_channels(cfg)
    result = driver.run(ch, cfg, mode=args.scheme)
    if not args.quiet:
        print(f"# scheme={args.scheme} seed={cfg.seed} "
              f"config={cfg.digest()}")
        print("iter  secrecy(nat)  sinr(dB)   bs_power  ris_power  status")
        for r in result.records:
            print(f"{r.iteration:4d}  {r.secrecy_rate:12.6f} "
                  f"{r.radar_sinr_db:9.2f} {r.bs_power:10.4f} "
                  f"{r.ris_power:10.3e}  {r.w_status}/{r.phi_status}")
        print(f"# reason={result.reason} sensing_ok={result.sensing_ok}")
    if args.out:
        driver.write_trace(result.records, args.out)
    if args.solution:
        _save_solution(args.solution, cfg, result)
    return 0 if result.reason != "max-iterations" or result.records else 2


def cmd_sweep(args):
    spec = experiments.load_experiment(args.spec)
    overrides = {}
    if args.trials is not None:
        overrides["trials"] = args.trials
    if args.scheme is not None:
        overrides["scheme"] = args.scheme
    if args.out is not None:
        overrides["out"] = args.out
    if args.jobs is not None:
        overrides["jobs"] = args.jobs
    if args.seed is not None:
        overrides["base"] = dataclasses.replace(spec.base, seed=args.seed)
    spec = dataclasses.replace(spec, **overrides)
    rows, _ = experiments.monte_carlo(spec)
    bad = [r for r in rows if r.error]
    print(f"wrote {len(rows)} rows to {spec.out}.csv "
          f"({len(bad)} failed trials)")
    return 0 if not bad else 2


def cmd_beampattern(args):
    cfg, p, v = _load_solution(args.solution)
    ch = generate_channels(cfg)
    report = experiments.beampattern_report(p, v, ch, cfg,
                                            n_points=args.points)
    print(f"peak at {report.peak_deg:+.2f} deg")
    for name, (aod, val) in sorted(report.marks.items()):
        print(f"{name:>8s}: aod {aod:+7.2f} deg, normalized {val:8.2f} dB")
    if args.out:
        experiments.write_beampattern_csv(report, args.out)
    return 0


def cmd_convergence(args):
    cfg = _load_cfg(args)
    variants = [
        ("baseline", cfg),
        ("more_antennas", dataclasses.replace(cfg, m_antennas=cfg.m_antennas + 2)),
        ("more_elements", dataclasses.replace(cfg, n_elements=cfg.n_elements * 2)),
        ("higher_gain", dataclasses.replace(
            cfg, eta_db=tuple(e + 5.0 for e in cfg.eta_db))),
    ]
    lines = ["variant,iteration,secrecy_rate"]
    for name, vcfg in variants:
        ch = generate_channels(vcfg)
        res = driver.run(ch, vcfg)
        for r in res.records:
            lines.append(f"{name},{r.iteration},{r.secrecy_rate:.9f}")
        print(f"{name:>14s}: {res.reason} in {res.outer_iterations} "
              f"iterations, secrecy {res.secrecy_rate:.4f}")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
    return 0


def cmd_validate(args):
    failures = validation.run_all(seed=args.seed or 0)
    return 0 if failures == 0 else 2


def build_parser():
    parser = argparse.ArgumentParser(
        prog="risdfrc",
        description="Secrecy-rate optimization for an active-RIS-assisted "
                    "radar-communication system")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="one optimization run")
    sim.add_argument("--config")
    sim.add_argument("--seed", type=int)
    sim.add_argument("--scheme", choices=experiments.SCHEMES,
                     default=driver.ACTIVE)
    sim.add_argument("--out", help="trace output (one JSON line per iteration)")
    sim.add_argument("--solution", help="save the optimized design as JSON")
    sim.add_argument("--quiet", action="store_true")
    sim.set_defaults(fn=cmd_simulate)

    swp = sub.add_parser("sweep", help="Monte-Carlo sweep from a spec file")
    swp.add_argument("--spec", required=True)
    swp.add_argument("--trials", type=int)
    swp.add_argument("--seed", type=int)
    swp.add_argument("--scheme", choices=experiments.SCHEMES)
    swp.add_argument("--out")
    swp.add_argument("--jobs", type=int)
    swp.set_defaults(fn=cmd_sweep)

    bp = sub.add_parser("beampattern", help="angle profile of a saved design")
    bp.add_argument("--solution", required=True)
    bp.add_argument("--points", type=int, default=721)
    bp.add_argument("--out")
    bp.set_defaults(fn=cmd_beampattern)

    conv = sub.add_parser("convergence",
                          help="iteration traces for several setups")
    conv.add_argument("--config")
    conv.add_argument("--seed", type=int)
    conv.add_argument("--out")
    conv.set_defaults(fn=cmd_convergence)

    val = sub.add_parser("validate", help="run the property suite")
    val.add_argument("--seed", type=int)
    val.set_defaults(fn=cmd_validate)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except (conic.SolverFailure, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
