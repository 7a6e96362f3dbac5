"""Outer alternating loop: beamformer step, reflector step, bookkeeping.

One run alternates the two inner solvers until the secrecy rate settles.
Both inner solvers only ever accept improving iterates, so the recorded
secrecy sequence is nondecreasing by construction.  A run whose start
cannot meet the echo-SINR floor is not aborted: the sensing constraint is
dropped, the secrecy problem still gets optimized, and the result is
flagged so sweep aggregates can separate those trials.
"""

import json
import time
from dataclasses import asdict, dataclass

import numpy as np

from .beamformer_step import _effective_channel, solve_wstep
from .reflector_step import solve_phistep
from .scenario import substream
from .sysmodel import (Precoder, RisCoeffs, bs_power, radar_sinr,
                       rate_difference, ris_power, secrecy_rate)

ACTIVE = "active"
PASSIVE = "passive"
NRNS = "no-ris-no-sensing"
MODES = (ACTIVE, PASSIVE, NRNS)

_RNG_INIT, _RNG_WSTEP, _RNG_PHISTEP = 1, 2, 3


@dataclass
class IterationRecord:
    """One outer iteration of the alternating loop."""

    iteration: int
    secrecy_rate: float
    rate_difference: float
    radar_sinr: float
    radar_sinr_db: float
    bs_power: float
    ris_power: float
    inner_w_iterations: int = 0
    inner_phi_iterations: int = 0
    w_status: str = ""
    phi_status: str = ""
    problems_solved: int = 0
    wall_time_s: float = 0.0


@dataclass
class AoResult:
    precoder: Precoder
    ris: RisCoeffs
    records: list
    reason: str                 # converged | max-iterations | sensing-infeasible
    secrecy_rate: float
    radar_sinr: float
    sensing_ok: bool
    mode: str
    initial_radar_sinr: float = 0.0

    @property
    def outer_iterations(self):
        return max(r.iteration for r in self.records) if self.records else 0


def _dbsafe(x):
    return float(10.0 * np.log10(max(x, 1e-300)))


def _noise_for_mode(cfg, mode):
    return cfg.noise_powers(active_ris=(mode == ACTIVE))


def _eta_for_mode(cfg, mode):
    if mode == ACTIVE:
        return cfg.eta_amplitudes()
    return np.ones(cfg.n_elements)


def initialize(ch, cfg, rng=None, mode=ACTIVE):
    """Feasible-by-construction start: random phases at the largest in-budget
    amplitude, matched-filter data column, uniform sensing columns.

    Redraws the phases up to 20 times to meet the echo-SINR floor; when none
    succeed the last draw is returned with ``sensing_ok=False``.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if rng is None:
        rng = substream(cfg.seed, _RNG_INIT)
    noise = _noise_for_mode(cfg, mode)
    m, n = cfg.m_antennas, cfg.n_elements
    eta = _eta_for_mode(cfg, mode)

    def beamformer_for(phi):
        eff = _effective_channel(ch.h_bu, ch.h_ru, phi, ch.h_br,
                                 noise.ris_fwd, noise.user)
        w = np.zeros((m, m + 1), dtype=complex)
        w[:, :m] = np.sqrt(cfg.p_bs_w / (2 * m)) * np.eye(m)
        norm = np.linalg.norm(eff)
        direction = eff / norm if norm > 0 else np.eye(m, dtype=complex)[:, 0]
        w[:, -1] = np.sqrt(cfg.p_bs_w / 2) * direction
        return Precoder(w)

    def draw():
        phases = np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, n))
        if mode == NRNS:
            return RisCoeffs(phi=np.zeros(n, complex), eta=eta)
        if mode == PASSIVE:
            return RisCoeffs(phi=phases, eta=eta)
        hi = float(np.min(eta)) if n else 0.0
        full = RisCoeffs(phi=hi * phases, eta=eta)
        if sum(ris_power(beamformer_for(full.phi), full, ch, noise)) <= cfg.p_ris_w:
            return full
        lo = 0.0
        for _ in range(50):
            mid = 0.5 * (lo + hi)
            v_try = RisCoeffs(phi=mid * phases, eta=eta)
            if sum(ris_power(beamformer_for(v_try.phi), v_try, ch, noise)) \
                    <= cfg.p_ris_w:
                lo = mid
            else:
                hi = mid
        return RisCoeffs(phi=lo * phases, eta=eta)

    sensing = mode != NRNS
    v = draw()
    p = beamformer_for(v.phi)
    sensing_ok = True
    if sensing:
        for _ in range(20):
            if radar_sinr(p, v, ch, noise, cfg.si_rho) >= cfg.gamma_r:
                break
            v = draw()
            p = beamformer_for(v.phi)
        else:
            sensing_ok = radar_sinr(p, v, ch, noise, cfg.si_rho) >= cfg.gamma_r
    return p, v, sensing_ok


def run(ch, cfg, rng_seed=None, mode=ACTIVE, solver_options=None) -> AoResult:
    """Full alternating optimization for one channel realization."""
    seed = cfg.seed if rng_seed is None else rng_seed
    noise = _noise_for_mode(cfg, mode)
    p, v, sensing_ok = initialize(ch, cfg, substream(seed, _RNG_INIT), mode)
    sensing = (mode != NRNS) and sensing_ok
    passive = mode == PASSIVE
    include_ris_power = mode == ACTIVE

    init_sinr = radar_sinr(p, v, ch, noise, cfg.si_rho)
    records = [IterationRecord(
        iteration=0,
        secrecy_rate=secrecy_rate(p, v, ch, noise),
        rate_difference=rate_difference(p, v, ch, noise),
        radar_sinr=init_sinr, radar_sinr_db=_dbsafe(init_sinr),
        bs_power=bs_power(p), ris_power=sum(ris_power(p, v, ch, noise)))]

    reason = "max-iterations"
    s_prev = records[0].secrecy_rate
    for t in range(1, cfg.outer_max + 1):
        t0 = time.perf_counter()
        wres = solve_wstep(ch, p, v, cfg, noise=noise,
                           enforce_sensing=sensing,
                           include_ris_power=include_ris_power,
                           rng=substream(seed, _RNG_WSTEP, t),
                           options=solver_options)
        if wres.status == "sensing-infeasible":
            # relax to the secrecy-only problem for this iterate
            wres = solve_wstep(ch, p, v, cfg, noise=noise,
                               enforce_sensing=False,
                               include_ris_power=include_ris_power,
                               rng=substream(seed, _RNG_WSTEP, t),
                               options=solver_options)
            wres.status = "sensing-relaxed"
        p = wres.precoder

        phires = None
        if mode != NRNS:
            phires = solve_phistep(ch, p, v, cfg, noise=noise, passive=passive,
                                   enforce_sensing=sensing,
                                   rng=substream(seed, _RNG_PHISTEP, t),
                                   options=solver_options)
            v = phires.ris

        sinr = radar_sinr(p, v, ch, noise, cfg.si_rho)
        s_t = secrecy_rate(p, v, ch, noise)
        records.append(IterationRecord(
            iteration=t, secrecy_rate=s_t,
            rate_difference=rate_difference(p, v, ch, noise),
            radar_sinr=sinr, radar_sinr_db=_dbsafe(sinr),
            bs_power=bs_power(p), ris_power=sum(ris_power(p, v, ch, noise)),
            inner_w_iterations=wres.iterations,
            inner_phi_iterations=phires.iterations if phires else 0,
            w_status=wres.status,
            phi_status=phires.status if phires else "",
            problems_solved=wres.problems_solved
            + (phires.problems_solved if phires else 0),
            wall_time_s=time.perf_counter() - t0))

        if abs(s_t - s_prev) < cfg.outer_tol * max(1.0, abs(s_t)):
            reason = "converged"
            break
        s_prev = s_t

    if not sensing_ok:
        reason = "sensing-infeasible"
    return AoResult(precoder=p, ris=v, records=records, reason=reason,
                    secrecy_rate=records[-1].secrecy_rate,
                    radar_sinr=records[-1].radar_sinr,
                    sensing_ok=sensing_ok, mode=mode,
                    initial_radar_sinr=init_sinr)


def write_trace(records, path):
    """One JSON record per outer iteration."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(asdict(rec)) + "\n")


def read_trace(path):
    with open(path, "r", encoding="utf-8") as fh:
        return [IterationRecord(**json.loads(line)) for line in fh
                if line.strip()]


@dataclass
class ComplexityReport:
    """Interior-point flop-order model of the two subproblem families."""

    m_antennas: int
    n_elements: int
    t_outer: int
    t_w: int
    t_phi: int
    j1: int = 0
    k1: int = 0
    n1: int = 0
    o1: float = 0.0
    j2: int = 0
    k2: int = 0
    n2: int = 0
    o2: float = 0.0
    total: float = 0.0


def complexity_estimate(m, n, t_outer=1, t_w=1, t_phi=1) -> ComplexityReport:
    """Evaluate the interior-point complexity orders of both subproblems."""
    j1, k1 = m + 4, m + 1
    n1 = (m + 1) ** 3
    o1 = np.sqrt(j1 * k1) * n1 * (n1**2 + n1 * j1 * k1**2 + j1 * k1**3)
    j2, k2 = 2, n + 1
    n2 = (n + 1) ** 2
    m2, a2 = 2, (n + 1) ** 2
    o2 = np.sqrt(j2 * k2 + 2 * m2) * n2 * (n2**2 + n2 * j2 * k2**2
                                           + j2 * k2**3 + n2 * m2 * a2)
    total = t_outer * (t_w * o1 + t_phi * o2)
    return ComplexityReport(m_antennas=m, n_elements=n, t_outer=t_outer,
                            t_w=t_w, t_phi=t_phi, j1=j1, k1=k1, n1=n1,
                            o1=float(o1), j2=j2, k2=k2, n2=n2, o2=float(o2),
                            total=float(total))
