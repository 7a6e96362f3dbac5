"""Acceptance gate: one test per numbered criterion, stated tolerances pinned.

Heavy Monte-Carlo corpora are computed once per session in a two-worker
pool and shared across criteria; every criterion prints its own PASS line
(a failed assert marks the criterion FAIL).
"""

import dataclasses
import itertools
import multiprocessing
import time

import numpy as np
import pytest
import scipy.optimize

from risdfrc import conic, driver, experiments
from risdfrc import beamformer_step as ws
from risdfrc import reflector_step as rs
from risdfrc.linalg import dagger, herm, herm_solve, rank_by_singvals
from risdfrc.scenario import (ChannelSet, NoisePowers, ScenarioConfig,
                              generate_channels, steering_vector, substream)
from risdfrc.sysmodel import (Precoder, RisCoeffs, check_feasibility,
                              covariance, radar_operators, radar_sinr,
                              rate_difference, ris_power)

from _toys import cgauss, toy_channels, toy_noise, toy_precoder, toy_ris

BASE = ScenarioConfig(seed=1)


def report(criterion, detail):
    print(f"\nACCEPTANCE {criterion} PASS: {detail}")


def pool_map(fn, tasks):
    ctx = multiprocessing.get_context("fork")
    with ctx.Pool(processes=2) as pool:
        return pool.map(fn, tasks)


# --- criterion 1: tangent lower bound of the echo quadratic -------------------


def test_criterion_1_tangent_bound_suite():
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    worst_excess = -np.inf
    for _ in range(1000):
        n = int(rng.integers(1, 9))
        x = cgauss(rng, n, n)
        j = cgauss(rng, n, n)
        j = j @ dagger(j) + 0.2 * np.eye(n)
        x_a = cgauss(rng, n, n)
        j_a = cgauss(rng, n, n)
        j_a = j_a @ dagger(j_a) + 0.2 * np.eye(n)
        truth = float(np.real(np.trace(dagger(x) @ np.linalg.inv(j) @ x)))
        bound = ws.trace_quadratic_lower_bound(x, j, x_a, j_a)
        assert bound <= truth + 1e-10 * abs(truth)
        worst_excess = max(worst_excess, bound - truth)
        anchored = ws.trace_quadratic_lower_bound(x, j, x, j)
        assert abs(anchored - truth) <= 1e-10 * (1 + abs(truth))
    elapsed = time.perf_counter() - t0
    assert elapsed < 5.0
    report(1, f"1000 instances, worst excess {worst_excess:.2e}, "
              f"{elapsed:.2f}s")


# --- criterion 2: cross-term upper bound ---------------------------------------


def test_criterion_2_cross_term_bound_suite():
    t0 = time.perf_counter()
    rng = np.random.default_rng(102)
    worst_deficit = np.inf
    for _ in range(1000):
        n = int(rng.integers(1, 9))
        k = cgauss(rng, n, n)
        l_mat = cgauss(rng, n, n)
        truth = 2.0 * float(np.real(np.trace(k @ dagger(l_mat))))
        bound = rs.cross_term_upper_bound(k, l_mat, cgauss(rng, n, n),
                                          cgauss(rng, n, n))
        assert bound >= truth - 1e-10 * abs(truth)
        worst_deficit = min(worst_deficit, bound - truth)
    # proportional anchors make the bound tight
    k = cgauss(rng, 4, 4)
    for c in (0.5, 2.0):
        tight = rs.cross_term_upper_bound(k, c * k, k, c * k)
        truth = 2.0 * float(np.real(np.trace(k @ dagger(c * k))))
        assert abs(tight - truth) <= 1e-10 * abs(truth)
    elapsed = time.perf_counter() - t0
    assert elapsed < 5.0
    report(2, f"1000 pairs, worst deficit {worst_deficit:.2e}, {elapsed:.2f}s")


# --- criterion 3: vectorization identity suite ---------------------------------


def test_criterion_3_vectorization_identities():
    t0 = time.perf_counter()
    rng = np.random.default_rng(103)
    for trial in range(100):
        n = int(rng.integers(2, 7))
        m = int(rng.integers(2, 4))
        ch = toy_channels(rng, m=m, n=n,
                          gamma=complex(cgauss(rng)), theta=rng.uniform(-1, 1))
        noise = toy_noise()
        p = toy_precoder(rng, m=m)
        v = toy_ris(rng, n=n)
        r = covariance(p.w)
        ops = radar_operators(p, v, ch, noise, rho=0.25)
        jinv_a = herm_solve(ops.j, ops.a)
        e_mat = herm(jinv_a @ r @ dagger(jinv_a))
        phi_mat = np.diag(v.phi)
        v_blk = np.outer(np.conj(v.phi), v.phi)
        vhat = rs.coeff_vec_hat(v.phi)

        # quartic form equals its block-extracted quadratic
        m11 = rs.quartic_block_extract(ch, e_mat)
        quartic = float(np.real(np.trace(
            e_mat @ dagger(ch.h_br) @ dagger(phi_mat) @ ch.g @ phi_mat
            @ dagger(phi_mat) @ dagger(ch.g) @ phi_mat @ ch.h_br)))
        lhs = float(np.real(np.trace(v_blk @ m11 @ dagger(v_blk))))
        assert abs(lhs - quartic) <= 1e-10 * (1 + abs(quartic))

        # tangent numerator equals its linear form
        p1 = rs.p1_vector(ch, r, ops.a, ops.j)
        lin = 2.0 * float(np.real(np.conj(p1) @ vhat))
        direct = 2.0 * float(np.real(np.trace(
            ops.a @ r @ dagger(ops.a) @ np.linalg.inv(ops.j))))
        assert abs(lin - direct) <= 1e-10 * (1 + abs(direct))

        # consumed-power reformulation is an identity
        m2, n2 = rs.ris_power_quadratic(ch, r, noise)
        power_quad = float(np.real(np.trace(v_blk @ m2 @ dagger(v_blk)))
                           + np.real(np.trace(n2 @ v_blk)))
        total = sum(ris_power(p, v, ch, noise))
        assert abs(power_quad - total) <= 1e-10 * (1 + abs(total))
    elapsed = time.perf_counter() - t0
    assert elapsed < 10.0
    report(3, f"100 random instances, three transform chains, {elapsed:.2f}s")


# --- criterion 4: block structure of the lifted quartic ------------------------


def test_criterion_4_block_structure():
    rng = np.random.default_rng(104)
    for n in (2, 3, 4):
        ch = toy_channels(rng, m=3, n=n, gamma=complex(cgauss(rng)))
        noise = toy_noise()
        p = toy_precoder(rng, m=3)
        v = toy_ris(rng, n=n)
        ops = radar_operators(p, v, ch, noise, rho=0.3)
        jinv_a = herm_solve(ops.j, ops.a)
        e_mat = herm(jinv_a @ covariance(p.w) @ dagger(jinv_a))
        f_tilde = herm(ch.h_br @ e_mat @ dagger(ch.h_br))

        q1 = rs.materialized_quartic_matrix(ch, e_mat)
        m11 = rs.quartic_block_extract(ch, e_mat)
        scale = max(np.abs(q1).max(), 1e-300)
        for b in range(n):
            blk = q1[b * n:(b + 1) * n, b * n:(b + 1) * n]
            assert np.max(np.abs(blk - m11)) <= 1e-12 * scale
        off = q1.copy()
        for b in range(n):
            off[b * n:(b + 1) * n, b * n:(b + 1) * n] = 0.0
        assert np.max(np.abs(off)) <= 1e-12 * scale

        for mat in (ch.g, ops.a, e_mat, f_tilde, m11):
            assert rank_by_singvals(mat, rtol=1e-9) == 1

        ctx = rs.assemble_sinr_quadratic(ch, p, v, noise, 0.3, gamma_r=0.0)
        m2, _ = rs.ris_power_quadratic(ch, covariance(p.w), noise)
        for mat in (ctx.m1, m2):
            w_eig = np.linalg.eigvalsh(herm(mat))
            assert w_eig[0] >= -1e-9 * max(w_eig[-1], 1e-300)
    report(4, "block-diagonal structure, unit ranks and curvature PSD at N<=4")


# --- criterion 5: minorize-maximize surrogate suite -----------------------------


def test_criterion_5_mm_surrogates():
    cfg = ScenarioConfig(seed=5)
    ch = generate_channels(cfg)
    noise = cfg.noise_powers()
    p0, v0, sensing_ok = driver.initialize(ch, cfg, substream(cfg.seed, 1))
    assert sensing_ok
    rng = np.random.default_rng(105)

    # beamformer-side objective surrogate
    wctx = ws.build_context(ch, p0, v0, noise, cfg.gamma_r, cfg.p_ris_w,
                            cfg.si_rho)
    m = cfg.m_antennas
    anchor_w = ws._lift(p0.w[:, -1])
    s_e = float(np.real(np.trace(wctx.h_eve_lift @ anchor_w)))

    def c_true(x):
        return float(np.log(np.trace(wctx.h_user_lift @ x).real)
                     - np.log(np.trace(wctx.h_eve_lift @ x).real))

    def c_surr(x):
        return float(np.log(np.trace(wctx.h_user_lift @ x).real)
                     - np.log(s_e)
                     - np.trace(wctx.h_eve_lift @ (x - anchor_w)).real / s_e)

    assert abs(c_surr(anchor_w) - c_true(anchor_w)) \
        <= 1e-10 * (1 + abs(c_true(anchor_w)))
    for _ in range(5):
        d = herm(cgauss(rng, m + 1, m + 1))
        d[m, m] = 0.0
        h = 1e-5
        g_t = (c_true(anchor_w + h * d) - c_true(anchor_w - h * d)) / (2 * h)
        g_s = (c_surr(anchor_w + h * d) - c_surr(anchor_w - h * d)) / (2 * h)
        assert abs(g_t - g_s) <= 1e-5 * (1 + abs(g_t))
    for _ in range(100):
        a = cgauss(rng, m + 1, m + 1)
        x = a @ a.conj().T
        x /= x[m, m].real
        assert c_surr(x) <= c_true(x) + 1e-10 * (1 + abs(c_true(x)))

    # reflector-side objective surrogate
    pctx = rs.build_context(ch, p0, v0, noise, cfg.si_rho, cfg.gamma_r)
    n = cfg.n_elements
    _, anchor_v = rs.lift_phi(v0.phi)
    s_u2 = float(np.trace(pctx.h_u2 @ anchor_v).real)
    s_e1 = float(np.trace(pctx.h_e1 @ anchor_v).real)

    def r_true(x):
        return float(np.log(np.trace(pctx.h_u1 @ x).real)
                     - np.log(np.trace(pctx.h_u2 @ x).real)
                     - np.log(np.trace(pctx.h_e1 @ x).real)
                     + np.log(np.trace(pctx.h_e2 @ x).real))

    def r_surr(x):
        return float(np.log(np.trace(pctx.h_u1 @ x).real) - np.log(s_u2)
                     - np.trace(pctx.h_u2 @ (x - anchor_v)).real / s_u2
                     + np.log(np.trace(pctx.h_e2 @ x).real) - np.log(s_e1)
                     - np.trace(pctx.h_e1 @ (x - anchor_v)).real / s_e1)

    assert abs(r_surr(anchor_v) - r_true(anchor_v)) \
        <= 1e-10 * (1 + abs(r_true(anchor_v)))
    for _ in range(5):
        d = herm(cgauss(rng, n + 1, n + 1))
        d[n, n] = 0.0
        h = 1e-5
        g_t = (r_true(anchor_v + h * d) - r_true(anchor_v - h * d)) / (2 * h)
        g_s = (r_surr(anchor_v + h * d) - r_surr(anchor_v - h * d)) / (2 * h)
        assert abs(g_t - g_s) <= 1e-5 * (1 + abs(g_t))
    for _ in range(100):
        a = cgauss(rng, n + 1, n + 1)
        x = a @ a.conj().T
        x /= x[n, n].real
        assert r_surr(x) <= r_true(x) + 1e-10 * (1 + abs(r_true(x)))
    report(5, "both surrogates: value 1e-10, gradient 1e-5, 100-point "
              "minorization each")


# --- criterion 6: reference solver oracles -------------------------------------


def test_criterion_6_sdp_oracles():
    # largest-eigenvalue program
    p = conic.SdpProblem(
        blocks={"x": 2},
        objective=conic.LinearExpr({"x": np.diag([1.0, 2.0]).astype(complex)}),
        constraints=[conic.TraceConstraint({"x": np.eye(2, dtype=complex)},
                                           rhs=1.0, sense="==")])
    sol = conic.solve(p)
    assert sol.status == conic.OPTIMAL
    assert abs(sol.value - 2.0) <= 1e-7
    assert all(s >= -1e-7 for k, s in sol.slacks.items()
               if not k.startswith("psd:"))

    # unit-diagonal toy against sign enumeration
    c = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
    best = max(float(np.real(x @ c @ x))
               for x in (np.array(s, dtype=float)
                         for s in itertools.product([1, -1], repeat=2)))
    p = conic.SdpProblem(
        blocks={"x": 2}, objective=conic.LinearExpr({"x": c}),
        diag_bounds=[conic.DiagBound("x", i, 1.0, "==") for i in range(2)])
    sol = conic.solve(p)
    assert sol.status == conic.OPTIMAL
    assert abs(sol.value - best) <= 1e-6

    # two-element diagonal-channel reflector case against exhaustive search
    theta = 0.5
    a = steering_vector(theta, 0.5, 2)
    gamma = 0.08 + 0.03j
    ch = ChannelSet(
        h_br=np.diag([0.9 + 0.2j, 0.7 - 0.4j]),
        h_bu=np.array([0.45 - 0.15j, 0.3 + 0.2j]),
        h_be=np.array([0.2 + 0.1j, -0.25 + 0.05j]),
        h_ru=np.array([0.8 + 0.3j, -0.5 + 0.6j]),
        h_re=np.array([0.3 - 0.2j, 0.4 + 0.25j]),
        g=gamma * np.outer(a, a.conj()), theta_target=theta, gamma=gamma)
    noise = NoisePowers(user=0.2, eve=0.15, radar=0.1, ris_fwd=1e-4,
                        ris_bwd=1e-4)
    w = np.zeros((2, 3), dtype=complex)
    w[:, 0] = [0.3, 0.1j]
    w[:, -1] = [0.8 + 0.1j, 0.5 - 0.3j]
    p_bf = Precoder(w)
    eta = np.array([2.0, 2.0])
    cfg = ScenarioConfig(m_antennas=2, n_elements=2, gamma_r_db=-100.0,
                         p_ris_w=1e6, seed=7, inner_phi_max=30,
                         randomization_trials=80)

    def objective(q):
        phi = np.array([q[0] * np.exp(1j * q[2]), q[1] * np.exp(1j * q[3])])
        return rate_difference(p_bf, RisCoeffs(phi=phi, eta=eta), ch, noise)

    best, best_val = None, -np.inf
    for b1 in np.linspace(0.05, 2.0, 12):
        for b2 in np.linspace(0.05, 2.0, 12):
            for t1 in np.linspace(0, 2 * np.pi, 16, endpoint=False):
                for t2 in np.linspace(0, 2 * np.pi, 16, endpoint=False):
                    val = objective((b1, b2, t1, t2))
                    if val > best_val:
                        best, best_val = (b1, b2, t1, t2), val
    polish = scipy.optimize.minimize(
        lambda q: -objective(q), np.array(best),
        bounds=[(0, 2), (0, 2), (-1, 7.3), (-1, 7.3)], method="L-BFGS-B")
    exhaustive = max(best_val, -polish.fun)

    v0 = RisCoeffs(phi=np.array([0.5, 0.5 * 1j]), eta=eta)
    res = rs.solve_phistep(ch, p_bf, v0, cfg, noise=noise,
                           rng=np.random.default_rng(5))
    assert res.objective == pytest.approx(exhaustive, rel=1e-3)
    report(6, f"max-eig, sign toy, and reflector toy vs exhaustive search "
              f"({res.objective:.6f} vs {exhaustive:.6f})")


# --- heavy corpora --------------------------------------------------------------


def _feasibility_flags(res, ch, run_cfg, scheme):
    noise = run_cfg.noise_powers(active_ris=(scheme == driver.ACTIVE))
    rep = check_feasibility(
        res.precoder, res.ris, ch, run_cfg, noise=noise, rtol=1e-6,
        require_sensing=(scheme != driver.NRNS) and res.sensing_ok,
        require_ris_power=(scheme == driver.ACTIVE))
    return rep.ok, {k: v[1] for k, v in rep.checks.items()}


def _convergence_worker(seed):
    cfg = dataclasses.replace(BASE, seed=seed)
    ch = generate_channels(cfg)
    res = driver.run(ch, cfg)
    ok, slacks = _feasibility_flags(res, ch, cfg, driver.ACTIVE)
    return {
        "seed": seed,
        "trace": [r.secrecy_rate for r in res.records],
        "reason": res.reason,
        "outer": res.outer_iterations,
        "sensing_ok": res.sensing_ok,
        "feasible": ok,
        "slacks": slacks,
    }


@pytest.fixture(scope="module")
def corpus_convergence():
    t0 = time.perf_counter()
    out = pool_map(_convergence_worker, list(range(1, 21)))
    return out, time.perf_counter() - t0


def _trend_worker(task):
    label, scheme, eta_db, trial = task
    cfg = dataclasses.replace(BASE, eta_db=(eta_db,))
    ch = generate_channels(cfg, substream(BASE.seed, 0, trial))
    run_cfg = experiments.fair_power_budgets(cfg, scheme)
    res = driver.run(ch, run_cfg, rng_seed=9_000_000 + trial, mode=scheme)
    ok, slacks = _feasibility_flags(res, ch, run_cfg, scheme)
    return {
        "label": label, "trial": trial,
        "secrecy": res.secrecy_rate,
        "sinr_db": 10 * np.log10(max(res.radar_sinr, 1e-300)),
        "converged": res.reason == "converged",
        "sensing_ok": res.sensing_ok,
        "feasible": ok,
        "slacks": slacks,
    }


@pytest.fixture(scope="module")
def corpus_trend():
    t0 = time.perf_counter()
    tasks = []
    for trial in range(50):
        tasks += [("active15", driver.ACTIVE, 15.0, trial),
                  ("active20", driver.ACTIVE, 20.0, trial),
                  ("passive", driver.PASSIVE, 15.0, trial),
                  ("nrns", driver.NRNS, 15.0, trial)]
    out = pool_map(_trend_worker, tasks)
    return out, time.perf_counter() - t0


def _gamma_worker(task):
    gamma_db, trial = task
    cfg = dataclasses.replace(BASE, gamma_r_db=gamma_db)
    ch = generate_channels(cfg, substream(BASE.seed, 7, trial))
    res = driver.run(ch, cfg, rng_seed=8_000_000 + trial)
    ok, _ = _feasibility_flags(res, ch, cfg, driver.ACTIVE)
    return {"gamma_db": gamma_db, "trial": trial,
            "secrecy": res.secrecy_rate, "converged": res.reason == "converged",
            "sensing_ok": res.sensing_ok, "feasible": ok}


@pytest.fixture(scope="module")
def corpus_gamma():
    tasks = [(g, t) for g in (-100.0, -95.0, -90.0, -85.0, -80.0)
             for t in range(10)]
    return pool_map(_gamma_worker, tasks)


def _beampattern_worker(task):
    upos, seed = task
    cfg = dataclasses.replace(BASE, user_pos=upos, seed=seed)
    ch = generate_channels(cfg)
    res = driver.run(ch, cfg)
    rep = experiments.beampattern_report(res.precoder, res.ris, ch, cfg)
    return {"user_pos": upos, "seed": seed,
            "pattern_lin": (10 ** (rep.normalized_db / 10.0)).tolist(),
            "theta": rep.theta_deg.tolist(),
            "user_aod": rep.marks["user"][0],
            "eve_aod": rep.marks["eve"][0]}


@pytest.fixture(scope="module")
def corpus_beampattern():
    tasks = [(upos, seed)
             for upos in ((90.0, 40.0), (103.78, 34.42))
             for seed in range(1, 11)]
    return pool_map(_beampattern_worker, tasks)


# --- criterion 7: monotone convergence ------------------------------------------


def test_criterion_7_monotone_convergence(corpus_convergence):
    runs, elapsed = corpus_convergence
    for run in runs:
        diffs = np.diff(run["trace"])
        assert np.all(diffs >= 0.0), (run["seed"], diffs.min())
    fast = sum(run["reason"] == "converged" and run["outer"] <= 10
               for run in runs)
    assert fast >= 18     # >= 90% of 20 runs
    assert elapsed < 600.0
    report(7, f"20 runs exactly nondecreasing; {fast}/20 converged within "
              f"10 outer iterations; {elapsed:.0f}s")


# --- criterion 8: scheme ordering and gaps ---------------------------------------


def test_criterion_8_trend_reproduction(corpus_trend):
    rows, elapsed = corpus_trend
    groups = {}
    for row in rows:
        groups.setdefault(row["label"], []).append(row)
    mean_sr = {k: float(np.mean([r["secrecy"] for r in v]))
               for k, v in groups.items()}
    assert mean_sr["active20"] > mean_sr["active15"] > mean_sr["passive"] \
        > mean_sr["nrns"], mean_sr
    sr_gap = mean_sr["active15"] - mean_sr["passive"]
    assert sr_gap >= 1.0

    sinr15 = float(np.mean([r["sinr_db"] for r in groups["active15"]]))
    sinr_pas = float(np.mean([r["sinr_db"] for r in groups["passive"]]))
    sinr_gap = sinr15 - sinr_pas
    assert sinr_gap >= 30.0

    # paired-trial comparison: the passive surface beats the bare baseline
    pas = {r["trial"]: r["secrecy"] for r in groups["passive"]}
    bare = {r["trial"]: r["secrecy"] for r in groups["nrns"]}
    wins = sum(pas[t] >= bare[t] for t in pas) / len(pas)
    assert wins >= 0.8
    assert elapsed < 1800.0
    report(8, f"mean SR {mean_sr['active20']:.2f} > {mean_sr['active15']:.2f} "
              f"> {mean_sr['passive']:.2f} > {mean_sr['nrns']:.2f}; "
              f"SR gap {sr_gap:.2f} nat; SINR gap {sinr_gap:.1f} dB; "
              f"passive beats bare baseline on {100 * wins:.0f}% of pairs; "
              f"{elapsed:.0f}s for 200 runs")


# --- criterion 9: echo-floor insensitivity --------------------------------------


def test_criterion_9_gamma_insensitivity(corpus_gamma):
    groups = {}
    for row in corpus_gamma:
        groups.setdefault(row["gamma_db"], []).append(row["secrecy"])
    means = {g: float(np.mean(v)) for g, v in sorted(groups.items())}
    spread = (max(means.values()) - min(means.values())) / max(means.values())
    assert spread < 0.05, means
    report(9, f"mean SR over 20 dB floor band: {means} "
              f"(relative spread {100 * spread:.2f}%)")


# --- criterion 10: beampattern geometry ------------------------------------------


def test_criterion_10_beampattern(corpus_beampattern):
    by_pos = {}
    for row in corpus_beampattern:
        by_pos.setdefault(tuple(row["user_pos"]), []).append(row)
    for upos, rows in by_pos.items():
        theta = np.array(rows[0]["theta"])
        step = theta[1] - theta[0]
        mean_pattern = np.mean([row["pattern_lin"] for row in rows], axis=0)
        mean_db = 10 * np.log10(mean_pattern / mean_pattern.max())
        peak = theta[np.argmax(mean_pattern)]
        user_aod = rows[0]["user_aod"]
        eve_aod = rows[0]["eve_aod"]
        assert abs(peak - user_aod) <= 3 * step + 1e-9, (upos, peak, user_aod)
        eve_val = mean_db[np.argmin(np.abs(theta - eve_aod))]
        assert eve_val <= -10.0, (upos, eve_val)
        assert np.all(mean_db <= 1e-9)
        report(10, f"user at {upos}: peak {peak:+.2f} vs AoD {user_aod:+.2f} "
                   f"deg, eavesdropper mark {eve_val:.1f} dB")


# --- criterion 11: end-to-end feasibility ----------------------------------------


def test_criterion_11_corpus_feasibility(corpus_convergence, corpus_trend,
                                         corpus_gamma):
    checked = 0
    for run in corpus_convergence[0]:
        if run["reason"] == "converged":
            assert run["feasible"], run
            checked += 1
    for row in corpus_trend[0]:
        if row["converged"]:
            assert row["feasible"], row
            checked += 1
    for row in corpus_gamma:
        if row["converged"]:
            assert row["feasible"], row
            checked += 1
    assert checked >= 200
    report(11, f"{checked} converged results all pass the feasibility "
               f"report at 1e-6 relative slack")
