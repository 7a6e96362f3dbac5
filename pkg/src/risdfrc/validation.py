"""Self-contained property suite behind the CLI ``validate`` verb.

Each check re-derives an identity, bound, or solver outcome with an
independent oracle and reports one pass/fail line.  The pytest suite is
the authoritative gate; this module gives a quick field check of an
installed build.
"""

import numpy as np

from . import conic, driver
from . import reflector_step as rs
from . import beamformer_step as ws
from .linalg import dagger, herm, herm_solve, kron, rank_by_singvals, unvec, vec
from .scenario import (ChannelSet, NoisePowers, ScenarioConfig,
                       generate_channels, steering_vector)
from .sysmodel import (Precoder, RisCoeffs, covariance, radar_operators,
                       radar_sinr, ris_power, snr_user)


def _cgauss(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def _toy(rng, m=3, n=4):
    theta = 0.4
    a = steering_vector(theta, 0.5, n)
    gamma = 0.6 + 0.3j
    ch = ChannelSet(h_br=_cgauss(rng, n, m), h_bu=_cgauss(rng, m),
                    h_be=_cgauss(rng, m), h_ru=_cgauss(rng, n),
                    h_re=_cgauss(rng, n), g=gamma * np.outer(a, a.conj()),
                    theta_target=theta, gamma=gamma)
    noise = NoisePowers(user=0.31, eve=0.23, radar=0.17, ris_fwd=0.11,
                        ris_bwd=0.07)
    p = Precoder(_cgauss(rng, m, m + 1))
    phi = 1.5 * np.exp(1j * rng.uniform(0, 2 * np.pi, n)) * rng.uniform(0.3, 1, n)
    v = RisCoeffs(phi=phi, eta=np.full(n, 2.0))
    return ch, noise, p, v


def check_vectorization(rng):
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(2, 7))
        m_mat = _cgauss(rng, n, n)
        if not np.array_equal(unvec(vec(m_mat), n), m_mat):
            return False, "round trip not exact"
        p_vec = _cgauss(rng, n * n)
        v_mat = _cgauss(rng, n, n)
        lhs = np.trace(dagger(unvec(p_vec, n)) @ v_mat)
        rhs = p_vec.conj() @ vec(v_mat)
        worst = max(worst, abs(lhs - rhs) / (1 + abs(rhs)))
        a = _cgauss(rng, n, 3)
        b = _cgauss(rng, 3, 2)
        c = _cgauss(rng, 2, n)
        err = np.linalg.norm(vec(a @ b @ c) - kron(c.T, a) @ vec(b))
        worst = max(worst, err / np.linalg.norm(vec(a @ b @ c)))
    return worst <= 1e-12, f"worst relative error {worst:.2e}"


def check_tangent_lower_bound(rng):
    worst = -np.inf
    for _ in range(200):
        n = int(rng.integers(1, 6))
        x = _cgauss(rng, n, n)
        j = _cgauss(rng, n, n)
        j = j @ dagger(j) + 0.3 * np.eye(n)
        x_a = _cgauss(rng, n, n)
        j_a = _cgauss(rng, n, n)
        j_a = j_a @ dagger(j_a) + 0.3 * np.eye(n)
        truth = np.real(np.trace(dagger(x) @ np.linalg.inv(j) @ x))
        bound = ws.trace_quadratic_lower_bound(x, j, x_a, j_a)
        worst = max(worst, (bound - truth) / (1 + abs(truth)))
    return worst <= 1e-10, f"worst bound excess {worst:.2e}"


def check_cross_term_bound(rng):
    worst = -np.inf
    for _ in range(200):
        n = int(rng.integers(1, 5))
        k = _cgauss(rng, n, n)
        l_mat = _cgauss(rng, n, n)
        truth = 2 * np.real(np.trace(k @ dagger(l_mat)))
        bound = rs.cross_term_upper_bound(k, l_mat, _cgauss(rng, n, n),
                                          _cgauss(rng, n, n))
        worst = max(worst, (truth - bound) / (1 + abs(truth)))
    return worst <= 1e-10, f"worst bound deficit {worst:.2e}"


def check_lifting_consistency(rng):
    ch, noise, p, _ = _toy(rng)
    h_u1, h_u2, _, _ = rs.rate_matrices(ch, p.w_comm, noise)
    worst = 0.0
    for _ in range(20):
        phi = 1.5 * np.exp(1j * rng.uniform(0, 2 * np.pi, 4))
        v = RisCoeffs(phi=phi, eta=np.full(4, 2.0))
        _, vbar = rs.lift_phi(phi)
        lift = np.log(np.trace(h_u1 @ vbar).real) \
            - np.log(np.trace(h_u2 @ vbar).real)
        true = np.log1p(snr_user(p, v, ch, noise))
        worst = max(worst, abs(lift - true) / (1 + abs(true)))
    return worst <= 1e-10, f"worst relative error {worst:.2e}"


def check_transform_identities(rng):
    worst = 0.0
    for _ in range(10):
        ch, noise, p, v = _toy(rng)
        r = covariance(p.w)
        ops = radar_operators(p, v, ch, noise, rho=0.2)
        jinv_a = herm_solve(ops.j, ops.a)
        e_mat = herm(jinv_a @ r @ dagger(jinv_a))
        m11 = rs.quartic_block_extract(ch, e_mat)
        phi_mat = np.diag(v.phi)
        quartic = np.real(np.trace(
            e_mat @ dagger(ch.h_br) @ dagger(phi_mat) @ ch.g @ phi_mat
            @ dagger(phi_mat) @ dagger(ch.g) @ phi_mat @ ch.h_br))
        v_blk = np.outer(np.conj(v.phi), v.phi)
        lhs = np.real(np.trace(v_blk @ m11 @ dagger(v_blk)))
        worst = max(worst, abs(lhs - quartic) / (1 + abs(quartic)))

        m2, n2 = rs.ris_power_quadratic(ch, r, noise)
        power = np.real(np.trace(v_blk @ m2 @ dagger(v_blk))) \
            + np.real(np.trace(n2 @ v_blk))
        total = sum(ris_power(p, v, ch, noise))
        worst = max(worst, abs(power - total) / (1 + abs(total)))
    return worst <= 1e-10, f"worst relative error {worst:.2e}"


def check_block_structure(rng):
    ch, noise, p, v = _toy(rng, n=3)
    ops = radar_operators(p, v, ch, noise, rho=0.2)
    jinv_a = herm_solve(ops.j, ops.a)
    e_mat = herm(jinv_a @ covariance(p.w) @ dagger(jinv_a))
    q1 = rs.materialized_quartic_matrix(ch, e_mat)
    m11 = rs.quartic_block_extract(ch, e_mat)
    n = 3
    for b in range(n):
        blk = q1[b * n:(b + 1) * n, b * n:(b + 1) * n]
        if not np.allclose(blk, m11, atol=1e-10 * max(1, np.abs(m11).max())):
            return False, "diagonal blocks differ"
    ranks = [rank_by_singvals(x) for x in (ch.g, ops.a, e_mat, m11)]
    return all(r == 1 for r in ranks), f"ranks {ranks}"


def check_solver_oracles(rng):
    p = conic.SdpProblem(
        blocks={"x": 2},
        objective=conic.LinearExpr({"x": np.diag([1.0, 2.0]).astype(complex)}),
        constraints=[conic.TraceConstraint({"x": np.eye(2, dtype=complex)},
                                           rhs=1.0, sense="==")])
    sol = conic.solve(p)
    if sol.status != conic.OPTIMAL or abs(sol.value - 2.0) > 1e-6:
        return False, f"max-eigenvalue solve: {sol.status} {sol.value:.2e}"

    bad = conic.SdpProblem(
        blocks={"x": 2},
        objective=conic.LinearExpr({"x": np.eye(2, dtype=complex)}),
        constraints=[conic.TraceConstraint({"x": np.eye(2, dtype=complex)},
                                           rhs=1.0, sense="<="),
                     conic.TraceConstraint({"x": -np.eye(2, dtype=complex)},
                                           rhs=-2.0, sense="<=")])
    if conic.solve(bad).status != conic.INFEASIBLE:
        return False, "infeasible pair not detected"

    one = np.eye(1, dtype=complex)
    logp = conic.SdpProblem(
        blocks={"x": 1},
        objective=conic.LinearExpr({"x": -0.5 * one}),
        log_terms=[conic.LogTerm(1.0, {"x": one})],
        constraints=[conic.TraceConstraint({"x": one}, rhs=10.0, sense="<="),
                     conic.TraceConstraint({"x": -one}, rhs=-0.1, sense="<=")])
    red = conic.reduce_log_terms(logp, start={"x": np.array([[1.0 + 0j]])})
    x_star = red.solution.blocks["x"][0, 0].real
    if abs(x_star - 2.0) > 1e-6 or np.any(np.diff(red.values) < -1e-12):
        return False, f"log fixed point at {x_star:.6f}"
    return True, "max-eig, infeasibility and log-reduction oracles hold"


def check_minorization(rng):
    ch, noise, p, v = _toy(rng)
    ctx = rs.assemble_sinr_quadratic(ch, p, v, noise, 0.3, gamma_r=0.0)
    worst = -np.inf
    for _ in range(50):
        phi = v.eta * rng.uniform(0.05, 1, 4) * np.exp(
            1j * rng.uniform(0, 2 * np.pi, 4))
        v2 = RisCoeffs(phi=phi, eta=v.eta)
        worst = max(worst, rs.sinr_lower_bound_value(ctx, phi)
                    - radar_sinr(p, v2, ch, noise, 0.3))
    return worst <= 1e-9, f"worst minorization excess {worst:.2e}"


def check_monotone_run(rng):
    cfg = ScenarioConfig(seed=int(rng.integers(0, 1000)), outer_max=4)
    ch = generate_channels(cfg)
    res = driver.run(ch, cfg)
    s = [r.secrecy_rate for r in res.records]
    ok = all(b >= a - 1e-9 for a, b in zip(s, s[1:]))
    from .sysmodel import check_feasibility
    rep = check_feasibility(res.precoder, res.ris, ch, cfg,
                            require_sensing=res.sensing_ok)
    return ok and rep.ok, (f"secrecy {s[0]:.3f} -> {s[-1]:.3f}, "
                           f"feasible={rep.ok}")


CHECKS = [
    ("vectorization identities", check_vectorization),
    ("tangent lower bound", check_tangent_lower_bound),
    ("cross-term upper bound", check_cross_term_bound),
    ("rate lifting consistency", check_lifting_consistency),
    ("quartic and power transforms", check_transform_identities),
    ("block structure and ranks", check_block_structure),
    ("solver oracles", check_solver_oracles),
    ("echo-SINR minorization", check_minorization),
    ("monotone end-to-end run", check_monotone_run),
]


def run_all(seed=0, out=print):
    rng = np.random.default_rng(seed)
    failures = 0
    for name, fn in CHECKS:
        try:
            ok, detail = fn(rng)
        except Exception as exc:   # a crashed check is a failed check
            ok, detail = False, f"raised {exc!r}"
        out(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
        failures += not ok
    return failures
