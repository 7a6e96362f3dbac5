"""Reflector subproblem at a fixed beamformer.

The rate terms are lifted onto a unit-corner PSD matrix of the conjugated
coefficient vector.  The echo-SINR constraint, quartic in the coefficients,
is minorized in three moves: the tangent bound of ``tr(X^H J^-1 X)`` at the
anchor, a vectorization that turns the quartic and quadratic pieces into
forms of the lifted outer product, and a norm-ratio upper bound on the
cubic cross term.  The surface power identity is an exact reformulation,
not a bound.  Large N-squared forms are never materialized: their N x N
principal blocks come from the rank-1 target-response structure in closed
form.
"""

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from . import conic
from .linalg import dagger, herm, herm_solve, psd_cholesky, unvec, vec
from .sysmodel import (RisCoeffs, covariance, radar_operators, radar_sinr,
                       rate_difference, ris_power)


def cross_term_upper_bound(k, l, k_anchor, l_anchor):
    """Norm-ratio upper bound of 2 Re tr(K L^H), tight for proportional anchors."""
    nk = np.linalg.norm(k_anchor)
    nl = np.linalg.norm(l_anchor)
    if nk == 0.0 or nl == 0.0:
        raise ValueError("cross-term bound needs nonzero anchors")
    return float((nl / nk) * np.sum(np.abs(k) ** 2)
                 + (nk / nl) * np.sum(np.abs(l) ** 2))


def lift_phi(phi):
    """Conjugated-coefficient lifting: returns (v_bar, V_bar)."""
    v = np.conj(np.asarray(phi, dtype=complex)).ravel()
    v_bar = np.concatenate([v, [1.0 + 0j]])
    return v_bar, np.outer(v_bar, v_bar.conj())


def coeff_vec_hat(phi):
    """vec of the N x N outer-product block of the lifting."""
    v = np.conj(np.asarray(phi, dtype=complex)).ravel()
    return vec(np.outer(v, v.conj()))


def rate_matrices(ch, w_c, noise):
    """Lifted rate matrices (user pair, eavesdropper pair), (N+1) square.

    For any coefficients, ln tr(H1 Vbar) - ln tr(H2 Vbar) at the lifted
    point reproduces ln(1 + link SNR): H1 carries signal plus the full
    noise, H2 the noise alone (surface-injected part plus receiver floor).
    """
    out = []
    for h_direct, h_ris, rx_noise in ((ch.h_bu, ch.h_ru, noise.user),
                                      (ch.h_be, ch.h_re, noise.eve)):
        n = h_ris.size
        b = h_ris.conj() * (ch.h_br @ w_c)
        c = complex(h_direct.conj() @ w_c)
        h_noise = noise.ris_fwd * np.diag(np.abs(h_ris) ** 2).astype(complex)
        h1 = np.zeros((n + 1, n + 1), dtype=complex)
        h1[:n, :n] = np.outer(b, b.conj()) + h_noise
        h1[:n, n] = b * np.conj(c)
        h1[n, :n] = c * b.conj()
        h1[n, n] = rx_noise + abs(c) ** 2
        h2 = np.zeros((n + 1, n + 1), dtype=complex)
        h2[:n, :n] = h_noise
        h2[n, n] = rx_noise
        out += [herm(h1), herm(h2)]
    return tuple(out)


def p1_vector(ch, r, a_anchor, j_anchor):
    """Linear form whose doubled real part is the tangent SINR numerator."""
    core = ch.h_br @ herm_solve(j_anchor, a_anchor) @ r @ dagger(ch.h_br)
    return np.conj(vec(ch.g)) * vec(core)


def quartic_block_extract(ch, e_mat):
    """Principal block of the quartic form's N^2 matrix, in closed form.

    Equals G1^H F G1 with F the forward-mapped anchor matrix and
    G1 = diag(gamma * a(theta)): for every diagonal reflector,
    tr(V M V^H) reproduces the quartic trace through the target response.
    """
    f_tilde = herm(ch.h_br @ e_mat @ dagger(ch.h_br))
    # the first diagonal block of diag(vec(G)) has diagonal G[:, 0]; the
    # first steering entry is 1, so no rescaling is needed
    g1_diag = ch.g[:, 0]
    return herm((np.conj(g1_diag)[:, None] * f_tilde) * g1_diag[None, :])


def materialized_quartic_matrix(ch, e_mat):
    """Full N^2 x N^2 quartic-form matrix; test-scale sizes only."""
    f_tilde = herm(ch.h_br @ e_mat @ dagger(ch.h_br))
    n = ch.g.shape[0]
    d = np.conj(vec(ch.g))
    return (d[:, None] * np.kron(np.eye(n), f_tilde)) * np.conj(d)[None, :]


@dataclass
class PhiStepContext:
    """Anchored data of one convexified reflector subproblem."""

    h_u1: np.ndarray
    h_u2: np.ndarray
    h_e1: np.ndarray
    h_e2: np.ndarray
    p1: np.ndarray
    p2: np.ndarray
    p3: np.ndarray
    m1: np.ndarray
    m11: np.ndarray
    m12: np.ndarray
    m2: np.ndarray
    n1: np.ndarray
    n2: np.ndarray
    l1: np.ndarray
    l2: np.ndarray
    alpha2: float
    e_bias: float
    beta_sq: float
    beta_fallback: bool
    phi_anchor: np.ndarray
    e_mat: np.ndarray
    f_tilde: np.ndarray
    r_mat: np.ndarray
    gamma_r: float
    n1_imag_residual: float


def ris_power_quadratic(ch, r, noise):
    """Exact reformulation of the consumed surface power as (M2, N2) forms."""
    load = herm(ch.h_br @ r @ dagger(ch.h_br))
    n = load.shape[0]
    xi2 = load + (noise.ris_fwd + noise.ris_bwd) * np.eye(n)
    xi3 = load + noise.ris_fwd * np.eye(n)
    g1_diag = ch.g[:, 0]
    m2 = herm((np.conj(g1_diag)[:, None] * xi3) * g1_diag[None, :])
    n2 = np.diag(np.diag(xi2).real).astype(complex)
    return m2, n2


def assemble_sinr_quadratic(ch, p, v_anchor, noise, rho, gamma_r):
    """Minorized echo-SINR pieces (M1, N1, e2) plus anchor diagnostics."""
    n = v_anchor.phi.size
    r = covariance(p.w)
    ops = radar_operators(p, v_anchor, ch, noise, rho)
    jinv_a = herm_solve(ops.j, ops.a)
    e_mat = herm(jinv_a @ r @ dagger(jinv_a))
    f_tilde = herm(ch.h_br @ e_mat @ dagger(ch.h_br))

    phi = v_anchor.phi
    phig_phi = phi.conj()[:, None] * (ch.g * phi[None, :])      # anchor K
    phih_f = np.conj(phi)[:, None] * f_tilde                    # anchor L^H
    norm_k = np.linalg.norm(phig_phi)
    norm_l = np.linalg.norm(phih_f)
    beta_fallback = not (norm_k > 0.0 and norm_l > 0.0)
    beta_sq = 1.0 if beta_fallback else float(norm_k / norm_l)

    p1 = p1_vector(ch, r, ops.a, ops.j)
    xi1 = ((noise.ris_fwd + noise.ris_bwd) * np.eye(n)
           + rho**2 * (ch.h_br @ r @ dagger(ch.h_br)))
    p21 = np.conj(vec(f_tilde)) * vec(xi1)
    f_sq_diag = np.diag(f_tilde @ f_tilde).real
    p22 = np.zeros(n * n, dtype=complex)
    diag_idx = np.arange(n) * (n + 1)
    p22[diag_idx] = noise.ris_fwd * beta_sq * f_sq_diag
    p2 = p21 + p22

    m11 = quartic_block_extract(ch, e_mat)
    m12 = (noise.ris_fwd / beta_sq) * float(np.abs(ch.gamma) ** 2) * np.eye(n)
    m1 = herm(noise.ris_fwd * m11 + m12)

    n11 = dagger(unvec(p1 - p2, n))
    n12 = unvec(p1, n)
    n1 = n11 + n12

    alpha2 = float(noise.radar * np.real(np.trace(e_mat)))
    v_bar, _ = lift_phi(phi)
    v_blk = np.outer(v_bar[:n], v_bar[:n].conj())
    tr_n1 = complex(np.trace(n1 @ v_blk))
    resid = abs(tr_n1.imag) / max(abs(tr_n1.real), np.finfo(float).tiny)

    return PhiStepContext(
        h_u1=None, h_u2=None, h_e1=None, h_e2=None,
        p1=p1, p2=p2, p3=None, m1=m1, m11=m11, m12=m12, m2=None,
        n1=n1, n2=None, l1=None, l2=None,
        alpha2=alpha2, e_bias=float(alpha2 + gamma_r), beta_sq=beta_sq,
        beta_fallback=beta_fallback, phi_anchor=phi.copy(), e_mat=e_mat,
        f_tilde=f_tilde, r_mat=r, gamma_r=float(gamma_r),
        n1_imag_residual=float(resid))


def sinr_lower_bound_value(ctx: PhiStepContext, phi):
    """Minorant of the echo SINR at arbitrary coefficients."""
    v = np.conj(phi)
    v_blk = np.outer(v, v.conj())
    quad = float(np.real(np.trace(v_blk @ ctx.m1 @ v_blk.conj().T)))
    lin = float(np.real(np.trace(ctx.n1 @ v_blk)))
    return -quad + lin - ctx.alpha2


def build_context(ch, p, v_anchor, noise, rho, gamma_r) -> PhiStepContext:
    """Full reflector-subproblem context at one anchor."""
    ctx = assemble_sinr_quadratic(ch, p, v_anchor, noise, rho, gamma_r)
    ctx.h_u1, ctx.h_u2, ctx.h_e1, ctx.h_e2 = rate_matrices(ch, p.w_comm, noise)
    ctx.m2, ctx.n2 = ris_power_quadratic(ch, ctx.r_mat, noise)
    n = v_anchor.phi.size
    xi2_diag = np.diag(ctx.n2).real
    ctx.p3 = np.zeros(n * n, dtype=complex)
    ctx.p3[np.arange(n) * (n + 1)] = xi2_diag
    try:
        ctx.l1 = psd_cholesky(ctx.m1, rtol=1e-9)
        ctx.l2 = psd_cholesky(ctx.m2, rtol=1e-9)
    except ValueError as exc:
        raise conic.SolverFailure(
            f"surrogate curvature matrix not PSD: {exc}") from exc
    return ctx


def build_sdp(ctx: PhiStepContext, eta, p_ris, v_bar_anchor=None,
              passive=False, enforce_sensing=True,
              encoding="soc") -> conic.SdpProblem:
    """Lifted relaxation of the reflector subproblem at the given anchor."""
    n = ctx.phi_anchor.size
    dim = n + 1
    if v_bar_anchor is None:
        _, v_bar_anchor = lift_phi(ctx.phi_anchor)

    s_u2 = float(np.real(np.trace(ctx.h_u2 @ v_bar_anchor)))
    s_e1 = float(np.real(np.trace(ctx.h_e1 @ v_bar_anchor)))
    lin = -(ctx.h_u2 / s_u2) - (ctx.h_e1 / s_e1)

    def border(mat):
        out = np.zeros((dim, dim), dtype=complex)
        out[:n, :n] = mat
        return out

    make = (conic.frobenius_quadratic_as_soc if encoding == "soc"
            else conic.frobenius_quadratic_as_lmi)
    quads = []
    if enforce_sensing:
        quads.append(make("V", n, ctx.l1,
                          conic.LinearExpr({"V": border(herm(ctx.n1))},
                                           const=-ctx.e_bias),
                          name="echo_sinr"))
    if not passive:
        quads.append(make("V", n, ctx.l2,
                          conic.LinearExpr({"V": border(-ctx.n2)}, const=p_ris),
                          name="ris_power"))

    diags = [conic.DiagBound("V", n, 1.0, "==", name="corner")]
    for i in range(n):
        if passive:
            diags.append(conic.DiagBound("V", i, 1.0, "==", name=f"cap{i}"))
        else:
            diags.append(conic.DiagBound("V", i, float(eta[i] ** 2), "<=",
                                         name=f"cap{i}"))

    return conic.SdpProblem(
        blocks={"V": dim},
        objective=conic.LinearExpr({"V": lin}),
        log_terms=[conic.LogTerm(1.0, {"V": ctx.h_u1}),
                   conic.LogTerm(1.0, {"V": ctx.h_e2})],
        diag_bounds=diags,
        quad_constraints=quads)


def lifted_rate_difference(ctx: PhiStepContext, v_bar_mat):
    """Rate difference of a lifted point through the four rate matrices."""
    tu1 = float(np.real(np.trace(ctx.h_u1 @ v_bar_mat)))
    tu2 = float(np.real(np.trace(ctx.h_u2 @ v_bar_mat)))
    te1 = float(np.real(np.trace(ctx.h_e1 @ v_bar_mat)))
    te2 = float(np.real(np.trace(ctx.h_e2 @ v_bar_mat)))
    return float(np.log(tu1) - np.log(tu2) - np.log(te1) + np.log(te2))


def _scale_into_power(phi, ch, p, noise, p_ris):
    """Largest scale in (0, 1] keeping the consumed surface power in budget."""
    probe = RisCoeffs(phi=phi, eta=np.full(phi.size, np.inf))
    if sum(ris_power(p, probe, ch, noise)) <= p_ris:
        return 1.0
    lo, hi = 0.0, 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        probe = RisCoeffs(phi=mid * phi, eta=np.full(phi.size, np.inf))
        if sum(ris_power(p, probe, ch, noise)) <= p_ris:
            lo = mid
        else:
            hi = mid
    return lo


def recover_rank1_phi(blocks, ctx: PhiStepContext, ch, p, noise, rho, eta,
                      p_ris, gamma_r, trials, rng, passive=False,
                      enforce_sensing=True):
    """Rank-1 coefficients from the relaxed lifting; None when all draws fail.

    Candidates are clipped to the per-element caps (projected to unit
    modulus in the passive variant), rescaled into the surface power
    budget, and must satisfy the true echo-SINR constraint; the survivor
    with the best true rate difference wins.
    """
    if trials <= 0:
        return None
    n = ctx.phi_anchor.size
    v_mat = herm(blocks["V"])

    def normalize(u):
        corner = u[n]
        if abs(corner) > 1e-9 * (1.0 + np.max(np.abs(u))):
            u = u / corner
        return np.conj(u[:n])

    vals, vecs = np.linalg.eigh(v_mat)
    eig_phi = normalize(vecs[:, -1] * np.sqrt(max(vals[-1], 0.0)))
    try:
        factor = psd_cholesky(v_mat, rtol=1e-6)
    except ValueError:
        factor = None

    best, best_score = None, -np.inf
    for k in range(trials):
        if k == 0:
            phi = eig_phi
        else:
            if factor is None:
                continue
            g = rng.standard_normal(n + 1) + 1j * rng.standard_normal(n + 1)
            phi = normalize(factor @ (g / np.sqrt(2.0)))
        mags = np.abs(phi)
        if passive:
            phi = np.where(mags > 1e-30, phi / np.maximum(mags, 1e-300),
                           1.0 + 0j)
        else:
            over = mags > eta
            if np.any(over):
                phi = np.where(over, phi * (eta / np.maximum(mags, 1e-300)), phi)
            phi = phi * _scale_into_power(phi, ch, p, noise, p_ris)
        cand = RisCoeffs(phi=phi, eta=np.asarray(eta, dtype=float))
        if enforce_sensing:
            sinr = radar_sinr(p, cand, ch, noise, rho)
            if sinr < gamma_r * (1.0 - 1e-7):
                continue
        score = rate_difference(p, cand, ch, noise)
        if score > best_score:
            best, best_score = cand, score
    return best


@dataclass
class PhiStepResult:
    ris: RisCoeffs
    status: str
    iterations: int = 0
    surrogate_values: list = field(default_factory=list)
    objective: float = 0.0
    fallbacks: int = 0
    problems_solved: int = 0


def solve_phistep(ch, p, v_start: RisCoeffs, cfg, noise=None, rho=None,
                  passive=False, enforce_sensing=True, rng=None,
                  options=None) -> PhiStepResult:
    """Inner minorize-maximize loop for the reflector at fixed beamformer."""
    if noise is None:
        noise = cfg.noise_powers(active_ris=not passive)
    if rho is None:
        rho = cfg.si_rho
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    options = options or conic.SolverOptions(max_log_passes=12)
    eta = v_start.eta

    v_cur = v_start
    f_cur = rate_difference(p, v_cur, ch, noise)
    surrogates = []
    status = "max-iterations"
    fallbacks = 0
    solved = 0
    iters = 0

    for k in range(cfg.inner_phi_max):
        iters = k + 1
        gamma_r = cfg.gamma_r if enforce_sensing else 0.0
        ctx = build_context(ch, p, v_cur, noise, rho, gamma_r)
        problem = build_sdp(ctx, eta, cfg.p_ris_w, passive=passive,
                            enforce_sensing=enforce_sensing)
        _, v_bar_mat = lift_phi(v_cur.phi)
        sol = conic.solve(problem, dataclasses.replace(options,
                                                       start={"V": v_bar_mat}))
        solved += sol.problems_solved
        if sol.status in (conic.INFEASIBLE, conic.NUMERICAL_FAILURE):
            status = "stalled"
            break
        candidate = recover_rank1_phi(
            sol.blocks, ctx, ch, p, noise, rho, eta, cfg.p_ris_w,
            cfg.gamma_r if enforce_sensing else 0.0,
            cfg.randomization_trials, rng, passive=passive,
            enforce_sensing=enforce_sensing)
        surrogates.append(sol.value)
        if candidate is None:
            status = "stalled"
            fallbacks += 1
            break
        f_new = rate_difference(p, candidate, ch, noise)
        if f_new < f_cur:
            fallbacks += 1
            status = "converged"
            break
        v_cur, f_cur = candidate, f_new
        if len(surrogates) >= 2:
            change = abs(surrogates[-1] - surrogates[-2])
            if change <= cfg.inner_tol * max(1.0, abs(surrogates[-1])):
                status = "converged"
                break

    return PhiStepResult(ris=v_cur, status=status, iterations=iters,
                         surrogate_values=surrogates, objective=f_cur,
                         fallbacks=fallbacks, problems_solved=solved)
