"""Beamformer subproblem at a fixed reflector setting.

The echo-SINR constraint is convexified by a tangent lower bound of
``tr(X^H J^-1 X)`` around the current iterate, the per-column beamformers
are lifted to unit-corner PSD blocks with the rank-1 constraint relaxed,
and the log-rate-difference objective is minorized by linearizing its
convex part at the anchor.  Rank-1 recovery runs an eigenvector candidate
plus Gaussian randomization, rescaled into the power budgets.
"""

from dataclasses import dataclass, field

import numpy as np

from . import conic
from .linalg import dagger, herm, herm_solve, psd_cholesky
from .sysmodel import Precoder, cascade_row, covariance, radar_operators, rate_difference


def trace_quadratic_lower_bound(x, j, x_anchor, j_anchor):
    """Tangent lower bound of tr(X^H J^-1 X), tight at the anchor.

    The map is jointly convex in (X, J) for Hermitian positive-definite J,
    so its first-order expansion at (x_anchor, j_anchor) bounds it below
    everywhere.
    """
    jinv_x = herm_solve(j_anchor, x_anchor)
    term1 = 2.0 * np.real(np.trace(dagger(jinv_x) @ x))
    term2 = np.real(np.trace((jinv_x @ dagger(jinv_x)) @ j))
    return float(term1 - term2)


@dataclass
class WStepContext:
    """Anchored data of one convexified beamformer subproblem."""

    eff_user: np.ndarray        # effective user channel, noise-normalized
    eff_eve: np.ndarray
    h_user_lift: np.ndarray     # lifted rate matrices, (M+1) x (M+1)
    h_eve_lift: np.ndarray
    t_mat: np.ndarray           # reflector power load map on the covariance
    t_lift: np.ndarray
    p_ris_eff: float            # reflector budget minus its signal-independent draw
    sinr_blocks: list           # per-column constraint matrices
    alpha: float                # anchored constant of the SINR bound
    e_bias: float               # alpha + required echo SINR
    w_anchor: np.ndarray
    aja: np.ndarray             # A^H J^-1 A at the anchor
    z_mat: np.ndarray           # B^H E B at the anchor
    gamma_r: float


def _lift(w_col):
    v = np.concatenate([w_col, [1.0 + 0j]])
    return np.outer(v, v.conj())


def _effective_channel(h_direct, h_ris, phi, h_br, ris_noise, rx_noise):
    row = cascade_row(h_direct, h_ris, phi, h_br)
    den = np.sqrt(ris_noise * np.sum(np.abs(h_ris.conj() * phi) ** 2) + rx_noise)
    return row.conj() / den


def build_context(ch, p_anchor: Precoder, v, noise, gamma_r, p_ris, rho) -> WStepContext:
    """Anchor the SINR bound and assemble the lifted problem data."""
    m = p_anchor.m
    phi = v.phi
    ops = radar_operators(p_anchor, v, ch, noise, rho)
    r_anchor = covariance(p_anchor.w)
    jinv_a = herm_solve(ops.j, ops.a)
    e_mat = herm(jinv_a @ r_anchor @ dagger(jinv_a))
    alpha = float(np.real(np.trace(e_mat @ ops.n)))
    aja = herm(dagger(ops.a) @ jinv_a)
    z_mat = herm(dagger(ops.b) @ e_mat @ ops.b)

    blocks = []
    for i in range(m + 1):
        h_i = np.zeros((m + 1, m + 1), dtype=complex)
        h_i[:m, :m] = z_mat
        cross = -(aja @ p_anchor.w[:, i])
        h_i[:m, m] = cross
        h_i[m, :m] = cross.conj()
        blocks.append(h_i)

    eff_user = _effective_channel(ch.h_bu, ch.h_ru, phi, ch.h_br,
                                  noise.ris_fwd, noise.user)
    eff_eve = _effective_channel(ch.h_be, ch.h_re, phi, ch.h_br,
                                 noise.ris_fwd, noise.eve)

    def lift_rate(h):
        out = np.zeros((m + 1, m + 1), dtype=complex)
        out[:m, :m] = np.outer(h, h.conj())
        out[m, m] = 1.0
        return out

    fwd = phi[:, None] * ch.h_br
    echo = (phi.conj()[:, None] * (ch.g * phi[None, :])) @ ch.h_br
    t_mat = herm(dagger(fwd) @ fwd + dagger(echo) @ echo)
    t_lift = np.zeros((m + 1, m + 1), dtype=complex)
    t_lift[:m, :m] = t_mat
    phi_noise = ((noise.ris_fwd + noise.ris_bwd) * float(np.sum(np.abs(phi) ** 2))
                 + noise.ris_fwd * float(np.sum(np.abs(phi.conj()[:, None]
                                                       * (ch.g * phi[None, :])) ** 2)))
    return WStepContext(
        eff_user=eff_user, eff_eve=eff_eve,
        h_user_lift=lift_rate(eff_user), h_eve_lift=lift_rate(eff_eve),
        t_mat=t_mat, t_lift=t_lift, p_ris_eff=float(p_ris - phi_noise),
        sinr_blocks=blocks, alpha=alpha, e_bias=float(alpha + gamma_r),
        w_anchor=p_anchor.w.copy(), aja=aja, z_mat=z_mat, gamma_r=float(gamma_r))


def _block_names(m):
    return [f"w{i}" for i in range(m)] + ["wc"]


def build_sdp(ctx: WStepContext, p_bs, w_c_anchor=None, enforce_sensing=True,
              include_ris_power=True) -> conic.SdpProblem:
    """Lifted relaxation with the minorized objective at the given anchor."""
    m = ctx.w_anchor.shape[0]
    names = _block_names(m)
    dim = m + 1
    eye = np.eye(dim, dtype=complex)

    if w_c_anchor is None:
        w_c_anchor = _lift(ctx.w_anchor[:, -1])
    s_eve = float(np.real(np.trace(ctx.h_eve_lift @ w_c_anchor)))

    constraints = [conic.TraceConstraint({n: eye for n in names},
                                         rhs=float(p_bs + m + 1), sense="<=",
                                         name="bs_power")]
    if enforce_sensing:
        constraints.insert(0, conic.TraceConstraint(
            {n: ctx.sinr_blocks[i] for i, n in enumerate(names)},
            rhs=-ctx.e_bias, sense="<=", name="echo_sinr"))
    if include_ris_power:
        constraints.append(conic.TraceConstraint(
            {n: ctx.t_lift for n in names}, rhs=ctx.p_ris_eff, sense="<=",
            name="ris_power"))

    return conic.SdpProblem(
        blocks={n: dim for n in names},
        objective=conic.LinearExpr({"wc": -ctx.h_eve_lift / s_eve}),
        log_terms=[conic.LogTerm(1.0, {"wc": ctx.h_user_lift})],
        constraints=constraints,
        diag_bounds=[conic.DiagBound(n, m, 1.0, "==") for n in names])


def surrogate_value(ctx: WStepContext, w, w_c_anchor):
    """Minorized objective at a rank-1 candidate (lifted on the fly)."""
    s_eve = float(np.real(np.trace(ctx.h_eve_lift @ w_c_anchor)))
    num_u = 1.0 + np.abs(ctx.eff_user.conj() @ w[:, -1]) ** 2
    num_e = 1.0 + np.abs(ctx.eff_eve.conj() @ w[:, -1]) ** 2
    return float(np.log(num_u) - num_e / s_eve)


def sinr_constraint_value(ctx: WStepContext, w):
    """Convexified constraint residual; nonpositive means feasible."""
    total = ctx.e_bias
    for i in range(w.shape[1]):
        col = w[:, i]
        total += float(np.real(col.conj() @ ctx.z_mat @ col))
        total -= 2.0 * float(np.real(ctx.w_anchor[:, i].conj() @ ctx.aja @ col))
    return total


def recover_rank1(blocks, ctx: WStepContext, p_bs, trials, rng,
                  enforce_sensing=True, include_ris_power=True,
                  w_c_anchor=None):
    """Rank-1 precoder from the relaxed blocks; None when every draw fails.

    Candidate zero is the leading-eigenvector point; the rest draw from the
    block Gram factors.  Every candidate is scaled into the power budgets
    and kept only if the convexified SINR constraint still holds (which
    implies the true echo constraint by the lower-bound property).
    """
    if trials <= 0:
        return None
    m = ctx.w_anchor.shape[0]
    names = _block_names(m)
    if w_c_anchor is None:
        w_c_anchor = _lift(ctx.w_anchor[:, -1])

    def eig_candidate():
        w = np.zeros((m, m + 1), dtype=complex)
        for i, n in enumerate(names):
            mat = herm(blocks[n])
            vals, vecs = np.linalg.eigh(mat)
            vec, val = vecs[:, -1], max(vals[-1], 0.0)
            corner = vec[m]
            if abs(corner) > 1e-12:
                vec = vec * (corner.conjugate() / abs(corner))
            w[:, i] = vec[:m] * np.sqrt(val)
        return w

    factors = {}
    for n in names:
        try:
            factors[n] = psd_cholesky(herm(blocks[n]), rtol=1e-6)
        except ValueError:
            factors[n] = None

    def gaussian_candidate():
        w = np.zeros((m, m + 1), dtype=complex)
        for i, n in enumerate(names):
            if factors[n] is None:
                return None
            g = (rng.standard_normal(m + 1) + 1j * rng.standard_normal(m + 1))
            x = factors[n] @ (g / np.sqrt(2.0))
            corner = x[m]
            if abs(corner) > 1e-12:
                x = x * (corner.conjugate() / abs(corner))
            w[:, i] = x[:m]
        return w

    best, best_score = None, -np.inf
    for k in range(trials):
        w = eig_candidate() if k == 0 else gaussian_candidate()
        if w is None:
            continue
        scale = 1.0
        power = float(np.sum(np.abs(w) ** 2))
        if power > p_bs:
            scale = min(scale, np.sqrt(p_bs / power))
        if include_ris_power and ctx.p_ris_eff >= 0:
            load = float(np.real(np.trace(ctx.t_mat @ covariance(w))))
            if load > ctx.p_ris_eff > 0:
                scale = min(scale, np.sqrt(ctx.p_ris_eff / load))
            elif load > 0 and ctx.p_ris_eff == 0:
                scale = 0.0
        w = w * scale
        if enforce_sensing:
            # the slack must scale with the echo floor: a surrogate-feasible
            # candidate then meets the true constraint within 1e-7 relative
            tol = 1e-7 * ctx.gamma_r if ctx.gamma_r > 0 \
                else 1e-9 * max(1.0, abs(ctx.e_bias))
            if sinr_constraint_value(ctx, w) > tol:
                continue
        score = surrogate_value(ctx, w, w_c_anchor)
        if score > best_score:
            best, best_score = w, score
    return None if best is None else Precoder(best)


@dataclass
class WStepResult:
    precoder: Precoder
    status: str                       # converged | max-iterations | sensing-infeasible | stalled
    iterations: int = 0
    surrogate_values: list = field(default_factory=list)
    objective: float = 0.0            # true rate difference at the output
    fallbacks: int = 0
    problems_solved: int = 0


def solve_wstep(ch, p_start: Precoder, v, cfg, noise=None, rho=None,
                enforce_sensing=True, include_ris_power=True, rng=None,
                options=None) -> WStepResult:
    """Inner minorize-maximize loop for the beamformer at fixed reflector.

    The true rate difference never decreases: candidates that regress are
    discarded and the previous iterate kept.
    """
    if noise is None:
        noise = cfg.noise_powers()
    if rho is None:
        rho = cfg.si_rho
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    options = options or conic.SolverOptions(max_log_passes=12)

    w_cur = p_start
    f_cur = rate_difference(w_cur, v, ch, noise)
    surrogates = []
    status = "max-iterations"
    fallbacks = 0
    solved = 0
    iters = 0

    for k in range(cfg.inner_w_max):
        iters = k + 1
        ctx = build_context(ch, w_cur, v, noise, cfg.gamma_r if enforce_sensing
                            else 0.0, cfg.p_ris_w, rho)
        problem = build_sdp(ctx, cfg.p_bs_w, enforce_sensing=enforce_sensing,
                            include_ris_power=include_ris_power)
        start = {n: _lift(w_cur.w[:, i])
                 for i, n in enumerate(_block_names(w_cur.m))}
        opts = conic.SolverOptions(
            abstol=options.abstol, reltol=options.reltol,
            feastol=options.feastol, max_ipm_iters=options.max_ipm_iters,
            max_log_passes=options.max_log_passes, log_tol=options.log_tol,
            kktsolver=options.kktsolver, start=start)
        sol = conic.solve(problem, opts)
        solved += sol.problems_solved
        if sol.status == conic.INFEASIBLE:
            status = "sensing-infeasible" if (k == 0 and enforce_sensing) \
                else "stalled"
            break
        if sol.status == conic.NUMERICAL_FAILURE:
            status = "stalled"
            break
        candidate = recover_rank1(sol.blocks, ctx, cfg.p_bs_w,
                                  cfg.randomization_trials, rng,
                                  enforce_sensing=enforce_sensing,
                                  include_ris_power=include_ris_power)
        surrogates.append(sol.value)
        if candidate is None:
            status = "stalled"
            fallbacks += 1
            break
        f_new = rate_difference(candidate, v, ch, noise)
        if f_new < f_cur:
            fallbacks += 1              # keep the previous iterate
            status = "converged"
            break
        w_cur, f_cur = candidate, f_new
        if len(surrogates) >= 2:
            change = abs(surrogates[-1] - surrogates[-2])
            if change <= cfg.inner_tol * max(1.0, abs(surrogates[-1])):
                status = "converged"
                break

    return WStepResult(precoder=w_cur, status=status, iterations=iters,
                       surrogate_values=surrogates, objective=f_cur,
                       fallbacks=fallbacks, problems_solved=solved)
