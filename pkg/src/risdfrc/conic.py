"""A minimal semidefinite-programming layer.

Problems are stated over named complex Hermitian PSD blocks with linear
trace constraints, diagonal pins, and Frobenius-quadratic constraints
(available in a Schur-complement LMI encoding and an equivalent
second-order-cone encoding).  Objectives are linear trace functionals plus
optional concave ``weight * ln(sum tr(H X))`` terms.

Log terms are reduced to a sequence of linear-objective solves: each pass
maximizes the tangent objective ``(weight/s) tr(H X)`` at the current point,
then the true concave objective is re-maximized over the convex hull of all
tangent maximizers seen so far (a scalar simplex problem).  The true
objective is nondecreasing by construction, the tangent gap certifies the
remaining suboptimality, and a fixed point of the tangent map is optimal
for the original problem.

The linear-objective core is handled by a primal-dual path-following
interior-point method (cvxopt ``conelp``) on the standard real symmetric
embedding of the Hermitian blocks.
"""

import json
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import cvxopt
from cvxopt import solvers as _cvx_solvers

from .linalg import herm

OPTIMAL = "optimal"
MAX_ITERATIONS = "max-iterations"
INFEASIBLE = "infeasible"
NUMERICAL_FAILURE = "numerical-failure"


class SolverFailure(RuntimeError):
    """Raised for malformed problems; run-time outcomes are statuses."""


# --- problem data model -------------------------------------------------------


@dataclass
class LinearExpr:
    """Affine functional sum_b tr(coeffs[b] X_b) + const."""

    coeffs: dict
    const: float = 0.0

    def value(self, blocks):
        total = self.const
        for name, c in self.coeffs.items():
            total += float(np.real(np.trace(np.asarray(c) @ blocks[name])))
        return total


@dataclass
class LogTerm:
    """Concave objective term weight * ln(sum_b tr(coeffs[b] X_b))."""

    weight: float
    coeffs: dict

    def arg(self, blocks):
        return sum(float(np.real(np.trace(np.asarray(c) @ blocks[name])))
                   for name, c in self.coeffs.items())


@dataclass
class TraceConstraint:
    """sum_b tr(coeffs[b] X_b) (<=|==) rhs."""

    coeffs: dict
    rhs: float
    sense: str = "<="
    name: str = ""

    def lhs(self, blocks):
        return sum(float(np.real(np.trace(np.asarray(c) @ blocks[name])))
                   for name, c in self.coeffs.items())


@dataclass
class DiagBound:
    """X_b[index, index] (<=|==) value."""

    block: str
    index: int
    value: float
    sense: str = "<="
    name: str = ""


@dataclass
class QuadConstraint:
    """||X L||_F^2 + sum_b tr(linear[b] X_b) <= rhs, X the sub_dim principal block.

    ``encoding`` selects the Schur-complement LMI form or the equivalent
    second-order-cone form; both describe the same feasible set.
    """

    block: str
    sub_dim: int
    factor: np.ndarray
    linear: dict
    rhs: float
    encoding: str = "soc"
    name: str = ""

    def lhs(self, blocks):
        x = np.asarray(blocks[self.block])[: self.sub_dim, : self.sub_dim]
        q = float(np.sum(np.abs(x @ self.factor) ** 2))
        return q + sum(float(np.real(np.trace(np.asarray(c) @ blocks[name])))
                       for name, c in self.linear.items())


@dataclass
class SdpProblem:
    """Maximize objective (+ log terms) over PSD blocks subject to constraints."""

    blocks: dict                      # name -> complex Hermitian dimension
    objective: LinearExpr
    log_terms: list = field(default_factory=list)
    constraints: list = field(default_factory=list)
    diag_bounds: list = field(default_factory=list)
    quad_constraints: list = field(default_factory=list)

    def validate(self):
        for name, dim in self.blocks.items():
            if dim < 1:
                raise SolverFailure(f"block {name!r} has dimension {dim}")
        for term in self.log_terms:
            if term.weight <= 0:
                raise SolverFailure("log terms must have positive weight")
        for source in ([self.objective] + self.log_terms + self.constraints):
            for name, c in source.coeffs.items():
                if name not in self.blocks:
                    raise SolverFailure(f"unknown block {name!r}")
                dim = self.blocks[name]
                if np.asarray(c).shape != (dim, dim):
                    raise SolverFailure(f"coefficient for {name!r} has wrong shape")
        for qc in self.quad_constraints:
            if qc.block not in self.blocks:
                raise SolverFailure(f"unknown block {qc.block!r}")
            if qc.sub_dim > self.blocks[qc.block]:
                raise SolverFailure("quadratic sub-block exceeds block dimension")

    def true_objective(self, blocks):
        """Objective including log terms; -inf if a log argument is nonpositive."""
        total = self.objective.value(blocks)
        for term in self.log_terms:
            a = term.arg(blocks)
            if a <= 0.0:
                return -np.inf
            total += term.weight * float(np.log(a))
        return total

    def lmi_constraint_count(self):
        """PSD blocks plus scalar inequality constraints (complexity bookkeeping)."""
        n_ineq = sum(1 for c in self.constraints if c.sense == "<=")
        n_ineq += sum(1 for c in self.quad_constraints)
        return len(self.blocks) + n_ineq


@dataclass
class SdpSolution:
    blocks: dict
    value: float
    status: str
    iterations: int = 0
    problems_solved: int = 0
    primal_linear: float = None
    dual_bound: float = None
    fw_gap: float = None
    slacks: dict = field(default_factory=dict)


@dataclass
class SolverOptions:
    abstol: float = 1e-8
    reltol: float = 1e-9
    feastol: float = 1e-7
    max_ipm_iters: int = 60
    max_log_passes: int = 40
    log_tol: float = 1e-8
    kktsolver: str = "chol"
    quad_encoding: str = None       # override per-constraint encodings when set
    start: dict = None              # feasible blocks to seed the log reduction


def frobenius_quadratic_as_lmi(block, sub_dim, factor, bound: LinearExpr,
                               name="") -> QuadConstraint:
    """Encode ||X L||_F^2 <= bound(x) as the Schur LMI [[t, z^H], [z, I]] >= 0.

    ``bound`` is an affine expression in the problem blocks; feasibility of
    the LMI is exactly equivalent to the quadratic constraint.
    """
    linear = {b: -np.asarray(c) for b, c in bound.coeffs.items()}
    return QuadConstraint(block=block, sub_dim=sub_dim,
                          factor=np.asarray(factor, dtype=complex),
                          linear=linear, rhs=bound.const, encoding="lmi",
                          name=name)


def frobenius_quadratic_as_soc(block, sub_dim, factor, bound: LinearExpr,
                               name="") -> QuadConstraint:
    """Second-order-cone encoding of the same quadratic constraint."""
    qc = frobenius_quadratic_as_lmi(block, sub_dim, factor, bound, name=name)
    qc.encoding = "soc"
    return qc


# --- Hermitian parametrization ------------------------------------------------
#
# A Hermitian n x n block is parametrized by n real diagonal entries followed
# by (re, im) pairs of the strictly upper triangle, column by column.


def _param_count(n):
    return n * n


def _coeff_vector(a, n):
    """Coefficients of tr(a X) in the block parameters (a hermitized first)."""
    a = herm(np.asarray(a, dtype=complex))
    out = np.empty(n * n)
    out[:n] = np.diag(a).real
    idx = n
    for j in range(n):
        for i in range(j):
            out[idx] = 2.0 * a[i, j].real
            out[idx + 1] = 2.0 * a[i, j].imag
            idx += 2
    return out


def _blocks_from_params(x, dims, offsets):
    out = {}
    for name, n in dims.items():
        seg = x[offsets[name]: offsets[name] + n * n]
        mat = np.zeros((n, n), dtype=complex)
        mat[np.diag_indices(n)] = seg[:n]
        idx = n
        for j in range(n):
            for i in range(j):
                val = seg[idx] + 1j * seg[idx + 1]
                mat[i, j] = val
                mat[j, i] = val.conjugate()
                idx += 2
        out[name] = mat
    return out


def _params_from_block(mat, n):
    seg = np.empty(n * n)
    seg[:n] = np.diag(mat).real
    idx = n
    for j in range(n):
        for i in range(j):
            seg[idx] = mat[i, j].real
            seg[idx + 1] = mat[i, j].imag
            idx += 2
    return seg


@lru_cache(maxsize=32)
def _embedding_columns(n):
    """Dense map from block parameters to vec of the 2n x 2n real embedding."""
    cols = np.zeros((4 * n * n, n * n))

    def fill(col, mat):
        t = np.zeros((2 * n, 2 * n))
        t[:n, :n] = mat.real
        t[n:, n:] = mat.real
        t[:n, n:] = -mat.imag
        t[n:, :n] = mat.imag
        cols[:, col] = t.flatten(order="F")

    for i in range(n):
        e = np.zeros((n, n), complex)
        e[i, i] = 1.0
        fill(i, e)
    idx = n
    for j in range(n):
        for i in range(j):
            e = np.zeros((n, n), complex)
            e[i, j] = 1.0
            e[j, i] = 1.0
            fill(idx, e)
            e = np.zeros((n, n), complex)
            e[i, j] = 1j
            e[j, i] = -1j
            fill(idx + 1, e)
            idx += 2
    return cols


def _quad_z_map(qc, dims, offsets, nvars):
    """Complex matrix Z with vec(X[:k,:k] @ L) = Z @ params."""
    n = dims[qc.block]
    k = qc.sub_dim
    l_mat = np.asarray(qc.factor, dtype=complex)
    ncols = l_mat.shape[1]
    z = np.zeros((k * ncols, nvars), dtype=complex)
    base = offsets[qc.block]

    def put(row_i, col_j, coeff, param):
        z[col_j * k + row_i, base + param] += coeff

    for i in range(min(k, n)):
        for j in range(ncols):
            # diagonal parameter i contributes L[i, j] at (i, j)
            put(i, j, l_mat[i, j], i)
    idx = n
    for j in range(n):
        for i in range(j):
            if i < k and j < k:
                for col in range(ncols):
                    # X[i, j] = re + 1j im, X[j, i] its conjugate
                    put(i, col, l_mat[j, col], idx)
                    put(i, col, 1j * l_mat[j, col], idx + 1)
                    put(j, col, l_mat[i, col], idx)
                    put(j, col, -1j * l_mat[i, col], idx + 1)
            idx += 2
    return z


# --- compilation to the cone program -------------------------------------------


def _compile_linear_rows(problem, dims, offsets, nvars):
    """Rows for 'l' cones and equalities, with per-row normalization."""
    gl_rows, hl = [], []
    aeq_rows, beq = [], []
    trivially_infeasible = False

    def expand(coeffs):
        row = np.zeros(nvars)
        for name, c in coeffs.items():
            n = dims[name]
            row[offsets[name]: offsets[name] + n * n] = \
                row[offsets[name]: offsets[name] + n * n] + _coeff_vector(c, n)
        return row

    entries = []
    for c in problem.constraints:
        entries.append((expand(c.coeffs), c.rhs, c.sense))
    for d in problem.diag_bounds:
        row = np.zeros(nvars)
        row[offsets[d.block] + d.index] = 1.0
        entries.append((row, d.value, d.sense))

    for row, rhs, sense in entries:
        scale = max(np.max(np.abs(row)), abs(rhs))
        if scale == 0.0:
            continue
        row = row / scale
        rhs = rhs / scale
        if np.max(np.abs(row)) == 0.0:
            if (sense == "<=" and rhs < 0) or (sense == "==" and rhs != 0):
                trivially_infeasible = True
            continue
        if sense == "<=":
            gl_rows.append(row)
            hl.append(rhs)
        else:
            aeq_rows.append(row)
            beq.append(rhs)
    return gl_rows, hl, aeq_rows, beq, trivially_infeasible


def _compile_quad(qc, dims, offsets, nvars, encoding):
    """Cone rows for one quadratic constraint (returns kind, G, h)."""
    t_row = np.zeros(nvars)
    for name, c in qc.linear.items():
        n = dims[name]
        t_row[offsets[name]: offsets[name] + n * n] += _coeff_vector(c, n)
    # t(x) = rhs - linear(x) must dominate ||z||^2
    sigma = max(np.max(np.abs(t_row)), abs(qc.rhs), 1e-300)
    t_row = t_row / sigma
    rhs = qc.rhs / sigma
    z = _quad_z_map(qc, dims, offsets, nvars) / np.sqrt(sigma)
    q = z.shape[0]

    if encoding == "soc":
        # || [2 z ; t - 1] || <= t + 1, stacked as (t+1, 2Re z, 2Im z, t-1)
        g = np.zeros((2 * q + 2, nvars))
        h = np.zeros(2 * q + 2)
        g[0] = t_row
        h[0] = rhs + 1.0
        g[1: q + 1] = -2.0 * z.real
        g[q + 1: 2 * q + 1] = -2.0 * z.imag
        g[-1] = t_row
        h[-1] = rhs - 1.0
        return "q", g, h

    # LMI [[t, z^H], [z, I_q]] >= 0 on the complex Hermitian cone, embedded real
    dim_c = q + 1
    a0 = np.zeros((dim_c, dim_c), dtype=complex)
    a0[0, 0] = rhs
    a0[1:, 1:] = np.eye(q)
    coeff_mats = np.zeros((nvars, dim_c, dim_c), dtype=complex)
    coeff_mats[:, 0, 0] = -t_row
    coeff_mats[:, 1:, 0] = z.T
    coeff_mats[:, 0, 1:] = np.conj(z.T)
    d2 = 2 * dim_c

    def embed(mat):
        t = np.zeros((d2, d2))
        t[:dim_c, :dim_c] = mat.real
        t[dim_c:, dim_c:] = mat.real
        t[:dim_c, dim_c:] = -mat.imag
        t[dim_c:, :dim_c] = mat.imag
        return t.flatten(order="F")

    g = np.zeros((d2 * d2, nvars))
    for k in range(nvars):
        col = coeff_mats[k]
        if np.any(col):
            g[:, k] = -embed(col)
    h = embed(a0)
    return "s", g, h


def _solve_linear(problem: SdpProblem, options: SolverOptions) -> SdpSolution:
    problem.validate()
    dims = {name: int(d) for name, d in problem.blocks.items()}
    offsets, nvars = {}, 0
    for name, n in dims.items():
        offsets[name] = nvars
        nvars += _param_count(n)

    c = np.zeros(nvars)
    for name, coeff in problem.objective.coeffs.items():
        n = dims[name]
        c[offsets[name]: offsets[name] + n * n] += _coeff_vector(coeff, n)
    c_scale = max(np.max(np.abs(c)), 1e-300)
    c_min = -(c / c_scale)  # conelp minimizes

    gl_rows, hl, aeq_rows, beq, bad = _compile_linear_rows(
        problem, dims, offsets, nvars)
    if bad:
        return SdpSolution(blocks={}, value=-np.inf, status=INFEASIBLE,
                           problems_solved=0)

    enc_override = options.quad_encoding
    g_parts = [np.array(gl_rows).reshape(len(gl_rows), nvars)] if gl_rows else []
    h_parts = [np.array(hl)] if hl else []
    dims_cone = {"l": len(gl_rows), "q": [], "s": []}

    s_parts_g, s_parts_h = [], []
    for qc in problem.quad_constraints:
        encoding = enc_override or qc.encoding
        if np.max(np.abs(qc.factor)) == 0.0:
            # degenerate quadratic: plain linear constraint
            row = np.zeros(nvars)
            for name, cm in qc.linear.items():
                n = dims[name]
                row[offsets[name]: offsets[name] + n * n] += _coeff_vector(cm, n)
            scale = max(np.max(np.abs(row)), abs(qc.rhs), 1e-300)
            g_parts.insert(0, (row / scale).reshape(1, nvars))
            h_parts.insert(0, np.array([qc.rhs / scale]))
            dims_cone["l"] += 1
            continue
        kind, g, h = _compile_quad(qc, dims, offsets, nvars, encoding)
        if kind == "q":
            g_parts.append(g)
            h_parts.append(h)
            dims_cone["q"].append(g.shape[0])
        else:
            s_parts_g.append(g)
            s_parts_h.append(h)
            dims_cone["s"].append(int(np.sqrt(g.shape[0])))

    for name, n in dims.items():
        emb = _embedding_columns(n)
        g = np.zeros((emb.shape[0], nvars))
        g[:, offsets[name]: offsets[name] + n * n] = -emb
        s_parts_g.append(g)
        s_parts_h.append(np.zeros(emb.shape[0]))
        dims_cone["s"].append(2 * n)

    g_all = np.vstack(g_parts + s_parts_g)
    h_all = np.concatenate(h_parts + s_parts_h)

    kwargs = {}
    if aeq_rows:
        kwargs["A"] = cvxopt.matrix(np.array(aeq_rows))
        kwargs["b"] = cvxopt.matrix(np.array(beq))
    cvx_options = {
        "show_progress": False,
        "abstol": options.abstol,
        "reltol": options.reltol,
        "feastol": options.feastol,
        "maxiters": options.max_ipm_iters,
    }
    try:
        sol = _cvx_solvers.conelp(
            cvxopt.matrix(c_min), cvxopt.matrix(g_all), cvxopt.matrix(h_all),
            dims_cone, kktsolver=options.kktsolver, options=cvx_options,
            **kwargs)
    except (ArithmeticError, ValueError):
        return SdpSolution(blocks={}, value=-np.inf, status=NUMERICAL_FAILURE,
                           problems_solved=1)

    status = sol["status"]
    iterations = int(sol.get("iterations", 0))
    if status == "primal infeasible":
        return SdpSolution(blocks={}, value=-np.inf, status=INFEASIBLE,
                           iterations=iterations, problems_solved=1)
    if status not in ("optimal", "unknown") or sol["x"] is None:
        return SdpSolution(blocks={}, value=-np.inf, status=NUMERICAL_FAILURE,
                           iterations=iterations, problems_solved=1)
    rel_gap = sol.get("relative gap")
    stalled_but_tight = (status == "unknown" and rel_gap is not None
                         and rel_gap <= 1e-6)

    x = np.array(sol["x"]).ravel()
    blocks = _blocks_from_params(x, dims, offsets)
    value = problem.objective.value(blocks)
    dual_bound = None
    if sol["z"] is not None:
        # dual objective of the minimization form bounds it below; negate for max
        dual_raw = -(h_all @ np.array(sol["z"]).ravel())
        if aeq_rows:
            dual_raw -= np.array(beq) @ np.array(sol["y"]).ravel()
        dual_bound = -c_scale * dual_raw + problem.objective.const

    if status == "optimal" or stalled_but_tight:
        out_status = OPTIMAL      # stalled iterates must still verify below
    elif iterations >= options.max_ipm_iters:
        out_status = MAX_ITERATIONS
    else:
        out_status = NUMERICAL_FAILURE
    result = SdpSolution(blocks=blocks, value=value, status=out_status,
                         iterations=iterations, problems_solved=1,
                         primal_linear=value, dual_bound=dual_bound,
                         slacks=_solution_slacks(problem, blocks))
    if out_status == OPTIMAL and not _verify_solution(problem, result):
        result.status = NUMERICAL_FAILURE
    return result


def _solution_slacks(problem, blocks):
    slacks = {}
    for i, c in enumerate(problem.constraints):
        name = c.name or f"c{i}"
        lhs = c.lhs(blocks)
        slacks[name] = (c.rhs - lhs) if c.sense == "<=" else -abs(lhs - c.rhs)
    for i, d in enumerate(problem.diag_bounds):
        name = d.name or f"diag{i}"
        val = blocks[d.block][d.index, d.index].real
        slacks[name] = (d.value - val) if d.sense == "<=" else -abs(val - d.value)
    for i, qc in enumerate(problem.quad_constraints):
        name = qc.name or f"quad{i}"
        slacks[name] = qc.rhs - qc.lhs(blocks)
    for name, mat in blocks.items():
        w = np.linalg.eigvalsh(herm(mat))
        slacks[f"psd:{name}"] = float(w[0]) if w.size else 0.0
    return slacks


def _verify_solution(problem, solution, rtol=1e-7):
    """Constraint satisfaction within relative tolerance (optimal contract)."""
    for i, c in enumerate(problem.constraints):
        name = c.name or f"c{i}"
        scale = max(1.0, abs(c.rhs))
        if solution.slacks[name] < -rtol * scale:
            return False
    for i, d in enumerate(problem.diag_bounds):
        name = d.name or f"diag{i}"
        if solution.slacks[name] < -rtol * max(1.0, abs(d.value)):
            return False
    for i, qc in enumerate(problem.quad_constraints):
        name = qc.name or f"quad{i}"
        if solution.slacks[name] < -rtol * max(1.0, abs(qc.rhs)):
            return False
    for name, mat in solution.blocks.items():
        scale = max(float(np.max(np.abs(mat))), 1e-300)
        if solution.slacks[f"psd:{name}"] < -1e-8 * scale:
            return False
    return True


# --- log-term reduction ---------------------------------------------------------


@dataclass
class LogReduction:
    solution: SdpSolution
    linearized: list
    values: list


def _linearize(problem, blocks):
    """Tangent linear objective of the log terms at the current point."""
    coeffs = {name: np.array(c, dtype=complex)
              for name, c in problem.objective.coeffs.items()}
    for term in problem.log_terms:
        s = term.arg(blocks)
        for name, h in term.coeffs.items():
            add = (term.weight / s) * np.asarray(h, dtype=complex)
            coeffs[name] = coeffs.get(name, 0.0) + add
    return SdpProblem(blocks=problem.blocks,
                      objective=LinearExpr(coeffs=coeffs, const=0.0),
                      constraints=problem.constraints,
                      diag_bounds=problem.diag_bounds,
                      quad_constraints=problem.quad_constraints)


def _optimize_hull(problem, lin_vals, log_args, w_start):
    """Maximize the true objective over the convex hull of the atoms.

    Only per-atom scalars enter (linear value and each log argument), so
    this is a small concave program over the simplex, solved by mirror
    ascent with backtracking; the returned weights never score below the
    starting ones.
    """
    lin_vals = np.asarray(lin_vals)
    log_args = np.asarray(log_args)       # (n_terms, n_atoms)
    lam = np.array([t.weight for t in problem.log_terms])
    k = lin_vals.size

    def value(w):
        args = log_args @ w
        if np.any(args <= 0.0):
            return -np.inf
        return float(lin_vals @ w + lam @ np.log(args))

    w = np.asarray(w_start, dtype=float)
    w = np.maximum(w, 0.0)
    w /= w.sum()
    best_w, best_val = w.copy(), value(w)
    step = 1.0
    for _ in range(400):
        args = log_args @ w
        grad = lin_vals + (lam / np.maximum(args, 1e-300)) @ log_args
        grad = grad - np.max(grad)
        scale = max(np.max(np.abs(grad)), 1e-300)
        accepted = False
        for _ in range(30):
            w_new = w * np.exp(step * grad / scale)
            total = w_new.sum()
            if not np.isfinite(total) or total <= 0:
                step *= 0.5
                continue
            w_new /= total
            val_new = value(w_new)
            if val_new >= best_val - 1e-15 * max(1.0, abs(best_val)):
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        move = float(np.max(np.abs(w_new - w)))
        w = w_new
        if val_new > best_val:
            best_w, best_val = w.copy(), val_new
        step = min(step * 2.0, 64.0)
        if move <= 1e-14 * k:
            break
    return best_w, best_val


def _phase0_start(problem, options):
    """Feasible start maximizing the log arguments."""
    coeffs = {}
    for term in problem.log_terms:
        for name, h in term.coeffs.items():
            coeffs[name] = coeffs.get(name, 0.0) + np.asarray(h, dtype=complex)
    phase = SdpProblem(blocks=problem.blocks,
                       objective=LinearExpr(coeffs=coeffs),
                       constraints=problem.constraints,
                       diag_bounds=problem.diag_bounds,
                       quad_constraints=problem.quad_constraints)
    return _solve_linear(phase, options)


def reduce_log_terms(problem: SdpProblem, start=None,
                     options: SolverOptions = None) -> LogReduction:
    """Drive the log-term fixed point; true objective is nondecreasing.

    ``start`` may be an SdpSolution or a blocks dict; when omitted, a
    feasibility pass maximizing the log arguments seeds the loop.  The
    returned sequence holds the linearized problems actually solved.
    """
    options = options or SolverOptions()
    problem.validate()

    if not problem.log_terms:
        sol = _solve_linear(problem, options)
        return LogReduction(solution=sol, linearized=[problem],
                            values=[sol.value] if np.isfinite(sol.value) else [])

    solved = 0
    if start is not None:
        cur = dict(start.blocks if isinstance(start, SdpSolution) else start)
        if not _verify_solution(problem, SdpSolution(
                blocks=cur, value=0.0, status="",
                slacks=_solution_slacks(problem, cur)), rtol=1e-7):
            start = None    # infeasible seed: fall back to a feasibility pass
    if start is None:
        start_sol = _phase0_start(problem, options)
        if start_sol.status in (INFEASIBLE, NUMERICAL_FAILURE):
            return LogReduction(solution=start_sol, linearized=[], values=[])
        cur = start_sol.blocks
        solved = start_sol.problems_solved

    f_cur = problem.true_objective(cur)
    if not np.isfinite(f_cur):
        return LogReduction(
            solution=SdpSolution(blocks=cur, value=-np.inf,
                                 status=NUMERICAL_FAILURE),
            linearized=[], values=[])

    seq, values = [], [f_cur]
    status = MAX_ITERATIONS
    iterations = 0
    gap = np.inf
    last_dual = None
    # atom pool for the hull refits: matrices plus their scalar statistics
    atoms = [cur]
    atom_lin = [problem.objective.value(cur)]
    atom_args = [[t.arg(cur) for t in problem.log_terms]]
    weights = np.array([1.0])
    for _ in range(options.max_log_passes):
        lin = _linearize(problem, cur)
        seq.append(lin)
        sol = _solve_linear(lin, options)
        solved += sol.problems_solved
        iterations += sol.iterations
        if sol.status == INFEASIBLE:
            return LogReduction(solution=SdpSolution(
                blocks=cur, value=f_cur, status=INFEASIBLE,
                problems_solved=solved), linearized=seq, values=values)
        if sol.status == NUMERICAL_FAILURE:
            if len(seq) == 1:
                return LogReduction(solution=SdpSolution(
                    blocks=cur, value=f_cur, status=NUMERICAL_FAILURE,
                    problems_solved=solved), linearized=seq, values=values)
            break
        last_dual = sol.dual_bound
        # certified optimality gap of the concave problem at the current point
        gap = lin.objective.value(sol.blocks) - lin.objective.value(cur)
        scale = max(1.0, abs(f_cur))
        if gap <= options.log_tol * scale:
            status = OPTIMAL
            values.append(f_cur)
            break
        atoms.append(sol.blocks)
        atom_lin.append(problem.objective.value(sol.blocks))
        atom_args.append([t.arg(sol.blocks) for t in problem.log_terms])
        weights = np.append(weights * (1.0 - 1e-12), 1e-12)
        weights, f_new = _optimize_hull(
            problem, atom_lin, np.array(atom_args).T, weights)
        if f_new < f_cur:       # hull refit cannot regress; keep the anchor
            f_new = f_cur
        keep = weights > 1e-13
        keep[-1] = True
        atoms = [a for a, k in zip(atoms, keep) if k]
        atom_lin = [a for a, k in zip(atom_lin, keep) if k]
        atom_args = [a for a, k in zip(atom_args, keep) if k]
        weights = weights[keep]
        weights /= weights.sum()
        cur = {name: sum(w * a[name] for w, a in zip(weights, atoms))
               for name in atoms[0]}
        converged = abs(f_new - f_cur) <= options.log_tol * scale
        f_cur = max(f_new, f_cur)
        values.append(f_cur)
        if converged:
            status = OPTIMAL
            break

    result = SdpSolution(blocks=cur, value=problem.true_objective(cur),
                         status=status, iterations=iterations,
                         problems_solved=solved, dual_bound=last_dual,
                         fw_gap=float(gap),
                         slacks=_solution_slacks(problem, cur))
    return LogReduction(solution=result, linearized=seq, values=values)


def solve(problem: SdpProblem, options: SolverOptions = None) -> SdpSolution:
    """Solve the problem; log terms are reduced to linear-objective passes."""
    options = options or SolverOptions()
    if problem.log_terms:
        return reduce_log_terms(problem, start=options.start,
                                options=options).solution
    return _solve_linear(problem, options)


# --- problem dump ----------------------------------------------------------------


def _mat_to_json(a):
    a = np.asarray(a, dtype=complex)
    return {"re": a.real.tolist(), "im": a.imag.tolist()}


def dump_problem(problem: SdpProblem) -> str:
    """Self-describing text dump for cross-checking against external solvers."""
    doc = {
        "blocks": {k: int(v) for k, v in problem.blocks.items()},
        "objective": {
            "const": problem.objective.const,
            "coeffs": {k: _mat_to_json(v)
                       for k, v in problem.objective.coeffs.items()},
        },
        "log_terms": [
            {"weight": t.weight,
             "coeffs": {k: _mat_to_json(v) for k, v in t.coeffs.items()}}
            for t in problem.log_terms
        ],
        "constraints": [
            {"name": c.name, "sense": c.sense, "rhs": c.rhs,
             "coeffs": {k: _mat_to_json(v) for k, v in c.coeffs.items()}}
            for c in problem.constraints
        ],
        "diag_bounds": [
            {"block": d.block, "index": d.index, "value": d.value,
             "sense": d.sense} for d in problem.diag_bounds
        ],
        "quad_constraints": [
            {"name": qc.name, "block": qc.block, "sub_dim": qc.sub_dim,
             "rhs": qc.rhs, "encoding": qc.encoding,
             "factor": _mat_to_json(qc.factor),
             "linear": {k: _mat_to_json(v) for k, v in qc.linear.items()}}
            for qc in problem.quad_constraints
        ],
    }
    return json.dumps(doc, indent=1)
