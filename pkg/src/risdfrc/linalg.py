"""Complex dense linear-algebra utilities shared by the whole package.

Vectorization is column-major throughout, fixed by the contract
``tr(unvec(p)^H V) == p^H vec(V)``, which the surrogate assembly relies on.
All tolerances are relative to the input magnitude so the checks are
scale-free.
"""

import numpy as np

HERM_RTOL = 1e-12
PSD_RTOL = 1e-9


class DimensionError(ValueError):
    """Array shape incompatible with the requested operation."""


class HermitianError(ValueError):
    """Input violates a Hermitian-matrix precondition."""


class NotPsdError(ValueError):
    """Input violates a positive-semidefinite precondition."""


def dagger(a):
    """Conjugate transpose."""
    return np.asarray(a).conj().T


def herm(a):
    """Hermitian part (A + A^H) / 2."""
    a = np.asarray(a)
    return 0.5 * (a + a.conj().T)


def is_hermitian(a, rtol=HERM_RTOL):
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        return False
    scale = 1.0 + np.max(np.abs(a)) if a.size else 1.0
    return np.max(np.abs(a - a.conj().T)) <= rtol * scale if a.size else True


def require_hermitian(a, rtol=HERM_RTOL, name="matrix"):
    if not is_hermitian(a, rtol=rtol):
        raise HermitianError(f"{name} is not Hermitian within tolerance {rtol}")
    return np.asarray(a)


def vec(m):
    """Stack the columns of a matrix into a vector."""
    m = np.asarray(m)
    if m.ndim != 2:
        raise DimensionError("vec expects a 2-D array")
    return m.flatten(order="F")


def unvec(p, n):
    """Inverse of :func:`vec` for an n x n target.

    Satisfies tr(unvec(p)^H V) == p^H vec(V) for every n x n V.
    """
    p = np.asarray(p).ravel()
    if p.size != n * n:
        raise DimensionError(f"vector of length {p.size} is not {n}x{n}")
    return p.reshape((n, n), order="F")


def kron(a, b):
    """Kronecker product A (x) B."""
    return np.kron(np.asarray(a), np.asarray(b))


def herm_eig_max(m, rtol=HERM_RTOL):
    """Largest eigenvalue and unit-norm eigenvector of a Hermitian matrix."""
    m = require_hermitian(m, rtol=rtol)
    w, v = np.linalg.eigh(m)
    return float(w[-1]), np.ascontiguousarray(v[:, -1])


def psd_cholesky(m, rtol=PSD_RTOL):
    """Factor a Hermitian PSD matrix as L L^H.

    Eigenvalues in [-rtol*||m||, 0) are clipped to zero before factoring,
    since solver outputs are PSD only to solver tolerance.  Eigenvalues
    below that band raise :class:`NotPsdError`.
    """
    m = require_hermitian(m, rtol=max(rtol, HERM_RTOL), name="psd_cholesky input")
    if m.shape[0] == 0:
        return m.astype(complex)
    w, v = np.linalg.eigh(m)
    scale = max(np.max(np.abs(w)), 0.0)
    if w[0] < -rtol * max(scale, np.finfo(float).tiny):
        raise NotPsdError(f"minimum eigenvalue {w[0]:.3e} below -{rtol:.0e}*||m||")
    # eigenvalues inside the tolerance band are solver noise, not structure
    w = np.where(w <= rtol * scale, 0.0, w)
    return v * np.sqrt(w)[None, :]


def herm_solve(a, b):
    """Solve A X = B for Hermitian positive-definite A without forming A^-1."""
    import scipy.linalg

    return scipy.linalg.solve(a, b, assume_a="her")


def rank_by_singvals(m, rtol=PSD_RTOL):
    """Numerical rank from the singular-value profile, threshold rtol*s_max."""
    s = np.linalg.svd(np.asarray(m), compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > rtol * s[0]))
