"""Closed-form system metrics for a (precoder, reflector, channels) triple.

Everything here is the ground truth the optimizer surrogates are checked
against: link SNRs, secrecy rate, echo SINR, consumed powers, beampattern
and the feasibility report for the full constraint set.

Conventions: the precoder has one sensing column per BS antenna plus a
final communication column; the reflector is stored as its diagonal.
The secrecy clamp ``max(., 0)`` lives only in :func:`secrecy_rate`; the
optimizer objective uses the unclamped rate difference.
"""

from dataclasses import dataclass, field

import numpy as np

from .linalg import dagger, herm, herm_solve


@dataclass
class Precoder:
    """Transmit beamformer: (M, M+1) matrix, last column carries the data."""

    w: np.ndarray

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=complex)
        m, cols = self.w.shape
        if cols != m + 1:
            raise ValueError(f"precoder must be (M, M+1), got {self.w.shape}")

    @property
    def w_comm(self):
        return self.w[:, -1]

    @property
    def m(self):
        return self.w.shape[0]


@dataclass
class RisCoeffs:
    """Reflecting coefficients (diagonal entries) and per-element caps."""

    phi: np.ndarray
    eta: np.ndarray

    def __post_init__(self):
        self.phi = np.asarray(self.phi, dtype=complex).ravel()
        self.eta = np.asarray(self.eta, dtype=float).ravel()
        if self.phi.shape != self.eta.shape:
            raise ValueError("phi and eta must have matching length")


@dataclass
class RadarOperators:
    """Echo-path operators and the interference-plus-noise covariance."""

    a: np.ndarray      # two-bounce target path BS->RIS->target->RIS->BS
    b: np.ndarray      # residual single-bounce self-interference path
    c: np.ndarray      # forward-stage noise propagation into the receiver
    d: np.ndarray      # echo-stage noise propagation into the receiver
    n: np.ndarray      # noise covariance at the receiver
    j: np.ndarray      # interference-plus-noise covariance


@dataclass
class FeasibilityReport:
    """Per-constraint outcome with signed slacks (nonnegative means satisfied)."""

    ok: bool
    checks: dict = field(default_factory=dict)

    def slack(self, name):
        return self.checks[name][1]


def covariance(w):
    """Transmit covariance W W^H."""
    w = np.asarray(w)
    return w @ dagger(w)


def cascade_row(h_direct, h_ris, phi, h_br):
    """Effective downlink row h_direct^H + h_ris^H diag(phi) H_BR."""
    return h_direct.conj() + (h_ris.conj() * phi) @ h_br


def _link_snr(h_direct, h_ris, phi, h_br, w_c, ris_noise, rx_noise):
    sig = np.abs(cascade_row(h_direct, h_ris, phi, h_br) @ w_c) ** 2
    den = ris_noise * np.sum(np.abs(h_ris.conj() * phi) ** 2) + rx_noise
    return float(sig / den)


def snr_user(p, v, ch, noise):
    """Receive SNR at the legitimate user."""
    return _link_snr(ch.h_bu, ch.h_ru, v.phi, ch.h_br, p.w_comm,
                     noise.ris_fwd, noise.user)


def snr_eve(p, v, ch, noise):
    """Receive SNR at the eavesdropper."""
    return _link_snr(ch.h_be, ch.h_re, v.phi, ch.h_br, p.w_comm,
                     noise.ris_fwd, noise.eve)


def rate_difference(p, v, ch, noise):
    """Unclamped user-minus-eavesdropper rate in nat/s/Hz."""
    return float(np.log1p(snr_user(p, v, ch, noise))
                 - np.log1p(snr_eve(p, v, ch, noise)))


def secrecy_rate(p, v, ch, noise):
    """Achievable secrecy rate, clamped at zero."""
    return max(rate_difference(p, v, ch, noise), 0.0)


def radar_operators(p, v, ch, noise, rho):
    """Assemble the echo-path operators at the given operating point."""
    phi = v.phi
    h_br = ch.h_br
    h_brh = dagger(h_br)
    g_phi = ch.g * phi[None, :]              # G diag(phi)
    phih_g_phi = phi.conj()[:, None] * g_phi  # diag(phi)^H G diag(phi)
    a = h_brh @ phih_g_phi @ h_br
    b = rho * h_brh @ (phi[:, None] * h_br)
    c = h_brh @ phih_g_phi + h_brh * phi[None, :]
    d = h_brh * phi[None, :].conj()
    m = p.m
    r = covariance(p.w)
    n = (noise.ris_fwd * (c @ dagger(c)) + noise.ris_bwd * (d @ dagger(d))
         + noise.radar * np.eye(m))
    j = b @ r @ dagger(b) + n
    return RadarOperators(a=a, b=b, c=c, d=d, n=herm(n), j=herm(j))


def radar_sinr(p, v, ch, noise, rho, ops=None):
    """Echo SINR tr(A R A^H J^-1), evaluated through a Hermitian solve."""
    if ops is None:
        ops = radar_operators(p, v, ch, noise, rho)
    ara = ops.a @ covariance(p.w) @ dagger(ops.a)
    return float(np.real(np.trace(herm_solve(ops.j, ara))))


def bs_power(p):
    """Transmit power at the BS, tr(W W^H)."""
    return float(np.real(np.trace(covariance(p.w))))


def ris_power(p, v, ch, noise):
    """Consumed powers of the two reflection stages (forward, echo)."""
    phi = v.phi
    r = covariance(p.w)
    phi_h = phi[:, None] * ch.h_br            # diag(phi) H_BR
    phig_phi = phi.conj()[:, None] * (ch.g * phi[None, :])  # diag(phi)^H G diag(phi)
    p_fwd = (np.real(np.trace(dagger(phi_h) @ phi_h @ r))
             + noise.ris_fwd * float(np.sum(np.abs(phi) ** 2)))
    echo_map = phig_phi @ ch.h_br
    p_echo = (np.real(np.trace(dagger(echo_map) @ echo_map @ r))
              + noise.ris_fwd * float(np.sum(np.abs(phig_phi) ** 2))
              + noise.ris_bwd * float(np.sum(np.abs(phi) ** 2)))
    return float(p_fwd), float(p_echo)


def beampattern(p, v, ch, theta_grid, spacing_ratio=0.5):
    """Radiated power of the reflected probing signal over a look-angle grid."""
    from .scenario import steering_vector

    phi_h = v.phi[:, None] * ch.h_br
    mat = herm(phi_h @ covariance(p.w) @ dagger(phi_h))
    out = np.empty(len(theta_grid))
    for i, theta in enumerate(np.asarray(theta_grid, dtype=float)):
        a = steering_vector(theta, spacing_ratio, mat.shape[0])
        out[i] = max(float(np.real(a.conj() @ mat @ a)), 0.0)
    return out


def check_feasibility(p, v, ch, cfg, noise=None, rtol=1e-6,
                      require_sensing=True, require_ris_power=True):
    """Evaluate all design constraints with relative tolerance ``rtol``.

    Returns per-constraint pass/fail plus the signed relative slack
    (positive slack = satisfied with margin).
    """
    if noise is None:
        noise = cfg.noise_powers()
    checks = {}

    gamma_r = cfg.gamma_r
    sinr = radar_sinr(p, v, ch, noise, cfg.si_rho)
    scale = max(abs(gamma_r), np.finfo(float).tiny)
    checks["echo_sinr"] = ((sinr - gamma_r) / scale >= -rtol if require_sensing else True,
                           (sinr - gamma_r) / scale)

    pt = bs_power(p)
    checks["bs_power"] = ((cfg.p_bs_w - pt) / max(cfg.p_bs_w, 1e-300) >= -rtol,
                          (cfg.p_bs_w - pt) / max(cfg.p_bs_w, 1e-300))

    p1, p2 = ris_power(p, v, ch, noise)
    budget = max(cfg.p_ris_w, 1e-300)
    slack = (cfg.p_ris_w - p1 - p2) / budget
    checks["ris_power"] = (slack >= -rtol if require_ris_power else True, slack)

    amp_slack = float(np.min((v.eta - np.abs(v.phi)) / np.maximum(v.eta, 1e-300))) \
        if v.phi.size else 0.0
    checks["amplitude_caps"] = (amp_slack >= -rtol, amp_slack)

    return FeasibilityReport(ok=all(okc for okc, _ in checks.values()), checks=checks)
