"""Scenario configuration and channel generation.

A scenario bundles the physical layout (base station, reflecting surface,
user, eavesdropper, target), the fading and path-loss models, noise levels
and power budgets.  ``generate_channels`` turns one configured scenario and
one RNG substream into a deterministic channel realization.

Configs are read from flat ``key = value`` text files (SI units); unknown
keys are rejected.
"""

import hashlib
from dataclasses import dataclass, field, fields, replace

import numpy as np

SPEED_OF_LIGHT = 299792458.0


class ConfigError(ValueError):
    """Malformed or inconsistent scenario configuration."""


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def dbm_to_watt(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def substream(seed, *key):
    """Independent, reproducible RNG substream for (seed, key...)."""
    key = tuple(int(k) for k in key)
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=key))


@dataclass
class ScenarioConfig:
    """All physical parameters, geometry, noise and budgets for one run."""

    m_antennas: int = 4
    n_elements: int = 12
    bs_pos: tuple = (0.0, 0.0)
    ris_pos: tuple = (100.0, 30.0)
    user_pos: tuple = (90.0, 40.0)
    eve_pos: tuple = (94.9, 40.9)
    target_pos: tuple = (83.94, 52.94)
    carrier_hz: float = 2.7e9
    spacing_ratio: float = 0.5          # element interval / wavelength
    rician_k: float = 3.0
    alpha_rayleigh: float = 3.5
    alpha_rician: float = 2.2
    ref_loss_db: float = -30.0          # path loss at 1 m
    noise_dbm_hz: float = -174.0
    bandwidth_hz: float = 1.0e7
    p_bs_w: float = 1.0                 # transmit budget at the BS
    p_ris_w: float = 0.05               # power budget of the active surface
    eta_db: tuple = (15.0,)             # per-element amplification caps (scalar broadcast)
    si_rho: float = 0.1                 # residual self-interference coefficient
    rcs_m2: float = 1.0                 # target radar cross-section
    gamma_r_db: float = -80.0           # minimum echo SINR
    p_sw_dbm: float = -5.0              # per-element phase-control power
    p_dc_dbm: float = -10.0             # per-element DC power (active elements)
    seed: int = 1
    random_gamma_phase: bool = False
    # optimizer knobs
    outer_max: int = 30
    inner_w_max: int = 20
    inner_phi_max: int = 20
    outer_tol: float = 1e-3
    inner_tol: float = 1e-6
    randomization_trials: int = 50

    def __post_init__(self):
        if self.m_antennas < 1 or self.n_elements < 0:
            raise ConfigError("antenna/element counts must be positive")
        if self.rician_k < 0:
            raise ConfigError("Rician factor must be nonnegative")
        for name in ("p_bs_w", "p_ris_w", "bandwidth_hz", "carrier_hz"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be nonnegative")
        if len(self.eta_db) not in (1, max(self.n_elements, 1)):
            raise ConfigError("eta_db must be a scalar or one value per element")

    @property
    def wavelength(self):
        return SPEED_OF_LIGHT / self.carrier_hz

    @property
    def noise_w(self):
        """Thermal noise power per receiver: density times bandwidth."""
        return float(dbm_to_watt(self.noise_dbm_hz) * self.bandwidth_hz)

    @property
    def gamma_r(self):
        return float(db_to_linear(self.gamma_r_db))

    def eta_amplitudes(self):
        """Per-element amplitude caps (amplifier gain expressed in dB)."""
        eta = 10.0 ** (np.asarray(self.eta_db, dtype=float) / 20.0)
        if eta.size == 1:
            eta = np.full(self.n_elements, float(eta[0]))
        return eta

    def noise_powers(self, active_ris=True):
        s2 = self.noise_w
        ris = s2 if active_ris else 0.0
        return NoisePowers(user=s2, eve=s2, radar=s2, ris_fwd=ris, ris_bwd=ris)

    def to_text(self):
        """Canonical key = value rendering (also the hashing input)."""
        lines = []
        for f in fields(self):
            val = getattr(self, f.name)
            if isinstance(val, tuple):
                val = ", ".join(repr(float(v)) if not isinstance(v, bool) else v
                                for v in val)
            lines.append(f"{f.name} = {val}")
        return "\n".join(lines) + "\n"

    def digest(self):
        return hashlib.sha256(self.to_text().encode()).hexdigest()[:16]


@dataclass
class NoisePowers:
    """Noise variances (W): receivers plus the two reflection stages."""

    user: float
    eve: float
    radar: float
    ris_fwd: float   # injected on the forward (downlink) reflection
    ris_bwd: float   # injected on the echo (uplink) reflection


@dataclass
class ChannelSet:
    """One realization of the five links plus the target response matrix."""

    h_br: np.ndarray     # BS -> RIS, (N, M)
    h_bu: np.ndarray     # BS -> user, (M,)
    h_be: np.ndarray     # BS -> eavesdropper, (M,)
    h_ru: np.ndarray     # RIS -> user, (N,)
    h_re: np.ndarray     # RIS -> eavesdropper, (N,)
    g: np.ndarray        # target response seen at the RIS, (N, N)
    theta_target: float  # target angle from the RIS (radians)
    gamma: complex       # round-trip target path coefficient
    angles: dict = field(default_factory=dict)


def steering_vector(theta, spacing_ratio, n):
    """Uniform-linear-array response at angle theta (radians off broadside)."""
    if n < 1:
        raise ConfigError("steering vector needs at least one element")
    k = np.arange(n)
    return np.exp(-2j * np.pi * spacing_ratio * k * np.sin(theta))


def path_loss_db(dist_m, alpha, ref_loss_db):
    """Large-scale loss: ref_loss_db - 10*alpha*log10(d / 1 m)."""
    if dist_m <= 0:
        raise ConfigError("path loss needs a positive distance")
    return ref_loss_db - 10.0 * alpha * np.log10(dist_m)


def radar_path_gamma(dist_m, wavelength, rcs_m2, phase=0.0):
    """Round-trip monostatic path coefficient from the radar range equation."""
    if dist_m <= 0:
        raise ConfigError("radar path needs a positive distance")
    amp = np.sqrt(wavelength**2 * rcs_m2 / ((4.0 * np.pi) ** 3 * dist_m**4))
    return amp * np.exp(1j * phase)


def rician_channel(rng, shape, k_factor, sin_aod, sin_aoa, spacing_ratio):
    """Small-scale Rician fading with a rank-1 line-of-sight component.

    ``shape`` is (receive_dim, transmit_dim); entries have unit variance.
    ``k_factor = 0`` degenerates to i.i.d. Rayleigh fading.
    """
    d_r, d_t = shape
    nlos = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
    if k_factor == 0:
        return nlos
    a_r = steering_vector(np.arcsin(np.clip(sin_aoa, -1, 1)), spacing_ratio, d_r)
    a_t = steering_vector(np.arcsin(np.clip(sin_aod, -1, 1)), spacing_ratio, d_t)
    los = np.outer(a_r, a_t.conj())
    k = float(k_factor)
    return np.sqrt(1.0 / (k + 1.0)) * nlos + np.sqrt(k / (k + 1.0)) * los


def _sin_angle(src, dst):
    """Sine of the departure angle from src toward dst (arrays along x)."""
    delta = np.asarray(dst, dtype=float) - np.asarray(src, dtype=float)
    dist = np.hypot(*delta)
    if dist <= 0:
        raise ConfigError("co-located nodes have no defined link angle")
    return delta[0] / dist, dist


def generate_channels(cfg: ScenarioConfig, rng=None) -> ChannelSet:
    """Draw one deterministic channel realization for a configured scenario."""
    if rng is None:
        rng = substream(cfg.seed, 0)
    m, n = cfg.m_antennas, cfg.n_elements
    rho = cfg.spacing_ratio

    sin_bs_to_ris, d_br = _sin_angle(cfg.bs_pos, cfg.ris_pos)
    sin_ris_to_bs, _ = _sin_angle(cfg.ris_pos, cfg.bs_pos)
    sin_ris_to_user, d_ru = _sin_angle(cfg.ris_pos, cfg.user_pos)
    sin_ris_to_eve, d_re = _sin_angle(cfg.ris_pos, cfg.eve_pos)
    sin_ris_to_tgt, d_rt = _sin_angle(cfg.ris_pos, cfg.target_pos)
    _, d_bu = _sin_angle(cfg.bs_pos, cfg.user_pos)
    _, d_be = _sin_angle(cfg.bs_pos, cfg.eve_pos)

    def amp(dist, alpha):
        return np.sqrt(db_to_linear(path_loss_db(dist, alpha, cfg.ref_loss_db)))

    h_br = amp(d_br, cfg.alpha_rician) * rician_channel(
        rng, (n, m), cfg.rician_k, sin_aod=sin_bs_to_ris, sin_aoa=sin_ris_to_bs,
        spacing_ratio=rho)
    h_bu = amp(d_bu, cfg.alpha_rayleigh) * rician_channel(
        rng, (1, m), 0.0, 0.0, 0.0, rho).conj().ravel()
    h_be = amp(d_be, cfg.alpha_rayleigh) * rician_channel(
        rng, (1, m), 0.0, 0.0, 0.0, rho).conj().ravel()
    h_ru = amp(d_ru, cfg.alpha_rician) * rician_channel(
        rng, (1, n), cfg.rician_k, sin_aod=sin_ris_to_user, sin_aoa=0.0,
        spacing_ratio=rho).conj().ravel()
    h_re = amp(d_re, cfg.alpha_rician) * rician_channel(
        rng, (1, n), cfg.rician_k, sin_aod=sin_ris_to_eve, sin_aoa=0.0,
        spacing_ratio=rho).conj().ravel()

    theta_t = float(np.arcsin(np.clip(sin_ris_to_tgt, -1, 1)))
    phase = rng.uniform(0.0, 2.0 * np.pi) if cfg.random_gamma_phase else 0.0
    gamma = radar_path_gamma(d_rt, cfg.wavelength, cfg.rcs_m2, phase=phase)
    a_t = steering_vector(theta_t, rho, n) if n else np.zeros(0, complex)
    g = gamma * np.outer(a_t, a_t.conj())

    angles = {
        "user": float(np.arcsin(np.clip(sin_ris_to_user, -1, 1))),
        "eve": float(np.arcsin(np.clip(sin_ris_to_eve, -1, 1))),
        "target": theta_t,
    }
    return ChannelSet(h_br=h_br, h_bu=h_bu, h_be=h_be, h_ru=h_ru, h_re=h_re,
                      g=g, theta_target=theta_t, gamma=complex(gamma),
                      angles=angles)


def channel_fingerprint(ch: ChannelSet) -> str:
    """Stable hash of a realization, used by the paired-trial fairness checks."""
    h = hashlib.sha256()
    for arr in (ch.h_br, ch.h_bu, ch.h_be, ch.h_ru, ch.h_re, ch.g):
        h.update(np.ascontiguousarray(arr).tobytes())
    return h.hexdigest()[:16]


# --- config file handling ---------------------------------------------------

_TUPLE_KEYS = {"bs_pos", "ris_pos", "user_pos", "eve_pos", "target_pos", "eta_db"}
_INT_KEYS = {"m_antennas", "n_elements", "seed", "outer_max", "inner_w_max",
             "inner_phi_max", "randomization_trials"}
_BOOL_KEYS = {"random_gamma_phase"}
CONFIG_KEYS = {f.name for f in fields(ScenarioConfig)}


def _parse_value(key, raw):
    raw = raw.strip()
    if key in _BOOL_KEYS:
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    try:
        if key in _TUPLE_KEYS:
            return tuple(float(tok) for tok in raw.split(","))
        if key in _INT_KEYS:
            return int(raw)
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse {raw!r}") from exc


def parse_config_text(text, base=None, extra_keys=()):
    """Parse ``key = value`` lines into a ScenarioConfig.

    Lines starting with ``#`` and blank lines are ignored.  Keys outside the
    schema (and outside ``extra_keys``) raise ConfigError; recognized extra
    keys are returned in a separate dict for the caller.
    """
    overrides, extras = {}, {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key in CONFIG_KEYS:
            overrides[key] = _parse_value(key, raw)
        elif key in extra_keys:
            extras[key] = raw.strip()
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
    cfg = replace(base, **overrides) if base is not None else ScenarioConfig(**overrides)
    return (cfg, extras) if extra_keys else (cfg, {})


def load_config(path, base=None, extra_keys=()):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read(), base=base, extra_keys=extra_keys)
