"""Communication and sensing mutual information and the MSE bound.

All information quantities are in bits. The sensing formulas never build
the Kronecker-expanded waveform ``X kron I_Ms``: by
``det(I + A B) = det(I + B A)`` every log-determinant is evaluated at
dimension ``N * M_s`` from the Gram matrix ``X^H X`` alone.
"""

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from scipy.special import logsumexp

from allianceauth.services.hooks import get_extension_logger
from app_utils.logging import LoggerAddTag

from isaclimits import __title__
from isaclimits.exceptions import ConfigError

from .covariance import SensingChannelModel, build_equicorrelation
from .linalg import hermitian, logdet2_identity_plus, logdet2_pd
from .parallel import MonteCarloEstimate, run_chunked
from .system import SystemConfig
from .waveform import (
    Ensemble,
    Seed,
    WaveformMatrix,
    check_ensemble,
    draw_symbols,
    generate,
    trial_seed,
)

logger = LoggerAddTag(get_extension_logger(__name__), __title__)

MAX_MONTE_CARLO_RX = 8
MIN_ENSEMBLE_TRIALS = 100
SMI_CLAMP_TOLERANCE = 1e-9


@dataclass(frozen=True)
class MetricPoint:
    """Communication and sensing performance of one resource allocation."""

    cmi_bits: float
    smi_bits: float
    mse_bound: float
    u_c: int
    u_s: int

    def to_dict(self) -> dict:
        """Return as dict."""
        return {
            "u_c": self.u_c,
            "u_s": self.u_s,
            "cmi_bits": self.cmi_bits,
            "smi_bits": self.smi_bits,
            "mse_bound": self.mse_bound,
        }


def draw_comm_channel(cfg: SystemConfig, seed: Seed) -> np.ndarray:
    """Draw an ``N x M_c`` communication channel with i.i.d. ``CN(0, alpha_Hc^2)`` entries."""
    rng = np.random.default_rng(seed)
    raw = rng.standard_normal((cfg.n_tx, cfg.m_c, 2))
    return np.sqrt(cfg.alpha2_hc / 2.0) * (raw[..., 0] + 1j * raw[..., 1])


def _check_comm_channel(cfg: SystemConfig, h_c: np.ndarray) -> np.ndarray:
    h_c = np.atleast_2d(np.asarray(h_c, dtype=complex))
    if h_c.shape[0] != cfg.n_tx:
        raise ConfigError(
            f"h_c must have {cfg.n_tx} rows, one per transmit antenna, "
            f"got shape {h_c.shape}"
        )
    return h_c


def cmi_per_re(cfg: SystemConfig, h_c: np.ndarray, rho_x: float = 0.0) -> float:
    """Return the CMI of one resource element for a Gaussian input.

    ``2 log2 det(I + (P_t / sigma_nc^2) H_c^H Sigma_x H_c)``, with two
    complex samples per resource element.
    """
    h_c = _check_comm_channel(cfg, h_c)
    sigma_x = build_equicorrelation(cfg.n_tx, 1.0, rho_x, "rho_x")
    return 2.0 * logdet2_identity_plus(h_c, sigma_x, cfg.p_t / cfg.sigma2_nc)


def cmi_gaussian(
    cfg: SystemConfig, h_c: np.ndarray, u_c: int, rho_x: float = 0.0
) -> float:
    """Return the CMI in bits of ``u_c`` resource elements for a Gaussian input."""
    if u_c < 0:
        raise ConfigError(f"u_c must not be negative, got: {u_c}")
    if u_c == 0:
        return 0.0
    return u_c * cmi_per_re(cfg, h_c, rho_x)


def cmi_monte_carlo(
    cfg: SystemConfig,
    h_c: np.ndarray,
    ensemble: Union[Ensemble, str],
    n_outer: int,
    n_inner: int,
    seed: Seed,
    rho_x: float = 0.0,
    threads: Optional[int] = None,
) -> MonteCarloEstimate:
    """Estimate the CMI of one resource element for any waveform ensemble.

    The output entropy is estimated by nested Monte Carlo: the outer loop
    draws received samples, the inner loop approximates their density by a
    mixture over fresh symbol draws. Densities are accumulated in the log
    domain. The noise entropy is evaluated on the same noise samples as
    the output entropy, which has the same mean as the closed form
    ``M_c log2(pi e sigma_nc^2)`` and a far smaller variance at low SNR.
    Returns bits per resource element with the outer-loop standard error.

    Raises:
        ConfigError: If the receiver has more than 8 antennas or a sample size is invalid
    """
    h_c = _check_comm_channel(cfg, h_c)
    ensemble = check_ensemble(ensemble, cfg.n_tx, rho_x)
    m_c = h_c.shape[1]
    if m_c > MAX_MONTE_CARLO_RX:
        raise ConfigError(
            f"Monte-Carlo CMI supports at most {MAX_MONTE_CARLO_RX} "
            f"receive antennas, got: {m_c}"
        )
    if n_outer < 2 or n_inner < 1:
        raise ConfigError(
            f"n_outer must be at least 2 and n_inner at least 1, "
            f"got: {n_outer}, {n_inner}"
        )
    if min(n_outer, n_inner) < 1000:
        logger.warning(
            "Monte-Carlo CMI with n_outer=%d n_inner=%d is likely biased",
            n_outer,
            n_inner,
        )
    sigma2 = cfg.sigma2_nc
    x_outer = draw_symbols(
        ensemble, n_outer, cfg.n_tx, cfg.p_t, rho_x, trial_seed(seed, 0)
    )
    noise_rng = np.random.default_rng(trial_seed(seed, 1))
    raw = noise_rng.standard_normal((n_outer, m_c, 2))
    noise = np.sqrt(sigma2 / 2.0) * (raw[..., 0] + 1j * raw[..., 1])
    y = x_outer @ h_c + noise
    x_inner = draw_symbols(
        ensemble, n_inner, cfg.n_tx, cfg.p_t, rho_x, trial_seed(seed, 2)
    )
    means = x_inner @ h_c
    log_norm = math.log(n_inner) + m_c * math.log(math.pi * sigma2)
    log_noise_density = (
        -np.sum(np.abs(noise) ** 2, axis=1) / sigma2 - m_c * math.log(math.pi * sigma2)
    )

    def _chunk(indices: Sequence[int]) -> np.ndarray:
        idx = np.asarray(indices)
        y_part = y[idx]
        distances = np.sum(
            np.abs(y_part[:, np.newaxis, :] - means[np.newaxis, :, :]) ** 2, axis=2
        )
        log_density = logsumexp(-distances / sigma2, axis=1) - log_norm
        return 2.0 * (log_noise_density[idx] - log_density) / math.log(2.0)

    samples = run_chunked(_chunk, n_outer, threads)
    estimate = MonteCarloEstimate.from_samples(samples)
    logger.debug(
        "Monte-Carlo CMI %s: %.6g +/- %.2g bits per RE",
        ensemble.value,
        estimate.value,
        estimate.std_error,
    )
    return estimate


def _smi_term(gram: np.ndarray, root: np.ndarray, cfg: SystemConfig) -> float:
    inner = np.kron(hermitian(gram), np.eye(cfg.m_s))
    return logdet2_identity_plus(root, inner, 1.0 / cfg.sigma2_ns)


def _check_dims(gram: np.ndarray, model: SensingChannelModel, cfg: SystemConfig):
    if gram.shape[0] * cfg.m_s != model.dim:
        raise ConfigError(
            f"Waveform with {gram.shape[0]} antennas and M_s={cfg.m_s} does not "
            f"match a channel model of dimension {model.dim}"
        )


def smi_full_channel(
    wave: WaveformMatrix, model: SensingChannelModel, cfg: SystemConfig
) -> float:
    """Return the SMI when every entry of h_s is a sensing parameter.

    ``log2 det(I + sigma_ns^-2 L^H (X^H X kron I_Ms) L)`` with ``R_H = L L^H``.

    Raises:
        ConfigError: If the model has a non-empty set of other parameters
        NumericalError: If the reduced matrix cannot be factorized
    """
    if not model.is_full_channel:
        raise ConfigError(
            f"Full channel SMI requires K = {model.dim}, got: {model.k}"
        )
    _check_dims(wave.gram, model, cfg)
    return _smi_term(wave.gram, model.r_h_factor, cfg)


def _smi_partial_from_gram(
    gram: np.ndarray, model: SensingChannelModel, cfg: SystemConfig
) -> float:
    _check_dims(gram, model, cfg)
    observed = _smi_term(gram, model.r_h_factor, cfg)
    if model.is_full_channel:
        return observed
    residual = _smi_term(gram, model.r_h_cond_root, cfg)
    difference = observed - residual
    if difference < -SMI_CLAMP_TOLERANCE * max(abs(observed), 1.0):
        logger.warning(
            "Partial-channel SMI clamped to 0 from %.6g bits, "
            "the conditional covariance is not dominated by R_H",
            difference,
        )
    return max(difference, 0.0)


def smi_partial_channel(
    wave: WaveformMatrix, model: SensingChannelModel, cfg: SystemConfig
) -> float:
    """Return the SMI of the sensing parameters ``s``, a subset of h_s.

    The echo entropy given ``s`` uses the singular conditional covariance
    ``R_{h_s|s}`` through its eigendecomposition square root.
    With ``K = N M_s`` this equals :func:`smi_full_channel`.
    """
    return _smi_partial_from_gram(wave.gram, model, cfg)


def smi_for_model(
    wave: WaveformMatrix, model: SensingChannelModel, cfg: SystemConfig
) -> float:
    """Return the SMI with the formula that matches the model."""
    if model.is_full_channel:
        return smi_full_channel(wave, model, cfg)
    return smi_partial_channel(wave, model, cfg)


def smi_expected_gram(
    model: SensingChannelModel, cfg: SystemConfig, n_samples: int
) -> float:
    """Return the SMI with the Gram matrix replaced by its mean ``n_samples P_t I``."""
    if n_samples < 0:
        raise ConfigError(f"n_samples must not be negative, got: {n_samples}")
    gram = n_samples * cfg.p_t * np.eye(cfg.n_tx)
    return _smi_partial_from_gram(gram, model, cfg)


def mse_bound(smi_bits: float, r_s: np.ndarray, k: int) -> float:
    """Return the minimum average MSE ``2^((log2 det R_s - SMI) / K)``.

    Raises:
        ConfigError: If ``r_s`` is not ``k x k``
    """
    r_s = np.atleast_2d(np.asarray(r_s))
    if r_s.shape != (k, k):
        raise ConfigError(f"r_s must be {k} x {k}, got shape {r_s.shape}")
    return float(2.0 ** ((logdet2_pd(r_s, "R_s") - smi_bits) / k))


def smi_approx(cfg: SystemConfig, r_s: np.ndarray, k: int, u_s: int) -> float:
    """Return the high-SNR SMI ``K log2(2 u_s P_t / sigma_ns^2) + log2 det R_s``.

    ``u_s = 0`` gives 0 bits.
    """
    if u_s < 0:
        raise ConfigError(f"u_s must not be negative, got: {u_s}")
    if u_s == 0:
        return 0.0
    r_s = np.atleast_2d(np.asarray(r_s))
    if r_s.shape != (k, k):
        raise ConfigError(f"r_s must be {k} x {k}, got shape {r_s.shape}")
    snr = 2.0 * u_s * cfg.p_t / cfg.sigma2_ns
    return k * math.log2(snr) + logdet2_pd(r_s, "R_s")


def mse_approx(
    cfg: SystemConfig, u_s: int, r_s: Optional[np.ndarray] = None
) -> float:
    """Return the high-SNR MSE ``sigma_ns^2 / (2 u_s P_t)``.

    ``u_s = 0`` gives the prior geometric-mean variance, which needs ``r_s``.
    """
    if u_s < 0:
        raise ConfigError(f"u_s must not be negative, got: {u_s}")
    if u_s == 0:
        if r_s is None:
            raise ConfigError("r_s is required for the u_s = 0 endpoint")
        r_s = np.atleast_2d(np.asarray(r_s))
        return float(2.0 ** (logdet2_pd(r_s, "R_s") / r_s.shape[0]))
    return cfg.sigma2_ns / (2.0 * u_s * cfg.p_t)


def ensemble_average_smi(
    ensemble: Union[Ensemble, str],
    model: SensingChannelModel,
    cfg: SystemConfig,
    trials: int,
    seed: Seed,
    rho_x: float = 0.0,
    threads: Optional[int] = None,
) -> MonteCarloEstimate:
    """Return the mean SMI over independent waveform draws.

    Trial ``i`` draws its waveform from ``trial_seed(seed, i)``.
    """
    ensemble = check_ensemble(ensemble, cfg.n_tx, rho_x)
    if trials < MIN_ENSEMBLE_TRIALS:
        logger.warning(
            "Ensemble average over %d trials, fewer than the recommended %d",
            trials,
            MIN_ENSEMBLE_TRIALS,
        )

    def _chunk(indices: Sequence[int]) -> np.ndarray:
        return np.array(
            [
                smi_for_model(
                    generate(ensemble, cfg, rho_x, trial_seed(seed, idx)), model, cfg
                )
                for idx in indices
            ]
        )

    estimate = MonteCarloEstimate.from_samples(run_chunked(_chunk, trials, threads))
    logger.debug(
        "Ensemble average SMI %s over %d trials: %.6g +/- %.2g bits",
        ensemble.value,
        trials,
        estimate.value,
        estimate.std_error,
    )
    return estimate
