"""LMMSE estimation of the sensing channel, used to check the MSE bound."""

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from allianceauth.services.hooks import get_extension_logger
from app_utils.logging import LoggerAddTag

from isaclimits import __title__
from isaclimits.app_settings import ISAC_ILL_CONDITION_LIMIT
from isaclimits.exceptions import ConfigError

from .covariance import SensingChannelModel
from .metrics import mse_bound, smi_for_model
from .parallel import MonteCarloEstimate, run_chunked
from .system import SystemConfig
from .waveform import Seed, WaveformMatrix, trial_seed

logger = LoggerAddTag(get_extension_logger(__name__), __title__)

MIN_RECOMMENDED_TRIALS = 1000


@dataclass(frozen=True, eq=False)
class OracleResult:
    """Empirical LMMSE error of the sensing parameters next to the MSE bound."""

    empirical_mse: float
    bound: float
    trials: int
    std_error: float
    mean_estimate: np.ndarray
    condition: float
    warning: Optional[str] = None

    @property
    def is_consistent(self) -> bool:
        """True when the empirical error is not below the bound at 3 standard errors."""
        return self.empirical_mse + 3.0 * self.std_error >= self.bound

    def to_dict(self) -> dict:
        """Return as dict."""
        return {
            "empirical_mse": self.empirical_mse,
            "bound": self.bound,
            "trials": self.trials,
            "std_error": self.std_error,
            "condition": self.condition,
            "warning": self.warning,
        }


def _complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    raw = rng.standard_normal(tuple(shape) + (2,))
    return (raw[..., 0] + 1j * raw[..., 1]) / np.sqrt(2.0)


def lmmse_gain(
    gram: np.ndarray, model: SensingChannelModel, cfg: SystemConfig
) -> Tuple[np.ndarray, float]:
    """Return the matrix ``W`` with ``h_hat = W (X kron I)^H y`` and the condition number.

    ``W = R_H (sigma_ns^2 I + (X^H X kron I_Ms) R_H)^-1`` is the reduced form
    of ``R_H Xk^H (Xk R_H Xk^H + sigma_ns^2 I)^-1``.
    """
    big_gram = np.kron(gram, np.eye(cfg.m_s))
    normal = cfg.sigma2_ns * np.eye(model.dim) + big_gram @ model.r_h
    condition = float(np.linalg.cond(normal))
    gain = linalg.solve(normal.T, model.r_h.T).T
    return gain, condition


def lmmse_empirical_mse(
    wave: WaveformMatrix,
    model: SensingChannelModel,
    cfg: SystemConfig,
    trials: int,
    seed: Seed,
    threads: Optional[int] = None,
) -> OracleResult:
    """Run the LMMSE estimator on simulated echoes and measure its error on ``s``.

    Trial ``i`` draws ``h_s ~ CN(0, R_H)`` and the noise from
    ``trial_seed(seed, i)``. Echoes are formed as ``X @ H_s`` with
    ``H_s`` the ``N x M_s`` reshaping of ``h_s``.
    """
    if wave.n_tx * cfg.m_s != model.dim:
        raise ConfigError(
            f"Waveform with {wave.n_tx} antennas and M_s={cfg.m_s} does not "
            f"match a channel model of dimension {model.dim}"
        )
    if trials < 2:
        raise ConfigError(f"trials must be at least 2, got: {trials}")
    if trials < MIN_RECOMMENDED_TRIALS:
        logger.info(
            "LMMSE oracle with %d trials, fewer than the recommended %d",
            trials,
            MIN_RECOMMENDED_TRIALS,
        )
    gain, condition = lmmse_gain(wave.gram, model, cfg)
    warning = None
    if condition > ISAC_ILL_CONDITION_LIMIT:
        warning = f"ill-conditioned normal equations (condition number {condition:.3e})"
        logger.warning("LMMSE oracle: %s", warning)
    factor = model.r_h_factor
    x = wave.x
    s_idx = np.array(model.s_indices, dtype=int)
    noise_scale = np.sqrt(cfg.sigma2_ns)

    def _chunk(indices: Sequence[int]) -> np.ndarray:
        out = np.empty((len(indices), 1 + model.dim), dtype=complex)
        for row, idx in enumerate(indices):
            rng = np.random.default_rng(trial_seed(seed, idx))
            h_s = factor @ _complex_normal(rng, (model.dim,))
            echo = x @ h_s.reshape(wave.n_tx, cfg.m_s)
            echo = echo + noise_scale * _complex_normal(rng, echo.shape)
            matched = (x.conj().T @ echo).reshape(-1)
            h_hat = gain @ matched
            out[row, 0] = np.mean(np.abs(h_s[s_idx] - h_hat[s_idx]) ** 2)
            out[row, 1:] = h_hat
        return out

    samples = run_chunked(_chunk, trials, threads)
    estimate = MonteCarloEstimate.from_samples(samples[:, 0].real)
    mean_estimate = samples[:, 1:].mean(axis=0)
    mean_estimate.setflags(write=False)
    bound = mse_bound(smi_for_model(wave, model, cfg), model.r_s, model.k)
    result = OracleResult(
        empirical_mse=estimate.value,
        bound=bound,
        trials=trials,
        std_error=estimate.std_error,
        mean_estimate=mean_estimate,
        condition=condition,
        warning=warning,
    )
    logger.debug(
        "LMMSE oracle: empirical %.6g +/- %.2g, bound %.6g",
        result.empirical_mse,
        result.std_error,
        result.bound,
    )
    if not result.is_consistent:
        logger.warning(
            "LMMSE error %.6g is below the MSE bound %.6g at 3 standard errors",
            result.empirical_mse,
            result.bound,
        )
    return result
