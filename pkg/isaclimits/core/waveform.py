"""Transmit sample matrices for the waveform ensembles."""

from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np

from allianceauth.services.hooks import get_extension_logger
from app_utils.logging import LoggerAddTag

from isaclimits import __title__
from isaclimits.exceptions import ConfigError
from isaclimits.helpers import write_csv

from .covariance import build_equicorrelation
from .linalg import hermitian
from .system import SystemConfig

logger = LoggerAddTag(get_extension_logger(__name__), __title__)

Seed = Union[int, np.random.SeedSequence]


class Ensemble(str, Enum):
    """A waveform ensemble."""

    GAUSSIAN = "gaussian"
    CONSTANT_MODULUS = "constant_modulus"
    GAUSSIAN_CORRELATED = "gaussian_correlated"

    @classmethod
    def from_name(cls, name: str) -> "Ensemble":
        """Create from a name, accepting the short CLI aliases."""
        aliases = {"gs": cls.GAUSSIAN, "cm": cls.CONSTANT_MODULUS}
        try:
            return aliases.get(name.lower()) or cls(name.lower())
        except ValueError:
            choices = ", ".join(obj.value for obj in cls)
            raise ConfigError(
                f"Unknown ensemble {name!r}, expected one of: {choices}"
            ) from None


def trial_seed(master_seed: Seed, index: int) -> np.random.SeedSequence:
    """Return the sub-seed of trial ``index``, independent of evaluation order.

    A ``SeedSequence`` master extends its own spawn key, so sub-seeds of
    sub-seeds stay distinct.
    """
    if isinstance(master_seed, np.random.SeedSequence):
        return np.random.SeedSequence(
            entropy=master_seed.entropy,
            spawn_key=tuple(master_seed.spawn_key) + (int(index),),
        )
    return np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(index),))


@dataclass(frozen=True, eq=False)
class WaveformMatrix:
    """Transmit samples ``x`` of shape ``(2 B N_CPI, N)`` and their Gram matrix."""

    x: np.ndarray
    gram: np.ndarray
    ensemble_tag: Ensemble
    seed: Seed

    @property
    def n_rows(self) -> int:
        """Number of complex samples per antenna."""
        return self.x.shape[0]

    @property
    def n_tx(self) -> int:
        """Number of transmit antennas."""
        return self.x.shape[1]

    @classmethod
    def from_samples(
        cls, x: np.ndarray, ensemble_tag: Ensemble, seed: Seed = None
    ) -> "WaveformMatrix":
        """Create from a sample matrix, computing its Gram matrix."""
        x = np.array(x, dtype=complex)
        x.setflags(write=False)
        gram = hermitian(x.conj().T @ x)
        gram.setflags(write=False)
        return cls(x=x, gram=gram, ensemble_tag=Ensemble(ensemble_tag), seed=seed)


def _gaussian_samples(
    rng: np.random.Generator, n_rows: int, n_tx: int, p_t: float, rho_x: float
) -> np.ndarray:
    raw = rng.standard_normal((n_rows, n_tx, 2))
    z = (raw[..., 0] + 1j * raw[..., 1]) / np.sqrt(2.0)
    if rho_x > 0.0 and n_tx > 1:
        sigma_x = build_equicorrelation(n_tx, 1.0, rho_x, "rho_x")
        z = z @ np.linalg.cholesky(sigma_x).T
    return np.sqrt(p_t) * z


def _constant_modulus_samples(
    rng: np.random.Generator, n_rows: int, n_tx: int, p_t: float
) -> np.ndarray:
    theta = rng.uniform(0.0, 2.0 * np.pi, (n_rows, n_tx))
    return np.sqrt(p_t) * np.exp(1j * theta)


def draw_symbols(
    ensemble: Ensemble, n_rows: int, n_tx: int, p_t: float, rho_x: float, seed: Seed
) -> np.ndarray:
    """Draw ``n_rows`` transmit sample vectors of length ``n_tx`` from an ensemble.

    Rows are generated in order from one stream, so a draw with fewer rows
    is a prefix of a draw with more rows for the same seed.
    """
    rng = np.random.default_rng(seed)
    if ensemble is Ensemble.CONSTANT_MODULUS:
        return _constant_modulus_samples(rng, n_rows, n_tx, p_t)
    return _gaussian_samples(rng, n_rows, n_tx, p_t, rho_x)


def gen_gaussian(cfg: SystemConfig, rho_x: float, seed: Seed) -> WaveformMatrix:
    """Draw rows i.i.d. from ``CN(0, P_t * Sigma_x)`` with equicorrelated ``Sigma_x``.

    Coloring uses the Cholesky factor of ``Sigma_x``; ``rho_x = 0`` gives
    i.i.d. ``CN(0, P_t)`` entries.

    Raises:
        ConfigError: If ``rho_x`` is outside [0, 1)
    """
    if not 0.0 <= rho_x < 1.0:
        raise ConfigError(f"rho_x must be in [0, 1), got: {rho_x}")
    tag = (
        Ensemble.GAUSSIAN_CORRELATED
        if rho_x > 0.0 and cfg.n_tx > 1
        else Ensemble.GAUSSIAN
    )
    x = draw_symbols(tag, cfg.n_samples, cfg.n_tx, cfg.p_t, rho_x, seed)
    return WaveformMatrix.from_samples(x, tag, seed)


def gen_constant_modulus(cfg: SystemConfig, seed: Seed) -> WaveformMatrix:
    """Draw entries ``sqrt(P_t) * exp(j theta)`` with i.i.d. uniform phases."""
    x = draw_symbols(
        Ensemble.CONSTANT_MODULUS, cfg.n_samples, cfg.n_tx, cfg.p_t, 0.0, seed
    )
    return WaveformMatrix.from_samples(x, Ensemble.CONSTANT_MODULUS, seed)


def check_ensemble(
    ensemble: Union[Ensemble, str], n_tx: int, rho_x: float
) -> Ensemble:
    """Return the ensemble after checking it supports the requested correlation.

    Raises:
        ConfigError: If the ensemble is unknown or does not support ``rho_x``
    """
    ensemble = (
        ensemble if isinstance(ensemble, Ensemble) else Ensemble.from_name(ensemble)
    )
    if not 0.0 <= rho_x < 1.0:
        raise ConfigError(f"rho_x must be in [0, 1), got: {rho_x}")
    if ensemble is Ensemble.CONSTANT_MODULUS and rho_x != 0.0:
        raise ConfigError(
            "A spatially correlated constant-modulus ensemble is not defined"
        )
    if ensemble is Ensemble.GAUSSIAN_CORRELATED and n_tx > 1 and rho_x == 0.0:
        raise ConfigError("gaussian_correlated requires rho_x > 0")
    return ensemble


def generate(
    ensemble: Union[Ensemble, str], cfg: SystemConfig, rho_x: float, seed: Seed
) -> WaveformMatrix:
    """Draw a waveform from the given ensemble."""
    ensemble = check_ensemble(ensemble, cfg.n_tx, rho_x)
    if ensemble is Ensemble.CONSTANT_MODULUS:
        return gen_constant_modulus(cfg, seed)
    return gen_gaussian(cfg, rho_x, seed)


def waveform_rows(wave: WaveformMatrix) -> Tuple[List[str], List[list]]:
    """Return X as a header and rows ``re_0, im_0, ..., re_{N-1}, im_{N-1}``."""
    header = []
    for col in range(wave.n_tx):
        header += [f"re_{col}", f"im_{col}"]
    rows = [
        [part for value in row for part in (value.real, value.imag)] for row in wave.x
    ]
    return header, rows


def dump_csv(wave: WaveformMatrix, path: Path) -> Path:
    """Write X to a CSV file, one row per sample."""
    header, rows = waveform_rows(wave)
    path = write_csv(path, header, rows)
    logger.info(
        "Wrote %s waveform of %d x %d samples to %s",
        wave.ensemble_tag.value,
        wave.n_rows,
        wave.n_tx,
        path,
    )
    return path
