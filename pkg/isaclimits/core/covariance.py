"""Sensing channel covariance: construction, partition and conditioning.

The vectorized sensing channel ``h_s`` stacks the rows of the ``N x M_s``
channel matrix, so that the echo model reads ``(X kron I_Ms) @ h_s``.
Its entries split into the sensing parameters ``s`` (positions
``s_indices``) and the remaining parameters ``r`` (positions ``psi``).
"""

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Optional, Tuple

import numpy as np
from scipy import linalg

from allianceauth.services.hooks import get_extension_logger
from app_utils.logging import LoggerAddTag

from isaclimits import __title__
from isaclimits.exceptions import ConfigError

from .linalg import cholesky_lower, hermitian, is_positive_definite, logdet2_pd, psd_sqrt
from .system import CorrelationSpec, SystemConfig

logger = LoggerAddTag(get_extension_logger(__name__), __title__)


def build_equicorrelation(
    dim: int, variance: float, rho: float, name: str = "rho"
) -> np.ndarray:
    """Return the constant-correlation matrix ``variance * ((1 - rho) I + rho 11^T)``.

    Args:
        dim: Matrix dimension
        variance: Common diagonal value
        rho: Correlation coefficient between any two entries
        name: Coefficient name used in error messages

    Raises:
        ConfigError: If the combination is not positive definite
    """
    if dim < 1:
        raise ConfigError(f"dimension must be at least 1, got: {dim}")
    if variance <= 0.0:
        raise ConfigError(f"variance must be strictly positive, got: {variance}")
    if dim > 1 and not -1.0 / (dim - 1) < rho < 1.0:
        raise ConfigError(
            f"{name}={rho} is outside ({-1.0 / (dim - 1):.6g}, 1) "
            f"for dimension {dim}"
        )
    matrix = variance * rho * np.ones((dim, dim))
    np.fill_diagonal(matrix, variance)
    if not is_positive_definite(matrix):
        raise ConfigError(f"{name}={rho} does not give a positive definite matrix")
    return matrix


def schur_conditional(r_r: np.ndarray, r_rs: np.ndarray, r_s: np.ndarray) -> np.ndarray:
    """Return the conditional covariance ``R_r - R_rs @ R_s^-1 @ R_sr``.

    ``R_sr`` is taken as the conjugate transpose of ``r_rs``.
    The result is symmetrized.

    Raises:
        NumericalError: If ``r_s`` is not positive definite
    """
    r_r = np.atleast_2d(np.asarray(r_r))
    r_rs = np.atleast_2d(np.asarray(r_rs))
    r_s = np.atleast_2d(np.asarray(r_s))
    if r_r.shape[0] == 0:
        return np.zeros((0, 0), dtype=r_r.dtype)
    factor = cholesky_lower(r_s, "R_s")
    solved = linalg.cho_solve((factor, True), r_rs.conj().T)
    return hermitian(r_r - r_rs @ solved)


def default_s_indices(k: int) -> Tuple[int, ...]:
    """Return the default sensing parameter positions: the first k entries of h_s."""
    return tuple(range(k))


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class SensingChannelModel:
    """Covariance of ``h_s`` with its partition into ``s`` and ``r``. Immutable."""

    r_h: np.ndarray
    k: int
    s_indices: Tuple[int, ...]
    psi: Tuple[int, ...]
    r_s: np.ndarray
    r_r: np.ndarray
    r_sr: np.ndarray
    r_rs: np.ndarray
    r_cond: np.ndarray
    r_h_cond: np.ndarray

    @property
    def dim(self) -> int:
        """Dimension of h_s."""
        return self.r_h.shape[0]

    @property
    def is_full_channel(self) -> bool:
        """True when every entry of h_s is a sensing parameter."""
        return self.k == self.dim

    @cached_property
    def r_h_factor(self) -> np.ndarray:
        """Lower Cholesky factor of R_H."""
        return cholesky_lower(self.r_h, "R_H")

    @cached_property
    def r_h_cond_root(self) -> np.ndarray:
        """Eigendecomposition square root of the singular R_{h_s|s}."""
        return psd_sqrt(self.r_h_cond)

    def r_s_logdet2(self) -> float:
        """Base-2 log-determinant of R_s, the entropy term of the sensing parameters."""
        return logdet2_pd(self.r_s, "R_s")

    @classmethod
    def from_covariance(
        cls, r_h: np.ndarray, k: int, s_indices: Optional[Iterable[int]] = None
    ) -> "SensingChannelModel":
        """Partition a given covariance of h_s.

        Raises:
            ConfigError: If R_H is not positive definite or the index set is invalid
        """
        r_h = hermitian(np.asarray(r_h))
        dim = r_h.shape[0]
        s_indices = _clean_s_indices(dim, k, s_indices)
        if not is_positive_definite(r_h):
            raise ConfigError("R_H is not positive definite")
        chosen = set(s_indices)
        psi = tuple(idx for idx in range(dim) if idx not in chosen)
        s_idx = np.array(s_indices, dtype=int)
        r_idx = np.array(psi, dtype=int)
        r_s = r_h[np.ix_(s_idx, s_idx)]
        r_r = r_h[np.ix_(r_idx, r_idx)]
        r_sr = r_h[np.ix_(s_idx, r_idx)]
        r_rs = r_h[np.ix_(r_idx, s_idx)]
        r_cond = schur_conditional(r_r, r_rs, r_s)
        r_h_cond = np.zeros_like(r_h)
        if psi:
            r_h_cond[np.ix_(r_idx, r_idx)] = r_cond
        return cls(
            r_h=_frozen(r_h),
            k=k,
            s_indices=s_indices,
            psi=psi,
            r_s=_frozen(r_s),
            r_r=_frozen(r_r),
            r_sr=_frozen(r_sr),
            r_rs=_frozen(r_rs),
            r_cond=_frozen(r_cond),
            r_h_cond=_frozen(r_h_cond),
        )


def _clean_s_indices(
    dim: int, k: int, s_indices: Optional[Iterable[int]]
) -> Tuple[int, ...]:
    if not 1 <= k <= dim:
        raise ConfigError(f"k must be between 1 and {dim}, got: {k}")
    if s_indices is None:
        return default_s_indices(k)
    s_indices = tuple(int(idx) for idx in s_indices)
    if len(s_indices) != k or len(set(s_indices)) != k:
        raise ConfigError(f"s_indices must hold {k} distinct entries, got: {s_indices}")
    out_of_range = [idx for idx in s_indices if not 0 <= idx < dim]
    if out_of_range:
        raise ConfigError(f"s_indices out of range [0, {dim}): {out_of_range}")
    return s_indices


def assemble_ordered_covariance(
    dim: int, k: int, variance: float, corr: CorrelationSpec
) -> np.ndarray:
    """Return R_H in (s first, then r) ordering built from equicorrelation blocks.

    Raises:
        ConfigError: If a block or the composite is not positive definite
    """
    r_s = build_equicorrelation(k, variance, corr.rho_s, "rho_s")
    n_r = dim - k
    if n_r == 0:
        return r_s
    r_r = build_equicorrelation(n_r, variance, corr.rho_r, "rho_r")
    r_sr = variance * corr.rho_sr * np.ones((k, n_r))
    composite = np.block([[r_s, r_sr], [r_sr.T, r_r]])
    if not is_positive_definite(composite):
        raise ConfigError(
            f"rho_sr={corr.rho_sr} does not give a positive definite R_H "
            f"with rho_s={corr.rho_s}, rho_r={corr.rho_r}, k={k}, dim={dim}"
        )
    return composite


def build_channel_model(
    cfg: SystemConfig,
    corr: CorrelationSpec,
    k: int,
    s_indices: Optional[Iterable[int]] = None,
) -> SensingChannelModel:
    """Build the sensing channel model for a system and its correlation coefficients.

    Every diagonal entry of R_H equals the sensing channel gain.
    When ``s_indices`` is not the prefix ``0..k-1`` the ordered covariance
    is permuted so that ``s`` sits at ``s_indices`` and ``r`` at the
    remaining positions in increasing order.

    Raises:
        ConfigError: If k, s_indices or the correlation coefficients are invalid
    """
    dim = cfg.channel_dim
    s_indices = _clean_s_indices(dim, k, s_indices)
    ordered = assemble_ordered_covariance(dim, k, cfg.alpha2_hs, corr)
    chosen = set(s_indices)
    order = np.array(s_indices + tuple(i for i in range(dim) if i not in chosen))
    r_h = np.empty_like(ordered)
    r_h[np.ix_(order, order)] = ordered
    model = SensingChannelModel.from_covariance(r_h, k, s_indices)
    logger.debug(
        "Built channel model: dim=%d k=%d rho_s=%s rho_r=%s rho_sr=%s",
        dim,
        k,
        corr.rho_s,
        corr.rho_r,
        corr.rho_sr,
    )
    return model
