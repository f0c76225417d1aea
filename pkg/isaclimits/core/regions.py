"""Communication-sensing performance regions over resource element splits.

Communication and sensing use disjoint resource elements: ``u_c`` of the
``u_isac`` elements per CPI carry data, the other ``u_s`` carry the
sensing waveform.
"""

from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np

from allianceauth.services.hooks import get_extension_logger
from app_utils.logging import LoggerAddTag

from isaclimits import __title__
from isaclimits.app_settings import ISAC_REGION_GRID_POINTS, ISAC_SATURATION_FRACTION
from isaclimits.exceptions import ConfigError, RegionError

from .covariance import SensingChannelModel
from .metrics import (
    MetricPoint,
    cmi_gaussian,
    mse_approx,
    mse_bound,
    smi_approx,
    smi_for_model,
)
from .system import CorrelationSpec, SystemConfig
from .waveform import Ensemble, Seed, WaveformMatrix, check_ensemble, draw_symbols

logger = LoggerAddTag(get_extension_logger(__name__), __title__)

MONOTONE_TOLERANCE = 1e-9


class SweepMode(str, Enum):
    """How sensing metrics are evaluated along a region curve."""

    EXACT = "exact"
    APPROX = "approx"

    @classmethod
    def from_name(cls, name: str) -> "SweepMode":
        """Create from a name."""
        try:
            return cls(str(name).lower())
        except ValueError:
            raise ConfigError(
                f"Unknown mode {name!r}, expected one of: exact, approx"
            ) from None


class RegionLabel(str, Enum):
    """Part of a region curve by its communication-sensing exchange rate."""

    COMMUNICATION_SATURATION = "communication_saturation"
    TRADE_OFF = "trade_off"
    SENSING_SATURATION = "sensing_saturation"


@dataclass(frozen=True)
class Allocation:
    """Split of the resource elements of one CPI."""

    u_isac: int
    u_c: int
    u_s: int

    def __post_init__(self):
        for name in ("u_isac", "u_c", "u_s"):
            value = getattr(self, name)
            if int(value) != value or value < 0:
                raise ConfigError(
                    f"{name} must be a non-negative integer, got: {value}"
                )
            object.__setattr__(self, name, int(value))
        if self.u_c + self.u_s != self.u_isac:
            raise ConfigError(
                f"u_c + u_s must equal u_isac: {self.u_c} + {self.u_s} != {self.u_isac}"
            )

    @classmethod
    def for_communication(cls, u_isac: int, u_c: int) -> "Allocation":
        """Create from the communication share, sensing gets the rest."""
        if not 0 <= u_c <= u_isac:
            raise ConfigError(f"u_c must be within [0, {u_isac}], got: {u_c}")
        return cls(u_isac=u_isac, u_c=u_c, u_s=u_isac - u_c)


@dataclass(frozen=True)
class RegionCurve:
    """Metric points ordered by increasing ``u_c``."""

    points: Tuple[MetricPoint, ...]
    mode: SweepMode
    u_isac: int

    def __len__(self) -> int:
        return len(self.points)

    @property
    def cmi(self) -> np.ndarray:
        """CMI of all points in bits."""
        return np.array([obj.cmi_bits for obj in self.points])

    @property
    def smi(self) -> np.ndarray:
        """SMI of all points in bits."""
        return np.array([obj.smi_bits for obj in self.points])

    @property
    def mse(self) -> np.ndarray:
        """MSE bound of all points."""
        return np.array([obj.mse_bound for obj in self.points])

    def check_monotone(self):
        """Check the ordering invariants of a region curve.

        Raises:
            RegionError: If CMI is not strictly increasing or SMI increases
        """
        cmi, smi = self.cmi, self.smi
        if np.any(np.diff(cmi) <= 0.0):
            raise RegionError("CMI is not strictly increasing along the curve")
        scale = max(float(np.max(np.abs(smi))), 1.0)
        if np.any(np.diff(smi) > MONOTONE_TOLERANCE * scale):
            raise RegionError("SMI increases along the curve")


@dataclass(frozen=True)
class RegionSegment:
    """Consecutive curve points sharing one region label."""

    label: RegionLabel
    start: int
    end: int
    u_c_start: int
    u_c_end: int


def default_grid(u_isac: int, points: Optional[int] = None) -> List[int]:
    """Return evenly spaced integer ``u_c`` values from 0 to ``u_isac`` inclusive."""
    points = ISAC_REGION_GRID_POINTS if points is None else points
    if u_isac < 1:
        raise ConfigError(f"u_isac must be at least 1, got: {u_isac}")
    if points < 2:
        raise ConfigError(f"points must be at least 2, got: {points}")
    values = np.rint(np.linspace(0, u_isac, points)).astype(int)
    return sorted(set(int(value) for value in values))


def _prior_mse(model: SensingChannelModel) -> float:
    return mse_bound(0.0, model.r_s, model.k)


def sweep_region(
    cfg: SystemConfig,
    corr: CorrelationSpec,
    h_c: np.ndarray,
    model: SensingChannelModel,
    grid: Sequence[int],
    mode: SweepMode,
    seed: Seed = 0,
    ensemble: Ensemble = Ensemble.GAUSSIAN,
) -> RegionCurve:
    """Evaluate CMI, SMI and MSE bound for each ``u_c`` in the grid.

    ``u_isac`` is the number of resource elements per CPI of ``cfg``. The
    transmit correlation ``corr.rho_x`` applies to the communication input
    and to the exact-mode waveform. In exact mode every point uses the
    first ``2 u_s`` rows of one waveform draw from ``seed``, so sensing
    allocations are nested and the SMI is monotone along the curve.
    ``u_s = 0`` gives 0 bits and the prior MSE.

    Raises:
        ConfigError: If a grid value lies outside ``[0, u_isac]``
    """
    mode = SweepMode.from_name(mode) if not isinstance(mode, SweepMode) else mode
    u_isac = cfg.n_res
    rho_x = corr.rho_x
    allocations = [
        Allocation.for_communication(u_isac, u_c) for u_c in sorted(set(grid))
    ]
    if not allocations:
        raise ConfigError("grid must not be empty")
    samples = None
    if mode is SweepMode.EXACT:
        ensemble = check_ensemble(ensemble, cfg.n_tx, rho_x)
        if ensemble is Ensemble.GAUSSIAN and rho_x > 0.0 and cfg.n_tx > 1:
            ensemble = Ensemble.GAUSSIAN_CORRELATED
        max_rows = 2 * max(obj.u_s for obj in allocations)
        samples = draw_symbols(ensemble, max_rows, cfg.n_tx, cfg.p_t, rho_x, seed)
    prior = _prior_mse(model)
    points = []
    for allocation in allocations:
        cmi = cmi_gaussian(cfg, h_c, allocation.u_c, rho_x)
        if allocation.u_s == 0:
            smi, mse = 0.0, prior
        elif mode is SweepMode.EXACT:
            wave = WaveformMatrix.from_samples(
                samples[: 2 * allocation.u_s], ensemble, seed
            )
            smi = smi_for_model(wave, model, cfg)
            mse = mse_bound(smi, model.r_s, model.k)
        else:
            smi = smi_approx(cfg, model.r_s, model.k, allocation.u_s)
            if smi < 0.0:
                logger.warning(
                    "Approximate SMI %.6g is negative at u_s=%d, "
                    "using the zero-observation values",
                    smi,
                    allocation.u_s,
                )
                smi, mse = 0.0, prior
            else:
                mse = mse_approx(cfg, allocation.u_s, model.r_s)
        points.append(
            MetricPoint(
                cmi_bits=cmi,
                smi_bits=smi,
                mse_bound=mse,
                u_c=allocation.u_c,
                u_s=allocation.u_s,
            )
        )
    logger.info(
        "Swept %s region over %d allocations of %d resource elements",
        mode.value,
        len(points),
        u_isac,
    )
    return RegionCurve(points=tuple(points), mode=mode, u_isac=u_isac)


def _label_for(rate: float, fraction: float) -> RegionLabel:
    if rate < fraction:
        return RegionLabel.COMMUNICATION_SATURATION
    if rate > 1.0 / fraction:
        return RegionLabel.SENSING_SATURATION
    return RegionLabel.TRADE_OFF


def exchange_rates(curve: RegionCurve) -> np.ndarray:
    """Return ``|d smi / d cmi|`` per segment with both axes normalized to their range."""
    cmi, smi = curve.cmi, curve.smi
    cmi_range = float(cmi[-1] - cmi[0])
    smi_range = float(np.max(smi) - np.min(smi))
    if smi_range == 0.0:
        return np.zeros(len(cmi) - 1)
    d_cmi = np.diff(cmi) / cmi_range
    d_smi = np.abs(np.diff(smi)) / smi_range
    return d_smi / d_cmi


def classify_regions(
    curve: RegionCurve, saturation_fraction: Optional[float] = None
) -> List[RegionSegment]:
    """Split a region curve into saturation and trade-off segments.

    Raises:
        ConfigError: If ``saturation_fraction`` is outside (0, 0.5)
        RegionError: If the curve has fewer than 3 points or is not monotone
    """
    fraction = (
        ISAC_SATURATION_FRACTION if saturation_fraction is None else saturation_fraction
    )
    if not 0.0 < fraction < 0.5:
        raise ConfigError(
            f"saturation_fraction must be in (0, 0.5), got: {fraction}"
        )
    if len(curve) < 3:
        raise RegionError(
            f"At least 3 points are needed to classify a curve, got: {len(curve)}"
        )
    curve.check_monotone()
    labels = [_label_for(rate, fraction) for rate in exchange_rates(curve)]
    segments = []
    start = 0
    for idx in range(1, len(labels) + 1):
        if idx == len(labels) or labels[idx] is not labels[start]:
            segments.append(
                RegionSegment(
                    label=labels[start],
                    start=start,
                    end=idx,
                    u_c_start=curve.points[start].u_c,
                    u_c_end=curve.points[idx].u_c,
                )
            )
            start = idx
    logger.debug(
        "Classified curve into %s",
        ", ".join(f"{obj.label.value}[{obj.start}:{obj.end}]" for obj in segments),
    )
    return segments


def point_labels(curve: RegionCurve, segments: Sequence[RegionSegment]) -> List[RegionLabel]:
    """Return one label per point, the label of the segment starting there.

    The last point takes the label of the last segment.
    """
    labels = [segments[-1].label] * len(curve)
    for segment in segments:
        for idx in range(segment.start, segment.end):
            labels[idx] = segment.label
    return labels


def dominates(outer: RegionCurve, inner: RegionCurve) -> bool:
    """Return True when ``outer`` is at least as good as ``inner`` everywhere.

    Points are matched by their communication share ``u_c / u_isac``.
    CMI and SMI must not be smaller and the MSE bound not larger.

    Raises:
        ConfigError: If a point of ``inner`` has no counterpart in ``outer``
    """
    by_share = {
        round(obj.u_c / outer.u_isac, 12): obj for obj in outer.points
    }
    for point in inner.points:
        share = round(point.u_c / inner.u_isac, 12)
        match = by_share.get(share)
        if match is None:
            raise ConfigError(
                f"No point with communication share {share} in the outer curve"
            )
        if (
            match.cmi_bits < point.cmi_bits
            or match.smi_bits < point.smi_bits
            or match.mse_bound > point.mse_bound
        ):
            return False
    return True
