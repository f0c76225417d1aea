"""System parameters shared by all performance metrics."""

import math
from dataclasses import asdict, dataclass, fields

from ..exceptions import ConfigError


def db_to_linear(value_db: float) -> float:
    """Convert a power ratio from dB to linear scale."""
    return 10.0 ** (float(value_db) / 10.0)


def linear_to_db(value: float) -> float:
    """Convert a linear power ratio to dB."""
    return 10.0 * math.log10(value)


@dataclass(frozen=True)
class SystemConfig:
    """Scalar parameters of a band-limited ISAC system. Immutable.

    Bandwidth is given in symbol-rate units, so one symbol carries
    ``2 * bandwidth_b`` complex samples and one CPI carries
    ``bandwidth_b * n_cpi`` resource elements.
    """

    n_tx: int
    m_c: int
    m_s: int
    bandwidth_b: int
    n_cpi: int
    p_t: float
    sigma2_nc: float
    sigma2_ns: float
    alpha2_hs: float = 1.0
    alpha2_hc: float = 1.0

    def __post_init__(self):
        for name in ("n_tx", "m_c", "m_s", "bandwidth_b", "n_cpi"):
            value = getattr(self, name)
            if int(value) != value or int(value) < 1:
                raise ConfigError(f"{name} must be a positive integer, got: {value}")
            object.__setattr__(self, name, int(value))
        for name in ("p_t", "sigma2_nc", "sigma2_ns", "alpha2_hs", "alpha2_hc"):
            value = float(getattr(self, name))
            if not math.isfinite(value) or value <= 0.0:
                raise ConfigError(f"{name} must be strictly positive, got: {value}")
            object.__setattr__(self, name, value)

    @property
    def beta_s(self) -> float:
        """Sensing channel gain to noise ratio."""
        return self.alpha2_hs / self.sigma2_ns

    @property
    def beta_c(self) -> float:
        """Communication channel gain to noise ratio."""
        return self.alpha2_hc / self.sigma2_nc

    @property
    def n_samples(self) -> int:
        """Complex samples per CPI and antenna."""
        return 2 * self.bandwidth_b * self.n_cpi

    @property
    def n_res(self) -> int:
        """Resource elements per CPI."""
        return self.bandwidth_b * self.n_cpi

    @property
    def symbol_duration(self) -> float:
        """Symbol duration in units of the inverse symbol rate."""
        return 1.0 / self.bandwidth_b

    @property
    def channel_dim(self) -> int:
        """Dimension of the vectorized sensing channel."""
        return self.n_tx * self.m_s

    def clone(self, **kwargs) -> "SystemConfig":
        """Clone this object and optional overwrite field values with kwargs."""
        field_names = [field.name for field in fields(self.__class__)]
        params = {key: getattr(self, key) for key in field_names}
        params.update(kwargs)
        return self.__class__(**params)

    def with_res(self, u_res: int) -> "SystemConfig":
        """Return a config whose CPI holds exactly ``u_res`` resource elements."""
        return self.clone(bandwidth_b=1, n_cpi=u_res)

    def to_dict(self) -> dict:
        """Return as dict."""
        return asdict(self)

    @classmethod
    def from_db(
        cls,
        *,
        beta_c_db: float,
        beta_s_db: float,
        alpha2_hc: float = 1.0,
        alpha2_hs: float = 1.0,
        **kwargs,
    ) -> "SystemConfig":
        """Create from gain-to-noise ratios in dB instead of noise variances."""
        return cls(
            sigma2_nc=alpha2_hc / db_to_linear(beta_c_db),
            sigma2_ns=alpha2_hs / db_to_linear(beta_s_db),
            alpha2_hc=alpha2_hc,
            alpha2_hs=alpha2_hs,
            **kwargs,
        )


@dataclass(frozen=True)
class CorrelationSpec:
    """Scalar correlation coefficients of the sensing channel and waveform. Immutable.

    Whether a coefficient gives a positive definite matrix depends on the
    block sizes, so the full check happens when a channel model is built.
    """

    rho_s: float = 0.0
    rho_r: float = 0.0
    rho_sr: float = 0.0
    rho_x: float = 0.0

    def __post_init__(self):
        for name in ("rho_s", "rho_r", "rho_sr"):
            value = float(getattr(self, name))
            if not -1.0 < value < 1.0:
                raise ConfigError(f"{name} must be in (-1, 1), got: {value}")
            object.__setattr__(self, name, value)
        rho_x = float(self.rho_x)
        if not 0.0 <= rho_x < 1.0:
            raise ConfigError(f"rho_x must be in [0, 1), got: {rho_x}")
        object.__setattr__(self, "rho_x", rho_x)

    def clone(self, **kwargs) -> "CorrelationSpec":
        """Clone this object and optional overwrite field values with kwargs."""
        params = asdict(self)
        params.update(kwargs)
        return self.__class__(**params)

    def to_dict(self) -> dict:
        """Return as dict."""
        return asdict(self)
