"""Experiment configuration and the experiment commands.

Each ``cmd_*`` function is a pure function of its configuration and
returns an :class:`ExperimentTable`. Writing CSV and metadata is left
to :func:`write_experiment`.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, List, Optional, Sequence

import numpy as np

from allianceauth.services.hooks import get_extension_logger
from app_utils.logging import LoggerAddTag

from . import __title__
from .app_settings import ISAC_DEFAULT_SEED, ISAC_DEFAULT_TRIALS
from .core.covariance import build_channel_model, build_equicorrelation
from .core.metrics import (
    cmi_monte_carlo,
    cmi_per_re,
    draw_comm_channel,
    ensemble_average_smi,
    mse_approx,
    mse_bound,
    smi_approx,
    smi_for_model,
)
from .core.oracle import lmmse_empirical_mse
from .core.regions import (
    SweepMode,
    classify_regions,
    default_grid,
    point_labels,
    sweep_region,
)
from .core.system import CorrelationSpec, SystemConfig
from .core.waveform import (
    Ensemble,
    WaveformMatrix,
    check_ensemble,
    dump_csv,
    generate,
    trial_seed,
    waveform_rows,
)
from .exceptions import ConfigError
from .helpers import params_hash, store_json, version_string, write_csv

logger = LoggerAddTag(get_extension_logger(__name__), __title__)

CONFIG_DEFAULTS = {
    "n_tx": 4,
    "m_c": 4,
    "m_s": 8,
    "bandwidth_b": 1,
    "p_t": 1.0,
    "alpha2_hs": 1.0,
    "alpha2_hc": 1.0,
    "beta_c_db": 20.0,
    "beta_s_db": 10.0,
    "rho_s": 0.3,
    "rho_r": 0.3,
    "rho_sr": 0.2,
    "rho_x": 0.0,
    "k": None,
    "u_isac": 10000,
    "seed": None,
    "trials": None,
    "output_path": None,
}
INTEGER_KEYS = {"n_tx", "m_c", "m_s", "bandwidth_b", "k", "u_isac", "seed", "trials"}

# seed offsets of the independent random streams of one experiment
CHANNEL_STREAM = 0
WAVEFORM_STREAM = 1
ORACLE_STREAM = 2
MONTE_CARLO_STREAM = 3


@dataclass(frozen=True)
class ExperimentConfig:
    """All parameters of one experiment run. Immutable."""

    system: SystemConfig
    correlation: CorrelationSpec
    k: int
    u_isac: int
    seed: int
    trials: int
    output_path: Optional[str] = None

    def __post_init__(self):
        if not 1 <= self.k <= self.system.channel_dim:
            raise ConfigError(
                f"k must be between 1 and {self.system.channel_dim}, got: {self.k}"
            )
        if self.u_isac < 1:
            raise ConfigError(f"u_isac must be at least 1, got: {self.u_isac}")
        if self.seed < 0:
            raise ConfigError(f"seed must not be negative, got: {self.seed}")
        if self.trials < 1:
            raise ConfigError(f"trials must be at least 1, got: {self.trials}")
        # rejects correlation coefficients without a positive definite R_H
        build_channel_model(self.system, self.correlation, self.k)

    @property
    def sensing_model(self):
        """Channel model of the configured system."""
        return build_channel_model(self.system, self.correlation, self.k)

    def stream_seed(self, stream: int) -> np.random.SeedSequence:
        """Return the sub-seed of one random stream of this experiment."""
        return trial_seed(self.seed, stream)

    def to_dict(self) -> dict:
        """Return as dict."""
        return {
            "system": self.system.to_dict(),
            "correlation": self.correlation.to_dict(),
            "k": self.k,
            "u_isac": self.u_isac,
            "seed": self.seed,
            "trials": self.trials,
            "output_path": self.output_path,
        }

    @classmethod
    def from_dict(cls, params: dict) -> "ExperimentConfig":
        """Create from the flat config schema. Missing keys take their defaults.

        Raises:
            ConfigError: On unknown keys or invalid values
        """
        unknown = sorted(set(params) - set(CONFIG_DEFAULTS))
        if unknown:
            raise ConfigError(f"Unknown config keys: {', '.join(unknown)}")
        values = dict(CONFIG_DEFAULTS)
        values.update({key: value for key, value in params.items() if value is not None})
        for key in INTEGER_KEYS:
            if values[key] is not None:
                values[key] = _as_int(key, values[key])
        if values["u_isac"] % values["bandwidth_b"] != 0:
            raise ConfigError(
                f"u_isac={values['u_isac']} is not a multiple of "
                f"bandwidth_b={values['bandwidth_b']}"
            )
        system = SystemConfig.from_db(
            beta_c_db=_as_float("beta_c_db", values["beta_c_db"]),
            beta_s_db=_as_float("beta_s_db", values["beta_s_db"]),
            alpha2_hc=_as_float("alpha2_hc", values["alpha2_hc"]),
            alpha2_hs=_as_float("alpha2_hs", values["alpha2_hs"]),
            n_tx=values["n_tx"],
            m_c=values["m_c"],
            m_s=values["m_s"],
            bandwidth_b=values["bandwidth_b"],
            n_cpi=values["u_isac"] // values["bandwidth_b"],
            p_t=_as_float("p_t", values["p_t"]),
        )
        correlation = CorrelationSpec(
            rho_s=_as_float("rho_s", values["rho_s"]),
            rho_r=_as_float("rho_r", values["rho_r"]),
            rho_sr=_as_float("rho_sr", values["rho_sr"]),
            rho_x=_as_float("rho_x", values["rho_x"]),
        )
        k = values["k"] if values["k"] is not None else max(1, system.channel_dim // 2)
        return cls(
            system=system,
            correlation=correlation,
            k=k,
            u_isac=values["u_isac"],
            seed=ISAC_DEFAULT_SEED if values["seed"] is None else values["seed"],
            trials=ISAC_DEFAULT_TRIALS if values["trials"] is None else values["trials"],
            output_path=values["output_path"],
        )


def _as_int(key: str, value: Any) -> int:
    if isinstance(value, bool):
        raise ConfigError(f"{key} must be an integer, got: {value!r}")
    try:
        number = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key} must be an integer, got: {value!r}") from None
    if not number.is_integer():
        raise ConfigError(f"{key} must be an integer, got: {value!r}")
    return int(number)


def _as_float(key: str, value: Any) -> float:
    if isinstance(value, bool):
        raise ConfigError(f"{key} must be a number, got: {value!r}")
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key} must be a number, got: {value!r}") from None


def load_config(path=None, **overrides) -> ExperimentConfig:
    """Load an experiment config from a JSON file and apply overrides.

    Overrides with the value ``None`` are ignored, so unset command line
    flags keep the file values.

    Raises:
        ConfigError: If the file cannot be read or holds invalid values
    """
    params = {}
    if path:
        path = Path(path)
        try:
            with path.open("r", encoding="utf-8") as file:
                params = json.load(file)
        except OSError as ex:
            raise ConfigError(f"Can not read config file {path}: {ex}") from None
        except json.JSONDecodeError as ex:
            raise ConfigError(f"Invalid JSON in config file {path}: {ex}") from None
        if not isinstance(params, dict):
            raise ConfigError(f"Config file {path} must hold a JSON object")
    params.update({key: value for key, value in overrides.items() if value is not None})
    config = ExperimentConfig.from_dict(params)
    logger.debug("Loaded experiment config: %s", config.to_dict())
    return config


@dataclass
class ExperimentTable:
    """Header and rows of a CSV result, plus the parameters behind them."""

    header: List[str]
    rows: List[list] = field(default_factory=list)
    params: dict = field(default_factory=dict)
    waveform: Optional[WaveformMatrix] = None

    def column(self, name: str) -> list:
        """Return the values of one column."""
        idx = self.header.index(name)
        return [row[idx] for row in self.rows]


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {key: _jsonable(obj) for key, obj in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(obj) for obj in value]
    if isinstance(value, Ensemble) or isinstance(value, SweepMode):
        return value.value
    if isinstance(value, np.generic):
        return value.item()
    return value


def write_experiment(
    command: str, config: ExperimentConfig, table: ExperimentTable, path=None
) -> Path:
    """Write the CSV of an experiment and its ``.meta.json`` sidecar.

    The sidecar holds no timestamp, so equal runs give identical files.
    """
    path = Path(path or config.output_path or f"{command}.csv")
    if table.waveform is not None:
        dump_csv(table.waveform, path)
    else:
        write_csv(path, table.header, table.rows)
    params = _jsonable({"config": config.to_dict(), "command": table.params})
    meta = {
        "command": command,
        "params": params,
        "seed": config.seed,
        "version": version_string(),
        "params_hash": params_hash(params),
    }
    store_json(meta, path.with_name(path.name + ".meta.json"))
    logger.info("%s: wrote %d rows to %s", command, len(table.rows), path)
    return path


def cmd_smi_mse(
    config: ExperimentConfig,
    k_list: Optional[Sequence[int]] = None,
    rho_s_list: Optional[Sequence[float]] = None,
    smi_max: float = 60.0,
    smi_step: float = 1.0,
) -> ExperimentTable:
    """Tabulate the MSE bound over an SMI grid for each ``(K, rho_s)``."""
    k_list = list(k_list or [4, 8, 12, 16])
    rho_s_list = list(rho_s_list or [config.correlation.rho_s])
    if smi_step <= 0.0 or smi_max < 0.0:
        raise ConfigError("smi_max must not be negative and smi_step must be positive")
    smi_grid = np.arange(0.0, smi_max + smi_step / 2.0, smi_step)
    table = ExperimentTable(
        header=["k", "rho_s", "smi_bits", "mse_bound"],
        params={
            "k_list": k_list,
            "rho_s_list": rho_s_list,
            "smi_max": smi_max,
            "smi_step": smi_step,
        },
    )
    for k in k_list:
        for rho_s in rho_s_list:
            r_s = build_equicorrelation(k, config.system.alpha2_hs, rho_s, "rho_s")
            for smi in smi_grid:
                table.rows.append([k, rho_s, float(smi), mse_bound(smi, r_s, k)])
    return table


def cmd_region(
    config: ExperimentConfig,
    mode: SweepMode = SweepMode.APPROX,
    u_isac_list: Optional[Sequence[int]] = None,
    rho_x_list: Optional[Sequence[float]] = None,
    points: Optional[int] = None,
    saturation_fraction: Optional[float] = None,
) -> ExperimentTable:
    """Sweep the communication-sensing region for each ``u_isac`` and ``rho_x``.

    All curves share one communication channel and one waveform stream,
    so curves of different sizes are comparable point by point.
    """
    mode = mode if isinstance(mode, SweepMode) else SweepMode.from_name(mode)
    u_isac_list = list(u_isac_list or [config.u_isac])
    rho_x_list = list(rho_x_list or [config.correlation.rho_x])
    table = ExperimentTable(
        header=[
            "u_isac",
            "rho_x",
            "u_c",
            "u_s",
            "cmi_bits",
            "smi_bits",
            "mse_bound",
            "mode",
            "region",
        ],
        params={
            "mode": mode,
            "u_isac_list": u_isac_list,
            "rho_x_list": rho_x_list,
            "points": points,
            "saturation_fraction": saturation_fraction,
        },
    )
    h_c = draw_comm_channel(config.system, config.stream_seed(CHANNEL_STREAM))
    model = config.sensing_model
    for u_isac in u_isac_list:
        cfg = config.system.with_res(u_isac)
        for rho_x in rho_x_list:
            corr = config.correlation.clone(rho_x=rho_x)
            curve = sweep_region(
                cfg,
                corr,
                h_c,
                model,
                default_grid(u_isac, points),
                mode,
                seed=config.stream_seed(WAVEFORM_STREAM),
            )
            labels = point_labels(curve, classify_regions(curve, saturation_fraction))
            for point, label in zip(curve.points, labels):
                table.rows.append(
                    [
                        u_isac,
                        rho_x,
                        point.u_c,
                        point.u_s,
                        point.cmi_bits,
                        point.smi_bits,
                        point.mse_bound,
                        mode,
                        label,
                    ]
                )
    return table


def cmd_waveform_compare(
    config: ExperimentConfig,
    ensembles: Optional[Iterable] = None,
    n_list: Optional[Sequence[int]] = None,
    m_c_list: Optional[Sequence[int]] = None,
    n_outer: Optional[int] = None,
    n_inner: Optional[int] = None,
    u_s_list: Optional[Sequence[int]] = None,
) -> ExperimentTable:
    """Compare waveform ensembles in communication and sensing.

    For each antenna setup every ensemble sees the same communication
    channel. Gaussian ensembles use the configured ``rho_x``, the
    constant-modulus ensemble is always spatially white. Sensing uses
    ``K = N M_s / 2`` parameters and writes one row per entry of
    ``u_s_list``. The CMI does not depend on ``u_s`` and repeats across
    those rows.
    """
    ensembles = [
        obj if isinstance(obj, Ensemble) else Ensemble.from_name(obj)
        for obj in (ensembles or [Ensemble.GAUSSIAN, Ensemble.CONSTANT_MODULUS])
    ]
    n_list = list(n_list or [1, 2, 4, 8])
    m_c_list = list(m_c_list or [1])
    u_s_list = list(u_s_list or [4])
    if min(u_s_list) < 1:
        raise ConfigError(f"u_s values must be positive, got: {u_s_list}")
    n_outer = n_outer or config.trials
    n_inner = n_inner or config.trials
    rho_x = config.correlation.rho_x
    table = ExperimentTable(
        header=[
            "n_tx",
            "m_c",
            "ensemble",
            "rho_x",
            "cmi_bits_per_re",
            "cmi_std_error",
            "cmi_gaussian_bits_per_re",
            "u_s",
            "smi_bits",
            "smi_std_error",
        ],
        params={
            "ensembles": ensembles,
            "n_list": n_list,
            "m_c_list": m_c_list,
            "n_outer": n_outer,
            "n_inner": n_inner,
            "u_s_list": u_s_list,
        },
    )
    for n_tx in n_list:
        ensemble_rho = {}
        for ensemble in ensembles:
            rho = 0.0 if ensemble is Ensemble.CONSTANT_MODULUS else rho_x
            ensemble_rho[ensemble] = rho
            check_ensemble(ensemble, n_tx, rho)
        for m_c in m_c_list:
            cfg = config.system.clone(n_tx=n_tx, m_c=m_c)
            h_c = draw_comm_channel(cfg, config.stream_seed(CHANNEL_STREAM))
            model = build_channel_model(
                cfg, config.correlation, max(1, cfg.channel_dim // 2)
            )
            for ensemble, rho in ensemble_rho.items():
                reference = cmi_per_re(cfg, h_c, rho)
                cmi = cmi_monte_carlo(
                    cfg,
                    h_c,
                    ensemble,
                    n_outer,
                    n_inner,
                    config.stream_seed(MONTE_CARLO_STREAM),
                    rho_x=rho,
                )
                for u_s in u_s_list:
                    smi = ensemble_average_smi(
                        ensemble,
                        model,
                        cfg.with_res(u_s),
                        config.trials,
                        config.stream_seed(WAVEFORM_STREAM),
                        rho_x=rho,
                    )
                    table.rows.append(
                        [
                            n_tx,
                            m_c,
                            ensemble,
                            rho,
                            cmi.value,
                            cmi.std_error,
                            reference,
                            u_s,
                            smi.value,
                            smi.std_error,
                        ]
                    )
    return table


def cmd_sensing_rho(
    config: ExperimentConfig,
    rho_s_list: Optional[Sequence[float]] = None,
    u_s: int = 100,
) -> ExperimentTable:
    """Sensing performance over ``rho_s`` when every channel entry is a parameter.

    One waveform draw is shared by all rows.
    """
    rho_s_list = list(rho_s_list or [0.0, 0.2, 0.4, 0.6, 0.8])
    cfg = config.system.with_res(u_s)
    wave = generate(
        Ensemble.GAUSSIAN,
        cfg,
        config.correlation.rho_x,
        config.stream_seed(WAVEFORM_STREAM),
    )
    k = cfg.channel_dim
    table = ExperimentTable(
        header=[
            "rho_s",
            "h_s_bits",
            "smi_bits",
            "mse_bound",
            "smi_approx_bits",
            "mse_approx",
        ],
        params={"rho_s_list": rho_s_list, "u_s": u_s},
    )
    for rho_s in rho_s_list:
        model = build_channel_model(cfg, config.correlation.clone(rho_s=rho_s), k)
        smi = smi_for_model(wave, model, cfg)
        table.rows.append(
            [
                rho_s,
                model.r_s_logdet2(),
                smi,
                mse_bound(smi, model.r_s, k),
                smi_approx(cfg, model.r_s, k, u_s),
                mse_approx(cfg, u_s, model.r_s),
            ]
        )
    return table


def cmd_oracle(
    config: ExperimentConfig,
    u_s_list: Optional[Sequence[int]] = None,
    ensemble: Ensemble = Ensemble.GAUSSIAN,
) -> ExperimentTable:
    """Compare the LMMSE estimation error with the MSE bound for each ``u_s``."""
    u_s_list = list(u_s_list or [1, 2, 4, 8])
    rho_x = config.correlation.rho_x
    ensemble = check_ensemble(ensemble, config.system.n_tx, rho_x)
    model = config.sensing_model
    table = ExperimentTable(
        header=["u_s", "trials", "empirical_mse", "bound", "std_error"],
        params={"u_s_list": u_s_list, "ensemble": ensemble},
    )
    for u_s in u_s_list:
        cfg = config.system.with_res(u_s)
        wave = generate(ensemble, cfg, rho_x, config.stream_seed(WAVEFORM_STREAM))
        result = lmmse_empirical_mse(
            wave, model, cfg, config.trials, config.stream_seed(ORACLE_STREAM)
        )
        table.rows.append(
            [u_s, result.trials, result.empirical_mse, result.bound, result.std_error]
        )
    return table


def cmd_spatial(
    config: ExperimentConfig,
    m_s_list: Optional[Sequence[int]] = None,
    u_s: int = 100,
) -> ExperimentTable:
    """Sensing performance for a fixed ``K`` and a growing number of sensing antennas.

    Extra antennas only add channel entries that are not of interest.
    """
    m_s_list = list(m_s_list or [4, 8, 16, 32])
    too_small = [m_s for m_s in m_s_list if config.system.n_tx * m_s < config.k]
    if too_small:
        raise ConfigError(f"M_s values {too_small} give fewer than k={config.k} entries")
    base = config.system.with_res(u_s)
    wave = generate(
        Ensemble.GAUSSIAN,
        base,
        config.correlation.rho_x,
        config.stream_seed(WAVEFORM_STREAM),
    )
    table = ExperimentTable(
        header=["m_s", "k", "smi_bits", "smi_approx_bits", "mse_bound"],
        params={"m_s_list": m_s_list, "u_s": u_s},
    )
    for m_s in m_s_list:
        cfg = base.clone(m_s=m_s)
        model = build_channel_model(cfg, config.correlation, config.k)
        smi = smi_for_model(wave, model, cfg)
        table.rows.append(
            [
                m_s,
                config.k,
                smi,
                smi_approx(cfg, model.r_s, config.k, u_s),
                mse_bound(smi, model.r_s, config.k),
            ]
        )
    return table


def cmd_dump_waveform(
    config: ExperimentConfig,
    ensemble: Ensemble = Ensemble.GAUSSIAN,
    u_s: Optional[int] = None,
) -> ExperimentTable:
    """Return the transmit samples of one waveform draw, one row per sample."""
    u_s = u_s or config.u_isac
    cfg = config.system.with_res(u_s)
    wave = generate(
        ensemble, cfg, config.correlation.rho_x, config.stream_seed(WAVEFORM_STREAM)
    )
    header, rows = waveform_rows(wave)
    return ExperimentTable(
        header=header,
        rows=rows,
        params={"ensemble": wave.ensemble_tag, "u_s": u_s},
        waveform=wave,
    )
