"""Run an ISAC performance-limit experiment and write its CSV."""

from django.core.management.base import BaseCommand, CommandError, CommandParser

from allianceauth.services.hooks import get_extension_logger
from app_utils.logging import LoggerAddTag

from isaclimits import __title__
from isaclimits.core.regions import SweepMode
from isaclimits.core.waveform import Ensemble
from isaclimits.exceptions import ConfigError, NumericalError, RegionError
from isaclimits.experiments import (
    cmd_dump_waveform,
    cmd_oracle,
    cmd_region,
    cmd_sensing_rho,
    cmd_smi_mse,
    cmd_spatial,
    cmd_waveform_compare,
    load_config,
    write_experiment,
)

logger = LoggerAddTag(get_extension_logger(__name__), __title__)

EXIT_CONFIG_ERROR = 2
EXIT_NUMERICAL_ERROR = 3


def _ensemble(value: str) -> Ensemble:
    try:
        return Ensemble.from_name(value)
    except ConfigError as ex:
        raise CommandError(str(ex), returncode=EXIT_CONFIG_ERROR) from None


class Command(BaseCommand):
    help = "Compute communication and sensing performance limits of an ISAC system"

    def add_arguments(self, parser: CommandParser):
        subparsers = parser.add_subparsers(
            dest="subcommand", required=True, title="experiments"
        )
        commands = {
            "smi-mse": "MSE bound over SMI for several K and rho_s",
            "region": "CMI-SMI and CMI-MSE regions over resource splits",
            "waveform-compare": "Gaussian versus constant-modulus waveforms",
            "sensing-rho": "sensing performance over rho_s with K = N M_s",
            "oracle": "LMMSE estimation error next to the MSE bound",
            "spatial": "sensing performance over M_s with fixed K",
            "dump-waveform": "transmit samples of one waveform draw",
        }
        subs = {}
        for name, description in commands.items():
            sub = subparsers.add_parser(name, help=description)
            sub.add_argument("--config", help="JSON file with experiment parameters")
            sub.add_argument("--seed", type=int, help="master seed")
            sub.add_argument("--out", help="path of the CSV to write")
            sub.add_argument("--trials", type=int, help="Monte-Carlo trials")
            subs[name] = sub

        sub = subs["smi-mse"]
        sub.add_argument("--k-list", type=int, nargs="+")
        sub.add_argument("--rho-s-list", type=float, nargs="+")
        sub.add_argument("--smi-max", type=float, default=60.0)
        sub.add_argument("--smi-step", type=float, default=1.0)

        sub = subs["region"]
        sub.add_argument(
            "--mode",
            choices=[obj.value for obj in SweepMode],
            default=SweepMode.APPROX.value,
        )
        sub.add_argument("--u-isac-list", type=int, nargs="+")
        sub.add_argument("--rho-x-list", type=float, nargs="+")
        sub.add_argument("--points", type=int, help="grid points per curve")
        sub.add_argument("--saturation-fraction", type=float)

        sub = subs["waveform-compare"]
        sub.add_argument("--ensembles", type=_ensemble, nargs="+")
        sub.add_argument("--n-list", type=int, nargs="+")
        sub.add_argument("--m-c-list", type=int, nargs="+")
        sub.add_argument("--n-outer", type=int)
        sub.add_argument("--n-inner", type=int)
        sub.add_argument("--u-s-list", type=int, nargs="+")

        sub = subs["sensing-rho"]
        sub.add_argument("--rho-s-list", type=float, nargs="+")
        sub.add_argument("--u-s", type=int, default=100)

        sub = subs["oracle"]
        sub.add_argument("--u-s-list", type=int, nargs="+")
        sub.add_argument("--ensemble", type=_ensemble, default=Ensemble.GAUSSIAN)

        sub = subs["spatial"]
        sub.add_argument("--m-s-list", type=int, nargs="+")
        sub.add_argument("--u-s", type=int, default=100)

        sub = subs["dump-waveform"]
        sub.add_argument("--ensemble", type=_ensemble, default=Ensemble.GAUSSIAN)
        sub.add_argument("--u-s", type=int)

    def handle(self, *args, **options):
        subcommand = options["subcommand"]
        try:
            config = load_config(
                options.get("config"),
                seed=options.get("seed"),
                trials=options.get("trials"),
                output_path=options.get("out"),
            )
            table = self._run(subcommand, config, options)
            path = write_experiment(subcommand, config, table, options.get("out"))
        except ConfigError as ex:
            logger.warning("%s: invalid configuration: %s", subcommand, ex)
            raise CommandError(str(ex), returncode=EXIT_CONFIG_ERROR) from ex
        except (NumericalError, RegionError) as ex:
            logger.error("%s: numerical failure: %s", subcommand, ex)
            raise CommandError(str(ex), returncode=EXIT_NUMERICAL_ERROR) from ex
        self.stdout.write(
            self.style.SUCCESS(f"{subcommand}: wrote {len(table.rows)} rows to {path}")
        )

    @staticmethod
    def _run(subcommand: str, config, options: dict):
        if subcommand == "smi-mse":
            return cmd_smi_mse(
                config,
                k_list=options.get("k_list"),
                rho_s_list=options.get("rho_s_list"),
                smi_max=options["smi_max"],
                smi_step=options["smi_step"],
            )
        if subcommand == "region":
            return cmd_region(
                config,
                mode=SweepMode.from_name(options["mode"]),
                u_isac_list=options.get("u_isac_list"),
                rho_x_list=options.get("rho_x_list"),
                points=options.get("points"),
                saturation_fraction=options.get("saturation_fraction"),
            )
        if subcommand == "waveform-compare":
            return cmd_waveform_compare(
                config,
                ensembles=options.get("ensembles"),
                n_list=options.get("n_list"),
                m_c_list=options.get("m_c_list"),
                n_outer=options.get("n_outer"),
                n_inner=options.get("n_inner"),
                u_s_list=options.get("u_s_list"),
            )
        if subcommand == "sensing-rho":
            return cmd_sensing_rho(
                config, rho_s_list=options.get("rho_s_list"), u_s=options["u_s"]
            )
        if subcommand == "oracle":
            return cmd_oracle(
                config, u_s_list=options.get("u_s_list"), ensemble=options["ensemble"]
            )
        if subcommand == "spatial":
            return cmd_spatial(
                config, m_s_list=options.get("m_s_list"), u_s=options["u_s"]
            )
        if subcommand == "dump-waveform":
            return cmd_dump_waveform(
                config, ensemble=options["ensemble"], u_s=options.get("u_s")
            )
        raise CommandError(f"Unknown experiment: {subcommand}")
