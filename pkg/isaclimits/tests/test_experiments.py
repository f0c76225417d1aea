import json
import math
import os
import tempfile
from pathlib import Path
from unittest.mock import patch

import numpy as np

from app_utils.testing import NoSocketsTestCase

from isaclimits.app_settings import ISAC_DEFAULT_SEED, ISAC_DEFAULT_TRIALS
from isaclimits.core.regions import RegionLabel, SweepMode
from isaclimits.core.waveform import Ensemble, dump_csv
from isaclimits.exceptions import ConfigError
from isaclimits.experiments import (
    ExperimentTable,
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

MODULE_PATH = "isaclimits.experiments"


def write_config(folder: str, data) -> Path:
    path = Path(folder) / "config.json"
    path.write_text(json.dumps(data), encoding="utf-8")
    return path


class TestLoadConfig(NoSocketsTestCase):
    def test_should_use_defaults(self):
        # when
        config = load_config()
        # then
        self.assertEqual(config.system.n_tx, 4)
        self.assertEqual(config.system.m_s, 8)
        self.assertAlmostEqual(config.system.sigma2_nc, 0.01, places=15)
        self.assertAlmostEqual(config.system.sigma2_ns, 0.1, places=15)
        self.assertEqual(config.system.n_res, 10000)
        self.assertEqual(config.k, 16)
        self.assertEqual(config.u_isac, 10000)
        self.assertEqual(config.seed, ISAC_DEFAULT_SEED)
        self.assertEqual(config.trials, ISAC_DEFAULT_TRIALS)
        self.assertEqual(config.correlation.rho_sr, 0.2)

    def test_should_apply_overrides_over_file_values(self):
        with tempfile.TemporaryDirectory() as folder:
            # given
            path = write_config(folder, {"seed": 7, "trials": 50, "n_tx": 2, "k": 3})
            # when
            config = load_config(path, seed=11, trials=None)
        # then
        self.assertEqual(config.seed, 11)
        self.assertEqual(config.trials, 50)
        self.assertEqual(config.system.channel_dim, 16)
        self.assertEqual(config.k, 3)

    def test_should_accept_integer_valued_floats(self):
        config = load_config(u_isac=200.0, bandwidth_b=2)
        self.assertEqual(config.system.n_cpi, 100)
        self.assertIsInstance(config.u_isac, int)

    def test_should_reject_invalid_files(self):
        with tempfile.TemporaryDirectory() as folder:
            broken = Path(folder) / "broken.json"
            broken.write_text("{not json", encoding="utf-8")
            cases = [
                Path(folder) / "missing.json",
                broken,
                write_config(folder, [1, 2, 3]),
            ]
            for path in cases:
                with self.subTest(path=path.name):
                    with self.assertRaises(ConfigError):
                        load_config(path)

    def test_should_reject_invalid_values(self):
        cases = [
            {"colour": "blue"},
            {"n_tx": 1.5},
            {"n_tx": True},
            {"m_s": "many"},
            {"k": 33},
            {"u_isac": 10, "bandwidth_b": 3},
            {"rho_s": 1.0},
            {"rho_x": -0.1},
            {"seed": -1},
            {"trials": 0},
            {"rho_sr": 0.9},
        ]
        for params in cases:
            with self.subTest(params=params):
                with self.assertRaises(ConfigError):
                    load_config(**params)

    def test_should_give_independent_streams(self):
        config = load_config(seed=3)
        first = np.random.default_rng(config.stream_seed(0)).random()
        second = np.random.default_rng(config.stream_seed(1)).random()
        self.assertNotEqual(first, second)


class TestWriteExperiment(NoSocketsTestCase):
    @patch(MODULE_PATH + ".version_string", lambda: "v1.0.0")
    def test_should_write_csv_and_sidecar(self):
        # given
        config = load_config(seed=5)
        table = ExperimentTable(
            header=["u_c", "mode", "value"],
            rows=[[1, SweepMode.EXACT, 0.1], [2, SweepMode.EXACT, 1 / 3]],
            params={"ensemble": Ensemble.CONSTANT_MODULUS},
        )
        with tempfile.TemporaryDirectory() as folder:
            target = Path(folder) / "out" / "result.csv"
            # when
            path = write_experiment("region", config, table, target)
            # then
            lines = path.read_text(encoding="utf-8").splitlines()
            meta_path = Path(folder) / "out" / "result.csv.meta.json"
            meta = json.loads(meta_path.read_text(encoding="utf-8"))
            first_meta = meta_path.read_bytes()
            write_experiment("region", config, table, target)
            second_meta = meta_path.read_bytes()
        self.assertEqual(lines, ["u_c,mode,value", "1,exact,0.1", "2,exact,0.333333333333"])
        self.assertEqual(meta["command"], "region")
        self.assertEqual(meta["seed"], 5)
        self.assertEqual(meta["version"], "v1.0.0")
        self.assertEqual(meta["params"]["command"]["ensemble"], "constant_modulus")
        self.assertEqual(meta["params"]["config"]["system"]["n_tx"], 4)
        self.assertEqual(len(meta["params_hash"]), 32)
        self.assertEqual(first_meta, second_meta)


class TestCmdSmiMse(NoSocketsTestCase):
    def test_should_tabulate_default_grid(self):
        # when
        table = cmd_smi_mse(load_config())
        # then
        self.assertEqual(table.header, ["k", "rho_s", "smi_bits", "mse_bound"])
        self.assertEqual(len(table.rows), 4 * 61)
        self.assertEqual(sorted(set(table.column("k"))), [4, 8, 12, 16])

    def test_should_start_at_prior_and_decrease(self):
        # when
        table = cmd_smi_mse(load_config(), k_list=[4], rho_s_list=[0.3])
        # then
        mse = table.column("mse_bound")
        self.assertAlmostEqual(mse[0], 0.6517**0.25, places=12)
        self.assertAlmostEqual(mse[25], 0.0118, delta=0.0001)
        self.assertTrue(all(b < a for a, b in zip(mse, mse[1:])))

    def test_should_give_lower_bound_for_stronger_correlation(self):
        table = cmd_smi_mse(
            load_config(), k_list=[8], rho_s_list=[0.0, 0.6], smi_max=10
        )
        independent = [row[3] for row in table.rows if row[1] == 0.0]
        correlated = [row[3] for row in table.rows if row[1] == 0.6]
        self.assertTrue(all(b < a for a, b in zip(independent, correlated)))

    def test_should_reject_invalid_grid(self):
        with self.assertRaises(ConfigError):
            cmd_smi_mse(load_config(), smi_step=0.0)


class TestCmdRegion(NoSocketsTestCase):
    def test_should_label_default_region(self):
        # when
        table = cmd_region(load_config())
        # then
        self.assertEqual(len(table.rows), 51)
        regions = table.column("region")
        self.assertIs(regions[0], RegionLabel.COMMUNICATION_SATURATION)
        self.assertIs(regions[-1], RegionLabel.SENSING_SATURATION)
        self.assertIn(RegionLabel.TRADE_OFF, regions)
        self.assertEqual(table.column("u_c")[-1], 10000)
        self.assertEqual(table.column("smi_bits")[-1], 0.0)
        self.assertEqual(set(table.column("mode")), {SweepMode.APPROX})

    def test_should_sweep_all_budgets_and_correlations(self):
        # when
        table = cmd_region(
            load_config(), u_isac_list=[5000, 10000], rho_x_list=[0.0, 0.5], points=11
        )
        # then
        self.assertEqual(len(table.rows), 44)
        cmi = {
            (row[0], row[1]): row[4] for row in table.rows if row[2] == row[0] // 2
        }
        self.assertEqual(cmi[(10000, 0.0)], 2 * cmi[(5000, 0.0)])
        self.assertNotEqual(cmi[(10000, 0.5)], cmi[(10000, 0.0)])

    def test_should_sweep_exact_mode(self):
        config = load_config(n_tx=2, m_s=2, m_c=2, u_isac=40)
        table = cmd_region(config, mode="exact", points=11)
        smi = table.column("smi_bits")
        self.assertTrue(all(b <= a + 1e-9 * smi[0] for a, b in zip(smi, smi[1:])))


class TestCmdWaveformCompare(NoSocketsTestCase):
    def test_should_compare_ensembles_for_single_antenna(self):
        # when
        table = cmd_waveform_compare(
            load_config(trials=1000), n_list=[1], n_outer=200, n_inner=200
        )
        # then
        self.assertEqual(len(table.rows), 2)
        self.assertEqual(
            table.column("ensemble"), [Ensemble.GAUSSIAN, Ensemble.CONSTANT_MODULUS]
        )
        self.assertEqual(table.column("rho_x"), [0.0, 0.0])
        self.assertEqual(table.column("u_s"), [4, 4])
        reference = table.column("cmi_gaussian_bits_per_re")
        self.assertEqual(reference[0], reference[1])
        gaussian_smi, constant_smi = table.column("smi_bits")
        self.assertLess(table.column("smi_std_error")[1], 1e-12)
        self.assertGreater(constant_smi, gaussian_smi)

    def test_should_accept_ensemble_names(self):
        table = cmd_waveform_compare(
            load_config(trials=100),
            ensembles=["cm"],
            n_list=[2],
            m_c_list=[1, 2],
            n_outer=100,
            n_inner=100,
        )
        self.assertEqual(table.column("m_c"), [1, 2])

    def test_should_write_one_row_per_sensing_resource_count(self):
        # when
        table = cmd_waveform_compare(
            load_config(trials=100),
            n_list=[1, 2],
            n_outer=100,
            n_inner=100,
            u_s_list=[4, 16],
        )
        # then
        self.assertEqual(table.column("n_tx"), [1, 1, 1, 1, 2, 2, 2, 2])
        self.assertEqual(table.column("u_s"), [4, 16, 4, 16, 4, 16, 4, 16])
        cmi = table.column("cmi_bits_per_re")
        self.assertEqual(cmi[0], cmi[1])
        smi = table.column("smi_bits")
        self.assertGreater(smi[1], smi[0])
        self.assertEqual(table.params["u_s_list"], [4, 16])

    def test_should_shrink_sensing_gap_with_more_resource_elements(self):
        # given
        u_s_list = [2, 8, 32]
        # when
        table = cmd_waveform_compare(
            load_config(trials=4000),
            n_list=[1],
            n_outer=200,
            n_inner=200,
            u_s_list=u_s_list,
        )
        # then
        keys = zip(table.column("ensemble"), table.column("u_s"))
        smi = dict(zip(keys, table.column("smi_bits")))
        gaps = [
            smi[(Ensemble.CONSTANT_MODULUS, u_s)] - smi[(Ensemble.GAUSSIAN, u_s)]
            for u_s in u_s_list
        ]
        self.assertGreater(gaps[0], gaps[1])
        self.assertGreater(gaps[1], gaps[2])
        self.assertGreater(gaps[2], 0.0)

    def test_should_close_communication_gap_with_more_transmit_antennas(self):
        # when
        table = cmd_waveform_compare(
            load_config(trials=100), n_outer=10**4, n_inner=10**4
        )
        # then
        self.assertEqual(table.column("n_tx"), [1, 1, 2, 2, 4, 4, 8, 8])
        cmi = table.column("cmi_bits_per_re")
        std_error = table.column("cmi_std_error")
        gaps = []
        for idx in range(0, len(cmi), 2):
            gaussian, constant = cmi[idx], cmi[idx + 1]
            gap_error = math.hypot(std_error[idx], std_error[idx + 1]) / gaussian
            gaps.append(((gaussian - constant) / gaussian, gap_error))
        for (current, _), (following, _) in zip(gaps, gaps[1:]):
            self.assertLess(following, current)
        last_gap, last_error = gaps[-1]
        self.assertLessEqual(abs(last_gap), 0.05 + 3.0 * last_error)

    def test_should_use_configured_waveform_correlation(self):
        # given
        white = load_config(trials=200)
        correlated = load_config(trials=200, rho_x=0.5)
        params = {"n_list": [4], "n_outer": 200, "n_inner": 200}
        # when
        white_table = cmd_waveform_compare(white, ensembles=["gaussian"], **params)
        correlated_table = cmd_waveform_compare(
            correlated, ensembles=["gaussian_correlated"], **params
        )
        # then
        self.assertEqual(white_table.column("rho_x"), [0.0])
        self.assertEqual(correlated_table.column("rho_x"), [0.5])
        for column in ("cmi_gaussian_bits_per_re", "cmi_bits_per_re", "smi_bits"):
            self.assertNotAlmostEqual(
                white_table.column(column)[0],
                correlated_table.column(column)[0],
                places=6,
            )

    def test_should_keep_constant_modulus_white_under_correlation(self):
        # when
        table = cmd_waveform_compare(
            load_config(trials=100, rho_x=0.5), n_list=[2], n_outer=100, n_inner=100
        )
        # then
        self.assertEqual(table.column("rho_x"), [0.5, 0.0])

    def test_should_reject_correlated_ensemble_without_correlation(self):
        with self.assertRaises(ConfigError):
            cmd_waveform_compare(
                load_config(trials=100),
                ensembles=["gaussian_correlated"],
                n_list=[4],
                n_outer=100,
                n_inner=100,
            )

    def test_should_reject_invalid_sensing_resource_count(self):
        with self.assertRaises(ConfigError):
            cmd_waveform_compare(
                load_config(trials=100), n_list=[1], u_s_list=[0], n_outer=100
            )


class TestCmdSensingRho(NoSocketsTestCase):
    def test_should_lose_information_with_correlation(self):
        # when
        table = cmd_sensing_rho(load_config())
        # then
        self.assertEqual(table.column("rho_s"), [0.0, 0.2, 0.4, 0.6, 0.8])
        h_s_bits = table.column("h_s_bits")
        smi = table.column("smi_bits")
        self.assertAlmostEqual(h_s_bits[0], 0.0, places=9)
        self.assertTrue(all(b < a for a, b in zip(h_s_bits, h_s_bits[1:])))
        self.assertTrue(all(b < a for a, b in zip(smi, smi[1:])))
        mse = table.column("mse_bound")
        self.assertLessEqual(max(mse) / min(mse), 1.1)
        for value in table.column("mse_approx"):
            self.assertAlmostEqual(value, 0.1 / 200, places=15)
        for exact, approx in zip(smi, table.column("smi_approx_bits")):
            self.assertLessEqual(abs(approx - exact), 0.02 * exact)


class TestCmdOracle(NoSocketsTestCase):
    def test_should_stay_above_bound(self):
        # when
        table = cmd_oracle(load_config(trials=300), u_s_list=[1, 4])
        # then
        self.assertEqual(table.column("u_s"), [1, 4])
        self.assertEqual(table.column("trials"), [300, 300])
        for _, _, empirical, bound, std_error in table.rows:
            self.assertGreaterEqual(empirical + 3 * std_error, bound)
        bounds = table.column("bound")
        self.assertLess(bounds[1], bounds[0])

    def test_should_not_depend_on_thread_count(self):
        config = load_config(trials=200, n_tx=2, m_s=2, k=2)
        with patch.dict(os.environ, {"ISAC_THREADS": "1"}):
            serial = cmd_oracle(config, u_s_list=[2])
        with patch.dict(os.environ, {"ISAC_THREADS": "8"}):
            parallel = cmd_oracle(config, u_s_list=[2])
        self.assertEqual(serial.rows, parallel.rows)

    def test_should_reject_correlated_constant_modulus(self):
        with self.assertRaises(ConfigError):
            cmd_oracle(load_config(rho_x=0.3), ensemble=Ensemble.CONSTANT_MODULUS)


class TestCmdSpatial(NoSocketsTestCase):
    def test_should_keep_approximation_for_more_antennas(self):
        # when
        table = cmd_spatial(load_config(), m_s_list=[4, 8])
        # then
        self.assertEqual(table.column("k"), [16, 16])
        approx = table.column("smi_approx_bits")
        self.assertAlmostEqual(approx[0], approx[1], places=9)
        for value in table.column("smi_bits"):
            self.assertGreater(value, 0.0)

    def test_should_reject_too_few_channel_entries(self):
        with self.assertRaises(ConfigError):
            cmd_spatial(load_config(), m_s_list=[2])


class TestCmdDumpWaveform(NoSocketsTestCase):
    def test_should_return_one_row_per_sample(self):
        # when
        table = cmd_dump_waveform(load_config(), Ensemble.CONSTANT_MODULUS, u_s=3)
        # then
        self.assertEqual(table.header[:2], ["re_0", "im_0"])
        self.assertEqual(len(table.header), 8)
        self.assertEqual(len(table.rows), 6)
        first = table.rows[0]
        self.assertAlmostEqual(first[0] ** 2 + first[1] ** 2, 1.0, places=12)

    def test_should_repeat_draw_for_same_seed(self):
        first = cmd_dump_waveform(load_config(seed=9), u_s=2)
        second = cmd_dump_waveform(load_config(seed=9), u_s=2)
        self.assertEqual(first.rows, second.rows)

    @patch(MODULE_PATH + ".version_string", lambda: "v1.0.0")
    def test_should_write_samples_through_waveform_writer(self):
        # given
        table = cmd_dump_waveform(load_config(), Ensemble.CONSTANT_MODULUS, u_s=2)
        with tempfile.TemporaryDirectory() as folder:
            target = Path(folder) / "dump.csv"
            # when
            with patch(MODULE_PATH + ".dump_csv", wraps=dump_csv) as mock_dump_csv:
                write_experiment("dump-waveform", load_config(), table, target)
            # then
            lines = target.read_text(encoding="utf-8").splitlines()
        mock_dump_csv.assert_called_once_with(table.waveform, target)
        self.assertEqual(lines[0], "re_0,im_0,re_1,im_1,re_2,im_2,re_3,im_3")
        self.assertEqual(len(lines), 1 + 4)
