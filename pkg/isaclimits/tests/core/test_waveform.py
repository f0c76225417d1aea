import csv
import tempfile
from pathlib import Path

import numpy as np

from app_utils.testing import NoSocketsTestCase

from isaclimits.core.covariance import build_equicorrelation
from isaclimits.core.waveform import (
    Ensemble,
    WaveformMatrix,
    draw_symbols,
    dump_csv,
    gen_constant_modulus,
    gen_gaussian,
    generate,
    trial_seed,
)
from isaclimits.exceptions import ConfigError
from isaclimits.tests.factories import SystemConfigFactory


def sample_covariance(x: np.ndarray) -> np.ndarray:
    return x.conj().T @ x / x.shape[0]


def frobenius_relative(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


class TestGenGaussian(NoSocketsTestCase):
    def test_should_have_expected_shape_and_tag(self):
        # given
        cfg = SystemConfigFactory(n_tx=3, bandwidth_b=2, n_cpi=5)
        # when
        wave = gen_gaussian(cfg, 0.0, 1)
        # then
        self.assertEqual(wave.x.shape, (20, 3))
        self.assertEqual(wave.gram.shape, (3, 3))
        self.assertIs(wave.ensemble_tag, Ensemble.GAUSSIAN)
        self.assertIs(gen_gaussian(cfg, 0.5, 1).ensemble_tag, Ensemble.GAUSSIAN_CORRELATED)

    def test_should_be_deterministic(self):
        cfg = SystemConfigFactory(n_tx=4, n_cpi=16)
        first = gen_gaussian(cfg, 0.3, 42)
        second = gen_gaussian(cfg, 0.3, 42)
        self.assertTrue(np.array_equal(first.x, second.x))
        self.assertFalse(np.array_equal(first.x, gen_gaussian(cfg, 0.3, 43).x))

    def test_should_ignore_correlation_for_single_antenna(self):
        cfg = SystemConfigFactory(n_tx=1, n_cpi=8)
        self.assertTrue(
            np.array_equal(gen_gaussian(cfg, 0.7, 5).x, gen_gaussian(cfg, 0.0, 5).x)
        )

    def test_should_have_white_sample_covariance(self):
        # given
        cfg = SystemConfigFactory(n_tx=4, n_cpi=50_000, p_t=2.0)
        # when
        wave = gen_gaussian(cfg, 0.0, 7)
        # then
        result = frobenius_relative(sample_covariance(wave.x), 2.0 * np.eye(4))
        self.assertLess(result, 0.02)

    def test_should_have_correlated_sample_covariance(self):
        # given
        cfg = SystemConfigFactory(n_tx=4, n_cpi=50_000)
        # when
        wave = gen_gaussian(cfg, 0.5, 8)
        # then
        expected = build_equicorrelation(4, 1.0, 0.5)
        self.assertLess(frobenius_relative(sample_covariance(wave.x), expected), 0.02)

    def test_should_reject_invalid_correlation(self):
        cfg = SystemConfigFactory()
        for rho_x in (-0.1, 1.0):
            with self.subTest(rho_x=rho_x):
                with self.assertRaises(ConfigError):
                    gen_gaussian(cfg, rho_x, 1)


class TestGenConstantModulus(NoSocketsTestCase):
    def test_should_have_constant_modulus(self):
        cfg = SystemConfigFactory(n_tx=4, n_cpi=64, p_t=3.0)
        wave = gen_constant_modulus(cfg, 1)
        self.assertTrue(np.allclose(np.abs(wave.x) ** 2, 3.0, rtol=0, atol=1e-12))

    def test_should_have_constant_gram_for_single_antenna(self):
        cfg = SystemConfigFactory(n_tx=1, bandwidth_b=2, n_cpi=5, p_t=1.5)
        wave = gen_constant_modulus(cfg, 1)
        self.assertAlmostEqual(float(wave.gram[0, 0].real), 20 * 1.5, places=10)

    def test_should_have_random_walk_off_diagonal_gram(self):
        # given
        cfg = SystemConfigFactory(n_tx=4, n_cpi=8, p_t=2.0)
        n_rows = cfg.n_samples
        values = []
        # when
        for idx in range(2000):
            gram = gen_constant_modulus(cfg, trial_seed(3, idx)).gram
            off = gram[~np.eye(4, dtype=bool)]
            values.append(np.mean(np.abs(off) ** 2) / (n_rows * 2.0**2))
        # then
        self.assertAlmostEqual(float(np.mean(values)), 1.0, delta=0.1)


class TestEnsembleProperties(NoSocketsTestCase):
    def test_should_have_mean_power_p_t(self):
        cfg = SystemConfigFactory(n_tx=4, n_cpi=125_000, p_t=2.0)
        for ensemble in (Ensemble.GAUSSIAN, Ensemble.CONSTANT_MODULUS):
            with self.subTest(ensemble=ensemble):
                wave = generate(ensemble, cfg, 0.0, 11)
                power = float(np.mean(np.abs(wave.x) ** 2))
                self.assertAlmostEqual(power / 2.0, 1.0, delta=0.01)

    def test_should_be_nearly_diagonal_for_many_samples(self):
        cfg = SystemConfigFactory(n_tx=4, n_cpi=128)
        n_rows = cfg.n_samples
        for ensemble in (Ensemble.GAUSSIAN, Ensemble.CONSTANT_MODULUS):
            with self.subTest(ensemble=ensemble):
                gram = generate(ensemble, cfg, 0.0, 12).gram / (n_rows * cfg.p_t)
                off = np.abs(gram[~np.eye(4, dtype=bool)])
                self.assertLessEqual(float(np.mean(off)), 3 / np.sqrt(n_rows))

    def test_should_have_consistent_gram(self):
        cfg = SystemConfigFactory(n_tx=3, n_cpi=10)
        for ensemble in (Ensemble.GAUSSIAN, Ensemble.CONSTANT_MODULUS):
            with self.subTest(ensemble=ensemble):
                wave = generate(ensemble, cfg, 0.0, 13)
                expected = np.einsum("in,im->nm", wave.x.conj(), wave.x)
                self.assertTrue(np.allclose(wave.gram, expected, rtol=0, atol=1e-10))
                self.assertGreaterEqual(np.min(np.linalg.eigvalsh(wave.gram)), -1e-10)

    def test_should_draw_nested_rows_for_same_seed(self):
        for ensemble in (Ensemble.GAUSSIAN, Ensemble.CONSTANT_MODULUS):
            with self.subTest(ensemble=ensemble):
                short = draw_symbols(ensemble, 6, 3, 1.0, 0.0, 21)
                long = draw_symbols(ensemble, 20, 3, 1.0, 0.0, 21)
                self.assertTrue(np.array_equal(long[:6], short))


class TestGenerate(NoSocketsTestCase):
    def test_should_accept_names_and_aliases(self):
        cfg = SystemConfigFactory()
        self.assertIs(generate("cm", cfg, 0.0, 1).ensemble_tag, Ensemble.CONSTANT_MODULUS)
        self.assertIs(generate("gs", cfg, 0.0, 1).ensemble_tag, Ensemble.GAUSSIAN)
        self.assertIs(
            generate("gaussian_correlated", cfg, 0.4, 1).ensemble_tag,
            Ensemble.GAUSSIAN_CORRELATED,
        )

    def test_should_reject_correlated_constant_modulus(self):
        with self.assertRaises(ConfigError):
            generate(Ensemble.CONSTANT_MODULUS, SystemConfigFactory(), 0.3, 1)

    def test_should_reject_uncorrelated_correlated_ensemble(self):
        with self.assertRaises(ConfigError):
            generate(Ensemble.GAUSSIAN_CORRELATED, SystemConfigFactory(n_tx=2), 0.0, 1)

    def test_should_reject_unknown_ensemble(self):
        with self.assertRaises(ConfigError):
            generate("qam", SystemConfigFactory(), 0.0, 1)


class TestTrialSeed(NoSocketsTestCase):
    def test_should_depend_only_on_master_and_index(self):
        first = np.random.default_rng(trial_seed(5, 3)).random(4)
        second = np.random.default_rng(trial_seed(5, 3)).random(4)
        other = np.random.default_rng(trial_seed(5, 4)).random(4)
        self.assertTrue(np.array_equal(first, second))
        self.assertFalse(np.array_equal(first, other))

    def test_should_extend_seed_sequences(self):
        # given
        parent = trial_seed(5, 1)
        # when
        child = trial_seed(parent, 2)
        # then
        self.assertEqual(tuple(child.spawn_key), (1, 2))
        self.assertEqual(child.entropy, 5)


class TestDumpCsv(NoSocketsTestCase):
    def test_should_write_real_and_imaginary_parts(self):
        # given
        x = np.array([[1 + 2j, 0 - 0.5j], [0.25, 3 - 1j]])
        wave = WaveformMatrix.from_samples(x, Ensemble.GAUSSIAN, 0)
        with tempfile.TemporaryDirectory() as tmp_dir:
            path = Path(tmp_dir) / "sub" / "wave.csv"
            # when
            dump_csv(wave, path)
            # then
            with path.open(encoding="utf-8") as file:
                rows = list(csv.reader(file))
        self.assertEqual(rows[0], ["re_0", "im_0", "re_1", "im_1"])
        self.assertEqual(rows[1], ["1", "2", "0", "-0.5"])
        self.assertEqual(rows[2], ["0.25", "0", "3", "-1"])
