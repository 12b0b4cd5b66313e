"""
测试收敛速率与热图实验

此模块包含对目标分布抽样、实验配置、斜率估计、输出文件与小规模实验的单元测试。
耗时的完整速率实验需要设置环境变量 WOPT_SLOW=1。
"""

import unittest
import logging
import sys
import os
import shutil
import tempfile
from unittest import mock

import numpy as np

# 添加父目录到 Python 路径，以便能够导入 wopt 模块
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '../..')))

from wopt.errors import ConfigError, DomainError, ExperimentError
from wopt.experiments import (CSV_COLUMNS, ExperimentConfig, ExperimentRow, TargetDistribution,
                              derive_seed, emit_outputs, estimate_slope, run_heatmap, run_rates,
                              sample_target)
from wopt.oracle import w1_1d_quantile
from wopt.runner import THREADS_ENV


def rates_config(**overrides):
    data = {
        "target": {"kind": "uniform-interval"},
        "n_grid": [16, 32, 64, 128],
        "k_rule": {"mode": "multiple", "factors": [2.0]},
        "repetitions": 2,
        "oracle_grid": 20000,
        "reference_size": 20000,
        "seed": 5,
        "record_time": False,
    }
    data.update(overrides)
    return ExperimentConfig.from_dict(data, kind="rates")


class TestTargetDistribution(unittest.TestCase):
    """测试目标分布与抽样"""

    def test_sampling_determinism(self):
        """测试相同种子给出相同样本"""
        target = TargetDistribution("uniform-interval")
        a = sample_target(target, 3, 7)
        b = sample_target(target, 3, 7)
        np.testing.assert_array_equal(a.points, b.points)
        self.assertTrue(np.all((a.points >= 0.0) & (a.points <= 1.0)))
        c = sample_target(target, 3, 8)
        self.assertFalse(np.array_equal(a.points, c.points))

    def test_gaussian_and_box(self):
        """测试高斯与多维均匀分布"""
        gaussian = sample_target(TargetDistribution("standard-gaussian"), 1, 0)
        self.assertEqual(gaussian.points.shape, (1, 1))
        self.assertTrue(np.isfinite(gaussian.points[0, 0]))
        box = sample_target(TargetDistribution("uniform-box", dim=2), 4, 0)
        self.assertEqual(box.points.shape, (4, 2))
        self.assertTrue(np.all((box.points >= 0.0) & (box.points <= 1.0)))

    def test_invalid(self):
        """测试非法分布与样本数"""
        with self.assertRaises(ConfigError):
            TargetDistribution("cauchy")
        with self.assertRaises(ConfigError):
            TargetDistribution("uniform-interval", a=1.0, b=0.0)
        with self.assertRaises(ConfigError):
            TargetDistribution("standard-gaussian").with_dim(2)
        with self.assertRaises(DomainError):
            sample_target(TargetDistribution("uniform-interval"), 0, 0)

    def test_quantile_and_reference(self):
        """测试分位数与参考测度"""
        gaussian = TargetDistribution("standard-gaussian")
        self.assertAlmostEqual(float(gaussian.quantile(0.5)), 0.0, places=12)
        reference = TargetDistribution("uniform-interval", a=2.0, b=4.0).reference_measure(4)
        np.testing.assert_allclose(reference.atoms[:, 0], [2.25, 2.75, 3.25, 3.75])
        np.testing.assert_allclose(reference.masses, np.full(4, 0.25))

    def test_derive_seed(self):
        """测试种子派生确定且区分坐标"""
        self.assertEqual(derive_seed(1, 2, 64, 0), derive_seed(1, 2, 64, 0))
        self.assertNotEqual(derive_seed(1, 2, 64, 0), derive_seed(1, 2, 64, 1))
        self.assertNotEqual(derive_seed(1, 1, 64, 0), derive_seed(1, 2, 64, 0))
        self.assertGreaterEqual(derive_seed(0), 0)
        self.assertLess(derive_seed(0), 2 ** 63)


class TestExperimentConfig(unittest.TestCase):
    """测试 ExperimentConfig 类"""

    def test_layered_lookup(self):
        """测试 <kind>、defaults 与顶层的查找顺序"""
        data = {
            "seed": 9,
            "defaults": {"repetitions": 3, "oracle_grid": 1000},
            "rates": {"oracle_grid": 4000, "n_grid": [8, 16, 32, 64]},
        }
        config = ExperimentConfig.from_dict(data, kind="rates")
        self.assertEqual(config.seed, 9)
        self.assertEqual(config.repetitions, 3)
        self.assertEqual(config.oracle_grid, 4000)
        self.assertEqual(config.n_grid, [8, 16, 32, 64])
        self.assertEqual(config.k_mode, "multiple")
        self.assertEqual(config.k_values, [2.0])
        self.assertEqual(config.dims, [1])

    def test_geometric_grid(self):
        """测试几何 n 网格"""
        config = rates_config(n_grid={"start": 64, "stop": 512, "factor": 2})
        self.assertEqual(config.n_grid, [64, 128, 256, 512])

    def test_default_sizes(self):
        """测试按维度取默认的网格与参考测度大小"""
        config = ExperimentConfig.from_dict({"n_grid": [8, 16, 32, 64]}, kind="rates")
        self.assertEqual(config.oracle_grid_for(1), 100000)
        self.assertEqual(config.oracle_grid_for(3), 5000)
        self.assertEqual(config.reference_size_for(1), 100000)
        self.assertEqual(config.reference_size_for(2), 5000)

    def test_invalid(self):
        """测试非法配置"""
        with self.assertRaises(ConfigError):
            rates_config(n_grid=[64, 32, 128, 256])
        with self.assertRaises(ConfigError):
            rates_config(k_rule={"mode": "multiple", "factors": [0.5]})
        with self.assertRaises(ConfigError):
            rates_config(k_rule={"values": [1.0]})
        with self.assertRaises(ConfigError):
            rates_config(oracle_grid=100)
        with self.assertRaises(ConfigError):
            rates_config(repetitions=0)
        with self.assertRaises(ConfigError):
            ExperimentConfig.from_dict({"n_grid": [8, 16]}, kind="sweep")
        with self.assertRaises(ConfigError):
            ExperimentConfig.from_dict({"n_grid": [8, 16]}, kind="heatmap")
        with self.assertRaises(ConfigError):
            ExperimentConfig.from_dict({"n_grid": [8, 16], "dims": [2],
                                        "target": {"kind": "uniform-box"},
                                        "k_rule": {"mode": "absolute", "values": [1.0]}},
                                       kind="heatmap")

    def test_k_label(self):
        """测试 K 规则标签"""
        self.assertEqual(rates_config().k_label(2.0), "2xK_lower")
        absolute = rates_config(k_rule={"mode": "absolute", "values": [0.5]})
        self.assertEqual(absolute.k_label(0.5), "K=0.5")


class TestSlope(unittest.TestCase):
    """测试 estimate_slope 函数"""

    def test_power_law(self):
        """测试 y = x^(-1/2)"""
        rows = [{"n": n, "y": n ** -0.5} for n in (16, 64, 256, 1024) for _ in range(3)]
        estimate = estimate_slope(rows, "n", "y")
        self.assertAlmostEqual(estimate.slope, -0.5, delta=1e-9)
        self.assertAlmostEqual(estimate.ci_low, -0.5, delta=1e-9)
        self.assertAlmostEqual(estimate.ci_high, -0.5, delta=1e-9)

    def test_constant(self):
        """测试常数数据的斜率为 0"""
        rows = [{"n": n, "y": 0.3} for n in (10, 20, 40, 80)]
        self.assertAlmostEqual(estimate_slope(rows, "n", "y").slope, 0.0, delta=1e-9)

    def test_noisy_ci_contains_slope(self):
        """测试带噪声数据的置信区间包含点估计"""
        rng = np.random.default_rng(51)
        rows = [{"n": n, "y": n ** -1.0 * np.exp(rng.normal(scale=0.1))}
                for n in (16, 32, 64, 128, 256) for _ in range(5)]
        estimate = estimate_slope(rows, "n", "y", seed=1)
        self.assertLessEqual(estimate.ci_low, estimate.slope)
        self.assertGreaterEqual(estimate.ci_high, estimate.slope)
        self.assertAlmostEqual(estimate.slope, -1.0, delta=0.15)

    def test_too_few_points(self):
        """测试不同 x 少于 4 个或含非正数"""
        with self.assertRaises(DomainError):
            estimate_slope([{"n": n, "y": 1.0} for n in (1, 2, 3)], "n", "y")
        with self.assertRaises(DomainError):
            estimate_slope([{"n": n, "y": 0.0} for n in (1, 2, 3, 4)], "n", "y")


class TestOutputs(unittest.TestCase):
    """测试 emit_outputs 函数"""

    def setUp(self):
        """每个测试前的设置"""
        logging.disable(logging.CRITICAL)
        self.temp_dir = tempfile.mkdtemp()

    def tearDown(self):
        """每个测试后的清理"""
        shutil.rmtree(self.temp_dir)
        logging.disable(logging.NOTSET)

    def test_empty_rows(self):
        """测试空结果只写表头"""
        path = os.path.join(self.temp_dir, "empty.csv")
        emit_outputs([], path, os.path.join(self.temp_dir, "empty.svg"))
        with open(path) as f:
            self.assertEqual(f.read(), ",".join(CSV_COLUMNS) + "\n")
        self.assertFalse(os.path.exists(os.path.join(self.temp_dir, "empty.svg")))

    def test_one_row(self):
        """测试单行结果与 SVG"""
        csv_path = os.path.join(self.temp_dir, "one.csv")
        svg_path = os.path.join(self.temp_dir, "one.svg")
        row = ExperimentRow(64, 2.5, 1.25, 0.01, 0.05, 42, 0, label="2xK_lower")
        emit_outputs([row], csv_path, svg_path)
        with open(csv_path) as f:
            lines = f.read().splitlines()
        self.assertEqual(len(lines), 2)
        self.assertEqual(lines[0], ",".join(CSV_COLUMNS))
        self.assertTrue(lines[1].startswith("64,2.5,1.25,0.01,0.05,42,0"))
        with open(svg_path) as f:
            self.assertIn("<svg", f.read())

    def test_unwritable_path(self):
        """测试无法写入时抛出 ConfigError"""
        with self.assertRaises(ConfigError):
            emit_outputs([], os.path.join(self.temp_dir, "missing", "out.csv"))


class TestRunExperiments(unittest.TestCase):
    """测试小规模实验"""

    def setUp(self):
        """每个测试前的设置"""
        logging.disable(logging.CRITICAL)
        self.temp_dir = tempfile.mkdtemp()
        self.env = mock.patch.dict(os.environ, {THREADS_ENV: ""})
        self.env.start()

    def tearDown(self):
        """每个测试后的清理"""
        self.env.stop()
        shutil.rmtree(self.temp_dir)
        logging.disable(logging.NOTSET)

    def test_rates_univariate(self):
        """测试一维速率实验的行数、K 规则与三角不等式"""
        config = rates_config(threads=2)
        rows = run_rates(config)
        self.assertEqual(len(rows), 8)
        self.assertEqual([row.n for row in rows], [16, 16, 32, 32, 64, 64, 128, 128])
        reference = config.target.reference_measure(20000, seed=derive_seed(config.seed, "reference", 1))
        for row in rows:
            self.assertAlmostEqual(row.K, 2.0 * row.k_lower, places=9)
            self.assertGreaterEqual(row.w1_emp, 0.0)
            self.assertEqual(row.ms, 0)
            cloud = sample_target(config.target, row.n, row.seed)
            gap = w1_1d_quantile(cloud.empirical_measure(), reference)
            self.assertLessEqual(abs(row.w1_target - row.w1_emp), gap + row.K / (2 * 20000) + 1e-9)

    def test_rates_byte_identical(self):
        """测试不同线程数下 CSV 逐字节相同"""
        contents = []
        for threads in (1, 4):
            path = os.path.join(self.temp_dir, f"rates_{threads}.csv")
            run_rates(rates_config(threads=threads, output={"csv": path}))
            with open(path, "rb") as f:
                contents.append(f.read())
        self.assertEqual(contents[0], contents[1])

    def test_rates_monotone_in_k(self):
        """测试相同数据下 W1(G*#U, mu_n) 随 K 递减"""
        rows = run_rates(rates_config(k_rule={"mode": "multiple", "factors": [1.5, 2.0, 4.0]},
                                      reference_size=0))
        by_cell = {}
        for row in rows:
            by_cell.setdefault((row.n, row.seed), []).append((row.K, row.w1_emp))
            self.assertTrue(np.isnan(row.w1_target))
        for values in by_cell.values():
            self.assertEqual(len(values), 3)
            values.sort()
            for (_, a), (_, b) in zip(values[:-1], values[1:]):
                self.assertGreater(a, b)

    def test_rates_multivariate(self):
        """测试多维速率实验与按维度拆分的输出文件"""
        path = os.path.join(self.temp_dir, "rates.csv")
        config = rates_config(target={"kind": "uniform-box"}, dims=[1, 2], n_grid=[5, 6, 7, 8],
                              repetitions=1, reference_size=0, output={"csv": path})
        rows = run_rates(config)
        self.assertEqual(len(rows), 8)
        self.assertEqual([row.dim for row in rows], [1] * 4 + [2] * 4)
        for row in rows:
            self.assertGreater(row.k_lower, 0.0)
            self.assertGreater(row.w1_emp, 0.0)
        self.assertTrue(os.path.exists(os.path.join(self.temp_dir, "rates_d1.csv")))
        self.assertTrue(os.path.exists(os.path.join(self.temp_dir, "rates_d2.csv")))
        self.assertFalse(os.path.exists(path))

    def test_cell_failure(self):
        """测试 K 低于下界的单元失败"""
        config = rates_config(k_rule={"mode": "absolute", "values": [0.1, 1000.0]}, repetitions=1,
                              reference_size=0)
        with self.assertRaises(ExperimentError) as ctx:
            run_rates(config)
        self.assertTrue(ctx.exception.failed)

        config = rates_config(k_rule={"mode": "absolute", "values": [0.1, 1000.0]}, repetitions=1,
                              reference_size=0, continue_on_failure=True)
        rows = run_rates(config)
        self.assertEqual(len(rows), 4)
        self.assertTrue(all(row.K == 1000.0 for row in rows))

    def test_heatmap(self):
        """测试热图：K 较大时接近 W1(mu_n, mu)，K 较小时误差明显"""
        data = {
            "n_grid": [64, 256],
            "k_rule": {"mode": "absolute", "values": [0.5, 2.0, 1000.0]},
            "oracle_grid": 20000,
            "reference_size": 20000,
            "lp_grid": 500,
            "seed": 3,
        }
        config = ExperimentConfig.from_dict(data, kind="heatmap")
        rows = run_heatmap(config)
        self.assertEqual(len(rows), 6)
        values = {(row.n, row.K): row for row in rows}
        self.assertLess(values[(256, 2.0)].w1_target, values[(256, 0.5)].w1_target)
        self.assertAlmostEqual(values[(256, 0.5)].w1_emp, 0.125, delta=0.05)

        reference = config.target.reference_measure(20000, seed=derive_seed(config.seed, "reference", 1))
        large = values[(256, 1000.0)]
        self.assertGreaterEqual(1000.0, 10 * large.k_lower)
        cloud = sample_target(config.target, 256, large.seed)
        gap = w1_1d_quantile(cloud.empirical_measure(), reference)
        self.assertAlmostEqual(large.w1_target, gap, delta=0.1 * gap)

    def test_heatmap_requires_heatmap_config(self):
        """测试 run_heatmap 拒绝速率配置"""
        with self.assertRaises(ConfigError):
            run_heatmap(rates_config())

    def test_gaussian_plateau(self):
        """测试固定 K=1 时高斯目标的误差不随 n 收敛"""
        data = {
            "target": {"kind": "standard-gaussian"},
            "n_grid": [256, 4096],
            "k_rule": {"mode": "absolute", "values": [1.0]},
            "oracle_grid": 20000,
            "reference_size": 20000,
            "lp_grid": 1000,
        }
        rows = run_heatmap(ExperimentConfig.from_dict(data, kind="heatmap"))
        values = {row.n: row.w1_target for row in rows}
        self.assertGreater(values[256], 0.0)
        self.assertGreaterEqual(values[4096], 0.5 * values[256])

    @unittest.skipUnless(os.environ.get("WOPT_SLOW"), "设置 WOPT_SLOW=1 运行耗时测试")
    def test_rates_acceptance(self):
        """测试完整速率实验的斜率范围"""
        config = rates_config(n_grid={"start": 64, "stop": 4096, "factor": 2}, repetitions=10,
                              oracle_grid=100000, reference_size=100000)
        rows = run_rates(config)
        target_slope = estimate_slope(rows, "n", "w1_target").slope
        emp_slope = estimate_slope(rows, "n", "w1_emp").slope
        self.assertTrue(-0.65 <= target_slope <= -0.35, target_slope)
        self.assertTrue(-1.2 <= emp_slope <= -0.8, emp_slope)

        box = rates_config(target={"kind": "uniform-box", "dim": 3},
                           n_grid={"start": 64, "stop": 2048, "factor": 2}, repetitions=3,
                           reference_size=0)
        box_slope = estimate_slope(run_rates(box), "n", "w1_emp").slope
        self.assertTrue(-0.5 <= box_slope <= -0.2, box_slope)


if __name__ == '__main__':
    unittest.main()
