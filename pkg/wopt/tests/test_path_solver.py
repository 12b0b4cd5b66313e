"""
测试覆盖路径求解

此模块包含对平方度量闭包、精确与启发式覆盖路径以及 K_2 下界的单元测试。
"""

import unittest
import logging
import sys
import os

import numpy as np

# 添加父目录到 Python 路径，以便能够导入 wopt 模块
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '../..')))

from wopt.cloud import SampleCloud
from wopt.errors import SizeError, WalkValidationError
from wopt.path_solver import (WalkSolution, brute_force_walk, exact_covering_walk,
                              heuristic_covering_walk, k2_lower_bound, min_permutation_path_length,
                              solve_covering_walk, squared_metric_closure, walk_cost)


SQRT3_2 = np.sqrt(3.0) / 2.0
# 中心 O 与三个单位距离的叶子 A、B、C
STAR = np.array([[0.0, 0.0], [1.0, 0.0], [-0.5, SQRT3_2], [-0.5, -SQRT3_2]])
SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])


def collinear(n):
    return np.column_stack([np.arange(n, dtype=float), np.zeros(n)])


class TestSquaredMetricClosure(unittest.TestCase):
    """测试 squared_metric_closure 函数"""

    def test_collinear(self):
        """测试共线三点经中点更短"""
        closure = squared_metric_closure(SampleCloud(collinear(3)))
        self.assertAlmostEqual(closure.cost[0, 2], 2.0)
        self.assertEqual(closure.path(0, 2), [0, 1, 2])

    def test_two_points(self):
        """测试两点时闭包等于平方距离"""
        closure = squared_metric_closure(SampleCloud([[0.0, 0.0], [3.0, 4.0]]))
        self.assertEqual(closure.cost[0, 1], 25.0)
        self.assertEqual(closure.path(1, 0), [1, 0])

    def test_square_tie_keeps_direct_edge(self):
        """测试代价相同时保留直接边"""
        closure = squared_metric_closure(SampleCloud(SQUARE))
        self.assertEqual(closure.cost[0, 2], 2.0)
        self.assertEqual(closure.path(0, 2), [0, 2])

    def test_star_detour(self):
        """测试叶子之间经中心绕行"""
        closure = squared_metric_closure(SampleCloud(STAR))
        self.assertAlmostEqual(closure.cost[1, 2], 2.0, places=12)
        self.assertEqual(closure.path(1, 2), [1, 0, 2])

    def test_metric_properties(self):
        """测试闭包对称、对角为零、不超过平方距离且满足三角不等式"""
        points = np.random.default_rng(3).uniform(size=(12, 3))
        cost = squared_metric_closure(SampleCloud(points)).cost
        sq = np.sum((points[:, None, :] - points[None, :, :]) ** 2, axis=2)
        np.testing.assert_allclose(cost, cost.T, atol=1e-12)
        np.testing.assert_array_equal(np.diag(cost), np.zeros(12))
        self.assertTrue(np.all(cost <= sq + 1e-12))
        via = cost[:, :, None] + cost[None, :, :]
        self.assertTrue(np.all(cost[:, None, :] <= via + 1e-12))

    def test_sparse_closure_matches_dense(self):
        """测试 401 个点时 Delaunay 闭包与稠密 Floyd-Warshall 的代价和路径一致"""
        cloud = SampleCloud(np.random.default_rng(4).uniform(size=(401, 2)))
        sparse = squared_metric_closure(cloud)
        dense = squared_metric_closure(cloud, method="dense")
        np.testing.assert_allclose(sparse.cost, dense.cost, rtol=1e-10, atol=1e-12)
        for i, j in [(0, 400), (17, 233), (399, 5), (128, 129)]:
            path = sparse.path(i, j)
            self.assertEqual(path, dense.path(i, j))
            self.assertAlmostEqual(walk_cost(cloud.atoms, path), sparse.cost[i, j], places=12)

    def test_sparse_tie_keeps_direct_edge(self):
        """测试 Delaunay 闭包在代价相同时同样取跳数更少的路径"""
        # (1,1) 在以 (0,0)-(2,0) 为直径的圆上，两条路径代价都是 4
        points = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 0.0], [1.0, -3.0]])
        sparse = squared_metric_closure(SampleCloud(points), method="sparse")
        dense = squared_metric_closure(SampleCloud(points), method="dense")
        self.assertEqual(sparse.cost[0, 2], 4.0)
        self.assertEqual(sparse.path(0, 2), [0, 2])
        self.assertEqual(sparse.path(2, 0), [2, 0])
        self.assertEqual(dense.path(0, 2), [0, 2])
        np.testing.assert_array_equal(sparse.cost, dense.cost)

    def test_unknown_closure_method(self):
        """测试未知的闭包方法"""
        with self.assertRaises(ValueError):
            squared_metric_closure(SampleCloud(SQUARE), method="floyd")


class TestExactCoveringWalk(unittest.TestCase):
    """测试精确覆盖路径"""

    def setUp(self):
        """每个测试前的设置"""
        logging.disable(logging.CRITICAL)

    def tearDown(self):
        """每个测试后的清理"""
        logging.disable(logging.NOTSET)

    def test_square(self):
        """测试正方形沿边走，不重复访问"""
        walk = exact_covering_walk(SampleCloud(SQUARE))
        self.assertAlmostEqual(walk.cost, 3.0)
        self.assertEqual(walk.k, 0)
        self.assertTrue(walk.exact)
        walk.validate(SQUARE)

    def test_star(self):
        """测试星形需要一次重访中心"""
        walk = exact_covering_walk(SampleCloud(STAR))
        self.assertAlmostEqual(walk.cost, 4.0, places=12)
        self.assertEqual(walk.k, 1)
        self.assertEqual(walk.order.count(0), 2)
        hamiltonian = brute_force_walk(SampleCloud(STAR), k_max=0)
        self.assertAlmostEqual(hamiltonian.cost, 5.0, places=12)

    def test_single_point(self):
        """测试 n=1"""
        walk = exact_covering_walk(SampleCloud([[1.0, 2.0]]))
        self.assertEqual(walk.order, (0,))
        self.assertEqual(walk.cost, 0.0)

    def test_collinear(self):
        """测试共线点按顺序走"""
        walk = exact_covering_walk(SampleCloud(collinear(6)))
        self.assertAlmostEqual(walk.cost, 5.0)
        self.assertIn(walk.order, [tuple(range(6)), tuple(range(5, -1, -1))])

    def test_size_limit(self):
        """测试超过精确求解上限抛出 SizeError"""
        with self.assertRaises(SizeError):
            exact_covering_walk(SampleCloud(np.random.default_rng(0).uniform(size=(15, 2))))

    def test_matches_brute_force(self):
        """测试与穷举结果一致"""
        rng = np.random.default_rng(5)
        for _ in range(50):
            n = int(rng.integers(3, 7))
            d = int(rng.integers(2, 4))
            cloud = SampleCloud(rng.uniform(size=(n, d)))
            exact = exact_covering_walk(cloud)
            brute = brute_force_walk(cloud, k_max=2)
            self.assertAlmostEqual(exact.cost, brute.cost, delta=1e-9)
            exact.validate(cloud.atoms)

    def test_brute_force_collinear(self):
        """测试穷举在代价相同时返回第一个找到的序列"""
        walk = brute_force_walk(SampleCloud(collinear(4)))
        self.assertEqual(walk.order, (0, 1, 2, 3))
        self.assertAlmostEqual(walk.cost, 3.0)

    def test_rigid_motion_and_scaling(self):
        """测试刚体变换不变、缩放按 s^2 变化"""
        rng = np.random.default_rng(6)
        points = rng.uniform(size=(6, 2))
        theta = 0.7
        rotation = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
        base = exact_covering_walk(SampleCloud(points)).cost
        moved = exact_covering_walk(SampleCloud(points @ rotation.T + [3.0, -1.0])).cost
        scaled = exact_covering_walk(SampleCloud(points * 2.5)).cost
        self.assertAlmostEqual(moved, base, delta=1e-9)
        self.assertAlmostEqual(scaled, 6.25 * base, delta=1e-9)

    def test_reversal(self):
        """测试反向路径代价不变"""
        walk = exact_covering_walk(SampleCloud(STAR))
        back = walk.reversed()
        self.assertEqual(back.order, walk.order[::-1])
        self.assertEqual(back.k, walk.k)
        back.validate(STAR)


class TestHeuristicCoveringWalk(unittest.TestCase):
    """测试启发式覆盖路径"""

    def setUp(self):
        """每个测试前的设置"""
        logging.disable(logging.CRITICAL)

    def tearDown(self):
        """每个测试后的清理"""
        logging.disable(logging.NOTSET)

    def test_not_better_than_exact(self):
        """测试启发式代价不低于精确解"""
        rng = np.random.default_rng(7)
        for _ in range(5):
            cloud = SampleCloud(rng.uniform(size=(10, 2)))
            exact = exact_covering_walk(cloud)
            heuristic = heuristic_covering_walk(cloud, seed=1)
            self.assertFalse(heuristic.exact)
            self.assertGreaterEqual(heuristic.cost, exact.cost - 1e-9)
            heuristic.validate(cloud.atoms)

    def test_collinear(self):
        """测试共线等距点的启发式代价为 n-1"""
        for seed in range(5):
            walk = heuristic_covering_walk(SampleCloud(collinear(6)), seed=seed)
            self.assertAlmostEqual(walk.cost, 5.0)

    def test_seed_determinism(self):
        """测试相同种子结果相同"""
        cloud = SampleCloud(np.random.default_rng(8).uniform(size=(100, 2)))
        for seed in (1, 2, 3):
            first = heuristic_covering_walk(cloud, seed=seed)
            second = heuristic_covering_walk(cloud, seed=seed)
            self.assertEqual(first.order, second.order)
            self.assertEqual(first.cost, second.cost)

    def test_large_cloud(self):
        """测试大规模点云（Delaunay 闭包）给出合法路径"""
        cloud = SampleCloud(np.random.default_rng(9).uniform(size=(450, 2)))
        walk = solve_covering_walk(cloud, seed=0)
        self.assertFalse(walk.exact)
        walk.validate(cloud.atoms)

    def test_unknown_method(self):
        """测试未知的求解方式"""
        with self.assertRaises(ValueError):
            solve_covering_walk(SampleCloud(SQUARE), method="fast")


class TestWalkSolution(unittest.TestCase):
    """测试 WalkSolution 类与 K_2 下界"""

    def test_validate_errors(self):
        """测试非法路径"""
        with self.assertRaises(WalkValidationError):
            WalkSolution([0, 1, 2], walk_cost(SQUARE, [0, 1, 2])).validate(SQUARE)
        with self.assertRaises(WalkValidationError):
            WalkSolution([0, 1, 1, 2, 3], 3.0, n=4).validate(SQUARE)
        with self.assertRaises(WalkValidationError):
            WalkSolution([0, 1, 2, 3], 10.0).validate(SQUARE)

    def test_dict_round_trip(self):
        """测试 JSON 字典格式"""
        walk = WalkSolution([1, 0, 2, 0, 3], walk_cost(STAR, [1, 0, 2, 0, 3]), exact=True)
        data = walk.to_dict()
        self.assertEqual(data["k"], 1)
        restored = WalkSolution.from_dict(data)
        self.assertEqual(restored.order, walk.order)
        with self.assertRaises(WalkValidationError):
            WalkSolution.from_dict({"order": [0, 1], "cost": 1.0, "k": 3})

    def test_k2_examples(self):
        """测试共线与星形的 K_2"""
        line = collinear(4)
        walk = WalkSolution(range(4), walk_cost(line, range(4)))
        self.assertAlmostEqual(k2_lower_bound(SampleCloud(line), walk), 4.0, places=12)

        star_walk = WalkSolution([1, 0, 2, 0, 3], walk_cost(STAR, [1, 0, 2, 0, 3]))
        self.assertAlmostEqual(k2_lower_bound(SampleCloud(STAR), star_walk), 8.0, places=12)

        single = SampleCloud([[0.0, 0.0]])
        self.assertEqual(k2_lower_bound(single, WalkSolution([0], 0.0)), 0.0)

    def test_k2_dominates_path_lengths(self):
        """测试 K_2 不小于路径欧氏长度与最短排列路径长度"""
        rng = np.random.default_rng(10)
        for _ in range(10):
            cloud = SampleCloud(rng.uniform(size=(7, 2)))
            walk = exact_covering_walk(cloud)
            k_lower = k2_lower_bound(cloud, walk)
            self.assertGreaterEqual(k_lower, walk.euclidean_length(cloud.atoms) * (1 - 1e-9))
            self.assertGreaterEqual(k_lower, min_permutation_path_length(cloud) * (1 - 1e-9))


if __name__ == '__main__':
    unittest.main()
