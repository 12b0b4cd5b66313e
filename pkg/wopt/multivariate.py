"""
Multivariate模块 - R^d 中沿覆盖路径的最优生成器

给定覆盖路径 sigma，生成器依次在 X_{sigma(j)} 处停留 phi(sigma(j))，再以速度 K
直线移动到 X_{sigma(j+1)}。W1 闭式值为 cost/(4K)，每个样本的标准 Voronoi 胞腔
的隐变量原像测度恰为其质量。
"""

import logging

import numpy as np

from .errors import ConstraintError, ConstructionError, DomainError
from .generator import PiecewiseLinearGenerator, latent_cell_occupancy
from .oracle import discretization_bias_bound, w1_generator_vs_empirical
from .path_solver import k2_lower_bound, visit_half_lengths

logger = logging.getLogger(__name__)

OCCUPANCY_TOL = 1e-6
GEOMETRIC_TOL = 1e-9
TRANSIT_PROBES = 64


class MultivariateOptimum:
    """
    多维最优生成器及其闭式量

    属性:
        points (ndarray): 合并后的原子
        weights (ndarray): 原子质量
        walk (WalkSolution): 覆盖路径
        dwell (ndarray): 每个样本每次访问的停留时间 phi(i)
        arrivals (ndarray): 每个路径位置的到达时间 V_j
        generator (PiecewiseLinearGenerator): 生成器
        w1_value (float): 闭式 W1
        atom_masses (ndarray): |sigma^{-1}(i)| phi(i)
        k_lower (float): K_2
    """

    def __init__(self, points, weights, walk, dwell, arrivals, generator, w1_value,
                 atom_masses, k_lower):
        self.points = points
        self.weights = weights
        self.walk = walk
        self.dwell = dwell
        self.arrivals = arrivals
        self.generator = generator
        self.w1_value = w1_value
        self.atom_masses = atom_masses
        self.k_lower = k_lower

    @property
    def lipschitz_bound(self):
        return self.generator.lipschitz_bound

    def step_lengths(self):
        """路径相邻样本间的欧氏距离"""
        order = np.asarray(self.walk.order, dtype=int)
        return np.linalg.norm(np.diff(self.points[order], axis=0), axis=1)

    def transit_mass(self):
        if self.walk.length < 2:
            return 0.0
        return float(self.step_lengths().sum() / self.lipschitz_bound)

    def to_dict(self):
        data = self.generator.to_dict()
        data["w1"] = self.w1_value
        data["k_lower"] = self.k_lower
        data["atom_masses"] = [float(m) for m in self.atom_masses]
        data["walk"] = self.walk.to_dict()
        return data

    def __repr__(self):
        return (f"MultivariateOptimum(n={self.points.shape[0]}, d={self.points.shape[1]}, "
                f"K={self.lipschitz_bound}, w1={self.w1_value})")


def dwell_times(cloud, walk, K):
    """
    计算每个样本每次访问的停留时间

    phi(i) = (1/|sigma^{-1}(i)|)(alpha_i - sum_{j in sigma^{-1}(i)} (||X_{sigma(j-1)}-X_i|| + ||X_{sigma(j+1)}-X_i||)/(2K))

    Args:
        cloud (SampleCloud): 点云
        walk (WalkSolution): 覆盖路径
        K (float): Lipschitz 常数，需 K >= K_2

    Returns:
        ndarray: 长度 n 的 phi

    Raises:
        ConstraintError: K < K_2
        ConstructionError: phi 为负（超出 1e-12）
    """
    points = cloud.atoms
    n = points.shape[0]
    k_lower = k2_lower_bound(cloud, walk)
    if n == 1:
        return np.array([1.0])
    if K < k_lower * (1.0 - 1e-12):
        raise ConstraintError(f"Lipschitz 常数 K={K} 小于下界 K_2={k_lower}", k_lower=k_lower)

    order = np.asarray(walk.order, dtype=int)
    half = visit_half_lengths(points, walk)
    sums = np.bincount(order, weights=half, minlength=n)
    counts = np.bincount(order, minlength=n)
    dwell = (cloud.weights - sums / K) / counts
    if np.any(dwell < -1e-12):
        raise ConstructionError(f"停留时间为负: {dwell.min()}")
    return np.clip(dwell, 0.0, None)


def build_gstar_md(cloud, walk, K):
    """
    沿覆盖路径构造多维最优生成器

    位置 j 的平台为 [V_j, V_j + phi(sigma(j))]，随后以速度 K 直线过渡到 X_{sigma(j+1)}；
    V_1 = 0，V_{j+1} = V_j + phi(sigma(j)) + ||X_{sigma(j+1)} - X_{sigma(j)}|| / K。

    Args:
        cloud (SampleCloud): 点云
        walk (WalkSolution): 覆盖路径
        K (float): Lipschitz 常数，需 K >= K_2

    Returns:
        MultivariateOptimum: 最优生成器及闭式量

    Raises:
        ConstraintError: K < K_2
        ConstructionError: 时间轴未恰好覆盖 [0,1] 或质量不守恒
    """
    points = cloud.atoms
    n = points.shape[0]
    dwell = dwell_times(cloud, walk, K)
    k_lower = k2_lower_bound(cloud, walk)

    if n == 1:
        generator = PiecewiseLinearGenerator.constant(points[0], lipschitz_bound=max(float(K), 0.0))
        return MultivariateOptimum(points, cloud.weights, walk, dwell, np.array([0.0]), generator,
                                   0.0, np.array([1.0]), 0.0)

    K = float(K)
    order = np.asarray(walk.order, dtype=int)
    steps = np.linalg.norm(np.diff(points[order], axis=0), axis=1)
    if np.any(steps == 0):
        raise ConstructionError("路径中存在重合的相邻样本")
    stay = dwell[order]
    increments = stay[:-1] + steps / K
    arrivals = np.concatenate([[0.0], np.cumsum(increments)])
    end = arrivals[-1] + stay[-1]
    if abs(end - 1.0) > 1e-9:
        raise ConstructionError(f"时间轴终点 {end} 偏离 1")

    knots = np.empty(2 * order.size)
    knots[0::2] = arrivals
    knots[1::2] = arrivals + stay
    values = np.repeat(points[order], 2, axis=0)
    generator = PiecewiseLinearGenerator.from_knots(knots, values, K)

    counts = np.bincount(order, minlength=n)
    atom_masses = counts * dwell
    total = atom_masses.sum() + steps.sum() / K
    if abs(total - 1.0) > 1e-9:
        raise ConstructionError(f"原子质量与过渡质量之和 {total} 偏离 1")

    w1 = w1_closed_form_md(walk, K)
    logger.info(f"构造多维最优生成器: n={n}, d={cloud.d}, K={K}, K_2={k_lower}, W1={w1}")
    return MultivariateOptimum(points, cloud.weights, walk, dwell, arrivals, generator, w1,
                               atom_masses, k_lower)


def w1_closed_form_md(walk, K, cloud=None):
    """
    闭式 W1 = cost / (4K)

    Args:
        walk (WalkSolution): 覆盖路径
        K (float): Lipschitz 常数
        cloud (SampleCloud): 给定时检查 K >= K_2

    Returns:
        float: 闭式 W1
    """
    if walk.length < 2:
        return 0.0
    if K <= 0:
        raise DomainError(f"K 必须为正: {K}")
    if cloud is not None:
        k_lower = k2_lower_bound(cloud, walk)
        if K < k_lower * (1.0 - 1e-12):
            raise ConstraintError(f"Lipschitz 常数 K={K} 小于下界 K_2={k_lower}", k_lower=k_lower)
    return walk.cost / (4.0 * float(K))


def _nearest_ok(x, points, owner, tol=GEOMETRIC_TOL):
    """x 中每个点到 points[owner] 的距离是否不超过到最近样本的距离"""
    dist = np.linalg.norm(x[:, None, :] - points[None, :, :], axis=2)
    return np.all(dist[:, owner] <= dist.min(axis=1) + tol)


def voronoi_occupancy(optimum):
    """
    每个样本标准 Voronoi 胞腔的隐变量原像测度

    按平台时间加相邻过渡时间的一半统计，并与生成器几何上的解析积分比较；
    同时在每段过渡的前后两半各取 64 个点，检查其落在对应端点的胞腔中。

    Args:
        optimum (MultivariateOptimum): 最优生成器

    Returns:
        ndarray: 每个样本的占据测度

    Raises:
        ConstructionError: 占据测度与原子质量偏差超过 1e-6，或过渡点落在第三个样本的胞腔
    """
    points = optimum.points
    n = points.shape[0]
    if n == 1:
        return np.array([1.0])

    order = np.asarray(optimum.walk.order, dtype=int)
    K = optimum.lipschitz_bound
    steps = optimum.step_lengths()
    tally = np.bincount(order, weights=optimum.dwell[order], minlength=n)
    tally += np.bincount(order[:-1], weights=steps / (2.0 * K), minlength=n)
    tally += np.bincount(order[1:], weights=steps / (2.0 * K), minlength=n)

    geometric = latent_cell_occupancy(optimum.generator, points)
    worst = float(max(np.max(np.abs(tally - optimum.weights)),
                      np.max(np.abs(geometric - optimum.weights))))
    if worst > OCCUPANCY_TOL:
        raise ConstructionError(f"Voronoi 占据测度偏离原子质量 {worst}")

    t = np.linspace(0.0, 0.5, TRANSIT_PROBES)
    for a, b in zip(order[:-1], order[1:]):
        first = points[a] + t[:, None] * (points[b] - points[a])
        second = points[b] + t[:, None] * (points[a] - points[b])
        if not (_nearest_ok(first, points, a) and _nearest_ok(second, points, b)):
            raise ConstructionError(f"过渡段 {a} -> {b} 穿过了第三个样本的 Voronoi 胞腔")
    return geometric


def _assign(G_points, points, weights):
    dist = np.linalg.norm(G_points[:, None, :] - points[None, :, :], axis=2) - weights[None, :]
    return np.argmin(dist, axis=1)


def check_lip_circ(G, cloud, weights=None, M=10000):
    """
    检查生成器是否在每次进入加权胞腔时经过该胞腔的中心

    在 M 点网格上划分出映入同一加权胞腔的极大隐变量区间，用二分法细化区间端点，
    然后检查 G 在区间内到达中心 X_i（误差 1e-6）。平台视为到达中心。

    Args:
        G (PiecewiseLinearGenerator): 生成器
        cloud (SampleCloud): 点云
        weights (array_like): 胞腔权重 w，默认全 0
        M (int): 网格大小

    Returns:
        tuple: (是否满足, 违反的区间 (i, lo, hi) 或 None)
    """
    points = cloud.atoms
    n = points.shape[0]
    w = np.zeros(n) if weights is None else np.asarray(weights, dtype=float).reshape(-1)
    if w.shape[0] != n:
        raise DomainError(f"权重长度 {w.shape[0]} 与样本数 {n} 不一致")
    if n == 1:
        return True, None

    grid = np.linspace(0.0, 1.0, int(M) + 1)
    cells = _assign(G.evaluate(grid), points, w)

    def cell_at(u):
        return int(_assign(G.evaluate(np.array([u])), points, w)[0])

    def refine(u_in, u_out, i):
        for _ in range(60):
            mid = 0.5 * (u_in + u_out)
            if cell_at(mid) == i:
                u_in = mid
            else:
                u_out = mid
        return u_in

    change = np.nonzero(np.diff(cells) != 0)[0]
    starts = np.concatenate([[0], change + 1])
    stops = np.concatenate([change, [grid.shape[0] - 1]])
    for s, e in zip(starts, stops):
        i = int(cells[s])
        lo = grid[s] if s == 0 else refine(grid[s], grid[s - 1], i)
        hi = grid[e] if e == grid.shape[0] - 1 else refine(grid[e], grid[e + 1], i)
        if hi - lo < 1e-9:
            continue
        if G.distance_to_point(points[i], lo, hi) > OCCUPANCY_TOL:
            logger.debug(f"区间 [{lo}, {hi}] 映入胞腔 {i} 但未经过其中心")
            return False, (i, float(lo), float(hi))
    return True, None


def compare_competitor(G, optimum, cloud, M=20000, weights=None):
    """
    用网络单纯形比较竞争生成器与闭式最优值

    竞争者的 W1 低于 cost/(4K) 超过离散化偏差时记录 WARNING；
    不经过胞腔中心的竞争者只报告，不视为构造错误。

    Args:
        G (PiecewiseLinearGenerator): 竞争生成器
        optimum (MultivariateOptimum): 最优生成器
        cloud (SampleCloud): 点云
        M (int): 隐变量网格大小
        weights (array_like): check_lip_circ 使用的胞腔权重

    Returns:
        tuple: (竞争者的 W1, 是否优于闭式值, 是否经过每个胞腔的中心)
    """
    if G.lipschitz_bound > optimum.lipschitz_bound * (1.0 + 1e-12):
        raise DomainError(f"竞争者的 Lipschitz 常数 {G.lipschitz_bound} 大于 K={optimum.lipschitz_bound}")
    value = w1_generator_vs_empirical(G, cloud, M)
    beats = value < optimum.w1_value - discretization_bias_bound(G, M)
    in_lip_circ, violation = check_lip_circ(G, cloud, weights)
    if beats:
        if in_lip_circ:
            logger.warning(f"经过胞腔中心的竞争者 W1={value} 低于闭式值 {optimum.w1_value}")
        else:
            logger.warning(f"未经过胞腔中心的竞争者 W1={value} 低于闭式值 {optimum.w1_value}，违反区间 {violation}")
    return value, beats, in_lip_circ
