"""
Univariate模块 - 一维输出空间的精确最优生成器

此模块构造一维样本下的最优生成器 G*_K（先在样本处停留，再以速度 K 过渡到下一个样本），
给出其 W1 闭式值、原子质量、翻转后的第二个极小元、下界 K_1，
以及固定 K 时在分位数网格上的一维最优拟合。
"""

import logging

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .errors import ConstraintError, ConstructionError, DomainError
from .generator import PiecewiseLinearGenerator, latent_cell_occupancy, latent_grid, reflect_generator

logger = logging.getLogger(__name__)

__all__ = [
    "UnivariateOptimum",
    "k1_lower_bound",
    "build_gstar_1d",
    "w1_closed_form_1d",
    "reflect_generator",
    "fixed_k_optimum_1d",
    "empirical_quantile_grid",
    "grid_function_generator",
]


class UnivariateOptimum:
    """
    一维最优生成器及其闭式量

    属性:
        sorted_samples (ndarray): 排序后的原子 X_(1) < ... < X_(m)
        weights (ndarray): 排序后原子的质量（无重复点时均为 1/n）
        k_lower (float): 下界 K_1
        generator (PiecewiseLinearGenerator): G*_K
        w1_value (float): 闭式 W1 = (1/4K) sum gaps^2
        atom_masses (ndarray): G*_K#U 在各原子处的质量
    """

    def __init__(self, sorted_samples, weights, k_lower, generator, w1_value, atom_masses):
        self.sorted_samples = sorted_samples
        self.weights = weights
        self.k_lower = k_lower
        self.generator = generator
        self.w1_value = w1_value
        self.atom_masses = atom_masses

    @property
    def lipschitz_bound(self):
        return self.generator.lipschitz_bound

    @property
    def gaps(self):
        """相邻排序样本的间距"""
        return np.diff(self.sorted_samples)

    def transit_mass(self):
        """过渡段总质量 sum gaps / K"""
        if self.sorted_samples.shape[0] < 2:
            return 0.0
        return float(self.gaps.sum() / self.lipschitz_bound)

    def occupancy(self):
        """各排序原子 Voronoi 胞腔的隐变量原像测度（应等于各自的质量）"""
        return latent_cell_occupancy(self.generator, self.sorted_samples.reshape(-1, 1))

    def to_dict(self):
        """生成器 JSON 加上 w1、k_lower 与原子质量"""
        data = self.generator.to_dict()
        data["w1"] = self.w1_value
        data["k_lower"] = self.k_lower
        data["atom_masses"] = [float(m) for m in self.atom_masses]
        return data

    def __repr__(self):
        return (f"UnivariateOptimum(n={self.sorted_samples.shape[0]}, K={self.lipschitz_bound}, "
                f"w1={self.w1_value})")


def _sorted_atoms(cloud):
    """返回 (排序原子, 对应质量, 对应重复次数)"""
    cloud.require_univariate()
    x = cloud.atoms[:, 0]
    order = np.argsort(x, kind="stable")
    return x[order], cloud.weights[order], cloud.multiplicities[order]


def k1_lower_bound(cloud):
    """
    计算 K_1 = n * 最大相邻间距（在合并重复点后的点云上）

    存在重复点时原子质量不等，若某个原子的平台长度 alpha_i - (g_{i-1}+g_i)/(2K)
    在该值下为负，则提高到使所有平台非负的最小值。

    Args:
        cloud (SampleCloud): 一维点云

    Returns:
        float: K_1；只有一个原子时为 0

    Raises:
        DimensionError: d != 1
    """
    x, alpha, _ = _sorted_atoms(cloud)
    m = x.shape[0]
    if m < 2:
        return 0.0
    gaps = np.diff(x)
    base = m * float(gaps.max())
    padded = np.concatenate([[0.0], gaps, [0.0]])
    weighted = float(np.max((padded[:-1] + padded[1:]) / (2.0 * alpha)))
    return max(base, weighted)


def _check_k(K, k_lower, label):
    if K < k_lower * (1.0 - 1e-12):
        raise ConstraintError(f"Lipschitz 常数 K={K} 小于下界 {label}={k_lower}", k_lower=k_lower)


def build_gstar_1d(cloud, K):
    """
    构造一维最优生成器 G*_K

    原子 X_(i) 处的平台为 [A_{i-1} + g_{i-1}/(2K), A_i - g_i/(2K)]，其中 A_i 为累计质量
    （无重复点时 A_i = i/n），从 X_(i) 到 X_(i+1) 的过渡以斜率 K 跨越 A_i。

    Args:
        cloud (SampleCloud): 一维点云
        K (float): Lipschitz 常数，需 K >= K_1

    Returns:
        UnivariateOptimum: 最优生成器及闭式量

    Raises:
        DimensionError: d != 1
        ConstraintError: K < K_1
    """
    x, alpha, mult = _sorted_atoms(cloud)
    k_lower = k1_lower_bound(cloud)
    m = x.shape[0]

    if m == 1:
        generator = PiecewiseLinearGenerator.constant([x[0]], lipschitz_bound=max(float(K), 0.0))
        logger.info("单原子点云，返回常值生成器")
        return UnivariateOptimum(x, alpha, 0.0, generator, 0.0, np.array([1.0]))

    _check_k(K, k_lower, "K_1")
    K = float(K)
    gaps = np.diff(x)
    padded = np.concatenate([[0.0], gaps, [0.0]])
    cumulative = np.concatenate([[0.0], np.cumsum(mult) / cloud.n])
    cumulative[-1] = 1.0

    starts = cumulative[:-1] + padded[:-1] / (2.0 * K)
    ends = cumulative[1:] - padded[1:] / (2.0 * K)
    masses = alpha - (padded[:-1] + padded[1:]) / (2.0 * K)
    if np.any(masses < -1e-12):
        raise ConstructionError(f"平台长度为负: {masses.min()}")
    masses = np.clip(masses, 0.0, None)
    ends = np.maximum(ends, starts)

    knots = np.empty(2 * m)
    knots[0::2] = starts
    knots[1::2] = ends
    values = np.repeat(x, 2)
    generator = PiecewiseLinearGenerator.from_knots(knots, values, K)

    w1 = float(np.sum(gaps ** 2) / (4.0 * K))
    logger.info(f"构造一维最优生成器: n={m}, K={K}, K_1={k_lower}, W1={w1}")
    return UnivariateOptimum(x, alpha, k_lower, generator, w1, masses)


def w1_closed_form_1d(cloud, K):
    """
    一维闭式 W1 值 (1/4K) sum (X_(i+1) - X_(i))^2

    Args:
        cloud (SampleCloud): 一维点云
        K (float): Lipschitz 常数，需 K >= K_1

    Returns:
        float: 闭式 W1；单原子时为 0
    """
    x, _, _ = _sorted_atoms(cloud)
    if x.shape[0] < 2:
        return 0.0
    _check_k(K, k1_lower_bound(cloud), "K_1")
    return float(np.sum(np.diff(x) ** 2) / (4.0 * K))


def empirical_quantile_grid(cloud, M):
    """
    经验测度在中点网格上的分位数 q_j = F_n^{-1}((j-1/2)/M)

    Args:
        cloud (SampleCloud): 一维点云
        M (int): 网格大小

    Returns:
        ndarray: 非递减的长度 M 数组
    """
    x, _, mult = _sorted_atoms(cloud)
    cumulative = np.cumsum(mult) / cloud.n
    idx = np.searchsorted(cumulative, latent_grid(int(M)), side="left")
    return x[np.minimum(idx, x.shape[0] - 1)]


def fixed_k_optimum_1d(q, K):
    """
    固定 K 时的一维最优拟合

    在网格函数 g 上求解 min (1/M) sum |g_j - q_j|，约束 |g_{j+1} - g_j| <= K/M。
    一维时 W1 等于分位数函数的 L1 距离，该线性规划是 Lip_K 上下确界的网格版本。

    Args:
        q (array_like): 非递减的目标分位数网格，长度 M >= 2
        K (float): Lipschitz 常数，K >= 0

    Returns:
        tuple: (最优值, 最优网格函数 g)

    Raises:
        DomainError: q 未排序、M < 2 或 K < 0
    """
    q = np.asarray(q, dtype=float).reshape(-1)
    M = q.shape[0]
    if M < 2:
        raise DomainError(f"网格长度必须 >= 2: {M}")
    if np.any(np.diff(q) < 0):
        raise DomainError("分位数网格必须非递减")
    if K < 0:
        raise DomainError(f"K 必须非负: {K}")

    step = K / M
    if np.all(np.diff(q) <= step):
        return 0.0, q.copy()

    # 变量 [g, e]，目标 (1/M) sum e
    eye = sparse.identity(M, format="csr")
    diff = sparse.diags([-np.ones(M - 1), np.ones(M - 1)], [0, 1], shape=(M - 1, M), format="csr")
    zeros = sparse.csr_matrix((M - 1, M))
    a_ub = sparse.vstack([
        sparse.hstack([eye, -eye]),
        sparse.hstack([-eye, -eye]),
        sparse.hstack([diff, zeros]),
        sparse.hstack([-diff, zeros]),
    ], format="csr")
    b_ub = np.concatenate([q, -q, np.full(M - 1, step), np.full(M - 1, step)])
    c = np.concatenate([np.zeros(M), np.full(M, 1.0 / M)])
    bounds = [(None, None)] * M + [(0, None)] * M

    result = linprog(c, A_ub=a_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if not result.success:
        raise ConstructionError(f"线性规划求解失败: {result.message}")
    g = result.x[:M]
    value = float(np.mean(np.abs(g - q)))
    logger.debug(f"固定 K 一维拟合: M={M}, K={K}, 值={value}")
    return value, g


def grid_function_generator(g, K):
    """
    把中点网格上的函数 g 扩展为 [0,1] 上的分段线性生成器

    在 (j-1/2)/M 处插值，两端常值延拓；若 |g_{j+1}-g_j| <= K/M 则结果是 K-Lipschitz。

    Args:
        g (array_like): 长度 M 的网格取值
        K (float): 声明的 Lipschitz 常数

    Returns:
        PiecewiseLinearGenerator: 生成器
    """
    g = np.asarray(g, dtype=float).reshape(-1)
    M = g.shape[0]
    knots = np.concatenate([[0.0], latent_grid(M), [1.0]])
    values = np.concatenate([[g[0]], g, [g[-1]]])
    return PiecewiseLinearGenerator.from_knots(knots, values, K)
