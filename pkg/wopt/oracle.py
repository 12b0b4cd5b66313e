"""
Oracle模块 - 独立的 W1 计算

- w1_discrete_exact: 离散测度之间的精确 W1（网络单纯形），附带对偶可行性检查
- w1_1d_quantile: 一维分位数耦合
- w1_generator_vs_empirical: 离散化 G#U 与经验测度之间的 W1
"""

import logging

import numpy as np
import ot

from .errors import ConstructionError, DimensionError, DomainError
from .generator import pushforward_discretize

logger = logging.getLogger(__name__)

MASS_MATCH_TOL = 1e-9
DUAL_TOL = 1e-9
EMD_MAX_ITER = 10_000_000


def _check_masses(a, b):
    if a.dim != b.dim:
        raise DimensionError(f"两个测度的维度不同: {a.dim} vs {b.dim}")
    if abs(a.total_mass() - b.total_mass()) > MASS_MATCH_TOL:
        raise DomainError(f"总质量不相等: {a.total_mass()} vs {b.total_mass()}")


def w1_discrete_exact(a, b):
    """
    离散测度之间的精确 W1（欧氏地面代价）

    使用 POT 的网络单纯形求解运输问题，并检查对偶势满足 u_i + v_j <= c_ij（容差 1e-9）。

    Args:
        a (DiscreteMeasure): 测度
        b (DiscreteMeasure): 测度

    Returns:
        float: W1(a, b)

    Raises:
        DomainError: 总质量不等
        ConstructionError: 求解器未收敛或对偶不可行
    """
    _check_masses(a, b)
    wa = np.ascontiguousarray(a.masses, dtype=np.float64)
    wb = np.ascontiguousarray(b.masses, dtype=np.float64) * (wa.sum() / b.masses.sum())
    cost = ot.dist(a.atoms, b.atoms, metric="euclidean")
    plan, log = ot.emd(wa, wb, cost, numItermax=EMD_MAX_ITER, log=True)
    if log.get("warning"):
        raise ConstructionError(f"网络单纯形未正常结束: {log['warning']}")

    reduced = cost - log["u"][:, None] - log["v"][None, :]
    scale = max(1.0, float(cost.max()))
    if reduced.min() < -DUAL_TOL * scale:
        raise ConstructionError(f"对偶可行性检查失败，最小约化代价 {reduced.min()}")
    value = float(np.sum(plan * cost))
    logger.debug(f"精确 W1: {a.size} x {b.size} 原子，值={value}")
    return value


def w1_1d_quantile(a, b):
    """
    一维 W1：分位数函数之差的 L1 积分

    Raises:
        DimensionError: d != 1
    """
    if a.dim != 1 or b.dim != 1:
        raise DimensionError(f"分位数耦合只适用于一维测度，实际维度 {a.dim}, {b.dim}")
    _check_masses(a, b)
    return float(ot.wasserstein_1d(a.atoms[:, 0], b.atoms[:, 0], a.masses, b.masses, p=1))


def w1_between(a, b):
    """一维时用分位数耦合，否则用网络单纯形"""
    if a.dim == 1 and b.dim == 1:
        return w1_1d_quantile(a, b)
    return w1_discrete_exact(a, b)


def discretization_bias_bound(G, M):
    """中点网格离散化带来的偏差上界 K/(2M)"""
    return G.lipschitz_bound / (2.0 * M)


def w1_generator_vs_empirical(G, cloud, M):
    """
    W1(离散化 G#U, mu_n)

    Args:
        G (PiecewiseLinearGenerator): 生成器
        cloud (SampleCloud): 点云
        M (int): 隐变量网格大小，需 M >= n

    Returns:
        float: 离散化后的精确 W1；与真实值之差不超过 discretization_bias_bound(G, M)
    """
    if M < cloud.n:
        raise DomainError(f"网格大小 M={M} 必须不小于样本数 n={cloud.n}")
    if G.dim != cloud.d:
        raise DimensionError(f"生成器维度 {G.dim} 与样本维度 {cloud.d} 不一致")
    return w1_discrete_exact(pushforward_discretize(G, M), cloud.empirical_measure())
