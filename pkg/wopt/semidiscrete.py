"""
Semidiscrete模块 - 加权 Voronoi 胞腔与半离散最优传输

加权胞腔 Vor^w(i) = {x : ||x - X_i|| - w_i <= ||x - X_j|| - w_j, 对所有 j}。
对非原子测度 nu，适配权重 w* 使每个胞腔的 nu 质量等于目标质量 alpha_i，
此时 T(x) = X_{胞腔下标} 是最优传输映射。

适配权重通过随机对偶上升求得：对偶函数
Phi(w) = sum alpha_i w_i + E_nu[min_i(||x - X_i|| - w_i)] 为凹函数，
第 i 个梯度分量为 alpha_i - nu(Vor^w(i))。

采样器约定为可调用对象 sampler(rng, size) -> 形状 (size, d) 的数组。
"""

import logging

import numpy as np

from .errors import ConvergenceError, DomainError
from .generator import LATENT_TOL

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-9
DEFAULT_STEP_A = 1.0
DEFAULT_STEP_B = 10.0
DEFAULT_BATCH = 256
DEFAULT_RESIDUAL_TOL = 0.01
DEFAULT_EVAL_SIZE = 1_000_000
ATOMIC_PROBE_SIZE = 4096
# 单次距离计算的最大样本数
CHUNK_SIZE = 100_000


class WeightedVoronoi:
    """
    加权 Voronoi 剖分

    构造时把权重平移为 weights[0] = 0；整体平移不改变任何胞腔。

    属性:
        atoms (ndarray): 原子，形状 (n, d)
        weights (ndarray): 权重 w
        target_masses (ndarray): 目标质量 alpha，默认均为 1/n
        residual (float or None): 适配权重在评估样本上的质量残差
    """

    def __init__(self, atoms, weights=None, target_masses=None):
        atoms = np.asarray(atoms, dtype=float)
        if atoms.ndim == 1:
            atoms = atoms.reshape(-1, 1)
        n = atoms.shape[0]
        if n < 1:
            raise DomainError("至少需要一个原子")
        w = np.zeros(n) if weights is None else np.asarray(weights, dtype=float).reshape(-1)
        alpha = np.full(n, 1.0 / n) if target_masses is None else np.asarray(target_masses, dtype=float).reshape(-1)
        if w.shape[0] != n or alpha.shape[0] != n:
            raise DomainError(f"权重或质量的长度与原子数 {n} 不一致")
        if np.any(alpha < 0) or abs(alpha.sum() - 1.0) > 1e-9:
            raise DomainError(f"目标质量必须非负且和为 1，实际和为 {alpha.sum()}")
        self.atoms = atoms
        self.weights = w - w[0]
        self.target_masses = alpha
        self.residual = None

    @property
    def size(self):
        return self.atoms.shape[0]

    def shifted_costs(self, x):
        """返回 ||x - X_i|| - w_i，形状 (m, n)"""
        x = np.asarray(x, dtype=float).reshape(-1, self.atoms.shape[1])
        return np.linalg.norm(x[:, None, :] - self.atoms[None, :, :], axis=2) - self.weights[None, :]

    def assign(self, x):
        """
        批量求胞腔下标，精确相等时取最小下标

        Args:
            x (array_like): 形状 (m, d) 的点

        Returns:
            ndarray: 长度 m 的胞腔下标
        """
        x = np.asarray(x, dtype=float).reshape(-1, self.atoms.shape[1])
        out = np.empty(x.shape[0], dtype=int)
        for start in range(0, x.shape[0], CHUNK_SIZE):
            out[start:start + CHUNK_SIZE] = np.argmin(self.shifted_costs(x[start:start + CHUNK_SIZE]), axis=1)
        return out

    def cell_masses(self, sampler, size, seed=0):
        """用 size 个样本估计每个胞腔的 nu 质量"""
        rng = np.random.default_rng(seed)
        counts = np.zeros(self.size)
        remaining = int(size)
        while remaining > 0:
            m = min(remaining, CHUNK_SIZE)
            counts += np.bincount(self.assign(sampler(rng, m)), minlength=self.size)
            remaining -= m
        return counts / size

    def to_dict(self):
        return {
            "atoms": self.atoms.tolist(),
            "weights": [float(w) for w in self.weights],
            "alpha": [float(a) for a in self.target_masses],
            "residual": self.residual,
        }

    def __repr__(self):
        return f"WeightedVoronoi(n={self.size}, d={self.atoms.shape[1]}, residual={self.residual})"


class CellAssignment:
    """
    单点的胞腔归属

    属性:
        indices (tuple): 达到最小值的胞腔下标（升序）；长度 >= 2 时为边界点
    """

    def __init__(self, indices):
        self.indices = tuple(sorted(int(i) for i in indices))

    @property
    def is_boundary(self):
        return len(self.indices) >= 2

    @property
    def index(self):
        """内部点的胞腔下标；边界点返回最小下标"""
        return self.indices[0]

    def __eq__(self, other):
        return isinstance(other, CellAssignment) and self.indices == other.indices

    def __hash__(self):
        return hash(self.indices)

    def __repr__(self):
        kind = "boundary" if self.is_boundary else "interior"
        return f"CellAssignment({kind}, {list(self.indices)})"


def cell_of_point(x, vor, tol=DEFAULT_TOL):
    """
    求点 x 所在的加权胞腔或边界集合

    Args:
        x (array_like): R^d 中的点
        vor (WeightedVoronoi): 加权剖分
        tol (float): 判定相等的容差

    Returns:
        CellAssignment: 容差内达到最小值的下标集合
    """
    if tol < 0:
        raise DomainError(f"容差必须非负: {tol}")
    costs = vor.shifted_costs(x)[0]
    return CellAssignment(np.nonzero(costs <= costs.min() + tol)[0])


def transport_map_apply(x, vor, rule="lowest", tol=DEFAULT_TOL):
    """
    传输映射 T^w(x)，返回目标样本下标

    Args:
        x (array_like): R^d 中的点
        vor (WeightedVoronoi): 加权剖分
        rule (str): 边界规则，"lowest" 取边界集合的最小下标，"highest" 取最大下标

    Returns:
        int: 样本下标
    """
    assignment = cell_of_point(x, vor, tol)
    if rule == "lowest":
        return assignment.indices[0]
    if rule == "highest":
        return assignment.indices[-1]
    raise ValueError(f"未知的边界规则: {rule}")


def uniform_box_sampler(dim, low=0.0, high=1.0):
    """[low, high]^dim 上的均匀分布采样器"""
    if high <= low:
        raise DomainError(f"区间非法: [{low}, {high}]")

    def sampler(rng, size):
        return rng.uniform(low, high, size=(size, dim))

    return sampler


def generator_sampler(G):
    """G#U 的采样器"""

    def sampler(rng, size):
        return G.evaluate(rng.uniform(0.0, 1.0, size=size))

    return sampler


def transit_sampler(G):
    """
    G#U 限制在过渡段（非平台段）上的归一化采样器

    Raises:
        DomainError: G 没有过渡段
    """
    moving = np.nonzero(G.segment_slopes() > 0)[0]
    lengths = np.diff(G.breakpoints)[moving]
    if moving.size == 0 or lengths.sum() <= LATENT_TOL:
        raise DomainError("生成器没有过渡段")
    cumulative = np.concatenate([[0.0], np.cumsum(lengths)])
    total = cumulative[-1]
    starts = G.breakpoints[moving]

    def sampler(rng, size):
        s = rng.uniform(0.0, total, size=size)
        seg = np.clip(np.searchsorted(cumulative, s, side="right") - 1, 0, moving.size - 1)
        u = np.clip(starts[seg] + (s - cumulative[seg]), 0.0, 1.0)
        return G.evaluate(u)

    return sampler


def transit_cell_masses(optimum):
    """
    多维最优生成器的过渡部分在各标准胞腔中的归一化质量

    每段过渡的前一半属于起点的胞腔，后一半属于终点的胞腔。
    """
    order = np.asarray(optimum.walk.order, dtype=int)
    n = optimum.points.shape[0]
    half = optimum.step_lengths() / 2.0
    masses = np.bincount(order[:-1], weights=half, minlength=n) + np.bincount(order[1:], weights=half, minlength=n)
    return masses / masses.sum()


def check_nonatomic(sampler, seed=0, probe_size=ATOMIC_PROBE_SIZE):
    """
    通过重复抽样检查 nu 是否有原子

    Raises:
        DomainError: 探测批次中出现重复样本
    """
    draws = np.asarray(sampler(np.random.default_rng(seed), probe_size), dtype=float)
    unique = np.unique(draws.reshape(probe_size, -1), axis=0).shape[0]
    if unique < probe_size:
        raise DomainError(f"目标测度有原子（{probe_size} 次抽样中有 {probe_size - unique} 次重复），"
                          "请先用 perturb_plateaus 平滑平台")


def adapted_weights(sampler, atoms, alpha=None, iterations=2000, batch=DEFAULT_BATCH,
                    step_a=DEFAULT_STEP_A, step_b=DEFAULT_STEP_B, seed=0,
                    residual_tol=DEFAULT_RESIDUAL_TOL, eval_size=DEFAULT_EVAL_SIZE):
    """
    随机对偶上升求适配权重

    第 t 步：w += a / (b + sqrt(t)) * (alpha - nu_hat(Vor^w))，nu_hat 来自一个新批次；
    返回后一半迭代的平均权重，并在独立的评估样本上计算质量残差。

    Args:
        sampler (callable): nu 的采样器 sampler(rng, size)
        atoms (array_like): 原子
        alpha (array_like): 目标质量，默认均匀
        iterations (int): 迭代次数
        batch (int): 每步批量
        step_a (float): 步长参数 a
        step_b (float): 步长参数 b
        seed (int): 随机种子
        residual_tol (float): 残差容差（质量的无穷范数）
        eval_size (int): 评估样本数

    Returns:
        WeightedVoronoi: 权重已规范为 w[0] = 0，residual 已填写

    Raises:
        DomainError: nu 有原子
        ConvergenceError: 评估残差超过容差
    """
    if iterations < 1 or batch < 1:
        raise DomainError(f"迭代次数和批量必须为正: iterations={iterations}, batch={batch}")
    seeds = np.random.SeedSequence(seed).spawn(3)
    check_nonatomic(sampler, seed=seeds[0])

    vor = WeightedVoronoi(atoms, None, alpha)
    n = vor.size
    alpha = vor.target_masses
    rng = np.random.default_rng(seeds[1])
    w = np.zeros(n)
    tail_start = iterations // 2
    tail_sum = np.zeros(n)

    for t in range(1, iterations + 1):
        vor.weights = w
        freq = np.bincount(vor.assign(sampler(rng, batch)), minlength=n) / batch
        grad = alpha - freq
        w = w + step_a / (step_b + np.sqrt(t)) * grad
        w = w - w[0]
        if t > tail_start:
            tail_sum += w
        if t % 500 == 0:
            logger.debug(f"对偶上升第 {t} 步，批次残差 {np.max(np.abs(grad))}")

    vor.weights = tail_sum / (iterations - tail_start)
    vor.weights = vor.weights - vor.weights[0]
    masses = vor.cell_masses(sampler, eval_size, seed=seeds[2])
    residual = float(np.max(np.abs(masses - alpha)))
    vor.residual = residual
    if residual > residual_tol:
        raise ConvergenceError(f"对偶上升在 {iterations} 步内未收敛，残差 {residual} > {residual_tol}",
                               residual=residual)
    logger.info(f"适配权重: n={n}, 迭代={iterations}, 残差={residual}")
    return vor


def _draw(sampler, size, seed):
    return np.asarray(sampler(np.random.default_rng(seed), int(size)), dtype=float)


def transport_cost_estimate(sampler, vor, M, seed=0):
    """
    传输代价 E_nu ||x - T^w(x)|| 的蒙特卡洛估计

    Returns:
        tuple: (均值, 标准误)
    """
    if M < 1:
        raise DomainError(f"样本数必须 >= 1: {M}")
    x = _draw(sampler, M, seed)
    dist = np.linalg.norm(x - vor.atoms[vor.assign(x)], axis=1)
    se = float(dist.std(ddof=1) / np.sqrt(M)) if M > 1 else float("inf")
    return float(dist.mean()), se


def dual_value_estimate(sampler, vor, M, seed=0, weights=None):
    """
    对偶函数 Phi(w) 的蒙特卡洛估计

    相同 seed 使用相同的样本（公共随机数），便于比较不同 w 下的取值。

    Args:
        sampler (callable): nu 的采样器
        vor (WeightedVoronoi): 提供原子和 alpha
        M (int): 样本数
        seed (int): 随机种子
        weights (array_like): 若给出则替代 vor.weights（不做规范化）

    Returns:
        tuple: (Phi 估计, 标准误, 每个样本的被积项)
    """
    w = vor.weights if weights is None else np.asarray(weights, dtype=float)
    x = _draw(sampler, M, seed).reshape(-1, vor.atoms.shape[1])
    terms = np.empty(x.shape[0])
    for start in range(0, x.shape[0], CHUNK_SIZE):
        chunk = x[start:start + CHUNK_SIZE]
        dist = np.linalg.norm(chunk[:, None, :] - vor.atoms[None, :, :], axis=2) - w[None, :]
        terms[start:start + CHUNK_SIZE] = dist.min(axis=1)
    terms += float(np.dot(vor.target_masses, w))
    se = float(terms.std(ddof=1) / np.sqrt(M)) if M > 1 else float("inf")
    return float(terms.mean()), se, terms
