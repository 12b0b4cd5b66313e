"""
Generator模块 - 分段线性生成器

此模块提供 PiecewiseLinearGenerator 类，表示 [0,1] -> R^d 的 K-Lipschitz 分段线性映射，
以及求值、前推测度离散化、Lipschitz 校验、翻转和平台扰动等基本操作。

平台（常值区间）用两个取值相同的断点表示，因此求值只需要一条线性插值规则。
"""

import logging

import numpy as np

from .errors import DomainError
from .measure import DiscreteMeasure

logger = logging.getLogger(__name__)

LATENT_TOL = 1e-12
LIPSCHITZ_RTOL = 1e-9
# 超过该断点数时只检查相邻断点（分段线性映射的 Lipschitz 常数由最大斜率决定）
PAIRWISE_BREAKPOINT_LIMIT = 4096


class PiecewiseLinearGenerator:
    """
    分段线性生成器 G: [0,1] -> R^d

    属性:
        breakpoints (ndarray): 严格递增的隐变量断点，首个为 0，末个为 1
        values (ndarray): 各断点处的取值，形状 (m+1, d)
        lipschitz_bound (float): 声明的 Lipschitz 常数 K
    """

    def __init__(self, breakpoints, values, lipschitz_bound):
        """
        初始化生成器

        Args:
            breakpoints (array_like): 断点 u_0=0 < u_1 < ... < u_m=1
            values (array_like): 断点处的取值，形状 (m+1, d)；一维输入视为 d=1
            lipschitz_bound (float): Lipschitz 常数 K >= 0

        Raises:
            DomainError: 断点不严格递增、端点不为 0/1 或形状不匹配
        """
        u = np.asarray(breakpoints, dtype=float).reshape(-1)
        p = np.asarray(values, dtype=float)
        if p.ndim == 1:
            p = p.reshape(-1, 1)
        if u.shape[0] < 2 or p.shape[0] != u.shape[0]:
            raise DomainError(f"断点数 {u.shape[0]} 与取值数 {p.shape[0]} 不匹配（至少两个断点）")
        if u[0] != 0.0 or u[-1] != 1.0:
            raise DomainError(f"断点必须从 0 开始到 1 结束，实际为 [{u[0]}, {u[-1]}]")
        if np.any(np.diff(u) <= 0):
            raise DomainError("断点必须严格递增")
        if not np.all(np.isfinite(p)):
            raise DomainError("断点取值中包含非有限坐标")
        if lipschitz_bound < 0:
            raise DomainError(f"Lipschitz 常数必须非负: {lipschitz_bound}")

        u = u.copy()
        p = p.copy()
        u.flags.writeable = False
        p.flags.writeable = False
        self.breakpoints = u
        self.values = p
        self.lipschitz_bound = float(lipschitz_bound)

    @classmethod
    def from_knots(cls, knots, values, lipschitz_bound):
        """
        由可能含有退化区间的节点序列构造生成器

        只合并两端取值完全相同且长度不超过 LATENT_TOL 的退化平台。两端取值不同的过渡区间
        即使因舍入长度为零也会保留，节点取下一个可表示的浮点数。首末节点分别钉到 0 和 1。

        Args:
            knots (array_like): 非递减的节点序列，首末分别在 0 与 1 的容差内
            values (array_like): 节点取值
            lipschitz_bound (float): Lipschitz 常数

        Returns:
            PiecewiseLinearGenerator: 新的生成器
        """
        knots = np.asarray(knots, dtype=float).reshape(-1)
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values.reshape(-1, 1)
        if abs(knots[0]) > 1e-9 or abs(knots[-1] - 1.0) > 1e-9:
            raise DomainError(f"节点未覆盖 [0,1]: [{knots[0]}, {knots[-1]}]")
        if np.any(np.diff(knots) < -LATENT_TOL):
            raise DomainError("节点序列不是非递减的")

        keep_u = [0.0]
        keep_p = [values[0]]
        for u, p in zip(knots[1:], values[1:]):
            if np.array_equal(p, keep_p[-1]) and u - keep_u[-1] <= LATENT_TOL:
                continue
            if u <= keep_u[-1]:
                u = np.nextafter(keep_u[-1], 2.0)
            keep_u.append(float(u))
            keep_p.append(p)
        if len(keep_u) == 1:
            keep_u.append(1.0)
            keep_p.append(keep_p[0])
        keep_u[-1] = 1.0
        # 被推过 1 的内部节点向左回退
        for i in range(len(keep_u) - 2, 0, -1):
            if keep_u[i] < keep_u[i + 1]:
                break
            keep_u[i] = float(np.nextafter(keep_u[i + 1], -1.0))
        return cls(keep_u, np.array(keep_p), lipschitz_bound)

    @classmethod
    def constant(cls, point, lipschitz_bound=0.0):
        """返回恒等于 point 的生成器"""
        point = np.atleast_1d(np.asarray(point, dtype=float))
        return cls([0.0, 1.0], np.vstack([point, point]), lipschitz_bound)

    @property
    def dim(self):
        """输出空间维度"""
        return self.values.shape[1]

    @property
    def n_segments(self):
        """线性段个数"""
        return self.breakpoints.shape[0] - 1

    def evaluate(self, u):
        """
        在隐变量 u 处求值（线性插值），断点处精确返回存储值

        Args:
            u (float or array_like): [0,1] 中的隐变量

        Returns:
            ndarray: 标量输入返回形状 (d,)，数组输入返回形状 (len(u), d)

        Raises:
            DomainError: u 不在 [0,1] 中
        """
        scalar = np.ndim(u) == 0
        u = np.atleast_1d(np.asarray(u, dtype=float))
        if np.any(~np.isfinite(u)) or np.any(u < 0.0) or np.any(u > 1.0):
            raise DomainError("隐变量 u 必须在 [0,1] 中")

        b = self.breakpoints
        idx = np.clip(np.searchsorted(b, u, side="right") - 1, 0, self.n_segments - 1)
        t = (u - b[idx]) / (b[idx + 1] - b[idx])
        start = self.values[idx]
        end = self.values[idx + 1]
        out = start + t[:, None] * (end - start)
        at_end = t == 1.0
        if np.any(at_end):
            out[at_end] = end[at_end]
        return out[0] if scalar else out

    def __call__(self, u):
        return self.evaluate(u)

    def segment_slopes(self):
        """返回每一段的速度 ||G(u_{j+1}) - G(u_j)|| / (u_{j+1} - u_j)"""
        lengths = np.linalg.norm(np.diff(self.values, axis=0), axis=1)
        return lengths / np.diff(self.breakpoints)

    def plateaus(self):
        """
        返回所有非退化平台

        Returns:
            list: (a, b, point) 元组列表，G 在 [a, b] 上恒等于 point
        """
        result = []
        for j in range(self.n_segments):
            if np.array_equal(self.values[j], self.values[j + 1]):
                result.append((float(self.breakpoints[j]), float(self.breakpoints[j + 1]),
                               self.values[j].copy()))
        return result

    def distance_to_point(self, x, lo=0.0, hi=1.0):
        """
        计算点 x 到曲线段 G([lo, hi]) 的精确最小距离

        Args:
            x (array_like): R^d 中的点
            lo (float): 隐变量区间左端
            hi (float): 隐变量区间右端

        Returns:
            float: 最小欧氏距离
        """
        x = np.asarray(x, dtype=float).reshape(-1)
        inner = self.breakpoints[(self.breakpoints > lo) & (self.breakpoints < hi)]
        knots = np.concatenate([[lo], inner, [hi]])
        pts = self.evaluate(knots)
        a = pts[:-1]
        seg = pts[1:] - a
        seg_sq = np.einsum("ij,ij->i", seg, seg)
        with np.errstate(invalid="ignore", divide="ignore"):
            t = np.where(seg_sq > 0, np.einsum("ij,ij->i", x - a, seg) / seg_sq, 0.0)
        t = np.clip(t, 0.0, 1.0)
        closest = a + t[:, None] * seg
        return float(np.min(np.linalg.norm(closest - x, axis=1)))

    def to_dict(self):
        """序列化为 {"k": K, "breakpoints": [{"u": ..., "p": [...]}, ...]}"""
        return {
            "k": self.lipschitz_bound,
            "breakpoints": [{"u": float(u), "p": [float(c) for c in p]}
                            for u, p in zip(self.breakpoints, self.values)],
        }

    @classmethod
    def from_dict(cls, data):
        """
        由 to_dict 的输出恢复生成器

        Args:
            data (dict): 含 "k" 与 "breakpoints" 的字典

        Returns:
            PiecewiseLinearGenerator: 生成器
        """
        try:
            k = float(data["k"])
            items = data["breakpoints"]
            us = [float(item["u"]) for item in items]
            ps = [[float(c) for c in item["p"]] for item in items]
        except (KeyError, TypeError) as e:
            raise DomainError(f"生成器 JSON 格式错误: {e}")
        return cls(us, ps, k)

    def __eq__(self, other):
        if not isinstance(other, PiecewiseLinearGenerator):
            return NotImplemented
        return (self.lipschitz_bound == other.lipschitz_bound
                and np.array_equal(self.breakpoints, other.breakpoints)
                and np.array_equal(self.values, other.values))

    def __repr__(self):
        return f"PiecewiseLinearGenerator(segments={self.n_segments}, d={self.dim}, K={self.lipschitz_bound})"


def evaluate_generator(G, u):
    """在 u 处对生成器 G 求值，见 PiecewiseLinearGenerator.evaluate"""
    return G.evaluate(u)


def latent_grid(M):
    """返回中点网格 (j - 1/2)/M, j=1..M"""
    return (np.arange(M, dtype=float) + 0.5) / M


def pushforward_discretize(G, M):
    """
    在中点网格上离散化前推测度 G#U

    Args:
        G (PiecewiseLinearGenerator): 生成器
        M (int): 网格大小

    Returns:
        DiscreteMeasure: 原子 G((j-1/2)/M)，每个质量 1/M，相同原子合并

    Raises:
        DomainError: M < 1
    """
    if M < 1:
        raise DomainError(f"网格大小必须 >= 1: {M}")
    return DiscreteMeasure.from_points(G.evaluate(latent_grid(int(M))))


def validate_lipschitz(G, K, M=1000):
    """
    校验 G 是否为 K-Lipschitz

    在均匀网格的相邻点对以及断点对上检查 ||G(u)-G(v)|| <= K|u-v|(1+1e-9)。

    Args:
        G (PiecewiseLinearGenerator): 生成器
        K (float): Lipschitz 常数
        M (int): 网格大小，至少为 2

    Returns:
        tuple: (是否满足, 观测到的最大比值)
    """
    if M < 2:
        raise DomainError(f"网格大小必须 >= 2: {M}")
    grid = np.linspace(0.0, 1.0, int(M))
    pts = G.evaluate(grid)
    worst = float(np.max(np.linalg.norm(np.diff(pts, axis=0), axis=1) / np.diff(grid)))

    b = G.breakpoints
    v = G.values
    if b.shape[0] <= PAIRWISE_BREAKPOINT_LIMIT:
        for i in range(b.shape[0] - 1):
            ratios = np.linalg.norm(v[i + 1:] - v[i], axis=1) / (b[i + 1:] - b[i])
            worst = max(worst, float(ratios.max()))
    else:
        worst = max(worst, float(G.segment_slopes().max()))

    ok = worst <= K * (1.0 + LIPSCHITZ_RTOL)
    logger.debug(f"Lipschitz 校验: K={K}, 最大比值={worst}, 结果={ok}")
    return ok, worst


def latent_cell_occupancy(G, atoms):
    """
    解析计算每个原子标准 Voronoi 胞腔的隐变量原像测度

    对每条线段 p(t) = a + t s，原子 i 为最近点的 t 集合由线性不等式
    2 p(t)·(x_j - x_i) <= |x_j|^2 - |x_i|^2 给出，是一个区间；边界测度为零。

    Args:
        G (PiecewiseLinearGenerator): 生成器
        atoms (array_like): 原子坐标，形状 (m, d)

    Returns:
        ndarray: 长度 m 的数组，第 i 项为 lambda({u : X_i 是 G(u) 的最近原子})
    """
    atoms = np.asarray(atoms, dtype=float)
    if atoms.ndim == 1:
        atoms = atoms.reshape(-1, 1)
    m = atoms.shape[0]
    sq = np.einsum("ij,ij->i", atoms, atoms)
    # delta[i, j] = x_j - x_i
    delta = atoms[None, :, :] - atoms[:, None, :]
    base = sq[None, :] - sq[:, None]
    occupancy = np.zeros(m)
    for j in range(G.n_segments):
        a = G.values[j]
        s = G.values[j + 1] - a
        du = G.breakpoints[j + 1] - G.breakpoints[j]
        rhs = base - 2.0 * (delta @ a)
        slope = 2.0 * (delta @ s)
        with np.errstate(divide="ignore", invalid="ignore"):
            bound = rhs / slope
        hi = np.min(np.where(slope > 0, bound, np.inf), axis=1)
        lo = np.max(np.where(slope < 0, bound, -np.inf), axis=1)
        hi = np.minimum(hi, 1.0)
        lo = np.maximum(lo, 0.0)
        blocked = np.any((slope == 0) & (rhs < 0), axis=1)
        length = np.where(blocked, 0.0, np.clip(hi - lo, 0.0, None))
        occupancy += length * du
    return occupancy


def reflect_generator(G):
    """
    返回 u -> G(1-u)

    Args:
        G (PiecewiseLinearGenerator): 生成器

    Returns:
        PiecewiseLinearGenerator: 翻转后的生成器，前推测度与 G 相同
    """
    knots = 1.0 - G.breakpoints[::-1]
    knots[0] = 0.0
    knots[-1] = 1.0
    return PiecewiseLinearGenerator(knots, G.values[::-1], G.lipschitz_bound)


def perturb_plateaus(G, m):
    """
    把每个平台 [a, b] 替换为帐篷形折线，使前推测度无原子

    G_m(u) = G(a) + K_m((b-a)/2 - |(a+b)/2 - u|) e_1，K_m = min(K, 1/m)。
    结果仍是 K-Lipschitz，且与 G 的一致距离不超过 K_m(b-a)/2。

    Args:
        G (PiecewiseLinearGenerator): 生成器
        m (int): 扰动参数，幅度为 1/m

    Returns:
        PiecewiseLinearGenerator: 扰动后的生成器
    """
    if m <= 0:
        raise DomainError(f"扰动参数必须为正: {m}")
    k_m = min(G.lipschitz_bound, 1.0 / m)
    e1 = np.zeros(G.dim)
    e1[0] = 1.0

    knots = [G.breakpoints[0]]
    values = [G.values[0]]
    for j in range(G.n_segments):
        a, b = G.breakpoints[j], G.breakpoints[j + 1]
        if k_m > 0 and np.array_equal(G.values[j], G.values[j + 1]):
            knots.append(0.5 * (a + b))
            values.append(G.values[j] + k_m * 0.5 * (b - a) * e1)
        knots.append(b)
        values.append(G.values[j + 1])
    return PiecewiseLinearGenerator(knots, np.array(values), G.lipschitz_bound)
