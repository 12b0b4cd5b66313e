"""
PathSolver模块 - 平方步长覆盖路径求解

覆盖路径是样本下标序列 sigma，每个样本至少出现一次，相邻两项不同，
代价为相邻样本距离平方之和。允许重复访问，因此最优覆盖路径等于
平方度量闭包上的最短 Hamilton 路径再把闭包边展开为中间样本序列。

- 小规模 (合并后 n <= EXACT_SIZE_LIMIT)：闭包 + Held-Karp 状态压缩动态规划，精确
- 大规模：最近邻起始 + 2-opt 局部搜索，启发式
- 测试用：分支定界穷举 brute_force_walk
"""

import logging

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path
from scipy.spatial import Delaunay, QhullError

from .errors import ConstructionError, SizeError, WalkValidationError

logger = logging.getLogger(__name__)

EXACT_SIZE_LIMIT = 14
BRUTE_FORCE_LIMIT = 8
# 超过该规模时闭包改用 Delaunay 图上的最短路
DENSE_CLOSURE_LIMIT = 400
# 稀疏闭包按源点分块重建前驱表
CLOSURE_BLOCK = 256
TWO_OPT_MAX_PASSES = 200


class ClosureMatrix:
    """
    平方度量闭包

    属性:
        cost (ndarray): n x n 闭包代价 c(i, j)
        predecessor (ndarray): predecessor[i, j] 为 i 到 j 最短路上 j 的前一个点
    """

    def __init__(self, cost, predecessor):
        self.cost = cost
        self.predecessor = predecessor

    @property
    def size(self):
        return self.cost.shape[0]

    def path(self, i, j):
        """
        重建 i 到 j 的闭包路径

        Returns:
            list: 以 i 开始、以 j 结束的下标序列
        """
        seq = [int(j)]
        while seq[-1] != i:
            seq.append(int(self.predecessor[i, seq[-1]]))
            if len(seq) > self.size + 1 or seq[-1] < 0:
                raise ConstructionError(f"闭包前驱表损坏: {i} -> {j}")
        seq.reverse()
        return seq

    def __repr__(self):
        return f"ClosureMatrix(n={self.size})"


class WalkSolution:
    """
    覆盖路径 (k, sigma)

    属性:
        order (tuple): 样本（合并后原子）下标序列，长度 n + k
        k (int): 重复访问次数
        cost (float): 平方步长之和
        exact (bool): 是否可证明最优
    """

    def __init__(self, order, cost, exact=False, n=None):
        self.order = tuple(int(i) for i in order)
        n = len(set(self.order)) if n is None else int(n)
        self.k = len(self.order) - n
        self.cost = float(cost)
        self.exact = bool(exact)

    @property
    def length(self):
        """路径长度 n + k"""
        return len(self.order)

    def visits(self, n):
        """
        返回每个样本在路径中出现的位置 sigma^{-1}(i)

        Args:
            n (int): 样本数

        Returns:
            list: 长度 n 的列表，每项为位置列表
        """
        result = [[] for _ in range(n)]
        for pos, i in enumerate(self.order):
            result[i].append(pos)
        return result

    def validate(self, points, tol=1e-9):
        """
        检查路径覆盖所有样本、相邻不重复且代价一致

        Args:
            points (ndarray): 合并后的原子，形状 (n, d)
            tol (float): 代价的相对容差

        Raises:
            WalkValidationError: 路径不合法
        """
        n = points.shape[0]
        order = np.asarray(self.order, dtype=int)
        if order.size == 0 or order.min() < 0 or order.max() >= n:
            raise WalkValidationError(f"路径下标越界或为空: n={n}")
        if len(set(self.order)) != n:
            missing = sorted(set(range(n)) - set(self.order))
            raise WalkValidationError(f"路径未覆盖样本: {missing}")
        if np.any(order[1:] == order[:-1]):
            raise WalkValidationError("路径中存在相邻重复的下标")
        if self.k != order.size - n:
            raise WalkValidationError(f"k={self.k} 与路径长度 {order.size} 不一致")
        recomputed = walk_cost(points, order)
        if abs(recomputed - self.cost) > tol * max(1.0, recomputed):
            raise WalkValidationError(f"路径代价 {self.cost} 与重算值 {recomputed} 不一致")

    def euclidean_length(self, points):
        """路径的欧氏长度（非平方）"""
        order = np.asarray(self.order, dtype=int)
        return float(np.sum(np.linalg.norm(np.diff(points[order], axis=0), axis=1)))

    def reversed(self):
        """返回反向路径，代价不变"""
        return WalkSolution(self.order[::-1], self.cost, self.exact, n=self.length - self.k)

    def to_dict(self):
        return {"order": list(self.order), "k": self.k, "cost": self.cost, "exact": self.exact}

    @classmethod
    def from_dict(cls, data):
        """由 {"order", "k", "cost", "exact"} 恢复"""
        try:
            order = [int(i) for i in data["order"]]
            walk = cls(order, float(data["cost"]), bool(data.get("exact", False)))
        except (KeyError, TypeError, ValueError) as e:
            raise WalkValidationError(f"路径 JSON 格式错误: {e}")
        if "k" in data and int(data["k"]) != walk.k:
            raise WalkValidationError(f"k={data['k']} 与路径长度不一致")
        return walk

    def __repr__(self):
        return f"WalkSolution(length={self.length}, k={self.k}, cost={self.cost}, exact={self.exact})"


def walk_cost(points, order):
    """计算 sum ||X_{sigma(j+1)} - X_{sigma(j)}||^2"""
    order = np.asarray(order, dtype=int)
    if order.size < 2:
        return 0.0
    steps = np.diff(points[order], axis=0)
    return float(np.einsum("ij,ij->", steps, steps))


def _squared_distances(points):
    diff = points[:, None, :] - points[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _dense_closure(points):
    """Floyd-Warshall，按下标升序松弛；代价相同时保留跳数更少的路径"""
    n = points.shape[0]
    cost = _squared_distances(points)
    tol = 1e-12 * max(1.0, float(cost.max()))
    pred = np.repeat(np.arange(n)[:, None], n, axis=1)
    hops = np.ones((n, n), dtype=int)
    np.fill_diagonal(hops, 0)

    for m in range(n):
        via = cost[:, m:m + 1] + cost[m:m + 1, :]
        via_hops = hops[:, m:m + 1] + hops[m:m + 1, :]
        better = via < cost - tol
        tie = ~better & (via <= cost + tol) & (via_hops < hops)
        update = better | tie
        if not np.any(update):
            continue
        cost = np.where(better, via, cost)
        hops = np.where(update, via_hops, hops)
        pred = np.where(update, pred[m:m + 1, :], pred)
    return ClosureMatrix(cost, pred)


def _delaunay_edges(points):
    """Delaunay 图的无向边（一维时为排序后的相邻点）"""
    n, d = points.shape
    if d == 1:
        order = np.argsort(points[:, 0], kind="stable")
        return np.stack([order[:-1], order[1:]], axis=1)
    simplices = Delaunay(points).simplices
    pairs = []
    for a in range(simplices.shape[1]):
        for b in range(a + 1, simplices.shape[1]):
            pairs.append(np.sort(simplices[:, [a, b]], axis=1))
    return np.unique(np.vstack(pairs), axis=0)


def _sparse_closure(points):
    """
    Delaunay 图上的最短平方路径

    平方代价的最短路只使用 Gabriel 边，而 Gabriel 图是 Delaunay 图的子图。
    """
    n = points.shape[0]
    edges = _delaunay_edges(points)
    w = np.sum((points[edges[:, 0]] - points[edges[:, 1]]) ** 2, axis=1)
    graph = csr_matrix((w, (edges[:, 0], edges[:, 1])), shape=(n, n))
    cost = shortest_path(graph, method="D", directed=False)
    if not np.all(np.isfinite(cost)):
        raise ConstructionError("Delaunay 图不连通")
    return ClosureMatrix(cost, _fewest_hop_predecessors(cost, edges, w))


def _fewest_hop_predecessors(cost, edges, w):
    """
    在代价最小的路径中取跳数最少者重建前驱表，跳数也相同时取下标最小的前驱

    紧边 (u, v) 满足 c(s, u) + w(u, v) = c(s, v)（容差与稠密闭包相同），
    跳数在紧边构成的无环图上逐轮松弛。按源点分块以限制内存。
    """
    n = cost.shape[0]
    tol = 1e-12 * max(1.0, float(cost.max()))
    src = np.concatenate([edges[:, 0], edges[:, 1]])
    dst = np.concatenate([edges[:, 1], edges[:, 0]])
    weight = np.concatenate([w, w])
    order = np.argsort(dst, kind="stable")
    src, dst, weight = src[order], dst[order], weight[order]
    # 连通图中每个点至少有一条入边
    starts = np.searchsorted(dst, np.arange(n))

    pred = np.empty((n, n), dtype=int)
    for lo in range(0, n, CLOSURE_BLOCK):
        rows = np.arange(lo, min(lo + CLOSURE_BLOCK, n))
        local = np.arange(rows.size)
        block = cost[rows]
        tight = np.abs(block[:, src] + weight[None, :] - block[:, dst]) <= tol
        hops = np.full(block.shape, np.inf)
        hops[local, rows] = 0.0
        for _ in range(n):
            cand = np.where(tight, hops[:, src] + 1.0, np.inf)
            best = np.minimum.reduceat(cand, starts, axis=1)
            best[local, rows] = 0.0
            if np.array_equal(best, hops):
                break
            hops = best
        key = np.where(tight & (hops[:, src] + 1.0 == hops[:, dst]), hops[:, src] * n + src, np.inf)
        choice = np.minimum.reduceat(key, starts, axis=1)
        choice = np.where(np.isfinite(choice), choice, -1.0)
        pred[rows] = np.where(choice >= 0, np.mod(choice, n), -1).astype(int)
        pred[rows, rows] = rows
    return pred


def squared_metric_closure(cloud, method="auto"):
    """
    计算合并后原子的平方度量闭包

    Args:
        cloud (SampleCloud): 点云
        method (str): "auto"（n <= DENSE_CLOSURE_LIMIT 时稠密，否则 Delaunay 图）、"dense" 或 "sparse"

    Returns:
        ClosureMatrix: 闭包代价与前驱表

    Raises:
        ValueError: 未知的 method
    """
    if method not in ("auto", "dense", "sparse"):
        raise ValueError(f"未知的闭包方法: {method}")
    points = cloud.atoms
    n = points.shape[0]
    if method == "dense" or (method == "auto" and n <= DENSE_CLOSURE_LIMIT):
        return _dense_closure(points)
    try:
        closure = _sparse_closure(points)
        logger.debug(f"使用 Delaunay 图计算闭包: n={n}")
        return closure
    except (QhullError, ValueError, ConstructionError) as e:
        logger.warning(f"Delaunay 闭包失败，退回稠密 Floyd-Warshall: {e}")
        return _dense_closure(points)


def _held_karp(cost):
    """
    开放 Hamilton 路径的 Held-Karp 动态规划

    状态 (mask, last)，按 mask 升序转移，取第一个 argmin。

    Returns:
        tuple: (最小代价, 访问顺序)
    """
    n = cost.shape[0]
    if n == 1:
        return 0.0, [0]
    full = (1 << n) - 1
    dp = np.full((1 << n, n), np.inf)
    parent = np.full((1 << n, n), -1, dtype=int)
    for i in range(n):
        dp[1 << i, i] = 0.0
    bits = 1 << np.arange(n)

    for mask in range(1, full):
        row = dp[mask]
        if not np.any(np.isfinite(row)):
            continue
        # cand[last, j] = dp[mask, last] + c(last, j)
        cand = row[:, None] + cost
        best_last = np.argmin(cand, axis=0)
        best = cand[best_last, np.arange(n)]
        for j in np.nonzero((mask & bits) == 0)[0]:
            nxt = mask | int(bits[j])
            if best[j] < dp[nxt, j]:
                dp[nxt, j] = best[j]
                parent[nxt, j] = best_last[j]

    last = int(np.argmin(dp[full]))
    value = float(dp[full, last])
    order = []
    mask = full
    while last >= 0:
        order.append(last)
        prev = int(parent[mask, last])
        mask ^= 1 << last
        last = prev
    order.reverse()
    return value, order


def _expand(closure, hamiltonian):
    order = [hamiltonian[0]]
    for a, b in zip(hamiltonian[:-1], hamiltonian[1:]):
        order.extend(closure.path(a, b)[1:])
    return order


def exact_covering_walk(cloud, size_limit=EXACT_SIZE_LIMIT):
    """
    精确求解最小平方步长覆盖路径

    Args:
        cloud (SampleCloud): 点云（重复点已合并）
        size_limit (int): 合并后样本数上限

    Returns:
        WalkSolution: exact=True 的最优路径

    Raises:
        SizeError: 样本数超过上限
    """
    n = cloud.n_atoms
    if n > size_limit:
        raise SizeError(f"精确求解要求合并后 n <= {size_limit}，实际 n={n}，请使用启发式求解")
    if n == 1:
        return WalkSolution([0], 0.0, exact=True)

    closure = squared_metric_closure(cloud)
    value, hamiltonian = _held_karp(closure.cost)
    order = _expand(closure, hamiltonian)
    cost = walk_cost(cloud.atoms, order)
    if cost > value * (1.0 + 1e-9) + 1e-12:
        raise ConstructionError(f"展开后的路径代价 {cost} 高于闭包代价 {value}")
    walk = WalkSolution(order, cost, exact=True, n=n)
    logger.info(f"精确覆盖路径: n={n}, k={walk.k}, cost={cost}")
    return walk


def brute_force_walk(cloud, k_max=2, size_limit=BRUTE_FORCE_LIMIT):
    """
    穷举长度不超过 n + k_max 的覆盖序列（分支定界）

    Args:
        cloud (SampleCloud): 点云
        k_max (int): 最大重复访问次数
        size_limit (int): n + k_max 的上限

    Returns:
        WalkSolution: 穷举意义下的最优路径

    Raises:
        SizeError: 规模过大
    """
    points = cloud.atoms
    n = points.shape[0]
    if k_max < 0 or n + k_max > size_limit:
        raise SizeError(f"穷举要求 n + k_max <= {size_limit}，实际 n={n}, k_max={k_max}")
    if n == 1:
        return WalkSolution([0], 0.0, exact=True)

    sq = _squared_distances(points)
    max_len = n + k_max
    best = {"cost": np.inf, "order": None}

    def search(seq, covered, cost):
        if cost >= best["cost"] - 1e-12:
            return
        if len(covered) == n:
            best["cost"] = cost
            best["order"] = list(seq)
            return
        if max_len - len(seq) < n - len(covered):
            return
        last = seq[-1]
        for j in range(n):
            if j == last:
                continue
            seq.append(j)
            added = j not in covered
            if added:
                covered.add(j)
            search(seq, covered, cost + sq[last, j])
            if added:
                covered.discard(j)
            seq.pop()

    for start in range(n):
        search([start], {start}, 0.0)
    return WalkSolution(best["order"], walk_cost(points, best["order"]), exact=True, n=n)


def _nearest_neighbor_order(cost, start):
    n = cost.shape[0]
    visited = np.zeros(n, dtype=bool)
    order = [start]
    visited[start] = True
    for _ in range(n - 1):
        row = np.where(visited, np.inf, cost[order[-1]])
        nxt = int(np.argmin(row))
        order.append(nxt)
        visited[nxt] = True
    return np.array(order, dtype=int)


def _two_opt_path(cost, order, max_passes=TWO_OPT_MAX_PASSES):
    """
    开放路径的 2-opt

    加入一个到所有点代价为 0 的虚拟点，把开放路径变成回路后做段翻转。
    """
    n = cost.shape[0]
    aug = np.zeros((n + 1, n + 1))
    aug[:n, :n] = cost
    tour = np.concatenate([[n], order])
    m = n + 1
    tol = 1e-12 * max(1.0, float(cost.max()))

    for passes in range(max_passes):
        improved = False
        gain = 0.0
        for i in range(1, m - 1):
            a, b = tour[i - 1], tour[i]
            js = np.arange(i + 1, m)
            c = tour[js]
            d = tour[(js + 1) % m]
            delta = aug[a, c] + aug[b, d] - aug[a, b] - aug[c, d]
            best = int(np.argmin(delta))
            if delta[best] < -tol:
                j = int(js[best])
                tour[i:j + 1] = tour[i:j + 1][::-1].copy()
                gain -= float(delta[best])
                improved = True
        logger.debug(f"2-opt 第 {passes + 1} 轮，改进 {gain}")
        if not improved:
            break
    else:
        logger.warning(f"2-opt 在 {max_passes} 轮内未收敛")

    pos = int(np.nonzero(tour == n)[0][0])
    return np.concatenate([tour[pos + 1:], tour[:pos]])


def heuristic_covering_walk(cloud, seed=0):
    """
    启发式覆盖路径：闭包上的最近邻起始 + 2-opt，再展开闭包边

    Args:
        cloud (SampleCloud): 点云
        seed (int): 随机种子，决定最近邻的起点

    Returns:
        WalkSolution: exact=False 的可行路径
    """
    n = cloud.n_atoms
    if n == 1:
        return WalkSolution([0], 0.0, exact=False)
    closure = squared_metric_closure(cloud)
    start = int(np.random.default_rng(seed).integers(n))
    order = _nearest_neighbor_order(closure.cost, start)
    order = _two_opt_path(closure.cost, order)
    expanded = _expand(closure, [int(i) for i in order])
    walk = WalkSolution(expanded, walk_cost(cloud.atoms, expanded), exact=False, n=n)
    logger.info(f"启发式覆盖路径: n={n}, k={walk.k}, cost={walk.cost}, seed={seed}")
    return walk


def solve_covering_walk(cloud, method="auto", seed=0):
    """
    按规模选择求解器

    Args:
        cloud (SampleCloud): 点云
        method (str): "auto"、"exact" 或 "heuristic"
        seed (int): 启发式的随机种子

    Returns:
        WalkSolution: 覆盖路径
    """
    if method == "exact":
        return exact_covering_walk(cloud)
    if method == "heuristic":
        return heuristic_covering_walk(cloud, seed=seed)
    if method != "auto":
        raise ValueError(f"未知的求解方式: {method}")
    if cloud.n_atoms <= EXACT_SIZE_LIMIT:
        return exact_covering_walk(cloud)
    logger.info(f"n={cloud.n_atoms} 超过精确求解上限 {EXACT_SIZE_LIMIT}，使用启发式")
    return heuristic_covering_walk(cloud, seed=seed)


def min_permutation_path_length(cloud, size_limit=EXACT_SIZE_LIMIT):
    """
    所有排列中欧氏（非平方）路径长度的最小值

    Raises:
        SizeError: 样本数超过上限
    """
    points = cloud.atoms
    n = points.shape[0]
    if n > size_limit:
        raise SizeError(f"最短排列路径要求 n <= {size_limit}，实际 n={n}")
    dist = np.sqrt(_squared_distances(points))
    value, _ = _held_karp(dist)
    return value


def visit_half_lengths(points, walk):
    """
    每个路径位置 j 的 1/2(||X_{sigma(j-1)} - X_{sigma(j)}|| + ||X_{sigma(j+1)} - X_{sigma(j)}||)

    端点约定 X_{sigma(0)} = X_{sigma(1)}，X_{sigma(n+k+1)} = X_{sigma(n+k)}。
    """
    order = np.asarray(walk.order, dtype=int)
    steps = np.linalg.norm(np.diff(points[order], axis=0), axis=1)
    before = np.concatenate([[0.0], steps])
    after = np.concatenate([steps, [0.0]])
    return 0.5 * (before + after)


def k2_lower_bound(cloud, walk):
    """
    多维构造所需的最小 Lipschitz 常数 K_2

    K_2 = max_i (1/alpha_i) sum_{j in sigma^{-1}(i)} 1/2(||X_{sigma(j-1)}-X_i|| + ||X_{sigma(j+1)}-X_i||)，
    无重复点时 alpha_i = 1/n。结果同时检查不小于路径的欧氏长度，
    小规模时还检查不小于最短排列路径长度。

    Args:
        cloud (SampleCloud): 点云
        walk (WalkSolution): 覆盖路径

    Returns:
        float: K_2；n=1 时为 0

    Raises:
        WalkValidationError: 路径与点云不一致
        ConstructionError: 下界检查失败
    """
    points = cloud.atoms
    walk.validate(points)
    n = points.shape[0]
    if n == 1:
        return 0.0
    half = visit_half_lengths(points, walk)
    sums = np.bincount(np.asarray(walk.order, dtype=int), weights=half, minlength=n)
    k_lower = float(np.max(sums / cloud.weights))

    length = walk.euclidean_length(points)
    if k_lower < length * (1.0 - 1e-9):
        raise ConstructionError(f"K_2={k_lower} 小于路径欧氏长度 {length}")
    if n <= EXACT_SIZE_LIMIT:
        min_path = min_permutation_path_length(cloud)
        if k_lower < min_path * (1.0 - 1e-9):
            raise ConstructionError(f"K_2={k_lower} 小于最短排列路径长度 {min_path}")
    return k_lower
