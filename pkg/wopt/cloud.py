"""
Cloud模块 - 样本点云

此模块提供 SampleCloud 类，用于保存样本 X_1..X_n、合并重复点后的原子及其质量，
以及对应的经验测度 mu_n。
"""

import numpy as np

from .errors import DomainError, DimensionError
from .measure import DiscreteMeasure


class SampleCloud:
    """
    表示 R^d 中的样本点云

    重复点（坐标完全相等）在构造时合并为一个原子，原子质量为 重复次数/n。
    原子顺序按照每组第一次出现的位置排列，因此没有重复点时原子与样本一一对应。

    属性:
        points (ndarray): 原始样本，形状 (n, d)
        n (int): 样本数
        d (int): 维度
        duplicate_groups (list): 按坐标相等划分的下标组，每组为递增的 tuple
        atoms (ndarray): 合并后的原子，形状 (m, d)
        weights (ndarray): 原子质量，和为 1
    """

    def __init__(self, points):
        """
        初始化点云

        Args:
            points (array_like): 形状 (n, d) 的样本；一维输入视为 d=1

        Raises:
            DomainError: 样本为空或含有非有限坐标
        """
        arr = np.asarray(points, dtype=float)
        if arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DomainError(f"样本形状非法: {arr.shape}，需要 (n, d) 且 n>=1, d>=1")
        if not np.all(np.isfinite(arr)):
            raise DomainError("样本中包含非有限坐标")

        arr = arr.copy()
        arr.flags.writeable = False
        self.points = arr
        self.n, self.d = arr.shape

        _, first_index, inverse = np.unique(arr, axis=0, return_index=True, return_inverse=True)
        inverse = np.asarray(inverse).reshape(-1)
        members = np.split(np.argsort(inverse, kind="stable"),
                           np.cumsum(np.bincount(inverse))[:-1])
        order = np.argsort(first_index, kind="stable")
        groups = [tuple(int(i) for i in members[unique_id]) for unique_id in order]
        self.duplicate_groups = groups

        atoms = arr[[group[0] for group in groups]]
        atoms.flags.writeable = False
        self.atoms = atoms

        counts = np.array([len(group) for group in groups], dtype=float)
        weights = counts / self.n
        weights.flags.writeable = False
        self.multiplicities = counts.astype(int)
        self.weights = weights

    @property
    def n_atoms(self):
        """合并重复点后的原子数"""
        return self.atoms.shape[0]

    @property
    def has_duplicates(self):
        """是否存在重复点"""
        return self.n_atoms < self.n

    def require_univariate(self):
        """
        检查点云是否为一维

        Raises:
            DimensionError: d != 1
        """
        if self.d != 1:
            raise DimensionError(f"需要一维样本，实际维度 d={self.d}")

    def empirical_measure(self):
        """返回经验测度 mu_n（合并重复点）"""
        return DiscreteMeasure(self.atoms, self.weights)

    def scaled(self, factor, shift=0.0):
        """返回 factor * X + shift 的新点云"""
        return SampleCloud(self.points * factor + shift)

    def __len__(self):
        return self.n

    def __repr__(self):
        return f"SampleCloud(n={self.n}, d={self.d}, atoms={self.n_atoms})"
